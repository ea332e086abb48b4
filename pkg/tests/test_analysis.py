import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from swipt_ddf.analysis import (
    _mean_q_shifted,
    _mean_q_with_relay,
    _scaled_exp1,
    analysis_point,
    average_ser_closed_form,
    average_ser_quadrature,
    conditional_ser,
    eta,
    pe_monotonicity_lhs,
    pep_dominant_pairs,
    q_approx_exp,
    q_approx_two_term,
    q_function,
    relay_ser_eps,
    relay_ser_eps_slope,
    ser_derivative,
    tradeoff_terms,
)
from swipt_ddf.channel import ChannelRealization, InstantGains, draw_channel, instant_gains, relay_power, transmit_down
from swipt_ddf.config import SystemConfig, derive_constants
from swipt_ddf.detectors import DestinationObservation, detect_destination_proposed, metric_moments
from swipt_ddf.dpsk import encode_indices, make_alphabet

GRID_CONFIGS = [(2, 30.0), (8, 40.0), (2, 25.0), (8, 25.0), (8, 30.0)]


def _cfg(M, snr, **kw):
    return SystemConfig(snr_db=snr, modulation_order=M, **kw)


class TestQFunction:
    def test_zero(self):
        assert q_function(0.0) == 0.5

    def test_quantile(self):
        assert q_function(1.6449) == pytest.approx(0.05, abs=1e-5)

    def test_reflection(self):
        x = np.linspace(-4, 4, 41)
        np.testing.assert_allclose(q_function(-x), 1 - q_function(x), atol=1e-15)

    def test_decreasing(self):
        assert np.all(np.diff(q_function(np.linspace(-5, 5, 101))) < 0)

    def test_exp_approx_value(self):
        assert q_approx_exp(2.0) == pytest.approx(0.5 * math.exp(-2.0))
        assert q_approx_exp(2.0) == pytest.approx(0.067668, abs=5e-7)

    @pytest.mark.xfail(strict=True, reason="the two-term form peaks at 26% error near x = 1.86; see ledger")
    def test_two_term_within_2pct(self):
        x = np.linspace(0.5, 5, 200)
        assert np.max(np.abs(q_approx_two_term(x) / q_function(x) - 1)) < 0.02

    def test_two_term_observed_error(self):
        x = np.linspace(0.5, 5, 451)
        err = q_approx_two_term(x) / q_function(x) - 1
        assert 0.26 < np.max(np.abs(err)) < 0.27
        assert x[np.argmax(np.abs(err))] == pytest.approx(1.86, abs=0.02)

    def test_upper_bound_behavior(self):
        # observed: the single exponential bounds Q from above on x >= 0.5,
        # the two-term form does not everywhere
        x = np.linspace(0.5, 6, 200)
        assert np.all(q_approx_exp(x) >= q_function(x))
        assert np.any(q_approx_two_term(x) < q_function(x))


class TestRelaySer:
    def test_dbpsk_reference(self):
        # d_sr = 0 makes L_sr = 1 and b3 = Ps; rho(0.8) = 1/6 so rho*b3 = 9 needs Ps = 54
        cfg = SystemConfig(snr_db=10 * math.log10(54.0), d_sr=1e-9)
        assert relay_ser_eps(0.8, cfg) == pytest.approx(0.05)

    @pytest.mark.parametrize("M", [2, 4, 8])
    def test_increasing_in_varrho(self, M):
        cfg = _cfg(M, 35.0)
        e = relay_ser_eps(np.linspace(0.01, 0.99, 99), cfg)
        assert np.all(np.diff(e) > 0)

    @pytest.mark.parametrize("M", [2, 8])
    def test_vanishes_for_perfect_link(self, M):
        assert relay_ser_eps(0.5, _cfg(M, 120.0)) < 1e-5

    @pytest.mark.parametrize("M", [2, 4, 8])
    @pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
    def test_slope_matches_finite_difference(self, M, v):
        cfg = _cfg(M, 30.0)
        h = 1e-6
        fd = (relay_ser_eps(v + h, cfg) - relay_ser_eps(v - h, cfg)) / (2 * h)
        assert relay_ser_eps_slope(v, cfg) == pytest.approx(fd, rel=1e-6)


class TestEta:
    def test_bpsk_half(self):
        assert eta(0.5, 2) == 0.0

    def test_8psk(self):
        assert eta(0.1, 8) == pytest.approx(math.log(63))
        assert eta(0.1, 8) == pytest.approx(4.14313, abs=5e-6)

    def test_small_eps(self):
        e = 1e-9
        assert eta(e, 4) == pytest.approx(math.log(1 / e) + math.log(3), rel=1e-8)

    @pytest.mark.parametrize("e, M", [(0.0, 2), (0.6, 2), (-0.1, 8), (0.9, 8)])
    def test_domain(self, e, M):
        with pytest.raises(ValueError):
            eta(e, M)

    @given(st.floats(1e-6, 0.49), st.floats(1e-6, 0.49))
    def test_decreasing(self, e1, e2):
        if e1 < e2:
            assert eta(e1, 8) > eta(e2, 8)


class TestConditionalSer:
    cfg = _cfg(2, 30.0)

    def _gains(self, n=50, seed=0, cfg=None):
        cfg = cfg or self.cfg
        return instant_gains(draw_channel(np.random.default_rng(seed), cfg, size=n), cfg)

    def test_vanishes_with_strong_direct_link(self):
        g = self._gains(n=1)
        g.gamma_sd[:] = 1e9
        assert conditional_ser(g, 0.8, self.cfg).total[0] < 1e-12

    def test_perfect_relay_limit(self):
        cfg = SystemConfig(snr_db=30.0, avg_channel_power={"sr": 1e9, "sd": 1.0, "rd": 1.0})
        k = derive_constants(cfg)
        g = self._gains(cfg=cfg)
        c = conditional_ser(g, 0.8, cfg)
        assert np.max(c.p_e) < 1e-6
        arg = np.sqrt(k.g_sd * g.gamma_sd + 0.8 * 0.6 * k.g_rd * g.hsr_sq * g.gamma_rd)
        # the eta-shifted term vanishes, not exactly zero
        np.testing.assert_allclose(c.p_c, 2 * q_function(arg), rtol=1e-6, atol=1e-11)

    def test_degenerate_direct_link(self):
        g = self._gains(n=2)
        g.gamma_sd[0] = 0.0
        with pytest.raises(ValueError):
            conditional_ser(g, 0.8, self.cfg)

    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_no_clamping_at_mean_gains(self, M, snr):
        cfg = _cfg(M, snr)
        ps = cfg.tx_power
        g = InstantGains(np.array([ps]), np.array([ps]), np.array([ps]), np.array([1.0]))
        for v in np.linspace(0.05, 0.95, 19):
            assert conditional_ser(g, v, cfg).clamped == 0

    @pytest.mark.parametrize("M, snr", [(2, 30.0), (8, 40.0), (2, 25.0)])
    def test_no_clamping_over_draws(self, M, snr):
        cfg = _cfg(M, snr)
        g = self._gains(n=2000, seed=1, cfg=cfg)
        for v in np.linspace(0.05, 0.95, 19):
            assert conditional_ser(g, v, cfg).clamped == 0

    def test_deep_fades_clamp_rarely(self):
        # four terms with coefficients up to 2 can pass 1 when gamma_sd is tiny
        cfg = _cfg(8, 25.0)
        g = self._gains(n=2000, seed=1, cfg=cfg)
        counts = [conditional_ser(g, v, cfg).clamped for v in np.linspace(0.05, 0.95, 19)]
        assert 0 < max(counts) <= 20  # at most 1% of draws

    @staticmethod
    def _frozen_mc(cfg, hs, n=1_000_000, seed=0):
        """Destination SER at frozen gains, relay errors drawn i.i.d. with the average eps."""
        M = cfg.modulation_order
        k = derive_constants(cfg)
        a = make_alphabet(M)
        rng = np.random.default_rng(seed)
        e = float(relay_ser_eps(cfg.ps_ratio, cfg))
        info = rng.integers(0, M, (n, 1))
        wrong = rng.random((n, 1)) < e
        relay = np.where(wrong, (info + rng.integers(1, M, (n, 1))) % M, info)
        h_sr, h_sd, h_rd = (complex(h) for h in hs)
        y_sd = transmit_down(a.symbols(encode_indices(info, M)), cfg.tx_power, k.loss_sd,
                             np.full(n, h_sd), cfg, rng, "sd")
        y_rd = transmit_down(a.symbols(encode_indices(relay, M)), relay_power(h_sr, cfg), k.loss_rd,
                             np.full(n, h_rd), cfg, rng, "rd")
        obs = DestinationObservation(y_sd[:, :-1], y_sd[:, 1:], y_rd[:, :-1], y_rd[:, 1:], 1.0, 1.0, e,
                                     float(eta(e, M)))
        mc = np.mean(detect_destination_proposed(obs, a) != info)
        formula = conditional_ser(instant_gains(ChannelRealization(h_sr, h_sd, h_rd), cfg), cfg.ps_ratio, cfg)
        return mc, float(formula.total)

    FROZEN_DRAWS = [(1.2, 0.4, 0.8), (0.6, 0.5, 0.6), (1.0, 0.3, 0.3), (0.8, 0.45, 0.5)]

    @pytest.mark.xfail(strict=True, reason="Gaussian metric model is pessimistic at fixed gains; see ledger")
    def test_frozen_channel_mc_within_30pct(self):
        for hs in self.FROZEN_DRAWS:
            mc, formula = self._frozen_mc(self.cfg, hs)
            assert abs(formula - mc) / mc <= 0.3

    def test_frozen_channel_formula_is_pessimistic(self):
        for hs in self.FROZEN_DRAWS:
            mc, formula = self._frozen_mc(self.cfg, hs, n=300_000)
            assert formula >= mc > 0


class TestQuadrature:
    cfg = _cfg(2, 30.0)

    def test_frozen_nested_quad_oracle(self):
        # independent nested scipy.integrate evaluation, computed once and frozen
        assert average_ser_quadrature(0.8, self.cfg) == pytest.approx(0.0053388993, rel=2e-7)

    @pytest.mark.parametrize("mean_u", [0.5, 3.0, 25.0, 400.0])
    @pytest.mark.parametrize("et", [0.0, 1.5, 6.0])
    @pytest.mark.parametrize("sign", [1, -1])
    def test_shifted_terms_against_quad(self, mean_u, et, sign):
        def integrand(t):
            u = mean_u * t
            if u == 0:
                return 0.5 * (1 - sign) if et > 0 else 0.5
            return math.exp(-t) * q_function(math.sqrt(u) + sign * et / (2 * math.sqrt(u)))

        ref = integrate.quad(integrand, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-11)[0]
        kappa = math.sqrt(1 + 2 / mean_u)
        assert _mean_q_shifted(kappa, et, sign) == pytest.approx(ref, rel=1e-7, abs=1e-13)

    @pytest.mark.parametrize("z", [1e-3, 0.3, 5.0, 49.9, 50.0, 80.0, 1e4])
    def test_scaled_exp1(self, z):
        ref = integrate.quad(lambda t: math.exp(-t) / (1 + t / z), 0, np.inf, epsrel=1e-12)[0]
        assert _scaled_exp1(np.array([z]))[0] == pytest.approx(ref, rel=1e-9)

    def test_relay_term_against_sampling(self):
        rng = np.random.default_rng(11)
        n = 2_000_000
        g_gb, s = 2.5, 4.0
        u = rng.exponential(g_gb, n)
        t = rng.exponential(1.0, (2, n))
        samples = q_function(np.sqrt(u + s * t[0] * t[1]))
        se = samples.std() / math.sqrt(n)
        assert abs(_mean_q_with_relay(g_gb, s, 32) - samples.mean()) < 4 * se

    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    @pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
    def test_node_convergence(self, M, snr, v):
        cfg = _cfg(M, snr)
        a = average_ser_quadrature(v, cfg, nodes=32)
        b = average_ser_quadrature(v, cfg, nodes=64)
        assert a == pytest.approx(b, rel=5e-5)

    @pytest.mark.parametrize("M", [2, 8])
    def test_decreasing_in_snr(self, M):
        sers = [average_ser_quadrature(0.8, _cfg(M, snr)) for snr in range(30, 75, 5)]
        assert np.all(np.diff(sers) < 0)
        assert sers[-1] < 1e-4

    def test_components_sum(self):
        cfg = _cfg(8, 40.0)
        p_c, p_e = average_ser_quadrature(0.6, cfg, components=True)
        assert p_c + p_e == pytest.approx(average_ser_quadrature(0.6, cfg))

    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_unimodal(self, M, snr):
        cfg = _cfg(M, snr)
        grid = np.linspace(0.01, 0.99, 99)
        vals = np.array([average_ser_quadrature(v, cfg) for v in grid])
        signs = np.sign(np.diff(vals))
        assert np.count_nonzero(np.diff(signs) != 0) == 1


class TestClosedForm:
    cfg = _cfg(8, 40.0)

    def test_z3_over_z1(self):
        from swipt_ddf.analysis import _z_terms

        k = derive_constants(self.cfg)
        e = relay_ser_eps(0.6, self.cfg)
        et = eta(e, 8)
        z1, _, z3 = _z_terms(0.6, e, et, k)
        assert z3 / z1 == pytest.approx(math.exp(et))

    def test_pe_vanishes_with_eps(self):
        cfg = SystemConfig(snr_db=40.0, modulation_order=8, avg_channel_power={"sr": 1e8, "sd": 1, "rd": 1})
        _, p_e = average_ser_closed_form(0.5, cfg)
        assert p_e < 1e-6

    def test_invalid_regime(self):
        with pytest.raises(ValueError):
            average_ser_closed_form(0.98, _cfg(8, 0.0))

    @pytest.mark.parametrize("M, snr", [(2, 30.0), (8, 40.0), (8, 30.0)])
    @pytest.mark.parametrize("v", [0.3, 0.8])
    def test_terms_are_half_the_approximant_average(self, M, snr, v):
        """Against ``E[exp(-z^2/2) / 2]`` averaged by quad: each closed-form term is
        about half its share of ``P_C`` or ``P_E``, so the total is uniformly halved."""
        from scipy.special import exp1

        from swipt_ddf.analysis import _z_terms

        cfg = _cfg(M, snr)
        k = derive_constants(cfg)
        e = relay_ser_eps(v, cfg)
        et = eta(e, M)
        z1, z2, z3 = _z_terms(v, e, et, k)
        ggb = k.g_sd * k.gamma_bar_sd

        def avg(f):
            return integrate.quad(lambda t: math.exp(-t) * f(ggb * t), 0, np.inf, limit=400,
                                  epsabs=0, epsrel=1e-10)[0]

        up = avg(lambda u: 0.5 * math.exp(-(math.sqrt(u) + et / (2 * math.sqrt(u))) ** 2 / 2) if u > 0 else 0.0)
        down = avg(lambda u: 0.5 * math.exp(-(math.sqrt(u) - et / (2 * math.sqrt(u))) ** 2 / 2) if u > 0 else 0.0)
        s = v * cfg.eh_efficiency * k.g_rd * k.gamma_bar_rd
        relay = (2 / s) * math.exp(2 / s) * exp1(2 / s) / (ggb + 2)
        # P_C carries 2(1-eps)(relay + up); the closed form has (1-eps)(z2 + z1)
        assert z1 == pytest.approx(up, rel=0.15)
        assert z3 == pytest.approx(down, rel=0.15)
        assert z2 == pytest.approx(relay, rel=0.25)
        # P_E: 2 eps E[exp(-u/2)/2] against eps * a4, exactly half
        assert k.a4 == pytest.approx(avg(lambda u: 0.5 * math.exp(-u / 2)), rel=1e-8)


class TestDerivative:
    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_matches_finite_difference(self, M, snr):
        cfg = _cfg(M, snr)
        h = 1e-4
        for v in np.linspace(0.2, 0.9, 15):
            fd = (sum(average_ser_closed_form(v + h, cfg)) - sum(average_ser_closed_form(v - h, cfg))) / (2 * h)
            assert ser_derivative(v, cfg) == pytest.approx(fd, rel=1e-4)

    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_single_sign_change(self, M, snr):
        d = ser_derivative(np.linspace(0.02, 0.98, 97), _cfg(M, snr))
        assert np.count_nonzero(np.diff(np.sign(d)) != 0) == 1
        assert d[0] < 0 < d[-1]

    def test_vectorized(self):
        cfg = _cfg(2, 30.0)
        v = np.array([0.3, 0.7])
        np.testing.assert_allclose(ser_derivative(v, cfg), [ser_derivative(x, cfg) for x in v])


class TestTradeoff:
    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_monotone_and_dominated(self, M, snr):
        cfg = _cfg(M, snr)
        g = instant_gains(draw_channel(np.random.default_rng(2), cfg, size=100), cfg)
        grid = np.linspace(0.05, 0.95, 19)
        pc, pe = zip(*(tradeoff_terms(g, v, cfg) for v in grid))
        assert np.all(np.diff(np.array(pc), axis=0) < 0)
        assert np.all(np.diff(np.array(pe), axis=0) > 0)
        full = conditional_ser(g, 0.5, cfg)
        tc, te = tradeoff_terms(g, 0.5, cfg)
        assert np.all(tc <= full.p_c) and np.all(te <= full.p_e)

    @pytest.mark.parametrize("M, snr", GRID_CONFIGS)
    def test_sufficient_condition_when_eta_large(self, M, snr):
        cfg = _cfg(M, snr)
        g = instant_gains(draw_channel(np.random.default_rng(3), cfg, size=200), cfg)
        checked = 0
        for v in np.linspace(0.05, 0.95, 19):
            e = relay_ser_eps(v, cfg)
            if eta(e, M) > 4:
                assert np.all(pe_monotonicity_lhs(g, v, cfg) < 1 - e)
                checked += 1
        if (M, snr) in [(2, 30.0), (8, 40.0)]:
            assert checked > 0


class TestPepPairs:
    @staticmethod
    def _moments(ch, cfg, sent, z1, z2, link):
        if np.isclose(z1, z2):
            return 0.0, 0.0
        m = metric_moments(ch, cfg, z1, z2, link=link, x_sent=sent)
        return m.mean, m.variance

    def _tail(self, parts, threshold):
        """Rank of the Gaussian Pr[sum > threshold]: minus the Q argument (Q underflows at 40 dB)."""
        mean = sum(p[0] for p in parts)
        var = sum(p[1] for p in parts)
        return -(threshold - mean) / math.sqrt(var)

    @pytest.mark.parametrize("M", [4, 8])
    def test_brute_force(self, M):
        cfg = _cfg(M, 40.0)
        a = make_alphabet(M)
        x = a.points
        pairs = pep_dominant_pairs(M)
        rng = np.random.default_rng(M)
        high_snr_draws = 0
        for _ in range(10):
            ch = draw_channel(rng, cfg)
            et = float(eta(relay_ser_eps(cfg.ps_ratio, cfg), M))
            mom = lambda s, z1, z2, link: self._moments(ch, cfg, x[s], x[z1], x[z2], link)  # noqa: E731

            # relay correct, combined vote: maximize Pr[w_sd(x1,xv) + w_rd(x1,xv) > 0]
            p = {v: self._tail([mom(0, 0, v, "sd"), mom(0, 0, v, "rd")], 0.0) for v in range(1, M)}
            assert _argmax_set(p) == {t[0] for t in pairs["correct_combined"]}

            # relay correct, split vote over nearest x_v: minimize sqrt(s) + eta / sqrt(s).
            # The stated set needs s >= eta, where the objective increases in s;
            # below that the brute-force optimum moves to the s nearest eta.
            near = [t[0] for t in pairs["correct_combined"]]
            if -mom(0, 0, near[0], "sd")[0] >= et:
                high_snr_draws += 1
            f = {}
            for v in near:
                for u in range(M):
                    if u == v:
                        continue
                    s = -mom(0, 0, v, "sd")[0] - mom(0, 0, u, "rd")[0]
                    f[(v, u)] = -(math.sqrt(s) + et / math.sqrt(s))
            if -mom(0, 0, near[0], "sd")[0] >= et:
                assert _argmax_set(f) == set(pairs["correct_split"])

            # relay wrong, combined: maximize Pr[w_sd(x1,xv) + w_rd(xr,xu) > 0] for every x_r
            found = set()
            for r in range(1, M):
                p = {(v, u): self._tail([mom(0, 0, v, "sd"), mom(r, r, u, "rd")], 0.0)
                     for v in range(1, M) for u in range(M) if u != v}
                found |= _argmax_set(p)
            assert found == set(pairs["wrong_combined"])

            # relay wrong, follow: maximize Pr[w_sd(x1,xv) + w_rd(xr,xv) > -eta] over (x_r, x_v)
            p = {(r, v): self._tail([mom(0, 0, v, "sd"), mom(r, r, v, "rd")], -et)
                 for r in range(1, M) for v in range(1, M)}
            assert {(v,) for _, v in _argmax_set(p)} == set(pairs["wrong_follow"])
            assert all(r == v for r, v in _argmax_set(p))
        assert high_snr_draws >= 5

    def test_bpsk_neighbors_coincide(self):
        assert pep_dominant_pairs(2)["correct_combined"] == [(1,)]


def _argmax_set(scores: dict, rel: float = 1e-9) -> set:
    best = max(scores.values())
    return {k for k, s in scores.items() if s >= best - rel * abs(best)}


class TestAnalysisPoint:
    def test_fields(self):
        cfg = _cfg(8, 40.0)
        p = analysis_point(0.6, cfg)
        assert p.eps == pytest.approx(relay_ser_eps(0.6, cfg))
        assert p.ser_quadrature == pytest.approx(p.p_c_avg + p.p_e_avg)
        assert p.derivative == pytest.approx(ser_derivative(0.6, cfg))
        assert 0 <= p.ser_quadrature <= 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98), st.sampled_from([2, 4, 8]), st.floats(25, 50))
def test_probabilities_in_range(v, M, snr):
    cfg = _cfg(M, snr)
    q = average_ser_quadrature(v, cfg)
    assert 0 < q < 1
    pc, pe = average_ser_closed_form(v, cfg)
    assert pc > 0 and pe > 0
    assert special.erfc(0) == 1.0
