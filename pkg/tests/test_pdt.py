"""Model families: constructors, densities, moment matching, degeneracies."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from turbchan import pdt
from turbchan.errors import DomainError, SolverError
from turbchan.numerics import RngStream, adaptive_quad
from turbchan.propagation import SampleRecord


def offset_aperture_eta(r0, S, a, nodes=96):
    """Brute-force transmittance of a Gaussian beam offset by r0.

    Radial reduction of the disc integral:
    eta(r0) = int_0^a (4 r / S) exp(-2 (r^2 + r0^2)/S) I0(4 r r0 / S) dr,
    evaluated with Gauss-Legendre and the scaled Bessel form.
    """
    from scipy.special import i0e

    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * a * (x + 1.0)
    wr = 0.5 * a * w
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))[:, None]
    integrand = (4.0 * r / S) * i0e(4.0 * r * r0 / S) * np.exp(
        -2.0 * (r - r0) ** 2 / S
    )
    return integrand @ wr


class TestMomentPair:
    def test_valid(self):
        m = pdt.MomentPair(0.5, 0.3)
        assert m.variance == pytest.approx(0.05)

    @pytest.mark.parametrize("m1,m2", [(0.5, 0.6), (0.5, 0.2), (0.0, 0.0), (1.2, 1.0)])
    def test_invalid_rejected(self, m1, m2):
        with pytest.raises(DomainError):
            pdt.MomentPair(m1, m2)

    @given(st.floats(0.01, 0.99), st.floats(0.0, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_constructors_reject_outside_envelope(self, m1, frac):
        # m2 inside (m1^2, m1) is accepted; outside must raise
        lo, hi = m1 * m1, m1
        m2_bad_hi = hi + 0.05 + frac * 0.1
        if m2_bad_hi <= 1.5:
            with pytest.raises(DomainError):
                pdt.MomentPair(m1, m2_bad_hi)
        m2_good = lo + (hi - lo) * (0.1 + 0.8 * frac)
        pdt.MomentPair(m1, m2_good)


class TestTruncLogNormal:
    def test_parameter_map_example(self):
        m = pdt.MomentPair(0.5, 0.3)
        tln = pdt.lognormal_from_moments(m)
        assert tln.sigma2 == pytest.approx(math.log(0.3 / 0.25), rel=1e-12)
        assert tln.mu == pytest.approx(-math.log(0.25 / math.sqrt(0.3)), rel=1e-12)
        assert tln.sigma2 == pytest.approx(0.1823215568, rel=1e-8)
        assert tln.mu == pytest.approx(0.7843079590, rel=1e-8)

    def test_density_normalized(self):
        tln = pdt.lognormal_from_moments(pdt.MomentPair(0.5, 0.3))
        total = adaptive_quad(lambda e: pdt.model_density(tln, e), 0.0, 1.0, 1e-9)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_moments_reproduced_when_tail_negligible(self):
        # mean far below 1: truncation bias is negligible
        m = pdt.MomentPair(0.05, 0.05**2 * 1.2)
        tln = pdt.lognormal_from_moments(m)
        got = pdt.model_moments(tln)
        assert got.m1 == pytest.approx(m.m1, rel=1e-3)
        assert got.m2 == pytest.approx(m.m2, rel=1e-3)

    def test_degenerate_raises(self):
        with pytest.raises(DomainError):
            pdt.lognormal_from_moments(pdt.MomentPair(0.5, 0.25))


class TestBetaPdt:
    def test_example_is_beta22(self):
        b = pdt.beta_from_moments(pdt.MomentPair(0.5, 0.3))
        assert b.a == pytest.approx(2.0, rel=1e-12)
        assert b.b == pytest.approx(2.0, rel=1e-12)

    def test_round_trip_exact(self):
        m = pdt.MomentPair(0.37, 0.37**2 + 0.04)
        b = pdt.beta_from_moments(m)
        got = pdt.model_moments(b)
        assert got.m1 == pytest.approx(m.m1, abs=1e-8)
        assert got.m2 == pytest.approx(m.m2, abs=1e-8)

    def test_impossible_moaccording_rejected(self):
        with pytest.raises(DomainError):
            pdt.MomentPair(0.5, 0.6)  # m2 > m1 impossible on [0, 1]

    def test_density_matches_scipy(self):
        b = pdt.beta_from_moments(pdt.MomentPair(0.6, 0.4))
        es = np.linspace(0.01, 0.99, 23)
        assert np.allclose(pdt.model_density(b, es), sps.beta.pdf(es, b.a, b.b),
                           rtol=1e-10)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, m1, t):
        m2 = m1 * m1 + (m1 - m1 * m1) * (0.05 + 0.9 * t)
        m = pdt.MomentPair(m1, m2)
        b = pdt.beta_from_moments(m)
        assert b.a > 0 and b.b > 0
        mean = b.a / (b.a + b.b)
        second = mean * (b.a + 1.0) / (b.a + b.b + 1.0)
        assert mean == pytest.approx(m1, rel=1e-9)
        assert second == pytest.approx(m2, rel=1e-9)


class TestBwGeometry:
    def test_eta0_conventions(self):
        eta0_lit = pdt.bw_geometry(4.0, 2.0, "paper_literal")[0]
        eta0_con = pdt.bw_geometry(4.0, 2.0, "consistent")[0]
        assert eta0_lit == pytest.approx(1.0 - math.exp(-1.0), rel=1e-12)
        assert eta0_con == pytest.approx(1.0 - math.exp(-2.0), rel=1e-12)

    def test_large_spot_kills_transmittance(self):
        assert pdt.bw_geometry(1e9, 1.0)[0] < 1e-8

    def test_lambda_R_finite_positive_scan(self):
        # numeric scan over a^2/S in [1e-3, 1e3] with scaled Bessel forms
        a = 1.0
        ratios = np.logspace(-3, 3, 61)
        lam, rdim = pdt._bw_lambda_R(a * a / ratios, a)
        assert np.all(np.isfinite(lam)) and np.all(lam > 0.0)
        assert np.all(np.isfinite(rdim)) and np.all(rdim > 0.0)

    def test_lambda_R_convention_independent(self):
        _, lam1, r1 = pdt.bw_geometry(3e-4, 0.02, "paper_literal")
        _, lam2, r2 = pdt.bw_geometry(3e-4, 0.02, "consistent")
        assert lam1 == lam2 and r1 == r2

    def test_small_aperture_shape_limit(self):
        # a^2/S -> 0: the transmittance profile becomes Gaussian in r0
        _, lam, _ = pdt.bw_geometry(1e6, 1.0)
        assert lam == pytest.approx(2.0, abs=1e-3)


class TestBwDensity:
    BW = pdt.BeamWander(sigma_bw2=1e-4, S=4e-4, aperture=0.02)

    def test_zero_outside_support(self):
        eta0 = self.BW.geometry()[0]
        assert pdt.bw_density(eta0 + 1e-6, self.BW) == 0.0
        assert pdt.bw_density(-0.1, self.BW) == 0.0

    def test_unit_integral(self):
        eta0 = self.BW.geometry()[0]
        total = adaptive_quad(lambda e: pdt.bw_density(e, self.BW), 0.0, eta0, 1e-9)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_cdf_step_limit_small_wander(self):
        eta0 = self.BW.geometry()[0]
        narrow = pdt.BeamWander(sigma_bw2=1e-12, S=4e-4, aperture=0.02)
        assert pdt.bw_cdf(eta0 * 0.99, narrow) < 1e-12
        assert pdt.bw_cdf(eta0 * (1 + 1e-12), narrow) == 1.0

    def test_cdf_matches_quadrature(self):
        for e in (0.2, 0.5, 0.8):
            via_quad = adaptive_quad(lambda x: pdt.bw_density(x, self.BW), 0.0, e, 1e-10)
            assert pdt.bw_cdf(e, self.BW) == pytest.approx(via_quad, abs=1e-8)

    def test_sampling_oracle_ks(self):
        # draws via eta = eta0 exp(-(r0/R)^lambda), r0 Rayleigh
        eta0, lam, R = self.BW.geometry()
        gen = RngStream(7, 0).generator()
        r0 = math.sqrt(self.BW.sigma_bw2) * np.hypot(
            gen.standard_normal(20000), gen.standard_normal(20000)
        )
        draws = eta0 * np.exp(-((r0 / R) ** lam))
        from turbchan.stats import EmpiricalSample, ks_stat

        d = ks_stat(EmpiricalSample(draws), lambda e: pdt.bw_cdf(e, self.BW))
        assert d <= 1.63 / math.sqrt(draws.size)


class TestEsposito:
    def test_zero_wander_limit(self):
        m1, m2 = pdt.bw_moments(4e-4, 0.0, 0.02)
        assert m1 == pytest.approx(-math.expm1(-2 * 0.02**2 / 4e-4), rel=1e-12)
        assert m2 == pytest.approx(m1 * m1, rel=1e-12)

    def test_full_capture_limit(self):
        m1, m2 = pdt.bw_moments(4e-4, 1e-4, 10.0)
        assert m1 == pytest.approx(1.0, abs=1e-12)
        assert m2 == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("S,s2,a", [(4e-4, 1e-4, 0.02), (2e-4, 5e-5, 0.015)])
    def test_against_monte_carlo_oracle(self, S, s2, a):
        n = 200_000
        gen = RngStream(101, 0).generator()
        r0 = math.sqrt(s2) * np.hypot(gen.standard_normal(n), gen.standard_normal(n))
        etas = offset_aperture_eta(r0, S, a)
        m1_mc, m2_mc = etas.mean(), (etas**2).mean()
        se1 = etas.std(ddof=1) / math.sqrt(n)
        se2 = (etas**2).std(ddof=1) / math.sqrt(n)
        m1, m2 = pdt.bw_moments(S, s2, a)
        assert abs(m1 - m1_mc) < 3.0 * se1
        assert abs(m2 - m2_mc) < 3.0 * se2


class TestMatchBw:
    def test_round_trip(self):
        m1, m2 = pdt.bw_moments(4e-4, 1e-4, 0.02)
        S, s2 = pdt.match_bw(pdt.MomentPair(m1, m2), 0.02)
        assert S == pytest.approx(4e-4, rel=1e-6)
        assert s2 == pytest.approx(1e-4, rel=1e-6)

    def test_self_consistency(self):
        target = pdt.MomentPair(0.55, 0.35)
        S, s2 = pdt.match_bw(target, 0.02)
        m1, m2 = pdt.bw_moments(S, s2, 0.02)
        assert m1 == pytest.approx(target.m1, abs=1e-5)
        assert m2 == pytest.approx(target.m2, abs=1e-5)

    def test_maximal_variance_rejected(self):
        with pytest.raises(SolverError):
            pdt.match_bw(pdt.MomentPair(0.5, 0.5), 0.02)

    def test_degenerate_pair_gives_zero_wander(self):
        S, s2 = pdt.match_bw(pdt.MomentPair(0.5, 0.25), 0.02)
        assert s2 == 0.0
        assert S == pytest.approx(-2 * 0.02**2 / math.log(0.5), rel=1e-12)


class TestCircular:
    def test_parameter_map_inverts_lognormal_moments(self):
        mean_s, mean_s2 = 4e-4, 2.2e-7
        mu, s2 = pdt.circular_params_from_S(mean_s, mean_s2)
        # log-normal moment formulas invert the map exactly
        assert math.exp(mu + s2 / 2) == pytest.approx(mean_s, rel=1e-12)
        assert math.exp(2 * mu + 2 * s2) == pytest.approx(mean_s2, rel=1e-12)

    def test_degenerate_equals_bw(self):
        cb = pdt.CircularBeam(1e-4, math.log(4e-4), 0.0, 0.02)
        bw = pdt.BeamWander(1e-4, 4e-4, 0.02)
        es = np.linspace(0.01, 0.86, 40)
        assert np.max(np.abs(pdt.circular_density(es, cb) - pdt.bw_density(es, bw))) <= 1e-6

    def test_unit_integral(self):
        cb = pdt.CircularBeam(1e-4, math.log(4e-4), 0.2, 0.02)
        total = adaptive_quad(lambda e: pdt.circular_density(e, cb), 0.0, 1.0, 1e-8)
        assert total == pytest.approx(1.0, abs=1e-5)

    def test_match_round_trip(self):
        mu_s, s_s2 = math.log(4e-4), 0.2
        m1, m2 = pdt.circular_moments(mu_s, s_s2, 1e-4, 0.02)
        mu_r, s2_r = pdt.match_circular(pdt.MomentPair(m1, m2), 1e-4, 0.02)
        assert mu_r == pytest.approx(mu_s, rel=1e-5)
        assert s2_r == pytest.approx(s_s2, rel=1e-5)

    def test_match_reproduces_moments(self):
        target = pdt.MomentPair(0.5, 0.28)
        mu_r, s2_r = pdt.match_circular(target, 1e-4, 0.02)
        m1, m2 = pdt.circular_moments(mu_r, s2_r, 1e-4, 0.02)
        assert m1 == pytest.approx(target.m1, abs=1e-4)
        assert m2 == pytest.approx(target.m2, abs=1e-4)

    def test_vanishing_spread_consistent_with_match_bw(self):
        m1, m2 = pdt.bw_moments(3e-4, 8e-5, 0.02)
        target = pdt.MomentPair(m1, m2)
        S_bw, _ = pdt.match_bw(target, 0.02)
        mu_r, s2_r = pdt.match_circular(target, 8e-5, 0.02)
        # the circular solution collapses onto the beam-wandering one
        assert s2_r < 1e-4
        assert math.exp(mu_r) == pytest.approx(S_bw, rel=1e-4)


class TestElliptic:
    def synthetic_records(self, n=4000, mu=math.log(4e-4), sig2=0.09, seed=5):
        gen = RngStream(seed, 0).generator()
        w2 = np.exp(gen.normal(mu, math.sqrt(sig2), n))
        recs = []
        for i, w in enumerate(w2):
            recs.append(SampleRecord(eta=0.5, x0=0.0, y0=0.0, sxx=w, syy=w,
                                     sxy=0.0, realization_index=i))
        return recs, w2

    def test_synthetic_circular_records(self):
        recs, w2 = self.synthetic_records()
        mu_s, sigma = pdt.elliptic_params_from_samples(recs)
        n = len(recs)
        # all entries estimate ln<W^4>/<W^2>^2 = sig2 of the lognormal
        w4 = w2**2
        se = math.sqrt(np.var(w4, ddof=1) / n) / w4.mean() + 2 * math.sqrt(
            np.var(w2, ddof=1) / n
        ) / w2.mean()
        assert sigma[0, 0] == sigma[1, 1]
        assert sigma[0, 1] == sigma[1, 0]
        assert abs(sigma[0, 0] - 0.09) < 3 * se
        assert abs(sigma[0, 1] - 0.09) < 3 * se

    def test_mean_w2_is_trace_mean(self):
        recs, w2 = self.synthetic_records(n=1500)
        mu_s, _ = pdt.elliptic_params_from_samples(recs)
        mean_w2 = np.mean([(r.sxx + r.syy) / 2 for r in recs])
        mean_w4 = np.mean([((r.sxx + r.syy) / 2) ** 2 for r in recs])
        assert mu_s == pytest.approx(math.log(mean_w2**2 / math.sqrt(mean_w4)), rel=1e-12)

    def test_needs_enough_records(self):
        recs, _ = self.synthetic_records(n=100)
        with pytest.raises(DomainError):
            pdt.elliptic_params_from_samples(recs)

    def test_degenerate_circular_limit(self):
        # W1 = W2 fixed: on-axis transmittance equals the consistent
        # circular eta0 (the elliptic formula reduces to the factor-2 form)
        W2 = 4e-4
        model = pdt.EllipticBeam(sigma_bw2=1e-28, mu_S=math.log(W2),
                                 Sigma=np.zeros((2, 2)), aperture=0.02)
        vals, _ = pdt.elliptic_sample(model, 0.02, 50, RngStream(3, 0))
        eta0 = pdt.bw_geometry(W2, 0.02, "consistent")[0]
        assert np.allclose(vals, eta0, atol=1e-6)

    def test_samples_clamped_to_unit_interval(self):
        model = pdt.EllipticBeam(sigma_bw2=4e-4, mu_S=math.log(2e-4),
                                 Sigma=0.3 * np.eye(2), aperture=0.02)
        vals, n_clamped = pdt.elliptic_sample(model, 0.02, 20000, RngStream(4, 0))
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert n_clamped >= 0

    def test_ecdf_available_through_model_cdf(self):
        model = pdt.EllipticBeam(sigma_bw2=1e-4, mu_S=math.log(4e-4),
                                 Sigma=0.05 * np.eye(2), aperture=0.02,
                                 cache_size=20000)
        assert pdt.model_cdf(model, 1.0) == 1.0
        assert pdt.model_cdf(model, 0.0) == 0.0
        mid = pdt.model_cdf(model, 0.5)
        assert 0.0 < mid < 1.0


class TestTotalProb:
    TARGET = pdt.MomentPair(0.45, 0.23)

    @pytest.mark.parametrize("sub", ["beta", "lognormal"])
    def test_unit_integral_with_atoms(self, sub):
        tp = pdt.totalprob_model(sub, 1e-4, 4e-4, self.TARGET, 0.02)
        cont = adaptive_quad(lambda e: pdt.totalprob_density(e, tp), 0.0, 1.0, 1e-8)
        total = cont + sum(w for w, _ in tp.atoms)
        assert total == pytest.approx(1.0, abs=1e-5)

    def test_beta_sub_reproduces_moments(self):
        tp = pdt.totalprob_model("beta", 1e-4, 4e-4, self.TARGET, 0.02)
        got = pdt.model_moments(tp)
        assert got.m1 == pytest.approx(self.TARGET.m1, rel=1e-3)
        assert got.m2 == pytest.approx(self.TARGET.m2, rel=1e-3)

    def test_lognormal_truncation_bias_is_reported_not_hidden(self):
        tp = pdt.totalprob_model("lognormal", 1e-4, 4e-4, self.TARGET, 0.02)
        got = pdt.model_moments(tp)
        # bias exists but stays small; nothing renormalizes it away silently
        assert got.m1 == pytest.approx(self.TARGET.m1, rel=0.02)

    def test_small_wander_collapses_to_conditional(self):
        tp = pdt.totalprob_model("beta", 1e-16, 4e-4, self.TARGET, 0.02)
        direct = pdt.beta_from_moments(self.TARGET)
        es = np.linspace(0.05, 0.95, 31)
        assert np.allclose(pdt.totalprob_density(es, tp),
                           pdt.model_density(direct, es), rtol=1e-6, atol=1e-9)

    def test_unknown_sub_rejected(self):
        with pytest.raises(DomainError):
            pdt.totalprob_model("gamma", 1e-4, 4e-4, self.TARGET, 0.02)


class TestGenericOps:
    def models(self):
        m = pdt.MomentPair(0.5, 0.3)
        yield pdt.lognormal_from_moments(m)
        yield pdt.beta_from_moments(m)
        yield pdt.BeamWander(1e-4, 4e-4, 0.02)
        yield pdt.CircularBeam(1e-4, math.log(4e-4), 0.1, 0.02)
        yield pdt.totalprob_model("beta", 1e-4, 4e-4, m, 0.02)
        yield pdt.totalprob_model("lognormal", 1e-4, 4e-4, m, 0.02)

    def test_cdf_reaches_one(self):
        for model in self.models():
            assert pdt.model_cdf(model, 1.0) == pytest.approx(1.0, abs=1e-6), model

    def test_cdf_monotone(self):
        es = np.linspace(0.0, 1.0, 41)
        for model in self.models():
            cdf = pdt.model_cdf(model, es)
            assert np.all(np.diff(cdf) >= -1e-12), model

    def test_beta22_mean_via_fractional_moment(self):
        assert pdt.fractional_moment(pdt.BetaPdt(2.0, 2.0), 1.0) == pytest.approx(
            0.5, abs=1e-8
        )

    def test_zeroth_moment_is_one(self):
        for model in self.models():
            assert pdt.fractional_moment(model, 0.0) == pytest.approx(1.0, abs=1e-5), model

    def test_densities_nonnegative(self):
        es = np.linspace(0.0, 1.0, 101)
        for model in self.models():
            assert np.all(pdt.model_density(model, es) >= 0.0), model

    def test_half_moment_jensen(self):
        # <sqrt(eta)>^2 <= <eta> with equality only for a point mass
        for model in self.models():
            half = pdt.fractional_moment(model, 0.5)
            one = pdt.fractional_moment(model, 1.0)
            assert half * half <= one + 1e-9, model
