"""Analytical probability-distribution-of-transmittance (PDT) models.

Six families, ordered by how much physics they assume:

* ``TruncLogNormal`` and ``BetaPdt``: empirical two-moment fits.
* ``BeamWander``: Gaussian beam of fixed spot size S whose centroid wanders
  with per-axis variance sigma_bw^2.
* ``CircularBeam``: beam-wandering model with log-normally fluctuating S.
* ``EllipticBeam``: random Gaussian ellipse (log-normal squared semi-axes,
  uniform orientation) plus wandering; sampled by Monte Carlo, never a
  closed-form density.
* ``TotalProb``: law-of-total-probability mixture over the wander radius
  with log-normal or Beta conditional distributions whose moments follow
  the Gaussian-beam radial profile.

The beam-wandering geometry functions carry a convention switch for the
maximal transmittance: ``paper_literal`` keeps eta0 = 1 - exp(-a^2/S) as
printed, ``consistent`` (default) uses eta0 = 1 - exp(-2 a^2/S), which is
the exact on-axis transmittance of a Gaussian beam with second-moment spot
size S and the zero-wander limit of the closed-form moments.  The shape and
scale parameters lambda(S), R(S) always use the consistent form internally;
with the literal form their defining logarithm turns negative for
a^2/S < 0.3 and the model breaks down.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special

from .errors import DomainError, SolverError
from .numerics import RngStream, adaptive_quad, lambert_w0_exp, marcum_q1, solve2

__all__ = [
    "EtaConvention",
    "MomentPair",
    "TruncLogNormal",
    "BetaPdt",
    "BeamWander",
    "CircularBeam",
    "EllipticBeam",
    "TotalProb",
    "PdtModel",
    "lognormal_from_moments",
    "beta_from_moments",
    "bw_geometry",
    "bw_density",
    "bw_cdf",
    "bw_moments",
    "match_bw",
    "circular_params_from_S",
    "circular_density",
    "circular_moments",
    "match_circular",
    "elliptic_params_from_samples",
    "elliptic_sample",
    "totalprob_model",
    "totalprob_density",
    "model_density",
    "model_cdf",
    "model_moments",
    "fractional_moment",
    "eta_variance",
]


class EtaConvention(str, Enum):
    paper_literal = "paper_literal"
    consistent = "consistent"


def _conv(c) -> EtaConvention:
    return EtaConvention(c)


_MOMENT_SLACK = 1e-9  # relative tolerance on the moment inequalities


@dataclass(frozen=True)
class MomentPair:
    """First two transmittance moments m1 = <eta>, m2 = <eta^2>."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (0.0 < self.m1 <= 1.0):
            raise DomainError(f"m1={self.m1} outside (0, 1]")
        if self.m2 < self.m1**2 * (1.0 - _MOMENT_SLACK) or self.m2 > self.m1 * (
            1.0 + _MOMENT_SLACK
        ):
            raise DomainError(
                f"m2={self.m2} violates m1^2 <= m2 <= m1 (m1={self.m1})"
            )

    @property
    def variance(self) -> float:
        return max(self.m2 - self.m1**2, 0.0)

    @classmethod
    def from_samples(cls, values) -> "MomentPair":
        v = np.asarray(values, dtype=float)
        return cls(float(np.mean(v)), float(np.mean(v * v)))


# ---------------------------------------------------------------------------
# Empirical two-moment families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncLogNormal:
    """Log-normal in eta truncated to [0, 1] and renormalized.

    Density exp(-(ln eta + mu)^2 / 2 sigma2) / (F1 sqrt(2 pi sigma2) eta),
    F1 the untruncated CDF at eta = 1.
    """

    mu: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise DomainError("TruncLogNormal: sigma2 must be finite and > 0")

    @property
    def norm(self) -> float:
        return float(special.ndtr(self.mu / math.sqrt(self.sigma2)))


@dataclass(frozen=True)
class BetaPdt:
    """Beta distribution on [0, 1] with shape parameters a, b > 0."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise DomainError("BetaPdt: a, b must be > 0")


def lognormal_from_moments(m: MomentPair) -> TruncLogNormal:
    """mu = -ln(m1^2 / sqrt(m2)), sigma2 = ln(m2 / m1^2)."""
    sigma2 = math.log(m.m2 / (m.m1 * m.m1))
    if sigma2 <= 0.0:
        raise DomainError("lognormal_from_moments: m2 = m1^2 is degenerate")
    mu = -math.log(m.m1 * m.m1 / math.sqrt(m.m2))
    return TruncLogNormal(mu=mu, sigma2=sigma2)


def beta_from_moments(m: MomentPair) -> BetaPdt:
    """a, b matching the pair exactly; needs m1^2 < m2 < m1 strictly."""
    if not (m.m1**2 < m.m2 < m.m1):
        raise DomainError("beta_from_moments: need m1^2 < m2 < m1 strictly")
    a = (m.m1 - m.m2) / (m.m2 - m.m1**2) * m.m1
    b = a * (1.0 / m.m1 - 1.0)
    return BetaPdt(a=a, b=b)


def _tln_density(model: TruncLogNormal, eta: np.ndarray) -> np.ndarray:
    out = np.zeros_like(eta)
    mask = (eta > 0.0) & (eta <= 1.0)
    if np.any(mask):
        e = eta[mask]
        sig = math.sqrt(model.sigma2)
        z = (np.log(e) + model.mu) / sig
        out[mask] = np.exp(-0.5 * z * z) / (model.norm * math.sqrt(2 * math.pi) * sig * e)
    return out


def _beta_density(model: BetaPdt, eta: np.ndarray) -> np.ndarray:
    out = np.zeros_like(eta)
    mask = (eta > 0.0) & (eta < 1.0)
    if np.any(mask):
        e = eta[mask]
        ln = (model.a - 1.0) * np.log(e) + (model.b - 1.0) * np.log1p(-e)
        out[mask] = np.exp(ln - special.betaln(model.a, model.b))
    return out


# ---------------------------------------------------------------------------
# Beam-wandering geometry
# ---------------------------------------------------------------------------


def _bw_lambda_R(S, a):
    """Shape lambda(S) and dimensionless scale R(S)/a, vectorized.

    Uses scaled Bessel forms throughout; the logarithm's eta0 is the
    consistent (factor-2) one, without which lambda < 0 for a^2/S < 0.3.
    """
    S = np.asarray(S, dtype=float)
    x = 4.0 * a * a / S
    i0e = special.i0e(x)
    i1e = special.i1e(x)
    denom = np.where(
        x < 1e-4,
        x * (1.0 - 0.75 * x + (5.0 / 12.0) * x * x),
        1.0 - i0e,
    )
    two_eta0 = -2.0 * np.expm1(-0.5 * x)
    ln_arg = np.log(two_eta0 / denom)
    lam = 2.0 * x * i1e / denom / ln_arg
    r_dimless = ln_arg ** (-1.0 / lam)
    return lam, r_dimless


def bw_geometry(S: float, a: float, convention=EtaConvention.consistent):
    """Maximal transmittance eta0, shape lambda(S), and scale R(S).

    The convention switches only eta0; lambda and R are
    convention-independent.
    """
    if not (S > 0.0 and a > 0.0):
        raise DomainError("bw_geometry: S and a must be > 0")
    convention = _conv(convention)
    lam, r_dim = _bw_lambda_R(S, a)
    if convention is EtaConvention.paper_literal:
        eta0 = -math.expm1(-a * a / S)
    else:
        eta0 = -math.expm1(-2.0 * a * a / S)
    return eta0, float(lam), float(a * r_dim)


@dataclass(frozen=True)
class BeamWander:
    """Wandering Gaussian beam of fixed squared spot radius S."""

    sigma_bw2: float
    S: float
    aperture: float
    convention: EtaConvention = EtaConvention.consistent

    def __post_init__(self):
        if not (self.sigma_bw2 > 0.0 and self.S > 0.0 and self.aperture > 0.0):
            raise DomainError("BeamWander: parameters must be > 0")

    def geometry(self):
        return bw_geometry(self.S, self.aperture, self.convention)


def bw_density(eta, model: BeamWander) -> np.ndarray:
    """Beam-wandering PDT on (0, eta0), zero outside."""
    eta_arr = np.asarray(eta, dtype=float)
    scalar = eta_arr.ndim == 0
    eta_arr = np.atleast_1d(eta_arr)
    eta0, lam, R = model.geometry()
    out = np.zeros_like(eta_arr)
    mask = (eta_arr > 0.0) & (eta_arr < eta0)
    if np.any(mask):
        e = eta_arr[mask]
        xi = np.log(eta0 / e)
        r2s2 = R * R / model.sigma_bw2
        out[mask] = (
            r2s2 / (e * lam) * xi ** (2.0 / lam - 1.0)
            * np.exp(-0.5 * r2s2 * xi ** (2.0 / lam))
        )
    return float(out[0]) if scalar else out


def bw_cdf(eta, model: BeamWander) -> np.ndarray:
    """Closed-form CDF: P(eta' <= eta) = exp(-R^2 ln(eta0/eta)^(2/lam) / 2 s2)."""
    eta_arr = np.asarray(eta, dtype=float)
    scalar = eta_arr.ndim == 0
    eta_arr = np.atleast_1d(eta_arr)
    eta0, lam, R = model.geometry()
    out = np.zeros_like(eta_arr)
    out[eta_arr >= eta0] = 1.0
    mask = (eta_arr > 0.0) & (eta_arr < eta0)
    if np.any(mask):
        xi = np.log(eta0 / eta_arr[mask])
        out[mask] = np.exp(-0.5 * R * R / model.sigma_bw2 * xi ** (2.0 / lam))
    return float(out[0]) if scalar else out


def bw_moments(S, sigma_bw2, a) -> tuple:
    """Closed-form <eta>, <eta^2> of a wandering Gaussian beam (Esposito).

    Vectorized over S; exact for the physical beam, independent of the
    eta0 convention.
    """
    S = np.asarray(S, dtype=float)
    scalar = S.ndim == 0
    S = np.atleast_1d(S)
    if np.any(S <= 0.0) or sigma_bw2 < 0.0 or a <= 0.0:
        raise DomainError("bw_moments: need S > 0, sigma_bw2 >= 0, a > 0")
    if sigma_bw2 <= 1e-12 * np.min(S):
        m1 = -np.expm1(-2.0 * a * a / S)
        m2 = m1 * m1
    else:
        total = 4.0 * sigma_bw2 + S
        m1 = -np.expm1(-2.0 * a * a / total)
        p = S / (8.0 * sigma_bw2)
        beta = 1.0 / (2.0 * p + 1.0)
        # 2p(p+1)/(2p^2+3p+1) written stably for p >> 1
        ratio = (2.0 + 2.0 / p) / (2.0 + 3.0 / p + 1.0 / (p * p))
        alpha = (2.0 * a / np.sqrt(S)) * np.sqrt(ratio)
        # p -> 0 (spot << wander) is the Bernoulli limit m2 -> m1
        tiny_p = p < 1e-10
        with np.errstate(divide="ignore", invalid="ignore"):
            den = np.sqrt(np.maximum(1.0 - beta * beta, 1e-300))
            c = np.where(tiny_p, 0.0, alpha / den)
            d = np.where(tiny_p, 0.0, alpha * beta / den)
        m2 = (
            1.0
            - 2.0 * np.exp(-2.0 * a * a / total)
            + np.exp(-0.5 * alpha * alpha)
            * (1.0 - marcum_q1(c, d) + marcum_q1(d, c))
        )
        m2 = np.where(tiny_p, m1, m2)
    if scalar:
        return float(m1[0]), float(m2[0])
    return m1, m2


def match_bw(m: MomentPair, a: float) -> tuple[float, float]:
    """Solve the closed-form moment pair for (S, sigma_bw2).

    Works in log-parameter space; a coarse scan over the wander fraction
    initializes the Newton iteration.  Raises :class:`SolverError` for
    targets outside the model's range (e.g. m2 = m1, the Bernoulli limit).
    """
    t1, t2 = m.m1, m.m2
    if t1 >= 1.0:
        raise SolverError("match_bw: m1 = 1 needs an infinite aperture")
    if t2 >= t1 * (1.0 - 1e-12):
        raise SolverError("match_bw: m2 = m1 (maximal variance) is outside the model")
    total = -2.0 * a * a / math.log1p(-t1)  # 4 sigma^2 + S implied by m1
    if t2 <= t1 * t1 * (1.0 + 1e-12):
        return total, 0.0  # zero wander: point mass at eta0

    def forward(u):
        s = math.exp(min(max(u[0], -600.0), 600.0))
        s2bw = math.exp(min(max(u[1], -600.0), 600.0))
        m1v, m2v = bw_moments(s, s2bw, a)
        return np.array([(m1v - t1) / t1, (m2v - t2) / t2])

    # scan wander fraction f = 4 sigma^2 / total at the m1-implied total
    fractions = 1.0 / (1.0 + np.exp(-np.linspace(-12.0, 12.0, 49)))
    best_u, best_r = None, np.inf
    for f in fractions:
        u = np.array([math.log(total * (1.0 - f)), math.log(total * f / 4.0)])
        r = np.max(np.abs(forward(u)))
        if np.isfinite(r) and r < best_r:
            best_u, best_r = u, r
    sol = solve2(forward, best_u, tol=1e-11,
                 scan=(best_u - 2.0, best_u + 2.0, 9))
    return math.exp(sol[0]), math.exp(sol[1])


# ---------------------------------------------------------------------------
# Circular-beam model
# ---------------------------------------------------------------------------

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(math.pi)


@dataclass(frozen=True)
class CircularBeam:
    """Wandering beam whose squared spot radius is log-normal."""

    sigma_bw2: float
    mu_S: float
    sigma_S2: float
    aperture: float
    convention: EtaConvention = EtaConvention.consistent

    def __post_init__(self):
        if not (self.sigma_bw2 > 0.0 and self.aperture > 0.0):
            raise DomainError("CircularBeam: sigma_bw2 and aperture must be > 0")
        if self.sigma_S2 < 0.0:
            raise DomainError("CircularBeam: sigma_S2 must be >= 0")

    def spot_nodes(self):
        """Gauss-Hermite nodes and weights for the log-normal S mixture."""
        if self.sigma_S2 < 1e-14:
            return np.array([math.exp(self.mu_S)]), np.array([1.0])
        s = np.exp(self.mu_S + math.sqrt(2.0 * self.sigma_S2) * _GH_NODES)
        return s, _GH_WEIGHTS


def circular_params_from_S(mean_S: float, mean_S2: float) -> tuple[float, float]:
    """Log-normal parameters (mu_S, sigma_S2) from the first two S moments."""
    if not (mean_S > 0.0 and mean_S2 >= mean_S**2):
        raise DomainError("circular_params_from_S: need mean_S > 0, mean_S2 >= mean_S^2")
    mu_s = math.log(mean_S**2 / math.sqrt(mean_S2))
    sigma_s2 = math.log(mean_S2 / mean_S**2)
    return mu_s, sigma_s2


def circular_density(eta, model: CircularBeam) -> np.ndarray:
    """Log-normal-in-S mixture of beam-wandering densities."""
    eta_arr = np.asarray(eta, dtype=float)
    scalar = eta_arr.ndim == 0
    eta_arr = np.atleast_1d(eta_arr)
    nodes, wts = model.spot_nodes()
    out = np.zeros_like(eta_arr)
    for s, w in zip(nodes, wts):
        bw = BeamWander(model.sigma_bw2, float(s), model.aperture, model.convention)
        out += w * bw_density(eta_arr, bw)
    return float(out[0]) if scalar else out


def circular_moments(mu_S: float, sigma_S2: float, sigma_bw2: float, a: float):
    """S-averaged closed-form moment pair of the circular-beam model."""
    if sigma_S2 < 1e-14:
        return bw_moments(math.exp(mu_S), sigma_bw2, a)
    s = np.exp(mu_S + math.sqrt(2.0 * sigma_S2) * _GH_NODES)
    m1v, m2v = bw_moments(s, sigma_bw2, a)
    return float(_GH_WEIGHTS @ m1v), float(_GH_WEIGHTS @ m2v)


def match_circular(m: MomentPair, sigma_bw2: float, a: float) -> tuple[float, float]:
    """Solve the S-averaged moment pair for (mu_S, sigma_S2).

    The wander variance is fixed externally (sample estimate or the
    analytic formula).
    """
    t1, t2 = m.m1, m.m2

    def forward(u):
        mu_s = min(max(u[0], -600.0), 600.0)
        s_s2 = math.exp(min(max(u[1], -600.0), 60.0))
        with np.errstate(over="ignore"):
            m1v, m2v = circular_moments(mu_s, s_s2, sigma_bw2, a)
        return np.array([(m1v - t1) / t1, (m2v - t2) / t2])

    try:
        s0, _ = match_bw(m, a)
        mu0 = math.log(max(s0 - 1e-30, 1e-30))
    except SolverError:
        mu0 = math.log(a * a)
    u0 = np.array([mu0, math.log(0.05)])
    sol = solve2(forward, u0, tol=1e-10,
                 scan=(np.array([mu0 - 3.0, -10.0]), np.array([mu0 + 3.0, 1.5]), 15))
    return float(sol[0]), float(math.exp(sol[1]))


# ---------------------------------------------------------------------------
# Elliptic-beam model
# ---------------------------------------------------------------------------


@dataclass
class EllipticBeam:
    """Random Gaussian ellipse with wander; PDT accessible only by sampling.

    ``Sigma`` is the 2x2 covariance of (ln W1^2, ln W2^2).  A cached sample
    set (drawn deterministically from ``sample_seed``) backs the empirical
    CDF and moments.
    """

    sigma_bw2: float
    mu_S: float
    Sigma: np.ndarray
    aperture: float
    convention: EtaConvention = EtaConvention.consistent
    sample_seed: int = 0
    cache_size: int = 200_000
    _samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.Sigma = np.asarray(self.Sigma, dtype=float)
        if self.Sigma.shape != (2, 2):
            raise DomainError("EllipticBeam: Sigma must be 2x2")
        if not np.allclose(self.Sigma, self.Sigma.T):
            raise DomainError("EllipticBeam: Sigma must be symmetric")
        if self.sigma_bw2 <= 0.0 or self.aperture <= 0.0:
            raise DomainError("EllipticBeam: sigma_bw2 and aperture must be > 0")

    def samples(self) -> np.ndarray:
        if self._samples is None:
            vals, _ = elliptic_sample(
                self, self.aperture, self.cache_size,
                RngStream(self.sample_seed, 0),
            )
            self._samples = np.sort(vals)
        return self._samples


def _psd_2x2(sigma: np.ndarray) -> np.ndarray:
    """Project a symmetric 2x2 matrix to the nearest PSD matrix."""
    vals, vecs = np.linalg.eigh(sigma)
    if np.all(vals >= 0.0):
        return sigma
    return (vecs * np.maximum(vals, 0.0)) @ vecs.T


def elliptic_params_from_samples(records: Sequence) -> tuple[float, np.ndarray]:
    """Estimate (mu_S, Sigma) from simulated spot-shape matrices.

    Eigenvalue labels are symmetrized (each record contributes both
    orderings with weight 1/2) so the two squared semi-axes share the mean
    required by the model; a non-PSD covariance estimate is projected with
    a warning.
    """
    if len(records) < 1000:
        raise DomainError("elliptic_params_from_samples: need >= 1000 records")
    sxx = np.array([r.sxx for r in records])
    syy = np.array([r.syy for r in records])
    sxy = np.array([r.sxy for r in records])
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(0.25 * (sxx - syy) ** 2 + sxy**2)
    lam_hi = half_tr + disc
    lam_lo = half_tr - disc
    mean_w2 = float(np.mean(half_tr))  # symmetrized <W_i^2>
    mean_w4 = float(np.mean(0.5 * (lam_hi**2 + lam_lo**2)))
    mean_cross = float(np.mean(lam_hi * lam_lo))
    mu_s = math.log(mean_w2**2 / math.sqrt(mean_w4))
    sig_diag = math.log(mean_w4 / mean_w2**2)
    sig_off = math.log(mean_cross / mean_w2**2)
    sigma = np.array([[sig_diag, sig_off], [sig_off, sig_diag]])
    if abs(sig_off) > sig_diag:
        _warnings.warn("elliptic covariance estimate not PSD; projecting")
        sigma = _psd_2x2(sigma)
    return mu_s, sigma


def _elliptic_eta0(w1sq, w2sq, a):
    """Maximal transmittance of a centered Gaussian ellipse, vectorized."""
    w1 = np.sqrt(w1sq)
    w2 = np.sqrt(w2sq)
    x = a * a * np.abs(1.0 / w1sq - 1.0 / w2sq)
    y = a * a * (1.0 / w1sq + 1.0 / w2sq)
    term1 = special.i0e(x) * np.exp(-(y - x))
    diff = np.abs(w1 - w2)
    degenerate = diff < 1e-12 * np.maximum(w1, w2)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        pref = -2.0 * np.expm1(-0.5 * a * a * (1.0 / w1 - 1.0 / w2) ** 2)
        z = (w1 + w2) ** 2 / np.abs(w1sq - w2sq)
        xi = 4.0 * w1sq * w2sq / (w1 - w2) ** 2
        lam_xi, rdim_xi = _bw_lambda_R(np.where(degenerate, 1.0, xi), a)
        expo = np.exp(-((z / rdim_xi) ** lam_xi))
        term2 = np.where(degenerate, 0.0, pref * expo)
    return np.clip(1.0 - term1 - term2, 0.0, 1.0)


def elliptic_sample(model: EllipticBeam, a: float, n: int,
                    stream: RngStream) -> tuple[np.ndarray, int]:
    """Monte Carlo transmittance draws from the elliptic-beam model.

    Draws (Theta1, Theta2) bivariate normal, an orientation uniform on
    (0, pi/2], and a Gaussian centroid; evaluates the approximate
    transmittance through the effective-spot (Lambert W) formula.  Returns
    the samples clamped to [0, 1] together with the clamp count.
    """
    if n < 1:
        raise DomainError("elliptic_sample: n must be >= 1")
    gen = stream.generator()
    sigma = _psd_2x2(model.Sigma)
    try:
        chol = np.linalg.cholesky(sigma + 1e-15 * np.eye(2))
    except np.linalg.LinAlgError:
        chol = np.zeros((2, 2))
    theta = gen.standard_normal((n, 2)) @ chol.T + model.mu_S
    w1sq = np.exp(theta[:, 0])
    w2sq = np.exp(theta[:, 1])
    w1 = np.sqrt(w1sq)
    w2 = np.sqrt(w2sq)
    phi = gen.random(n) * (0.5 * math.pi)
    r0xy = gen.normal(0.0, math.sqrt(model.sigma_bw2), (n, 2))
    r0 = np.hypot(r0xy[:, 0], r0xy[:, 1])
    phi0 = np.arctan2(r0xy[:, 1], r0xy[:, 0])
    chi = phi - phi0
    cos2 = np.cos(chi) ** 2
    sin2 = 1.0 - cos2
    ln_arg = (
        np.log(4.0 * a * a / (w1 * w2))
        + a * a / w1sq * (1.0 + 2.0 * cos2)
        + a * a / w2sq * (1.0 + 2.0 * sin2)
    )
    w_eff2 = 4.0 * a * a / lambert_w0_exp(ln_arg)
    lam, rdim = _bw_lambda_R(w_eff2, a)
    eta0 = _elliptic_eta0(w1sq, w2sq, a)
    with np.errstate(over="ignore"):
        eta = eta0 * np.exp(-(((r0 / a) / rdim) ** lam))
    clamped = int(np.sum((eta < 0.0) | (eta > 1.0)))
    return np.clip(eta, 0.0, 1.0), clamped


# ---------------------------------------------------------------------------
# Law-of-total-probability models
# ---------------------------------------------------------------------------

_GL64_X, _GL64_W = np.polynomial.legendre.leggauss(64)
_U_NODES = 0.5 * (_GL64_X + 1.0)  # u in (0, 1); xi = sqrt(-2 ln u) is Rayleigh
_U_WEIGHTS = 0.5 * _GL64_W
_XI_NODES = np.sqrt(-2.0 * np.log(_U_NODES))


@dataclass
class TotalProb:
    """Wander mixture with empirical conditional distributions.

    Conditional moments at wander radius r0 follow the Gaussian-beam radial
    law, scaled so the mixture reproduces the target pair exactly;
    conditionals are log-normal (truncated) or Beta.  Nodes whose
    conditional moments are infeasible for the sub-model degenerate to
    point masses (kept as atoms).
    """

    sub: str
    sigma_bw2: float
    mean_S: float
    moments: MomentPair
    aperture: float
    convention: EtaConvention = EtaConvention.consistent
    eta0: float = 0.0
    zeta02: float = 0.0
    node_weights: np.ndarray = field(default=None, repr=False)
    node_models: list = field(default=None, repr=False)
    atoms: list = field(default=None, repr=False)
    n_degenerate: int = 0


def totalprob_model(sub: str, sigma_bw2: float, mean_S: float, m: MomentPair,
                    aperture: float,
                    convention=EtaConvention.consistent) -> TotalProb:
    """Construct the simplified total-probability model.

    eta0 and zeta0^2 normalize the radial profile so the mixture moments
    equal the targets; the radial integral runs over the Rayleigh weight
    xi exp(-xi^2/2) via the substitution u = exp(-xi^2/2).
    """
    if sub not in ("lognormal", "beta"):
        raise DomainError(f"totalprob_model: unknown sub-model {sub!r}")
    if sigma_bw2 <= 0.0 or mean_S <= 0.0:
        raise DomainError("totalprob_model: sigma_bw2 and mean_S must be > 0")
    convention = _conv(convention)
    _, lam, R = bw_geometry(mean_S, aperture, convention)
    sig = math.sqrt(sigma_bw2)
    profile = np.exp(-((sig * _XI_NODES / R) ** lam))
    i1 = float(_U_WEIGHTS @ profile)
    i2 = float(_U_WEIGHTS @ profile**2)
    eta0 = m.m1 / i1
    zeta02 = m.m2 / i2
    model = TotalProb(sub=sub, sigma_bw2=sigma_bw2, mean_S=mean_S, moments=m,
                      aperture=aperture, convention=convention,
                      eta0=eta0, zeta02=zeta02)
    node_models, atoms = [], []
    n_degenerate = 0
    for w, t in zip(_U_WEIGHTS, profile):
        m1r = eta0 * t
        m2r = zeta02 * t * t
        feasible = 0.0 < m1r < 1.0 and m1r**2 * (1 + 1e-12) < m2r < m1r * (1 - 1e-12)
        if feasible:
            pair = MomentPair(m1r, m2r)
            try:
                cond = (lognormal_from_moments(pair) if sub == "lognormal"
                        else beta_from_moments(pair))
                node_models.append((float(w), cond))
                continue
            except DomainError:
                pass
        n_degenerate += 1
        atoms.append((float(w), float(min(max(m1r, 0.0), 1.0))))
    if n_degenerate:
        _warnings.warn(
            f"totalprob_model: {n_degenerate} radial nodes degenerate to point masses"
        )
    model.node_weights = _U_WEIGHTS
    model.node_models = node_models
    model.atoms = atoms
    model.n_degenerate = n_degenerate
    return model


def totalprob_density(eta, model: TotalProb) -> np.ndarray:
    """Continuous part of the total-probability PDT (atoms excluded)."""
    eta_arr = np.asarray(eta, dtype=float)
    scalar = eta_arr.ndim == 0
    eta_arr = np.atleast_1d(eta_arr)
    out = np.zeros_like(eta_arr)
    for w, cond in model.node_models:
        if isinstance(cond, TruncLogNormal):
            out += w * _tln_density(cond, eta_arr)
        else:
            out += w * _beta_density(cond, eta_arr)
    return float(out[0]) if scalar else out


PdtModel = Union[TruncLogNormal, BetaPdt, BeamWander, CircularBeam,
                 EllipticBeam, TotalProb]


# ---------------------------------------------------------------------------
# Generic density / CDF / moment machinery
# ---------------------------------------------------------------------------


def model_density(model: PdtModel, eta) -> np.ndarray:
    """Density of any family with a continuous PDT (not EllipticBeam)."""
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    if isinstance(model, TruncLogNormal):
        out = _tln_density(model, eta_arr)
    elif isinstance(model, BetaPdt):
        out = _beta_density(model, eta_arr)
    elif isinstance(model, BeamWander):
        out = bw_density(eta_arr, model)
    elif isinstance(model, CircularBeam):
        out = circular_density(eta_arr, model)
    elif isinstance(model, TotalProb):
        out = totalprob_density(eta_arr, model)
    elif isinstance(model, EllipticBeam):
        raise DomainError("EllipticBeam exposes samples, not a closed-form density")
    else:
        raise TypeError(f"unknown PDT model {model!r}")
    return float(out[0]) if np.ndim(eta) == 0 else out


def _model_atoms(model: PdtModel):
    return model.atoms if isinstance(model, TotalProb) and model.atoms else []


def _bw_fractional(model: BeamWander, p: float, tol: float) -> float:
    """<eta^p> of one beam-wandering component.

    In u = ln(eta0/eta)^(2/lambda) the density is exponential, so the
    integrand is smooth: <eta^p> = eta0^p int rate e^(-rate u - p u^(lam/2)) du.
    """
    eta0, lam, R = model.geometry()
    rate = 0.5 * R * R / model.sigma_bw2
    val = adaptive_quad(
        lambda u: rate * np.exp(-rate * u - p * u ** (lam / 2.0)),
        0.0, np.inf, tol=tol,
    )
    return float(eta0**p * val)


def model_cdf(model: PdtModel, eta, tol: float = 1e-8):
    """CDF at one or many points.

    BeamWander uses its closed form, EllipticBeam its empirical sample CDF,
    everything else adaptive quadrature of the density accumulated over the
    sorted evaluation points.
    """
    eta_arr = np.asarray(eta, dtype=float)
    scalar = eta_arr.ndim == 0
    pts = np.atleast_1d(eta_arr)
    if isinstance(model, BeamWander):
        out = bw_cdf(pts, model)
    elif isinstance(model, CircularBeam):
        # exact mixture of closed-form component CDFs over the spot nodes
        nodes, wts = model.spot_nodes()
        out = np.zeros(pts.shape)
        for s, w in zip(nodes, wts):
            out += w * bw_cdf(pts, BeamWander(model.sigma_bw2, float(s),
                                              model.aperture, model.convention))
        out = np.clip(out, 0.0, 1.0)
    elif isinstance(model, EllipticBeam):
        samples = model.samples()
        out = np.searchsorted(samples, pts, side="right") / samples.size
    else:
        order = np.argsort(pts)
        sorted_pts = np.clip(pts[order], 0.0, 1.0)
        cdf_sorted = np.empty_like(sorted_pts)
        prev_x, acc = 0.0, 0.0
        dens = lambda x: model_density(model, x)
        for i, x in enumerate(sorted_pts):
            if x > prev_x:
                acc += adaptive_quad(dens, prev_x, x, tol=tol)
                prev_x = x
            cdf_sorted[i] = acc
        for w, loc in _model_atoms(model):
            cdf_sorted += w * (sorted_pts >= loc)
        cdf_sorted = np.clip(cdf_sorted, 0.0, 1.0)
        out = np.empty_like(cdf_sorted)
        out[order] = cdf_sorted
        out[pts <= 0.0] = 0.0
    return float(out[0]) if scalar else out


def fractional_moment(model: PdtModel, p: float, tol: float = 1e-8) -> float:
    """<eta^p> for p >= 0, by quadrature (or the sample mean for elliptic)."""
    if p < 0.0:
        raise DomainError("fractional_moment: p must be >= 0")
    if isinstance(model, EllipticBeam):
        return float(np.mean(model.samples() ** p))
    if isinstance(model, BeamWander):
        return _bw_fractional(model, p, tol)
    if isinstance(model, CircularBeam):
        nodes, wts = model.spot_nodes()
        return float(sum(
            w * _bw_fractional(
                BeamWander(model.sigma_bw2, float(s), model.aperture,
                           model.convention), p, tol)
            for s, w in zip(nodes, wts)
        ))
    total = adaptive_quad(lambda x: model_density(model, x) * x**p, 0.0, 1.0,
                          tol=tol)
    for w, loc in _model_atoms(model):
        total += w * loc**p
    return float(total)


def model_moments(model: PdtModel, tol: float = 1e-8) -> MomentPair:
    """First two moments of the model's own PDT."""
    return MomentPair(fractional_moment(model, 1.0, tol),
                      fractional_moment(model, 2.0, tol))


def eta_variance(model: PdtModel) -> float:
    m = model_moments(model)
    return m.variance
