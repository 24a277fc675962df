"""Numerical kernels used throughout the package.

Special functions (modified Bessel I0/I1, Lambert W, first-order Marcum Q),
adaptive quadrature with an absolute-error contract, a damped-Newton solver
for 2x2 moment-matching systems, and counter-based random streams.

Random streams are Philox counter-based generators keyed by
``(master_seed, stream_index)``: the same pair always reproduces the same
sequence, and distinct indices give statistically independent streams, so
results never depend on how work is scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericsError, SolverError

__all__ = [
    "RngStream",
    "gaussian",
    "uniform",
    "bessel_i01",
    "bessel_i01_scaled",
    "lambert_w0",
    "lambert_w0_exp",
    "marcum_q1",
    "adaptive_quad",
    "solve2",
]

_TWO64 = 2**64


@dataclass
class RngStream:
    """One independent, reproducible random stream.

    Drawing advances an internal counter-based generator; ``reset`` rewinds
    to the start of the stream.  Streams with distinct ``stream_index`` are
    independent by construction and safe to hand to separate workers.
    """

    master_seed: int
    stream_index: int = 0
    _gen: np.random.Generator | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array(
            [self.master_seed % _TWO64, self.stream_index % _TWO64],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = self.generator()
        return self._gen

    def reset(self) -> None:
        self._gen = None

    def spawn(self, index: int) -> "RngStream":
        """Derived stream for sub-tasks; index offsets are caller-defined."""
        return RngStream(self.master_seed, self.stream_index + index)


def gaussian(stream: RngStream) -> float:
    """Next standard-normal draw from the stream."""
    return float(stream.gen.standard_normal())


def uniform(stream: RngStream) -> float:
    """Next uniform draw in [0, 1) from the stream."""
    return float(stream.gen.random())


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

_BESSEL_X_MAX = 700.0  # exp overflow guard for the unscaled forms


def bessel_i01(x: float) -> tuple[float, float]:
    """Modified Bessel functions (I0(x), I1(x)) for 0 <= x <= 700."""
    if not np.all(np.isfinite(x)):
        raise DomainError("bessel_i01: x must be finite")
    if np.any(np.asarray(x) < 0.0):
        raise DomainError("bessel_i01: x must be non-negative")
    if np.any(np.asarray(x) > _BESSEL_X_MAX):
        raise DomainError(f"bessel_i01: x > {_BESSEL_X_MAX} overflows; "
                          "use bessel_i01_scaled")
    return special.i0(x), special.i1(x)


def bessel_i01_scaled(x):
    """Scaled forms (e^-x I0(x), e^-x I1(x)), valid for any x >= 0."""
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise DomainError("bessel_i01_scaled: x must be finite")
    if np.any(xa < 0.0):
        raise DomainError("bessel_i01_scaled: x must be non-negative")
    return special.i0e(x), special.i1e(x)


def lambert_w0(x: float) -> float:
    """Principal-branch Lambert W: the w >= -1 with w * e^w = x.

    Defined for x >= -1/e.  scipy's value is polished with Newton steps so
    the residual |w e^w - x| stays below 1e-12 * max(1, |x|).
    """
    if not math.isfinite(x):
        raise DomainError("lambert_w0: x must be finite")
    branch_point = -1.0 / math.e
    if x < branch_point:
        if x > branch_point * (1.0 + 1e-12):  # rounding right at the branch point
            return -1.0
        raise DomainError(f"lambert_w0: x={x} < -1/e")
    w = float(special.lambertw(x, 0).real)
    for _ in range(3):
        ew = math.exp(w)
        resid = w * ew - x
        if abs(resid) <= 1e-13 * max(1.0, abs(x)):
            break
        denom = ew * (w + 1.0)
        if denom == 0.0:
            break
        w -= resid / denom
    return w


def lambert_w0_exp(y):
    """W(e^y) evaluated stably, including y far beyond exp overflow.

    Solves w + log(w) = y by Newton iteration started from an asymptotic
    guess; for small y falls back to scipy on e^y directly.
    """
    ya = np.asarray(y, dtype=float)
    scalar = ya.ndim == 0
    ya = np.atleast_1d(ya).astype(float)
    out = np.empty_like(ya)
    small = ya < 650.0
    if np.any(small):
        out[small] = special.lambertw(np.exp(ya[small]), 0).real
    big = ~small
    if np.any(big):
        yb = ya[big]
        w = yb - np.log(yb)
        for _ in range(4):  # quadratic convergence; 4 steps reach 1e-16
            w = w * (1.0 + (yb - w - np.log(w)) / (w + 1.0))
        out[big] = w
    return float(out[0]) if scalar else out


# Gauss-Legendre panels reused by the Marcum integrator.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def _gl_panel(f, lo, hi):
    t = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * np.sum(f(t) * _GL_WEIGHTS, axis=-1)


def marcum_q1(a, b) -> float:
    """First-order Marcum Q function Q1(a, b).

    Integrates the defining integral
    ``int_b^inf t exp(-(t^2+a^2)/2) I0(a t) dt`` with the Bessel factor in
    scaled form, cutting the tail where the integrand drops below 1e-16.
    Supports broadcasting over array inputs.
    """
    aa = np.asarray(a, dtype=float)
    bb = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(aa)) or np.any(~np.isfinite(bb)):
        raise DomainError("marcum_q1: arguments must be finite")
    if np.any(aa < 0.0) or np.any(bb < 0.0):
        raise DomainError("marcum_q1: arguments must be non-negative")
    aa, bb = np.broadcast_arrays(aa, bb)
    scalar = aa.ndim == 0
    aa = np.atleast_1d(aa)
    bb = np.atleast_1d(bb)
    out = np.empty(aa.shape, dtype=float)

    def integrand(t, av):
        # t * I0(a t) * exp(-(t^2+a^2)/2) == t * i0e(a t) * exp(-(t-a)^2 / 2)
        return t * special.i0e(av * t) * np.exp(-0.5 * (t - av) ** 2)

    for i in np.ndindex(aa.shape):
        av, bv = aa[i], bb[i]
        if bv == 0.0:
            out[i] = 1.0
            continue
        hi = max(av, bv) + 9.5  # integrand < 1e-19 beyond the cutoff
        pieces = []
        # Split at the peak t ~ a so the 128-node panels resolve it.
        brk = sorted({bv, max(bv, min(av, hi)), hi})
        for lo_, hi_ in zip(brk[:-1], brk[1:]):
            if hi_ > lo_:
                pieces.append(_gl_panel(lambda t: integrand(t, av), lo_, hi_))
        q = float(sum(pieces))
        out[i] = min(1.0, max(0.0, q))
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Quadrature and root finding
# ---------------------------------------------------------------------------


def adaptive_quad(f, lo: float, hi: float, tol: float = 1e-10, *,
                  points=None) -> float:
    """Integrate f over (lo, hi) to absolute accuracy ``tol``.

    ``hi`` (or ``lo``) may be infinite; integrable endpoint singularities
    are handled by the underlying adaptive scheme.  Raises
    :class:`NumericsError` carrying the best estimate when the error
    estimate cannot be brought under ``tol``.
    """
    kwargs = dict(epsabs=tol, epsrel=max(1e-12, tol * 1e-2), limit=200)
    if points is not None and np.isfinite(lo) and np.isfinite(hi):
        pts = [p for p in points if lo < p < hi]
        if pts:
            kwargs["points"] = pts
    with np.errstate(all="ignore"):
        result = integrate.quad(f, lo, hi, full_output=1, **kwargs)
    value, abserr = result[0], result[1]
    if len(result) >= 4 and abserr > tol:
        kwargs["limit"] = 800
        with np.errstate(all="ignore"):
            result = integrate.quad(f, lo, hi, full_output=1, **kwargs)
        value, abserr = result[0], result[1]
    if abserr > max(tol, 1e-13 * abs(value)) * 1.01:
        raise NumericsError(
            f"adaptive_quad: error estimate {abserr:.3e} exceeds tol {tol:.3e}",
            best_estimate=value,
        )
    return float(value)


def solve2(F, x0, tol: float = 1e-10, *, max_iter: int = 80,
           scan=None) -> np.ndarray:
    """Solve the 2x2 system F(x) = 0 by damped Newton iteration.

    The Jacobian comes from central finite differences.  If iteration from
    ``x0`` stalls and ``scan=(lo, hi, n)`` is given, the box is scanned on an
    n x n grid and Newton restarts from the best point.  Callers needing
    positive parameters should solve in log space and exponentiate.
    """

    def newton(x_start):
        x = np.asarray(x_start, dtype=float).copy()
        fx = np.asarray(F(x), dtype=float)
        best = (float(np.max(np.abs(fx))), x.copy())
        for _ in range(max_iter):
            nrm = float(np.max(np.abs(fx)))
            if nrm <= tol:
                return x, nrm
            if nrm < best[0]:
                best = (nrm, x.copy())
            J = np.empty((2, 2))
            for j in range(2):
                h = 1e-7 * max(1.0, abs(x[j]))
                xp, xm = x.copy(), x.copy()
                xp[j] += h
                xm[j] -= h
                J[:, j] = (np.asarray(F(xp), float) - np.asarray(F(xm), float)) / (2 * h)
            try:
                step = np.linalg.solve(J, -fx)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(J, -fx, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            lam, accepted = 1.0, False
            for _ in range(14):
                x_new = x + lam * step
                f_new = np.asarray(F(x_new), dtype=float)
                if np.all(np.isfinite(f_new)) and np.max(np.abs(f_new)) < nrm:
                    x, fx, accepted = x_new, f_new, True
                    break
                lam *= 0.5
            if not accepted:
                break
        nrm = float(np.max(np.abs(fx)))
        if nrm < best[0]:
            best = (nrm, x.copy())
        return best[1], best[0]

    x, resid = newton(x0)
    if resid <= tol:
        return x
    if scan is not None:
        lo, hi, n = scan
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        g0 = np.linspace(lo[0], hi[0], n)
        g1 = np.linspace(lo[1], hi[1], n)
        best_pt, best_nrm = None, np.inf
        for u in g0:
            for v in g1:
                fv = np.asarray(F(np.array([u, v])), dtype=float)
                if np.all(np.isfinite(fv)):
                    nrm = float(np.max(np.abs(fv)))
                    if nrm < best_nrm:
                        best_nrm, best_pt = nrm, np.array([u, v])
        if best_pt is not None:
            x2, resid2 = newton(best_pt)
            if resid2 <= tol:
                return x2
            if resid2 < resid:
                x, resid = x2, resid2
    raise SolverError(
        f"solve2: no convergence (best residual {resid:.3e} > tol {tol:.3e})",
        best_residual=resid,
        best_x=x,
    )
