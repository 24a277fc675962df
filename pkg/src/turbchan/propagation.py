"""Wave-optics Monte Carlo for turbulent free-space channels.

Split-step solution of the paraxial equation on an n x n grid: half-slab
vacuum Fresnel steps in Fourier space alternate with multiplicative phase
screens.  Screens use the sparse-spectrum representation, i.e. a finite sum
of random plane waves

    phi(r) = sum_j  a_j cos(kappa_j . r) + b_j sin(kappa_j . r),

with wavevector magnitudes drawn per log-spaced spectral band and Gaussian
amplitudes carrying each band's share of the slab phase variance
(2 pi k^2 dz Phi_n).  Sparse screens evaluate exactly at any continuous
transverse point, so frozen-turbulence time series are produced by shifting
the evaluation coordinates (no interpolation, no periodic wrap-around).

Per-realization outputs are the aperture transmittance, the beam centroid,
and the spot-shape second-moment matrix; their sample moments estimate the
ensemble statistics used by the analytical transmittance-distribution
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .numerics import RngStream
from .turbulence import (
    ChannelGeometry,
    Kolmogorov,
    SpectrumModel,
    VonKarmanTatarskii,
    fresnel_number,
    rytov_variance,
    spectral_density,
)

__all__ = [
    "Grid",
    "Field",
    "SparseScreen",
    "SimConfig",
    "SampleRecord",
    "EnsembleReport",
    "default_grid",
    "long_term_spot_radius",
    "gaussian_source",
    "sample_screens",
    "evaluate_phase",
    "split_step",
    "transmittance",
    "beam_stats",
    "run_ensemble",
    "run_ensemble_multi",
    "run_timeseries",
    "screen_structure_function",
]

LEAK_WARN_FRACTION = 0.01  # warn when more than 1% of power hits the boundary


# ---------------------------------------------------------------------------
# Grid and field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Square computational grid: n points per axis over ``extent`` meters."""

    n: int
    extent: float

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ConfigError("grid n must be a power of two >= 64", field="grid.n")
        if not (self.extent > 0.0 and math.isfinite(self.extent)):
            raise ConfigError("grid extent must be finite and > 0", field="grid.extent")

    @property
    def spacing(self) -> float:
        return self.extent / self.n

    def axis(self) -> np.ndarray:
        """Cell-center coordinates with 0 on a grid point (FFT convention)."""
        return (np.arange(self.n) - self.n // 2) * self.spacing

    def kaxis(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.n, self.spacing)


@dataclass
class Field:
    """Complex field amplitude u(r; z) sampled on a grid at fixed z."""

    grid: Grid
    values: np.ndarray
    leaked_power: float = 0.0
    warnings: tuple = ()

    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2)) * self.grid.spacing**2

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def long_term_spot_radius(geom: ChannelGeometry, spectrum: SpectrumModel) -> float:
    """Rough wander-broadened spot radius at the receiver, for grid sizing.

    Vacuum diffraction plus the weak-turbulence spread and wander terms
    (focused-beam coefficients, adequate as an envelope estimate).
    """
    om = fresnel_number(geom)
    s2 = rytov_variance(geom, spectrum.cn2)
    w0sq = geom.beam_radius**2
    defocus = (1.0 - geom.path_length / geom.focal_length) ** 2 if math.isfinite(
        geom.focal_length
    ) else 1.0
    vac = w0sq * (defocus + om**-2)
    turb = w0sq * (2.93 + 4 * 0.31) * s2 * om ** (-7.0 / 6.0)
    return math.sqrt(vac + turb)


def default_grid(geom: ChannelGeometry, spectrum: SpectrumModel, n: int = 512,
                 diameter_factor: float = 10.0) -> Grid:
    """Grid sized to ``diameter_factor`` long-term spot diameters."""
    w_lt = long_term_spot_radius(geom, spectrum)
    extent = max(diameter_factor * 2.0 * w_lt, 8.0 * max(geom.beam_radius, w_lt))
    grid = Grid(n=n, extent=extent)
    if grid.spacing > geom.beam_radius / 8.0:
        raise ConfigError(
            f"n={n} leaves {geom.beam_radius / grid.spacing:.1f} points per beam "
            "radius (need >= 8); increase n",
            field="grid.n",
        )
    return grid


def gaussian_source(geom: ChannelGeometry, grid: Grid) -> Field:
    """Gaussian transmitter field with waist W0 and wavefront radius F0.

    u(r; 0) = sqrt(2 / pi W0^2) exp(-r^2/W0^2 - i k r^2 / 2 F0), discretized
    and renormalized to unit power on the grid.
    """
    if grid.spacing > geom.beam_radius / 8.0:
        raise ConfigError(
            "grid under-resolves the beam: need >= 8 points per W0",
            field="grid",
        )
    xs = grid.axis()
    r2 = xs[None, :] ** 2 + xs[:, None] ** 2
    w0 = geom.beam_radius
    amp = math.sqrt(2.0 / (math.pi * w0 * w0)) * np.exp(-r2 / (w0 * w0))
    if math.isfinite(geom.focal_length):
        amp = amp * np.exp(-0.5j * geom.k * r2 / geom.focal_length)
    else:
        amp = amp.astype(complex)
    f = Field(grid=grid, values=amp)
    f.values /= math.sqrt(f.power())
    return f


# ---------------------------------------------------------------------------
# Sparse-spectrum phase screens
# ---------------------------------------------------------------------------


@dataclass
class SparseScreen:
    """One slab's phase screen as a finite sum of random plane waves."""

    kx: np.ndarray
    ky: np.ndarray
    amp_cos: np.ndarray
    amp_sin: np.ndarray
    z_index: int
    slab_thickness: float

    @property
    def n_components(self) -> int:
        return self.kx.size


class _BandSampler:
    """Per-band variance integrals and inverse-CDF tables for |kappa| draws.

    Bands are log-spaced between kappa_min and kappa_max; within a band the
    magnitude is importance-sampled from kappa * Phi_n(kappa), so every
    component carries an equal share of its band's phase variance and the
    sampled correlation function is unbiased.
    """

    def __init__(self, spectrum: SpectrumModel, kappa_min: float, kappa_max: float,
                 n_bands: int):
        if not (0.0 < kappa_min < kappa_max):
            raise ConfigError("need 0 < kappa_min < kappa_max for screen bands")
        edges = np.exp(np.linspace(math.log(kappa_min), math.log(kappa_max),
                                   n_bands + 1))
        self.edges = edges
        self.n_bands = n_bands
        self.band_integrals = np.empty(n_bands)
        self.cdf_grids = []
        self.cdf_tables = []
        for b in range(n_bands):
            lk = np.linspace(math.log(edges[b]), math.log(edges[b + 1]), 257)
            kap = np.exp(lk)
            # integrand of the 1-D radial variance integral, in log kappa
            f = kap**2 * spectral_density(spectrum, kap)
            cum = np.concatenate([[0.0], np.cumsum((f[1:] + f[:-1]) * np.diff(lk) / 2)])
            total = cum[-1]
            self.band_integrals[b] = total
            self.cdf_grids.append(kap)
            self.cdf_tables.append(cum / total)

    def slab_band_variances(self, k: float, slab_thickness: float) -> np.ndarray:
        """Phase variance contributed by each band for one slab."""
        return (2.0 * math.pi) ** 2 * k * k * slab_thickness * self.band_integrals

    def draw_magnitudes(self, band: int, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.cdf_tables[band], self.cdf_grids[band])


def _band_counts(n_components: int, n_bands: int) -> np.ndarray:
    counts = np.full(n_bands, n_components // n_bands, dtype=int)
    counts[: n_components % n_bands] += 1
    return counts


def _screen_band_range(spectrum: SpectrumModel, kappa_min, kappa_max):
    if kappa_min is None or kappa_max is None:
        if isinstance(spectrum, VonKarmanTatarskii):
            kappa_min = kappa_min or 2.0 * math.pi / (4.0 * spectrum.outer_scale)
            kappa_max = kappa_max or 2.0 * math.pi / (spectrum.inner_scale / 2.0)
        else:
            raise ConfigError(
                "Kolmogorov screens need explicit kappa_min/kappa_max "
                "(the power law has no intrinsic scales)",
                field="spectrum",
            )
    return float(kappa_min), float(kappa_max)


def sample_screens(spectrum: SpectrumModel, geom: ChannelGeometry, n_screens: int,
                   n_components: int, stream: RngStream, *, n_bands: int = 16,
                   kappa_min: Optional[float] = None,
                   kappa_max: Optional[float] = None,
                   _sampler: Optional[_BandSampler] = None) -> list[SparseScreen]:
    """Draw one set of sparse-spectrum screens for the whole path.

    Each of the ``n_screens`` slabs (thickness L / n_screens) gets
    ``n_components`` plane waves: magnitudes importance-sampled per
    log-spaced band, directions uniform on the circle, cos/sin amplitudes
    Gaussian with variance = band variance / components in band.
    """
    if n_components < 64:
        raise ConfigError("need n_components >= 64", field="sim.n_components")
    kappa_min, kappa_max = _screen_band_range(spectrum, kappa_min, kappa_max)
    sampler = _sampler or _BandSampler(spectrum, kappa_min, kappa_max, n_bands)
    dz = geom.path_length / n_screens
    band_var = sampler.slab_band_variances(geom.k, dz)
    counts = _band_counts(n_components, n_bands)
    gen = stream.generator()
    screens = []
    for zi in range(n_screens):
        kx = np.empty(n_components)
        ky = np.empty(n_components)
        a = np.empty(n_components)
        b = np.empty(n_components)
        pos = 0
        for band in range(sampler.n_bands):
            m = counts[band]
            if m == 0:
                continue
            mag = sampler.draw_magnitudes(band, gen.random(m))
            theta = gen.random(m) * 2.0 * math.pi
            sd = math.sqrt(band_var[band] / m)
            kx[pos:pos + m] = mag * np.cos(theta)
            ky[pos:pos + m] = mag * np.sin(theta)
            a[pos:pos + m] = gen.normal(0.0, sd, m)
            b[pos:pos + m] = gen.normal(0.0, sd, m)
            pos += m
        screens.append(SparseScreen(kx=kx, ky=ky, amp_cos=a, amp_sin=b,
                                    z_index=zi, slab_thickness=dz))
    return screens


def evaluate_phase(screen: SparseScreen, points, shift_x: float = 0.0) -> np.ndarray:
    """Screen phase at arbitrary continuous points, shifted by ``shift_x``.

    phi(r) = sum_j a_j cos(kappa_j . (r + s)) + b_j sin(kappa_j . (r + s))
    with s = (shift_x, 0); exact, no interpolation.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    theta = np.outer(pts[:, 0] + shift_x, screen.kx) + np.outer(pts[:, 1], screen.ky)
    return np.cos(theta) @ screen.amp_cos + np.sin(theta) @ screen.amp_sin


def _phase_on_grid(screen: SparseScreen, xs: np.ndarray, ys: np.ndarray,
                   shift_x: float = 0.0, cache=None) -> np.ndarray:
    """Screen phase on the full grid via a rank-K factorization.

    phi = Re[(a - i b)^T applied to exp(i kx x) (x) exp(i ky y)]; the two
    K x n factor matrices turn the evaluation into one complex matmul.  For
    frozen-turbulence series the factors are cached and the shift enters as
    a per-component scalar twist.
    """
    w = screen.amp_cos - 1j * screen.amp_sin
    if cache is None:
        ux = np.exp(1j * np.outer(screen.kx, xs + shift_x))
        uy = np.exp(1j * np.outer(screen.ky, ys))
    else:
        ux, uy = cache
        if shift_x != 0.0:
            w = w * np.exp(1j * screen.kx * shift_x)
    return ((w[:, None] * uy).T @ ux).real


# ---------------------------------------------------------------------------
# Split-step propagation
# ---------------------------------------------------------------------------


def _window_1d(xs: np.ndarray, half_extent: float) -> np.ndarray:
    """Cosine taper over the outer 10% of the grid span on each side."""
    start = 0.8 * half_extent
    t = np.clip((np.abs(xs) - start) / (half_extent - start), 0.0, 1.0)
    return np.cos(0.5 * math.pi * t) ** 2


class _Propagator:
    """Cached vacuum propagator phases and absorbing window for one grid."""

    def __init__(self, grid: Grid, k: float):
        kax = grid.kaxis()
        kk = kax[None, :] ** 2 + kax[:, None] ** 2
        self.grid = grid
        self.k = k
        self.kk = kk
        w1 = _window_1d(grid.axis(), grid.extent / 2.0)
        self.window = w1[None, :] * w1[:, None]
        self._cache: dict[float, np.ndarray] = {}

    def phase(self, dz: float) -> np.ndarray:
        p = self._cache.get(dz)
        if p is None:
            p = np.exp(-0.5j * self.kk * dz / self.k)
            self._cache[dz] = p
        return p

    def vacuum(self, u: np.ndarray, dz: float) -> tuple[np.ndarray, float]:
        """One windowed vacuum step; returns (field, absorbed power)."""
        spec = np.fft.fft2(u)
        spec *= self.phase(dz)
        u = np.fft.ifft2(spec)
        cell = self.grid.spacing**2
        before = float(np.sum(np.abs(u) ** 2)) * cell
        u *= self.window
        after = float(np.sum(np.abs(u) ** 2)) * cell
        return u, before - after


def split_step(fld: Field, screens: Sequence[SparseScreen], geom: ChannelGeometry,
               shift_x: float = 0.0, *, _prop: Optional[_Propagator] = None,
               _caches=None) -> Field:
    """Propagate the field to z = L through the given screens.

    Symmetric split-step: half-slab vacuum step, screen phase, half-slab
    vacuum step per slab (adjacent half steps merged).  With no screens this
    is a single vacuum Fresnel propagation over the whole path.  The result
    carries the absorbed-power fraction and a warning when it exceeds 1%.
    """
    prop = _prop or _Propagator(fld.grid, geom.k)
    xs = fld.grid.axis()
    u = fld.values.copy()
    leaked = 0.0
    if not screens:
        u, dp = prop.vacuum(u, geom.path_length)
        leaked += dp
    else:
        dz = screens[0].slab_thickness
        if not math.isclose(dz * len(screens), geom.path_length, rel_tol=1e-9):
            raise ConfigError("screens do not tile the path length")
        u, dp = prop.vacuum(u, dz / 2.0)
        leaked += dp
        for i, screen in enumerate(screens):
            cache = _caches[i] if _caches is not None else None
            phi = _phase_on_grid(screen, xs, xs, shift_x, cache=cache)
            u *= np.exp(1j * phi)
            step = dz if i + 1 < len(screens) else dz / 2.0
            u, dp = prop.vacuum(u, step)
            leaked += dp
    warnings = fld.warnings
    if leaked > LEAK_WARN_FRACTION:
        warnings = warnings + (
            f"boundary leakage {leaked:.3%} exceeds {LEAK_WARN_FRACTION:.0%}",
        )
    return Field(grid=fld.grid, values=u, leaked_power=fld.leaked_power + leaked,
                 warnings=warnings)


# ---------------------------------------------------------------------------
# Receiver-plane observables
# ---------------------------------------------------------------------------

_aperture_weight_cache: dict = {}


def _aperture_weights(grid: Grid, radius: float) -> np.ndarray:
    """Coverage weights of a centered disc; edge cells 4x4 supersampled."""
    key = (grid.n, grid.extent, radius)
    w = _aperture_weight_cache.get(key)
    if w is not None:
        return w
    xs = grid.axis()
    rr = np.hypot(xs[None, :], xs[:, None])
    half_diag = grid.spacing * math.sqrt(2.0) / 2.0
    w = np.zeros((grid.n, grid.n))
    w[rr <= radius - half_diag] = 1.0
    edge = (rr > radius - half_diag) & (rr < radius + half_diag)
    if np.any(edge):
        iy, ix = np.nonzero(edge)
        sub = (np.arange(4) + 0.5) / 4.0 - 0.5
        ox, oy = np.meshgrid(sub * grid.spacing, sub * grid.spacing)
        px = xs[ix][:, None] + ox.ravel()[None, :]
        py = xs[iy][:, None] + oy.ravel()[None, :]
        inside = (px * px + py * py) <= radius * radius
        w[iy, ix] = inside.mean(axis=1)
    if len(_aperture_weight_cache) > 64:
        _aperture_weight_cache.clear()
    _aperture_weight_cache[key] = w
    return w


def transmittance(fld: Field, aperture_radius: float) -> float:
    """Fraction of (unit-normalized) intensity inside the centered disc."""
    if aperture_radius < 0.0:
        raise DomainError("aperture radius must be >= 0")
    if aperture_radius == 0.0:
        return 0.0
    w = _aperture_weights(fld.grid, aperture_radius)
    eta = float(np.sum(w * fld.intensity())) * fld.grid.spacing**2
    return min(max(eta, 0.0), 1.0)


def beam_stats(fld: Field) -> tuple[np.ndarray, np.ndarray]:
    """Centroid r0 and spot-shape matrix S = 4 <(r - r0)(r - r0)^T>.

    The intensity is renormalized to unit power first, so boundary losses do
    not bias the moments.
    """
    inten = fld.intensity()
    total = inten.sum()
    if total <= 0.0:
        raise DomainError("beam_stats: field carries no power")
    inten = inten / total
    xs = fld.grid.axis()
    px = inten.sum(axis=0)  # marginal over y -> function of x
    py = inten.sum(axis=1)
    x0 = float(px @ xs)
    y0 = float(py @ xs)
    dx = xs - x0
    dy = xs - y0
    sxx = 4.0 * float(px @ dx**2)
    syy = 4.0 * float(py @ dy**2)
    sxy = 4.0 * float(dy @ inten @ dx)
    return np.array([x0, y0]), np.array([[sxx, sxy], [sxy, syy]])


# ---------------------------------------------------------------------------
# Simulation driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a Monte Carlo run."""

    geometry: ChannelGeometry
    spectrum: SpectrumModel
    grid: Grid
    n_screens: int = 10
    n_components: int = 256
    n_bands: int = 16
    seed: int = 0
    wind_speed: float = 0.0
    dt: float = 0.0
    n_realizations: int = 0
    duration: float = 0.0
    kappa_min: Optional[float] = None
    kappa_max: Optional[float] = None

    def __post_init__(self):
        if self.n_screens < 5:
            raise ConfigError("need n_screens >= 5", field="sim.n_screens")
        if self.n_components < 64:
            raise ConfigError("need n_components >= 64", field="sim.n_components")
        if self.duration > 0.0 and self.dt <= 0.0:
            raise ConfigError("time series needs dt > 0", field="sim.dt")
        if self.wind_speed < 0.0:
            raise ConfigError("wind speed must be >= 0", field="sim.wind_speed")
        w_lt = long_term_spot_radius(self.geometry, self.spectrum)
        min_extent = 8.0 * max(self.geometry.beam_radius, w_lt)
        if self.grid.extent < min_extent:
            raise ConfigError(
                f"grid extent {self.grid.extent:.3g} m < {min_extent:.3g} m "
                "(8 x max(W0, long-term spot radius)); wrap-around risk",
                field="grid.extent",
            )


@dataclass(frozen=True)
class SampleRecord:
    """One realization's transmittance, centroid, and spot-shape matrix."""

    eta: float
    x0: float
    y0: float
    sxx: float
    syy: float
    sxy: float
    realization_index: int
    time: Optional[float] = None

    def __post_init__(self):
        if not (-1e-9 <= self.eta <= 1.0 + 1e-9):
            raise DomainError(f"eta={self.eta} outside [0, 1]")
        if not (self.sxx > 0.0 and self.syy > 0.0):
            raise DomainError("spot-shape diagonal must be positive")
        if self.sxx * self.syy - self.sxy**2 < -1e-12 * self.sxx * self.syy:
            raise DomainError("spot-shape matrix must be positive-semidefinite")

    @property
    def spot_mean(self) -> float:
        """Scalar spot proxy (Sxx + Syy) / 2 = mean of the eigenvalues."""
        return 0.5 * (self.sxx + self.syy)


@dataclass
class EnsembleReport:
    """Accuracy bookkeeping aggregated over realizations."""

    n_realizations: int = 0
    n_leak_warnings: int = 0
    max_leaked_power: float = 0.0
    warnings: tuple = ()


class _Engine:
    """Per-process cache of everything constant across realizations."""

    def __init__(self, config: SimConfig, apertures: Sequence[float]):
        self.config = config
        self.apertures = tuple(apertures)
        self.source = gaussian_source(config.geometry, config.grid)
        self.prop = _Propagator(config.grid, config.geometry.k)
        kmin, kmax = _screen_band_range(config.spectrum, config.kappa_min,
                                        config.kappa_max)
        self.sampler = _BandSampler(config.spectrum, kmin, kmax, config.n_bands)
        for a in self.apertures:
            _aperture_weights(config.grid, a)

    def screens_for(self, stream: RngStream) -> list[SparseScreen]:
        return sample_screens(
            self.config.spectrum, self.config.geometry, self.config.n_screens,
            self.config.n_components, stream, n_bands=self.config.n_bands,
            kappa_min=self.config.kappa_min, kappa_max=self.config.kappa_max,
            _sampler=self.sampler,
        )

    def propagate(self, screens, shift_x=0.0, caches=None) -> Field:
        return split_step(self.source, screens, self.config.geometry,
                          shift_x, _prop=self.prop, _caches=caches)

    def observe(self, fld: Field, index: int, time=None) -> list[SampleRecord]:
        r0, smat = beam_stats(fld)
        return [
            SampleRecord(
                eta=transmittance(fld, a), x0=r0[0], y0=r0[1],
                sxx=smat[0, 0], syy=smat[1, 1], sxy=smat[0, 1],
                realization_index=index, time=time,
            )
            for a in self.apertures
        ]

    def run_one(self, index: int):
        stream = RngStream(self.config.seed, index)
        screens = self.screens_for(stream)
        fld = self.propagate(screens)
        return self.observe(fld, index), fld.leaked_power


_WORKER_ENGINE: Optional[_Engine] = None


def _worker_init(config: SimConfig, apertures):
    global _WORKER_ENGINE
    _WORKER_ENGINE = _Engine(config, apertures)


def _worker_run(index: int):
    return index, _WORKER_ENGINE.run_one(index)


def _run_all(config: SimConfig, apertures: Sequence[float], workers: int):
    indices = range(config.n_realizations)
    report = EnsembleReport(n_realizations=config.n_realizations)
    results = {}
    if workers <= 1:
        engine = _Engine(config, apertures)
        for i in indices:
            results[i] = engine.run_one(i)
    else:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init,
            initargs=(config, tuple(apertures)),
        ) as pool:
            for i, res in pool.map(_worker_run, indices, chunksize=8):
                results[i] = res
    by_aperture = {a: [] for a in apertures}
    for i in sorted(results):
        recs, leaked = results[i]
        for a, rec in zip(apertures, recs):
            by_aperture[a].append(rec)
        report.max_leaked_power = max(report.max_leaked_power, leaked)
        if leaked > LEAK_WARN_FRACTION:
            report.n_leak_warnings += 1
    if report.n_leak_warnings:
        report.warnings = (
            f"{report.n_leak_warnings} realizations leaked more than "
            f"{LEAK_WARN_FRACTION:.0%} of power (max {report.max_leaked_power:.3%})",
        )
    return by_aperture, report


def run_ensemble(config: SimConfig, workers: int = 1) -> list[SampleRecord]:
    """Independent realizations at the geometry's aperture radius.

    Realization i consumes stream index i of the master seed, so the output
    is identical for any worker count.
    """
    if config.n_realizations <= 0:
        raise ConfigError("n_realizations must be > 0", field="sim.n_realizations")
    by_aperture, _ = _run_all(config, [config.geometry.aperture_radius], workers)
    return by_aperture[config.geometry.aperture_radius]


def run_ensemble_multi(config: SimConfig, apertures: Sequence[float],
                       workers: int = 1):
    """Like :func:`run_ensemble` but records every aperture per realization.

    Returns ``(records_by_aperture, report)``; the field is propagated once
    per realization and clipped by each aperture.
    """
    if config.n_realizations <= 0:
        raise ConfigError("n_realizations must be > 0", field="sim.n_realizations")
    if not apertures:
        raise ConfigError("need at least one aperture", field="apertures")
    return _run_all(config, list(apertures), workers)


def run_timeseries(config: SimConfig, duration: Optional[float] = None,
                   apertures: Optional[Sequence[float]] = None):
    """Frozen-turbulence time series from a single screen set.

    One screen set is drawn (stream index 0) and reused; at step m every
    screen is evaluated with transverse shift wind_speed * m * dt.  Returns
    ``(records_by_aperture, report)``; use a single-entry aperture list (the
    default) for the plain series.
    """
    duration = config.duration if duration is None else duration
    if duration <= 0.0 or config.dt <= 0.0:
        raise ConfigError("time series needs duration > 0 and dt > 0", field="sim")
    apertures = list(apertures) if apertures else [config.geometry.aperture_radius]
    engine = _Engine(config, apertures)
    stream = RngStream(config.seed, 0)
    screens = engine.screens_for(stream)
    xs = config.grid.axis()
    caches = [
        (np.exp(1j * np.outer(s.kx, xs)), np.exp(1j * np.outer(s.ky, xs)))
        for s in screens
    ]
    n_steps = int(round(duration / config.dt))
    report = EnsembleReport(n_realizations=n_steps)
    by_aperture = {a: [] for a in apertures}
    for m in range(n_steps):
        t = m * config.dt
        fld = engine.propagate(screens, shift_x=config.wind_speed * t, caches=caches)
        for a, rec in zip(apertures, engine.observe(fld, m, time=t)):
            by_aperture[a].append(rec)
        report.max_leaked_power = max(report.max_leaked_power, fld.leaked_power)
        if fld.leaked_power > LEAK_WARN_FRACTION:
            report.n_leak_warnings += 1
    if report.n_leak_warnings:
        report.warnings = (
            f"{report.n_leak_warnings} steps leaked more than "
            f"{LEAK_WARN_FRACTION:.0%} of power (max {report.max_leaked_power:.3%})",
        )
    return by_aperture, report


def ensemble_summary(records: Sequence[SampleRecord]) -> dict:
    """Definitional sample estimators of the channel statistics.

    Means of eta, eta^2, the per-axis wander variance (x and y pooled), and
    the first two moments of the scalar spot size (Sxx + Syy)/2, each with a
    jackknife-free standard error of the mean.
    """
    eta = np.array([r.eta for r in records])
    x0 = np.array([r.x0 for r in records])
    y0 = np.array([r.y0 for r in records])
    spot = np.array([r.spot_mean for r in records])
    n = eta.size
    if n < 2:
        raise DomainError("ensemble_summary: need at least 2 records")

    def se(v):
        return float(np.std(v, ddof=1) / math.sqrt(v.size))

    eta2 = eta * eta
    spot2 = spot * spot
    return {
        "n": int(n),
        "mean_eta": float(eta.mean()),
        "se_mean_eta": se(eta),
        "mean_eta2": float(eta2.mean()),
        "se_mean_eta2": se(eta2),
        "sigma_bw2": float((np.var(x0, ddof=1) + np.var(y0, ddof=1)) / 2.0),
        "mean_S": float(spot.mean()),
        "se_mean_S": se(spot),
        "mean_S2": float(spot2.mean()),
        "se_mean_S2": se(spot2),
    }


def screen_structure_function(screens: Sequence[SparseScreen],
                              separations: np.ndarray,
                              directions: int = 8) -> np.ndarray:
    """Phase structure function D(r) estimated from sampled screens.

    Uses the per-screen conditional expectation
    D_screen(d) = sum_j (a_j^2 + b_j^2)(1 - cos(kappa_j . d)), averaged over
    screens and over ``directions`` orientations of d; the screen average
    converges to the spectral-integral structure function.
    """
    seps = np.asarray(separations, dtype=float)
    angles = np.linspace(0.0, math.pi, directions, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    acc = np.zeros(seps.size)
    for screen in screens:
        power = screen.amp_cos**2 + screen.amp_sin**2
        for d in dirs:
            proj = screen.kx * d[0] + screen.ky * d[1]
            # (n_sep, K) phase arguments
            acc += (power[None, :] * (1.0 - np.cos(np.outer(seps, proj)))).sum(axis=1)
    return acc / (len(screens) * directions)
