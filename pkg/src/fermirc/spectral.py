"""Spectral densities and the fermionic reaction-coordinate (RC) chain mapping.

A spectral density J(w) >= 0 encodes how strongly a fermionic bath couples to
an impurity at energy w.  Extracting a single collective bath mode turns the
original bath into (coupling, on-site energy, residual bath): the coupling
squared is the total weight of J over 2*pi, the on-site energy is the
normalized first moment, and the residual spectral density is

    J1(w) = 4 * coupling^2 * J(w) / |W+(w)|^2,

where W+(w) = i J(w) + PV integral of J(w')/(w'-w) dw'/pi is the boundary
value of the Cauchy transform of J.  Iterating the extraction produces a
chain of modes whose residual density flows to a semicircle supported on the
original interval.

Closed forms are used where they exist (Lorentzian, flat, semicircle);
everything else runs through principal-value quadrature.  All objects are
immutable and all functions are pure.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

__all__ = [
    "SpectralDensity",
    "Lorentzian",
    "Flat",
    "Semicircle",
    "Tabulated",
    "RCChainLevel",
    "DegenerateSDError",
    "MappingBreakdownError",
    "QuadratureError",
    "eval_sd",
    "cauchy_plus",
    "rc_map",
    "iterate_chain",
    "pv_integral",
    "tabulate_sd",
    "read_sd_csv",
    "write_sd_csv",
    "write_chain_csv",
]

TWO_PI = 2.0 * math.pi

#: Residual values in [-NEGATIVE_CLAMP * max(J), 0) are clamped to zero;
#: anything below that aborts the mapping.
NEGATIVE_CLAMP = 1e-8


class DegenerateSDError(ValueError):
    """Raised when a spectral density carries no weight to map."""


class MappingBreakdownError(RuntimeError):
    """Raised when an iterated residual density turns significantly negative."""

    def __init__(self, message, level):
        super().__init__(message)
        self.level = level


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature cannot reach the requested accuracy."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class SpectralDensity:
    """Base class; concrete densities implement ``__call__`` and ``support``."""

    @property
    def support(self):
        raise NotImplementedError

    @property
    def window(self):
        """Finite interval used for quadrature (equals support when finite)."""
        return self.support

    def __call__(self, w):
        raise NotImplementedError


@dataclass(frozen=True)
class Lorentzian(SpectralDensity):
    """J(w) = coupling * width^2 / ((w - center)^2 + width^2).

    The peak value is ``coupling`` and the half-width at half-maximum is
    ``width``.  The tails extend over the whole real line; quadrature
    truncates at ``center +- n_widths * width`` and the tail contributions
    are integrated separately (they are reported, not dropped).
    """

    coupling: float
    width: float
    center: float
    n_widths: float = 50.0

    def __post_init__(self):
        if self.coupling <= 0 or self.width <= 0:
            raise ValueError("Lorentzian needs coupling > 0 and width > 0")
        if self.n_widths <= 1:
            raise ValueError("quadrature window must span at least one width")

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def window(self):
        half = self.n_widths * self.width
        return (self.center - half, self.center + half)

    def __call__(self, w):
        w = np.asarray(w)
        x = w - self.center
        return self.coupling * self.width**2 / (x * x + self.width**2)


@dataclass(frozen=True)
class Flat(SpectralDensity):
    """Constant J(w) = height on its support, zero outside.

    An unbounded support models a wide-band reservoir; such a density cannot
    be RC-mapped (infinite weight) but is a valid generator input.
    """

    height: float
    bounds: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("height must be nonnegative")
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("empty support")

    @property
    def support(self):
        return self.bounds

    def __call__(self, w):
        w = np.asarray(w)
        lo, hi = self.bounds
        inside = (w >= lo) & (w <= hi)
        return np.where(inside, self.height, 0.0)


@dataclass(frozen=True)
class Semicircle(SpectralDensity):
    """J(w) = sqrt(radius^2 - (w - center)^2) on [center - radius, center + radius].

    This is the fixed point of the iterated RC mapping on a compact interval;
    its extraction returns coupling radius/2, energy center and itself as the
    residual density.
    """

    center: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def support(self):
        return (self.center - self.radius, self.center + self.radius)

    def __call__(self, w):
        w = np.asarray(w)
        x = w - self.center
        return np.sqrt(np.maximum(self.radius**2 - x * x, 0.0))


@dataclass(frozen=True, eq=False)
class Tabulated(SpectralDensity):
    """Sampled density on a strictly increasing grid, zero outside the grid.

    Interpolation between samples is monotone piecewise-cubic, which cannot
    undershoot the sampled values and therefore preserves nonnegativity.
    """

    omegas: np.ndarray
    values: np.ndarray
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        omegas = np.array(self.omegas, dtype=float)
        values = np.array(self.values, dtype=float)
        if omegas.ndim != 1 or omegas.shape != values.shape or omegas.size < 4:
            raise ValueError("need matching 1-d grids with at least 4 samples")
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("J(w) must be nonnegative")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", PchipInterpolator(omegas, values, extrapolate=False))

    @property
    def support(self):
        return (float(self.omegas[0]), float(self.omegas[-1]))

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        out = self._interp(w)
        return np.where(np.isnan(out), 0.0, out)


@dataclass(frozen=True)
class RCChainLevel:
    """One extraction step: mode coupling, mode energy and the residual density.

    ``coupling`` is stored as a nonnegative real; an overall phase can always
    be absorbed into the collective mode operator.  ``tail_weight`` is the
    part of the parent weight integral (J/2pi) that lived outside the
    quadrature window; it is included in ``coupling``.
    """

    coupling: float
    energy: float
    residual: SpectralDensity
    tail_weight: float = 0.0


def eval_sd(sd, w):
    """Evaluate J(w); exactly zero outside the declared support."""
    return sd(w)


# ---------------------------------------------------------------------------
# adaptive quadrature helpers
# ---------------------------------------------------------------------------

def _quad(func, a, b, points=None, rtol=1e-11):
    pts = None
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = sorted(p for p in points if a < p < b)
        pts = pts or None
    with warnings.catch_warnings():
        # convergence is judged from the returned error estimate instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(func, a, b, points=pts, limit=400,
                                  epsabs=1e-13, epsrel=rtol)
    if err > max(1e-10, 1e-7 * abs(val)):
        raise QuadratureError(
            f"integral did not converge (value {val:.6e}, error estimate {err:.2e})",
            estimate=err,
        )
    return val


def pv_integral(func, a, b, w, points=None, rtol=1e-11):
    """Principal value of integral func(x)/(x - w) dx over [a, b].

    For w inside (a, b) the singularity is subtracted exactly:
    integrate (func(x) - func(w))/(x - w) plus func(w) * log((b - w)/(w - a)).
    Outside the interval the integrand is regular.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("pv_integral needs finite bounds")
    if a < w < b:
        fw = float(func(w))

        def reg(x):
            dx = x - w
            if abs(dx) < 1e-14 * max(abs(w), 1.0):
                return 0.0
            return (float(func(x)) - fw) / dx

        pts = [w] + (list(points) if points else [])
        val = _quad(reg, a, b, points=pts, rtol=rtol)
        return val + fw * math.log((b - w) / (w - a))
    return _quad(lambda x: float(func(x)) / (x - w), a, b, points=points, rtol=rtol)


def _moments(sd, numeric=False):
    """Return (weight, centroid, tail_weight) with weight = integral J/2pi.

    ``centroid`` is the weight-normalized first moment.  For a Lorentzian the
    tails beyond the quadrature window are integrated out to infinity; their
    first moment reduces to center * tail_weight by symmetry.
    """
    if not numeric:
        if isinstance(sd, Lorentzian):
            return sd.coupling * sd.width / 2.0, sd.center, 0.0
        if isinstance(sd, Semicircle):
            return sd.radius**2 / 4.0, sd.center, 0.0
        if isinstance(sd, Flat):
            lo, hi = sd.support
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise DegenerateSDError("flat density with unbounded support has infinite weight")
            return sd.height * (hi - lo) / TWO_PI, 0.5 * (lo + hi), 0.0

    if isinstance(sd, Lorentzian):
        a, b = sd.window
        w0 = _quad(lambda x: float(sd(x)), a, b, points=[sd.center]) / TWO_PI
        m1 = _quad(lambda x: x * float(sd(x)), a, b, points=[sd.center]) / TWO_PI
        tail = (_quad(lambda x: float(sd(x)), -math.inf, a)
                + _quad(lambda x: float(sd(x)), b, math.inf)) / TWO_PI
        weight = w0 + tail
        centroid = (m1 + sd.center * tail) / weight
        return weight, centroid, tail

    lo, hi = sd.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DegenerateSDError("cannot integrate a density with unbounded support")
    mid = 0.5 * (lo + hi)
    weight = _quad(lambda x: float(sd(x)), lo, hi, points=[mid]) / TWO_PI
    m1 = _quad(lambda x: x * float(sd(x)), lo, hi, points=[mid]) / TWO_PI
    if weight <= 0 or not np.isfinite(weight):
        raise DegenerateSDError("spectral density carries no weight")
    return weight, m1 / weight, 0.0


# ---------------------------------------------------------------------------
# Cauchy transform boundary value
# ---------------------------------------------------------------------------

def cauchy_plus(sd, w, numeric=False):
    """W+(w) = i J(w) + PV integral J(w')/(w'-w) dw'/pi for w inside the support.

    Closed forms are used for the Lorentzian, flat and semicircle kinds
    unless ``numeric`` forces quadrature.  The imaginary part always equals
    J(w) (Sokhotski-Plemelj).
    """
    w = float(w)
    jw = float(sd(w))
    if not numeric:
        if isinstance(sd, Lorentzian):
            x = w - sd.center
            real = -sd.coupling * sd.width * x / (x * x + sd.width**2)
            return complex(real, jw)
        if isinstance(sd, Semicircle):
            lo, hi = sd.support
            if not lo < w < hi:
                raise ValueError("w must lie inside the support")
            return complex(sd.center - w, jw)
        if isinstance(sd, Flat):
            lo, hi = sd.support
            if not lo < w < hi:
                raise ValueError("w must lie inside the support")
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("flat density needs finite support for the transform")
            return complex(sd.height / math.pi * math.log((hi - w) / (w - lo)), jw)

    a, b = sd.window
    if not a < w < b:
        raise ValueError("w must lie inside the support")
    real = pv_integral(lambda x: float(sd(x)), a, b, w) / math.pi
    if isinstance(sd, Lorentzian):
        real += (_quad(lambda x: float(sd(x)) / (x - w), -math.inf, a)
                 + _quad(lambda x: float(sd(x)) / (x - w), b, math.inf)) / math.pi
    return complex(real, jw)


# ---------------------------------------------------------------------------
# grid engine: everything is smooth in the angle variable w = c - r*cos(theta)
# ---------------------------------------------------------------------------

def _simpson_weights(npts, h):
    if npts < 3 or npts % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points")
    w = np.full(npts, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _angle_grid(a, b, npts):
    theta = np.linspace(0.0, math.pi, npts)
    c = 0.5 * (a + b)
    r = 0.5 * (b - a)
    omega = c - r * np.cos(theta)
    omega[0], omega[-1] = a, b
    return theta, omega, r


def _pv_on_grid(theta, gvals, jvals):
    """Real part of W+ at the interior grid nodes.

    Uses the subtraction (g(t') - g(t))/(cos t - cos t') whose companion
    PV integral of 1/(cos t - cos t') over [0, pi] vanishes identically,
    so only the smooth subtracted part is integrated.
    """
    npts = theta.size
    h = theta[1] - theta[0]
    weights = _simpson_weights(npts, h)
    cos_t = np.cos(theta)
    gprime = np.gradient(gvals, theta)

    num = gvals[None, :] - gvals[1:-1, None]
    den = cos_t[1:-1, None] - cos_t[None, :]
    idx = np.arange(1, npts - 1)
    den[idx - 1, idx] = 1.0
    m = num / den
    m[idx - 1, idx] = gprime[1:-1] / np.sin(theta[1:-1])
    re_interior = (m @ weights) / math.pi

    re = np.empty(npts)
    re[1:-1] = re_interior
    re[0] = re[-1] = 0.0  # never used: residual is pinned to 0 at the edges
    return re


def _lorentzian_tail_pv(sd, targets):
    """Vectorized tail part of PV integral J(x)/(x - w) dx / pi beyond the window."""
    a, b = sd.window
    nodes, wts = np.polynomial.legendre.leggauss(96)
    u = 0.5 * (nodes + 1.0)
    du = 0.5 * wts
    scale = sd.n_widths * sd.width
    total = np.zeros_like(targets)
    for sign, edge in ((1.0, b), (-1.0, a)):
        x = edge + sign * scale * u / (1.0 - u)
        jac = scale / (1.0 - u) ** 2
        jx = np.asarray(sd(x))
        total += ((jx * jac * du)[None, :] / (x[None, :] - targets[:, None])).sum(axis=1)
    return total / math.pi


def _residual_on_grid(sd, lam_sq, npts):
    a, b = sd.window
    theta, omega, _ = _angle_grid(a, b, npts)
    jvals = np.asarray(sd(omega), dtype=float)
    g = jvals * np.sin(theta)
    re = _pv_on_grid(theta, g, jvals)
    if isinstance(sd, Lorentzian):
        re[1:-1] += _lorentzian_tail_pv(sd, omega[1:-1])
    res = np.zeros(npts)
    denom = re[1:-1] ** 2 + jvals[1:-1] ** 2
    res[1:-1] = 4.0 * lam_sq * jvals[1:-1] / denom
    return omega, res


def _clamp_residual(values, level):
    top = values.max()
    floor = values.min()
    if top <= 0:
        raise MappingBreakdownError(f"residual density vanished at level {level}", level)
    if floor < -NEGATIVE_CLAMP * top:
        raise MappingBreakdownError(
            f"mapping breakdown at level {level}: residual reaches {floor:.3e} "
            f"(tolerance {-NEGATIVE_CLAMP * top:.3e})",
            level,
        )
    return np.maximum(values, 0.0)


def rc_map(sd, numeric=False, grid_points=2049):
    """Extract one reaction coordinate from ``sd``.

    Returns the chain level (coupling, energy, residual density).  Closed
    forms are used for the Lorentzian and semicircle kinds unless ``numeric``
    is set; otherwise the residual is tabulated on a cosine-spaced grid over
    the quadrature window (cosine spacing keeps square-root edges smooth; the
    default density also resolves peaks down to ~1% of the window).
    """
    if not numeric:
        if isinstance(sd, Lorentzian):
            lam = math.sqrt(sd.coupling * sd.width / 2.0)
            return RCChainLevel(lam, sd.center, Flat(2.0 * sd.width, bounds=sd.window))
        if isinstance(sd, Semicircle):
            return RCChainLevel(sd.radius / 2.0, sd.center, sd)

    weight, centroid, tail = _moments(sd, numeric=numeric)
    if weight <= 0 or not np.isfinite(weight):
        raise DegenerateSDError("degenerate SD: total weight is not positive and finite")
    omega, res = _residual_on_grid(sd, weight, grid_points)
    res = _clamp_residual(res, level=0)
    return RCChainLevel(math.sqrt(weight), centroid, Tabulated(omega, res), tail)


def iterate_chain(sd, n, grid_points=1025):
    """Apply the RC extraction ``n`` times, each residual feeding the next step.

    Requires a density with finite support (the iteration is performed on a
    fixed cosine-spaced grid, where both the weight integrals and the
    principal values stay smooth).  A semicircle input short-circuits to its
    fixed point.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(sd, Semicircle):
        level = RCChainLevel(sd.radius / 2.0, sd.center, sd)
        return [level] * n

    a, b = sd.support
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("iterate_chain needs a density with finite support")
    if grid_points % 2 == 0:
        grid_points += 1

    theta, omega, r = _angle_grid(a, b, grid_points)
    h = theta[1] - theta[0]
    weights = _simpson_weights(grid_points, h)
    sin_t = np.sin(theta)
    jvals = np.asarray(sd(omega), dtype=float)

    levels = []
    for k in range(n):
        g = jvals * sin_t
        lam_sq = r * (weights @ g) / TWO_PI
        if lam_sq <= 0:
            raise DegenerateSDError(f"degenerate SD at level {k}: no weight left")
        energy = r * (weights @ (omega * g)) / (TWO_PI * lam_sq)
        re = _pv_on_grid(theta, g, jvals)
        nxt = np.zeros_like(jvals)
        nxt[1:-1] = 4.0 * lam_sq * jvals[1:-1] / (re[1:-1] ** 2 + jvals[1:-1] ** 2)
        nxt = _clamp_residual(nxt, level=k)
        residual = Tabulated(omega, nxt)
        levels.append(RCChainLevel(math.sqrt(lam_sq), energy, residual))
        jvals = nxt
    return levels


def tabulate_sd(sd, npts=1025, window=None):
    """Sample a density on a cosine-spaced grid, returning a Tabulated kind."""
    a, b = window if window is not None else sd.window
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("need a finite window to tabulate")
    _, omega, _ = _angle_grid(a, b, npts)
    return Tabulated(omega, np.asarray(sd(omega), dtype=float))


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def write_sd_csv(sd, path, npts=1025):
    """Write (omega, J) samples as two-column CSV with a one-line header."""
    if isinstance(sd, Tabulated):
        omega, vals = sd.omegas, sd.values
    else:
        tab = tabulate_sd(sd, npts)
        omega, vals = tab.omegas, tab.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "J"])
        for x, j in zip(omega, vals):
            writer.writerow([repr(float(x)), repr(float(j))])


def read_sd_csv(path):
    """Read a two-column (omega, J) CSV written by ``write_sd_csv``."""
    omegas, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            omegas.append(float(row[0]))
            values.append(float(row[1]))
    return Tabulated(np.array(omegas), np.array(values))


def write_chain_csv(levels, path):
    """Write chain coefficients as (level, coupling, energy) CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "coupling", "energy"])
        for k, lvl in enumerate(levels):
            writer.writerow([k, repr(float(lvl.coupling)), repr(float(lvl.energy))])
