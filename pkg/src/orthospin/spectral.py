"""Compactly supported spectral measures and their free-probability transforms.

A :class:`SpectralMeasure` is one of four kinds (semicircle, two-point,
Marchenko-Pastur, discrete atoms). A :class:`TransformProfile` caches the
support edges, one-sided Hilbert limits and the image window
``(x_min, x_max)`` of the R-transform, and evaluates

* the Hilbert transform ``H(z) = int dmu(t) / (z - t)`` off the support,
* the R-transform, defined by ``H(R(z) + 1/z) = z`` and extended by
  continuity with ``R(0) = mean``,
* ``K = R + 1/z`` (the inverse of ``H``) and ``Q`` (the inverse of ``R``),
* the high-temperature free energy ``I(beta) = 1/2 int_0^{2 beta} R(v) dv``.

With ``closed_form=False`` every transform goes through numeric inversion
of ``H`` by bisection, which is what the cross-checks compare against.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NonConvergenceError
from .quadrature import adaptive_simpson, golden_max

KINDS = ("semicircle", "two_point", "marchenko_pastur", "discrete")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def _quad(f, a, b):
    with warnings.catch_warnings():
        # odd integrands against symmetric weights integrate to ~0 and trip the roundoff check
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def _bisect_vec(fun, target, lo, hi, iters=80):
    """Vectorized bisection for ``fun`` increasing on ``[lo, hi]``."""
    lo = np.full_like(target, lo, dtype=float)
    hi = np.full_like(target, hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = fun(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


class _Family:
    """Per-kind closed forms. ``None`` means "not available in closed form"."""

    r_closed = q_closed = r_prime_closed = free_energy_closed = None


class _Semicircle(_Family):
    edges = (-2.0, 2.0)
    h_edges = (-1.0, 1.0)
    mean = 0.0
    variance = 1.0

    @staticmethod
    def hilbert(w):
        d = w + math.copysign(math.sqrt(max(w * w - 4.0, 0.0)), w)
        return 2.0 / d

    @staticmethod
    def g(w):
        d = w + math.copysign(math.sqrt(max(w * w - 4.0, 0.0)), w)
        return 4.0 / (d * d)

    @staticmethod
    def r_closed(z):
        return z

    @staticmethod
    def r_prime_closed(z):
        return 1.0

    @staticmethod
    def q_closed(x):
        return x

    @staticmethod
    def free_energy_closed(beta):
        return beta * beta

    @staticmethod
    def expect(f):
        # lambda = 2 cos(t), d rho = (2/pi) sin^2(t) dt on [0, pi]
        return 2.0 / math.pi * _quad(lambda t: f(2.0 * math.cos(t)) * math.sin(t) ** 2,
                                     0.0, math.pi)

    @staticmethod
    def quantiles(u):
        # mass above 2 cos(t) is (t - sin t cos t) / pi
        upper = 1.0 - np.asarray(u, dtype=float)
        t = _bisect_vec(lambda t: (t - np.sin(t) * np.cos(t)) / np.pi, upper, 0.0, np.pi, 64)
        return 2.0 * np.cos(t)


class _TwoPoint(_Family):
    edges = (-1.0, 1.0)
    h_edges = (-math.inf, math.inf)

    def __init__(self, p):
        self.p = p
        self.mean = 2.0 * p - 1.0
        self.variance = 1.0 - self.mean ** 2

    def hilbert(self, w):
        return (w + self.mean) / ((w - 1.0) * (w + 1.0))

    def g(self, w):
        return (self.mean * w + 1.0) / ((w - 1.0) * (w + 1.0))

    def r_closed(self, z):
        # (sqrt(1 + 4z(m+z)) - 1) / (2z), rationalized so z = 0 needs no special case
        m = self.mean
        s = math.sqrt(1.0 + 4.0 * z * (m + z))
        return 2.0 * (m + z) / (1.0 + s)

    def r_prime_closed(self, z):
        m = self.mean
        s = math.sqrt(1.0 + 4.0 * z * (m + z))
        return 2.0 * ((1.0 + s) - (m + z) * (2.0 * m + 4.0 * z) / s) / (1.0 + s) ** 2

    def q_closed(self, x):
        return (x - self.mean) / ((1.0 - x) * (1.0 + x))

    def _antiderivative(self, z):
        # primitive of (sqrt(1 + 4z(m+z)) - 1) / z
        m = self.mean
        s = math.sqrt(1.0 + 4.0 * z * (m + z))
        return s + m * math.log(s + 2.0 * z + m) - math.log(s + 2.0 * m * z + 1.0)

    def free_energy_closed(self, beta):
        return 0.25 * (self._antiderivative(2.0 * beta) - self._antiderivative(0.0))

    def expect(self, f):
        return self.p * f(1.0) + (1.0 - self.p) * f(-1.0)

    def quantiles(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= 1.0 - self.p, -1.0, 1.0)


class _MarchenkoPastur(_Family):
    def __init__(self, lam):
        self.lam = lam
        r = math.sqrt(lam)
        self.edges = ((1.0 - r) ** 2, (1.0 + r) ** 2)
        self.h_edges = (1.0 / (1.0 - r), 1.0 / (1.0 + r))
        self.mean = lam
        self.variance = lam

    def _parts(self, w):
        lam = self.lam
        a = w + 1.0 - lam
        b = max((w - 1.0 - lam) ** 2 - 4.0 * lam, 0.0)
        return a, math.copysign(math.sqrt(b), a)

    def hilbert(self, w):
        a, s = self._parts(w)
        return 2.0 / (a + s)

    def g(self, w):
        a, s = self._parts(w)
        c = w - 1.0 + self.lam
        # c - s cancels when both share a sign; (c - s)(c + s) = 4 lam w
        num = 4.0 * self.lam * w / (c + s) if (c > 0) == (s > 0) else c - s
        return num / (a + s)

    def r_closed(self, z):
        return self.lam / (1.0 - z)

    def r_prime_closed(self, z):
        return self.lam / (1.0 - z) ** 2

    def q_closed(self, x):
        return 1.0 - self.lam / x

    def free_energy_closed(self, beta):
        return -0.5 * self.lam * math.log1p(-2.0 * beta)

    def _point(self, t):
        return 1.0 + self.lam + 2.0 * math.sqrt(self.lam) * np.cos(t)

    def _weight(self, t):
        return 2.0 * self.lam * np.sin(t) ** 2 / (np.pi * self._point(t))

    def expect(self, f):
        return _quad(lambda t: f(float(self._point(t))) * float(self._weight(t)), 0.0, math.pi)

    def _upper_mass(self, theta):
        theta = np.asarray(theta, dtype=float)
        t = 0.5 * theta[..., None] * (_GL_NODES + 1.0)
        return 0.5 * theta * np.sum(_GL_WEIGHTS * self._weight(t), axis=-1)

    def quantiles(self, u):
        upper = 1.0 - np.asarray(u, dtype=float)
        t = _bisect_vec(self._upper_mass, upper, 0.0, np.pi, 64)
        return self._point(t)


class _Discrete(_Family):
    h_edges = (-math.inf, math.inf)

    def __init__(self, locs, wts):
        self.locs = locs
        self.wts = wts
        self.edges = (float(locs[0]), float(locs[-1]))
        self.mean = float(np.dot(wts, locs))
        self.variance = float(np.dot(wts, (locs - self.mean) ** 2))

    def hilbert(self, w):
        return float(np.dot(self.wts, 1.0 / (w - self.locs)))

    def g(self, w):
        return float(np.dot(self.wts, self.locs / (w - self.locs)))

    def expect(self, f):
        return float(np.dot(self.wts, f(self.locs)))

    def quantiles(self, u):
        cum = np.cumsum(self.wts)
        idx = np.searchsorted(cum, np.asarray(u, dtype=float) - 1e-15, side="left")
        return self.locs[np.minimum(idx, len(self.locs) - 1)]


@dataclass(frozen=True)
class SpectralMeasure:
    """A compactly supported probability measure on the real line.

    Use the classmethod constructors rather than the raw fields.
    """

    kind: str
    p: float | None = None
    lam: float | None = None
    atoms: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "two_point" and not (self.p is not None and 0.0 < self.p < 1.0):
            raise ValueError("two_point needs p in (0, 1)")
        if self.kind == "marchenko_pastur" and not (self.lam is not None and self.lam > 1.0):
            raise ValueError("marchenko_pastur needs lambda > 1")
        if self.kind == "discrete":
            if not self.atoms:
                raise ValueError("discrete measure needs at least one atom")
            locs = [a[0] for a in self.atoms]
            wts = [a[1] for a in self.atoms]
            if any(w <= 0 for w in wts):
                raise ValueError("atom weights must be strictly positive")
            if any(b <= a for a, b in zip(locs, locs[1:])):
                raise ValueError("atoms must be sorted by strictly increasing location")
            if abs(math.fsum(wts) - 1.0) > 1e-12:
                raise ValueError(f"atom weights sum to {math.fsum(wts)!r}, not 1")
            if not all(math.isfinite(x) for x in locs):
                raise ValueError("atom locations must be finite")

    @classmethod
    def semicircle(cls):
        return cls("semicircle")

    @classmethod
    def two_point(cls, p):
        """``p * delta_{+1} + (1 - p) * delta_{-1}``."""
        return cls("two_point", p=float(p))

    @classmethod
    def marchenko_pastur(cls, lam):
        """Law of the eigenvalues of ``X X^T / N`` for ``X`` of shape ``N x lam N``."""
        return cls("marchenko_pastur", lam=float(lam))

    @classmethod
    def discrete(cls, atoms):
        """Build from ``(location, weight)`` pairs; duplicates are merged, order is free."""
        merged = {}
        for loc, wt in atoms:
            merged[float(loc)] = merged.get(float(loc), 0.0) + float(wt)
        return cls("discrete", atoms=tuple(sorted(merged.items())))

    @classmethod
    def empirical(cls, values):
        """Uniform weights on the given sample points."""
        values = np.asarray(values, dtype=float)
        return cls.discrete((v, 1.0 / values.size) for v in values)

    @cached_property
    def _family(self):
        if self.kind == "semicircle":
            return _Semicircle()
        if self.kind == "two_point":
            return _TwoPoint(self.p)
        if self.kind == "marchenko_pastur":
            return _MarchenkoPastur(self.lam)
        locs = np.array([a[0] for a in self.atoms])
        wts = np.array([a[1] for a in self.atoms])
        return _Discrete(locs, wts)

    @property
    def support(self):
        return self._family.edges

    @property
    def mean(self):
        return self._family.mean

    @property
    def variance(self):
        return self._family.variance

    def expect(self, f):
        """``int f dmu``; ``f`` must accept numpy arrays for discrete measures."""
        return self._family.expect(f)

    def quantiles(self, n):
        """The ``n`` quantiles at levels ``(i - 1/2) / n``, ascending."""
        u = (np.arange(n) + 0.5) / n
        return np.asarray(self._family.quantiles(u), dtype=float)

    def discretize(self, n):
        """Equal-weight discrete approximation on the ``n`` midpoint quantiles."""
        return SpectralMeasure.empirical(self.quantiles(n))

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "two_point":
            out["p"] = self.p
        elif self.kind == "marchenko_pastur":
            out["lambda"] = self.lam
        elif self.kind == "discrete":
            out["atoms"] = [[loc, wt] for loc, wt in self.atoms]
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind")
        if kind == "semicircle":
            return cls.semicircle()
        if kind == "two_point":
            return cls.two_point(data["p"])
        if kind == "marchenko_pastur":
            return cls.marchenko_pastur(data["lambda"])
        if kind == "discrete":
            return cls.discrete(data["atoms"])
        raise ValueError(f"unknown measure kind {kind!r}")


class TransformProfile:
    """Cached edge data and transform evaluators for one measure.

    Instances are immutable. ``closed_form`` selects family closed forms for
    ``R``, ``R'``, ``Q`` and ``I``; discrete measures always use the numeric path.
    """

    __slots__ = ("measure", "closed_form", "lambda_min", "lambda_max", "h_min", "h_max",
                 "x_min", "x_max", "mean_m", "variance", "_fam")

    def __init__(self, measure: SpectralMeasure, closed_form: bool = True):
        fam = measure._family
        lo, hi = fam.edges
        h_min, h_max = fam.h_edges
        values = {
            "measure": measure,
            "closed_form": bool(closed_form) and fam.r_closed is not None,
            "lambda_min": lo,
            "lambda_max": hi,
            "h_min": h_min,
            "h_max": h_max,
            "x_min": lo if math.isinf(h_min) else lo - 1.0 / h_min,
            "x_max": hi if math.isinf(h_max) else hi - 1.0 / h_max,
            "mean_m": fam.mean,
            "variance": fam.variance,
            "_fam": fam,
        }
        for key, val in values.items():
            object.__setattr__(self, key, val)

    def __setattr__(self, key, value):
        raise AttributeError("TransformProfile is immutable")

    def __repr__(self):
        return (f"TransformProfile({self.measure.kind}, closed_form={self.closed_form}, "
                f"support=[{self.lambda_min:g}, {self.lambda_max:g}], "
                f"H=({self.h_min:g}, {self.h_max:g}), x=({self.x_min:g}, {self.x_max:g}))")

    # -- Hilbert transform ------------------------------------------------

    def hilbert(self, z):
        z = float(z)
        if self.lambda_min <= z <= self.lambda_max:
            raise DomainError(f"z={z!r} lies in the support [{self.lambda_min}, {self.lambda_max}]")
        return self._fam.hilbert(z)

    # -- R-transform ------------------------------------------------------

    def _check_r_domain(self, z):
        if not (self.h_min < z < self.h_max):
            raise DomainError(f"z={z!r} outside the R-transform domain ({self.h_min}, {self.h_max})")

    def r(self, z):
        z = float(z)
        self._check_r_domain(z)
        return self._r(z)

    def _r(self, z):
        if z == 0.0:
            return self.mean_m
        if self.closed_form:
            return self._fam.r_closed(z)
        return self._r_numeric(z)

    def _invert_hilbert(self, z):
        """Solve ``H(w) = z`` for ``w`` off the support by bisection."""
        fam = self._fam
        m = abs(self.mean_m)
        if z > 0:
            edge = self.lambda_max
            lo = edge if math.isfinite(self.h_max) else edge + 1e-12 * (1.0 + abs(edge))
            hi = edge + 1.0 / z + m + 1.0
        else:
            edge = self.lambda_min
            lo = edge - 1.0 / (-z) - m - 1.0
            hi = edge if math.isfinite(self.h_min) else edge - 1e-12 * (1.0 + abs(edge))
        # H is decreasing on both components of the complement of the support
        if not (fam.hilbert(lo) >= z >= fam.hilbert(hi)):
            raise NonConvergenceError(f"cannot bracket H(w) = {z!r} in [{lo}, {hi}]")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if fam.hilbert(mid) > z:
                lo = mid
            else:
                hi = mid
        return lo if abs(fam.hilbert(lo) - z) <= abs(fam.hilbert(hi) - z) else hi

    def _r_numeric(self, z):
        w = self._invert_hilbert(z)
        # R = w - 1/H(w), written as G(w)/H(w) with G = wH - 1 to avoid cancellation
        return self._fam.g(w) / self._fam.hilbert(w)

    def r_prime(self, z):
        """Derivative of ``R``; closed form when available, else central differences."""
        z = float(z)
        self._check_r_domain(z)
        if self.closed_form:
            return self._fam.r_prime_closed(z)
        h = 1e-6 * max(1.0, abs(z))
        up, down = z + h, z - h
        if up >= self.h_max:
            return (self._r(z) - self._r(down)) / h
        if down <= self.h_min:
            return (self._r(up) - self._r(z)) / h
        return (self._r(up) - self._r(down)) / (2.0 * h)

    # -- K and Q ----------------------------------------------------------

    def k(self, z):
        z = float(z)
        if z == 0.0:
            raise DomainError("K is undefined at z = 0")
        return self.r(z) + 1.0 / z

    def q(self, x):
        x = float(x)
        if not (self.x_min < x < self.x_max):
            raise DomainError(f"x={x!r} outside ({self.x_min}, {self.x_max})")
        return self._q(x)

    def _q(self, x):
        """Inverse of ``R`` on the closed window; the edges map to ``H_min``/``H_max``."""
        if x == self.mean_m:
            return 0.0
        if x >= self.x_max:
            return self.h_max
        if x <= self.x_min:
            return self.h_min
        if self.closed_form:
            return self._fam.q_closed(x)
        if x > self.mean_m:
            lo, hi = 0.0, self.h_max
            if math.isinf(hi):
                hi = 1.0
                while self._r(hi) < x:
                    hi *= 2.0
                    if hi > 1e300:
                        raise NonConvergenceError(f"cannot bracket Q({x!r})")
        else:
            lo, hi = self.h_min, 0.0
            if math.isinf(lo):
                lo = -1.0
                while self._r(lo) > x:
                    lo *= 2.0
                    if lo < -1e300:
                        raise NonConvergenceError(f"cannot bracket Q({x!r})")
        return optimize.brentq(lambda z: self._r(z) - x, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                               maxiter=400)

    # -- free energy ------------------------------------------------------

    def free_energy(self, beta):
        beta = float(beta)
        if beta < 0:
            raise DomainError("beta must be nonnegative")
        if not 2.0 * beta < self.h_max:
            raise DomainError(f"2*beta={2 * beta!r} is not below H_max={self.h_max!r}")
        if beta == 0.0:
            return 0.0
        if self.closed_form:
            return self._fam.free_energy_closed(beta)
        return 0.5 * adaptive_simpson(self._r, 0.0, 2.0 * beta, tol=1e-11, max_depth=40)


@dataclass(frozen=True)
class BetaWindow:
    """The interval ``[u_left, u_right]`` around ``2 beta`` and the sup of ``beta^2 |R'|`` on it."""

    beta: float
    u_left: float
    u_right: float
    zeta: float


# -- operation surface ------------------------------------------------------

def hilbert(profile: TransformProfile, z):
    """``int dmu(t) / (z - t)`` for ``z`` off the support interval."""
    return profile.hilbert(z)


def r_transform(profile: TransformProfile, z):
    return profile.r(z)


def q_transform(profile: TransformProfile, x):
    return profile.q(x)


def k_transform(profile: TransformProfile, z):
    return profile.k(z)


def free_energy_limit(profile: TransformProfile, beta):
    """``I(beta) = 1/2 int_0^{2 beta} R(v) dv``; requires ``2 beta < H_max``."""
    return profile.free_energy(beta)


def small_beta_series(profile: TransformProfile, beta):
    """Second-order expansion ``m beta + sigma^2 beta^2`` of the free energy."""
    return profile.mean_m * beta + profile.variance * beta * beta


def window_bounds(profile: TransformProfile, beta):
    t = math.tanh(beta * (profile.x_max - profile.x_min))
    return 2.0 * beta * (1.0 - t), 2.0 * beta * (1.0 + t)


def beta_window(profile: TransformProfile, beta, grid_points=512):
    """Window ``[u_left, u_right]`` and ``zeta = beta^2 sup |R'|`` over it."""
    beta = float(beta)
    if beta <= 0:
        raise DomainError("beta must be positive")
    u_left, u_right = window_bounds(profile, beta)
    if not (profile.h_min < u_left and u_right < profile.h_max):
        raise DomainError(f"window [{u_left}, {u_right}] leaves the R-transform domain "
                          f"({profile.h_min}, {profile.h_max})")
    if u_right == u_left:
        return BetaWindow(beta, u_left, u_right, beta * beta * abs(profile.r_prime(u_left)))

    def slope(z):
        return abs(profile.r_prime(z))

    grid = np.linspace(u_left, u_right, grid_points)
    vals = np.array([slope(z) for z in grid])
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
    _, polished = golden_max(slope, lo, hi, tol=1e-10)
    best = max(best, polished)
    return BetaWindow(beta, u_left, u_right, beta * beta * best)
