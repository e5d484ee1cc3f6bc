"""Two-replica variational problem.

The rate function of the Rayleigh quotient ``V1 = v^T D v / |v|^2`` under a
uniformly random direction ``v`` is

    T(x) = 1/2 int log(1 + Q(x) (x - lam)) dmu(lam)       for x in [x_min, x_max]
    T(x) = 1/2 (L_max - log(lam_max - x))                  for x in [x_max, lam_max)
    T(x) = 1/2 (L_min - log(x - lam_min))                  for x in (lam_min, x_min]

with ``L_edge = int log|edge - lam| dmu``, and ``+inf`` elsewhere. The
objective is ``psi(x, y) = beta (x + y) + log cosh beta (x - y) - T(x) - T(y)``.

``2 T'`` is an increasing bijection from the open support onto the real
line. Its inverse, :meth:`RateFunction.response`, equals ``R`` on the
R-transform domain and ``edge - 1/u`` beyond it, so every stationary point of
``psi`` solves ``x = response(2 beta (1 + t))``, ``y = response(2 beta (1 - t))``
with ``t = tanh beta (x - y)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import optimize

from .errors import DomainError, NonContractionWarning, NonConvergenceError, NoTransitionError
from .quadrature import golden_max
from .spectral import TransformProfile, beta_window

LOCAL_MAX = "LocalMax"
SADDLE = "Saddle"
INDEFINITE = "Indefinite"


class RateFunction:
    """Evaluator for ``T``, ``T'`` and ``T''`` of one profile. Values of ``T`` are memoized."""

    def __init__(self, profile: TransformProfile):
        self.profile = profile
        self._value = lru_cache(maxsize=65536)(self._evaluate)

    def __repr__(self):
        return f"RateFunction({self.profile!r})"

    @cached_property
    def l_max(self):
        p = self.profile
        return p.measure.expect(lambda lam: np.log(np.abs(p.lambda_max - lam)))

    @cached_property
    def l_min(self):
        p = self.profile
        return p.measure.expect(lambda lam: np.log(np.abs(lam - p.lambda_min)))

    def __call__(self, x):
        return self._value(float(x))

    def _evaluate(self, x):
        p = self.profile
        if not (p.lambda_min < x < p.lambda_max):
            return math.inf
        if x == p.mean_m:
            return 0.0
        if x > p.x_max:
            return 0.5 * (self.l_max - math.log(p.lambda_max - x))
        if x < p.x_min:
            return 0.5 * (self.l_min - math.log(x - p.lambda_min))
        return self.middle(x)

    def middle(self, x):
        """The interior branch, valid on the closed window ``[x_min, x_max]``."""
        p = self.profile
        q = p._q(float(x))
        if q == 0.0:
            return 0.0
        if math.isinf(q):
            return math.inf
        return 0.5 * p.measure.expect(lambda lam: np.log1p(q * (x - lam)))

    def derivative(self, x):
        p = self.profile
        x = float(x)
        if x >= p.lambda_max:
            return math.inf
        if x <= p.lambda_min:
            return -math.inf
        if x > p.x_max:
            return 0.5 / (p.lambda_max - x)
        if x < p.x_min:
            return -0.5 / (x - p.lambda_min)
        return 0.5 * p._q(x)

    def second_derivative(self, x):
        p = self.profile
        x = float(x)
        if not (p.lambda_min < x < p.lambda_max):
            return math.inf
        if x > p.x_max:
            return 0.5 / (p.lambda_max - x) ** 2
        if x < p.x_min:
            return 0.5 / (x - p.lambda_min) ** 2
        q = p._q(x)
        if math.isinf(q):
            return math.inf
        if q >= p.h_max:
            q = math.nextafter(p.h_max, -math.inf)
        elif q <= p.h_min:
            q = math.nextafter(p.h_min, math.inf)
        return 0.5 / p.r_prime(q)

    def response(self, u):
        """Inverse of ``2 T'``: the ``x`` at which the rate has slope ``u / 2``."""
        p = self.profile
        u = float(u)
        if u >= p.h_max:
            return p.lambda_max - 1.0 / u
        if u <= p.h_min:
            return p.lambda_min - 1.0 / u
        return p._r(u)


def rate_function(rf: RateFunction, x):
    return rf(x)


def h_x(profile: TransformProfile, x, kappa):
    """``int log((kappa - lam) / (kappa - x)) dmu(lam)`` for ``kappa`` off the open support."""
    x, kappa = float(x), float(kappa)
    lo, hi = profile.lambda_min, profile.lambda_max
    if lo < kappa < hi:
        raise DomainError(f"kappa={kappa!r} lies inside the support ({lo}, {hi})")
    if kappa >= hi and not x < kappa:
        raise DomainError(f"need x < kappa when kappa is above the support, got x={x!r}")
    if kappa <= lo and not x > kappa:
        raise DomainError(f"need x > kappa when kappa is below the support, got x={x!r}")
    if math.isinf(kappa):
        return 0.0
    return profile.measure.expect(lambda lam: np.log((kappa - lam) / (kappa - x)))


# -- objective ---------------------------------------------------------------

def _log_cosh(u):
    a = abs(u)
    return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


def psi(rf: RateFunction, beta, x, y):
    tx, ty = rf(x), rf(y)
    if math.isinf(tx) or math.isinf(ty):
        return -math.inf
    return beta * (x + y) + _log_cosh(beta * (x - y)) - tx - ty


def psi_gradient(rf: RateFunction, beta, x, y):
    t = math.tanh(beta * (x - y))
    return np.array([beta * (1.0 + t) - rf.derivative(x),
                     beta * (1.0 - t) - rf.derivative(y)])


def psi_hessian(rf: RateFunction, beta, x, y):
    c = beta * beta / math.cosh(beta * (x - y)) ** 2
    return np.array([[c - rf.second_derivative(x), -c],
                     [-c, c - rf.second_derivative(y)]])


def classify(hessian):
    eig = np.linalg.eigvalsh(hessian)
    if eig[-1] < 0:
        return LOCAL_MAX
    if np.linalg.det(hessian) < 0:
        return SADDLE
    return INDEFINITE


# -- solutions ----------------------------------------------------------------

@dataclass(frozen=True)
class VariationalSolution:
    x_star: float
    y_star: float
    psi_value: float
    hessian: tuple
    classification: str
    iterations: int
    converged: bool
    trace: tuple = field(default=(), repr=False)
    candidates: tuple = field(default=(), repr=False)

    @property
    def symmetric(self):
        return abs(self.x_star - self.y_star) < 1e-6

    @property
    def hessian_eigenvalues(self):
        return tuple(np.linalg.eigvalsh(np.array(self.hessian)))

    def to_dict(self):
        return {
            "x_star": self.x_star,
            "y_star": self.y_star,
            "psi": self.psi_value,
            "hessian": [list(row) for row in self.hessian],
            "classification": self.classification,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            x_star=float(data["x_star"]),
            y_star=float(data["y_star"]),
            psi_value=float(data["psi"]),
            hessian=tuple(tuple(float(v) for v in row) for row in data["hessian"]),
            classification=data["classification"],
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
        )


def _solution(rf, beta, x, y, iterations, converged, trace=(), candidates=()):
    hess = psi_hessian(rf, beta, x, y)
    return VariationalSolution(
        x_star=float(x),
        y_star=float(y),
        psi_value=float(psi(rf, beta, x, y)),
        hessian=tuple(tuple(float(v) for v in row) for row in hess),
        classification=classify(hess),
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
        candidates=tuple(candidates),
    )


def fixed_point_map(rf: RateFunction, beta, x, y):
    t = math.tanh(beta * (x - y))
    r = rf.profile.r
    return r(2.0 * beta * (1.0 + t)), r(2.0 * beta * (1.0 - t))


def fixed_point_residual(rf: RateFunction, beta, x, y):
    gx, gy = fixed_point_map(rf, beta, x, y)
    return max(abs(x - gx), abs(y - gy))


def solve_fixed_point(rf: RateFunction, beta, tol=1e-12, max_iter=10_000):
    """Iterate the stationarity map from ``(m + 0.01 (x_max - m), m)``.

    Plain iteration while the max-norm step keeps shrinking; a half-damped
    step is used once two consecutive steps fail to contract.
    """
    p = rf.profile
    beta = float(beta)
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    m = p.mean_m
    if beta == 0.0:
        return _solution(rf, beta, m, m, 0, True)
    try:
        bound = 2.0 * beta_window(p, beta).zeta
    except DomainError:
        bound = math.inf  # window reaches past the R-transform domain
    if bound >= 1.0:
        warnings.warn(f"contraction bound 2 zeta = {bound:.4g} >= 1 at beta={beta}",
                      NonContractionWarning, stacklevel=2)
    x, y = m + 0.01 * (p.x_max - m), m
    trace = []
    damping = 1.0
    for it in range(1, max_iter + 1):
        gx, gy = fixed_point_map(rf, beta, x, y)
        step = max(abs(gx - x), abs(gy - y))
        trace.append(step)
        if len(trace) >= 3 and trace[-1] >= trace[-2] >= trace[-3] and damping == 1.0:
            damping = 0.5
        x += damping * (gx - x)
        y += damping * (gy - y)
        if step < tol:
            return _solution(rf, beta, x, y, it, True, trace)
    partial = _solution(rf, beta, x, y, max_iter, False, trace)
    raise NonConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps",
                              partial=partial)


def symmetric_point(rf: RateFunction, beta):
    """``a(beta) = R(2 beta)``; raises :class:`DomainError` when ``2 beta`` leaves the domain."""
    return rf.profile.r(2.0 * beta)


# -- stationary points --------------------------------------------------------

def _gap_map(rf, beta):
    def phi(d):
        t = math.tanh(beta * d)
        return rf.response(2.0 * beta * (1.0 + t)) - rf.response(2.0 * beta * (1.0 - t))
    return phi


def stationary_points(rf: RateFunction, beta, grid=4000):
    """All stationary points with ``x >= y``, found by scanning the gap ``d = x - y``.

    A stationary point with gap ``d`` is a root of ``d - phi(d)``; sign
    changes on a uniform grid are refined by Brent's method and near-tangent
    minima by golden section.
    """
    beta = float(beta)
    p = rf.profile
    phi = _gap_map(rf, beta)
    points = []

    def add(d):
        t = math.tanh(beta * d)
        x = rf.response(2.0 * beta * (1.0 + t))
        y = rf.response(2.0 * beta * (1.0 - t))
        points.append(_solution(rf, beta, x, y, 0, True))

    add(0.0)
    if beta == 0.0:
        return points
    span = p.lambda_max - p.lambda_min
    ds = np.linspace(0.0, span, grid + 1)[1:]
    g = np.array([d - phi(d) for d in ds])
    for i in range(len(ds) - 1):
        if g[i] == 0.0:
            add(ds[i])
        elif g[i] * g[i + 1] < 0:
            add(optimize.brentq(lambda d: d - phi(d), ds[i], ds[i + 1], xtol=1e-15, rtol=1e-15))
        elif 0 < i and g[i] <= g[i - 1] and g[i] <= g[i + 1] and g[i] > 0:
            # possible double root between grid points
            dmin, gmin = golden_max(lambda d: phi(d) - d, ds[i - 1], ds[i + 1], tol=1e-14)
            if -gmin <= 1e-12:
                add(dmin)
    return points


def asymmetric_stationary_points(rf: RateFunction, beta, grid=4000):
    return [s for s in stationary_points(rf, beta, grid) if s.x_star - s.y_star > 1e-9]


# -- global search --------------------------------------------------------------

def _line_max(f, c, width, lo, hi):
    """Local maximum of ``f`` near ``c`` on ``(lo, hi)``, sliding the bracket if needed."""
    for _ in range(60):
        a, b = max(lo, c - width), min(hi, c + width)
        x, fx = golden_max(f, a, b, tol=1e-13)
        at_edge = (x - a < 1e-6 * width and a > lo) or (b - x < 1e-6 * width and b < hi)
        if not at_edge:
            return x, fx
        c = x
    return x, fx


def _coordinate_ascent(rf, beta, x, y, width, lo, hi, sweeps=400, tol=1e-7):
    # golden section resolves x only to ~sqrt(eps); Newton takes it from here
    done = 0
    for done in range(1, sweeps + 1):
        nx, _ = _line_max(lambda t: psi(rf, beta, t, y), x, width, lo, hi)
        ny, _ = _line_max(lambda t: psi(rf, beta, nx, t), y, width, lo, hi)
        moved = max(abs(nx - x), abs(ny - y))
        x, y = nx, ny
        if moved < tol:
            break
        width = max(min(width, 4.0 * moved), 1e-6)
    return x, y, done


def _newton_polish(rf, beta, x, y, lo, hi, max_iter=50):
    val = psi(rf, beta, x, y)
    for _ in range(max_iter):
        g = psi_gradient(rf, beta, x, y)
        if np.max(np.abs(g)) < 1e-13:
            break
        hess = psi_hessian(rf, beta, x, y)
        if not np.all(np.isfinite(hess)) or np.linalg.eigvalsh(hess)[-1] >= 0:
            break
        step = -np.linalg.solve(hess, g)
        for _ in range(30):
            nx, ny = x + step[0], y + step[1]
            if lo < nx < hi and lo < ny < hi:
                nval = psi(rf, beta, nx, ny)
                if nval >= val - 1e-15 * max(1.0, abs(val)):
                    break
            step *= 0.5
        else:
            break
        if nx == x and ny == y:
            break
        x, y, val = nx, ny, nval
    return x, y


def maximize_psi(rf: RateFunction, beta, grid=64):
    """Global maximum of ``psi`` over the open support square.

    Starts from the local maxima of a ``grid x grid`` table of cell centres
    (one of each mirror pair), climbs by coordinate-wise golden section and
    finishes with Newton steps on the analytic gradient and Hessian. Ties are
    broken by the lexicographically smaller ``(x, y)``.
    """
    p = rf.profile
    beta = float(beta)
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    lo, hi = p.lambda_min, p.lambda_max
    if beta == 0.0:
        return _solution(rf, 0.0, p.mean_m, p.mean_m, 0, True)
    h = (hi - lo) / grid
    nodes = lo + h * (np.arange(grid) + 0.5)
    t_nodes = np.array([rf(v) for v in nodes])
    xs, ys = np.meshgrid(nodes, nodes, indexing="ij")
    dx = beta * (xs - ys)
    table = (beta * (xs + ys) + np.logaddexp(dx, -dx) - math.log(2.0)
             - t_nodes[:, None] - t_nodes[None, :])
    padded = np.pad(table, 1, constant_values=-np.inf)
    neighbours = np.stack([padded[1 + a:1 + a + grid, 1 + b:1 + b + grid]
                           for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)])
    peaks = np.argwhere((table >= neighbours.max(axis=0)) & np.isfinite(table))
    starts = sorted({(max(i, j), min(i, j)) for i, j in peaks})

    found = []
    total = 0
    for i, j in starts:
        # a short climb, then Newton; resume climbing only if Newton stalls
        x, y, sweeps = _coordinate_ascent(rf, beta, nodes[i], nodes[j], h, lo, hi, sweeps=30)
        x, y = _newton_polish(rf, beta, x, y, lo, hi)
        if not np.max(np.abs(psi_gradient(rf, beta, x, y))) < 1e-8:
            x, y, more = _coordinate_ascent(rf, beta, x, y, h, lo, hi)
            x, y = _newton_polish(rf, beta, x, y, lo, hi)
            sweeps += more
        total += sweeps
        found.append((psi(rf, beta, x, y), x, y))
    # include mirror images so the tie-break sees both orderings
    found += [(v, y, x) for v, x, y in found]
    best_val = max(v for v, _, _ in found)
    tied = [(x, y) for v, x, y in found if v >= best_val - 1e-13 * max(1.0, abs(best_val))]
    x, y = min(tied)
    if abs(x - y) < 1e-9:
        x = y = 0.5 * (x + y)
    grad = psi_gradient(rf, beta, x, y)
    converged = bool(np.all(np.isfinite(grad)) and np.max(np.abs(grad)) < 1e-8)
    candidates = tuple(sorted({(round(float(cx), 10), round(float(cy), 10), float(cv)) for cv, cx, cy in found
                               if cx >= cy}, key=lambda c: -c[2]))
    return _solution(rf, beta, x, y, total, converged, candidates=candidates)


# -- replica-symmetry threshold ---------------------------------------------------

def replica_symmetric(rf: RateFunction, beta, criterion="unique", tol=1e-8):
    """Whether the two-replica problem at ``beta`` is replica symmetric.

    ``criterion="global"``: the global maximizer is diagonal, ``a = R(2 beta)``
    exists and the maximum equals ``2 (beta a - T(a))``.
    ``criterion="unique"``: additionally no off-diagonal stationary point exists.
    """
    if criterion not in ("unique", "global"):
        raise ValueError(f"unknown criterion {criterion!r}")
    try:
        a = symmetric_point(rf, beta)
    except DomainError:
        return False
    sol = maximize_psi(rf, beta)
    if not sol.symmetric:
        return False
    if abs(sol.psi_value - 2.0 * (beta * a - rf(a))) > tol:
        return False
    if criterion == "unique":
        return not asymmetric_stationary_points(rf, beta)
    return True


def beta_zero(rf: RateFunction, search_interval=(0.5, 4.0), criterion="unique", tol=1e-3):
    """Largest ``beta`` in the interval up to which the problem stays replica symmetric.

    Bisection on :func:`replica_symmetric`; the predicate must hold at the
    left end and fail at the right end.
    """
    lo, hi = (float(b) for b in search_interval)
    if not 0 <= lo < hi:
        raise ValueError(f"bad search interval {search_interval!r}")
    left = replica_symmetric(rf, lo, criterion)
    right = replica_symmetric(rf, hi, criterion)
    if left == right:
        raise NoTransitionError(
            f"replica symmetry is {'kept' if left else 'broken'} at both ends of [{lo}, {hi}]")
    if not left:
        raise NoTransitionError(f"replica symmetry is broken at the left end {lo} but holds at {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if replica_symmetric(rf, mid, criterion):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def identity_gap(rf: RateFunction, beta):
    """``beta a - T(a) - I(beta)`` at ``a = R(2 beta)``; zero up to quadrature error."""
    a = symmetric_point(rf, beta)
    return beta * a - rf(a) - rf.profile.free_energy(beta)
