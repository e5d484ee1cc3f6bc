"""Finite-N ground truth.

* Haar orthogonal matrices by sign-corrected QR.
* Exact ``Phi_N = (1/N) log 2^{-N} sum_sigma exp(beta sigma^T O D O^T sigma)``
  by Gray-code enumeration of the hypercube (numba kernel, fixed blocks).
* Quenched statistics of ``Phi_N`` over Haar draws.
* Annealed first and second moments through the Gaussian-ratio
  representation ``V1 = X^T L X / X^T X``.

Plain Monte Carlo of ``E exp(N beta V1)`` is hopeless at ``N`` in the
thousands: the mean is carried by directions of probability ``e^{-O(N)}``.
The annealed estimators therefore draw ``X_i ~ N(0, 1/(kappa - l_i))``,
whose direction is angular-central-Gaussian with a closed-form density
relative to the uniform one, and reweight exactly. ``kappa`` solves
``(1/N) sum 1/(kappa - l_i) = 2 beta``, the saddle point of the integral,
which makes the weights nearly constant.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import optimize, special

from . import rng
from .errors import CapExceededError, DimensionError, DomainError
from .models import ModelSpec, CouplingSample, sample_coupling
from .quadrature import LogSumExp
from .spectral import SpectralMeasure

ENUMERATION_CAP = 24
_BLOCKS = 64


def default_workers():
    return os.cpu_count() or 1


# -- Haar sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class HaarSample:
    n: int
    matrix: np.ndarray = field(repr=False)
    seed: int


def haar_matrix(gen, n):
    """One Haar-distributed ``n x n`` orthogonal matrix from generator ``gen``."""
    while True:
        a = gen.standard_normal((n, n))
        q, r = np.linalg.qr(a)
        diag = np.diag(r)
        if np.all(diag != 0):
            return q * np.sign(diag)


def sample_haar(n, seed) -> HaarSample:
    n = int(n)
    if n < 1:
        raise DimensionError("n must be positive")
    return HaarSample(n, haar_matrix(rng.generator(seed, "haar", n), n), int(seed))


# -- exact enumeration ----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _block_lse(o, d, beta, start, stop):
    """Log-sum-exp of ``beta * H(sigma)`` over Gray-code indices ``[start, stop)``.

    Spin ``k`` is ``-1`` when bit ``k`` of the Gray code is set. ``v = O^T sigma``
    is rebuilt at the block start and then updated one flip at a time.
    """
    n = o.shape[0]
    g = start ^ (start >> 1)
    sigma = np.empty(n)
    for k in range(n):
        sigma[k] = -1.0 if (g >> k) & 1 else 1.0
    v = np.zeros(n)
    for k in range(n):
        for j in range(n):
            v[j] += sigma[k] * o[k, j]
    energy = 0.0
    for j in range(n):
        energy += d[j] * v[j] * v[j]
    top = beta * energy
    acc = 1.0
    for i in range(start + 1, stop):
        k = 0
        while not (i >> k) & 1:
            k += 1
        sigma[k] = -sigma[k]
        s2 = 2.0 * sigma[k]
        energy = 0.0
        for j in range(n):
            v[j] += s2 * o[k, j]
            energy += d[j] * v[j] * v[j]
        e = beta * energy
        if e > top:
            acc = acc * math.exp(top - e) + 1.0
            top = e
        else:
            acc += math.exp(e - top)
    return top, acc


def _as_matrix(o):
    return o.matrix if isinstance(o, HaarSample) else np.asarray(o, dtype=float)


def _check_inputs(d_values, o):
    d = np.ascontiguousarray(d_values, dtype=float)
    o = np.ascontiguousarray(_as_matrix(o), dtype=float)
    n = d.size
    if o.shape != (n, n):
        raise DimensionError(f"O has shape {o.shape}, expected ({n}, {n})")
    if n > ENUMERATION_CAP:
        raise CapExceededError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
    if n < 1:
        raise DimensionError("need at least one spin")
    return d, o


def exact_log_partition(d_values, o, beta, workers=1):
    """``Phi_N`` by full enumeration. The result does not depend on ``workers``."""
    d, o = _check_inputs(d_values, o)
    beta = float(beta)
    n = d.size
    if beta == 0.0:
        return 0.0
    total = 1 << n
    blocks = min(_BLOCKS, total)
    edges = [total * b // blocks for b in range(blocks + 1)]
    jobs = list(zip(edges[:-1], edges[1:]))
    workers = max(1, int(workers or 1))
    if workers == 1:
        parts = [_block_lse(o, d, beta, a, b) for a, b in jobs]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: _block_lse(o, d, beta, *ab), jobs))
    top = max(t for t, _ in parts)
    s = math.fsum(acc * math.exp(t - top) for t, acc in parts)
    return (top + math.log(s) - n * math.log(2.0)) / n


def naive_log_partition(d_values, o, beta):
    """Reference implementation: every configuration, dense quadratic form."""
    d = np.asarray(d_values, dtype=float)
    o = _as_matrix(o)
    n = d.size
    j = o @ np.diag(d) @ o.T
    sig = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    energies = np.einsum("si,ij,sj->s", sig, j, sig)
    return float((special.logsumexp(beta * energies) - n * math.log(2.0)) / n)


def mean_energy(d_values, o):
    """Uniform average of ``H(sigma) / N`` over the hypercube (equals ``tr J / N``)."""
    d = np.asarray(d_values, dtype=float)
    return float(d.sum() / d.size)


# -- quenched statistics -----------------------------------------------------------

@dataclass(frozen=True)
class QuenchedEstimate:
    n: int
    beta: float
    phi_values: tuple
    mean: float
    std_err: float
    seeds: tuple
    expected_phi_values: tuple = ()
    expected_mean: float = math.nan
    expected_std_err: float = math.nan

    @property
    def std(self):
        return float(np.std(self.phi_values, ddof=1)) if len(self.phi_values) > 1 else 0.0


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), math.inf
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def quenched_free_energy(spec: ModelSpec, n, beta, num_samples, seed, workers=1,
                         with_expected=True) -> QuenchedEstimate:
    """``Phi_N`` over independent (coupling, Haar) draws, plus the same draws with ``E(D)``."""
    n, num_samples = int(n), int(num_samples)
    if n > ENUMERATION_CAP:
        raise CapExceededError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    phis, expected, seeds = [], [], []
    for s in range(num_samples):
        sample_seed = rng.derive_seed(seed, "quenched", s)
        coupling = sample_coupling(spec, n, sample_seed)
        o = sample_haar(n, sample_seed)
        phis.append(exact_log_partition(coupling.d_values, o, beta, workers))
        if with_expected:
            expected.append(exact_log_partition(coupling.expected_d, o, beta, workers))
        seeds.append(sample_seed)
    mean, se = _mean_se(phis)
    emean, ese = _mean_se(expected) if expected else (math.nan, math.nan)
    return QuenchedEstimate(n, float(beta), tuple(phis), mean, se, tuple(seeds),
                            tuple(expected), emean, ese)


def concentration_scan(spec: ModelSpec, beta, n_list, samples_per_n, seed, workers=1):
    """Spread of ``Phi_N`` across Haar draws at the fixed target spectrum ``E(D)``.

    Each row carries the sample standard deviation and its delta-method
    standard error ``se(s^2) / (2 s)`` with the fourth-moment correction.
    """
    rows = []
    for n in n_list:
        n = int(n)
        if n > ENUMERATION_CAP:
            raise CapExceededError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
        spectrum = sample_coupling(spec, n, rng.derive_seed(seed, "scan-spectrum", n)).expected_d
        phis = np.array([
            exact_log_partition(spectrum, sample_haar(n, rng.derive_seed(seed, "scan", n, k)),
                                beta, workers)
            for k in range(int(samples_per_n))
        ])
        k = phis.size
        std = float(phis.std(ddof=1)) if k > 1 else 0.0
        if std > 0:
            mu4 = float(np.mean((phis - phis.mean()) ** 4))
            var_s2 = max(mu4 - (k - 3) / (k - 1) * std ** 4, 0.0) / k
            std_se = math.sqrt(var_s2) / (2.0 * std)
        else:
            std_se = 0.0
        rows.append({"n": n, "beta": float(beta), "mean": float(phis.mean()), "std": std,
                     "std_se": std_se, "num_samples": k})
    return rows


# -- annealed moments -------------------------------------------------------------------

@dataclass(frozen=True)
class AnnealedEstimate:
    n: int
    beta: float
    log_first_moment_rate: float
    log_second_moment_rate: float
    num_samples: int
    std_errs: tuple
    kappa: float | None = None
    gap_std_err: float = 0.0

    @property
    def gap(self):
        return self.log_second_moment_rate - self.log_first_moment_rate


def _spectrum(source, n):
    if isinstance(source, SpectralMeasure):
        return source.quantiles(int(n))
    if isinstance(source, CouplingSample):
        lam = source.d_values
    else:
        lam = np.asarray(source, dtype=float)
    if n is not None and lam.size != int(n):
        raise DimensionError(f"spectrum has {lam.size} entries, expected {n}")
    return lam


def saddle_kappa(lam, beta):
    """``kappa > max(lam)`` with ``mean(1 / (kappa - lam)) = 2 beta``."""
    lam = np.asarray(lam, dtype=float)
    if beta <= 0:
        raise DomainError("the saddle point needs beta > 0")
    top = float(lam.max())
    target = 2.0 * beta

    def f(k):
        return float(np.mean(1.0 / (k - lam))) - target

    lo = math.nextafter(top, math.inf)
    hi = top + 1.0 / target
    # mean(1/(k - lam)) >= (1/N) / (k - top) blows up at the edge; hi is a valid upper bracket
    return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _log_cosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _control_moments(lam, var, center):
    """Exact means of the quadratic control terms under independent ``N(0, var_i)`` coordinates."""
    n = lam.size
    v2 = var * var
    return {
        "LL": 2.0 * float(np.sum(center * center * v2)) / n,
        "BB": 2.0 * float(np.sum(v2)) / n,
        "LB": 2.0 * float(np.sum(center * v2)) / n,
    }


def _moment_chunk(lam, beta, kappa, gen, size):
    """Log weights of both moments from shared draws, plus mean-zero control variates.

    The controls are centred linear and quadratic forms of the Gaussian draws,
    whose means are known exactly; they capture most of the weight
    fluctuation, which is a smooth function of ``V1`` and ``V2``.
    """
    n = lam.size
    var = np.ones(n) if kappa is None else 1.0 / (kappa - lam)
    center = lam - (float(np.mean(lam)) if kappa is None else kappa - 0.5 / beta)
    x = gen.standard_normal((size, n)) * np.sqrt(var)
    y = gen.standard_normal((size, n)) * np.sqrt(var)
    u1 = x / np.linalg.norm(x, axis=1, keepdims=True)
    z = y - np.sum(y * u1, axis=1, keepdims=True) * u1
    u2 = z / np.linalg.norm(z, axis=1, keepdims=True)
    v1 = (u1 * u1) @ lam
    v2 = (u2 * u2) @ lam
    log1 = n * beta * v1
    log2 = n * (beta * (v1 + v2) + _log_cosh(beta * (v1 - v2)))
    if kappa is not None:
        half_logdet = 0.5 * float(np.sum(np.log(kappa - lam)))
        # density of u1 relative to uniform on the sphere
        log_p1 = half_logdet - 0.5 * n * np.log(kappa - v1)
        # density of u2 given u1, relative to uniform on the orthogonal great sphere
        cross = (u1 * u2) @ lam
        log_p2 = (half_logdet - 0.5 * np.log(kappa - v1)
                  - 0.5 * (n - 1) * np.log(kappa - v2 - cross * cross / (kappa - v1)))
        log1 = log1 - log_p1
        log2 = log2 - log_p1 - log_p2
    root = math.sqrt(n)
    mu_l, mu_b = float(np.sum(center * var)), float(np.sum(var))
    lx = ((x * x) @ center - mu_l) / root
    ly = ((y * y) @ center - mu_l) / root
    bx = ((x * x).sum(axis=1) - mu_b) / root
    by = ((y * y).sum(axis=1) - mu_b) / root
    m = _control_moments(lam, var, center)
    controls = np.column_stack([
        lx, bx, lx * lx - m["LL"], bx * bx - m["BB"], lx * bx - m["LB"],
        ly, by, ly * ly - m["LL"], by * by - m["BB"], ly * by - m["LB"],
        lx * ly, lx * by, bx * ly, bx * by,
    ])
    return log1, log2, controls


FIRST_MOMENT_CONTROLS = 5  # the leading columns that involve only the first replica


def _draw_weights(lam, beta, kappa, num_samples, seed, chunk, workers):
    sizes = [chunk] * (num_samples // chunk)
    if num_samples % chunk:
        sizes.append(num_samples % chunk)

    def job(item):
        index, size = item
        return _moment_chunk(lam, beta, kappa, rng.generator(seed, "annealed", index), size)

    items = list(enumerate(sizes))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, items))
    else:
        parts = [job(item) for item in items]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def _log_mean(logw, controls=None):
    """``log mean exp(logw)`` and per-draw influence on it.

    With controls, the mean is the intercept of a least-squares fit of the
    weights on the mean-zero controls (a regression control-variate estimate).
    """
    top = float(np.max(logw))
    w = np.exp(logw - top)
    if controls is not None and controls.shape[0] > 4 * (controls.shape[1] + 1):
        design = np.column_stack([np.ones(w.size), controls])
        coef, *_ = np.linalg.lstsq(design, w, rcond=None)
        if coef[0] > 0:
            resid = w - design @ coef
            return top + math.log(coef[0]), resid / coef[0]
    mean = float(w.mean())
    return top + math.log(mean), w / mean - 1.0


def annealed_moments(source, n, beta, num_samples, seed, tilt="saddle", controls=True,
                     chunk=None, workers=1) -> AnnealedEstimate:
    """First and second annealed moment rates of the partition function.

    ``source`` is a :class:`SpectralMeasure` (its ``n`` quantiles are used),
    a :class:`CouplingSample` or an explicit spectrum. ``tilt="saddle"``
    importance-samples around the saddle point; ``tilt=None`` is plain
    Monte Carlo with standard Gaussian vectors. ``controls`` switches the
    regression control variates on or off.
    """
    lam = _spectrum(source, n)
    n = lam.size
    beta = float(beta)
    num_samples = int(num_samples)
    if n < 2:
        raise DimensionError("n must be at least 2")
    if num_samples < 2:
        raise ValueError("need at least two samples")
    if beta == 0.0:
        return AnnealedEstimate(n, 0.0, 0.0, 0.0, num_samples, (0.0, 0.0), None, 0.0)
    if tilt not in ("saddle", None):
        raise ValueError(f"unknown tilt {tilt!r}")
    kappa = saddle_kappa(lam, beta) if tilt == "saddle" else None
    if chunk is None:
        chunk = max(1, min(num_samples, 2_000_000 // n))
    workers = max(1, int(workers or 1))
    log1, log2, ctrl = _draw_weights(lam, beta, kappa, num_samples, seed, chunk, workers)
    first, inf1 = _log_mean(log1, ctrl[:, :FIRST_MOMENT_CONTROLS] if controls else None)
    second, inf2 = _log_mean(log2, ctrl if controls else None)
    # delta method on the rate scale; the shared draws make the difference sharper
    inf1 = inf1 / n
    inf2 = inf2 / (2 * n)
    root = math.sqrt(num_samples)
    std_errs = (float(inf1.std(ddof=1)) / root, float(inf2.std(ddof=1)) / root)
    gap_se = float((inf2 - inf1).std(ddof=1)) / root
    return AnnealedEstimate(n, beta, first / n, second / (2 * n), num_samples, std_errs,
                            kappa, gap_se)


def haar_first_moment(lam, beta, num_samples, seed):
    """Oracle for the first moment: average ``exp(N beta (O L O^T)_{11})`` over Haar ``O``.

    Returns ``(rate, std_err)`` on the ``(1/N) log`` scale.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    gen = rng.generator(seed, "haar-oracle", n)
    logw = np.empty(int(num_samples))
    for k in range(logw.size):
        o = haar_matrix(gen, n)
        logw[k] = n * beta * float(np.dot(o[0] * o[0], lam))
    acc = LogSumExp()
    acc.add(logw)
    return acc.log_mean() / n, acc.log_mean_se() / n
