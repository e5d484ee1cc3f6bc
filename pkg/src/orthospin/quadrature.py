"""Numerical kernels: adaptive Simpson quadrature, golden-section search,
and streaming log-sum-exp helpers."""

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def adaptive_simpson(f, a, b, tol=1e-11, max_depth=40, min_depth=4):
    """Integrate ``f`` over ``[a, b]`` with Richardson-corrected adaptive Simpson.

    ``tol`` is an absolute tolerance for the whole interval; it is halved at
    each subdivision. ``min_depth`` forces a few levels of refinement so that
    accidental agreement of the coarse estimates cannot stop the recursion.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, min_depth)


def _simpson_step(f, a, b, fa, fm, fb, whole, tol, depth, min_depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or (min_depth <= 0 and abs(delta) <= 15.0 * tol):
        return left + right + delta / 15.0
    return (_simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, min_depth - 1)
            + _simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, min_depth - 1))


def golden_max(f, a, b, tol=1e-12, max_iter=200):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def log_mean_exp(logw):
    """Return ``log(mean(exp(logw)))`` and the delta-method standard error of it."""
    logw = np.asarray(logw, dtype=float)
    n = logw.size
    top = np.max(logw)
    w = np.exp(logw - top)
    mean = w.mean()
    se = w.std(ddof=1) / (mean * math.sqrt(n)) if n > 1 else math.inf
    return top + math.log(mean), se


class LogSumExp:
    """Streaming log-sum-exp accumulator; combine chunks in a fixed order."""

    __slots__ = ("top", "scaled", "count", "scaled_sq")

    def __init__(self):
        self.top = -math.inf
        self.scaled = 0.0
        self.scaled_sq = 0.0
        self.count = 0

    def add(self, logw):
        logw = np.asarray(logw, dtype=float).ravel()
        if logw.size == 0:
            return
        new_top = max(self.top, float(np.max(logw)))
        if new_top == -math.inf:
            self.count += logw.size
            return
        if self.top != -math.inf:
            r = math.exp(self.top - new_top)
            self.scaled *= r
            self.scaled_sq *= r * r
        w = np.exp(logw - new_top)
        self.scaled += float(w.sum())
        self.scaled_sq += float((w * w).sum())
        self.top = new_top
        self.count += logw.size

    def log_sum(self):
        return self.top + math.log(self.scaled)

    def log_mean(self):
        return self.log_sum() - math.log(self.count)

    def log_mean_se(self):
        """Delta-method standard error of :meth:`log_mean`."""
        n = self.count
        mean = self.scaled / n
        var = max(self.scaled_sq / n - mean * mean, 0.0) * n / (n - 1)
        return math.sqrt(var) / (mean * math.sqrt(n))
