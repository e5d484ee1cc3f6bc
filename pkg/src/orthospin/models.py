"""Model ensembles: SK, random orthogonal model, Gaussian Hopfield, custom.

Each :class:`ModelSpec` knows its limiting spectral measure, its closed-form
high-temperature limit when one exists, how to draw a finite-N coupling
spectrum ``d`` together with the deterministic target spectrum ``E(d)``,
and how to report the rigidity diagnostics (sup norm and W2 distance).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DimensionError, DomainError
from .spectral import SpectralMeasure, TransformProfile, beta_window, window_bounds

MAX_DENSE_N = 4096


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    p: float | None = None
    lam: float | None = None
    measure: SpectralMeasure | None = None
    beta_validity_hint: float | None = None

    def __post_init__(self):
        if self.kind == "rom" and not (self.p is not None and 0.0 < self.p < 1.0):
            raise ValueError("rom needs p in (0, 1)")
        if self.kind == "hopfield" and not (self.lam is not None and self.lam > 1.0):
            raise ValueError("hopfield needs lambda > 1")
        if self.kind == "custom" and self.measure is None:
            raise ValueError("custom model needs a measure")
        if self.kind not in ("sk", "rom", "hopfield", "custom"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def sk(cls):
        return cls("sk", beta_validity_hint=0.5)

    @classmethod
    def rom(cls, p=0.5):
        return cls("rom", p=float(p))

    @classmethod
    def hopfield(cls, lam):
        return cls("hopfield", lam=float(lam))

    @classmethod
    def custom(cls, measure):
        return cls("custom", measure=measure)

    @property
    def name(self):
        if self.kind == "rom":
            return f"rom(p={self.p:g})"
        if self.kind == "hopfield":
            return f"hopfield(lambda={self.lam:g})"
        return self.kind

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "rom":
            out["p"] = self.p
        elif self.kind == "hopfield":
            out["lambda"] = self.lam
        elif self.kind == "custom":
            out["measure"] = self.measure.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind")
        if kind == "sk":
            return cls.sk()
        if kind == "rom":
            return cls.rom(data.get("p", 0.5))
        if kind == "hopfield":
            return cls.hopfield(data["lambda"])
        if kind == "custom":
            return cls.custom(SpectralMeasure.from_dict(data["measure"]))
        raise ValueError(f"unknown model kind {kind!r}")

    def digest(self):
        """Short stable hash of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CouplingSample:
    n: int
    d_values: np.ndarray = field(repr=False)
    expected_d: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        if len(self.d_values) != self.n or len(self.expected_d) != self.n:
            raise DimensionError("d_values and expected_d must both have length n")


@dataclass(frozen=True)
class RigidityReport:
    sup_norm: float
    w2_to_target: float
    w2_scaled: float
    passes_hint: bool


def limiting_measure(spec: ModelSpec) -> SpectralMeasure:
    if spec.kind == "sk":
        return SpectralMeasure.semicircle()
    if spec.kind == "rom":
        return SpectralMeasure.two_point(spec.p)
    if spec.kind == "hopfield":
        return SpectralMeasure.marchenko_pastur(spec.lam)
    return spec.measure


def closed_form_limit(spec: ModelSpec, beta):
    """Closed-form high-temperature limit, or ``None`` for custom models.

    The formulas are evaluated wherever they are defined (Hopfield needs
    ``beta < 1/2``); whether ``2 beta`` lies inside the R-transform domain is
    the job of :func:`orthospin.spectral.free_energy_limit`.
    """
    beta = float(beta)
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if spec.kind == "custom":
        return None
    if spec.kind == "hopfield" and 2.0 * beta >= 1.0:
        raise DomainError(f"Hopfield limit needs beta < 1/2, got {beta!r}")
    if beta == 0.0:
        return 0.0
    return limiting_measure(spec)._family.free_energy_closed(beta)


def rom_pattern(n, p):
    """``floor(p n)`` entries +1 followed by -1."""
    k = math.floor(p * n)
    return np.concatenate([np.ones(k), -np.ones(n - k)])


def sample_coupling(spec: ModelSpec, n: int, seed: int) -> CouplingSample:
    """Draw the diagonal ``D`` of ``J = O D O^T`` and its deterministic target."""
    n = int(n)
    if n < 2:
        raise DimensionError("n must be at least 2")
    if n > MAX_DENSE_N:
        raise DimensionError(f"n={n} exceeds the dense-solver cap {MAX_DENSE_N}")
    gen = rng.generator(seed, "coupling", spec.kind)
    if spec.kind == "sk":
        a = gen.standard_normal((n, n))
        # off-diagonal variance 1/N, diagonal 2/N
        w = (a + a.T) / math.sqrt(2.0 * n)
        d = np.linalg.eigvalsh(w)
        expected = SpectralMeasure.semicircle().quantiles(n)
    elif spec.kind == "rom":
        d = rom_pattern(n, spec.p)
        expected = d.copy()
    elif spec.kind == "hopfield":
        p = int(round(spec.lam * n))
        if p < n + 1:
            raise DimensionError(f"Hopfield needs round(lambda n) > n, got p={p}")
        x = gen.standard_normal((n, p))
        d = np.linalg.eigvalsh(x @ x.T / n)
        expected = SpectralMeasure.marchenko_pastur(spec.lam).quantiles(n)
    else:
        expected = spec.measure.quantiles(n)
        d = expected.copy()
    return CouplingSample(n, np.asarray(d, dtype=float), np.asarray(expected, dtype=float),
                          int(seed))


def w2_sorted(a, b):
    """W2 distance between two equal-size empirical measures (sorted matching)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise DimensionError("empirical measures must have the same number of atoms")
    return math.sqrt(float(np.mean((a - b) ** 2)))


def rigidity_report(sample: CouplingSample, threshold=1.0) -> RigidityReport:
    w2 = w2_sorted(sample.d_values, sample.expected_d)
    scaled = math.sqrt(sample.n) * w2
    return RigidityReport(
        sup_norm=float(np.max(np.abs(sample.d_values))),
        w2_to_target=w2,
        w2_scaled=scaled,
        passes_hint=scaled <= threshold,
    )


def condition_c_margin(spec: ModelSpec, beta):
    """``1/4 - zeta(beta)``; positive when the small-beta contraction condition holds.

    A window reaching past the R-transform domain gives ``-inf``.
    """
    profile = TransformProfile(limiting_measure(spec))
    u_left, u_right = window_bounds(profile, beta)
    if not (profile.h_min < u_left and u_right < profile.h_max):
        return -math.inf
    return 0.25 - beta_window(profile, beta).zeta
