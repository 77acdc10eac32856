"""Storm profiles ``X``: bounded, compactly supported radial shapes.

Random shapes are finite mixtures of deterministic components, so that every
expectation over ``X`` is an exact weighted average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

DEFAULT_EPSILON = 1e-4


class TruncationError(ParameterError):
    """The truncation level is not below the shape's supremum."""


@dataclass(frozen=True)
class GaussianStorm:
    """Bivariate normal density with standard deviation ``spread``, cut at radius ``R``.

    ``spread = 1`` is the Smith-model profile ``phi``.
    """

    R: float
    spread: float = 1.0

    def __post_init__(self):
        if not (self.R > 0 and self.spread > 0):
            raise ParameterError("GaussianStorm needs R > 0 and spread > 0")

    @classmethod
    def from_epsilon(cls, epsilon: float = DEFAULT_EPSILON, spread: float = 1.0) -> "GaussianStorm":
        R, _ = truncation_constants("gaussian", epsilon, spread=spread)
        return cls(R, spread)

    @property
    def C(self) -> float:
        return 1.0 / (2.0 * math.pi * self.spread**2)

    @property
    def integral(self) -> float:
        return -math.expm1(-0.5 * (self.R / self.spread) ** 2)

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.R, self.C * np.exp(-0.5 * (r / self.spread) ** 2), 0.0)


@dataclass(frozen=True)
class DiskStorm:
    """Indicator of the disk of radius ``radius`` with height ``height``."""

    radius: float
    height: float = 1.0

    def __post_init__(self):
        if not (self.radius > 0 and self.height > 0):
            raise ParameterError("DiskStorm needs radius > 0 and height > 0")

    @property
    def R(self) -> float:
        return self.radius

    @property
    def C(self) -> float:
        return self.height

    @property
    def integral(self) -> float:
        return self.height * math.pi * self.radius**2

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.radius, self.height, 0.0)


@dataclass(frozen=True)
class StormMixture:
    """Random storm profile drawn from ``components`` with probabilities ``weights``."""

    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) == 0 or len(self.components) != len(self.weights):
            raise ParameterError("mixture needs matching, non-empty components and weights")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ParameterError("mixture weights must be non-negative and sum to one")

    @property
    def R(self) -> float:
        return max(c.R for c in self.components)

    @property
    def C(self) -> float:
        return max(c.C for c in self.components)

    @property
    def integral(self) -> float:
        return float(sum(w * c.integral for c, w in zip(self.components, self.weights)))


def components(shape) -> list[tuple[object, float]]:
    """``(deterministic shape, weight)`` pairs of any storm profile."""
    if isinstance(shape, StormMixture):
        return list(zip(shape.components, shape.weights))
    return [(shape, 1.0)]


def evaluate_shape(shape, t, component: int = 0) -> np.ndarray:
    """Value of the (component of the) storm profile at offsets ``t`` of shape ``(..., 2)``."""
    comp = components(shape)[component][0]
    t = np.asarray(t, dtype=float)
    out = comp.radial(np.hypot(t[..., 0], t[..., 1]))
    return float(out) if out.ndim == 0 else out


def truncation_constants(kind: str, epsilon: float, alpha_p: float = 0.0, *, spread: float = 1.0,
                         radius: float | None = None, height: float | None = None) -> tuple[float, float]:
    """Truncation radius ``R`` and bound ``C`` for a deterministic profile.

    For deterministic shapes ``alpha_p`` is zero and ``R`` is the smallest radius
    at which the profile falls to ``epsilon``.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if alpha_p != 0.0:
        raise ParameterError("only deterministic shapes are supported (alpha_p = 0)")
    if kind == "gaussian":
        C = 1.0 / (2.0 * math.pi * spread**2)
        if epsilon >= C:
            raise TruncationError(f"epsilon={epsilon} is not below sup X = {C}")
        return spread * math.sqrt(-2.0 * math.log(epsilon / C)), C
    if kind == "disk":
        if radius is None or height is None:
            raise ParameterError("disk truncation needs radius and height")
        if epsilon >= height:
            raise TruncationError(f"epsilon={epsilon} is not below the disk height {height}")
        return float(radius), float(height)
    raise ParameterError(f"unknown shape kind {kind!r}")


def shape_integral(shape) -> float:
    """``E_X int X(s) ds`` of the (truncated) profile."""
    return shape.integral


@dataclass(frozen=True)
class ScalingConstants:
    mu_Y: float
    mu_Z: float
    c_psi: float

    @classmethod
    def for_shape(cls, shape, c_psi: float = 1.0) -> "ScalingConstants":
        mu_y = c_psi * shape_integral(shape)
        return cls(mu_y, mu_y / c_psi, c_psi)


def shape_from_config(cfg) -> object:
    """Build a storm profile from flat config keys (``shape.*``)."""

    def one(prefix: str):
        kind = cfg.get(f"{prefix}kind", "gaussian")
        if kind == "gaussian":
            spread = float(cfg.get(f"{prefix}spread", 1.0))
            if f"{prefix}R" in cfg:
                return GaussianStorm(float(cfg[f"{prefix}R"]), spread)
            return GaussianStorm.from_epsilon(float(cfg.get(f"{prefix}epsilon", DEFAULT_EPSILON)), spread)
        if kind == "disk":
            return DiskStorm(float(cfg[f"{prefix}R"]), float(cfg.get(f"{prefix}C", 1.0)))
        raise ParameterError(f"unknown shape kind {kind!r}")

    if cfg.get("shape.kind") == "mixture":
        n = int(cfg["shape.components"])
        comps = tuple(one(f"shape.{i}.") for i in range(n))
        weights = tuple(float(cfg[f"shape.{i}.weight"]) for i in range(n))
        return StormMixture(comps, weights)
    return one("shape.")
