"""Simulation of stationary Gaussian fields ``W`` and intensities ``exp(W)``.

Two exact backends share one interface: a dense Cholesky factor for small
grids and block-circulant embedding with FFTs for large ones.  Both are
wrapped by :class:`GaussianFieldSampler`, which factorizes once and can then
draw many replicates cheaply.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceModel
from .errors import EmbeddingError, NumericalError, ParameterError
from .grid import GridField, GridSpec, integrate  # noqa: F401  (integrate re-exported)

log = logging.getLogger(__name__)

CHOLESKY_MAX_POINTS = 4096
MAX_PADDING = 8
NEGATIVE_EIGEN_TOL = 1e-9
JITTER = 1e-10


@dataclass(frozen=True)
class IntensityMeanPolicy:
    """How the mean of ``W`` is fixed.

    ``unit`` sets ``mean = -sigma^2/2`` so that ``c_psi = E exp(W(o)) = 1``;
    ``explicit`` uses the given ``mean``.
    """

    mode: str = "unit"
    mean: float = 0.0

    def __post_init__(self):
        if self.mode not in ("unit", "explicit"):
            raise ParameterError(f"unknown mean policy {self.mode!r}")

    @classmethod
    def unit(cls) -> "IntensityMeanPolicy":
        return cls("unit")

    @classmethod
    def explicit(cls, mean: float) -> "IntensityMeanPolicy":
        return cls("explicit", float(mean))

    def gaussian_mean(self, model: CovarianceModel) -> float:
        return -0.5 * model.variance if self.mode == "unit" else self.mean

    def c_psi(self, model: CovarianceModel) -> float:
        return math.exp(self.gaussian_mean(model) + 0.5 * model.variance)


class GaussianFieldSampler:
    """Zero-mean sampler for ``W`` on a fixed grid.

    ``method`` is ``"auto"`` (Cholesky up to 4096 nodes, circulant above),
    ``"cholesky"`` or ``"circulant"``.
    """

    def __init__(self, model: CovarianceModel, spec: GridSpec, method: str = "auto"):
        self.model = model
        self.spec = spec
        if method == "auto":
            method = "cholesky" if spec.size <= CHOLESKY_MAX_POINTS else "circulant"
        if method == "cholesky" and spec.size > CHOLESKY_MAX_POINTS:
            raise ParameterError(f"Cholesky backend limited to {CHOLESKY_MAX_POINTS} points, grid has {spec.size}")
        self.method = method
        self.clamped_eigenvalues = 0
        self.jittered = False
        if method == "cholesky":
            self._setup_cholesky()
        elif method == "circulant":
            self._setup_circulant()
        else:
            raise ParameterError(f"unknown method {method!r}")

    def _setup_cholesky(self):
        s = self.spec
        # covariance depends on the integer lag only; evaluate once per lag
        lag = self.model(np.hypot(*np.meshgrid(np.arange(s.nx) * s.dx, np.arange(s.ny) * s.dy)))
        j, i = np.divmod(np.arange(s.size), s.nx)
        cov = lag[np.abs(j[:, None] - j[None, :]), np.abs(i[:, None] - i[None, :])]
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            cov[np.diag_indices_from(cov)] += JITTER * self.model.variance
            self.jittered = True
            try:
                self._chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"covariance matrix of {self.model} not positive definite") from exc

    def _setup_circulant(self):
        s = self.spec
        base_x = max(2 * (s.nx - 1), 1)
        base_y = max(2 * (s.ny - 1), 1)
        factor = 1
        while factor <= MAX_PADDING:
            mx, my = base_x * factor, base_y * factor
            ix = np.minimum(np.arange(mx), mx - np.arange(mx)) * s.dx
            iy = np.minimum(np.arange(my), my - np.arange(my)) * s.dy
            dist = np.sqrt(iy[:, None] ** 2 + ix[None, :] ** 2)
            lam = np.fft.fft2(self.model(dist)).real
            top = lam.max()
            low = lam.min()
            if low >= -NEGATIVE_EIGEN_TOL * top:
                neg = lam < 0
                self.clamped_eigenvalues = int(neg.sum())
                if self.clamped_eigenvalues:
                    log.debug("clamped %d small negative eigenvalues", self.clamped_eigenvalues)
                lam[neg] = 0.0
                self._mshape = (my, mx)
                self._sqrt_lam = np.sqrt(lam / (mx * my))
                self.padding = factor
                return
            factor *= 2
        raise EmbeddingError(
            f"circulant embedding of {self.model} on a {s.nx}x{s.ny} grid is not "
            f"non-negative definite after {MAX_PADDING}x padding"
        )

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """One array of shape ``(ny, nx)``, or ``(size, ny, nx)`` if ``size`` is given."""
        k = 1 if size is None else int(size)
        ny, nx = self.spec.shape
        if self.method == "cholesky":
            z = rng.standard_normal((self.spec.size, k))
            out = (self._chol @ z).T.reshape(k, ny, nx)
        else:
            # real and imaginary parts are independent draws
            my, mx = self._mshape
            half = (k + 1) // 2
            out = np.empty((2 * half, ny, nx))
            # bound the working set to ~2**22 complex entries
            step = max(1, 2**22 // (my * mx))
            for lo in range(0, half, step):
                m = min(step, half - lo)
                eps = rng.standard_normal((m, 2, my, mx))
                w = np.fft.fft2(self._sqrt_lam * (eps[:, 0] + 1j * eps[:, 1]))[:, :ny, :nx]
                out[2 * lo:2 * (lo + m):2] = w.real
                out[2 * lo + 1:2 * (lo + m):2] = w.imag
            out = out[:k]
        return out[0] if size is None else out


def simulate_gaussian(model: CovarianceModel, spec: GridSpec, mean: float = 0.0, seed=None,
                      method: str = "auto") -> GridField:
    """One realization of a stationary Gaussian field with covariance ``model``."""
    rng = np.random.default_rng(seed)
    sampler = GaussianFieldSampler(model, spec, method)
    return GridField(spec, mean + sampler.sample(rng), meta={"mean": mean, "method": sampler.method})


def simulate_log_gaussian(model: CovarianceModel, spec: GridSpec, policy: IntensityMeanPolicy | None = None,
                          seed=None, method: str = "auto") -> GridField:
    """Intensity realization ``psi = exp(W)`` with the mean of ``W`` set by ``policy``."""
    policy = policy or IntensityMeanPolicy.unit()
    w = simulate_gaussian(model, spec, policy.gaussian_mean(model), seed, method)
    return GridField(spec, np.exp(w.values), meta={"c_psi": policy.c_psi(model), "mean": w.meta["mean"]})
