"""Flat ``key = value`` configuration files and typed builders on top of them."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .covariance import CovarianceModel
from .errors import ParameterError
from .gaussian_field import IntensityMeanPolicy
from .grid import GridSpec, Rect
from .storm import shape_from_config


class Config(dict):
    """String-valued mapping with typed accessors."""

    def float(self, key: str, default=None) -> float:
        return float(self._get(key, default))

    def int(self, key: str, default=None) -> int:
        return int(self._get(key, default))

    def str(self, key: str, default=None) -> str:
        return str(self._get(key, default))

    def bool(self, key: str, default=None) -> bool:
        v = str(self._get(key, default)).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ParameterError(f"{key}: expected a boolean, got {v!r}")

    def floats(self, key: str, default=None) -> list[float]:
        v = self._get(key, default)
        if isinstance(v, (list, tuple)):
            return [float(x) for x in v]
        return [float(x) for x in str(v).split(",") if x.strip()]

    def _get(self, key, default):
        if key in self:
            return self[key]
        if default is None:
            raise ParameterError(f"missing config key {key!r}")
        return default

    def section(self, prefix: str) -> "Config":
        """Keys under ``prefix.`` with the prefix stripped."""
        p = prefix + "."
        return Config({k[len(p):]: v for k, v in self.items() if k.startswith(p)})


def parse_config(text: str, source: str = "<config>") -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        cfg[key.strip()] = value.strip()
    return cfg


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def config_hash(cfg: dict) -> str:
    """Short sha256 of the canonical (sorted ``key=value``) form."""
    canon = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def covariance_from(cfg: Config) -> CovarianceModel:
    return CovarianceModel.from_config(cfg.section("covariance"))


def policy_from(cfg: Config) -> IntensityMeanPolicy:
    mode = cfg.str("intensity.mean_policy", "unit")
    if mode == "unit":
        return IntensityMeanPolicy.unit()
    if mode == "explicit":
        return IntensityMeanPolicy.explicit(cfg.float("intensity.mean"))
    raise ParameterError(f"unknown intensity.mean_policy {mode!r}")


def shape_from(cfg: Config):
    return shape_from_config(cfg)


def domain_from(cfg: Config) -> tuple[Rect, GridSpec]:
    """Observation rectangle ``D`` and its node grid (``grid.*`` keys)."""
    rect = Rect(cfg.float("grid.xmin", -5.0), cfg.float("grid.xmax", 5.0),
                cfg.float("grid.ymin", -5.0), cfg.float("grid.ymax", 5.0))
    nx = cfg.int("grid.nx", 51)
    ny = cfg.int("grid.ny", nx)
    return rect, GridSpec.over(rect, nx, ny)
