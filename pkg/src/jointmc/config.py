"""Experiment configuration: a line-oriented ``key = value`` text format.

Blank lines and ``#`` comments are ignored. Keys are case-sensitive and
match the :class:`ExperimentConfig` field names. List values are comma
separated; ``k1_values``/``k2_values`` also accept ``start:stop:count`` for
an evenly spaced integer grid (endpoints included).
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from jointmc.errors import ConfigError

ALGORITHMS = ("svt", "bsvt")
DEFAULT_GRID_POINTS = 21


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 50
    n: int = 100
    upsilon11: Optional[float] = None
    upsilon22: Optional[float] = None
    psi: Optional[float] = None
    cross_block: int = 1
    target_r1: Optional[int] = None
    target_r2: Optional[int] = None
    target_r: Optional[int] = None
    snr_db_1: float = 50.0
    snr_db_2: float = 50.0
    k1_values: Tuple[int, ...] = ()
    k2_values: Tuple[int, ...] = ()
    trials: int = 10
    algorithms: Tuple[str, ...] = ALGORITHMS
    epsilon: float = 1e-4
    kmax: int = 500
    svt_tau: Optional[float] = None
    svt_step: Optional[float] = None
    bsvt_step: float = 1.0
    master_seed: int = 0
    output_path: str = "sweep.csv"
    overlay_path: Optional[str] = None
    regenerate_truth_per_trial: bool = False

    def __post_init__(self):
        # default grid: 21 evenly spaced counts over [0, m n] per dataset
        top = self.m * self.n
        default = tuple(int(round(v)) for v in np.linspace(0, top, DEFAULT_GRID_POINTS))
        if not self.k1_values:
            object.__setattr__(self, "k1_values", default)
        if not self.k2_values:
            object.__setattr__(self, "k2_values", default)

    @property
    def uses_calibration(self):
        return self.target_r1 is not None

    def validate(self):
        """Raise :class:`ConfigError` on the first problem found."""
        if self.m < 2 or self.n < 1:
            raise ConfigError(f"need m >= 2 and n >= 1, got m={self.m}, n={self.n}")
        if 2 * self.m < self.n:
            raise ConfigError(f"stacked matrix must be tall: 2m={2 * self.m} < n={self.n}")
        targets = (self.target_r1, self.target_r2, self.target_r)
        params = (self.upsilon11, self.upsilon22, self.psi)
        if any(t is not None for t in targets):
            if any(t is None for t in targets):
                raise ConfigError("target_r1, target_r2 and target_r must be given together")
            if any(p is not None for p in params):
                raise ConfigError("give either target ranks or upsilon11/upsilon22/psi, not both")
        elif any(p is None for p in params):
            raise ConfigError("model needs upsilon11, upsilon22 and psi (or target ranks)")
        top = self.m * self.n
        for name in ("k1_values", "k2_values"):
            values = getattr(self, name)
            if any(not 0 <= k <= top for k in values):
                raise ConfigError(f"{name} must lie in [0, {top}]")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if self.epsilon <= 0 or self.kmax < 1:
            raise ConfigError("epsilon must be positive and kmax at least 1")
        if self.svt_step is not None and not 0 < self.svt_step < 2:
            raise ConfigError("svt_step must lie in (0, 2)")
        if self.svt_tau is not None and self.svt_tau <= 0:
            raise ConfigError("svt_tau must be positive")
        if self.bsvt_step <= 0:
            raise ConfigError("bsvt_step must be positive")
        if self.cross_block not in (1, 2):
            raise ConfigError("cross_block must be 1 or 2")
        return self


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text):
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN is not allowed")
    return value


def _parse_counts(text):
    text = text.strip()
    if ":" in text:
        start, stop, count = (int(p) for p in text.split(":"))
        return tuple(int(round(v)) for v in np.linspace(start, stop, count))
    return tuple(int(p) for p in text.split(",") if p.strip())


def _parse_names(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _optional(parse):
    def inner(text):
        if text.strip().lower() in ("", "none"):
            return None
        return parse(text)

    return inner


_PARSERS = {
    "m": int,
    "n": int,
    "upsilon11": _optional(_parse_float),
    "upsilon22": _optional(_parse_float),
    "psi": _optional(_parse_float),
    "cross_block": int,
    "target_r1": _optional(int),
    "target_r2": _optional(int),
    "target_r": _optional(int),
    "snr_db_1": _parse_float,
    "snr_db_2": _parse_float,
    "k1_values": _parse_counts,
    "k2_values": _parse_counts,
    "trials": int,
    "algorithms": _parse_names,
    "epsilon": _parse_float,
    "kmax": int,
    "svt_tau": _optional(_parse_float),
    "svt_step": _optional(_parse_float),
    "bsvt_step": _parse_float,
    "master_seed": int,
    "output_path": str.strip,
    "overlay_path": _optional(str.strip),
    "regenerate_truth_per_trial": _parse_bool,
}

assert set(_PARSERS) == {f.name for f in dataclasses.fields(ExperimentConfig)}


def parse_assignments(lines, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            values = parse_assignments(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    values.update(overrides or {})
    return ExperimentConfig(**values).validate()


def format_config(config):
    """Render a config back into the text format."""
    out = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


# the two model configurations studied at M=50, N=100, SNR 50 dB
STUDY_CONFIGS = {
    "r6-6-9": dict(target_r1=6, target_r2=6, target_r=9),
    "r6-9-10": dict(target_r1=6, target_r2=9, target_r=10),
}


def study_config(name="r6-6-9", **overrides):
    values = dict(m=50, n=100, snr_db_1=50.0, snr_db_2=50.0, trials=10)
    values.update(STUDY_CONFIGS[name])
    values.update(overrides)
    return ExperimentConfig(**values).validate()


__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "format_config",
    "load_config",
    "study_config",
    "parse_assignments",
]
