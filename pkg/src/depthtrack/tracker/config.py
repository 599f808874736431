from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from ..errors import InvalidConfigError


@dataclass(frozen=True)
class TrackerConfig:
    threshold_lo: int = 150  # mm, kept
    threshold_hi: int = 1000  # mm, kept
    min_region_px: int = 3500
    simplify_epsilon: float = 3.0  # px
    angle_lo: float = 30.0  # degrees
    angle_hi: float = 150.0
    height_fraction: float = 0.2
    bottom_proximity_px: int = 10
    patch_size: int = 5
    refine_window: int = 7
    refine_max_iters: int = 5
    refine_shift_tol: float = 0.05  # px

    def __post_init__(self):
        if not self.threshold_lo < self.threshold_hi:
            raise InvalidConfigError("threshold_lo must be below threshold_hi")
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise InvalidConfigError(f"patch_size must be odd and >= 1, got {self.patch_size}")
        if not 0 < self.angle_lo < self.angle_hi < 180:
            raise InvalidConfigError("need 0 < angle_lo < angle_hi < 180")
        if not 0 <= self.height_fraction < 1:
            raise InvalidConfigError("height_fraction must be in [0, 1)")
        if self.simplify_epsilon < 0:
            raise InvalidConfigError("simplify_epsilon must be >= 0")
        if self.min_region_px < 0 or self.bottom_proximity_px < 0:
            raise InvalidConfigError("pixel counts must be >= 0")
        if self.refine_window < 3 or self.refine_window % 2 == 0:
            raise InvalidConfigError("refine_window must be odd and >= 3")
        if self.refine_max_iters < 0 or self.refine_shift_tol <= 0:
            raise InvalidConfigError("refine_max_iters >= 0 and refine_shift_tol > 0 required")

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, **overrides) -> "TrackerConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    @classmethod
    def from_dict(cls, data: dict) -> "TrackerConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidConfigError(f"unknown tracker config key(s): {', '.join(sorted(unknown))}")
        defaults = cls()
        kwargs = {}
        for name, value in data.items():
            kind = type(getattr(defaults, name))
            try:
                kwargs[name] = kind(value)
            except (TypeError, ValueError) as exc:
                raise InvalidConfigError(f"bad value for {name}: {value!r}") from exc
            if kind is int and float(value) != int(value):
                raise InvalidConfigError(f"{name} must be an integer, got {value!r}")
        return cls(**kwargs)


def load_tracker_config(path) -> TrackerConfig:
    with open(path) as fh:
        data = json.load(fh)
    return TrackerConfig.from_dict(data)
