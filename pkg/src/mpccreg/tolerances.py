from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds shared by all analysis routines.

    feas      constraint residuals, scaled by ``1 + |value|``
    active    active-set membership (``H`` additionally scaled by ``1 + t``)
    stat      stationarity residual, scaled by ``1 + ||grad f||``
    rank      smallest/largest singular value ratio for full rank
    eig_zero  eigenvalue zero band, scaled by ``1 + max |eig|``
    zero      multiplier sign band, scaled by ``1 + ||multipliers||_inf``
    """

    feas: float = 1e-8
    active: float = 1e-8
    stat: float = 1e-8
    rank: float = 1e-10
    eig_zero: float = 1e-9
    zero: float = 1e-8

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")

    def with_overrides(self, **overrides) -> "Tolerances":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def loosened(self, eps: float, factor: float = 10.0) -> "Tolerances":
        """Widen the point-dependent bands to cover a position error ``eps``."""
        band = factor * eps
        return replace(
            self,
            feas=max(self.feas, band),
            active=max(self.active, band),
            stat=max(self.stat, band),
            zero=max(self.zero, band),
        )

    def zero_band(self, values) -> float:
        values = np.asarray(list(values), dtype=float)
        scale = float(np.max(np.abs(values))) if values.size else 0.0
        return self.zero * (1.0 + scale)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT = Tolerances()
