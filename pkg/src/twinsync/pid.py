"""Discrete PID correction of prediction error.

Backward-Euler integral with clamping (anti-windup), backward-difference
derivative on the error, bumpless activation (first step after enabling uses
derivative 0), and live gain retuning that preserves controller memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidGains, NonFiniteError, NotEnabled


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.4
    ki: float = 0.05
    kd: float = 0.0

    def __post_init__(self):
        for name, v in (("kp", self.kp), ("ki", self.ki), ("kd", self.kd)):
            if not math.isfinite(v) or v < 0:
                raise InvalidGains(f"{name} must be finite and >= 0, got {v}")

    def as_dict(self) -> dict:
        return {"kp": self.kp, "ki": self.ki, "kd": self.kd}


@dataclass
class PidController:
    gains: PidGains = field(default_factory=PidGains)
    integral_limit: float = 1e3
    derivative_alpha: float = 1.0  # 1.0 = unfiltered derivative
    enabled: bool = False
    integral: float = 0.0
    prev_error: float | None = None  # None = unset (bumpless first step)
    prev_derivative: float = 0.0
    last_u: float = 0.0

    def activate(self) -> None:
        """Enable with cleared memory; idempotent."""
        if self.enabled:
            return
        self.enabled = True
        self.integral = 0.0
        self.prev_error = None
        self.prev_derivative = 0.0
        self.last_u = 0.0

    def deactivate(self) -> None:
        self.enabled = False
        self.integral = 0.0
        self.prev_error = None
        self.prev_derivative = 0.0
        self.last_u = 0.0

    def set_gains(self, gains: PidGains) -> None:
        """Swap gains without touching integral/prev_error (no loop kick)."""
        if not isinstance(gains, PidGains):
            gains = PidGains(**gains)
        self.gains = gains

    def step(self, error: float, dt: float) -> float:
        if not self.enabled:
            raise NotEnabled("controller is deactivated")
        if not math.isfinite(error):
            raise NonFiniteError(f"non-finite error {error}")
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self.integral = max(-self.integral_limit,
                            min(self.integral_limit, self.integral + error * dt))
        if self.prev_error is None:
            derivative = 0.0
        else:
            raw = (error - self.prev_error) / dt
            derivative = (self.derivative_alpha * raw
                          + (1 - self.derivative_alpha) * self.prev_derivative)
        u = (self.gains.kp * error
             + self.gains.ki * self.integral
             + self.gains.kd * derivative)
        self.prev_error = error
        self.prev_derivative = derivative
        self.last_u = u
        return u

    def snapshot(self) -> dict:
        return {
            "enabled": self.enabled,
            "kp": self.gains.kp,
            "ki": self.gains.ki,
            "kd": self.gains.kd,
            "integral": self.integral,
        }


def apply_correction(raw_prediction: float, u: float) -> float:
    """Additive correction, clamped at the physical floor of zero pps."""
    return max(0.0, raw_prediction + u)


class AutoTuner:
    """Round-robin coordinate hill-climb over (kp, ki, kd).

    Call once per evaluation window with that window's MAE; keeps a +/-10%
    perturbation if the MAE improved versus the previous window, otherwise
    reverts and tries the opposite sign on the next visit. Off by default in
    every entry point that hosts it.
    """

    PARAMS = ("kp", "ki", "kd")

    def __init__(self, delta_frac: float = 0.1, delta_floor: float = 1e-4,
                 gain_max: float = 10.0):
        self.delta_frac = delta_frac
        self.delta_floor = delta_floor
        self.gain_max = gain_max
        self.directions = {p: 1.0 for p in self.PARAMS}
        self._cursor = 0
        self._prev_mae: float | None = None
        self._backup: PidGains | None = None
        self._perturbed: str | None = None

    def step(self, gains: PidGains, windowed_mae: float) -> PidGains:
        if self._perturbed is not None and self._prev_mae is not None:
            if windowed_mae >= self._prev_mae:
                self.directions[self._perturbed] *= -1.0
                gains = self._backup
        self._prev_mae = windowed_mae
        param = self.PARAMS[self._cursor]
        self._cursor = (self._cursor + 1) % len(self.PARAMS)
        current = getattr(gains, param)
        delta = max(self.delta_frac * current, self.delta_floor)
        new_val = min(self.gain_max, max(0.0, current + self.directions[param] * delta))
        self._backup = gains
        self._perturbed = param
        return PidGains(**{**gains.as_dict(), param: new_val})
