"""Shared infrastructure for the torque-law implementations.

Every controller is an ODE component: it exposes the size of its internal
state block, an initializer, and a pure ``evaluate`` that maps the current
measurements and internal state to the commanded torque, the state-block
time derivative, and a dictionary of derived views for logging.  The
experiment loop concatenates plant and controller states and integrates them
jointly, so no controller ever integrates anything privately.

Information discipline is structural: controllers receive an
:class:`~refcascade.manipulator.ArmShape` (dimensions plus regressor map,
never the true parameters) and a :class:`TrajectoryView` capped at the
declared derivative order of the desired trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..manipulator import ArmShape

__all__ = [
    "ConfigError",
    "GainSet",
    "TrajectoryView",
    "Layout",
    "ControlEval",
    "ControllerBase",
    "diag_entries",
]


class ConfigError(ValueError):
    """Invalid experiment or controller configuration."""


def diag_entries(value, n, name) -> np.ndarray:
    """Coerce a gain to diagonal entries of length n.

    Scalars broadcast; vectors pass through; square matrices must be exactly
    diagonal (the control laws rely on channelwise decoupling).
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    elif arr.ndim == 2:
        if arr.shape != (n, n):
            raise ConfigError(f"{name}: expected shape ({n},{n})")
        if np.any(arr != np.diag(np.diag(arr))):
            raise ConfigError(f"{name}: non-diagonal gain matrices are rejected")
        arr = np.diag(arr).copy()
    if arr.shape != (n,):
        raise ConfigError(f"{name}: expected {n} diagonal entries")
    return arr


@dataclass(frozen=True)
class GainSet:
    """Gains for all controller variants; unused entries are ignored.

    All scalars must be positive and all matrix-valued gains diagonal
    positive definite (supplied as scalars or per-channel vectors).  The
    second-order target-error pairs are derived from their rates:
    (alpha_star^2, 2 alpha_star) and likewise for the double-starred and
    kappa-starred pairs.
    """

    K: float | np.ndarray = 20.0
    Gamma: float | np.ndarray = 1.0
    lambda_D: float = 1.0
    lam: float = 10.0
    alpha_star: float = 2.0
    lambda_D_star: float = 1.0
    alpha_star_star: float = 2.0
    kappa_star: float = 2.0
    gamma_freq: float | tuple = 1.0
    K_D: float | np.ndarray = 20.0
    K_P: float | np.ndarray = 100.0
    K_I: float | np.ndarray = 50.0
    Lambda: float | np.ndarray = 2.0
    hstar_rate: float = 2.0
    hstar_den: tuple | None = None  # explicit tone-layer denominator tail

    def k_diag(self, n):
        k = diag_entries(self.K, n, "K")
        if np.any(k < 0.0):
            raise ConfigError("K entries must be nonnegative")
        return k

    def lambda_diag(self, n):
        lam = diag_entries(self.Lambda, n, "Lambda")
        if np.any(lam <= 0.0):
            raise ConfigError("Lambda entries must be positive")
        return lam

    def gamma_diag(self, p):
        g = diag_entries(self.Gamma, p, "Gamma")
        if np.any(g < 0.0):
            raise ConfigError("Gamma entries must be nonnegative")
        return g

    def pid_diags(self, n):
        kd = diag_entries(self.K_D, n, "K_D")
        kp = diag_entries(self.K_P, n, "K_P")
        ki = diag_entries(self.K_I, n, "K_I")
        if np.any(kd <= 0.0) or np.any(kp <= 0.0) or np.any(ki <= 0.0):
            raise ConfigError("PID gains must be positive")
        return kd, kp, ki

    def freq_gains(self, n_star):
        g = np.asarray(self.gamma_freq, dtype=float)
        if g.ndim == 0:
            g = np.full(n_star, float(g))
        if g.shape != (n_star,):
            raise ConfigError(f"expected {n_star} tone adaptation gain(s)")
        if np.any(g <= 0.0):
            raise ConfigError("tone adaptation gains must be positive")
        return g

    def star_pair(self):
        a = self.alpha_star
        return a * a, 2.0 * a

    def star_star_pair(self):
        a = self.alpha_star_star
        return a * a, 2.0 * a

    def kappa_pair(self):
        k = self.kappa_star
        return k * k, 2.0 * k

    def validate_positive(self, names):
        for name in names:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"gain '{name}' must be positive")


_AVAILABILITY_ORDER = {"position": 0, "velocity": 1, "full": 2}


class TrajectoryView:
    """Desired-trajectory access capped at a declared derivative order."""

    def __init__(self, traj, availability: str):
        if availability not in _AVAILABILITY_ORDER:
            raise ConfigError(f"unknown availability '{availability}'")
        self._traj = traj
        self.availability = availability
        self.max_order = _AVAILABILITY_ORDER[availability]

    @property
    def n(self):
        return self._traj.n

    def eval(self, t, order=0):
        if order > self.max_order:
            raise ConfigError(
                f"trajectory derivative of order {order} exceeds the declared "
                f"'{self.availability}' availability"
            )
        return self._traj.eval(t, order)


class Layout:
    """Named slices into a flat controller state vector."""

    def __init__(self):
        self._blocks: dict[str, tuple[int, int, tuple]] = {}
        self.size = 0

    def add(self, name, *shape):
        count = 1
        for s in shape:
            count *= int(s)
        self._blocks[name] = (self.size, count, shape)
        self.size += count

    def view(self, x, name):
        off, count, shape = self._blocks[name]
        v = x[off : off + count]
        return v.reshape(shape) if shape else v

    def names(self):
        return tuple(self._blocks)


@dataclass
class ControlEval:
    """Torque command, controller-state derivative and derived views."""

    tau: np.ndarray
    xdot: np.ndarray
    extras: Mapping[str, np.ndarray] = field(default_factory=dict)


class ControllerBase:
    """Common plumbing: shape, gains, trajectory view and state layout."""

    variant: str = ""
    availability: str = "full"

    def __init__(self, shape: ArmShape, gains: GainSet, traj):
        self.shape = shape
        self.n = shape.n
        self.p_dim = shape.p_dim
        self.gains = gains
        self.traj = TrajectoryView(traj, self.availability)
        self.layout = Layout()

    @property
    def state_size(self) -> int:
        return self.layout.size

    def initial_state(self, q0, qdot0, t0=0.0) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, t, q, qdot, x) -> ControlEval:
        raise NotImplementedError
