"""Rigid-body dynamics of an n-joint manipulator.

The shipped instance is a planar two-link arm with revolute joints, the
standard testbed for torque-level control studies.  The equations of motion
are

    M(q) qdd + C(q, qd) qd + g(q) = tau + tau_star

with a symmetric positive definite inertia matrix M, a Coriolis/centrifugal
matrix C built from Christoffel symbols (so that dM/dt - 2C is exactly
skew-symmetric), and a gravity torque g that is the gradient of the
potential energy.  The dynamics are linear in a constant lumped parameter
vector: for any differentiable vector ``zeta``,

    M(q) zetad + C(q, qd) zeta + g(q) = Y(q, qd, zeta, zetad) @ theta.

Controllers are handed an :class:`ArmShape` (dimensions plus the regressor
map) rather than the model itself, so they can never read the true
parameters; only diagnostics receive the full model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ArmParams",
    "ArmShape",
    "TwoLinkArm",
    "DEFAULT_PARAMS",
]


@dataclass(frozen=True)
class ArmParams:
    """Physical parameters of the planar two-link arm.

    Masses in kg, lengths in m, rotational inertias in kg m^2, gravity in
    m/s^2.  ``lc1``/``lc2`` are the centroid offsets along each link.
    """

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    lc1: float = 0.5
    lc2: float = 0.5
    I1: float = 0.1
    I2: float = 0.1
    g0: float = 9.81

    def lumped(self) -> np.ndarray:
        """Minimal lumped parameter vector [a1, a2, a3, b1, b2].

        a1 = I1 + m1 lc1^2 + I2 + m2 (l1^2 + lc2^2)
        a2 = m2 l1 lc2
        a3 = I2 + m2 lc2^2
        b1 = (m1 lc1 + m2 l1) g0
        b2 = m2 lc2 g0
        """
        a1 = self.I1 + self.m1 * self.lc1**2 + self.I2 + self.m2 * (self.l1**2 + self.lc2**2)
        a2 = self.m2 * self.l1 * self.lc2
        a3 = self.I2 + self.m2 * self.lc2**2
        b1 = (self.m1 * self.lc1 + self.m2 * self.l1) * self.g0
        b2 = self.m2 * self.lc2 * self.g0
        return np.array([a1, a2, a3, b1, b2])


DEFAULT_PARAMS = ArmParams()


@dataclass(frozen=True)
class ArmShape:
    """Dimension and regressor information a controller is allowed to see."""

    n: int
    p_dim: int
    regressor: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class TwoLinkArm:
    """Planar two-link arm dynamics, generic-interface instance for n = 2."""

    n = 2
    p_dim = 5

    def __init__(self, params: ArmParams = DEFAULT_PARAMS, coriolis_sign: float = 1.0):
        self.params = params
        self.theta = params.lumped()
        # coriolis_sign is a fault-injection knob used by the validation
        # suite's own mutation self-test; it must stay at +1 in real runs.
        self._csign = float(coriolis_sign)

    # -- dynamics terms ----------------------------------------------------

    def inertia(self, q) -> np.ndarray:
        a1, a2, a3, _, _ = self.theta
        c2 = np.cos(q[1])
        m12 = a3 + a2 * c2
        return np.array([[a1 + 2.0 * a2 * c2, m12], [m12, a3]])

    def coriolis(self, q, qdot) -> np.ndarray:
        """Christoffel-symbol Coriolis/centrifugal matrix."""
        a2 = self.theta[1]
        s2 = np.sin(q[1])
        h = self._csign * a2 * s2
        return np.array(
            [[-h * qdot[1], -h * (qdot[0] + qdot[1])], [h * qdot[0], 0.0]]
        )

    def inertia_rate(self, q, qdot) -> np.ndarray:
        """Analytic dM/dt along (q, qdot)."""
        a2 = self.theta[1]
        d = -a2 * np.sin(q[1]) * qdot[1]
        return np.array([[2.0 * d, d], [d, 0.0]])

    def gravity(self, q) -> np.ndarray:
        _, _, _, b1, b2 = self.theta
        c1 = np.cos(q[0])
        c12 = np.cos(q[0] + q[1])
        return np.array([b1 * c1 + b2 * c12, b2 * c12])

    def potential(self, q) -> float:
        _, _, _, b1, b2 = self.theta
        return b1 * np.sin(q[0]) + b2 * np.sin(q[0] + q[1])

    def energy(self, q, qdot) -> float:
        return 0.5 * qdot @ self.inertia(q) @ qdot + self.potential(q)

    # -- regressor ---------------------------------------------------------

    @staticmethod
    def regressor(q, qdot, zeta, zetadot) -> np.ndarray:
        """Y such that Y @ theta = M(q) zetadot + C(q, qdot) zeta + g(q)."""
        c1 = np.cos(q[0])
        c2 = np.cos(q[1])
        s2 = np.sin(q[1])
        c12 = np.cos(q[0] + q[1])
        y = np.zeros((2, 5))
        y[0, 0] = zetadot[0]
        y[0, 1] = c2 * (2.0 * zetadot[0] + zetadot[1]) - s2 * (
            qdot[1] * zeta[0] + (qdot[0] + qdot[1]) * zeta[1]
        )
        y[0, 2] = zetadot[1]
        y[0, 3] = c1
        y[0, 4] = c12
        y[1, 1] = c2 * zetadot[0] + s2 * qdot[0] * zeta[0]
        y[1, 2] = zetadot[0] + zetadot[1]
        y[1, 4] = c12
        return y

    def shape(self) -> ArmShape:
        return ArmShape(n=self.n, p_dim=self.p_dim, regressor=self.regressor)

    # -- simulation --------------------------------------------------------

    def forward_dynamics(self, q, qdot, tau, tau_star) -> np.ndarray:
        """Joint accelerations from M qdd = tau + tau_star - C qd - g."""
        rhs = tau + tau_star - self.coriolis(q, qdot) @ qdot - self.gravity(q)
        M = self.inertia(q)
        # closed-form 2x2 solve; M is positive definite for valid parameters
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return np.array(
            [
                (M[1, 1] * rhs[0] - M[0, 1] * rhs[1]) / det,
                (M[0, 0] * rhs[1] - M[1, 0] * rhs[0]) / det,
            ]
        )
