"""High-order reference dynamics and their first-order cascade realizations.

The reference velocity z is generated by an ODE of order ell+1 in the joint
coordinates whose characteristic polynomial

    w^(ell+1) + alpha_ell w^ell + ... + alpha_0

is Hurwitz.  Four availability variants differ in which desired-trajectory
derivatives the right side may read:

``position``        only q_d (the top derivative term uses q, not dq)
``velocity``        q_d and its first derivative
``full``            q_d through its second derivative
``full_corrected``  full, plus a correction term L * d^(ell-1)(qdot - z)/dt^(ell-1)

Written literally, these ODEs involve derivatives of q and q_d far beyond
what is measured.  Each variant therefore ships as a degree-reduced cascade
of ell first-order states whose right sides read only q, qdot, q_d (plus the
declared q_d derivatives): every unmeasurable term is folded into a shifted
cascade state, and the per-level shifts telescope so that the chain is
exactly equivalent to the high-order ODE.  The ``reference_oracle`` below
integrates the literal high-order ODE using exact analytic derivatives and is
the test-side ground truth for that equivalence.

Scaling the coefficients by alpha_k -> alpha_k / kappa^(ell+1-k) dilates the
autonomous dynamics in time by kappa; critically damped sets (binomial
expansions of (w + a)^(ell+1)) map onto critically damped sets with rate
a / kappa, so the family is closed under time scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import routh_hurwitz

__all__ = [
    "AVAILABILITIES",
    "HurwitzCoeffs",
    "ReferenceConfig",
    "ReferenceRealization",
    "critically_damped_coeffs",
    "scale_coeffs",
    "cascade_init",
    "cascade_rates",
    "reference_oracle",
    "realization_trajectory",
]

AVAILABILITIES = ("position", "velocity", "full", "full_corrected")


@dataclass(frozen=True)
class HurwitzCoeffs:
    """Coefficients alpha_0..alpha_ell of a stable cascade polynomial.

    ``kappa`` records the time-scale claim attached to the set: construction
    verifies that both the polynomial itself and its kappa-downscaled version
    pass the Routh test, so a scaled design is admissible whenever the
    original is.
    """

    ell: int
    alphas: np.ndarray
    kappa: float = 1.0

    def __init__(self, ell, alphas, kappa=1.0):
        alphas = np.asarray(alphas, dtype=float)
        ell = int(ell)
        if ell < 1:
            raise ValueError("cascade order parameter must be at least 1")
        if alphas.size != ell + 1:
            raise ValueError(f"expected {ell + 1} coefficients, got {alphas.size}")
        if kappa < 1.0:
            raise ValueError("time scale kappa must be >= 1")
        poly = np.append(alphas, 1.0)
        if routh_hurwitz(poly) != "stable":
            raise ValueError("cascade polynomial is not Hurwitz-stable")
        scaled = _scaled_alphas(alphas, kappa)
        if routh_hurwitz(np.append(scaled, 1.0)) != "stable":
            raise ValueError("kappa-scaled cascade polynomial is not Hurwitz-stable")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "kappa", float(kappa))

    def polynomial(self) -> np.ndarray:
        return np.append(self.alphas, 1.0)


def _scaled_alphas(alphas, kappa) -> np.ndarray:
    ell = alphas.size - 1
    powers = np.array([kappa ** (ell + 1 - k) for k in range(ell + 1)])
    return alphas / powers


def critically_damped_coeffs(alpha: float, ell: int, kappa: float = 1.0) -> HurwitzCoeffs:
    """Binomial expansion of (w + alpha)^(ell+1): repeated real poles at -alpha.

    In particular alpha_0 = alpha^(ell+1) and alpha_ell = (ell+1) alpha.
    """
    if alpha <= 0.0:
        raise ValueError("rate must be positive")
    if ell < 1:
        raise ValueError("cascade order parameter must be at least 1")
    alphas = np.array(
        [math.comb(ell + 1, k) * alpha ** (ell + 1 - k) for k in range(ell + 1)]
    )
    return HurwitzCoeffs(ell, alphas, kappa)


def scale_coeffs(coeffs: HurwitzCoeffs, kappa: float) -> HurwitzCoeffs:
    """Time-dilate a coefficient set: alpha_k -> alpha_k / kappa^(ell+1-k).

    Critically damped inputs with rate a come back critically damped with
    rate a / kappa.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    return HurwitzCoeffs(coeffs.ell, _scaled_alphas(coeffs.alphas, kappa), 1.0)


@dataclass(frozen=True)
class ReferenceConfig:
    """Coefficient set, availability variant and correction gain."""

    coeffs: HurwitzCoeffs
    availability: str = "full"
    Lambda: np.ndarray | None = None  # diagonal entries, length n

    def __post_init__(self):
        if self.availability not in AVAILABILITIES:
            raise ValueError(f"unknown availability '{self.availability}'")
        if self.availability == "full_corrected":
            if self.Lambda is None:
                raise ValueError("full_corrected variant needs the correction gain")
            lam = np.asarray(self.Lambda, dtype=float)
            if np.any(lam <= 0.0):
                raise ValueError("correction gain entries must be positive")
            object.__setattr__(self, "Lambda", lam)

    @property
    def ell(self) -> int:
        return self.coeffs.ell


def _check_inputs(availability, qd_dot, qd_ddot):
    if availability == "position":
        if qd_dot is not None or qd_ddot is not None:
            raise ValueError("position-only variant must not receive desired-velocity data")
    elif availability == "velocity":
        if qd_dot is None:
            raise ValueError("velocity variant needs the desired velocity")
        if qd_ddot is not None:
            raise ValueError("velocity variant must not receive desired acceleration")
    else:
        if qd_dot is None or qd_ddot is None:
            raise ValueError(f"{availability} variant needs desired velocity and acceleration")


def cascade_init(config: ReferenceConfig, n: int, qd_dot0=None) -> np.ndarray:
    """Initial cascade states: all zero except z(0) = qdot_d(0) when available."""
    phi = np.zeros((config.ell, n))
    if config.availability != "position":
        if qd_dot0 is None:
            raise ValueError("initialization needs the desired velocity for this variant")
        phi[0] = np.asarray(qd_dot0, dtype=float)
    return phi


def cascade_rates(config, phi, q, qdot, qd, qd_dot=None, qd_ddot=None):
    """Time derivatives of the cascade states, and the reference acceleration.

    ``phi`` has shape (ell, n) with phi[0] = z.  Returns ``(phi_dot, zdot)``
    where ``phi_dot[0] == zdot``.  Only the measured quantities q, qdot and
    the declared q_d derivatives are read.
    """
    av = config.availability
    _check_inputs(av, qd_dot, qd_ddot)
    alphas = config.coeffs.alphas
    ell = config.ell
    dq = q - qd
    phi_dot = np.empty_like(phi)
    z = phi[0]

    if av == "position":
        if ell == 1:
            phi_dot[0] = -alphas[1] * qdot - alphas[0] * dq
        else:
            for j in range(1, ell):  # levels 1..ell-1
                phi_dot[j - 1] = phi[j] - alphas[ell - j + 1] * qdot + alphas[ell - j] * qd
            phi_dot[ell - 1] = -alphas[1] * qdot - alphas[0] * dq
        return phi_dot, phi_dot[0]

    dqd = qdot - qd_dot
    if av == "velocity":
        top_extra = -alphas[ell] * dqd
    else:
        top_extra = qd_ddot - alphas[ell] * dqd
        if av == "full_corrected":
            top_extra = top_extra + config.Lambda * (qdot - z)

    if ell == 1:
        phi_dot[0] = top_extra - alphas[0] * dq
        return phi_dot, phi_dot[0]

    phi_dot[0] = phi[1] + top_extra
    for j in range(2, ell):  # middle levels
        phi_dot[j - 1] = phi[j] - alphas[ell - j + 1] * dqd
    phi_dot[ell - 1] = -alphas[1] * dqd - alphas[0] * dq
    return phi_dot, phi_dot[0]


class ReferenceRealization:
    """Stateful wrapper bundling a config with its cascade state block."""

    def __init__(self, config: ReferenceConfig, n: int, qd_dot0=None):
        self.config = config
        self.n = n
        self.states = cascade_init(config, n, qd_dot0)
        self.zdot_cache = np.zeros(n)

    @property
    def z(self) -> np.ndarray:
        return self.states[0]

    def derivative(self, q, qdot, qd, qd_dot=None, qd_ddot=None) -> np.ndarray:
        phi_dot, zdot = cascade_rates(self.config, self.states, q, qdot, qd, qd_dot, qd_ddot)
        self.zdot_cache = zdot
        return phi_dot


# -- high-order oracle (test-side ground truth) -------------------------------


def oracle_initial_state(config, q_traj, qd_traj, t0=0.0) -> np.ndarray:
    """Literal-ODE initial state matching the zero-initialized cascade.

    The cascade states above initialize to zero (except z(0)); inverting the
    per-level shift definitions at t0 gives the equivalent initial values of
    z and its derivatives.
    """
    alphas = config.coeffs.alphas
    ell = config.ell
    av = config.availability
    n = q_traj.n

    def q_k(k):
        return q_traj.eval(t0, k)

    def qd_k(k):
        return qd_traj.eval(t0, k)

    def dq_k(k):
        return q_k(k) - qd_k(k)

    Z = np.zeros((ell, n))
    Z[0] = 0.0 if av == "position" else qd_k(1)
    for j in range(2, ell + 1):
        if av == "position":
            val = -alphas[ell] * q_k(j - 1) + alphas[ell - j + 1] * qd_k(0)
            for i in range(2, j):
                val = val - alphas[ell - i + 1] * dq_k(j - i)
        else:
            val = np.zeros(n)
            if av in ("full", "full_corrected"):
                val = qd_k(j).astype(float)
            for i in range(1, j):
                val = val - alphas[ell - i + 1] * dq_k(j - i)
            if av == "full_corrected":
                val = val + config.Lambda * q_k(j - 1) - config.Lambda * Z[j - 2]
        Z[j - 1] = val
    return Z


def _half_grid(t_grid):
    """Stage times of classical RK4 over a uniform grid: half-step spacing."""
    t_grid = np.asarray(t_grid, dtype=float)
    steps = t_grid.size - 1
    h = t_grid[1] - t_grid[0]
    if steps > 1 and not np.allclose(np.diff(t_grid), h):
        raise ValueError("time grid must be uniform")
    return t_grid[0] + 0.5 * h * np.arange(2 * steps + 1), h


def _rk4_grid(f, x0, n_steps, h, out_dim):
    """Fixed-grid RK4 where f(j, x) reads precomputed stage-time data."""
    out = np.empty((n_steps + 1, out_dim))
    x = x0.copy()
    out[0] = x[:out_dim]
    for i in range(n_steps):
        j = 2 * i
        k1 = f(j, x)
        k2 = f(j + 1, x + 0.5 * h * k1)
        k3 = f(j + 1, x + 0.5 * h * k2)
        k4 = f(j + 2, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x[:out_dim]
    return out


def reference_oracle(config, q_traj, qd_traj, t_grid) -> np.ndarray:
    """Integrate the literal high-order reference ODE; returns z over t_grid.

    All trajectory derivatives are evaluated analytically on the RK4 stage
    grid up front; the oracle never touches the degree-reduced cascade.
    """
    n = q_traj.n
    alphas = config.coeffs.alphas
    ell = config.ell
    av = config.availability
    ts, h = _half_grid(t_grid)
    steps = len(t_grid) - 1

    if av == "position":
        # drive = -a_ell q^(ell) - sum_k a_k dq^(k)
        drive = -alphas[ell] * q_traj.eval_grid(ts, ell)
        for k in range(ell):
            drive -= alphas[k] * (q_traj.eval_grid(ts, k) - qd_traj.eval_grid(ts, k))
    else:
        drive = np.zeros((ts.size, n))
        if av in ("full", "full_corrected"):
            drive += qd_traj.eval_grid(ts, ell + 1)
        for k in range(ell + 1):
            drive -= alphas[k] * (q_traj.eval_grid(ts, k) - qd_traj.eval_grid(ts, k))
    q_top = q_traj.eval_grid(ts, ell) if av == "full_corrected" else None

    Z0 = oracle_initial_state(config, q_traj, qd_traj, t_grid[0]).ravel()

    def f(j, x):
        Z = x.reshape(ell, n)
        dZ = np.empty_like(Z)
        dZ[:-1] = Z[1:]
        top = drive[j]
        if q_top is not None:
            top = top + config.Lambda * (q_top[j] - Z[ell - 1])
        dZ[-1] = top
        return dZ.ravel()

    return _rk4_grid(f, Z0, steps, h, n)


def realization_trajectory(config, q_traj, qd_traj, t_grid) -> np.ndarray:
    """Integrate the degree-reduced cascade driven by the same signals."""
    n = q_traj.n
    av = config.availability
    ts, h = _half_grid(t_grid)
    steps = len(t_grid) - 1

    q_g = q_traj.eval_grid(ts, 0)
    qdot_g = q_traj.eval_grid(ts, 1)
    qd_g = qd_traj.eval_grid(ts, 0)
    qd_dot_g = None if av == "position" else qd_traj.eval_grid(ts, 1)
    qd_ddot_g = (
        qd_traj.eval_grid(ts, 2) if av in ("full", "full_corrected") else None
    )

    qd_dot0 = None if av == "position" else qd_dot_g[0]
    phi0 = cascade_init(config, n, qd_dot0).ravel()

    def f(j, x):
        phi_dot, _ = cascade_rates(
            config,
            x.reshape(config.ell, n),
            q_g[j],
            qdot_g[j],
            qd_g[j],
            None if qd_dot_g is None else qd_dot_g[j],
            None if qd_ddot_g is None else qd_ddot_g[j],
        )
        return phi_dot.ravel()

    return _rk4_grid(f, phi0, steps, h, n)
