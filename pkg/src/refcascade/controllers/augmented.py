"""Adaptive torque law with a filtered regressor and error augmentation.

The adaptation here does not use Y^T s.  Instead the regressor is passed
through the strictly proper loop operator that maps parameter error into the
second-order target error, giving the filtered regressor

    W = [loop filter] Y(q, qdot, z, zdot)   (entrywise, per-joint channels),

and the non-commutation of that time-varying filtering with the estimate is
compensated by the swap term

    h = W theta_hat - [loop filter](Y theta_hat),

which vanishes identically while the estimate is frozen.  A proxy desired
position q_d^aux absorbs h and a damping term into the reference cascade:

    qdd_aux + a1s qd_aux' + a0s q_d^aux - h
        = qdd_d + a1s qdot_d + a0s q_d - lambda_D_star W W^T e,

with e = dqdot + alpha_star dq and (a0s, a1s) = (alpha_star^2, 2 alpha_star).
The cascade then runs against q_d^aux while the adaptation descends the
W-projected error:  theta_hat' = -Gamma W^T e.  The torque itself is the
passive-filter law evaluated with the cascade's z.
"""

from __future__ import annotations

import numpy as np

from ..filters import FilterBank, regressor_loop_channel
from ..refdyn import ReferenceConfig, cascade_rates
from .base import ConfigError, ControlEval, ControllerBase, GainSet

__all__ = ["FilteredAdaptiveController"]


def make_loop_bank(coeffs, a0s, a1s, lam_vec, k_vec, cols):
    """Per-joint loop-operator bank (strictly proper, relative degree one)."""
    dens = []
    nums = []
    for lam_r, k_r in zip(lam_vec, k_vec):
        num, den = regressor_loop_channel(coeffs.alphas, a0s, a1s, lam_r, k_r)
        nums.append(num)
        dens.append(den)
    dens = np.vstack(dens)
    width = max(n.size for n in nums)
    num_arr = np.zeros((len(nums), width))
    for r, n_ in enumerate(nums):
        num_arr[r, : n_.size] = n_
    return FilterBank(dens, [num_arr], cols=cols)


class FilteredAdaptiveController(ControllerBase):
    variant = "filtered_adaptive"
    availability = "full"

    def __init__(self, shape, gains: GainSet, traj, coeffs, theta_hat0=None):
        super().__init__(shape, gains, traj)
        gains.validate_positive(("lambda_D", "lam", "alpha_star", "lambda_D_star"))
        self.K = gains.k_diag(self.n)
        if np.any(self.K <= 0.0):
            raise ConfigError("filtered adaptation needs strictly positive K entries")
        self.Lam = gains.lambda_diag(self.n)
        self.gamma = gains.gamma_diag(self.p_dim)
        self.lambda_D = gains.lambda_D
        self.lam = gains.lam
        self.alpha_star = gains.alpha_star
        self.lambda_D_star = gains.lambda_D_star
        self.a0s, self.a1s = gains.star_pair()
        self.refcfg = ReferenceConfig(coeffs, "full_corrected", self.Lam)
        self.theta_hat0 = (
            np.zeros(self.p_dim) if theta_hat0 is None else np.asarray(theta_hat0, float)
        )

        self.wbank = make_loop_bank(coeffs, self.a0s, self.a1s, self.Lam, self.K, self.p_dim)
        self.hbank = make_loop_bank(coeffs, self.a0s, self.a1s, self.Lam, self.K, 1)

        self.layout.add("phi", coeffs.ell, self.n)
        self.layout.add("qd_aux", 2, self.n)
        self.layout.add("xi", self.p_dim)
        self.layout.add("theta_hat", self.p_dim)
        self.layout.add("wbank", *self.wbank.state_shape())
        self.layout.add("hbank", *self.hbank.state_shape())

    def initial_state(self, q0, qdot0, t0=0.0):
        x = np.zeros(self.state_size)
        qd0 = self.traj.eval(t0, 0)
        qd_dot0 = self.traj.eval(t0, 1)
        aux = self.layout.view(x, "qd_aux")
        aux[0] = qd0
        aux[1] = qd_dot0
        phi = self.layout.view(x, "phi")
        phi[0] = qd_dot0
        self.layout.view(x, "theta_hat")[:] = self.theta_hat0
        return x

    def evaluate(self, t, q, qdot, x):
        qd = self.traj.eval(t, 0)
        qd_dot = self.traj.eval(t, 1)
        qd_ddot = self.traj.eval(t, 2)
        phi = self.layout.view(x, "phi")
        aux = self.layout.view(x, "qd_aux")
        xi = self.layout.view(x, "xi")
        th = self.layout.view(x, "theta_hat")
        wx = self.layout.view(x, "wbank")
        hx = self.layout.view(x, "hbank")

        W = self.wbank.output(wx)            # filtered regressor, (n, p)
        h = W @ th - self.hbank.output(hx)   # swap term, (n,)
        e = (qdot - qd_dot) + self.alpha_star * (q - qd)

        qdd_aux = (
            -self.a1s * aux[1]
            - self.a0s * aux[0]
            + h
            + qd_ddot
            + self.a1s * qd_dot
            + self.a0s * qd
            - self.lambda_D_star * (W @ (W.T @ e))
        )

        phi_dot, zdot = cascade_rates(
            self.refcfg, phi, q, qdot, aux[0], aux[1], qdd_aux
        )
        z = phi[0]
        s = qdot - z
        Y = self.shape.regressor(q, qdot, z, zdot)
        tau = -self.K * s + Y @ th - self.lambda_D * (Y @ xi)

        xdot = np.empty(self.state_size)
        self.layout.view(xdot, "phi")[:] = phi_dot
        aux_dot = self.layout.view(xdot, "qd_aux")
        aux_dot[0] = aux[1]
        aux_dot[1] = qdd_aux
        self.layout.view(xdot, "xi")[:] = -self.lam * xi + self.lam * (Y.T @ s)
        self.layout.view(xdot, "theta_hat")[:] = -self.gamma * (W.T @ e)
        self.layout.view(xdot, "wbank")[:] = self.wbank.deriv(wx, Y)
        self.layout.view(xdot, "hbank")[:] = self.hbank.deriv(hx, Y @ th)

        extras = {
            "ref_vel": z, "ref_acc": zdot, "s": s, "qd": qd,
            "theta_hat": th.copy(), "xi": xi.copy(),
            "W": W, "h": h, "qd_aux": aux[0].copy(),
        }
        return ControlEval(tau, xdot, extras)
