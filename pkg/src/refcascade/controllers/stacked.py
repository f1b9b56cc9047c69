"""Stacked reference structures that adapt to unknown disturbance tones.

A sinusoid of frequency w satisfies u'' + w^2 u = 0, so its square frequency
(and, for several tones, the elementary symmetric functions of the squared
frequencies) can be estimated online and used to build an internal layer that
absorbs the periodic disturbance.  Two structures are implemented:

``stacked_single``
    One layer chi with chi'' = zdot + th_f (q - chi) sits between the cascade
    and the torque; th_f estimates the square of the single dominant
    frequency.  The torque acts on s_aux = qdot - (chi' - alpha_star psi)
    with psi = q - chi, and both the frequency estimate and the dynamics
    estimate descend errors projected through filtered regressors.

``stacked_multi``
    The tone layer is separated from the dynamics layer: chi_1 carries the
    second-order target error, chi_2 carries a 2 n_star-order tone layer
    whose defining ODE contains inverse-filter compositions.  chi_2 is
    realized exactly as chi_1 minus a marginal filter of psi_1 = q - chi_1
    plus a chain driven by the tone regressors, so no measured signal is ever
    differentiated; the only inverse-filter composition that appears in the
    dynamics regressor path collapses to the proper biproper factor
    p^2 / (p^2 + k1s p + k0s).

Both require cascade order >= 2 (the stacked operators tap the cascade at
order ell-2).
"""

from __future__ import annotations

import numpy as np

from ..filters import (
    FilterBank,
    cascade_poly,
    direct_path_channel,
    freq_regressor_channel,
    tone_path_channel,
)
from ..numerics import poly_mul
from ..refdyn import HurwitzCoeffs, ReferenceConfig, cascade_rates
from .base import ConfigError, ControlEval, ControllerBase, GainSet

__all__ = ["StackedSingleController", "StackedMultiController", "hstar_denominator"]


def _stack_rows(rows):
    width = max(r.size for r in rows)
    out = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        out[i, : r.size] = r
    return out


def hstar_denominator(gains: GainSet, n_star: int) -> np.ndarray:
    """Tone-layer denominator tail (2 n_star coefficients, leading 1 implied).

    Defaults to the binomial expansion of (p + hstar_rate)^(2 n_star);
    an explicit ``hstar_den`` in the gain set overrides it.
    """
    if gains.hstar_den is not None:
        den = np.asarray(gains.hstar_den, dtype=float)
        if den.size != 2 * n_star:
            raise ConfigError("tone-layer denominator needs 2 n_star coefficients")
        full = np.append(den, 1.0)
    else:
        if gains.hstar_rate <= 0.0:
            raise ConfigError("hstar_rate must be positive")
        full = poly_mul(*([[gains.hstar_rate, 1.0]] * (2 * n_star)))
    from ..numerics import routh_hurwitz

    if routh_hurwitz(full) != "stable":
        raise ConfigError("tone-layer denominator is not Hurwitz-stable")
    return full[:-1]


class StackedSingleController(ControllerBase):
    variant = "stacked_single"
    availability = "full"

    def __init__(self, shape, gains: GainSet, traj, coeffs: HurwitzCoeffs,
                 theta_hat0=None, freq_hat0=0.0, freeze_freq=False):
        super().__init__(shape, gains, traj)
        if coeffs.ell < 2:
            raise ConfigError("stacked structures need cascade order >= 2")
        gains.validate_positive(
            ("lambda_D", "lam", "alpha_star", "lambda_D_star")
        )
        self.K = gains.k_diag(self.n)
        if np.any(self.K <= 0.0):
            raise ConfigError("stacked structures need strictly positive K entries")
        self.Lam = gains.lambda_diag(self.n)
        self.gamma = gains.gamma_diag(self.p_dim)
        self.gamma_f = gains.freq_gains(1)[0]
        self.lambda_D = gains.lambda_D
        self.lam = gains.lam
        self.alpha_star = gains.alpha_star
        self.lambda_D_star = gains.lambda_D_star
        self.a0s, self.a1s = gains.star_pair()
        self.refcfg = ReferenceConfig(coeffs, "full_corrected", self.Lam)
        self.theta_hat0 = (
            np.zeros(self.p_dim) if theta_hat0 is None else np.asarray(theta_hat0, float)
        )
        self.freq_hat0 = float(freq_hat0)
        self.freeze_freq = bool(freeze_freq)

        alphas = coeffs.alphas
        # layer-error regressor filter (biproper) and the dual regressor paths
        psi_nums, psi_dens = [], []
        y_nums2, y_nums3, y_dens = [], [], []
        for lam_r, k_r in zip(self.Lam, self.K):
            num, den = freq_regressor_channel(alphas, self.a0s, self.a1s, lam_r)
            psi_nums.append(num)
            psi_dens.append(den)
            num2, den2 = tone_path_channel(alphas, self.a0s, self.a1s, self.alpha_star, lam_r, k_r)
            num3, _ = direct_path_channel(alphas, self.a0s, self.a1s, self.alpha_star, lam_r, k_r)
            y_nums2.append(num2)
            y_nums3.append(num3)
            y_dens.append(den2)
        self.b_psi = FilterBank(np.vstack(psi_dens), [_stack_rows(psi_nums)], cols=1)
        self.b_y = FilterBank(np.vstack(y_dens), [_stack_rows(y_nums2), _stack_rows(y_nums3)],
                              cols=self.p_dim)
        self.b_v = FilterBank(np.vstack(y_dens), [_stack_rows(y_nums2), _stack_rows(y_nums3)],
                              cols=1)

        self.layout.add("phi", coeffs.ell, self.n)
        self.layout.add("qd_aux", 2, self.n)
        self.layout.add("chi", 2, self.n)
        self.layout.add("xi", self.p_dim)
        self.layout.add("theta_hat", self.p_dim)
        self.layout.add("freq_hat")
        self.layout.add("b_psi", *self.b_psi.state_shape())
        self.layout.add("b_psith", *self.b_psi.state_shape())
        self.layout.add("b_y", *self.b_y.state_shape())
        self.layout.add("b_v", *self.b_v.state_shape())

    def initial_state(self, q0, qdot0, t0=0.0):
        x = np.zeros(self.state_size)
        qd0 = self.traj.eval(t0, 0)
        qd_dot0 = self.traj.eval(t0, 1)
        aux = self.layout.view(x, "qd_aux")
        aux[0] = qd0
        aux[1] = qd_dot0
        chi = self.layout.view(x, "chi")
        chi[0] = np.asarray(q0, float)
        chi[1] = np.asarray(qdot0, float)
        self.layout.view(x, "phi")[0] = qd_dot0
        self.layout.view(x, "theta_hat")[:] = self.theta_hat0
        self.layout.view(x, "freq_hat")[:] = self.freq_hat0
        return x

    def evaluate(self, t, q, qdot, x):
        qd = self.traj.eval(t, 0)
        qd_dot = self.traj.eval(t, 1)
        qd_ddot = self.traj.eval(t, 2)
        phi = self.layout.view(x, "phi")
        aux = self.layout.view(x, "qd_aux")
        chi = self.layout.view(x, "chi")
        xi = self.layout.view(x, "xi")
        th = self.layout.view(x, "theta_hat")
        thf = float(self.layout.view(x, "freq_hat")[0])
        x_psi = self.layout.view(x, "b_psi")
        x_psith = self.layout.view(x, "b_psith")
        x_y = self.layout.view(x, "b_y")
        x_v = self.layout.view(x, "b_v")

        psi = q - chi[0]
        psidot = qdot - chi[1]

        W1 = self.b_psi.output(x_psi, psi)            # biproper
        g1_psith = self.b_psi.output(x_psith, psi * thf)
        WG2 = self.b_y.output(x_y, k=0)
        WG3 = self.b_y.output(x_y, k=1)
        vG2 = self.b_v.output(x_v, k=0)
        vG3 = self.b_v.output(x_v, k=1)

        Wst = thf * WG2 + WG3                          # (n, p)
        h = W1 * thf - g1_psith + thf * (WG2 @ th - vG2) + WG3 @ th - vG3
        e = (qdot - qd_dot) + self.alpha_star * (q - qd)

        qdd_aux = (
            -self.a1s * aux[1] - self.a0s * aux[0] + h
            + qd_ddot + self.a1s * qd_dot + self.a0s * qd
            - self.lambda_D_star * (Wst @ (Wst.T @ e))
        )

        phi_dot, zdot = cascade_rates(self.refcfg, phi, q, qdot, aux[0], aux[1], qdd_aux)
        chidd = zdot + thf * psi
        chidot_aux = chi[1] - self.alpha_star * psi
        s_aux = qdot - chidot_aux
        chidd_aux = chidd - self.alpha_star * psidot

        Y = self.shape.regressor(q, qdot, chidot_aux, chidd_aux)
        tau = -self.K * s_aux + Y @ th - self.lambda_D * (Y @ xi)

        xdot = np.empty(self.state_size)
        self.layout.view(xdot, "phi")[:] = phi_dot
        aux_dot = self.layout.view(xdot, "qd_aux")
        aux_dot[0] = aux[1]
        aux_dot[1] = qdd_aux
        chi_dot = self.layout.view(xdot, "chi")
        chi_dot[0] = chi[1]
        chi_dot[1] = chidd
        self.layout.view(xdot, "xi")[:] = -self.lam * xi + self.lam * (Y.T @ s_aux)
        self.layout.view(xdot, "theta_hat")[:] = -self.gamma * (Wst.T @ e)
        freq_rate = 0.0 if self.freeze_freq else -self.gamma_f * float(W1 @ e)
        self.layout.view(xdot, "freq_hat")[:] = freq_rate
        self.layout.view(xdot, "b_psi")[:] = self.b_psi.deriv(x_psi, psi)
        self.layout.view(xdot, "b_psith")[:] = self.b_psi.deriv(x_psith, psi * thf)
        self.layout.view(xdot, "b_y")[:] = self.b_y.deriv(x_y, Y)
        self.layout.view(xdot, "b_v")[:] = self.b_v.deriv(x_v, Y @ th)

        extras = {
            "ref_vel": chidot_aux, "ref_acc": chidd_aux, "s": s_aux, "qd": qd,
            "z": phi[0].copy(), "zdot": zdot,
            "theta_hat": th.copy(), "xi": xi.copy(),
            "freq_hat": np.array([thf]),
            "psi": psi, "psidot": psidot, "h": h, "W1": W1,
        }
        return ControlEval(tau, xdot, extras)


class StackedMultiController(ControllerBase):
    variant = "stacked_multi"
    availability = "full"

    def __init__(self, shape, gains: GainSet, traj, coeffs: HurwitzCoeffs,
                 n_star: int, theta_hat0=None, freq_hat0=None, freeze_freq=False):
        super().__init__(shape, gains, traj)
        n_star = int(n_star)
        if n_star < 1:
            raise ConfigError("stacked_multi needs at least one tone (n_star >= 1)")
        if coeffs.ell < 2:
            raise ConfigError("stacked structures need cascade order >= 2")
        gains.validate_positive(
            ("lambda_D", "lam", "alpha_star_star", "kappa_star", "lambda_D_star")
        )
        self.n_star = n_star
        self.K = gains.k_diag(self.n)
        self.Lam = gains.lambda_diag(self.n)
        self.gamma = gains.gamma_diag(self.p_dim)
        self.gamma_f = gains.freq_gains(n_star)
        self.lambda_D = gains.lambda_D
        self.lam = gains.lam
        self.ass = gains.alpha_star_star
        self.a0ss, self.a1ss = gains.star_star_pair()
        self.k0s, self.k1s = gains.kappa_pair()
        self.kappa_s = gains.kappa_star
        self.lambda_D_star = gains.lambda_D_star
        self.refcfg = ReferenceConfig(coeffs, "full_corrected", self.Lam)
        self.theta_hat0 = (
            np.zeros(self.p_dim) if theta_hat0 is None else np.asarray(theta_hat0, float)
        )
        self.freq_hat0 = (
            np.zeros(n_star) if freq_hat0 is None else np.asarray(freq_hat0, float)
        )
        if self.freq_hat0.shape != (n_star,):
            raise ConfigError("freq_hat0 must have one entry per tone")
        self.freeze_freq = bool(freeze_freq)

        if np.any(self.K <= 0.0):
            raise ConfigError("stacked structures need strictly positive K entries")

        hden_tail = hstar_denominator(gains, n_star)  # length 2 n_star
        hden = np.append(hden_tail, 1.0)
        kpoly = np.array([self.k0s, self.k1s, 1.0])
        m = 2 * n_star

        def tile(row):
            return np.repeat(np.asarray(row, float)[None, :], self.n, axis=0)

        # marginal chain absorbing the chi_1 / psi_1 terms of the tone layer:
        # (hden - p^m) / p^m  driven by psi_1
        e_den = np.append(np.zeros(m), 1.0)
        self.f_e = FilterBank(tile(e_den), [tile(hden_tail)], cols=1)

        # chain carrying the tone-regressor drive: hden / (p^m kpoly)
        u_den = poly_mul(e_den, kpoly)
        self.f_u = FilterBank(tile(u_den), [tile(hden)], cols=1)

        # tone regressors W_i = [p^(2i-2) kpoly / hden] psi_2, shared chain
        wi_nums = [poly_mul(np.append(np.zeros(2 * (i - 1)), 1.0), kpoly) for i in range(1, n_star + 1)]
        self.f_w = FilterBank(tile(hden), [tile(n_) for n_ in wi_nums], cols=1)

        # regressor paths: per-joint chains with n_star + 1 outputs
        pl = cascade_poly(coeffs.alphas)
        y_dens, y_nums = [], [[] for _ in range(n_star + 1)]
        for lam_r, k_r in zip(self.Lam, self.K):
            den = poly_mul(hden, pl, [k_r, 1.0])
            y_dens.append(den)
            for i in range(1, n_star + 1):
                y_nums[i - 1].append(
                    lam_r * poly_mul(np.append(np.zeros(2 * (i - 1) + coeffs.ell - 1), 1.0), kpoly)
                )
            y_nums[n_star].append(
                lam_r * poly_mul(np.append(np.zeros(m + coeffs.ell - 1), 1.0), kpoly)
            )
        nums_stacked = [_stack_rows(rows) for rows in y_nums]
        self.b_y = FilterBank(np.vstack(y_dens), nums_stacked, cols=self.p_dim)
        self.b_v = FilterBank(np.vstack(y_dens), nums_stacked, cols=1)

        # collapsed inverse-filter composition: p^2 / kpoly (biproper)
        p2 = np.array([0.0, 0.0, 1.0])
        self.f_outer_w = FilterBank(tile(kpoly), [tile(p2)], cols=self.p_dim)
        self.f_outer_h = FilterBank(tile(kpoly), [tile(p2)], cols=1)

        ell = coeffs.ell
        self.layout.add("phi", ell, self.n)
        self.layout.add("qd_aux", 2, self.n)
        self.layout.add("chi1", 2, self.n)
        self.layout.add("f_e", self.n, m)
        self.layout.add("f_u", self.n, m + 2)
        self.layout.add("f_w", self.n, m)
        self.layout.add("xi", self.p_dim)
        self.layout.add("theta_hat", self.p_dim)
        self.layout.add("freq_hat", n_star)
        self.layout.add("b_y", *self.b_y.state_shape())
        self.layout.add("b_v", *self.b_v.state_shape())
        self.layout.add("outer_w", self.n, self.p_dim, 2)
        self.layout.add("outer_h", self.n, 2)

    def initial_state(self, q0, qdot0, t0=0.0):
        x = np.zeros(self.state_size)
        qd0 = self.traj.eval(t0, 0)
        qd_dot0 = self.traj.eval(t0, 1)
        aux = self.layout.view(x, "qd_aux")
        aux[0] = qd0
        aux[1] = qd_dot0
        chi1 = self.layout.view(x, "chi1")
        chi1[0] = np.asarray(q0, float)
        chi1[1] = np.asarray(qdot0, float)
        self.layout.view(x, "phi")[0] = np.asarray(qdot0, float)
        self.layout.view(x, "theta_hat")[:] = self.theta_hat0
        self.layout.view(x, "freq_hat")[:] = self.freq_hat0
        return x

    def _banked(self, bank, x, joint_filter):
        # joint-shared filters are stored row-per-joint; broadcast helper
        return bank.output(x)

    def evaluate(self, t, q, qdot, x):
        qd = self.traj.eval(t, 0)
        qd_dot = self.traj.eval(t, 1)
        qd_ddot = self.traj.eval(t, 2)
        phi = self.layout.view(x, "phi")
        aux = self.layout.view(x, "qd_aux")
        chi1 = self.layout.view(x, "chi1")
        x_e = self.layout.view(x, "f_e")
        x_u = self.layout.view(x, "f_u")
        x_w = self.layout.view(x, "f_w")
        xi = self.layout.view(x, "xi")
        th = self.layout.view(x, "theta_hat")
        thf = self.layout.view(x, "freq_hat")
        x_y = self.layout.view(x, "b_y")
        x_v = self.layout.view(x, "b_v")
        x_ow = self.layout.view(x, "outer_w")
        x_oh = self.layout.view(x, "outer_h")

        e = (qdot - qd_dot) + self.ass * (q - qd)

        # dynamics-regressor machinery
        by_outs = [self.b_y.output(x_y, k=i) for i in range(self.n_star + 1)]
        bv_outs = [self.b_v.output(x_v, k=i) for i in range(self.n_star + 1)]
        mW = by_outs[self.n_star].copy()
        mh = bv_outs[self.n_star].copy()
        for i in range(self.n_star):
            mW += thf[i] * by_outs[i]
            mh += thf[i] * bv_outs[i]
        Wst = self.f_outer_w.output(x_ow, mW)         # biproper p^2/kpoly
        oh = self.f_outer_h.output(x_oh, mh)
        h = Wst @ th - oh

        qdd_aux = (
            -self.a1ss * aux[1] - self.a0ss * aux[0] + h
            + qd_ddot + self.a1ss * qd_dot + self.a0ss * qd
            - self.lambda_D_star * (Wst @ (Wst.T @ e))
        )
        r1 = qdd_aux - self.a1ss * (qdot - aux[1]) - self.a0ss * (q - aux[0])

        psi1 = q - chi1[0]
        psi1dot = qdot - chi1[1]

        ev = self.f_e.output(x_e)
        evd = self.f_e.output_dot(x_e, psi1)
        evdd = self.f_e.output_ddot(x_e, psi1, psi1dot)

        chi2u = self.f_u.output(x_u)
        chi2ud = self.f_u.output_dot(x_u, np.zeros(self.n))  # relative degree 2

        chi2 = chi1[0] - ev + chi2u
        chi2d = chi1[1] - evd + chi2ud
        psi2 = q - chi2
        psi2dot = qdot - chi2d

        W_i = [self.f_w.output(x_w, psi2, k=i) for i in range(self.n_star)]
        mdrive = np.zeros(self.n)
        for i in range(self.n_star):
            mdrive += thf[i] * W_i[i]
        chi2udd = self.f_u.output_ddot(x_u, mdrive, np.zeros(self.n))
        chi2dd = r1 - evdd + chi2udd

        phi_dot, zdot = cascade_rates(self.refcfg, phi, q, qdot, chi2, chi2d, chi2dd)
        z = phi[0]
        s = qdot - z
        Y = self.shape.regressor(q, qdot, z, zdot)
        tau = -self.K * s + Y @ th - self.lambda_D * (Y @ xi)

        layer_err = psi1dot + self.kappa_s * psi1

        xdot = np.empty(self.state_size)
        self.layout.view(xdot, "phi")[:] = phi_dot
        aux_dot = self.layout.view(xdot, "qd_aux")
        aux_dot[0] = aux[1]
        aux_dot[1] = qdd_aux
        chi1_dot = self.layout.view(xdot, "chi1")
        chi1_dot[0] = chi1[1]
        chi1_dot[1] = r1
        self.layout.view(xdot, "f_e")[:] = self.f_e.deriv(x_e, psi1)
        self.layout.view(xdot, "f_u")[:] = self.f_u.deriv(x_u, mdrive)
        self.layout.view(xdot, "f_w")[:] = self.f_w.deriv(x_w, psi2)
        self.layout.view(xdot, "xi")[:] = -self.lam * xi + self.lam * (Y.T @ s)
        self.layout.view(xdot, "theta_hat")[:] = -self.gamma * (Wst.T @ e)
        thf_dot = self.layout.view(xdot, "freq_hat")
        for i in range(self.n_star):
            thf_dot[i] = 0.0 if self.freeze_freq else -self.gamma_f[i] * float(W_i[i] @ layer_err)
        self.layout.view(xdot, "b_y")[:] = self.b_y.deriv(x_y, Y)
        self.layout.view(xdot, "b_v")[:] = self.b_v.deriv(x_v, Y @ th)
        self.layout.view(xdot, "outer_w")[:] = self.f_outer_w.deriv(x_ow, mW)
        self.layout.view(xdot, "outer_h")[:] = self.f_outer_h.deriv(x_oh, mh)

        extras = {
            "ref_vel": z.copy(), "ref_acc": zdot, "s": s, "qd": qd,
            "theta_hat": th.copy(), "xi": xi.copy(), "freq_hat": thf.copy(),
            "psi1": psi1, "psi2": psi2, "chi2": chi2, "h": h,
        }
        return ControlEval(tau, xdot, extras)
