"""Desired-trajectory and disturbance generators.

Signals are sums of a per-joint polynomial in time and a per-joint bank of
sinusoidal tones, so every derivative of every order is available in closed
form.  That exactness matters twice: the reference-dynamics oracle needs
high-order derivatives, and the tone-annihilator identities are checked
pointwise.

A multi-tone signal with distinct frequencies ``w_1..w_m`` is annihilated by
the even-order differential operator ``prod_i (d^2/dt^2 + w_i^2)``.  Expanding
that product gives coefficients ``theta_1..theta_m`` (elementary symmetric
functions of the squared frequencies) which are exactly the unknowns the
tone-adaptive controllers estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tone",
    "JointSignal",
    "TrajectorySpec",
    "DisturbanceSpec",
    "vieta_theta",
    "annihilator_residual",
]


@dataclass(frozen=True)
class Tone:
    """One sinusoidal component ``amp * sin(omega t + phase)``."""

    amp: float
    omega: float
    phase: float = 0.0

    def eval(self, t, order: int) -> float:
        # d^k/dt^k [A sin(wt+p)] = A w^k sin(wt + p + k pi/2)
        return self.amp * self.omega**order * math.sin(
            self.omega * t + self.phase + order * (math.pi / 2.0)
        )


@dataclass(frozen=True)
class JointSignal:
    """Polynomial-plus-multisine scalar signal with exact derivatives."""

    poly: tuple = ()
    tones: tuple = ()
    offset: float = 0.0

    def eval(self, t, order: int = 0) -> float:
        val = 0.0
        if order == 0:
            val += self.offset
        for k in range(order, len(self.poly)):
            # d^order/dt^order of c_k t^k  ->  c_k k!/(k-order)! t^(k-order)
            fac = math.perm(k, order)
            val += self.poly[k] * fac * t ** (k - order)
        for tone in self.tones:
            val += tone.eval(t, order)
        return val


class _SignalVector:
    """Common base for per-joint signal collections."""

    def __init__(self, joints):
        self.joints = tuple(joints)
        # flattened tone tables for vectorized evaluation
        amps, omegas, phases, owner = [], [], [], []
        for j, joint in enumerate(self.joints):
            for tone in joint.tones:
                amps.append(tone.amp)
                omegas.append(tone.omega)
                phases.append(tone.phase)
                owner.append(j)
        self._tone_amp = np.array(amps)
        self._tone_w = np.array(omegas)
        self._tone_ph = np.array(phases)
        self._tone_owner = np.array(owner, dtype=int)
        self._order_cache: dict = {}

    @property
    def n(self) -> int:
        return len(self.joints)

    def _tables(self, order: int):
        cached = self._order_cache.get(order)
        if cached is None:
            width = max((len(j.poly) for j in self.joints), default=0) - order
            poly = np.zeros((self.n, max(width, 0)))
            for j, joint in enumerate(self.joints):
                for k in range(order, len(joint.poly)):
                    poly[j, k - order] = joint.poly[k] * math.perm(k, order)
            offs = np.array(
                [j.offset if order == 0 else 0.0 for j in self.joints]
            )
            tone_gain = self._tone_amp * self._tone_w**order
            tone_shift = self._tone_ph + order * (math.pi / 2.0)
            cached = (poly, offs, tone_gain, tone_shift)
            self._order_cache[order] = cached
        return cached

    def eval(self, t, order: int = 0) -> np.ndarray:
        poly, offs, tone_gain, tone_shift = self._tables(order)
        out = offs.copy()
        if poly.shape[1]:
            tp = 1.0
            for c in range(poly.shape[1]):
                out += poly[:, c] * tp
                tp *= t
        if tone_gain.size:
            vals = tone_gain * np.sin(self._tone_w * t + tone_shift)
            out += np.bincount(self._tone_owner, weights=vals, minlength=self.n)
        return out

    def eval_grid(self, t, order: int = 0) -> np.ndarray:
        """Vectorized evaluation over a time array; returns (len(t), n)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros((t.size, self.n))
        for j, joint in enumerate(self.joints):
            acc = out[:, j]
            if order == 0:
                acc += joint.offset
            for k in range(order, len(joint.poly)):
                acc += joint.poly[k] * math.perm(k, order) * t ** (k - order)
            for tone in joint.tones:
                acc += tone.amp * tone.omega**order * np.sin(
                    tone.omega * t + tone.phase + order * (math.pi / 2.0)
                )
        return out


class TrajectorySpec(_SignalVector):
    """Desired position q_d(t), one :class:`JointSignal` per joint.

    Polynomial degree is capped at 6; tone frequencies must be positive.
    """

    MAX_POLY_DEGREE = 6

    def __init__(self, joints):
        super().__init__(joints)
        for j in self.joints:
            if len(j.poly) > self.MAX_POLY_DEGREE + 1:
                raise ValueError("polynomial degree above 6 is not supported")
            for tone in j.tones:
                if tone.omega <= 0.0:
                    raise ValueError("tone frequencies must be positive")

    @classmethod
    def polynomial(cls, coeffs_per_joint):
        return cls([JointSignal(poly=tuple(c)) for c in coeffs_per_joint])

    @classmethod
    def multisine(cls, tones_per_joint, offsets=None):
        offsets = offsets if offsets is not None else [0.0] * len(tones_per_joint)
        return cls(
            [
                JointSignal(tones=tuple(Tone(*t) for t in tones), offset=off)
                for tones, off in zip(tones_per_joint, offsets)
            ]
        )

    @classmethod
    def constant(cls, values):
        return cls([JointSignal(offset=float(v)) for v in values])


class DisturbanceSpec(_SignalVector):
    """Reference torque input tau_star(t): per-joint bias plus tones.

    Tone frequencies must be positive and, across the whole spec, the set of
    distinct frequencies defines ``n_star``.
    """

    def __init__(self, joints):
        super().__init__(joints)
        for j in self.joints:
            for tone in j.tones:
                if tone.omega <= 0.0:
                    raise ValueError("tone frequencies must be positive")

    @classmethod
    def zero(cls, n):
        return cls([JointSignal() for _ in range(n)])

    @classmethod
    def tones(cls, tones_per_joint, bias=None):
        bias = bias if bias is not None else [0.0] * len(tones_per_joint)
        return cls(
            [
                JointSignal(tones=tuple(Tone(*t) for t in tones), offset=float(b))
                for tones, b in zip(tones_per_joint, bias)
            ]
        )

    def frequencies(self) -> np.ndarray:
        """Sorted distinct tone frequencies across all joints."""
        freqs = sorted({tone.omega for j in self.joints for tone in j.tones})
        return np.array(freqs)

    @property
    def n_star(self) -> int:
        return self.frequencies().size


def vieta_theta(frequencies) -> np.ndarray:
    """Expansion coefficients of ``prod_i (x + w_i^2)``, leading 1 excluded.

    Returns ``theta`` ordered so that ``theta[0]`` (theta_1) is the constant
    term, i.e. the product of all squared frequencies, and ``theta[-1]``
    (theta_m) is the sum of the squared frequencies.  All entries are
    positive for real distinct positive frequencies.
    """
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.size < 1:
        raise ValueError("at least one frequency is required")
    poly = np.array([1.0])
    for w in freqs:
        poly = np.convolve(poly, np.array([w * w, 1.0]))
    return poly[:-1]


def annihilator_residual(spec: DisturbanceSpec, thetas, t) -> np.ndarray:
    """Evaluate ``theta_1 u + theta_2 u'' + ... + theta_m u^(2m-2) + u^(2m)``.

    ``u`` is the disturbance signal; the residual is zero for every t exactly
    when ``thetas`` are the expansion coefficients of the signal's tone
    frequencies.  The signal must be bias-free and contain at most
    ``len(thetas)`` distinct tones.
    """
    thetas = np.asarray(thetas, dtype=float)
    m = thetas.size
    if any(j.offset != 0.0 for j in spec.joints):
        raise ValueError("annihilator residual is defined for bias-free signals")
    if spec.n_star > m:
        raise ValueError("signal has more distinct tones than parameters")
    out = spec.eval(t, 2 * m)
    for i in range(m):
        out = out + thetas[i] * spec.eval(t, 2 * i)
    return out
