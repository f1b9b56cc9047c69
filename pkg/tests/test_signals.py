import numpy as np
import pytest

from refcascade.numerics import poly_mul
from refcascade.signals import (
    DisturbanceSpec,
    JointSignal,
    Tone,
    TrajectorySpec,
    annihilator_residual,
    vieta_theta,
)


class TestTrajectory:
    def test_polynomial_derivative_annihilation(self):
        traj = TrajectorySpec.polynomial([(1.0, 2.0, 3.0), (0.5, -1.0, 0.25)])
        assert np.array_equal(traj.eval(1.7, 3), np.zeros(2))

    def test_multisine_second_derivative(self):
        traj = TrajectorySpec.multisine([[(2.0, 3.0, 0.0)], [(1.0, 0.5, 0.7)]])
        t = 0.83
        want0 = -2.0 * 9.0 * np.sin(3.0 * t)
        want1 = -1.0 * 0.25 * np.sin(0.5 * t + 0.7)
        assert np.allclose(traj.eval(t, 2), [want0, want1], atol=1e-12)

    def test_phase_at_zero(self):
        traj = TrajectorySpec.multisine([[(2.0, 1.0, 0.6)]])
        assert abs(traj.eval(0.0, 0)[0] - 2.0 * np.sin(0.6)) < 1e-15

    def test_finite_difference_consistency(self):
        traj = TrajectorySpec(
            [JointSignal(poly=(0.3, -0.1, 0.02, 0.005), tones=(Tone(0.5, 1.3, 0.2),))]
        )
        h = 1e-4
        for k in range(1, 5):
            worst = 0.0
            for t in np.linspace(0.5, 5.0, 23):
                fd = (traj.eval(t + h, k - 1)[0] - traj.eval(t - h, k - 1)[0]) / (2 * h)
                worst = max(worst, abs(fd - traj.eval(t, k)[0]))
            assert worst <= 1e-6

    def test_grid_matches_scalar(self):
        traj = TrajectorySpec(
            [JointSignal(poly=(0.1, 0.2), tones=(Tone(1.0, 2.0, 0.3),), offset=0.5)]
        )
        ts = np.linspace(0.0, 3.0, 11)
        for k in range(4):
            grid = traj.eval_grid(ts, k)
            scalar = np.array([traj.eval(t, k) for t in ts])
            assert np.allclose(grid, scalar, atol=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrajectorySpec([JointSignal(poly=tuple(range(8)))])
        with pytest.raises(ValueError):
            TrajectorySpec([JointSignal(tones=(Tone(1.0, -2.0),))])


class TestDisturbance:
    def test_empty_is_zero(self):
        dist = DisturbanceSpec.zero(2)
        assert np.array_equal(dist.eval(3.2), np.zeros(2))

    def test_bias_only_constant(self):
        dist = DisturbanceSpec.tones([[], []], bias=[0.4, -0.2])
        for t in (0.0, 1.0, 7.7):
            assert np.array_equal(dist.eval(t), [0.4, -0.2])

    def test_single_tone_annihilator_identity(self):
        dist = DisturbanceSpec.tones([[(1.5, 2.0, 0.3)], []])
        for t in np.linspace(0, 5, 17):
            val = dist.eval(t, 2) + 4.0 * dist.eval(t, 0)
            assert np.max(np.abs(val)) < 1e-10

    def test_n_star_counts_distinct(self):
        dist = DisturbanceSpec.tones([[(1.0, 2.0, 0.0), (0.5, 1.0, 0.1)], [(0.7, 2.0, 0.4)]])
        assert dist.n_star == 2
        assert np.allclose(dist.frequencies(), [1.0, 2.0])


class TestVieta:
    def test_single_frequency(self):
        assert np.allclose(vieta_theta([3.0]), [9.0])

    def test_two_frequencies(self):
        theta = vieta_theta([1.0, 2.0])
        assert np.allclose(theta, [4.0, 5.0])

    def test_three_frequencies(self):
        theta = vieta_theta([1.0, 2.0, 3.0])
        assert np.allclose(theta, [36.0, 49.0, 14.0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3001)
        for _ in range(100):
            freqs = rng.uniform(0.2, 5.0, int(rng.integers(1, 5)))
            brute = np.array([1.0])
            for w in freqs:
                brute = poly_mul(brute, [w * w, 1.0])
            theta = vieta_theta(freqs)
            rel = np.abs(theta - brute[:-1]) / np.abs(brute[:-1])
            assert np.max(rel) <= 1e-12

    def test_positive_for_positive_frequencies(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            theta = vieta_theta(rng.uniform(0.1, 4.0, 3))
            assert np.all(theta > 0.0)


class TestAnnihilator:
    def _spec(self):
        return DisturbanceSpec.tones(
            [[(0.5, 1.3, 0.2), (0.3, 2.1, 0.0)], [(0.4, 2.1, 1.0)]]
        )

    def test_matched_parameters_zero_residual(self):
        theta = vieta_theta([1.3, 2.1])
        for t in np.linspace(0, 10, 40):
            assert np.max(np.abs(annihilator_residual(self._spec(), theta, t))) <= 1e-10

    def test_perturbed_parameters_nonzero(self):
        theta = vieta_theta([1.3, 2.1]) * 1.1
        worst = max(
            np.max(np.abs(annihilator_residual(self._spec(), theta, t)))
            for t in np.linspace(0, 10, 40)
        )
        assert worst > 1e-3

    def test_zero_signal_zero_residual(self):
        spec = DisturbanceSpec.zero(2)
        assert np.array_equal(annihilator_residual(spec, [4.0, 5.0], 1.1), np.zeros(2))

    def test_rejects_bias(self):
        spec = DisturbanceSpec.tones([[], []], bias=[1.0, 0.0])
        with pytest.raises(ValueError):
            annihilator_residual(spec, [1.0], 0.0)

    def test_subset_of_tones_annihilated(self):
        # parameters built from two frequencies kill any mix drawn from them
        theta = vieta_theta([0.9, 1.7])
        for tones in ([[(1.0, 0.9, 0.0)], []], [[(1.0, 1.7, 0.3)], [(0.2, 0.9, 0.1)]]):
            spec = DisturbanceSpec.tones(tones)
            worst = max(
                np.max(np.abs(annihilator_residual(spec, theta, t)))
                for t in np.linspace(0, 8, 20)
            )
            assert worst <= 1e-10
