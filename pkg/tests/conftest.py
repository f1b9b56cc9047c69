import numpy as np
import pytest

from refcascade.manipulator import TwoLinkArm
from refcascade.numerics import rk4_step
from refcascade.signals import DisturbanceSpec


@pytest.fixture
def model():
    return TwoLinkArm()


def run_closed_loop(model, controller, dist, duration, dt=1e-3, sample_stride=50):
    """Integrate plant + controller jointly, returning per-sample records.

    Each record is (t, q, qdot, eval) with the controller evaluation taken at
    the sampled state.  Used by controller-level tests; the experiment
    harness has its own richer loop.
    """
    n = model.n
    q0 = controller.traj.eval(0.0, 0)
    qdot0 = np.zeros(n)
    try:
        qdot0 = controller.traj.eval(0.0, 1)
    except Exception:
        pass
    x = np.concatenate([q0, qdot0, controller.initial_state(q0, qdot0, 0.0)])

    def deriv(t, xx):
        q, qdot, cx = xx[:n], xx[n : 2 * n], xx[2 * n :]
        ev = controller.evaluate(t, q, qdot, cx)
        qdd = model.forward_dynamics(q, qdot, ev.tau, dist.eval(t))
        return np.concatenate([qdot, qdd, ev.xdot])

    steps = int(round(duration / dt))
    records = []
    t = 0.0
    for k in range(steps + 1):
        if k % sample_stride == 0 or k == steps:
            q, qdot, cx = x[:n], x[n : 2 * n], x[2 * n :]
            records.append((t, q.copy(), qdot.copy(), controller.evaluate(t, q, qdot, cx)))
        if k == steps:
            break
        x = rk4_step(deriv, x, t, dt)
        t = (k + 1) * dt
    return records


@pytest.fixture
def loop_runner():
    return run_closed_loop


@pytest.fixture
def no_disturbance():
    return DisturbanceSpec.zero(2)
