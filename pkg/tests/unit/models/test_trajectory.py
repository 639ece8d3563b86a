"""
Test trajectories and flow maps
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.models.trajectory import DenseSegment, FlowMap, Trajectory, TrajectoryEvent, reverse_time


def _ramp(x0: float, speed: float, t0: float = 0.0, t1: float = 1.0) -> Trajectory:
    times = np.linspace(t0, t1, 11)
    return Trajectory(times=times, states=x0 + speed * (times - t0), velocities=np.full(times.size, speed))


def test_sampled_evaluation():
    path = _ramp(1.0, -2.0)
    np.testing.assert_allclose(path.at([0.0, 0.25, 1.0])[:, 0], [1.0, 0.5, -1.0])
    np.testing.assert_allclose(path.velocity(0.55)[:, 0], [-2.0])
    assert path.dim == 1
    assert path.final_state[0] == pytest.approx(-1.0)


def test_window_enforced():
    with pytest.raises(InvalidArgumentError):
        _ramp(0.0, 1.0).at(1.5)


def test_dense_segments_override_samples():
    segments = [
        DenseSegment(0.0, 0.5, lambda s: (s**2)[:, None], lambda s: (2 * s)[:, None]),
        DenseSegment(0.5, 1.0, lambda s: (0.25 + 0 * s)[:, None], lambda s: (0 * s)[:, None], mode="sliding"),
    ]
    path = Trajectory(times=[0.0, 0.5, 1.0], states=[0.0, 0.25, 0.25], velocities=[0.0, 0.0, 0.0], segments=segments)
    assert path.at(0.3)[0, 0] == pytest.approx(0.09)
    assert path.velocity(0.5)[0, 0] == pytest.approx(0.0)
    assert path.velocity(0.4)[0, 0] == pytest.approx(0.8)


def test_sup_gap():
    assert _ramp(0.0, 1.0).sup_gap(_ramp(0.5, 1.0)) == pytest.approx(0.5)


def test_event_labels():
    events = [TrajectoryEvent(time=0.5, kind="crossing"), TrajectoryEvent(time=0.5, kind="sliding-start")]
    path = _ramp(0.0, 1.0).model_copy(update={"events": events})
    assert path.event_labels()[5] == "crossing+sliding-start"


def test_modulus_violations():
    path = _ramp(0.0, 3.0)
    assert path.modulus_violations(lambda r, s: 3.0 * (s - r)) == []
    assert len(path.modulus_violations(lambda r, s: 2.0 * (s - r))) == 10


def test_reverse_time():
    path = _ramp(0.0, 1.0, 0.0, 2.0).model_copy(update={"events": [TrajectoryEvent(time=1.5, kind="crossing")]})
    reversed_path = reverse_time(path)
    assert reversed_path.t_start == pytest.approx(-2.0)
    assert reversed_path.at(-0.5)[0, 0] == pytest.approx(0.5)
    assert reversed_path.velocity(-1.0)[0, 0] == pytest.approx(-1.0)
    assert reversed_path.events[0].time == pytest.approx(-1.5)
    assert reversed_path.meta["time_reversed"]


def test_flow_map_caches_and_evaluates():
    calls = []

    def solve(anchor, x):
        calls.append(float(x[0]))
        return _ramp(float(x[0]), -1.0, anchor, 2.0)

    flow = FlowMap(0.0, "forward", 2.0, solve, starts=np.linspace(-1.0, 1.0, 5))
    assert len(calls) == 5
    assert flow.eval(1.0, [0.5])[0] == pytest.approx(-0.5)
    assert len(calls) == 5
    assert flow.eval(0.0, [0.3])[0] == pytest.approx(0.3)
    np.testing.assert_allclose(flow.interpolate(1.0, [0.25]), [-0.75])
    assert flow.velocity(0.5, [1.0])[0] == pytest.approx(-1.0)
    with pytest.raises(InvalidArgumentError):
        flow.eval(2.5, [0.0])


@pytest.mark.parametrize("direction,horizon", [("forward", -1.0), ("backward", 1.0)])
def test_flow_map_orientation(direction, horizon):
    with pytest.raises(InvalidArgumentError):
        FlowMap(0.0, direction, horizon, lambda anchor, x: _ramp(0.0, 0.0))


def test_with_anchor_drops_start_grid():
    flow = FlowMap(0.0, "forward", 2.0, lambda anchor, x: _ramp(float(x[0]), 1.0, anchor, 2.0), starts=[0.0, 1.0])
    moved = flow.with_anchor(1.0)
    assert moved.starts.shape == (0, 1)
    assert moved.eval(2.0, [0.0])[0] == pytest.approx(1.0)


def test_flow_map_cache_shared_across_threads():
    flow = FlowMap(0.0, "forward", 2.0, lambda anchor, x: _ramp(float(x[0]), 1.0, anchor, 2.0))
    starts = np.repeat(np.linspace(-1.0, 1.0, 8), 25)
    with ThreadPoolExecutor(max_workers=8) as pool:
        trajectories = list(pool.map(lambda x: flow.trajectory([x]), starts))
    assert len({id(t) for t in trajectories}) == 8
    for x, trajectory in zip(starts, trajectories):
        assert trajectory is flow.trajectory([x])
    np.testing.assert_allclose([flow.eval(1.0, [x])[0] for x in starts], starts + 1.0)
