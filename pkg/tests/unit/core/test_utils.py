"""
Test grids, quadrature, mollifier kernels and JSON output
"""

import numpy as np
import pytest
from scipy import integrate

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.models.trajectory import Trajectory, TrajectoryEvent
from nsflow.schemas.reports import GardingReport
from nsflow.utils.csvio import read_trajectory_csv, write_trajectory_csv
from nsflow.utils.grids import ball_grid, direction_grid, geometric_eps_grid, normalize
from nsflow.utils.jsonio import dumps, read_json, write_json
from nsflow.utils.mollifiers import (
    KERNELS,
    SCALE_LAWS,
    l2_normalized_bump,
    l2_normalized_bump_derivative,
    moment_vanishing,
)
from nsflow.utils.quadrature import loglog_slope, panel_rule, split_breaks


def test_direction_grids_are_unit():
    assert direction_grid(1).tolist() == [[1.0], [-1.0]]
    for dim, count in ((2, 64), (3, 200), (4, 300)):
        grid = direction_grid(dim, count)
        assert grid.shape == (count, dim)
        np.testing.assert_allclose(np.linalg.norm(grid, axis=1), 1.0)


def test_plane_grid_angles():
    grid = direction_grid(2, 4)
    np.testing.assert_allclose(grid, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_normalize_rejects_zero():
    with pytest.raises(InvalidArgumentError):
        normalize(np.zeros(2))


def test_direction_grid_rejects_empty_dimension():
    with pytest.raises(InvalidArgumentError) as caught:
        direction_grid(0)
    assert caught.value.exit_code == 2


def test_eps_grid_decreasing():
    grid = geometric_eps_grid(4, 8)
    assert grid[0] == 2.0**-4 and grid[-1] == 2.0**-8
    assert np.all(np.diff(grid) < 0)


def test_ball_grid_inside_ball():
    cloud = ball_grid(np.array([1.0, -1.0]), 0.5, 11)
    assert np.all(np.linalg.norm(cloud - [1.0, -1.0], axis=1) <= 0.5 + 1e-12)


def test_split_breaks_honors_cuts():
    breaks = split_breaks(0.0, 1.0, [0.3], 0.25)
    assert 0.3 in breaks
    assert np.max(np.diff(breaks)) <= 0.25 + 1e-15


def test_panel_rule_of_kink():
    """Panels split at the kink integrate |x| exactly"""
    nodes, weights = panel_rule(split_breaks(-1.0, 2.0, [0.0], 0.25), 16)
    assert float(np.sum(weights * np.abs(nodes))) == pytest.approx(2.5, abs=1e-13)


def test_loglog_slope_power_law():
    x = np.geomspace(1.0, 100.0, 30)
    assert loglog_slope(x, 3.0 * x**-1.5) == pytest.approx(-1.5)
    assert np.isnan(loglog_slope([1.0], [1.0]))


@pytest.mark.parametrize("kind", sorted(KERNELS))
def test_kernels_have_unit_mass(kind):
    kernel = KERNELS[kind]
    breaks = [-1.0, -0.5, 0.0, 1.0]
    value, _ = integrate.quad(lambda z: float(kernel(np.array(z))), -10.0, 10.0, points=breaks, limit=200)
    assert value == pytest.approx(1.0, abs=1e-8)


def test_moment_vanishing_kernel():
    """Vanishing second moment and a negative tail"""
    second, _ = integrate.quad(lambda z: z**2 * float(moment_vanishing(np.array(z))), -1.0, 1.0)
    assert abs(second) < 1e-9
    assert np.min(moment_vanishing(np.linspace(-0.99, 0.99, 199))) < 0


def test_scale_laws():
    assert SCALE_LAWS["identity"](0.25) == 0.25
    assert SCALE_LAWS["log"](np.exp(-2.0)) == pytest.approx(0.5)


def test_l2_bump_and_derivative():
    square, _ = integrate.quad(lambda z: float(l2_normalized_bump(np.array(z))) ** 2, -1.0, 1.0)
    assert square == pytest.approx(1.0, abs=1e-10)
    z = np.linspace(-0.9, 0.9, 37)
    h = 1e-6
    numeric = (l2_normalized_bump(z + h) - l2_normalized_bump(z - h)) / (2 * h)
    np.testing.assert_allclose(l2_normalized_bump_derivative(z), numeric, atol=1e-6)


def test_json_sorted_and_numpy(tmp_path):
    text = dumps({"b": np.arange(2), "a": 1.5}).decode()
    assert text.index('"a"') < text.index('"b"')
    report = GardingReport(mode="power", alpha=0.75, eps=[0.5, 0.25], values=[1.0, 2.0], slope=-0.25)
    path = write_json(tmp_path / "out" / "g.json", report)
    assert GardingReport.model_validate(read_json(path)) == report


def test_one_sided_kernel_support():
    """Nonzero only on (-1/2, 0)"""
    inside = np.linspace(-0.49, -0.01, 49)
    outside = np.concatenate([np.linspace(-2.0, -0.5, 16), np.linspace(0.0, 2.0, 16)])
    assert np.all(KERNELS["one-sided"](inside) > 0)
    assert np.all(KERNELS["one-sided"](outside) == 0)


def test_trajectory_csv_labels_event_rows(tmp_path):
    times = np.linspace(0.0, 1.0, 3)
    events = [TrajectoryEvent(time=0.5, kind="crossing"), TrajectoryEvent(time=0.5, kind="sliding-start")]
    path = Trajectory(times=times, states=times, velocities=np.ones(3), events=events)
    rows = read_trajectory_csv(write_trajectory_csv(tmp_path / "traj.csv", path, samples=11))
    assert len(rows) == 11
    labelled = [row for row in rows if row["event"]]
    assert [(float(row["s"]), row["event"]) for row in labelled] == [(0.5, "crossing+sliding-start")]
    assert float(labelled[0]["x1"]) == pytest.approx(0.5)
