"""
Trajectory tables
"""

import csv
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from nsflow.core.config import settings
from nsflow.models.trajectory import Trajectory


def output_times(trajectory: Trajectory, samples: Optional[int] = None) -> np.ndarray:
    """Uniform output grid over the trajectory window, event times included"""
    count = int(samples or settings.output_samples)
    grid = np.linspace(trajectory.t_start, trajectory.t_end, count)
    return np.union1d(grid, [e.time for e in trajectory.events])


def trajectory_rows(trajectory: Trajectory, samples: Optional[int] = None) -> List[List[Union[float, str]]]:
    """Rows s, x1..xn, v1..vn, event"""
    times = output_times(trajectory, samples)
    states = trajectory.at(times)
    velocities = trajectory.velocity(times)
    labels = trajectory.event_labels(times)
    return [
        [float(s), *map(float, x), *map(float, v), label]
        for s, x, v, label in zip(times, states, velocities, labels)
    ]


def write_trajectory_csv(path: Union[str, Path], trajectory: Trajectory, samples: Optional[int] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = trajectory.dim
    header = ["s", *[f"x{i + 1}" for i in range(n)], *[f"v{i + 1}" for i in range(n)], "event"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in trajectory_rows(trajectory, samples):
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return path


def read_trajectory_csv(path: Union[str, Path]) -> List[dict]:
    with Path(path).open(newline="") as handle:
        return list(csv.DictReader(handle))
