"""
Trajectories, sub-shadows and flow maps
"""

import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from nsflow.core.exceptions import InvalidArgumentError

EventKind = Literal["crossing", "sliding-start", "sliding-exit", "time-jump", "start-on-surface", "repelling-start"]
FlowDirection = Literal["forward", "backward"]
ShadowVerdict = Literal["converged", "subnet-selected", "diverged"]


@dataclass(frozen=True)
class DenseSegment:
    """Continuous piece of a trajectory with its own dense evaluator"""

    t_start: float
    t_end: float
    state_fn: Callable[[np.ndarray], np.ndarray]
    velocity_fn: Callable[[np.ndarray], np.ndarray]
    mode: str = "smooth"

    def covers(self, s: float) -> bool:
        return self.t_start - 1e-14 <= s <= self.t_end + 1e-14


def evaluate_segments(segments: List[DenseSegment], s: np.ndarray, dim: int, attr: str = "state_fn") -> np.ndarray:
    """Evaluate dense segments at times s; boundaries belong to the later segment"""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty((s.size, dim))
    starts = np.array([seg.t_start for seg in segments])
    index = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(segments) - 1)
    for k in np.unique(index):
        mask = index == k
        segment = segments[k]
        clipped = np.clip(s[mask], segment.t_start, segment.t_end)
        out[mask] = getattr(segment, attr)(clipped)
    return out


class TrajectoryEvent(BaseModel):
    """Surface crossing, sliding entry/exit or time jump"""

    time: float
    kind: EventKind
    surface: Optional[int] = None
    state: List[float] = Field(default_factory=list)
    detail: Dict[str, Any] = Field(default_factory=dict)


class Trajectory(BaseModel):
    """
    Absolutely continuous path sampled on increasing times

    States and velocities are (N, n) arrays. When dense segments are present,
    at() and velocity() evaluate them exactly; otherwise samples are linearly
    interpolated.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    events: List[TrajectoryEvent] = Field(default_factory=list)
    meta: Dict[str, Any] = Field(default_factory=dict)
    segments: List[DenseSegment] = Field(default_factory=list, exclude=True)

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=float).reshape(-1)

    @field_validator("states", "velocities", mode="before")
    @classmethod
    def _coerce_states(cls, value: Any) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        return value.reshape(-1, 1) if value.ndim == 1 else value

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()

    def _check_window(self, s: np.ndarray) -> None:
        if np.any(s < self.t_start - 1e-12) or np.any(s > self.t_end + 1e-12):
            raise InvalidArgumentError(
                "time outside trajectory window",
                window=[self.t_start, self.t_end],
                requested=[float(s.min()), float(s.max())],
            )

    def at(self, s: Any) -> np.ndarray:
        """States at the given times, shape (len(s), n)"""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        self._check_window(s)
        if self.segments:
            return evaluate_segments(self.segments, s, self.dim, "state_fn")
        return np.column_stack([np.interp(s, self.times, self.states[:, i]) for i in range(self.dim)])

    def velocity(self, s: Any) -> np.ndarray:
        """Recorded derivative selection at the given times"""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        self._check_window(s)
        if self.segments:
            return evaluate_segments(self.segments, s, self.dim, "velocity_fn")
        index = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, self.times.size - 1)
        return self.velocities[index]

    def sup_gap(self, other: "Trajectory", times: Optional[np.ndarray] = None) -> float:
        """Sup-norm distance over a common sample grid"""
        if times is None:
            lo, hi = max(self.t_start, other.t_start), min(self.t_end, other.t_end)
            times = np.union1d(self.times, other.times)
            times = times[(times >= lo) & (times <= hi)]
        return float(np.max(np.linalg.norm(self.at(times) - other.at(times), axis=1)))

    def event_labels(self, times: Optional[np.ndarray] = None) -> List[str]:
        """Per-row event tag for tabular output on the sample times or the given ones"""
        times = self.times if times is None else np.asarray(times, dtype=float)
        labels = [""] * times.size
        for event in self.events:
            row = int(np.argmin(np.abs(times - event.time)))
            labels[row] = event.kind if not labels[row] else f"{labels[row]}+{event.kind}"
        return labels

    def modulus_violations(
        self, beta_integral: Callable[[float, float], float], tol: float = 1e-8
    ) -> List[Tuple[float, float]]:
        """Adjacent sample pairs where |xi(s) - xi(r)| exceeds the integrated majorant"""
        jumps = np.linalg.norm(np.diff(self.states, axis=0), axis=1)
        bad = []
        for i, jump in enumerate(jumps):
            r, s = float(self.times[i]), float(self.times[i + 1])
            if jump > beta_integral(r, s) + tol:
                bad.append((r, s))
        return bad


class SubShadow(BaseModel):
    """Locally uniform limit candidate extracted from an eps-family of trajectories"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    limit: Trajectory
    eps_used: List[float]
    convergence: List[float]
    verdict: ShadowVerdict
    tolerance: float
    meta: Dict[str, Any] = Field(default_factory=dict)


SolveFunction = Callable[[float, np.ndarray], Trajectory]


class FlowMap:
    """
    Forward flow chi_t(s, x) for s >= t, or backward flow Phi_t(s, x) for s <= t

    Trajectories from the start grid are cached at construction. Off-grid
    starts are solved on demand and cached, so eval is exact rather than
    interpolated; interpolate() gives the grid-interpolated variant. The
    cache may be filled from several threads; concurrent misses on one start
    keep the first stored trajectory.
    """

    def __init__(
        self,
        anchor: float,
        direction: FlowDirection,
        horizon: float,
        solve_fn: SolveFunction,
        starts: Optional[np.ndarray] = None,
        reports: Optional[Dict[str, Any]] = None,
    ):
        if direction == "forward" and horizon < anchor:
            raise InvalidArgumentError("forward flow horizon precedes anchor", anchor=anchor, horizon=horizon)
        if direction == "backward" and horizon > anchor:
            raise InvalidArgumentError("backward flow horizon follows anchor", anchor=anchor, horizon=horizon)
        self.anchor = float(anchor)
        self.direction: FlowDirection = direction
        self.horizon = float(horizon)
        self._solve_fn = solve_fn
        self._cache: Dict[Tuple[float, ...], Trajectory] = {}
        self._lock = threading.Lock()
        self.reports: Dict[str, Any] = dict(reports or {})
        starts = np.zeros((0, 1)) if starts is None else np.asarray(starts, dtype=float)
        self.starts = starts.reshape(-1, 1) if starts.ndim == 1 else starts
        for x in self.starts:
            self.trajectory(x)

    @property
    def window(self) -> Tuple[float, float]:
        return (min(self.anchor, self.horizon), max(self.anchor, self.horizon))

    def with_anchor(self, anchor: float, horizon: Optional[float] = None) -> "FlowMap":
        """Same dynamics anchored at another time, without the start grid"""
        return FlowMap(anchor, self.direction, self.horizon if horizon is None else horizon, self._solve_fn)

    def trajectory(self, x: Any) -> Trajectory:
        key = tuple(np.round(np.atleast_1d(np.asarray(x, dtype=float)), 15))
        with self._lock:
            cached = self._cache.get(key)
        if cached is None:
            solved = self._solve_fn(self.anchor, np.asarray(key, dtype=float))
            with self._lock:
                cached = self._cache.setdefault(key, solved)
        return cached

    def _check_time(self, s: float) -> None:
        lo, hi = self.window
        if not (lo - 1e-12 <= s <= hi + 1e-12):
            raise InvalidArgumentError("time outside flow window", window=[lo, hi], time=s)

    def eval(self, s: float, x: Any) -> np.ndarray:
        """Flow value at time s from x at the anchor"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self._check_time(s)
        if s == self.anchor:
            return x.copy()
        return self.trajectory(x).at(s)[0]

    def velocity(self, s: float, x: Any) -> np.ndarray:
        """d/ds of the flow at (s, x), from the recorded selection"""
        self._check_time(s)
        return self.trajectory(x).velocity(s)[0]

    def interpolate(self, s: float, xs: np.ndarray) -> np.ndarray:
        """Linear interpolation in x between cached grid starts (scalar flows)"""
        if self.starts.shape[1] != 1 or self.starts.shape[0] < 2:
            raise InvalidArgumentError("grid interpolation needs a scalar start grid")
        grid = np.sort(self.starts[:, 0])
        values = np.array([self.eval(s, [x])[0] for x in grid])
        return np.interp(np.asarray(xs, dtype=float), grid, values)


def reverse_time(trajectory: Trajectory) -> Trajectory:
    """
    Map a solution eta of the time-reversed problem back to xi(s) = eta(-s)

    Times are negated and reordered, velocities change sign.
    """
    segments = [
        DenseSegment(
            -seg.t_end,
            -seg.t_start,
            lambda s, seg=seg: seg.state_fn(-np.atleast_1d(np.asarray(s, dtype=float))),
            lambda s, seg=seg: -seg.velocity_fn(-np.atleast_1d(np.asarray(s, dtype=float))),
            seg.mode,
        )
        for seg in reversed(trajectory.segments)
    ]
    events = [event.model_copy(update={"time": -event.time}) for event in reversed(trajectory.events)]
    return Trajectory(
        times=-trajectory.times[::-1],
        states=trajectory.states[::-1],
        velocities=-trajectory.velocities[::-1],
        events=events,
        segments=segments,
        meta={**trajectory.meta, "time_reversed": True},
    )
