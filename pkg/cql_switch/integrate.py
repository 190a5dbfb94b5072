"""
ODE Integration for cql-switch

Adaptive Dormand-Prince 5(4) stepping with dense output, predicate
stopping and sphere-drift diagnostics, built on scipy.integrate.RK45.
"""

import logging
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import RK45, OdeSolution

from cql_switch import settings
from cql_switch.dynamics import stereographic
from cql_switch.exceptions import IntegrationError, raise_from_code

logger = logging.getLogger(__name__)

Field = Callable[[float, np.ndarray], np.ndarray]
Control = Callable[[float], float]
StageTag = Union[str, Callable[[float], str]]


@dataclass
class Segment:
    """Dense interpolant covering [t_start, t_end] with the control and stage in force."""

    t_start: float
    t_end: float
    solution: Optional[OdeSolution]
    control: Optional[Control]
    stage: StageTag

    def beta(self, t: float) -> float:
        return 0.0 if self.control is None else float(self.control(t))

    def tag(self, t: float) -> str:
        return self.stage(t) if callable(self.stage) else self.stage


@dataclass
class Trajectory:
    """
    Time series of an integration.

    `times`/`states` hold the accepted steps (plus a bisected stop time);
    `segments` keep the dense output for resampling.
    """

    times: np.ndarray
    states: np.ndarray
    beta_values: np.ndarray
    stage_tags: List[str]
    limit_reached: bool = True
    segments: List[Segment] = dc_field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def psi_drift(self) -> float:
        """max |Psi(u) - 1| over the samples."""
        if len(self.states) == 0:
            return 0.0
        return float(np.max(np.abs(np.sum(self.states ** 2, axis=1) - 1.0)))

    def state_at(self, t: float) -> np.ndarray:
        """Dense evaluation at a single time inside the trajectory."""
        for seg in self.segments:
            if seg.t_start <= t <= seg.t_end and seg.solution is not None:
                return np.asarray(seg.solution(t))
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.states[idx]

    def sample(self, dt: float = settings.DEFAULT_DT_EXPORT) -> "Trajectory":
        """
        Resample on a uniform grid of step dt from the dense output.

        A time shared by two segments belongs to the later one, so every
        stage transition shows up once. The final time is always included.
        """
        if not self.segments:
            return self
        t0, t1 = self.times[0], self.times[-1]
        n = int(np.floor((t1 - t0) / dt + 1e-9))
        grid = t0 + dt * np.arange(n + 1)
        if t1 - grid[-1] > 1e-12:
            grid = np.append(grid, t1)

        states, betas, tags = [], [], []
        for t in grid:
            seg = self._segment_for(t)
            states.append(seg.solution(t) if seg.solution is not None else self.states[-1])
            betas.append(seg.beta(t))
            tags.append(seg.tag(t))
        return Trajectory(
            times=grid,
            states=np.array(states),
            beta_values=np.array(betas),
            stage_tags=tags,
            limit_reached=self.limit_reached,
            segments=self.segments,
        )

    def _segment_for(self, t: float) -> Segment:
        for seg in reversed(self.segments):
            if seg.t_start <= t <= seg.t_end:
                return seg
        return self.segments[-1] if t > self.segments[-1].t_end else self.segments[0]

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Chain another trajectory starting where this one ends; the shared time is kept once."""
        start = 1 if len(other) and len(self) and other.times[0] <= self.times[-1] else 0
        return Trajectory(
            times=np.concatenate([self.times, other.times[start:]]),
            states=np.concatenate([self.states, other.states[start:]]),
            beta_values=np.concatenate([self.beta_values, other.beta_values[start:]]),
            stage_tags=list(self.stage_tags) + list(other.stage_tags[start:]),
            limit_reached=other.limit_reached,
            segments=self.segments + other.segments,
        )

    def window(self, t_start: float, t_end: float) -> "Trajectory":
        mask = (self.times >= t_start) & (self.times <= t_end)
        return Trajectory(
            times=self.times[mask],
            states=self.states[mask],
            beta_values=self.beta_values[mask],
            stage_tags=[tag for tag, keep in zip(self.stage_tags, mask) if keep],
            limit_reached=self.limit_reached,
            segments=self.segments,
        )

    def to_frame(self, with_stereographic: bool = False) -> pd.DataFrame:
        """Trajectory as a DataFrame with columns t, u1, u2, u3, beta, stage."""
        frame = pd.DataFrame({
            "t": self.times,
            "u1": self.states[:, 0],
            "u2": self.states[:, 1],
            "u3": self.states[:, 2],
            "beta": self.beta_values,
            "stage": self.stage_tags,
        })
        if with_stereographic:
            w = stereographic(self.states.T)
            frame["w1"] = w[0]
            frame["w2"] = w[1]
        return frame


def _single_sample(t0: float, u0: np.ndarray, control: Optional[Control], stage: StageTag,
                   limit_reached: bool) -> Trajectory:
    seg = Segment(t0, t0, None, control, stage)
    return Trajectory(
        times=np.array([t0]),
        states=np.array([u0]),
        beta_values=np.array([seg.beta(t0)]),
        stage_tags=[seg.tag(t0)],
        limit_reached=limit_reached,
        segments=[],
    )


class _Projected:
    """Dense interpolant divided by its norm."""

    def __init__(self, dense):
        self.dense = dense

    def __call__(self, t):
        y = self.dense(t)
        return y / np.linalg.norm(y, axis=0)


class _Stepper:
    """Accumulates accepted RK45 steps into a Trajectory."""

    def __init__(self, field: Field, u0, t0: float, t_bound: float, rtol: float, atol: float,
                 control: Optional[Control], stage: StageTag, renormalize: bool):
        if not (rtol > 0 and atol > 0):
            raise ValueError("rtol and atol must be positive")
        self.solver = RK45(field, t0, np.asarray(u0, dtype=float), t_bound, rtol=rtol, atol=atol)
        self.renormalize = renormalize
        self.control = control
        self.stage = stage
        self.times = [t0]
        self.states = [np.array(u0, dtype=float)]
        self.interpolants = []

    def step(self):
        solver = self.solver
        t_prev, y_prev = solver.t, solver.y.copy()
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(
                f"RK45 step failed at t={t_prev}: {message}",
                "CQ501",
                last_time=t_prev,
                last_state=y_prev,
            )
        dense = solver.dense_output()
        if self.renormalize:
            dense = _Projected(dense)
            solver.y = solver.y / np.linalg.norm(solver.y)
            solver.f = solver.fun(solver.t, solver.y)
        self.interpolants.append(dense)
        self.times.append(solver.t)
        self.states.append(solver.y.copy())

    @property
    def finished(self) -> bool:
        return self.solver.status == "finished"

    def truncate(self, t_stop: float):
        """Replace the last accepted point by the dense state at t_stop."""
        self.times[-1] = t_stop
        self.states[-1] = np.asarray(self.interpolants[-1](t_stop))

    def build(self, limit_reached: bool) -> Trajectory:
        segment = Segment(
            t_start=self.times[0],
            t_end=self.times[-1],
            solution=OdeSolution(np.array(self.times[:-1] + [self.solver.t]), self.interpolants),
            control=self.control,
            stage=self.stage,
        )
        return Trajectory(
            times=np.array(self.times),
            states=np.array(self.states),
            beta_values=np.array([segment.beta(t) for t in self.times]),
            stage_tags=[segment.tag(t) for t in self.times],
            limit_reached=limit_reached,
            segments=[segment],
        )


def _integrate_piece(field: Field, u0: np.ndarray, t0: float, t1: float, rtol: float, atol: float,
                     control: Optional[Control], stage: StageTag, renormalize: bool) -> Trajectory:
    t_left = float(np.nextafter(t1, t0))

    def piece_field(t, u):
        return field(min(t, t_left), u)

    stepper = _Stepper(piece_field, u0, t0, t1, rtol, atol, control, stage, renormalize)
    while not stepper.finished:
        stepper.step()
    return stepper.build(limit_reached=True)


def integrate(
    field: Field,
    u0,
    t0: float,
    t1: float,
    rtol: float = settings.DEFAULT_RTOL,
    atol: float = settings.DEFAULT_ATOL,
    *,
    control: Optional[Control] = None,
    stage: StageTag = settings.STAGE_FREE,
    renormalize: bool = False,
    breakpoints: Sequence[float] = (),
) -> Trajectory:
    """
    Integrate du/dt = field(t, u) over [t0, t1].

    The interval is cut at the interior `breakpoints` and every piece is
    stepped on its own, so a field that jumps there is never sampled
    across the jump. Each piece sees the field's right value at its start
    and its left limit at its end. One call over [t0, t1] and chained
    calls over the pieces therefore give the same states.

    The sphere drift is reported through Trajectory.psi_drift and only
    corrected when `renormalize` projects each accepted step onto |u| = 1.

    Args:
        field: Right-hand side (t, u) -> du/dt
        u0: Initial state
        t0, t1: Interval, t1 >= t0
        rtol, atol: Local error tolerances
        control: Optional t -> beta_t, recorded alongside the states
        stage: Stage tag, or t -> tag
        renormalize: Project steps and dense output onto the unit sphere
        breakpoints: Times where the field may be discontinuous

    Returns:
        Trajectory over [t0, t1], one segment per piece

    Raises:
        IntegrationError: Step-size underflow, carrying the last good state
    """
    if t1 < t0:
        raise_from_code("CQ502", f"t1={t1} precedes t0={t0}")
    u0 = np.asarray(u0, dtype=float)
    if t1 == t0:
        return _single_sample(t0, u0, control, stage, True)

    edges = [t0] + sorted({float(b) for b in breakpoints if t0 < b < t1}) + [t1]
    trajectory = None
    for start, end in zip(edges[:-1], edges[1:]):
        u_start = u0 if trajectory is None else trajectory.final_state
        piece = _integrate_piece(field, u_start, start, end, rtol, atol, control, stage, renormalize)
        trajectory = piece if trajectory is None else trajectory.concat(piece)
    logger.debug("integrated [%g, %g] in %d pieces, %d steps, psi drift %.2e",
                 t0, t1, len(edges) - 1, len(trajectory) - 1, trajectory.psi_drift)
    return trajectory


def integrate_until(
    field: Field,
    u0,
    stop: Callable[[float, np.ndarray], bool],
    t_max: float,
    rtol: float = settings.DEFAULT_RTOL,
    atol: float = settings.DEFAULT_ATOL,
    *,
    t0: float = 0.0,
    sustain: int = 1,
    control: Optional[Control] = None,
    stage: StageTag = settings.STAGE_FREE,
    renormalize: bool = False,
) -> Trajectory:
    """
    Integrate until `stop(t, u)` holds or t0 + t_max is reached.

    With sustain == 1 the first stopping time inside the last step is
    bisected on the dense output down to STOP_TIME_TOL. With sustain > 1
    the predicate must hold on that many consecutive accepted steps and
    the run ends at the last of them.

    Returns:
        Trajectory whose `limit_reached` is False when t_max ran out first
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    u0 = np.asarray(u0, dtype=float)
    if stop(t0, u0):
        return _single_sample(t0, u0, control, stage, True)

    stepper = _Stepper(field, u0, t0, t0 + t_max, rtol, atol, control, stage, renormalize)
    streak = 0
    while not stepper.finished:
        stepper.step()
        t_new, y_new = stepper.times[-1], stepper.states[-1]
        if not stop(t_new, y_new):
            streak = 0
            continue
        streak += 1
        if streak < sustain:
            continue
        if sustain == 1:
            lo, hi = stepper.times[-2], t_new
            dense = stepper.interpolants[-1]
            while hi - lo > settings.STOP_TIME_TOL:
                mid = 0.5 * (lo + hi)
                if stop(mid, dense(mid)):
                    hi = mid
                else:
                    lo = mid
            stepper.truncate(hi)
        logger.debug("stop predicate met at t=%g", stepper.times[-1])
        return stepper.build(limit_reached=True)

    logger.info("stop predicate not met by t=%g", t0 + t_max)
    return stepper.build(limit_reached=False)
