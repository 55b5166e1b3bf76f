"""The synchronous skewed-voting update rule and its trajectory analysis.

Each step smooths every label's indicator mask with the voting operator, adds
the label's skew field, and assigns each pixel the smallest label attaining
the maximal vote. Trajectories over a finite domain are eventually periodic;
``run`` finds the transient and cycle.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .domain import (
    DomainSpec,
    DomainMismatchError,
    LabelField,
    RealField,
    _crossings_array,
)
from .operators import VotingOperator


class DetectMode(Enum):
    """Cycle detection strategy.

    LAST_TWO compares each new state against the previous two; it is sound
    whenever cycle lengths are known to be at most 2 (self-adjoint operators,
    or quasi-self-adjoint ones with symmetric B). FULL_HISTORY hashes every
    state and finds the true transient and cycle for arbitrary operators.
    """

    LAST_TWO = "last-two"
    FULL_HISTORY = "full-history"


@dataclass(frozen=True)
class SkewStack:
    """Per-label additive vote offsets: one real field per label."""

    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != self.domain.ndim + 1 or arr.shape[1:] != self.domain.dims:
            raise ValueError(
                f"skew stack must have shape (M, {self.domain.dims}), got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise ValueError("skew stack needs at least one label")
        arr = np.ascontiguousarray(arr).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def num_labels(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def zeros(cls, domain: DomainSpec, num_labels: int) -> "SkewStack":
        return cls(domain, np.zeros((num_labels,) + domain.dims))

    @classmethod
    def from_fields(cls, fields: Sequence[RealField]) -> "SkewStack":
        if not fields:
            raise ValueError("need at least one skew field")
        domain = fields[0].domain
        for f in fields[1:]:
            domain.require_same(f.domain, "skew stack")
        return cls(domain, np.stack([f.values for f in fields]))

    def field(self, label: int) -> RealField:
        return RealField(self.domain, self.values[label - 1])


@dataclass(frozen=True)
class AmConfig:
    """A voting operator, skew stack, and iteration policy."""

    operator: VotingOperator
    skews: SkewStack
    max_iterations: int | None = None
    detect_mode: DetectMode = DetectMode.FULL_HISTORY

    def __post_init__(self):
        self.operator.domain.require_same(self.skews.domain, "configuration")
        if self.max_iterations is None:
            default = 10 * self.operator.domain.size * self.skews.num_labels
            object.__setattr__(self, "max_iterations", default)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def domain(self) -> DomainSpec:
        return self.operator.domain

    @property
    def num_labels(self) -> int:
        return self.skews.num_labels


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration metrics, recorded for the state reached at `iteration`."""

    iteration: int
    boundary_crossings: int
    pixels_changed: int
    nonempty_masks: int


@dataclass(frozen=True)
class CycleReport:
    """Outcome of iterating the update rule from one initial state.

    ``transient`` is the number of iterations before the cycle is entered and
    ``cycle_length`` its period (1 means convergence to a fixed point; 0 means
    the iteration budget ran out before any repetition was seen).
    """

    transient: int
    cycle_length: int
    cycle_states: tuple[LabelField, ...]
    converged: bool
    iterations_run: int
    trace: tuple[int, ...]
    records: tuple[IterationRecord, ...]
    final_state: LabelField

    def __post_init__(self):
        if self.converged != (self.cycle_length == 1):
            raise ValueError("converged must mean cycle_length == 1")


@dataclass(frozen=True)
class TcaParams:
    """Threshold form of a two-label configuration: the second label wins at a
    pixel exactly when its smoothed vote plus the offset is positive."""

    operator: VotingOperator
    b: RealField


def _check_state(state: LabelField, config: AmConfig) -> None:
    config.domain.require_same(state.domain, "state")
    if state.num_labels != config.num_labels:
        raise DomainMismatchError(
            f"state has {state.num_labels} labels, configuration has "
            f"{config.num_labels}"
        )


def _advance(labels: np.ndarray, config: AmConfig, label_range: np.ndarray) -> np.ndarray:
    masks = (labels[np.newaxis] == label_range).astype(np.float64)
    votes = config.operator.apply_many(masks) + config.skews.values
    # argmax returns the first maximal index: ties break to the smallest label
    return (votes.argmax(axis=0) + 1).astype(np.int32)


def step(state: LabelField, config: AmConfig) -> LabelField:
    """One synchronous update: all masks are read from the input state."""
    _check_state(state, config)
    label_range = np.arange(1, config.num_labels + 1, dtype=np.int32)
    label_range = label_range.reshape((config.num_labels,) + (1,) * config.domain.ndim)
    return LabelField(state.domain, _advance(state.labels, config, label_range),
                      state.num_labels)


def _digest(labels: np.ndarray) -> bytes:
    return hashlib.blake2b(labels.tobytes(), digest_size=16).digest()


def run(
    state0: LabelField,
    config: AmConfig,
    on_state: Callable[[int, LabelField], None] | None = None,
) -> CycleReport:
    """Iterate the update rule until a cycle is found or the budget runs out.

    ``on_state`` is invoked with (iteration, state) for every state reached,
    including iteration 0.
    """
    _check_state(state0, config)
    domain = config.domain
    m = config.num_labels
    label_range = np.arange(1, m + 1, dtype=np.int32).reshape((m,) + (1,) * domain.ndim)

    def wrap(arr: np.ndarray) -> LabelField:
        return LabelField(domain, arr, m)

    def record(iteration: int, labels: np.ndarray, prev: np.ndarray | None) -> IterationRecord:
        changed = 0 if prev is None else int((labels != prev).sum())
        return IterationRecord(
            iteration=iteration,
            boundary_crossings=_crossings_array(labels, domain),
            pixels_changed=changed,
            nonempty_masks=int(np.unique(labels).size),
        )

    labels = np.ascontiguousarray(state0.labels)
    records = [record(0, labels, None)]
    if on_state is not None:
        on_state(0, state0)

    full_history = config.detect_mode is DetectMode.FULL_HISTORY
    history: list[np.ndarray] = [labels]
    seen: dict[bytes, list[int]] = {_digest(labels): [0]}
    prev: np.ndarray | None = None  # state one step behind `labels`

    transient = cycle_len = -1
    iterations = 0
    for i in range(config.max_iterations):
        nxt = np.ascontiguousarray(_advance(labels, config, label_range))
        iterations = i + 1
        records.append(record(iterations, nxt, labels))
        if on_state is not None:
            on_state(iterations, wrap(nxt))

        if full_history:
            key = _digest(nxt)
            hits = seen.get(key)
            if hits is not None:
                # hash hit: confirm with a full comparison before declaring
                for j in hits:
                    if np.array_equal(history[j], nxt):
                        transient = j
                        cycle_len = iterations - j
                        break
                if cycle_len > 0:
                    labels = nxt
                    break
                seen[key].append(iterations)
            else:
                seen[key] = [iterations]
            history.append(nxt)
        else:
            if np.array_equal(nxt, labels):
                transient, cycle_len = i, 1
                history = [labels]
                labels = nxt
                break
            if prev is not None and np.array_equal(nxt, prev):
                transient, cycle_len = i - 1, 2
                history = [prev, labels]
                labels = nxt
                break
            prev = labels
        labels = nxt

    if cycle_len > 0:
        if full_history:
            cycle = tuple(wrap(history[j]) for j in range(transient, transient + cycle_len))
        else:
            cycle = tuple(wrap(arr) for arr in history)
    else:
        transient, cycle_len, cycle = iterations, 0, ()

    return CycleReport(
        transient=transient,
        cycle_length=cycle_len,
        cycle_states=cycle,
        converged=cycle_len == 1,
        iterations_run=iterations,
        trace=tuple(r.boundary_crossings for r in records),
        records=tuple(records),
        final_state=wrap(labels),
    )


def iterate_voting(
    state0: LabelField,
    operator: VotingOperator,
    max_iterations: int | None = None,
    detect_mode: DetectMode = DetectMode.FULL_HISTORY,
) -> CycleReport:
    """Pure voting dynamics: ``run`` with an all-zero skew stack."""
    config = AmConfig(
        operator=operator,
        skews=SkewStack.zeros(operator.domain, state0.num_labels),
        max_iterations=max_iterations,
        detect_mode=detect_mode,
    )
    return run(state0, config)


def to_tca(config: AmConfig) -> TcaParams:
    """Threshold form of a two-label configuration.

    The offset is half of (second skew - first skew - operator applied to the
    all-ones field); with it, ``tca_step`` reproduces ``step`` exactly.
    """
    if config.num_labels != 2:
        raise ValueError("threshold form exists only for two labels")
    ones = np.ones((1,) + config.domain.dims)
    a_ones = config.operator.apply_many(ones)[0]
    b = 0.5 * (config.skews.values[1] - config.skews.values[0] - a_ones)
    return TcaParams(operator=config.operator, b=RealField(config.domain, b))


def tca_step(state: LabelField, params: TcaParams) -> LabelField:
    """One threshold update: label 2 wins strictly positive scores, label 1
    keeps ties (matching the smallest-label tie break of ``step``)."""
    params.operator.domain.require_same(state.domain, "threshold step")
    if state.num_labels != 2:
        raise DomainMismatchError("threshold step needs a two-label state")
    mask2 = (state.labels == 2).astype(np.float64)
    score = params.operator.apply_many(mask2[np.newaxis])[0] + params.b.values
    labels = np.where(score > 0.0, 2, 1).astype(np.int32)
    return LabelField(state.domain, labels, 2)
