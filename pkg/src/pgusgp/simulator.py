"""Event-driven terminal simulation.

Trucks are dispatched by a scoring rule whenever they go idle: every task
still in the pool is scored on an 11-feature snapshot and the minimum-score
task wins (ties fall to the lowest task id). A second task from the same
crane's list that shares the start or end node can ride along while total
load stays within two TEU. Cranes serve their queues strictly first-come
first-served with service times drawn from per-crane streams seeded by
(instance seed, crane id), so a run is a pure function of (instance, rule).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .config import DEFAULT_REFERENCE_RULE, ReferenceRuleWeights
from .errors import ParameterError, SimulationError
from .instances import CraneConfig, Instance, Task
from .trees import SCORE_SENTINEL

DispatchRule = Callable[["FeatureVector"], float]

# Event kinds; completions sort ahead of arrivals at equal timestamps.
_EV_SERVICE = 0
_EV_ARRIVAL = 1

IDLE = "idle"
TRAVELING = "traveling"
WAITING = "waitingAtCrane"
SERVED = "beingServed"


class FeatureVector(NamedTuple):
    """Decision-time snapshot, ordered to match the terminal set."""

    TT: float
    CTN: float
    OT: float
    SNTN: float
    ENTN: float
    SNWTN: float
    ENWTN: float
    DT: float
    RTN: float
    ALT: float
    AUT: float


def reference_rule(
    features: FeatureVector,
    weights: ReferenceRuleWeights = DEFAULT_REFERENCE_RULE,
) -> float:
    """Fixed expert heuristic: travel plus crane-congestion terms, lower wins."""
    return (
        weights.travel * features.TT
        + weights.waiting * features.SNWTN
        + weights.bound * features.CTN
        + weights.remaining * features.RTN
    )


@dataclass
class TracePoint:
    """One recorded dispatch decision: candidate ids, features and rule scores."""

    task_ids: list[int]
    features: list[FeatureVector]
    scores: list[float]


@dataclass
class SimResult:
    objective: float  # TEU per hour
    makespan_seconds: float
    completed_tasks: int
    trace: list[TracePoint] | None = None


@dataclass
class _CraneState:
    config: CraneConfig
    rng: np.random.Generator
    queue: deque = field(default_factory=deque)  # (stage_kind, task, truck_id)
    busy: bool = False
    current: tuple | None = None
    load_count: int = 0
    load_seconds: float = 0.0
    unload_count: int = 0
    unload_seconds: float = 0.0
    remaining_tasks: int = 0
    bound_trucks: set[int] = field(default_factory=set)

    @property
    def alt(self) -> float:
        if self.load_count == 0:
            return self.config.service_midpoint
        return self.load_seconds / self.load_count

    @property
    def aut(self) -> float:
        if self.unload_count == 0:
            return self.config.service_midpoint
        return self.unload_seconds / self.unload_count


@dataclass
class _TruckState:
    id: int
    node: str
    state: str = IDLE
    dest: str | None = None
    plan: deque = field(default_factory=deque)  # (stage_kind, task)
    pending_services: int = 0
    onboard: list[int] = field(default_factory=list)
    assigned: list[int] = field(default_factory=list)


class Simulation:
    """Mutable run state; use :func:`run_simulation` unless tests need access."""

    def __init__(self, instance: Instance, rule: DispatchRule, record_trace: bool = False):
        if instance.seed < 0:
            raise ParameterError("instance seed must be nonnegative")
        self.instance = instance
        self.rule = rule
        self.record_trace = record_trace
        self.trace: list[TracePoint] = []

        self.tasks = {t.id: t for t in instance.tasks}
        self.pool: list[int] = sorted(self.tasks)
        self.cranes: dict[int, _CraneState] = {}
        self.crane_at_node: dict[str, _CraneState] = {}
        for config in instance.cranes:
            state = _CraneState(
                config=config,
                rng=np.random.default_rng(np.random.SeedSequence([instance.seed, config.id])),
            )
            self.cranes[config.id] = state
            if config.node in self.crane_at_node:
                raise ParameterError(f"two cranes share node {config.node}")
            self.crane_at_node[config.node] = state
        for task in instance.tasks:
            self.cranes[task.qc_id].remaining_tasks += 1

        self.trucks = [
            _TruckState(id=i, node=node) for i, node in enumerate(instance.truck_nodes)
        ]
        self.now = 0.0
        self.makespan = 0.0
        self.completed = 0
        self._heap: list[tuple[float, int, int, int]] = []
        self._seq = 0

    # -- features ----------------------------------------------------------

    def _node_counts(self) -> tuple[dict[str, int], dict[str, int]]:
        occupancy: dict[str, int] = {}
        waiting: dict[str, int] = {}
        for truck in self.trucks:
            where = truck.dest if truck.state == TRAVELING else truck.node
            occupancy[where] = occupancy.get(where, 0) + 1
            if truck.state == WAITING:
                waiting[truck.node] = waiting.get(truck.node, 0) + 1
        return occupancy, waiting

    def _features(
        self,
        truck: _TruckState,
        task: Task,
        occupancy: dict[str, int],
        waiting: dict[str, int],
    ) -> FeatureVector:
        crane = self.cranes[task.qc_id]
        return FeatureVector(
            TT=self.instance.map.travel_seconds(truck.node, task.start_node),
            CTN=float(len(crane.bound_trucks)),
            OT=float(task.op_type),
            SNTN=float(occupancy.get(task.start_node, 0)),
            ENTN=float(occupancy.get(task.end_node, 0)),
            SNWTN=float(waiting.get(task.start_node, 0)),
            ENWTN=float(waiting.get(task.end_node, 0)),
            DT=float(task.dispatch_type),
            RTN=float(crane.remaining_tasks),
            ALT=crane.alt,
            AUT=crane.aut,
        )

    def compute_features(self, truck_id: int, task_id: int) -> FeatureVector:
        """Feature snapshot for one (truck, candidate task) pair, current state."""
        occupancy, waiting = self._node_counts()
        return self._features(self.trucks[truck_id], self.tasks[task_id], occupancy, waiting)

    # -- dispatch ----------------------------------------------------------

    def _score(self, features: FeatureVector) -> float:
        value = self.rule(features)
        return value if math.isfinite(value) else SCORE_SENTINEL

    def _dispatch(self, truck: _TruckState) -> None:
        truck.state = IDLE
        truck.dest = None
        if not self.pool:
            return
        occupancy, waiting = self._node_counts()
        candidates = [self.tasks[i] for i in self.pool]
        features = [self._features(truck, t, occupancy, waiting) for t in candidates]
        scores = [self._score(f) for f in features]
        if self.record_trace:
            self.trace.append(
                TracePoint(task_ids=[t.id for t in candidates], features=features, scores=scores)
            )
        best = min(range(len(candidates)), key=lambda i: (scores[i], candidates[i].id))
        primary = candidates[best]
        chosen = [primary]
        if primary.teu == 1:
            merge = [
                i
                for i, t in enumerate(candidates)
                if t.id != primary.id
                and t.teu == 1
                and t.qc_id == primary.qc_id
                and (t.start_node == primary.start_node or t.end_node == primary.end_node)
            ]
            if merge:
                pick = min(merge, key=lambda i: (scores[i], candidates[i].id))
                chosen.append(candidates[pick])
        for task in chosen:
            self.pool.remove(task.id)
            self.cranes[task.qc_id].bound_trucks.add(truck.id)
            truck.assigned.append(task.id)
            truck.plan.append(("pickup", task))
        for task in chosen:
            truck.plan.append(("dropoff", task))
        self._advance(truck)

    # -- movement and service ----------------------------------------------

    def _schedule(self, when: float, kind: int, entity: int) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (when, kind, entity, self._seq))

    def _advance(self, truck: _TruckState) -> None:
        """Move the truck toward its next stage, or hand it back to dispatch."""
        if not truck.plan:
            self._dispatch(truck)
            return
        node = self._stage_node(truck.plan[0])
        if truck.node == node:
            self._enqueue_here(truck)
        else:
            truck.state = TRAVELING
            truck.dest = node
            self._schedule(self.now + self.instance.map.travel_seconds(truck.node, node),
                           _EV_ARRIVAL, truck.id)

    @staticmethod
    def _stage_node(stage: tuple) -> str:
        kind, task = stage
        return task.start_node if kind == "pickup" else task.end_node

    def _enqueue_here(self, truck: _TruckState) -> None:
        """Queue every consecutive leading stage sited at the truck's node."""
        node = truck.node
        crane = self.crane_at_node.get(node)
        stages = []
        while truck.plan and self._stage_node(truck.plan[0]) == node:
            stages.append(truck.plan.popleft())
        if crane is None:
            # Craneless nodes (gates) need no handling equipment: instant ops.
            for kind, task in stages:
                self._apply_stage(truck, kind, task)
            self._advance(truck)
            return
        truck.state = WAITING
        truck.pending_services = len(stages)
        for kind, task in stages:
            crane.queue.append((kind, task, truck.id))
        self._crane_try_start(crane)

    def _crane_try_start(self, crane: _CraneState) -> None:
        if crane.busy or not crane.queue:
            return
        kind, task, truck_id = crane.queue.popleft()
        duration = float(crane.rng.uniform(crane.config.service_min, crane.config.service_max))
        crane.busy = True
        crane.current = (kind, task, truck_id, duration)
        self.trucks[truck_id].state = SERVED
        self._schedule(self.now + duration, _EV_SERVICE, crane.config.id)

    def _apply_stage(self, truck: _TruckState, kind: str, task: Task) -> None:
        if kind == "pickup":
            truck.onboard.append(task.id)
            if sum(self.tasks[t].teu for t in truck.onboard) > 2:
                raise SimulationError(f"truck {truck.id} exceeded 2 TEU onboard")
        else:
            truck.onboard.remove(task.id)
            truck.assigned.remove(task.id)
            crane = self.cranes[task.qc_id]
            crane.remaining_tasks -= 1
            if not any(self.tasks[t].qc_id == task.qc_id for t in truck.assigned):
                crane.bound_trucks.discard(truck.id)
            self.completed += 1
            if self.now > self.makespan:
                self.makespan = self.now

    def _on_service_complete(self, crane: _CraneState) -> None:
        kind, task, truck_id, duration = crane.current
        crane.current = None
        crane.busy = False
        if kind == "pickup":  # container lifted onto the truck
            crane.load_count += 1
            crane.load_seconds += duration
        else:
            crane.unload_count += 1
            crane.unload_seconds += duration
        truck = self.trucks[truck_id]
        self._apply_stage(truck, kind, task)
        truck.pending_services -= 1
        if truck.pending_services > 0:
            truck.state = WAITING
        else:
            self._advance(truck)
        self._crane_try_start(crane)

    def _on_arrival(self, truck: _TruckState) -> None:
        truck.node = truck.dest
        truck.dest = None
        self._enqueue_here(truck)

    # -- main loop -----------------------------------------------------------

    def run(self) -> SimResult:
        for truck in self.trucks:
            self._dispatch(truck)
        while self._heap:
            when, kind, entity, _ = heapq.heappop(self._heap)
            self.now = when
            if kind == _EV_SERVICE:
                self._on_service_complete(self.cranes[entity])
            else:
                self._on_arrival(self.trucks[entity])
        if self.completed != len(self.tasks):
            stuck = [t.id for t in self.trucks if t.state != IDLE]
            raise SimulationError(
                f"simulation stalled at t={self.now:.1f}s: {self.completed}/{len(self.tasks)} "
                f"tasks done, pool={self.pool}, busy trucks={stuck}"
            )
        objective = self.instance.total_teu / (self.makespan / 3600.0)
        return SimResult(
            objective=objective,
            makespan_seconds=self.makespan,
            completed_tasks=self.completed,
            trace=self.trace if self.record_trace else None,
        )


def run_simulation(instance: Instance, rule: DispatchRule, record_trace: bool = False) -> SimResult:
    """Evaluate one dispatching rule on one instance (deterministic)."""
    return Simulation(instance, rule, record_trace=record_trace).run()
