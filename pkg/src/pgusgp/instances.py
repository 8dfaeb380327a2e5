"""Terminal scenarios: map, cranes, tasks, trucks, plus generation and file I/O.

An instance is a fully deterministic function of its generator parameters and
seed. Files are YAML documents with a ``schema: 1`` marker and sections
map/cranes/tasks/trucks/seed/meta; the travel-time matrix is derived, not
stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.sparse.csgraph import floyd_warshall

from .errors import ParameterError

SCHEMA_VERSION = 1

# Task op types (ship operation): 0 = load the ship, 1 = unload the ship.
OP_LOAD = 0
OP_UNLOAD = 1

# Dispatch flow codes: crane->yard, yard->crane, yard->gate.
DT_CRANE_TO_YARD = 0
DT_YARD_TO_CRANE = 1
DT_YARD_TO_GATE = 2


@dataclass
class TerminalMap:
    """Road network with precomputed all-pairs shortest travel times."""

    nodes: list[str]
    edges: list[tuple[str, str, float]]  # directed (u, v, seconds)
    node_index: dict[str, int] = field(init=False, repr=False)
    travel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise ParameterError("map nodes must be unique")
        self.node_index = {name: i for i, name in enumerate(self.nodes)}
        n = len(self.nodes)
        weights = np.full((n, n), np.inf)
        np.fill_diagonal(weights, 0.0)
        for u, v, w in self.edges:
            if u not in self.node_index or v not in self.node_index:
                raise ParameterError(f"edge ({u}, {v}) references an unknown node")
            if w <= 0:
                raise ParameterError(f"edge ({u}, {v}) has non-positive weight {w}")
            weights[self.node_index[u], self.node_index[v]] = min(
                weights[self.node_index[u], self.node_index[v]], w
            )
        self.travel = floyd_warshall(weights)
        if np.isinf(self.travel).any():
            raise ParameterError("map graph is not strongly connected")

    def travel_seconds(self, origin: str, destination: str) -> float:
        return float(self.travel[self.node_index[origin], self.node_index[destination]])


@dataclass(frozen=True)
class Task:
    id: int
    qc_id: int
    start_node: str
    end_node: str
    teu: int
    op_type: int
    dispatch_type: int
    sequence_index: int

    def __post_init__(self) -> None:
        if self.start_node == self.end_node:
            raise ParameterError(f"task {self.id}: start and end node coincide")
        if self.teu not in (1, 2):
            raise ParameterError(f"task {self.id}: teu must be 1 or 2, got {self.teu}")
        if self.op_type not in (OP_LOAD, OP_UNLOAD):
            raise ParameterError(f"task {self.id}: op_type must be 0 or 1, got {self.op_type}")
        if self.dispatch_type not in (DT_CRANE_TO_YARD, DT_YARD_TO_CRANE, DT_YARD_TO_GATE):
            raise ParameterError(f"task {self.id}: bad dispatch_type {self.dispatch_type}")


@dataclass(frozen=True)
class CraneConfig:
    id: int
    kind: str  # "QC" | "YC"
    node: str
    service_min: float
    service_max: float

    def __post_init__(self) -> None:
        if self.kind not in ("QC", "YC"):
            raise ParameterError(f"crane {self.id}: kind must be QC or YC, got {self.kind}")
        if not 0 < self.service_min <= self.service_max:
            raise ParameterError(
                f"crane {self.id}: bad service bounds ({self.service_min}, {self.service_max})"
            )

    @property
    def service_midpoint(self) -> float:
        return 0.5 * (self.service_min + self.service_max)


@dataclass
class Instance:
    """One terminal scenario; validated on construction."""

    map: TerminalMap
    cranes: list[CraneConfig]
    tasks: list[Task]
    truck_nodes: list[str]  # start node per truck id
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.tasks:
            raise ParameterError("instance has no tasks")
        if not self.truck_nodes:
            raise ParameterError("instance has no trucks")
        crane_ids = {c.id for c in self.cranes}
        if len(crane_ids) != len(self.cranes):
            raise ParameterError("duplicate crane ids")
        for crane in self.cranes:
            if crane.node not in self.map.node_index:
                raise ParameterError(f"crane {crane.id} sits on unknown node {crane.node}")
        qc_ids = {c.id for c in self.cranes if c.kind == "QC"}
        for task in self.tasks:
            if task.qc_id not in qc_ids:
                raise ParameterError(f"task {task.id} references unknown QC {task.qc_id}")
            for node in (task.start_node, task.end_node):
                if node not in self.map.node_index:
                    raise ParameterError(f"task {task.id} references unknown node {node}")
        for i, node in enumerate(self.truck_nodes):
            if node not in self.map.node_index:
                raise ParameterError(f"truck {i} starts on unknown node {node}")
        trucks_per_qc = self.meta.get("trucks_per_qc")
        if trucks_per_qc is not None and len(self.truck_nodes) != trucks_per_qc * len(qc_ids):
            raise ParameterError(
                f"truck count {len(self.truck_nodes)} != trucks_per_qc ({trucks_per_qc}) x QCs ({len(qc_ids)})"
            )

    @property
    def total_teu(self) -> int:
        return sum(t.teu for t in self.tasks)

    def crane_by_id(self) -> dict[int, CraneConfig]:
        return {c.id: c for c in self.cranes}


@dataclass(frozen=True)
class GeneratorParams:
    num_qcs: int = 2
    trucks_per_qc: int = 5
    num_tasks: int = 40
    loading_ratio: float = 0.5
    yard_blocks: int = 6
    service_bounds: tuple[float, float] = (60.0, 180.0)

    def __post_init__(self) -> None:
        if self.num_qcs < 1:
            raise ParameterError(f"num_qcs must be >= 1, got {self.num_qcs}")
        if not 1 <= self.trucks_per_qc <= 20:
            raise ParameterError(f"trucks_per_qc must lie in [1, 20], got {self.trucks_per_qc}")
        if self.num_tasks < 1:
            raise ParameterError(f"num_tasks must be >= 1, got {self.num_tasks}")
        if not 0.0 <= self.loading_ratio <= 1.0:
            raise ParameterError(f"loading_ratio must lie in [0, 1], got {self.loading_ratio}")
        if self.yard_blocks < 1:
            raise ParameterError(f"yard_blocks must be >= 1, got {self.yard_blocks}")
        lo, hi = self.service_bounds
        if not 0 < lo <= hi:
            raise ParameterError(f"service_bounds must satisfy 0 < min <= max, got {self.service_bounds}")


ARC_SECONDS_RANGE = (30.0, 120.0)


def _build_map(params: GeneratorParams, rng: np.random.Generator) -> TerminalMap:
    """Three-row grid: berth (QC) row, yard (block) row, gate row.

    Rows are chained left to right; every berth and gate node hangs off a yard
    node, so the graph is strongly connected. Arc times are symmetric draws
    from ARC_SECONDS_RANGE.
    """
    berth = [f"Q{i}" for i in range(params.num_qcs)]
    yard = [f"Y{i}" for i in range(params.yard_blocks)]
    gate = ["G0"]
    nodes = berth + yard + gate

    undirected: list[tuple[str, str]] = []
    for row in (berth, yard, gate):
        undirected.extend((row[i], row[i + 1]) for i in range(len(row) - 1))
    for i, q in enumerate(berth):
        undirected.append((q, yard[i % len(yard)]))
    for i, g in enumerate(gate):
        undirected.append((g, yard[(len(yard) - 1 - i) % len(yard)]))

    edges: list[tuple[str, str, float]] = []
    for u, v in undirected:
        w = float(rng.uniform(*ARC_SECONDS_RANGE))
        edges.append((u, v, w))
        edges.append((v, u, w))
    return TerminalMap(nodes=nodes, edges=edges)


def generate_instance(params: GeneratorParams, seed: int) -> Instance:
    """Deterministic instance construction from (params, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    terminal_map = _build_map(params, rng)
    yard_nodes = [n for n in terminal_map.nodes if n.startswith("Y")]

    cranes = [
        CraneConfig(id=i, kind="QC", node=f"Q{i}", service_min=params.service_bounds[0],
                    service_max=params.service_bounds[1])
        for i in range(params.num_qcs)
    ]
    cranes.extend(
        CraneConfig(id=params.num_qcs + i, kind="YC", node=node,
                    service_min=params.service_bounds[0], service_max=params.service_bounds[1])
        for i, node in enumerate(yard_nodes)
    )

    n_load = round(params.loading_ratio * params.num_tasks)
    load_flags = np.zeros(params.num_tasks, dtype=bool)
    load_flags[rng.permutation(params.num_tasks)[:n_load]] = True

    tasks: list[Task] = []
    sequence_positions = [0] * params.num_qcs
    for task_id in range(params.num_tasks):
        qc_id = task_id % params.num_qcs
        berth_node = f"Q{qc_id}"
        yard_node = yard_nodes[int(rng.integers(len(yard_nodes)))]
        teu = int(rng.integers(1, 3))
        if load_flags[task_id]:
            op, dt = OP_LOAD, DT_YARD_TO_CRANE
            start, end = yard_node, berth_node
        else:
            op, dt = OP_UNLOAD, DT_CRANE_TO_YARD
            start, end = berth_node, yard_node
        tasks.append(
            Task(id=task_id, qc_id=qc_id, start_node=start, end_node=end, teu=teu,
                 op_type=op, dispatch_type=dt, sequence_index=sequence_positions[qc_id])
        )
        sequence_positions[qc_id] += 1

    n_trucks = params.trucks_per_qc * params.num_qcs
    truck_nodes = [yard_nodes[int(rng.integers(len(yard_nodes)))] for _ in range(n_trucks)]

    return Instance(
        map=terminal_map,
        cranes=cranes,
        tasks=tasks,
        truck_nodes=truck_nodes,
        seed=int(seed),
        meta={"loading_ratio": float(params.loading_ratio), "trucks_per_qc": int(params.trucks_per_qc)},
    )


# ---------------------------------------------------------------------------
# File format (schema 1)
# ---------------------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "map": {
            "nodes": list(instance.map.nodes),
            "edges": [[u, v, float(w)] for u, v, w in instance.map.edges],
        },
        "cranes": [
            {"id": c.id, "kind": c.kind, "node": c.node,
             "service_min": float(c.service_min), "service_max": float(c.service_max)}
            for c in instance.cranes
        ],
        "tasks": [
            {"id": t.id, "qc": t.qc_id, "start": t.start_node, "end": t.end_node,
             "teu": t.teu, "op": t.op_type, "dt": t.dispatch_type, "seq": t.sequence_index}
            for t in instance.tasks
        ],
        "trucks": list(instance.truck_nodes),
        "seed": int(instance.seed),
        "meta": dict(instance.meta),
    }


def instance_from_dict(data: dict) -> Instance:
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        raise ParameterError(f"unsupported instance schema {schema!r}")
    terminal_map = TerminalMap(
        nodes=list(data["map"]["nodes"]),
        edges=[(u, v, float(w)) for u, v, w in data["map"]["edges"]],
    )
    cranes = [
        CraneConfig(id=c["id"], kind=c["kind"], node=c["node"],
                    service_min=float(c["service_min"]), service_max=float(c["service_max"]))
        for c in data["cranes"]
    ]
    tasks = [
        Task(id=t["id"], qc_id=t["qc"], start_node=t["start"], end_node=t["end"],
             teu=t["teu"], op_type=t["op"], dispatch_type=t["dt"], sequence_index=t["seq"])
        for t in data["tasks"]
    ]
    return Instance(
        map=terminal_map,
        cranes=cranes,
        tasks=tasks,
        truck_nodes=list(data["trucks"]),
        seed=int(data["seed"]),
        meta=dict(data.get("meta", {})),
    )


def save_instance(instance: Instance, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(instance_to_dict(instance), sort_keys=True))


def load_instance(path: str | Path) -> Instance:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: not an instance file")
    return instance_from_dict(data)


# ---------------------------------------------------------------------------
# Dataset directory layout: dataset-<k>/{train,test}/instance-<i>
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetParams:
    """Per-dataset ranges; per-instance values are drawn from these."""

    num_qcs: int = 2
    num_tasks: int = 40
    yard_blocks: int = 6
    service_bounds: tuple[float, float] = (60.0, 180.0)
    loading_ratio_range: tuple[float, float] = (0.25, 0.75)
    trucks_per_qc_range: tuple[int, int] = (5, 7)


@dataclass
class Dataset:
    id: int
    train: list[Instance]
    test: list[Instance]


def generate_dataset(
    out_dir: str | Path,
    dataset_id: int,
    seed: int,
    n_train: int = 50,
    n_test: int = 50,
    params: DatasetParams = DatasetParams(),
) -> Path:
    """Write one dataset directory; deterministic in (dataset_id, seed, params)."""
    root = Path(out_dir) / f"dataset-{dataset_id}"
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(dataset_id)]))
    for split, count in (("train", n_train), ("test", n_test)):
        for i in range(1, count + 1):
            ratio = float(rng.uniform(*params.loading_ratio_range))
            trucks = int(rng.integers(params.trucks_per_qc_range[0], params.trucks_per_qc_range[1] + 1))
            instance_seed = int(rng.integers(0, 2**63 - 1))
            instance = generate_instance(
                GeneratorParams(
                    num_qcs=params.num_qcs,
                    trucks_per_qc=trucks,
                    num_tasks=params.num_tasks,
                    loading_ratio=ratio,
                    yard_blocks=params.yard_blocks,
                    service_bounds=params.service_bounds,
                ),
                seed=instance_seed,
            )
            save_instance(instance, root / split / f"instance-{i}")
    return root


def load_dataset(data_root: str | Path, dataset_id: int) -> Dataset:
    root = Path(data_root) / f"dataset-{dataset_id}"
    if not root.is_dir():
        raise ParameterError(f"dataset directory not found: {root}")
    splits: dict[str, list[Instance]] = {}
    for split in ("train", "test"):
        split_dir = root / split
        files = sorted(split_dir.glob("instance-*"), key=lambda p: int(p.name.split("-")[1]))
        if not files:
            raise ParameterError(f"no instances under {split_dir}")
        splits[split] = [load_instance(p) for p in files]
    return Dataset(id=dataset_id, train=splits["train"], test=splits["test"])
