"""Behavioral/genetic characterizations, the unified distance, clustering and
the 1-NN fitness archive.

Two fixed-length vectors describe an individual: a behavior vector of
reference ranks chosen across sampled dispatch decisions, and a node-frequency
vector over the canonical primitive ordering. Their Euclidean distances are
max-normalized and combined with weights (wp, wg) into one metric in [0, 1];
everything downstream (complete-linkage grouping, archive eviction, nearest-
neighbor prediction) runs on that metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PGUConfig
from .errors import ContractError, EmptyArchiveError, ParameterError
from .instances import Instance
from .primitives import N_PRIMITIVES
from .simulator import DispatchRule, FeatureVector, TracePoint, run_simulation
from .trees import Code, Individual, compile_tree

ARCHIVE_CAPACITY = 500


# ---------------------------------------------------------------------------
# Decision situations and the behavior vector
# ---------------------------------------------------------------------------

def _ranks_by_score(scores: list[float]) -> np.ndarray:
    """1-based ranks, ascending score; ties keep candidate order."""
    order = sorted(range(len(scores)), key=lambda i: (scores[i], i))
    ranks = np.empty(len(scores), dtype=np.int64)
    for rank, i in enumerate(order, start=1):
        ranks[i] = rank
    return ranks


@dataclass
class DecisionSituation:
    """Candidate features plus the reference rule's scores and ranks."""

    features: list[FeatureVector]
    ref_scores: np.ndarray
    ref_ranks: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.features)
        if n < 2:
            raise ParameterError("a decision situation needs at least 2 candidates")
        self.ref_scores = np.asarray(self.ref_scores, dtype=float)
        self.ref_ranks = np.asarray(self.ref_ranks, dtype=np.int64)
        if len(self.ref_scores) != n or len(self.ref_ranks) != n:
            raise ParameterError("scores/ranks length mismatch with candidates")
        if sorted(self.ref_ranks.tolist()) != list(range(1, n + 1)):
            raise ParameterError("ranks must be a permutation of 1..n")

    @classmethod
    def from_trace_point(cls, point: TracePoint, cap: int) -> "DecisionSituation":
        ranks = _ranks_by_score(point.scores)
        keep = [i for i in range(len(ranks)) if ranks[i] <= cap]
        return cls(
            features=[point.features[i] for i in keep],
            ref_scores=np.asarray([point.scores[i] for i in keep], dtype=float),
            ref_ranks=_ranks_by_score([point.scores[i] for i in keep]),
        )


def sample_decision_situations(
    instances: list[Instance],
    rule: DispatchRule,
    pcs: int,
    cap: int = 10,
    rng: np.random.Generator | int | None = 0,
) -> list[DecisionSituation]:
    """Trace the reference rule over the training set and sample ``pcs`` points.

    Only decisions with at least two candidates discriminate between rules;
    candidate lists are truncated to the ``cap`` best reference ranks.
    """
    if pcs < 1:
        raise ParameterError(f"pcs must be >= 1, got {pcs}")
    if not instances:
        raise ParameterError("need at least one training instance")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    eligible: list[TracePoint] = []
    for instance in instances:
        result = run_simulation(instance, rule, record_trace=True)
        eligible.extend(p for p in result.trace if len(p.task_ids) >= 2)
    if len(eligible) < pcs:
        raise ParameterError(
            f"only {len(eligible)} eligible decision points for pcs={pcs}; "
            "use larger or more training instances"
        )
    picks = sorted(gen.choice(len(eligible), size=pcs, replace=False).tolist())
    return [DecisionSituation.from_trace_point(eligible[i], cap) for i in picks]


def compute_pc(ind: Individual | Code, situations: list[DecisionSituation]) -> np.ndarray:
    """Reference rank of the candidate the individual picks in each situation."""
    if not situations:
        raise ParameterError("no decision situations provided")
    code = ind.code if isinstance(ind, Individual) else ind
    fn = compile_tree(code)
    pc = np.empty(len(situations), dtype=np.int64)
    for k, situation in enumerate(situations):
        scores = [fn(f) for f in situation.features]
        best = min(range(len(scores)), key=lambda i: (scores[i], i))
        pc[k] = situation.ref_ranks[best]
    return pc


def compute_gc(ind: Individual | Code) -> np.ndarray:
    """Node-type frequencies over the canonical primitive order (sums to 1)."""
    code = ind.code if isinstance(ind, Individual) else ind
    counts = np.bincount(np.asarray(code, dtype=np.int64), minlength=N_PRIMITIVES)
    return counts / len(code)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def pd(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between behavior vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"behavior vector length mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def gd(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between node-frequency vectors (at most sqrt(2))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"frequency vector length mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def pairwise_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All cross distances via the Gram trick; one code path everywhere keeps
    normalized values exactly <= 1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


@dataclass(frozen=True)
class Normalizers:
    """Per-generation distance maxima used to scale both metric components."""

    max_pd: float
    max_gd: float


def compute_normalizers(pc_rows: np.ndarray, gc_rows: np.ndarray) -> Normalizers:
    """Maxima over all pairs of the given vectors (population plus archive)."""
    pc_rows = np.asarray(pc_rows, dtype=float)
    gc_rows = np.asarray(gc_rows, dtype=float)
    if len(pc_rows) < 2:
        return Normalizers(0.0, 0.0)
    return Normalizers(
        max_pd=float(pairwise_euclidean(pc_rows, pc_rows).max()),
        max_gd=float(pairwise_euclidean(gc_rows, gc_rows).max()),
    )


def unified_distances(
    pc_a: np.ndarray,
    gc_a: np.ndarray,
    pc_b: np.ndarray,
    gc_b: np.ndarray,
    cfg: PGUConfig,
    normalizers: Normalizers,
) -> np.ndarray:
    """Weighted normalized distance between two stacks of characterizations."""
    pd_m = pairwise_euclidean(pc_a, pc_b)
    gd_m = pairwise_euclidean(gc_a, gc_b)
    out = np.zeros_like(pd_m)
    if normalizers.max_pd > 0.0:
        out += cfg.wp * (pd_m / normalizers.max_pd)
    if normalizers.max_gd > 0.0:
        out += cfg.wg * (gd_m / normalizers.max_gd)
    return out


def pgu_matrix(
    pc_rows: np.ndarray,
    gc_rows: np.ndarray,
    cfg: PGUConfig,
    normalizers: Normalizers | None = None,
) -> np.ndarray:
    """Symmetric zero-diagonal matrix of unified distances over a population.

    Without explicit normalizers the maxima over the input pairs are used; a
    zero maximum makes the corresponding component vanish for every pair.
    """
    pc_rows = np.asarray(pc_rows, dtype=float)
    gc_rows = np.asarray(gc_rows, dtype=float)
    if len(pc_rows) < 2:
        raise ParameterError("need at least 2 individuals for a distance matrix")
    if len(pc_rows) != len(gc_rows):
        raise ContractError("behavior/frequency row counts differ")
    if normalizers is None:
        normalizers = compute_normalizers(pc_rows, gc_rows)
    matrix = unified_distances(pc_rows, gc_rows, pc_rows, gc_rows, cfg, normalizers)
    matrix = 0.5 * (matrix + matrix.T)  # exact symmetry against fp drift
    np.fill_diagonal(matrix, 0.0)
    return matrix


# ---------------------------------------------------------------------------
# Complete-linkage clustering
# ---------------------------------------------------------------------------

def cluster_complete_linkage(matrix: np.ndarray, delta: float) -> list[tuple[int, ...]]:
    """Agglomerate while the smallest complete-linkage distance stays < delta.

    Complete linkage lets the cluster distance matrix update as an elementwise
    maximum of the merged rows. Ties pick the lexicographically smallest pair
    of member tuples, so the partition is deterministic. Every intra-cluster
    pairwise distance ends up < delta.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = len(matrix)
    if matrix.shape != (n, n):
        raise ParameterError("distance matrix must be square")
    clusters: list[tuple[int, ...]] = [(i,) for i in range(n)]
    dist = matrix.copy()
    np.fill_diagonal(dist, np.inf)
    active = list(range(n))

    while len(active) > 1:
        sub = dist[np.ix_(active, active)]
        best = float(sub.min())
        if best >= delta:
            break
        merge_slots: tuple[int, int] | None = None
        merge_key = None
        for i, j in np.argwhere(sub == best):
            if i >= j:
                continue
            slot_a, slot_b = active[int(i)], active[int(j)]
            key = tuple(sorted((clusters[slot_a], clusters[slot_b])))
            if merge_key is None or key < merge_key:
                merge_key = key
                merge_slots = (slot_a, slot_b)
        ia, ib = merge_slots
        merged = tuple(sorted(clusters[ia] + clusters[ib]))
        new_row = np.maximum(dist[ia], dist[ib])
        dist[ia] = new_row
        dist[:, ia] = new_row
        dist[ia, ia] = np.inf
        clusters[ia] = merged
        active.remove(ib)

    return sorted(clusters[i] for i in active)


def select_representative(
    cluster: tuple[int, ...] | list[int],
    matrix: np.ndarray,
    sizes: list[int],
) -> int:
    """Member with minimal mean distance to the rest; ties prefer the smaller
    tree, then the lower index."""
    members = list(cluster)
    if not members:
        raise ParameterError("empty cluster")
    if len(members) == 1:
        return members[0]
    best = None
    best_key = None
    for i in members:
        mean = float(np.mean([matrix[i, j] for j in members if j != i]))
        key = (mean, sizes[i], i)
        if best_key is None or key < best_key:
            best_key = key
            best = i
    return best


# ---------------------------------------------------------------------------
# Surrogate archive
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArchiveSample:
    pc: np.ndarray
    gc: np.ndarray
    fitness: float
    birth_gen: int
    expression: str = ""
    kind: str = "true"


@dataclass
class SurrogateArchive:
    """Append-ordered store of truly evaluated samples, 1-NN queried.

    A new sample whose nearest stored neighbor sits closer than delta replaces
    that neighbor; overflow beyond capacity drops the oldest samples first
    (list order is append order, which is generation order).
    """

    capacity: int = ARCHIVE_CAPACITY
    samples: list[ArchiveSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def pc_rows(self) -> np.ndarray:
        return np.asarray([s.pc for s in self.samples], dtype=float)

    def gc_rows(self) -> np.ndarray:
        return np.asarray([s.gc for s in self.samples], dtype=float)

    def update(
        self,
        new_samples: list[ArchiveSample],
        cfg: PGUConfig,
        normalizers: Normalizers,
    ) -> None:
        """Insert samples one by one with similarity eviction, then cap size."""
        for sample in new_samples:
            if sample.kind != "true":
                raise ContractError("only truly evaluated samples may enter the archive")
            if not np.isfinite(sample.fitness):
                raise ContractError("archive samples must carry finite true fitness")
            if self.samples:
                dists = unified_distances(
                    sample.pc[None, :].astype(float),
                    sample.gc[None, :].astype(float),
                    self.pc_rows(),
                    self.gc_rows(),
                    cfg,
                    normalizers,
                )[0]
                nearest = int(np.argmin(dists))
                if dists[nearest] < cfg.delta:
                    del self.samples[nearest]
            self.samples.append(sample)
            while len(self.samples) > self.capacity:
                del self.samples[0]

    def predict(
        self,
        pc: np.ndarray,
        gc: np.ndarray,
        cfg: PGUConfig,
        normalizers: Normalizers,
    ) -> tuple[float, float]:
        """Fitness of the nearest sample plus that distance; empty archive errors.

        Ties resolve to the earliest-appended sample.
        """
        if not self.samples:
            raise EmptyArchiveError("cannot predict from an empty archive")
        dists = unified_distances(
            np.asarray(pc, dtype=float)[None, :],
            np.asarray(gc, dtype=float)[None, :],
            self.pc_rows(),
            self.gc_rows(),
            cfg,
            normalizers,
        )[0]
        nearest = int(np.argmin(dists))
        return self.samples[nearest].fitness, float(dists[nearest])

    def checkpoint(self, path: str | Path) -> None:
        """Plain-text dump for post-hoc surrogate-quality analysis."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["schema: 1", f"samples: {len(self.samples)}"]
        for s in self.samples:
            pc_text = " ".join(str(int(v)) for v in s.pc)
            gc_text = " ".join(repr(float(v)) for v in s.gc)
            lines.append(f"{s.birth_gen}\t{s.fitness!r}\t{pc_text}\t{gc_text}\t{s.expression}")
        path.write_text("\n".join(lines) + "\n")
