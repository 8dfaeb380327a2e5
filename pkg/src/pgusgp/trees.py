"""Expression trees for dispatching heuristics.

A tree is a tuple of primitive ids in prefix (depth-first) order; arities are
fixed, so the tuple fully determines the structure. Tuples are hashable and
immutable, which makes individuals cheap to copy, safe to share across
processes, and usable as cache keys for compiled evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError
from .primitives import ARITY, N_PRIMITIVES, N_TERMINALS, NAME_TO_ID, PRIMITIVE_NAMES

Code = tuple[int, ...]

# Non-finite final scores are clamped to this value (worst rank under
# minimum-score selection).
SCORE_SENTINEL = 1e30


def subtree_span(code: Code, index: int) -> tuple[int, int]:
    """Return [start, end) bounds of the subtree rooted at ``index``."""
    need = 1
    j = index
    while need:
        need += ARITY[code[j]] - 1
        j += 1
    return index, j


def tree_depth(code: Code) -> int:
    """Depth as edge count on the longest root-to-leaf path (terminal = 0)."""
    max_depth = 0
    pending: list[int] = []  # children still owed at each open level
    for op in code:
        if len(pending) > max_depth:
            max_depth = len(pending)
        if ARITY[op] > 0:
            pending.append(ARITY[op])
        else:
            while pending and pending[-1] == 1:
                pending.pop()
            if pending:
                pending[-1] -= 1
    return max_depth


def node_depths(code: Code) -> list[int]:
    """Depth of every node, in prefix order."""
    depths: list[int] = []
    pending: list[int] = []
    for op in code:
        depths.append(len(pending))
        if ARITY[op] > 0:
            pending.append(ARITY[op])
        else:
            while pending and pending[-1] == 1:
                pending.pop()
            if pending:
                pending[-1] -= 1
    return depths


def validate_code(code: Code) -> None:
    """Raise ParameterError unless ``code`` is one syntactically complete tree."""
    if not code:
        raise ParameterError("empty tree")
    need = 1
    for op in code:
        if need == 0:
            raise ParameterError("trailing nodes after tree end")
        if not 0 <= op < N_PRIMITIVES:
            raise ParameterError(f"unknown primitive id {op}")
        need += ARITY[op] - 1
    if need != 0:
        raise ParameterError("tree is missing children")


# ---------------------------------------------------------------------------
# Random generation (grow / full)
# ---------------------------------------------------------------------------

def full_tree(rng: np.random.Generator, depth: int) -> Code:
    """Full method: functions strictly above ``depth``, terminals at it."""
    out: list[int] = []

    def build(d: int) -> None:
        if d == 0:
            out.append(int(rng.integers(N_TERMINALS)))
            return
        op = N_TERMINALS + int(rng.integers(N_PRIMITIVES - N_TERMINALS))
        out.append(op)
        for _ in range(ARITY[op]):
            build(d - 1)

    build(depth)
    return tuple(out)


def grow_tree(rng: np.random.Generator, min_depth: int, max_depth: int) -> Code:
    """Grow method with a depth floor: every leaf sits at depth >= min_depth."""
    out: list[int] = []

    def build(d: int) -> None:
        if d >= max_depth:
            op = int(rng.integers(N_TERMINALS))
        elif d < min_depth:
            op = N_TERMINALS + int(rng.integers(N_PRIMITIVES - N_TERMINALS))
        else:
            op = int(rng.integers(N_PRIMITIVES))
        out.append(op)
        for _ in range(ARITY[op]):
            build(d + 1)

    build(0)
    return tuple(out)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Evaluator = Callable[[Sequence[float]], float]


@lru_cache(maxsize=8192)
def compile_tree(code: Code) -> Evaluator:
    """Compile a prefix tuple into a nested-closure evaluator.

    Division is protected (x/0 = 1). Boolean functions treat nonzero as true
    and return 0.0/1.0. Non-finite values are not intercepted here; the
    dispatch-facing wrapper clamps the final score.
    """

    def build(i: int) -> tuple[Evaluator, int]:
        op = code[i]
        if op < N_TERMINALS:
            return (lambda f, _k=op: f[_k]), i + 1
        name = PRIMITIVE_NAMES[op]
        args: list[Evaluator] = []
        j = i + 1
        for _ in range(ARITY[op]):
            fn, j = build(j)
            args.append(fn)
        if name == "+":
            a, b = args
            return (lambda f: a(f) + b(f)), j
        if name == "-":
            a, b = args
            return (lambda f: a(f) - b(f)), j
        if name == "*":
            a, b = args
            return (lambda f: a(f) * b(f)), j
        if name == "/":
            a, b = args

            def div(f: Sequence[float], _a=a, _b=b) -> float:
                d = _b(f)
                return 1.0 if d == 0.0 else _a(f) / d

            return div, j
        if name == "max":
            a, b = args
            return (lambda f: max(a(f), b(f))), j
        if name == "min":
            a, b = args
            return (lambda f: min(a(f), b(f))), j
        if name == "&":
            a, b = args
            return (lambda f: 1.0 if a(f) != 0.0 and b(f) != 0.0 else 0.0), j
        if name == "|":
            a, b = args
            return (lambda f: 1.0 if a(f) != 0.0 or b(f) != 0.0 else 0.0), j
        if name == "if_else":
            c, a, b = args
            return (lambda f: a(f) if c(f) != 0.0 else b(f)), j
        if name == "<=":
            a, b = args
            return (lambda f: 1.0 if a(f) <= b(f) else 0.0), j
        if name == ">=":
            a, b = args
            return (lambda f: 1.0 if a(f) >= b(f) else 0.0), j
        raise AssertionError(f"unhandled function {name}")

    validate_code(code)
    fn, end = build(0)
    assert end == len(code)
    return fn


def evaluate_tree(tree: "Individual | Code", features: Sequence[float]) -> float:
    """Score a feature vector; non-finite results clamp to SCORE_SENTINEL."""
    code = tree.code if isinstance(tree, Individual) else tree
    value = compile_tree(code)(features)
    return value if math.isfinite(value) else SCORE_SENTINEL


def tree_rule(tree: "Individual | Code") -> Evaluator:
    """A dispatch-rule callable (clamped) for use with the simulator."""
    code = tree.code if isinstance(tree, Individual) else tree
    fn = compile_tree(code)

    def rule(features: Sequence[float]) -> float:
        value = fn(features)
        return value if math.isfinite(value) else SCORE_SENTINEL

    return rule


# ---------------------------------------------------------------------------
# S-expression serialization
# ---------------------------------------------------------------------------

def format_sexpr(tree: "Individual | Code") -> str:
    """Render as prefix S-expression, e.g. ``(+ (max ALT AUT) (/ RTN CTN))``."""
    code = tree.code if isinstance(tree, Individual) else tree

    def emit(i: int) -> tuple[str, int]:
        op = code[i]
        if ARITY[op] == 0:
            return PRIMITIVE_NAMES[op], i + 1
        parts = [PRIMITIVE_NAMES[op]]
        j = i + 1
        for _ in range(ARITY[op]):
            text, j = emit(j)
            parts.append(text)
        return "(" + " ".join(parts) + ")", j

    text, end = emit(0)
    assert end == len(code)
    return text


def parse_sexpr(text: str) -> Code:
    """Parse the S-expression form back into a prefix tuple."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise ParameterError("empty expression")
    pos = 0

    def parse() -> list[int]:
        nonlocal pos
        if pos >= len(tokens):
            raise ParameterError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ParameterError("unexpected end of expression")
            name = tokens[pos]
            pos += 1
            op = NAME_TO_ID.get(name)
            if op is None or ARITY[op] == 0:
                raise ParameterError(f"expected a function name, got {name!r}")
            out = [op]
            for _ in range(ARITY[op]):
                out.extend(parse())
            if pos >= len(tokens) or tokens[pos] != ")":
                raise ParameterError(f"missing ')' after {name}")
            pos += 1
            return out
        if tok == ")":
            raise ParameterError("unexpected ')'")
        op = NAME_TO_ID.get(tok)
        if op is None:
            raise ParameterError(f"unknown terminal {tok!r}")
        if ARITY[op] != 0:
            raise ParameterError(f"function {tok!r} must be parenthesized")
        return [op]

    code = tuple(parse())
    if pos != len(tokens):
        raise ParameterError("trailing tokens after expression")
    validate_code(code)
    return code


# ---------------------------------------------------------------------------
# Individuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitnessRecord:
    """Fitness value plus provenance; true records carry their simulation cost."""

    value: float
    kind: str  # "true" | "estimated"
    eval_simulations: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("true", "estimated"):
            raise ParameterError(f"bad fitness kind {self.kind!r}")
        if (self.kind == "true") != (self.eval_simulations > 0):
            raise ParameterError("true fitness must carry a positive simulation count")


@dataclass
class Individual:
    """One dispatching heuristic. The tree itself is immutable."""

    code: Code
    birth_gen: int = 0
    fitness: FitnessRecord | None = None
    _size: int = field(default=0, repr=False, compare=False)
    _depth: int = field(default=-1, repr=False, compare=False)

    @property
    def size(self) -> int:
        if not self._size:
            self._size = len(self.code)
        return self._size

    @property
    def depth(self) -> int:
        if self._depth < 0:
            self._depth = tree_depth(self.code)
        return self._depth

    @property
    def fitness_kind(self) -> str:
        return self.fitness.kind if self.fitness is not None else "none"

    def clone(self, birth_gen: int | None = None) -> "Individual":
        return Individual(
            code=self.code,
            birth_gen=self.birth_gen if birth_gen is None else birth_gen,
            fitness=self.fitness,
        )

    def expression(self) -> str:
        return format_sexpr(self.code)
