"""Canonical primitive set for dispatching-heuristic trees.

The ordering below is frozen: genotype frequency vectors are laid out as
terminals first, functions second, and feature vectors index into the
terminal block. Changing the order silently invalidates stored results.
"""

TERMINALS: tuple[str, ...] = (
    "TT",     # travel time from the truck to the task's start node (s)
    "CTN",    # trucks currently working for the task's crane
    "OT",     # ship operation type: 0 load, 1 unload
    "SNTN",   # trucks present at or heading to the start node
    "ENTN",   # trucks present at or heading to the end node
    "SNWTN",  # trucks waiting at the start node's crane
    "ENWTN",  # trucks waiting at the end node's crane
    "DT",     # dispatch flow code: 0 crane->yard, 1 yard->crane, 2 yard->gate
    "RTN",    # remaining tasks of the task's crane
    "ALT",    # average load (onto-truck) service time of the crane (s)
    "AUT",    # average unload (off-truck) service time of the crane (s)
)

FUNCTIONS: tuple[tuple[str, int], ...] = (
    ("+", 2),
    ("-", 2),
    ("*", 2),
    ("/", 2),
    ("max", 2),
    ("min", 2),
    ("&", 2),
    ("|", 2),
    ("if_else", 3),
    ("<=", 2),
    (">=", 2),
)

N_TERMINALS = len(TERMINALS)
N_FUNCTIONS = len(FUNCTIONS)
N_PRIMITIVES = N_TERMINALS + N_FUNCTIONS

PRIMITIVE_NAMES: tuple[str, ...] = TERMINALS + tuple(name for name, _ in FUNCTIONS)
ARITY: tuple[int, ...] = (0,) * N_TERMINALS + tuple(arity for _, arity in FUNCTIONS)
NAME_TO_ID: dict[str, int] = {name: i for i, name in enumerate(PRIMITIVE_NAMES)}

assert N_PRIMITIVES == 22
