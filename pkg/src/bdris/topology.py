"""Circuit-topology graphs for BD-RIS impedance networks.

An architecture is an undirected simple graph on the ``N_I`` ports of the
reconfigurable impedance network: an edge ``(n, m)`` means ports ``n`` and
``m`` are joined by a tunable admittance.  Vertex indices are 0-based here;
the JSON layer (``to_json``/``from_json``) speaks 1-based indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

KINDS = ("single", "fully", "group", "tridiagonal", "arrowhead", "band", "stem", "custom")

# exact permutation search is unbounded up to this size
EXACT_SEARCH_LIMIT = 12
# node budget for the witness search above EXACT_SEARCH_LIMIT
SEARCH_BUDGET = 200_000


class InvalidParam(ValueError):
    """Raised when architecture parameters are inconsistent."""


@dataclass(frozen=True, eq=False)
class Architecture:
    n_elements: int
    adjacency: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        n = self.n_elements
        if adj.shape != (n, n):
            raise InvalidParam(f"adjacency must be {n}x{n}, got {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise InvalidParam("adjacency must be symmetric")
        if adj.diagonal().any():
            raise InvalidParam("adjacency must have an all-false diagonal")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(n, m)`` with ``n < m`` in row-major order."""
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    @property
    def label(self) -> str:
        if self.kind == "band":
            return f"band(q={self.params['q']})"
        if self.kind == "stem":
            return f"stem(q={self.params['q']})"
        if self.kind == "group":
            return f"group(G={self.params['G']})"
        return self.kind

    def permuted(self, order: Sequence[int]) -> "Architecture":
        """Relabel vertices so that new vertex ``i`` is old vertex ``order[i]``."""
        order = np.asarray(order)
        return Architecture(self.n_elements, self.adjacency[np.ix_(order, order)], "custom")

    def is_subgraph_of(self, other: "Architecture") -> bool:
        return self.n_elements == other.n_elements and not (self.adjacency & ~other.adjacency).any()

    def __eq__(self, other):
        if not isinstance(other, Architecture):
            return NotImplemented
        return self.n_elements == other.n_elements and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash((self.n_elements, self.adjacency.tobytes()))

    def __repr__(self):
        return f"Architecture(n_elements={self.n_elements}, kind={self.label!r}, edges={self.n_edges})"


@dataclass(frozen=True)
class SystemDims:
    n_tx: int
    n_ris: int
    users: tuple[int, ...]
    streams: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(int(u) for u in self.users))
        if self.streams is not None:
            object.__setattr__(self, "streams", tuple(int(d) for d in self.streams))
        if self.n_tx < 1 or self.n_ris < 1 or not self.users or min(self.users) < 1:
            raise InvalidParam("antenna and element counts must be positive")
        if self.streams is not None:
            if len(self.streams) != len(self.users):
                raise InvalidParam("one stream count per user is required")
            if any(d < 1 or d > n for d, n in zip(self.streams, self.users)):
                raise InvalidParam("stream counts must satisfy 1 <= d_k <= N_k")

    @property
    def n_rx(self) -> int:
        return sum(self.users)

    @property
    def dof(self) -> int:
        return min(self.n_rx, self.n_tx)


def _empty(n: int) -> np.ndarray:
    return np.zeros((n, n), dtype=bool)


def make_architecture(kind: str, n_elements: int, **params) -> Architecture:
    """Build one of the standard architectures.

    Parameters by kind: ``group`` takes ``G`` (number of equal groups) or
    ``group_size``; ``band`` takes ``q``; ``stem`` takes ``q`` and optional
    ``centers`` (0-based, default the first ``q`` ports); ``custom`` takes
    ``adjacency``.
    """
    n = int(n_elements)
    if n < 1:
        raise InvalidParam("n_elements must be positive")
    idx = np.arange(n)
    if kind == "single":
        return Architecture(n, _empty(n), "single")
    if kind == "fully":
        return Architecture(n, ~np.eye(n, dtype=bool), "fully")
    if kind == "tridiagonal":
        return Architecture(n, np.abs(idx[:, None] - idx[None, :]) == 1, "tridiagonal")
    if kind == "arrowhead":
        adj = _empty(n)
        adj[0, 1:] = adj[1:, 0] = True
        return Architecture(n, adj, "arrowhead")
    if kind == "band":
        q = int(params["q"])
        if q < 0 or q >= n:
            raise InvalidParam(f"band width q must satisfy 0 <= q < N_I, got q={q}")
        dist = np.abs(idx[:, None] - idx[None, :])
        return Architecture(n, (dist > 0) & (dist <= q), "band", {"q": q})
    if kind == "stem":
        q = int(params["q"])
        if q < 0 or q >= n:
            raise InvalidParam(f"stem width q must satisfy 0 <= q < N_I, got q={q}")
        centers = params.get("centers")
        centers = tuple(range(q)) if centers is None else tuple(int(c) for c in centers)
        if len(set(centers)) != len(centers):
            raise InvalidParam("stem centers must be distinct")
        if len(centers) != q:
            raise InvalidParam(f"stem width {q} needs exactly {q} centers")
        if any(c < 0 or c >= n for c in centers):
            raise InvalidParam("stem center out of range")
        is_center = np.zeros(n, dtype=bool)
        is_center[list(centers)] = True
        adj = (is_center[:, None] | is_center[None, :]) & ~np.eye(n, dtype=bool)
        return Architecture(n, adj, "stem", {"q": q, "centers": centers})
    if kind == "group":
        if "G" in params:
            g = int(params["G"])
        elif "group_size" in params:
            size = int(params["group_size"])
            if size < 1 or n % size:
                raise InvalidParam(f"group size {size} does not divide N_I={n}")
            g = n // size
        else:
            raise InvalidParam("group architecture needs G or group_size")
        if g < 1 or n % g:
            raise InvalidParam(f"G={g} does not divide N_I={n}")
        block = idx // (n // g)
        adj = (block[:, None] == block[None, :]) & ~np.eye(n, dtype=bool)
        return Architecture(n, adj, "group", {"G": g})
    if kind == "custom":
        return Architecture(n, np.asarray(params["adjacency"], dtype=bool), "custom")
    raise InvalidParam(f"unknown architecture kind {kind!r}")


def random_theorem1_architecture(n_elements: int, L, rng: np.random.Generator) -> Architecture:
    """Random member of the optimal class, relabelled by a random permutation.

    In canonical order every one of the first ``N_I - 2L`` ports connects to
    ``2L - 1`` randomly chosen later ports and the last ``2L`` ports form a
    clique.
    """
    n = int(n_elements)
    width = _width(L, n)
    adj = _empty(n)
    for i in range(n - 1):
        later = np.arange(i + 1, n)
        k = min(width, n - 1 - i)
        chosen = later if k == len(later) else rng.choice(later, size=k, replace=False)
        adj[i, chosen] = True
    adj |= adj.T
    order = rng.permutation(n)
    return Architecture(n, adj, "custom").permuted(order)


def complexity_count(arch: Architecture) -> int:
    """Number of tunable admittances: one per port plus one per edge."""
    return arch.n_elements + arch.n_edges


def theorem1_complexity(n_elements: int, L) -> int:
    """Closed form ``L(2N_I - 2L + 1)`` for the optimal class."""
    value = Fraction(L) * (2 * n_elements - 2 * Fraction(L) + 1)
    assert value.denominator == 1
    return int(value)


def effective_L(dims: SystemDims, use_streams: bool = False):
    """``min(D, N_I/2)``, with ``D`` replaced by the total stream count when asked.

    Returns an ``int``, or ``Fraction(N_I, 2)`` when ``N_I`` is odd and the
    degree of freedom reaches half the surface.
    """
    if use_streams:
        if dims.streams is None:
            raise InvalidParam("use_streams requires per-user stream counts")
        d = sum(dims.streams)
    else:
        d = dims.dof
    L = min(Fraction(d), Fraction(dims.n_ris, 2))
    return int(L) if L.denominator == 1 else L


@dataclass(frozen=True)
class Verdict:
    """Outcome of the optimal-class test.

    ``status`` is ``"satisfied"``, ``"not_satisfied"`` or ``"canonical_only"``.
    ``order`` is the witness: canonical position ``i`` holds vertex
    ``order[i]``, so ``adjacency[order][:, order]`` meets the row-count
    condition.
    """

    status: str
    ok: bool
    order: tuple[int, ...] | None = None

    def permutation_matrix(self) -> np.ndarray | None:
        """``P`` with ``A = P @ A_bar @ P.T``."""
        if self.order is None:
            return None
        n = len(self.order)
        p = np.zeros((n, n))
        p[list(self.order), np.arange(n)] = 1.0
        return p


def _width(L, n: int) -> int:
    L = Fraction(L)
    if L < 1 or L > Fraction(n, 2):
        raise InvalidParam(f"L must satisfy 1 <= L <= N_I/2, got L={L} for N_I={n}")
    return int(2 * L - 1)


def canonical_condition(adjacency: np.ndarray, L) -> bool:
    """Row ``n`` has ``min(2L-1, N_I-n)`` ones to the right of the diagonal."""
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    width = _width(L, n)
    upper = np.triu(adj, 1).sum(axis=1)[:-1]
    need = np.minimum(width, n - 1 - np.arange(n - 1))
    return bool(np.array_equal(upper, need))


class _BudgetExceeded(Exception):
    pass


def _search_order(adj: np.ndarray, width: int, budget: int | None) -> list[int] | None:
    # Placing vertex v next is legal iff its degree inside the not-yet-placed
    # set equals min(width, remaining - 1); that depends only on the set, so
    # failed sets are memoised.
    n = adj.shape[0]
    nbr = [sum(1 << int(j) for j in np.flatnonzero(adj[i])) for i in range(n)]
    dead: set[int] = set()
    nodes = 0

    def rec(remaining: int, size: int) -> list[int] | None:
        nonlocal nodes
        if size <= 1:
            return [remaining.bit_length() - 1] if size == 1 else []
        if remaining in dead:
            return None
        nodes += 1
        if budget is not None and nodes > budget:
            raise _BudgetExceeded
        need = min(width, size - 1)
        for v in range(n - 1, -1, -1):
            bit = 1 << v
            if remaining & bit and bin(nbr[v] & remaining).count("1") == need:
                tail = rec(remaining & ~bit, size - 1)
                if tail is not None:
                    return [v] + tail
        dead.add(remaining)
        return None

    return rec((1 << n) - 1, n)


def satisfies_theorem1(arch: Architecture, L, exact_limit: int = EXACT_SEARCH_LIMIT) -> Verdict:
    """Decide whether some relabelling puts ``arch`` in canonical optimal form.

    The identity ordering is tried first.  Otherwise a memoised backtracking
    search looks for a witness ordering, preferring high vertex indices.  The
    search is exhaustive for ``N_I <= exact_limit``; above that it runs under
    a node budget and, if the budget runs out, only the identity verdict is
    reported (``canonical_only``).
    """
    n = arch.n_elements
    width = _width(L, n)
    if canonical_condition(arch.adjacency, L):
        return Verdict("satisfied", True, tuple(range(n)))
    if arch.n_edges != sum(min(width, n - 1 - i) for i in range(n - 1)):
        return Verdict("not_satisfied", False)
    budget = None if n <= exact_limit else SEARCH_BUDGET
    try:
        order = _search_order(arch.adjacency, width, budget)
    except _BudgetExceeded:
        return Verdict("canonical_only", False)
    if order is None:
        return Verdict("not_satisfied", False)
    return Verdict("satisfied", True, tuple(order))


def is_tree(arch: Architecture) -> bool:
    if arch.n_edges != arch.n_elements - 1:
        return False
    n_comp, _ = connected_components(arch.adjacency.astype(np.int8), directed=False)
    return n_comp == 1


@dataclass(frozen=True)
class CensusResult:
    n: int
    n_graphs: int
    count_trees: int
    count_condition_satisfied: int
    mismatches: tuple[tuple[tuple[int, int], ...], ...]


def all_labeled_graphs(n: int) -> Iterable[np.ndarray]:
    pairs = list(itertools.combinations(range(n), 2))
    rows = np.array([p[0] for p in pairs], dtype=int)
    cols = np.array([p[1] for p in pairs], dtype=int)
    for mask in range(1 << len(pairs)):
        adj = _empty(n)
        bits = np.array([(mask >> k) & 1 for k in range(len(pairs))], dtype=bool)
        adj[rows[bits], cols[bits]] = True
        yield adj | adj.T


def tree_equivalence_census(n: int) -> CensusResult:
    """Compare tree-ness with the L=1 optimal-class test on every labeled graph."""
    if not 2 <= n <= 6:
        raise InvalidParam("census is limited to 2 <= n <= 6")
    trees = satisfied = total = 0
    mismatches = []
    for adj in all_labeled_graphs(n):
        arch = Architecture(n, adj)
        t = is_tree(arch)
        s = satisfies_theorem1(arch, 1).ok
        total += 1
        trees += t
        satisfied += s
        if t != s:
            mismatches.append(tuple(arch.edges()))
    return CensusResult(n, total, trees, satisfied, tuple(mismatches))


# JSON layer (1-based vertex indices)


def _rle_encode(bits: Sequence[int]) -> str:
    runs = []
    for bit, group in itertools.groupby(bits):
        runs.append(f"{bit}*{len(list(group))}")
    return ",".join(runs)


def _rle_decode(text: str) -> list[int]:
    bits: list[int] = []
    if not text:
        return bits
    for run in text.split(","):
        bit, count = run.split("*")
        if bit not in ("0", "1"):
            raise InvalidParam(f"bad run {run!r}")
        bits.extend([int(bit)] * int(count))
    return bits


def to_json(arch: Architecture) -> dict:
    params = dict(arch.params)
    if "centers" in params:
        params["centers"] = [c + 1 for c in params["centers"]]
    upper = arch.adjacency[np.triu_indices(arch.n_elements, 1)].astype(int).tolist()
    return {
        "n_elements": arch.n_elements,
        "kind": arch.kind,
        "params": params,
        "adjacency_rle": _rle_encode(upper),
    }


def from_json(obj: dict) -> Architecture:
    n = int(obj["n_elements"])
    iu = np.triu_indices(n, 1)
    if "adjacency_rle" in obj:
        bits = _rle_decode(obj["adjacency_rle"])
        if len(bits) != len(iu[0]):
            raise InvalidParam(f"adjacency_rle has {len(bits)} bits, expected {len(iu[0])}")
        adj = _empty(n)
        adj[iu] = np.asarray(bits, dtype=bool)
        adj |= adj.T
        params = dict(obj.get("params", {}))
        if "centers" in params:
            params["centers"] = tuple(c - 1 for c in params["centers"])
        return Architecture(n, adj, obj.get("kind", "custom"), params)
    params = dict(obj.get("params", {}))
    if "centers" in params:
        params["centers"] = [c - 1 for c in params["centers"]]
    return make_architecture(obj["kind"], n, **params)
