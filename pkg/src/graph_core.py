"""
Graph Core
Interference graphs: construction, edge-list ingestion, random generators and
degree / exposure summaries.

Orientation: row i of G lists the units whose treatments reach unit i, so the
neighbour exposure of a treatment vector A is simply G @ A and the weighted
degree F_i is the i-th row sum.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse

from src.utils.constants import DENSE_NODE_LIMIT, SYMMETRY_TOL
from src.utils.errors import DataError, UnsupportedError, ValidationError
from src.utils.validation import (
    ensure_valid,
    validate_count,
    validate_permutation,
    validate_probability,
    validate_rows,
)

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

Matrix = Union[np.ndarray, sparse.csr_matrix]


def _store(matrix: Any) -> Matrix:
    """Storage rule: dense below DENSE_NODE_LIMIT nodes, CSR otherwise."""
    if sparse.issparse(matrix):
        n = matrix.shape[0]
        if n < DENSE_NODE_LIMIT:
            return np.asarray(matrix.toarray(), dtype=float)
        stored = sparse.csr_matrix(matrix, dtype=float, copy=True)
        stored.eliminate_zeros()
        stored.sort_indices()
        return stored
    dense = np.array(matrix, dtype=float)
    if dense.ndim == 2 and dense.shape[0] >= DENSE_NODE_LIMIT:
        stored = sparse.csr_matrix(dense)
        stored.eliminate_zeros()
        return stored
    return dense


def _max_asymmetry(matrix: Matrix) -> float:
    if sparse.issparse(matrix):
        diff = matrix - matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0
    return float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """
    Weighted interference graph.

    entries: n x n weights, G_ii = 0, finite; dense ndarray or CSR.
    directed: when False the entries are symmetric.
    node_labels: optional external IDs, position i labels unit i.
    """

    entries: Matrix
    directed: bool = False
    node_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        matrix = _store(self.entries)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"adjacency matrix must be square, got shape {matrix.shape}")
        n = matrix.shape[0]
        if n < 1:
            raise ValidationError("adjacency matrix needs at least one node")

        values = matrix.data if sparse.issparse(matrix) else matrix
        if not np.all(np.isfinite(values)):
            raise ValidationError("adjacency weights must be finite")
        if np.any(matrix.diagonal() != 0):
            first = int(np.flatnonzero(matrix.diagonal())[0])
            raise ValidationError(f"self-loop at node {first}: G_ii must be 0")
        if not self.directed and _max_asymmetry(matrix) > SYMMETRY_TOL:
            raise ValidationError("undirected graph must have symmetric weights")
        if self.node_labels is not None and len(self.node_labels) != n:
            raise ValidationError(f"{len(self.node_labels)} node labels for {n} nodes")

        if isinstance(matrix, np.ndarray):
            matrix.setflags(write=False)
        object.__setattr__(self, "entries", matrix)
        if self.node_labels is not None:
            object.__setattr__(self, "node_labels", tuple(str(label) for label in self.node_labels))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.entries)

    @property
    def nnz(self) -> int:
        """Number of nonzero entries (each undirected edge counts twice)."""
        if self.is_sparse:
            return int(self.entries.nnz)
        return int(np.count_nonzero(self.entries))

    def toarray(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return np.array(self.entries)

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return _max_asymmetry(self.entries) <= tol

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"AdjacencyMatrix(n={self.n}, nnz={self.nnz}, {kind})"


@dataclass(frozen=True, eq=False)
class DegreeSummary:
    """Weighted degrees F (row sums), their mean F_bar and the total weight W."""

    F: np.ndarray
    F_bar: float
    W: float

    @property
    def minimum(self) -> float:
        return float(np.min(self.F))

    @property
    def maximum(self) -> float:
        return float(np.max(self.F))

    @property
    def sd(self) -> float:
        return float(np.std(self.F, ddof=1)) if self.F.shape[0] > 1 else 0.0


def from_dense(array: Any, directed: Optional[bool] = None, node_labels: Optional[Sequence[str]] = None) -> AdjacencyMatrix:
    """Wrap an array; orientation is inferred from symmetry unless given."""
    matrix = np.asarray(array, dtype=float)
    if directed is None:
        directed = _max_asymmetry(matrix) > SYMMETRY_TOL if matrix.ndim == 2 and matrix.shape[0] == matrix.shape[1] else True
    return AdjacencyMatrix(matrix, directed=directed, node_labels=tuple(node_labels) if node_labels else None)


def empty_graph(n: int) -> AdjacencyMatrix:
    ensure_valid(validate_count(n, "n"))
    return AdjacencyMatrix(sparse.csr_matrix((n, n), dtype=float), directed=False)


# ----------------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------------

def _record_location(position: int, first_line: Optional[int]) -> str:
    if first_line is None:
        return f"record {position}"
    return f"line {first_line + position - 1}"


def _resolve_node(value: Any, label_index: Optional[Dict[str, int]], n_hint: Optional[int], where: str) -> int:
    if label_index is not None:
        key = str(value).strip()
        if key not in label_index:
            raise DataError(f"{where}: unknown node label {key!r}")
        return label_index[key]

    text = str(value).strip()
    try:
        index = int(text)
    except ValueError:
        try:
            as_float = float(text)
        except ValueError:
            raise DataError(f"{where}: unknown node label {text!r} (string labels need a nodes list)")
        if not as_float.is_integer():
            raise DataError(f"{where}: node index {text!r} is not an integer")
        index = int(as_float)
    if index < 0:
        raise DataError(f"{where}: negative node index {index}")
    if n_hint is not None and index >= n_hint:
        raise DataError(f"{where}: node index {index} out of range for n = {n_hint}")
    return index


def _parse_weight(value: Any, where: str) -> float:
    if value is None:
        return 1.0
    if isinstance(value, float) and math.isnan(value):
        return 1.0
    text = str(value).strip()
    if text == "":
        return 1.0
    try:
        weight = float(text)
    except ValueError:
        raise DataError(f"{where}: weight {text!r} is not numeric")
    if not math.isfinite(weight):
        raise DataError(f"{where}: weight must be finite, got {text}")
    return weight


def load_edge_list(
    records: Iterable[Mapping[str, Any]],
    directed: bool,
    n_hint: Optional[int] = None,
    labels: Optional[Sequence[str]] = None,
    transpose: bool = False,
    first_line: Optional[int] = None,
) -> AdjacencyMatrix:
    """
    Build G from (src, dst, weight) records.

    A record sets G[src, dst] += weight: the src unit's outcome is exposed to
    dst's treatment. transpose=True reads files stored influencer first.
    Undirected records insert both orientations; duplicates sum.

    Args:
        records: Mappings with keys src, dst and optional weight (default 1.0)
        directed: Orientation of the records
        n_hint: Node count; required when the file cannot imply it
        labels: Ordered node labels (nodes.csv) for string IDs
        transpose: Swap src and dst
        first_line: File line of the first record, for error messages

    Returns:
        AdjacencyMatrix
    """
    label_index = None
    if labels is not None:
        label_index = {str(label).strip(): i for i, label in enumerate(labels)}
        if len(label_index) != len(labels):
            raise DataError("duplicate labels in nodes list")

    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    max_index = -1
    position = 0
    for position, record in enumerate(records, start=1):
        where = _record_location(position, first_line)
        if "src" not in record or "dst" not in record:
            raise DataError(f"{where}: record needs src and dst fields")
        row = _resolve_node(record["src"], label_index, n_hint, where)
        col = _resolve_node(record["dst"], label_index, n_hint, where)
        if row == col:
            raise DataError(f"{where}: self-loop on node {record['src']}")
        weight = _parse_weight(record.get("weight"), where)
        if transpose:
            row, col = col, row
        rows.append(row)
        cols.append(col)
        values.append(weight)
        if not directed:
            rows.append(col)
            cols.append(row)
            values.append(weight)
        max_index = max(max_index, row, col)

    if label_index is not None:
        n = len(label_index)
    elif n_hint is not None:
        n = int(n_hint)
    elif max_index >= 0:
        n = max_index + 1
    else:
        raise DataError("empty edge list: node count unknown (supply n_hint or a nodes list)")

    matrix = sparse.coo_matrix((values, (rows, cols)), shape=(n, n), dtype=float).tocsr()
    matrix.sum_duplicates()
    logger.debug(f"Loaded {position} edge records into a {n}-node {'directed' if directed else 'undirected'} graph")
    return AdjacencyMatrix(matrix, directed=directed, node_labels=tuple(labels) if labels is not None else None)


# ----------------------------------------------------------------------------
# Random generators
# ----------------------------------------------------------------------------

def _from_networkx(graph: nx.Graph, n: int) -> AdjacencyMatrix:
    matrix = nx.to_scipy_sparse_array(graph, nodelist=range(n), weight=None, dtype=float, format="csr")
    matrix = sparse.csr_matrix(matrix)
    if graph.is_directed():
        # networkx edge u -> v means u influences v, i.e. row v gains column u
        matrix = matrix.T.tocsr()
    return AdjacencyMatrix(matrix, directed=graph.is_directed())


def generate_er(n: int, p: float, seed: int, directed: bool = False) -> AdjacencyMatrix:
    """Erdos-Renyi graph: every (ordered, if directed) pair present with probability p."""
    ensure_valid(validate_count(n, "n"))
    ensure_valid(validate_probability(p, "p"))
    graph = nx.fast_gnp_random_graph(n, float(p), seed=int(seed), directed=directed)
    return _from_networkx(graph, n)


def generate_ba(n: int, power: float = 0.05, m: int = 1, seed: int = 0) -> AdjacencyMatrix:
    """
    Preferential attachment graph.

    Node t >= 1 attaches to min(m, t) distinct earlier nodes chosen with
    probability proportional to (degree + 1) ** power.
    """
    ensure_valid(validate_count(n, "n"))
    ensure_valid(validate_count(m, "m"))
    rng = np.random.default_rng(int(seed))
    degree = np.zeros(n, dtype=float)
    rows: List[int] = []
    cols: List[int] = []
    for t in range(1, n):
        size = min(m, t)
        appeal = (degree[:t] + 1.0) ** float(power)
        targets = rng.choice(t, size=size, replace=False, p=appeal / appeal.sum())
        for s in targets:
            rows.extend((t, int(s)))
            cols.extend((int(s), t))
        degree[targets] += 1.0
        degree[t] += size
    matrix = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    return AdjacencyMatrix(matrix, directed=False)


def generate_ws(n: int, nei: int, p_rewire: float, seed: int, dim: int = 1) -> AdjacencyMatrix:
    """
    Small-world graph: ring lattice with nei neighbours per side, each edge
    rewired with probability p_rewire. Edge count stays exactly n * nei.
    """
    if dim != 1:
        raise UnsupportedError(f"only dim = 1 small-world lattices are supported, got dim = {dim}")
    ensure_valid(validate_count(n, "n"))
    ensure_valid(validate_count(nei, "nei"))
    ensure_valid(validate_probability(p_rewire, "p_rewire"))
    if n <= 2 * nei:
        raise ValidationError(f"small-world graph needs n > 2 * nei (n = {n}, nei = {nei})")
    graph = nx.watts_strogatz_graph(n, 2 * nei, float(p_rewire), seed=int(seed))
    return _from_networkx(graph, n)


def total_weight_variance(family: str, n: int, p: float = 0.0, directed: bool = False) -> float:
    """
    Var(W) of the total edge weight for a unit-weight random graph family.

    ER counts both orientations of an undirected edge, so each of the
    n(n-1)/2 Bernoulli pairs contributes 2. Small-world and fixed-m
    preferential attachment graphs have a fixed edge count.
    """
    family = family.lower()
    if family == "er":
        ensure_valid(validate_probability(p, "p"))
        base = n * (n - 1) * p * (1.0 - p)
        return base if directed else 2.0 * base
    if family in ("ws", "ba", "fixed"):
        return 0.0
    raise ValidationError(f"unknown graph family {family!r}")


# ----------------------------------------------------------------------------
# Summaries and transforms
# ----------------------------------------------------------------------------

def degree_summary(G: AdjacencyMatrix) -> DegreeSummary:
    F = np.asarray(G.entries.sum(axis=1), dtype=float).ravel()
    W = float(F.sum())
    return DegreeSummary(F=F, F_bar=W / G.n, W=W)


def exposure(G: AdjacencyMatrix, v: Any) -> np.ndarray:
    """Neighbour sums G @ v for a vector or an n x k matrix."""
    values = np.asarray(v, dtype=float)
    if values.ndim not in (1, 2):
        raise ValidationError(f"exposure expects a vector or matrix, got {values.ndim} dimensions")
    ensure_valid(validate_rows(values.shape[0], G.n, "exposure input"))
    return np.asarray(G.entries @ values, dtype=float)


def matrix_power(G: AdjacencyMatrix, k: int) -> AdjacencyMatrix:
    """G^k with the diagonal zeroed (self-influence excluded)."""
    ensure_valid(validate_count(k, "k"))
    if k == 1:
        return G
    result = G.entries
    for _ in range(k - 1):
        result = result @ G.entries
    if sparse.issparse(result):
        result = sparse.csr_matrix(result)
        result = (result - sparse.diags(result.diagonal())).tocsr()
        result.eliminate_zeros()
        if not G.directed:
            result = (result + result.T) * 0.5
    else:
        result = np.array(result, dtype=float)
        np.fill_diagonal(result, 0.0)
        if not G.directed:
            result = (result + result.T) * 0.5
    return AdjacencyMatrix(result, directed=G.directed, node_labels=G.node_labels)


def row_normalize(G: AdjacencyMatrix) -> AdjacencyMatrix:
    """Divide each nonzero row by its sum; zero rows stay zero."""
    values = G.entries.data if G.is_sparse else G.entries
    if np.any(values < 0):
        raise ValidationError("row normalisation needs nonnegative weights")
    sums = np.asarray(G.entries.sum(axis=1), dtype=float).ravel()
    scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums != 0)
    if G.is_sparse:
        result = sparse.diags(scale) @ G.entries
    else:
        result = G.entries * scale[:, None]
    directed = G.directed or _max_asymmetry(result) > SYMMETRY_TOL
    return AdjacencyMatrix(result, directed=directed, node_labels=G.node_labels)


def permute(G: AdjacencyMatrix, perm: Sequence[int]) -> AdjacencyMatrix:
    """Relabel units: G'[perm[i], perm[j]] = G[i, j]."""
    ensure_valid(validate_permutation(perm, G.n))
    perm = np.asarray(perm, dtype=int)
    inverse = np.argsort(perm)
    if G.is_sparse:
        result = G.entries[inverse][:, inverse]
    else:
        result = G.entries[np.ix_(inverse, inverse)]
    labels = None
    if G.node_labels is not None:
        labels = tuple(G.node_labels[i] for i in inverse)
    return AdjacencyMatrix(result, directed=G.directed, node_labels=labels)


def eigenvalue_range(G: AdjacencyMatrix) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric G."""
    if not G.is_symmetric():
        raise ValidationError("eigenvalue range needs a symmetric (undirected) graph")
    values = np.linalg.eigvalsh(G.toarray())
    return float(values[0]), float(values[-1])
