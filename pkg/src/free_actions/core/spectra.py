"""
Spectral checks on balls of the 4-regular tree.

The operator S = pi(a) + pi(a)^-1 + pi(b) + pi(b)^-1 of the left-regular
representation of F_2 restricted to the radius-r ball is the adjacency matrix
of the ball. Its top eigenvalue lambda(r) increases to the Kesten norm 2*sqrt(3),
and for unit vectors on the inner ball
    sum_i ||pi(f_i) xi - xi||^2 = 4 - <S xi, xi> >= 4 - 2*sqrt(3).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Union

import networkx as nx
import numpy as np
import scipy.sparse as sp
from loguru import logger
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from src.free_actions.config import (
    DEFAULT_SAMPLES,
    DEFAULT_TOL,
    EIGSH_MAXITER,
    KESTEN_GENERATORS,
    MAX_OPERATOR_DIM,
)
from src.free_actions.core.errors import NonConvergence, NotFreeError, ResourceLimitExceeded
from src.free_actions.core.freepair import (
    FreePair,
    FreePairBuilder,
    ball_size,
    certify_tree_ball,
    schreier_ball,
)

AGREEMENT_TOL = 1e-9
DENSE_MAX_DIM = 600


def kesten_norm(k: int = KESTEN_GENERATORS) -> float:
    """Norm of the generator sum in the left-regular representation of F_k."""
    return 2.0 * math.sqrt(2 * k - 1)


def displacement_floor() -> float:
    return 4.0 - kesten_norm(2)


def kazhdan_epsilon() -> float:
    return math.sqrt(2.0 - math.sqrt(3.0))


@dataclass
class SparseSymOp:
    matrix: sp.csr_matrix
    provenance: str
    radius: int
    depth: np.ndarray
    moves: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def is_symmetric(self) -> bool:
        return (self.matrix != self.matrix.T).nnz == 0

    def max_degree(self) -> int:
        return int(np.diff(self.matrix.indptr).max()) if self.dimension else 0


@dataclass
class EigEstimate:
    value: float
    residual: float
    iterations: int
    method: str = "lanczos"


def cayley_ball(r: int, max_dim: int = MAX_OPERATOR_DIM) -> SparseSymOp:
    """Adjacency of the radius-r ball of the Cayley graph of F_2 = <a, b>.

    Vertices are reduced words in BFS order (the root is 0, the inner ball of
    radius r - 1 is a prefix). moves[c, v] is the index of c.w for letter code
    c (a, a^-1, b, b^-1), or -1 outside the ball.
    """
    if r < 0:
        raise ValueError(f"Ball radius must be >= 0, got {r}")
    n = ball_size(r)
    if n > max_dim:
        raise ResourceLimitExceeded(f"Cayley ball of radius {r} has dimension {n} > {max_dim}")

    parent = np.full(n, -1, dtype=np.int64)
    first = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    moves = np.full((4, n), -1, dtype=np.int64)

    start, end, nxt = 0, 1, 1
    for d in range(r):
        level = np.arange(start, end)
        for c in range(4):
            # prepending c is reduced unless the word starts with c^-1
            parents = level[first[level] != (c ^ 1)]
            children = np.arange(nxt, nxt + len(parents))
            parent[children] = parents
            first[children] = c
            depth[children] = d + 1
            moves[c, parents] = children
            moves[c ^ 1, children] = parents
            nxt += len(parents)
        start, end = end, nxt

    children = np.arange(1, n)
    rows = np.concatenate([children, parent[1:]])
    cols = np.concatenate([parent[1:], children])
    matrix = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    logger.debug(f"Cayley ball r={r}: dimension {n}, {matrix.nnz} entries")
    return SparseSymOp(matrix, f"CayleyBall({r})", r, depth, moves)


def _linear_operator(
    matrix: sp.csr_matrix, counter: List[int], pool: Optional[ThreadPoolExecutor] = None, workers: int = 1
) -> LinearOperator:
    """Counting mat-vec; with a pool, row blocks are multiplied concurrently (same sums per row)."""
    n = matrix.shape[0]
    if pool is None:
        def matvec(x):
            counter[0] += 1
            return matrix @ np.ravel(x)
    else:
        bounds = np.linspace(0, n, workers + 1, dtype=np.int64)
        blocks = [matrix[bounds[i]:bounds[i + 1]] for i in range(workers)]

        def matvec(x):
            counter[0] += 1
            x = np.ravel(x)
            return np.concatenate(list(pool.map(lambda block: block @ x, blocks)))

    return LinearOperator((n, n), matvec=matvec, dtype=np.float64)


def top_eigenvalue(
    op: Union[SparseSymOp, sp.spmatrix],
    tol: float = DEFAULT_TOL,
    workers: int = 1,
    seed: int = 0,
    maxiter: int = EIGSH_MAXITER,
) -> EigEstimate:
    """Largest eigenvalue by implicitly restarted Lanczos, checked on the residual."""
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    matrix = op.matrix if isinstance(op, SparseSymOp) else sp.csr_matrix(op)
    n = matrix.shape[0]
    if n <= 2:
        values, vectors = np.linalg.eigh(matrix.toarray())
        v = vectors[:, -1]
        residual = float(np.linalg.norm(matrix @ v - values[-1] * v))
        return EigEstimate(float(values[-1]), residual, 1, method="dense")

    counter = [0]
    rng = np.random.default_rng(seed)
    v0 = 1.0 + 0.1 * rng.random(n)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        values, vectors = eigsh(
            _linear_operator(matrix, counter, pool, workers),
            k=1,
            which="LA",
            v0=v0,
            tol=0,
            maxiter=maxiter,
            ncv=min(n - 1, 40),
        )
    except ArpackNoConvergence as e:
        logger.error(f"Lanczos did not converge on a {n}-dimensional operator")
        raise NonConvergence(f"eigsh did not converge in {maxiter} iterations") from e
    finally:
        if pool is not None:
            pool.shutdown()

    value = float(values[0])
    v = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
    residual = float(np.linalg.norm(matrix @ v - value * v))
    if residual > tol:
        raise NonConvergence(f"Residual {residual:.3e} above tolerance {tol:.1e} (n={n})")
    return EigEstimate(value, residual, counter[0])


def dense_top_eigenvalue(op: SparseSymOp) -> float:
    return float(np.linalg.eigvalsh(op.matrix.toarray())[-1])


def radial_top_eigenvalue(r: int) -> float:
    """lambda(r) from the radial quotient: the Perron vector is constant on spheres,
    so the ball operator reduces to an (r+1)x(r+1) tridiagonal matrix."""
    if r == 0:
        return 0.0
    off = np.full(r, math.sqrt(3.0))
    off[0] = 2.0
    values = eigh_tridiagonal(np.zeros(r + 1), off, eigvals_only=True, select="i", select_range=(r, r))
    return float(values[0])


@dataclass
class KestenRow:
    r: int
    dimension: int
    value: float
    residual: float
    iterations: int
    radial_value: float
    dense_value: Optional[float]
    gap: float


@dataclass
class KestenReport:
    rows: List[KestenRow]
    norm: float
    tol: float
    increasing: bool
    below_norm: bool
    gap_shrinking: bool
    radial_agreement: float
    dense_agreement: Optional[float]

    @property
    def passed(self) -> bool:
        checks = [self.increasing, self.below_norm, self.gap_shrinking, self.radial_agreement <= AGREEMENT_TOL]
        if self.dense_agreement is not None:
            checks.append(self.dense_agreement <= AGREEMENT_TOL)
        return all(checks)

    def values(self) -> List[float]:
        return [row.value for row in self.rows]


def kesten_report(r_max: int, tol: float = DEFAULT_TOL, workers: int = 1, dense_max: int = 5) -> KestenReport:
    """lambda(r) for r = 1..r_max with radial and (small r) dense cross-checks."""
    if r_max < 2:
        raise ValueError(f"Kesten table needs r_max >= 2, got {r_max}")
    norm = kesten_norm(2)
    rows = []
    for r in range(1, r_max + 1):
        op = cayley_ball(r)
        est = top_eigenvalue(op, tol=tol, workers=workers)
        dense = dense_top_eigenvalue(op) if r <= dense_max and op.dimension <= DENSE_MAX_DIM else None
        rows.append(
            KestenRow(r, op.dimension, est.value, est.residual, est.iterations,
                      radial_top_eigenvalue(r), dense, norm - est.value)
        )
        logger.info(f"lambda({r}) = {est.value:.12f} (n={op.dimension}, residual {est.residual:.1e})")

    values = [row.value for row in rows]
    gaps = [row.gap for row in rows]
    dense_rows = [row for row in rows if row.dense_value is not None]
    return KestenReport(
        rows=rows,
        norm=norm,
        tol=tol,
        increasing=all(b > a for a, b in zip(values, values[1:])),
        below_norm=all(v < norm for v in values),
        gap_shrinking=all(b < a for a, b in zip(gaps, gaps[1:])),
        radial_agreement=max(abs(row.value - row.radial_value) for row in rows),
        dense_agreement=max((abs(row.value - row.dense_value) for row in dense_rows), default=None),
    )


@dataclass
class DisplacementReport:
    r: int
    samples: int
    inner_dimension: int
    inner_top_eigenvalue: float
    worst_sum: float
    floor: float
    root_sum: float
    min_sample_sum: float
    min_max_form: float
    epsilon: float
    identity_error: float
    tol: float = AGREEMENT_TOL

    @property
    def passed(self) -> bool:
        return (
            self.worst_sum >= self.floor - self.tol
            and abs(self.root_sum - 4.0) <= self.tol
            and self.min_max_form >= self.epsilon - self.tol
            and self.identity_error <= self.tol
        )


def _translate_norms(op: SparseSymOp, xi: np.ndarray, letter: int) -> np.ndarray:
    """||pi(g) xi - xi||^2 per row of xi, for xi supported on the inner ball."""
    m = xi.shape[1]
    n = op.dimension
    shifted = np.zeros((xi.shape[0], n))
    shifted[:, op.moves[letter, :m]] = xi
    shifted[:, :m] -= xi
    return np.einsum("ij,ij->i", shifted, shifted)


def displacement_bound(
    r: int, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol: float = DEFAULT_TOL, workers: int = 1
) -> DisplacementReport:
    """Check sum_i ||pi(f_i) xi - xi||^2 >= 4 - 2*sqrt(3) on the inner ball of radius r - 1,
    at the worst vector and on random unit samples (plus the max-form bound)."""
    if r < 2:
        raise ValueError(f"Displacement check needs r >= 2, got {r}")
    op = cayley_ball(r)
    inner = cayley_ball(r - 1)
    m = inner.dimension
    lam = top_eigenvalue(inner, tol=tol, workers=workers).value

    root = np.zeros((1, m))
    root[0, 0] = 1.0
    root_sum = float(_translate_norms(op, root, 0)[0] + _translate_norms(op, root, 2)[0])

    rng = np.random.default_rng(seed)
    batch = max(1, min(samples, 2_000_000 // op.dimension))
    min_sum, min_max, identity_error = math.inf, math.inf, 0.0
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        xi = rng.standard_normal((k, m))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        da = _translate_norms(op, xi, 0)
        db = _translate_norms(op, xi, 2)
        quad = np.einsum("ij,ij->i", (inner.matrix @ xi.T).T, xi)
        identity_error = max(identity_error, float(np.abs(da + db - (4.0 - quad)).max()))
        min_sum = min(min_sum, float((da + db).min()))
        min_max = min(min_max, float(np.sqrt(np.maximum(da, db)).min()))
        done += k

    report = DisplacementReport(
        r=r,
        samples=samples,
        inner_dimension=m,
        inner_top_eigenvalue=lam,
        worst_sum=4.0 - lam,
        floor=displacement_floor(),
        root_sum=root_sum,
        min_sample_sum=min_sum,
        min_max_form=min_max,
        epsilon=kazhdan_epsilon(),
        identity_error=identity_error,
    )
    logger.info(
        f"Displacement r={r}: worst {report.worst_sum:.9f} >= {report.floor:.9f}, "
        f"min max-form {report.min_max_form:.7f} over {samples} samples"
    )
    return report


@dataclass
class KazhdanReport:
    base: int
    r: int
    dimension: int
    tree: bool
    isomorphic: bool
    schreier_value: float
    cayley_value: float
    agreement: float
    schreier_worst_sum: float
    cayley_worst_sum: float
    tol: float = AGREEMENT_TOL
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.tree
            and self.isomorphic
            and self.agreement <= self.tol
            and abs(self.schreier_worst_sum - self.cayley_worst_sum) <= self.tol
        )


def _graph_operator(graph: nx.MultiGraph, base: int, radius: int) -> SparseSymOp:
    nodes = sorted((n for n, d in graph.nodes(data="depth") if d <= radius), key=lambda x: (graph.nodes[x]["depth"], x))
    sub = nx.Graph(graph.subgraph(nodes))
    matrix = sp.csr_matrix(nx.to_scipy_sparse_array(sub, nodelist=nodes, dtype=np.float64))
    depth = np.array([graph.nodes[x]["depth"] for x in nodes])
    return SparseSymOp(matrix, f"SchreierBall(base={base}, r={radius})", radius, depth)


def kazhdan_check_on_orbit(
    source: Union[FreePair, FreePairBuilder],
    base: int,
    r: int,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> KazhdanReport:
    """Compare the orbit ball of the constructed pair with the abstract Cayley ball."""
    graph = schreier_ball(source, base, r)
    try:
        certify_tree_ball(graph, r)
    except NotFreeError:
        logger.error(f"Orbit ball around {base} of radius {r} is not a tree")
        raise

    cayley = cayley_ball(r)
    tree = nx.Graph(graph)
    cayley_graph = nx.from_scipy_sparse_array(cayley.matrix)
    mapping = nx.isomorphism.rooted_tree_isomorphism(tree, base, cayley_graph, 0)
    schreier_op = _graph_operator(graph, base, r)

    lam_s = top_eigenvalue(schreier_op, tol=tol, workers=workers).value
    lam_c = top_eigenvalue(cayley, tol=tol, workers=workers).value
    inner_s = top_eigenvalue(_graph_operator(graph, base, r - 1), tol=tol).value if r >= 1 else 0.0
    inner_c = top_eigenvalue(cayley_ball(r - 1), tol=tol).value if r >= 1 else 0.0

    report = KazhdanReport(
        base=base,
        r=r,
        dimension=schreier_op.dimension,
        tree=True,
        isomorphic=bool(mapping),
        schreier_value=lam_s,
        cayley_value=lam_c,
        agreement=abs(lam_s - lam_c),
        schreier_worst_sum=4.0 - inner_s,
        cayley_worst_sum=4.0 - inner_c,
    )
    logger.info(
        f"Orbit ball base={base} r={r}: lambda {lam_s:.12f} vs Cayley {lam_c:.12f} "
        f"(|diff| {report.agreement:.1e})"
    )
    return report
