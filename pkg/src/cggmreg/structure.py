"""Builders for the p x p structure matrices entering the quadratic penalty.

Available constructions: identity (plain ridge on the direct effects),
chain-graph Laplacian and its powers (smooth first-difference prior),
tridiagonal genetic-map precision (inhomogeneous AR(1) inverse), and the
Hamming l-distance Laplacian over DNA motifs built by a Kronecker
recursion.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .model import DataSet

# PSD verification is O(p^3); trusted above this size.
_PSD_CHECK_MAX_DIM = 2000


@dataclass(frozen=True)
class StructureMatrix:
    """Symmetric PSD prior matrix with a provenance tag.

    values is a dense ndarray for moderate p and a scipy CSR matrix for
    the large Hamming graphs.
    """

    values: np.ndarray | scipy.sparse.spmatrix
    provenance: str = "custom"

    def __post_init__(self):
        v = self.values
        if v.shape[0] != v.shape[1]:
            raise ValueError("structure matrix must be square")
        if scipy.sparse.issparse(v):
            asym = abs(v - v.T).max()
        else:
            asym = np.abs(v - v.T).max()
        if asym > 1e-12 * (1.0 + _norm(v)):
            raise ValueError("structure matrix must be symmetric")
        if v.shape[0] <= _PSD_CHECK_MAX_DIM:
            dense = v.toarray() if scipy.sparse.issparse(v) else v
            lo = np.linalg.eigvalsh(dense)[0]
            if lo < -1e-8 * (1.0 + _norm(v)):
                raise ValueError(
                    f"structure matrix is not positive semidefinite "
                    f"(min eigenvalue {lo:.3g})"
                )

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def dense(self) -> np.ndarray:
        v = self.values
        return v.toarray() if scipy.sparse.issparse(v) else np.asarray(v)


def _norm(v):
    if scipy.sparse.issparse(v):
        return scipy.sparse.linalg.norm(v)
    return np.linalg.norm(v)


def identity_structure(p: int) -> StructureMatrix:
    """Non-informative prior L = I_p (Elastic-Net-like ridge on omega)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return StructureMatrix(np.eye(p), "identity")


def chain_laplacian(p: int, order: int = 1) -> StructureMatrix:
    """Combinatorial Laplacian of the chain graph, L = (D'D)^order.

    D is the (p-1) x p first forward difference matrix.  Higher orders
    give a stronger smoothing prior.
    """
    if p < 2:
        raise ValueError("chain Laplacian needs p >= 2")
    if order < 1:
        raise ValueError("order must be >= 1")
    d = np.zeros((p - 1, p))
    idx = np.arange(p - 1)
    d[idx, idx] = 1.0
    d[idx, idx + 1] = -1.0
    lap = d.T @ d
    out = np.linalg.matrix_power(lap, order)
    out = 0.5 * (out + out.T)
    return StructureMatrix(out, f"chain(order {order})")


@dataclass(frozen=True)
class GeneticMap:
    """Ordered markers per chromosome with adjacent genetic distances.

    chromosomes maps chromosome name -> (marker names, adjacent distances),
    where distances has one entry fewer than markers.  Chromosome
    boundaries are treated as infinite distance.
    """

    chromosomes: dict = field(default_factory=dict)
    rho: float = 0.98

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ValueError("rho must be in (0, 1)")
        for chrom, (names, dists) in self.chromosomes.items():
            if len(dists) != len(names) - 1:
                raise ValueError(f"chromosome {chrom}: distances/markers mismatch")
            if any(d <= 0 for d in dists):
                raise ValueError(f"chromosome {chrom}: nonpositive marker distance")

    @property
    def p(self) -> int:
        return sum(len(names) for names, _ in self.chromosomes.values())


def read_genetic_map(path, rho: float = 0.98) -> GeneticMap:
    """Parse a CSV genetic map with header ``marker,chromosome,position_cM``.

    Markers must appear in map order within each chromosome; adjacent
    distances are derived from the positions.
    """
    chroms: dict[str, tuple[list, list]] = {}
    positions: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"marker", "chromosome", "position_cM"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                "genetic map CSV must have header marker,chromosome,position_cM"
            )
        for row in reader:
            chrom = row["chromosome"]
            names, _ = chroms.setdefault(chrom, ([], []))
            names.append(row["marker"])
            positions.setdefault(chrom, []).append(float(row["position_cM"]))
    for chrom, (names, dists) in chroms.items():
        pos = positions[chrom]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError(
                f"chromosome {chrom}: positions must be strictly increasing"
            )
        dists.extend(b - a for a, b in zip(pos, pos[1:]))
    return GeneticMap(chromosomes=chroms, rho=rho)


def genetic_precision(gmap: GeneticMap) -> StructureMatrix:
    """Tridiagonal precision of the inhomogeneous AR(1) marker correlation.

    Within a chromosome, cor(M_i, M_j) = rho^{d_ij} with d_ij the summed
    adjacent distances; the returned matrix is the inverse of that
    correlation matrix, block diagonal across chromosomes.  Boundary
    terms use the infinite-distance limit (rho^{2d} -> 0) analytically.
    """
    rho = gmap.rho
    blocks = []
    for names, dists in gmap.chromosomes.values():
        m = len(names)
        block = np.zeros((m, m))
        # a_i = rho^{2 d_{i-1,i}} looking left, b_i looking right; 0 at ends
        left = [0.0] + [rho ** (2.0 * d) for d in dists]
        right = [rho ** (2.0 * d) for d in dists] + [0.0]
        for i in range(m):
            block[i, i] = (1.0 - left[i] * right[i]) / ((1.0 - left[i]) * (1.0 - right[i]))
        for i, d in enumerate(dists):
            off = -(rho ** d) / (1.0 - rho ** (2.0 * d))
            block[i, i + 1] = off
            block[i + 1, i] = off
        blocks.append(block)
    return StructureMatrix(scipy.linalg.block_diag(*blocks), "genetic")


# DNA alphabet in lexicographic order, leftmost motif character most
# significant in the index.
DNA_ALPHABET = "ACGT"


def _as_bool_sparse(m) -> scipy.sparse.csr_matrix:
    out = scipy.sparse.csr_matrix(m, dtype=bool)
    out.eliminate_zeros()  # boolean sums leave explicit False entries behind
    return out


def hamming_adjacency(k: int, ell: int, max_k: int = 10) -> scipy.sparse.csr_matrix:
    """0/1 adjacency over the 4^k DNA motifs: 1 iff Hamming distance <= ell.

    Built by the Kronecker recursion over motif length:
    D(k+1, l) = (I_4 kron D(k, l)) OR (ones_4 kron D(k, l-1)), where the
    OR is Boolean.  Returns a sparse boolean CSR matrix.
    """
    if not 0 <= ell <= k:
        raise ValueError(f"need 0 <= ell <= k, got k={k}, ell={ell}")
    if k > max_k:
        raise ValueError(f"k={k} exceeds the memory guard max_k={max_k}")
    eye4 = _as_bool_sparse(scipy.sparse.identity(4))
    ones4 = _as_bool_sparse(np.ones((4, 4)))
    if k == 1:
        return eye4 if ell == 0 else ones4
    if ell == 0:
        return _as_bool_sparse(scipy.sparse.identity(4 ** k))
    if ell == k:
        # saturated: any two k-mers differ in at most k positions
        prev = hamming_adjacency(k - 1, k - 1, max_k)
        return _as_bool_sparse(scipy.sparse.kron(ones4, prev))
    d_same = hamming_adjacency(k - 1, ell, max_k)
    d_less = hamming_adjacency(k - 1, ell - 1, max_k)
    out = scipy.sparse.kron(eye4, d_same) + scipy.sparse.kron(ones4, d_less)
    return _as_bool_sparse(out)


def hamming_adjacency_by_ell(k: int, ell: int, max_k: int = 10) -> scipy.sparse.csr_matrix:
    """Alternate recursion over the distance threshold; cross-check path.

    D(k, l+1) = (I_4 kron D(k-1, l+1)) OR (ones_4 kron D(k-1, l)):
    splitting on the first character, the suffix budget drops by one
    exactly when the first characters differ.
    """
    if not 0 <= ell <= k:
        raise ValueError(f"need 0 <= ell <= k, got k={k}, ell={ell}")
    if k > max_k:
        raise ValueError(f"k={k} exceeds the memory guard max_k={max_k}")
    if ell == 0:
        return _as_bool_sparse(scipy.sparse.identity(4 ** k))
    if k == 1:
        return _as_bool_sparse(np.ones((4, 4)))
    eye4 = _as_bool_sparse(scipy.sparse.identity(4))
    ones4 = _as_bool_sparse(np.ones((4, 4)))
    d_hi = hamming_adjacency_by_ell(k - 1, min(ell, k - 1), max_k)
    d_lo = hamming_adjacency_by_ell(k - 1, ell - 1, max_k)
    out = scipy.sparse.kron(eye4, d_hi) + scipy.sparse.kron(ones4, d_lo)
    return _as_bool_sparse(out)


def hamming_laplacian(k: int, ell: int, *, include_self: bool = True,
                      max_k: int = 10) -> StructureMatrix:
    """Laplacian of the Hamming l-distance graph over the 4^k motifs.

    By default the diagonal counts every motif within distance ell
    including the motif itself, so row sums equal +1 (instead of the
    standard graph-Laplacian 0).  Pass include_self=False for the
    standard Laplacian with zero row sums.
    """
    adj = hamming_adjacency(k, ell, max_k)
    degrees = np.asarray(adj.sum(axis=1)).ravel().astype(float)
    if not include_self:
        degrees -= 1.0
    m = 4 ** k
    lap = scipy.sparse.diags(degrees) - adj.astype(float)
    lap.setdiag(degrees)  # adj diagonal is 1: restore the full self-count
    lap = scipy.sparse.csr_matrix(lap)
    if m <= 4096:
        return StructureMatrix(lap.toarray(), f"hamming({k}, {ell})")
    return StructureMatrix(lap, f"hamming({k}, {ell})")


def screen_predictors(data: DataSet, m: int) -> np.ndarray:
    """Indices of the m predictors with highest marginal correlation to y.

    The score of predictor j is max_k |corr(x_j, y_k)|; ties break by
    index.  Zero-variance predictors score 0 with a warning.
    """
    if not 1 <= m <= data.p:
        raise ValueError(f"need 1 <= m <= p={data.p}, got {m}")
    x = data.x - data.x.mean(axis=0)
    y = data.y - data.y.mean(axis=0)
    sx = np.sqrt((x ** 2).sum(axis=0))
    sy = np.sqrt((y ** 2).sum(axis=0))
    dead = sx == 0
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} zero-variance predictor(s); correlation set to 0"
        )
        sx = np.where(dead, 1.0, sx)
    corr = np.abs(x.T @ y) / np.outer(sx, sy)
    corr[dead, :] = 0.0
    scores = corr.max(axis=1)
    order = np.argsort(-scores, kind="stable")
    return order[:m]


def restrict(data: DataSet, structure: StructureMatrix,
             keep: np.ndarray) -> tuple[DataSet, StructureMatrix]:
    """Restrict predictors and the structure matrix to the kept indices."""
    sub = structure.dense()[np.ix_(keep, keep)]
    new_data = DataSet(
        x=data.x[:, keep], y=data.y, centered=data.centered,
        x_mean=None if data.x_mean is None else data.x_mean[keep],
        y_mean=data.y_mean, y_scale=data.y_scale,
        x_scale=None if data.x_scale is None else data.x_scale[keep],
    )
    return new_data, StructureMatrix(sub, structure.provenance)
