"""A tour of the built-in structure matrices.

The structure matrix L is any symmetric positive semidefinite matrix
over the predictors; the quadratic penalty pulls the direct effects
toward its null space.  Three builders cover common situations:

  * chain Laplacian, for predictors ordered along a line (spectra,
    positions on a chromosome, time);
  * genetic precision, the exact inverse of an AR(1)-like marker
    correlation derived from a recombination map;
  * motif neighborhood Laplacian, connecting DNA words within a given
    Hamming distance.
"""

import tempfile
from pathlib import Path

import numpy as np

import cggmreg as cg

print("chain Laplacian, p = 5:")
print(cg.chain_laplacian(5).dense())

print("\nsecond-order variant (squared chain), p = 5:")
print(cg.chain_laplacian(5, order=2).dense())

# genetic map: two chromosomes, positions in centimorgans
map_csv = """\
marker,chromosome,position_cM
m1,chr1,0.0
m2,chr1,3.0
m3,chr1,10.0
m4,chr2,0.0
m5,chr2,5.0
"""
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "map.csv"
    path.write_text(map_csv)
    gmap = cg.read_genetic_map(path, rho=0.98)

lmat = cg.genetic_precision(gmap).dense()
print("\ngenetic precision for a 5-marker map (block diagonal, tridiagonal):")
with np.printoptions(precision=3, suppress=True):
    print(lmat)

# the defining property: it inverts the marker correlation matrix
pos = np.array([0.0, 3.0, 10.0])
corr = 0.98 ** np.abs(pos[:, None] - pos[None, :])
print("\nL_chr1 @ corr_chr1 (should be the identity):")
with np.printoptions(precision=3, suppress=True):
    print(lmat[:3, :3] @ corr)

# DNA motifs of length 3 within Hamming distance 1 of each other
lap = cg.hamming_laplacian(3, 1)
adj = cg.hamming_adjacency(3, 1)
print(f"\nmotif graph for k=3, ell=1: {adj.shape[0]} motifs, "
      f"{(adj.nnz - adj.shape[0]) // 2} edges")
print(f"every motif has {int(adj[0].sum()) - 1} neighbors "
      f"(3 positions x 3 substitutions)")
print(f"Laplacian row sums (self count included): "
      f"{np.unique(np.asarray(lap.dense().sum(axis=1)).round(12))}")
