"""
Edge cross-ratios and flower closing
====================================

Walks the basic invariants on small hand-built meshes: the constant
cross-ratio of the equilateral lattice, the square-with-diagonal anchor,
and the closing conditions around an interior vertex.
"""

import numpy as np

from thetaconf.confsym import LatticeSpec, gen_lattice
from thetaconf.crossratio import CrossRatioField, check_flower_closing, edge_cross_ratio
from thetaconf.geom import build_mesh

# A lattice of equilateral triangles has the same cross-ratio on every
# interior edge: the primitive sixth root of unity squared.
mesh = gen_lattice(LatticeSpec(alpha=np.pi / 3, beta=np.pi / 3, rows=5, cols=5))
field = CrossRatioField.from_positions(mesh)
qs = field.values[mesh.interior_edge_ids]
print("equilateral lattice:")
print("  interior edges:", mesh.interior_edge_ids.size)
print("  q spread:", float(np.max(np.abs(qs - np.exp(2j * np.pi / 3)))))

# Two right isoceles triangles sharing a unit edge, apexes at i and 1 - i:
# the four corners of a square with its diagonal traversed as the shared
# edge. The cross-ratio there is 2i.
verts = np.array([0.0, 1.0, 1.0j, 1.0 - 1.0j], dtype=complex)
tris = np.array([[0, 1, 2], [1, 0, 3]])
square = build_mesh(verts, tris)
print("square diagonal q:", edge_cross_ratio(square, (0, 1)))

# Around an interior vertex the spoke cross-ratios satisfy two closing
# conditions. Send the center to infinity: the opposite ring becomes a
# closed polygon, so the product of the negated spokes is one and the
# polygon edge vectors sum to zero.
rng = np.random.default_rng(7)
angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, 7))
ring = np.exp(1j * angles) * rng.uniform(0.8, 1.3, 7)
fl_verts = np.concatenate([[0.0 + 0.0j], ring])
fl_tris = np.array([[0, 1 + k, 1 + (k + 1) % 7] for k in range(7)])
flower = build_mesh(fl_verts, fl_tris)
spokes = [flower.edge_id(0, r) for r in range(1, 8)]
rep = check_flower_closing(CrossRatioField.from_positions(flower).values[spokes])
print("valence-7 flower:")
print("  holonomy defect:", rep.holonomy_defect)
print("  closure defect:", rep.closure_defect)
print("  arg sum:", rep.arg_sum, "expected:", rep.arg_sum_expected)
