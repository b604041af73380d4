# Conformally symmetric cross-ratio fields: which (a, b, c) triples
# extend to a large immersed patch, and which degenerate along the way.
#
# A triple with |abc| = 1 and arguments summing to 2 pi produces a field
# whose flowers all close; growing it from a seed then succeeds at any
# tested extent. Nudging the arguments past that line keeps the flowers
# closing algebraically but the grown image stops being locally embedded
# partway out.

import numpy as np

from thetaconf.confsym import (
    ConfSymParams,
    DoyleSpec,
    confsym_field,
    doyle_cross_ratios,
    doyle_quad_from_angles,
    gen_doyle,
    grow_from_q,
    is_doyle_type,
    matched_lattice_angles,
)
from thetaconf.geom import build_mesh, is_discrete_immersion

w = np.exp(2j * np.pi / 3)
field = confsym_field(ConfSymParams(a=w, b=w, c=w, rows=24, cols=24))
res = grow_from_q(field)
image = build_mesh(res.positions, field.mesh.triangles)
print(f"equilateral triple: placed {res.n_placed} vertices, ok={res.ok}, "
      f"embedded={is_discrete_immersion(image).ok}")

w2 = np.exp(1j * np.pi * (2.0 / 3.0 + 1.0 / 200.0))
res2 = grow_from_q(confsym_field(ConfSymParams(a=w2, b=w2, c=w2, rows=24, cols=24)))
print(f"rotated triple:     placed {res2.n_placed} of "
      f"{24 * 24}, ok={res2.ok}")
for f in res2.failures[:3]:
    print("   ", f.kind, "at vertex", f.vertex)

# Doyle spirals are the class-constant fields that do extend forever.
# Build one from six cell angles, then read the matched lattice whose
# class logs share all imaginary parts: the two meshes differ by a
# pure right-angle deformation.
angles = (0.9, 1.1, np.pi - 2.0, 0.75, 1.3, np.pi - 2.05)
spec = DoyleSpec(quad=doyle_quad_from_angles(angles), rows=8, cols=8)
spiral = gen_doyle(spec)
logs = doyle_cross_ratios(angles)
print("spiral class logs:", np.round(logs, 6))
print("log sum (should be 2 pi i):", np.round(sum(logs), 12))
triple = ConfSymParams(
    a=np.exp(logs[2]), b=np.exp(logs[1]), c=np.exp(logs[0]), rows=8, cols=8
)
print("is Doyle type:", is_doyle_type(triple))
print("matched lattice angles:", matched_lattice_angles(angles))
