"""Gluing solved triangle shapes into one planar image.

Once each triangle of a simply connected mesh has closed deformed edge
vectors, the image is assembled by walking the dual graph: every new
triangle is pinned to an already placed neighbor along their shared edge.
When the stretch corrections of neighboring triangles agree on every
interior edge (a vanishing gradient residual), the chain of pinnings
telescopes and the result does not depend on the walk order. When they
do not agree, the walk still succeeds on a spanning tree of the dual
graph and the disagreement shows up only on the remaining edges, where
it is measured and reported instead of raised; that keeps near-solutions
inspectable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .crossratio import CrossRatioField, check_flower_closing, theta_residual
from .errors import (
    AnchorDegenerate,
    DegenerateImage,
    Infeasible,
    InfeasibleTriangle,
    NotConverged,
    ValidationError,
)
from .geom import TriMesh, flower, star_embedding_failure
from .trisolve import TriangleFrame, deformed_edges, solve_nu

__all__ = [
    "LayoutResult",
    "VerifyReport",
    "reconstruct",
    "verify_layout",
    "flower_target_sums",
    "fit_similarity",
    "similarity_deviation",
]


@dataclass(frozen=True)
class LayoutResult:
    """Assembled image positions plus consistency diagnostics.

    Edge arrays are aligned with ``mesh.interior_edge_ids`` and vertex
    arrays with ``mesh.interior_vertex_ids``. ``gluing_mismatches`` holds,
    per interior edge, the largest distance between the two placements of
    an endpoint by the edge's two triangles; edges of the gluing tree are
    exact by construction. ``per_edge_theta_residuals`` compares the image
    cross-ratio logs against the reference ones along the rotated axis.
    """

    positions: np.ndarray
    anchor: tuple[int, tuple[complex, complex]]
    per_edge_theta_residuals: np.ndarray
    gluing_mismatches: np.ndarray
    flower_consistency_defects: np.ndarray
    embedded: np.ndarray

    @property
    def max_theta_residual(self) -> float:
        r = self.per_edge_theta_residuals
        return float(np.max(np.abs(r))) if r.size else 0.0

    @property
    def max_mismatch(self) -> float:
        m = self.gluing_mismatches
        return float(np.max(m)) if m.size else 0.0

    @property
    def all_embedded(self) -> bool:
        return bool(np.all(self.embedded))


@dataclass(frozen=True)
class VerifyReport:
    """Single-pass consistency report for a source/image position pair."""

    theta: float
    theta_residuals: np.ndarray
    max_theta_residual: float
    flower_defects: np.ndarray
    max_flower_defect: float
    embedded: np.ndarray
    all_embedded: bool
    ok: bool


def _normalize_anchor(mesh: TriMesh, anchor):
    """Resolve the anchor into (triangle id, first-edge endpoint positions)."""
    if anchor is None:
        anchor = (0, None)
    if isinstance(anchor, (int, np.integer)):
        anchor = (int(anchor), None)
    try:
        tri, seg = anchor
    except (TypeError, ValueError) as exc:
        raise ValidationError("anchor must be a (triangle id, segment) pair") from exc
    tri = int(tri)
    if not 0 <= tri < mesh.n_triangles:
        raise ValidationError(f"anchor triangle id {tri} out of range")
    if seg is None:
        i, j = mesh.triangles[tri, 0], mesh.triangles[tri, 1]
        pa, pb = complex(mesh.vertices[i]), complex(mesh.vertices[j])
    else:
        pa, pb = complex(seg[0]), complex(seg[1])
    if not (np.isfinite(pa) and np.isfinite(pb)):
        raise AnchorDegenerate("anchor segment endpoints must be finite")
    if pa == pb:
        raise AnchorDegenerate("anchor segment endpoints coincide")
    return tri, pa, pb


def _glue(mesh: TriMesh, zhat: np.ndarray, local: np.ndarray, t: int, parent: int, e: int):
    """Place triangle t so its copy of edge e covers the parent's segment."""
    s = int(np.argmax(mesh.tri_edges[t] == e))
    a = mesh.triangles[t, s]
    b = mesh.triangles[t, (s + 1) % 3]
    qa = local[parent, int(np.argmax(mesh.triangles[parent] == a))]
    qb = local[parent, int(np.argmax(mesh.triangles[parent] == b))]
    mu = (qb - qa) / zhat[t, s]
    local[t, s] = qa
    local[t, (s + 1) % 3] = qb
    local[t, (s + 2) % 3] = qb + mu * zhat[t, (s + 1) % 3]


def _flower_stats(mesh: TriMesh, positions: np.ndarray):
    """Closing defects and embedding flags per interior vertex."""
    vids = mesh.interior_vertex_ids
    defects = np.zeros(vids.size)
    embedded = np.zeros(vids.size, dtype=bool)
    field = CrossRatioField.from_positions(mesh, positions)
    for n, v in enumerate(vids):
        fl = flower(mesh, int(v))
        ring = np.asarray(fl.ring)
        spokes = np.array([mesh.edge_id(int(v), int(r)) for r in ring])
        report = check_flower_closing(np.exp(field.logs[spokes]))
        defects[n] = max(report.holonomy_defect, report.closure_defect)
        embedded[n] = star_embedding_failure(positions[v], positions[ring]) is None
    return defects, embedded


def reconstruct(
    mesh: TriMesh,
    frames: TriangleFrame | None,
    omega,
    theta: float,
    anchor=None,
    order: str = "bfs",
) -> LayoutResult:
    """Assemble image vertex positions from per-edge scale parameters.

    ``omega`` is a per-mesh-edge real array (or an object exposing one as
    ``.value``). Each triangle's stretch corrections are solved first; the
    triangles are then glued over a spanning tree of the dual graph grown
    from the anchor triangle, breadth first by default (``order="dfs"``
    walks the same tree data depth first, which changes the tree). The
    anchor is ``(triangle id, (p, q))`` placing that triangle's first edge
    on the segment from p to q; ``None`` uses triangle 0 on its reference
    segment.
    """
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValidationError("theta must be finite")
    if order not in ("bfs", "dfs"):
        raise ValidationError("order must be 'bfs' or 'dfs'")
    if frames is None:
        frames = TriangleFrame.from_mesh(mesh)
    value = np.asarray(getattr(omega, "value", omega), dtype=float)
    if value.shape != (mesh.n_edges,):
        raise ValidationError("omega must provide one value per mesh edge")
    if not np.all(np.isfinite(value)):
        raise ValidationError("omega values must be finite")
    if not mesh.is_disk():
        raise ValidationError("reconstruction requires a simply connected disk mesh")
    tri0, pa, pb = _normalize_anchor(mesh, anchor)

    omega_tri = value[mesh.tri_edges]
    try:
        sol = solve_nu(frames, omega_tri, theta)
    except (Infeasible, DegenerateImage, NotConverged) as exc:
        err = InfeasibleTriangle(f"triangle closing failed: {exc}")
        err.indices = getattr(exc, "indices", None)
        raise err from exc
    zhat = deformed_edges(frames, omega_tri, sol.nu, theta)

    local = np.zeros((mesh.n_triangles, 3), dtype=complex)
    mu0 = (pb - pa) / zhat[tri0, 0]
    local[tri0, 0] = pa
    local[tri0, 1] = pb
    local[tri0, 2] = pb + mu0 * zhat[tri0, 1]

    scheduled = np.zeros(mesh.n_triangles, dtype=bool)
    scheduled[tri0] = True
    frontier: deque = deque([(tri0, -1, -1)])
    pop_order: list[int] = []
    while frontier:
        t, parent, via = frontier.popleft() if order == "bfs" else frontier.pop()
        if parent >= 0:
            _glue(mesh, zhat, local, t, parent, via)
        pop_order.append(t)
        for s in range(3):
            e = int(mesh.tri_edges[t, s])
            lt = int(mesh.edge_left[e])
            nb = int(mesh.edge_right[e]) if lt == t else lt
            if nb >= 0 and not scheduled[nb]:
                scheduled[nb] = True
                frontier.append((nb, t, e))
    if not np.all(scheduled):
        raise ValidationError("mesh triangles are not edge-connected")

    positions = np.zeros(mesh.n_vertices, dtype=complex)
    seen = np.zeros(mesh.n_vertices, dtype=bool)
    for t in pop_order:
        for s in range(3):
            v = int(mesh.triangles[t, s])
            if not seen[v]:
                seen[v] = True
                positions[v] = local[t, s]

    ids = mesh.interior_edge_ids
    if ids.size:
        lt = mesh.edge_left[ids]
        rt = mesh.edge_right[ids]
        sl = np.argmax(mesh.tri_edges[lt] == ids[:, None], axis=1)
        sr = np.argmax(mesh.tri_edges[rt] == ids[:, None], axis=1)
        # The left triangle traverses the edge i->j, the right one j->i.
        pi_l = local[lt, sl]
        pj_l = local[lt, (sl + 1) % 3]
        pj_r = local[rt, sr]
        pi_r = local[rt, (sr + 1) % 3]
        mismatches = np.maximum(np.abs(pi_l - pi_r), np.abs(pj_l - pj_r))
        ref_logs = CrossRatioField.from_positions(mesh).logs[ids]
        img_logs = CrossRatioField.from_positions(mesh, positions).logs[ids]
        residuals = np.asarray(theta_residual(img_logs, ref_logs, theta))
    else:
        mismatches = np.zeros(0)
        residuals = np.zeros(0)
    defects, embedded = _flower_stats(mesh, positions)

    return LayoutResult(
        positions=positions,
        anchor=(tri0, (pa, pb)),
        per_edge_theta_residuals=residuals,
        gluing_mismatches=mismatches,
        flower_consistency_defects=defects,
        embedded=embedded,
    )


def verify_layout(
    mesh: TriMesh,
    src_positions,
    img_positions,
    theta: float,
    targets=None,
    tol: float = 1e-9,
) -> VerifyReport:
    """Compare an image immersion against a source along the rotated axis.

    Residual per interior edge is Re[e^{-i theta}(log q_img - log q_src)]
    minus the prescribed target (zero by default). Flower closing defects
    and embedding flags are measured on the image. ``ok`` means every
    residual is within ``tol`` and every image flower embeds.
    """
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValidationError("theta must be finite")
    src = mesh.positions_or(src_positions)
    img = mesh.positions_or(img_positions)
    if not np.all(np.isfinite(img)):
        raise ValidationError("image positions must be finite")
    ids = mesh.interior_edge_ids
    if targets is None:
        t = np.zeros(ids.size)
    else:
        t = np.broadcast_to(np.asarray(targets, dtype=float), (ids.size,)).copy()
    if ids.size:
        src_logs = CrossRatioField.from_positions(mesh, src).logs[ids]
        img_logs = CrossRatioField.from_positions(mesh, img).logs[ids]
        residuals = np.asarray(theta_residual(img_logs, src_logs, theta)) - t
    else:
        residuals = np.zeros(0)
    defects, embedded = _flower_stats(mesh, img)
    max_res = float(np.max(np.abs(residuals))) if residuals.size else 0.0
    max_def = float(np.max(defects)) if defects.size else 0.0
    all_emb = bool(np.all(embedded))
    return VerifyReport(
        theta=theta,
        theta_residuals=residuals,
        max_theta_residual=max_res,
        flower_defects=defects,
        max_flower_defect=max_def,
        embedded=embedded,
        all_embedded=all_emb,
        ok=(max_res <= tol) and all_emb,
    )


def flower_target_sums(mesh: TriMesh, targets) -> np.ndarray:
    """Sums of prescribed residuals over the spoke edges of each flower.

    The residual field measured from any genuine immersion sums to zero
    around every interior vertex, so these sums are an obstruction: when
    one is nonzero the targets cannot be realized by a seamless image,
    and reconstruction will park the excess on its non-tree edges. The
    result is aligned with ``mesh.interior_vertex_ids``.
    """
    ids = mesh.interior_edge_ids
    t = np.broadcast_to(np.asarray(targets, dtype=float), (ids.size,))
    i, j = mesh.edges[ids, 0], mesh.edges[ids, 1]
    out = np.zeros(mesh.interior_vertex_ids.size)
    for n, v in enumerate(mesh.interior_vertex_ids):
        out[n] = float(t[(i == v) | (j == v)].sum())
    return out


def fit_similarity(src, dst) -> tuple[complex, complex]:
    """Least-squares a, b with a*src + b closest to dst pointwise."""
    s = np.asarray(src, dtype=complex).ravel()
    d = np.asarray(dst, dtype=complex).ravel()
    if s.shape != d.shape or s.size < 2:
        raise ValidationError("need two equal-length point arrays of size >= 2")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(d))):
        raise ValidationError("similarity fit needs finite points")
    sc = s - s.mean()
    dc = d - d.mean()
    denom = float(np.vdot(sc, sc).real)
    if denom == 0.0:
        raise AnchorDegenerate("source points all coincide")
    a = complex(np.vdot(sc, dc) / denom)
    b = complex(d.mean() - a * s.mean())
    return a, b


def similarity_deviation(src, dst) -> float:
    """Largest pointwise gap after the best similarity src -> dst."""
    a, b = fit_similarity(src, dst)
    s = np.asarray(src, dtype=complex).ravel()
    d = np.asarray(dst, dtype=complex).ravel()
    return float(np.max(np.abs(a * s + b - d)))
