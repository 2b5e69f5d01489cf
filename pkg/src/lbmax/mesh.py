"""Triangle meshes of closed surfaces: construction, gluing, topology and OFF I/O.

A :class:`TriMesh` stores an embedding in 3-space for display and, optionally,
an intrinsic metric per triangle (the Gram matrix of its two edge vectors).
When the metric is present it overrides the embedding for all geometry, which
is how flat tori and glued surfaces keep their intended shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import TorusParams, _as_params


class MeshError(ValueError):
    """Invalid or non-manifold mesh."""


def _edge_gram(P0, P1, P2) -> np.ndarray:
    e1 = P1 - P0
    e2 = P2 - P0
    G = np.empty((len(P0), 2, 2))
    G[:, 0, 0] = np.einsum("ij,ij->i", e1, e1)
    G[:, 1, 1] = np.einsum("ij,ij->i", e2, e2)
    G[:, 0, 1] = G[:, 1, 0] = np.einsum("ij,ij->i", e1, e2)
    return G


@dataclass(frozen=True)
class TriMesh:
    """Closed triangle mesh.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (F, 3) int array, counterclockwise seen from outside
    uv : (V, 2) float array, optional
        Periodic parameter coordinates in [0, 1)^2 for flat tori.
    gram : (F, 2, 2) float array, optional
        Per-triangle metric overriding the embedding.
    grid_shape : (n_u, n_v), optional
        Set for structured torus meshes, whose vertex ``(i, j)`` has index
        ``i + n_u * j``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    uv: np.ndarray | None = None
    gram: np.ndarray | None = None
    grid_shape: tuple[int, int] | None = field(default=None)

    def __post_init__(self):
        V = np.ascontiguousarray(self.vertices, dtype=float)
        T = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if T.ndim != 2 or T.shape[1] != 3:
            raise MeshError("triangles must have shape (F, 3)")
        if T.size and (T.min() < 0 or T.max() >= len(V)):
            raise MeshError("triangle index out of range")
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)
        if self.gram is not None:
            G = np.asarray(self.gram, dtype=float)
            if G.shape != (len(T), 2, 2):
                raise MeshError("gram must have shape (F, 2, 2)")
            object.__setattr__(self, "gram", G)
        if self.uv is not None:
            object.__setattr__(self, "uv", np.asarray(self.uv, dtype=float))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def metric(self) -> np.ndarray:
        """Per-triangle Gram matrices, from the override or the embedding."""
        if self.gram is not None:
            return self.gram
        P = self.vertices[self.triangles]
        return _edge_gram(P[:, 0], P[:, 1], P[:, 2])

    def areas(self) -> np.ndarray:
        G = self.metric()
        det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
        return 0.5 * np.sqrt(np.maximum(det, 0.0))

    def total_area(self) -> float:
        return float(self.areas().sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        T = self.triangles
        e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def face_normals(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def check_manifold(mesh: TriMesh) -> None:
    """Raise :class:`MeshError` unless the mesh is a closed, consistently oriented 2-manifold."""
    T = mesh.triangles
    directed = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    if np.any(directed[:, 0] == directed[:, 1]):
        raise MeshError("triangle with repeated vertex")
    uniq, counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise MeshError(f"directed edge {tuple(uniq[counts > 1][0])} used twice: inconsistent orientation or non-manifold")
    # every directed edge must have its reverse, i.e. each edge borders exactly two triangles
    key = uniq[:, 0] * len(mesh.vertices) + uniq[:, 1]
    rkey = uniq[:, 1] * len(mesh.vertices) + uniq[:, 0]
    missing = ~np.isin(rkey, key)
    if np.any(missing):
        raise MeshError(f"boundary edge {tuple(uniq[missing][0])}: mesh is not closed")
    used = np.zeros(len(mesh.vertices), bool)
    used[T.ravel()] = True
    if not used.all():
        raise MeshError(f"vertex {int(np.argmin(used))} belongs to no triangle")
    degenerate = np.flatnonzero(mesh.areas() <= 0)
    if degenerate.size:
        raise MeshError(f"triangle {int(degenerate[0])} has zero area")


def n_components(mesh: TriMesh) -> int:
    e = mesh.edges()
    n = mesh.n_vertices
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    return int(connected_components(adj, directed=False)[0])


def euler_characteristic(mesh: TriMesh) -> int:
    """V - E + F of a closed manifold mesh."""
    check_manifold(mesh)
    return mesh.n_vertices - len(mesh.edges()) + mesh.n_triangles


def genus(mesh: TriMesh) -> int:
    """Genus of a closed, connected, orientable mesh."""
    chi = euler_characteristic(mesh)
    if n_components(mesh) != 1:
        raise MeshError("genus is defined here for connected meshes only")
    return (2 - chi) // 2


def local_maxima(mesh: TriMesh, values) -> np.ndarray:
    """Vertices whose value exceeds that of every edge neighbour."""
    v = np.asarray(values, dtype=float)
    e = mesh.edges()
    best = np.full(mesh.n_vertices, -np.inf)
    np.maximum.at(best, e[:, 0], v[e[:, 1]])
    np.maximum.at(best, e[:, 1], v[e[:, 0]])
    return np.flatnonzero(v > best)


# --------------------------------------------------------------------------- generators

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    V = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    F = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return V / np.linalg.norm(V, axis=1, keepdims=True), F


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Geodesic sphere: icosahedron refined ``subdivisions`` times, projected to the sphere.

    Has ``10 * 4**subdivisions + 2`` vertices.
    """
    if not 0 <= subdivisions <= 7:
        raise ValueError("subdivisions must be in [0, 7]")
    V, F = _icosahedron()
    for _ in range(subdivisions):
        e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        uniq, inv = np.unique(np.sort(e, axis=1), axis=0, return_inverse=True)
        inv = inv.reshape(3, -1)
        mid = V[uniq].mean(axis=1)
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m01, m12, m20 = (len(V) + inv[i] for i in range(3))
        a, b, c = F.T
        F = np.concatenate([
            np.stack([a, m01, m20], 1), np.stack([b, m12, m01], 1),
            np.stack([c, m20, m12], 1), np.stack([m01, m12, m20], 1),
        ])
        V = np.vstack([V, mid])
    return TriMesh(radius * V + np.asarray(center, float), F)


def _periodic_grid_triangles(n_u: int, n_v: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n_u), np.arange(n_v), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = i + n_u * j
    v10 = (i + 1) % n_u + n_u * j
    v01 = i + n_u * ((j + 1) % n_v)
    v11 = (i + 1) % n_u + n_u * ((j + 1) % n_v)
    return np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])


def _torus_embedding(s, t, major=2.0, minor=1.0):
    u, v = 2 * np.pi * s, 2 * np.pi * t
    return np.stack([(major + minor * np.cos(v)) * np.cos(u),
                     (major + minor * np.cos(v)) * np.sin(u),
                     minor * np.sin(v)], axis=1)


def wrapped_uv_edges(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle parameter edge vectors, unwrapped across the periodic seam."""
    if mesh.uv is None:
        raise MeshError("mesh carries no parameter coordinates")
    Q = mesh.uv[mesh.triangles]
    e1 = Q[:, 1] - Q[:, 0]
    e2 = Q[:, 2] - Q[:, 0]
    e1 -= np.round(e1)
    e2 -= np.round(e2)
    return e1, e2


def flat_gram(e1: np.ndarray, e2: np.ndarray, p) -> np.ndarray:
    """Gram matrices of parameter edges under the (a, b) flat metric."""
    p = _as_params(p)
    g = np.array([[1.0, p.a], [p.a, p.a * p.a + p.b * p.b]])
    E = np.stack([e1, e2], axis=1)  # (F, 2 edges, 2 coords)
    return np.einsum("fic,cd,fjd->fij", E, g, E)


def torus_mesh(p, n_u: int = 32, n_v: int = 32) -> TriMesh:
    """Structured periodic triangulation of the (a, b) flat torus.

    Vertex ``(i, j)`` has parameter coordinates ``(i / n_u, j / n_v)`` and index
    ``i + n_u * j``. The flat metric is stored per triangle; the embedding is a
    round torus in 3-space used only for display.
    """
    p = _as_params(p)
    if n_u < 8 or n_v < 8:
        raise ValueError("torus mesh needs at least 8 points per direction")
    i, j = np.meshgrid(np.arange(n_u), np.arange(n_v), indexing="xy")
    uv = np.stack([i.ravel() / n_u, j.ravel() / n_v], axis=1)
    T = _periodic_grid_triangles(n_u, n_v)
    base = TriMesh(_torus_embedding(uv[:, 0], uv[:, 1]), T, uv=uv, grid_shape=(n_u, n_v))
    return replace(base, gram=flat_gram(*wrapped_uv_edges(base), p))


def embedded_torus_mesh(aspect: float, n_u: int = 64, n_v: int = 32) -> TriMesh:
    """Surface of revolution torus of unit area with ``major/minor = aspect**2``.

    ``u`` runs around the tube, ``v`` around the axis of symmetry.
    """
    if aspect < 1:
        raise ValueError("aspect must be at least 1")
    minor = 1.0 / (2 * math.pi * aspect)
    major = aspect * aspect * minor
    i, j = np.meshgrid(np.arange(n_u), np.arange(n_v), indexing="xy")
    # half-cell offset keeps vertices off the inner equator, where the horn torus pinches
    u = 2 * np.pi * (i.ravel() + 0.5) / n_u
    v = 2 * np.pi * j.ravel() / n_v
    rho = major + minor * np.cos(u)
    V = np.stack([rho * np.cos(v), rho * np.sin(v), minor * np.sin(u)], axis=1)
    return TriMesh(V, _periodic_grid_triangles(n_u, n_v)[:, [0, 2, 1]], grid_shape=(n_u, n_v))


# --------------------------------------------------------------------------- combination

def disjoint_union(*meshes: TriMesh) -> TriMesh:
    """Union of meshes as separate components; metrics carried along."""
    verts, tris, grams = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        grams.append(m.metric())
        offset += m.n_vertices
    return TriMesh(np.vstack(verts), np.vstack(tris), gram=np.concatenate(grams))


def _kabsch(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Proper rotation R minimizing sum |R p_i - q_i|^2 for centered point sets."""
    U, _, Vt = np.linalg.svd(P.T @ Q)
    d = np.sign(np.linalg.det(U @ Vt))
    return (U @ np.diag([1.0, 1.0, d]) @ Vt).T


def glue(mesh_a: TriMesh, mesh_b: TriMesh, face_a: int, face_b: int) -> TriMesh:
    """Connected sum of two meshes through one triangle of each.

    ``face_b`` is moved rigidly onto ``face_a`` with opposing normals, the two
    faces are deleted and the three boundary vertex pairs are identified. Of the
    three vertex matchings that keep the result consistently oriented, the one
    with the smallest mismatch after alignment is used. Each triangle keeps the
    metric it had before gluing.
    """
    if not (0 <= face_a < mesh_a.n_triangles and 0 <= face_b < mesh_b.n_triangles):
        raise MeshError("face index out of range")
    fa = mesh_a.triangles[face_a]
    fb = mesh_b.triangles[face_b]
    PA = mesh_a.vertices[fa]
    PB = mesh_b.vertices[fb]
    ca, cb = PA.mean(0), PB.mean(0)
    na = np.cross(PA[1] - PA[0], PA[2] - PA[0])
    nb = np.cross(PB[1] - PB[0], PB[2] - PB[0])
    na /= np.linalg.norm(na)
    nb /= np.linalg.norm(nb)
    scale = np.linalg.norm(PA - ca, axis=1).mean()

    best = None
    # reversed cyclic order: a0-b0, a1-b2, a2-b1 and its rotations
    for r in range(3):
        perm = [(r - i) % 3 for i in range(3)]
        QB = PB[perm]
        P = np.vstack([QB - cb, scale * nb])
        Q = np.vstack([PA - ca, -scale * na])
        R = _kabsch(P, Q)
        err = np.linalg.norm(P @ R.T - Q)
        if best is None or err < best[0]:
            best = (err, perm, R)
    _, perm, R = best

    nA = mesh_a.n_vertices
    remap = np.full(mesh_b.n_vertices, -1, dtype=np.int64)
    for i in range(3):
        remap[fb[perm[i]]] = fa[i]
    rest = np.flatnonzero(remap < 0)
    remap[rest] = nA + np.arange(len(rest))

    moved = (mesh_b.vertices[rest] - cb) @ R.T + ca
    keep_a = np.arange(mesh_a.n_triangles) != face_a
    keep_b = np.arange(mesh_b.n_triangles) != face_b
    out = TriMesh(
        np.vstack([mesh_a.vertices, moved]),
        np.vstack([mesh_a.triangles[keep_a], remap[mesh_b.triangles[keep_b]]]),
        gram=np.concatenate([mesh_a.metric()[keep_a], mesh_b.metric()[keep_b]]),
    )
    check_manifold(out)
    return out


def kissing_spheres_mesh(k: int, subdivisions: int = 3, radii=None) -> TriMesh:
    """Chain of ``k`` spheres along the x axis, consecutive ones glued through a triangle."""
    if k < 1:
        raise ValueError("k must be at least 1")
    radii = [1.0] * k if radii is None else list(radii)
    if len(radii) != k:
        raise ValueError("need one radius per sphere")
    mesh = icosphere(subdivisions, radii[0])
    for r in radii[1:]:
        ball = icosphere(subdivisions, r)
        face_a = int(np.argmax(mesh.face_centroids()[:, 0]))
        face_b = int(np.argmin(ball.face_centroids()[:, 0]))
        mesh = glue(mesh, ball, face_a, face_b)
    return mesh


def glue_strip(torus_a: TriMesh, torus_b: TriMesh) -> TriMesh:
    """Join two structured torus meshes into one torus of doubled length.

    The band of triangles between the last and first rows is cut from each
    torus, leaving two cylinders; the top rim of each is then identified with
    the bottom rim of the other. Requires equal ``n_u``.
    """
    if torus_a.grid_shape is None or torus_b.grid_shape is None:
        raise MeshError("glue_strip needs structured torus meshes")
    nu, nva = torus_a.grid_shape
    nub, nvb = torus_b.grid_shape
    if nu != nub:
        raise MeshError("tori must have the same number of points around")

    def cut(m, nv):
        T = m.triangles
        row = lambda idx: idx // nu  # noqa: E731
        band = np.any(row(T) == nv - 1, axis=1) & np.any(row(T) == 0, axis=1)
        return T[~band], m.metric()[~band]

    Ta, Ga = cut(torus_a, nva)
    Tb, Gb = cut(torus_b, nvb)
    nA = torus_a.n_vertices
    # B's first row becomes A's last row; A's first row becomes B's last row
    remap = np.empty(torus_b.n_vertices, dtype=np.int64)
    remap[:nu] = np.arange(nu) + nu * (nva - 1)
    top_b = np.arange(nu) + nu * (nvb - 1)
    b_keep = np.ones(torus_b.n_vertices, bool)
    b_keep[:nu] = False
    b_keep[top_b] = False
    rest = np.flatnonzero(b_keep)
    remap[rest] = nA + np.arange(len(rest))
    remap[top_b] = np.arange(nu)

    Vb = torus_b.vertices[rest] + np.array([0.0, 0.0, 3.0])
    out = TriMesh(np.vstack([torus_a.vertices, Vb]), np.vstack([Ta, remap[Tb]]),
                  gram=np.concatenate([Ga, Gb]))
    check_manifold(out)
    return out


# --------------------------------------------------------------------------- OFF files

def write_off(mesh: TriMesh, path) -> None:
    """Write the embedding and connectivity as ASCII OFF (17 significant digits)."""
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    lines += ["%.17g %.17g %.17g" % tuple(v) for v in mesh.vertices]
    lines += ["3 %d %d %d" % tuple(t) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path) -> TriMesh:
    """Read an ASCII OFF file of triangles."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError(f"{path}: missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        V = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        F = []
        for _ in range(nf):
            cnt = int(tokens[pos])
            if cnt != 3:
                raise MeshError(f"{path}: only triangles are supported, found a {cnt}-gon")
            F.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 4
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed OFF data") from exc
    return TriMesh(V, np.array(F, dtype=np.int64).reshape(-1, 3))
