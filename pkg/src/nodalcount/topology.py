"""Zero-set extraction, component counting, and diffeomorphism signatures.

Zero sets of scalar functions are extracted by sign-based cell sweeps:
crossings on a 1D grid, marching squares with a center-value saddle decider
on quad complexes (planar boxes and the seam-aware cube-sphere), and marching
tetrahedra on a center-split of 3D box cells. Closed 1- and 2-manifolds are
classified completely by (dimension, Euler characteristic, orientability).
Vertex values closer to zero than VERTEX_ZERO_TOL trigger a deterministic
golden-ratio sub-cell offset (a grid shift, or a small rotation on the
sphere) so that crossings always sit strictly inside edges.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .field import GridSpec

VERTEX_ZERO_TOL = 1e-9
MAX_OFFSET_RETRIES = 8
_OFFSET_FRACTIONS = (0.6180339887498949, 0.3819660112501051, 0.2360679774997897)
_SPHERE_OFFSET_ANGLE = 6.180339887498949e-06


class DegeneracyError(RuntimeError):
    """Grid degeneracy (vertex or decider zero) survived all offset retries."""


class QuotientMismatchError(RuntimeError):
    """Antipodal pairing failed; the sign grid was not exactly symmetric."""


# ---------------------------------------------------------------------------
# signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopologySignature:
    """(dim, Euler characteristic, orientability) of a closed manifold.

    Complete diffeomorphism invariant in dimensions 1 and 2; ``orientable``
    is None outside dimension 2. Disconnected models carry their connected
    pieces in ``pieces`` (sorted tuple) and are matched in grouped mode.
    """

    dim: int
    euler: int
    orientable: bool | None = None
    pieces: tuple = ()

    def __post_init__(self):
        if self.pieces:
            object.__setattr__(self, "pieces", tuple(sorted(self.pieces, key=_sig_key)))
            return
        if self.dim == 1 and self.euler != 0:
            raise ValueError("a closed 1-manifold piece has Euler characteristic 0")
        if self.dim == 2:
            if self.orientable is None:
                raise ValueError("dimension-2 signatures need an orientability flag")
            if self.orientable and self.euler % 2 != 0:
                raise ValueError("closed orientable surfaces have even Euler characteristic")
            if not self.orientable and self.euler > 1:
                raise ValueError("closed nonorientable surfaces have Euler characteristic <= 1")
        if self.dim != 2:
            object.__setattr__(self, "orientable", None)

    @property
    def connected(self) -> bool:
        return not self.pieces


def _sig_key(sig: TopologySignature):
    return (sig.dim, sig.euler, -1 if sig.orientable is None else int(sig.orientable))


def point_signature() -> TopologySignature:
    return TopologySignature(dim=0, euler=1)


def circle() -> TopologySignature:
    return TopologySignature(dim=1, euler=0)


def sphere_surface() -> TopologySignature:
    return TopologySignature(dim=2, euler=2, orientable=True)


def torus_surface() -> TopologySignature:
    return TopologySignature(dim=2, euler=0, orientable=True)


def genus_surface(g: int) -> TopologySignature:
    return TopologySignature(dim=2, euler=2 - 2 * g, orientable=True)


def nonorientable_surface(k: int) -> TopologySignature:
    """Connected sum of k projective planes (k >= 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return TopologySignature(dim=2, euler=2 - k, orientable=False)


def disjoint_union(*sigs: TopologySignature) -> TopologySignature:
    pieces = []
    for s in sigs:
        pieces.extend(s.pieces if s.pieces else [s])
    if len(pieces) == 1:
        return pieces[0]
    return TopologySignature(dim=pieces[0].dim, euler=sum(p.euler for p in pieces),
                             orientable=None, pieces=tuple(pieces))


def signature_from_name(name: str) -> TopologySignature:
    """CLI grammar: circle, sphere, torus, genus:g, nonorientable:k, multi:[...]."""
    name = name.strip()
    if name.startswith("multi:"):
        inner = name[len("multi:"):].strip()
        if not (inner.startswith("[") and inner.endswith("]")):
            raise ValueError("multi signature needs a [a,b,...] list")
        parts = [p for p in inner[1:-1].split(",") if p.strip()]
        return disjoint_union(*[signature_from_name(p) for p in parts])
    simple = {"circle": circle, "sphere": sphere_surface, "torus": torus_surface,
              "point": point_signature}
    if name in simple:
        return simple[name]()
    if name.startswith("genus:"):
        return genus_surface(int(name.split(":", 1)[1]))
    if name.startswith("nonorientable:"):
        return nonorientable_surface(int(name.split(":", 1)[1]))
    raise ValueError(f"unknown signature spec {name!r}")


# ---------------------------------------------------------------------------
# components and reports
# ---------------------------------------------------------------------------


@dataclass
class Component:
    signature: TopologySignature
    closed: bool
    cells: np.ndarray
    size: int
    max_radius: float
    edge_ids: np.ndarray | None = None        # crossed-edge ids (curve sweeps)
    antipodal_invariant: bool | None = None   # set by the quotient operation
    mesh: tuple | None = None                 # (vertices, faces) for surfaces
    positions: np.ndarray | None = None       # crossing coordinates


@dataclass
class ComponentReport:
    components: list
    grid: object
    dim: int
    quotient_mode: str = "none"
    retries: int = 0
    unresolved_cells: int = 0
    _segments: np.ndarray | None = field(default=None, repr=False)
    _complex: object = field(default=None, repr=False)

    @property
    def count(self) -> int:
        return len(self.components)

    def closed_components(self):
        return [c for c in self.components if c.closed]

    def restrict_to_ball(self, radius: float) -> "ComponentReport":
        """Components whose crossings all lie within ``radius`` of the origin
        of the grid frame (ball filters for barrier events)."""
        kept = [c for c in self.components if c.closed and c.max_radius <= radius]
        return ComponentReport(components=kept, grid=self.grid, dim=self.dim,
                               quotient_mode=self.quotient_mode, retries=self.retries,
                               unresolved_cells=self.unresolved_cells)

    def to_json_dict(self):
        return {
            "dim": self.dim,
            "quotient_mode": self.quotient_mode,
            "retries": self.retries,
            "unresolved_cells": self.unresolved_cells,
            "components": [
                {
                    "signature": {
                        "dim": c.signature.dim,
                        "euler": c.signature.euler,
                        "orientable": c.signature.orientable,
                    },
                    "closed": bool(c.closed),
                    "size": int(c.size),
                    "max_radius": float(c.max_radius),
                    "antipodal_invariant": c.antipodal_invariant,
                }
                for c in self.components
            ],
        }


def count_N_sigma(report: ComponentReport, sigma: TopologySignature,
                  mode: str = "strict") -> int:
    """Number of closed components realizing the model signature.

    strict: sigma connected, exact signature matches. grouped: sigma may be
    disconnected; the answer is the number of disjoint groups of components
    realizing its piece multiset (ratio minimum over piece types).
    """
    closed = report.closed_components()
    if mode == "strict":
        if not sigma.connected:
            raise ValueError("strict mode needs a connected model; use grouped")
        return sum(1 for c in closed if c.signature == sigma)
    if mode != "grouped":
        raise ValueError("mode must be 'strict' or 'grouped'")
    pieces = sigma.pieces if sigma.pieces else (sigma,)
    need = {}
    for p in pieces:
        need[p] = need.get(p, 0) + 1
    have = {}
    for c in closed:
        have[c.signature] = have.get(c.signature, 0) + 1
    return min(have.get(p, 0) // k for p, k in need.items())


# ---------------------------------------------------------------------------
# quad complexes (planar boxes and the cube-sphere)
# ---------------------------------------------------------------------------


@dataclass
class QuadComplex:
    n_vertices: int
    quads: np.ndarray            # (Q, 4) vertex ids, cyclic corner order
    quad_edges: np.ndarray       # (Q, 4) edge ids for ab, bc, cd, da
    edges: np.ndarray            # (E, 2) sorted vertex id pairs
    boundary_edge: np.ndarray    # (E,) bool
    antipodal_vertex: np.ndarray | None = None
    antipodal_edge: np.ndarray | None = None
    antipodal_quad: np.ndarray | None = None


@lru_cache(maxsize=32)
def _box_quad_structure(n0, n1):
    ii, jj = np.meshgrid(np.arange(n0 - 1), np.arange(n1 - 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    a = ii * n1 + jj
    quads = np.stack([a, a + 1, a + n1 + 1, a + n1], axis=1)
    nH = n0 * (n1 - 1)
    e_ab = ii * (n1 - 1) + jj
    e_bc = nH + ii * n1 + (jj + 1)
    e_cd = (ii + 1) * (n1 - 1) + jj
    e_da = nH + ii * n1 + jj
    quad_edges = np.stack([e_ab, e_bc, e_cd, e_da], axis=1)
    # edge endpoint table
    hi, hj = np.meshgrid(np.arange(n0), np.arange(n1 - 1), indexing="ij")
    h_edges = np.stack([(hi * n1 + hj).ravel(), (hi * n1 + hj + 1).ravel()], axis=1)
    vi, vj = np.meshgrid(np.arange(n0 - 1), np.arange(n1), indexing="ij")
    v_edges = np.stack([(vi * n1 + vj).ravel(), ((vi + 1) * n1 + vj).ravel()], axis=1)
    edges = np.concatenate([h_edges, v_edges])
    boundary = np.zeros(len(edges), dtype=bool)
    boundary[: nH] = ((hi == 0) | (hi == n0 - 1)).ravel()
    boundary[nH:] = ((vj == 0) | (vj == n1 - 1)).ravel()
    return QuadComplex(n_vertices=n0 * n1, quads=quads, quad_edges=quad_edges,
                       edges=edges, boundary_edge=boundary)


def _void_view(arr):
    arr = np.ascontiguousarray(arr)
    return arr.view([("", arr.dtype)] * arr.shape[1]).ravel()


@lru_cache(maxsize=8)
def _cube_sphere_structure(resolution):
    """Six projected cube faces with unified seam vertices and exact antipodal
    symmetry: the -axis face grids are elementwise negations of the +axis
    grids, so antipodal lookup is exact float equality (-0.0 sanitized)."""
    res = resolution
    # integer numerators keep u exactly negation-symmetric at any resolution
    # (np.linspace is not: its step rounds unless res-1 is a power of two,
    # and then negated faces fail to unify with their seam partners)
    u = (2.0 * np.arange(res) - (res - 1)) / float(res - 1)
    face_points = []
    for axis in range(3):
        b, c = [ax for ax in range(3) if ax != axis]
        uu, vv = np.meshgrid(u, u, indexing="ij")
        q = np.zeros((res, res, 3))
        q[..., axis] = 1.0
        q[..., b] = uu
        q[..., c] = vv
        q = q + 0.0  # sanitize -0.0 for bitwise keys
        face_points.append(q.reshape(-1, 3))
        face_points.append((-q.reshape(-1, 3)) + 0.0)
    all_q = np.concatenate(face_points)          # face order +x,-x,+y,-y,+z,-z
    uq, inverse = np.unique(all_q, axis=0, return_inverse=True)
    nv = len(uq)
    fv = inverse.reshape(6, res, res)            # face,(i,j) -> vertex id

    quads = []
    for f in range(6):
        a = fv[f, :-1, :-1].ravel()
        b = fv[f, :-1, 1:].ravel()
        c = fv[f, 1:, 1:].ravel()
        d = fv[f, 1:, :-1].ravel()
        quads.append(np.stack([a, b, c, d], axis=1))
    quads = np.concatenate(quads)

    pairs = np.stack([quads, np.roll(quads, -1, axis=1)], axis=2).reshape(-1, 2)
    pairs.sort(axis=1)
    edges, quad_edges = np.unique(pairs, axis=0, return_inverse=True)
    quad_edges = quad_edges.reshape(-1, 4)

    # antipodal maps via bitwise row lookup
    uq_v = _void_view(uq)
    anti_v = _void_view(-uq + 0.0)
    av = np.searchsorted(uq_v, anti_v)
    if not (uq_v[av] == anti_v).all():
        raise RuntimeError("cube-sphere antipodal vertex lookup failed")
    aedges = np.sort(av[edges], axis=1)
    edges_v = _void_view(edges)
    ae = np.searchsorted(edges_v, _void_view(aedges))
    if not (edges_v[ae] == _void_view(aedges)).all():
        raise RuntimeError("cube-sphere antipodal edge lookup failed")
    # faces are ordered +x,-x,+y,-y,+z,-z and -axis faces reuse (i,j) indices
    nq_face = (res - 1) ** 2
    fidx = np.arange(len(quads)) // nq_face
    aq = np.arange(len(quads)) + np.where(fidx % 2 == 0, nq_face, -nq_face)

    struct = QuadComplex(n_vertices=nv, quads=quads, quad_edges=quad_edges,
                         edges=edges, boundary_edge=np.zeros(len(edges), dtype=bool),
                         antipodal_vertex=av, antipodal_edge=ae, antipodal_quad=aq)
    return struct, uq


@dataclass(frozen=True)
class CubeSphereGrid:
    """Cube-sphere sampling of S^2 with ``resolution`` vertices per face axis."""

    resolution: int

    def __post_init__(self):
        if self.resolution < 3:
            raise ValueError("resolution must be >= 3")

    def structure(self):
        return _cube_sphere_structure(self.resolution)[0]

    def base_cube_points(self):
        return _cube_sphere_structure(self.resolution)[1]


def _rotation_matrix(angle):
    """Fixed-axis rotation used for deterministic degeneracy offsets."""
    ax = np.array([1.0, _OFFSET_FRACTIONS[0], _OFFSET_FRACTIONS[1]])
    ax /= np.linalg.norm(ax)
    c, s = np.cos(angle), np.sin(angle)
    K = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
    return c * np.eye(3) + s * K + (1 - c) * np.outer(ax, ax)


# ---------------------------------------------------------------------------
# marching squares orchestration (shared by planar boxes and the sphere)
# ---------------------------------------------------------------------------


def _march_quad_complex(f, struct: QuadComplex, vertex_coords, quad_centers):
    values = np.asarray(f(vertex_coords), dtype=np.float64)
    if np.abs(values).min() < VERTEX_ZERO_TOL:
        return None  # caller applies the next offset
    positive = values > 0.0

    center_sign = np.zeros(len(struct.quads), dtype=np.int8)
    saddles = kernels.saddle_mask(struct.quads, positive)
    if saddles.any():
        cvals = np.asarray(f(quad_centers[saddles]), dtype=np.float64)
        if (cvals == 0.0).any():
            return None  # decider degenerate at a cell center
        center_sign[saddles] = np.where(cvals > 0.0, 1, -1).astype(np.int8)

    segments, seg_quad = kernels.march_quads(struct.quads, struct.quad_edges,
                                             positive, center_sign)
    return values, segments, seg_quad


def _components_from_segments(struct, segments, seg_quad, values,
                              vertex_coords, origin):
    ne = len(struct.edges)
    labels = kernels.union_pairs_labels(ne, segments)
    crossed = np.unique(segments.ravel())
    if len(crossed) == 0:
        return []
    # crossing positions by linear interpolation along each crossed edge
    a = struct.edges[crossed, 0]
    b = struct.edges[crossed, 1]
    va = values[a]
    vb = values[b]
    t = va / (va - vb)
    pos = vertex_coords[a] + t[:, None] * (vertex_coords[b] - vertex_coords[a])
    rad = np.linalg.norm(pos - origin[None, :], axis=1)

    comp_root = labels[crossed]
    order = np.argsort(comp_root, kind="stable")
    bounds = np.nonzero(np.diff(comp_root[order]))[0] + 1
    groups = np.split(order, bounds)

    seg_root = labels[segments[:, 0]]
    comps = []
    for g in groups:
        edges_g = crossed[g]
        root = comp_root[g[0]]
        closed = not struct.boundary_edge[edges_g].any()
        cells = np.unique(seg_quad[seg_root == root])
        comps.append(
            Component(
                signature=circle(),
                closed=closed,
                cells=cells,
                size=len(edges_g),
                max_radius=float(rad[g].max()),
                edge_ids=edges_g,
                positions=pos[g],
            )
        )
    return comps


def _extract_planar_2d(f, grid: GridSpec):
    struct = _box_quad_structure(grid.resolution, grid.resolution)
    base_axes = grid.axes()
    h = grid.spacing
    for k in range(MAX_OFFSET_RETRIES + 1):
        axes = [ax + k * h * _OFFSET_FRACTIONS[d] for d, ax in enumerate(base_axes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        qc = 0.25 * (coords[struct.quads[:, 0]] + coords[struct.quads[:, 1]]
                     + coords[struct.quads[:, 2]] + coords[struct.quads[:, 3]])
        got = _march_quad_complex(f, struct, coords, qc)
        if got is None:
            continue
        values, segments, seg_quad = got
        comps = _components_from_segments(
            struct, segments, seg_quad, values, coords, np.asarray(grid.center))
        return ComponentReport(components=comps, grid=grid, dim=1, retries=k,
                               _segments=segments, _complex=struct)
    raise DegeneracyError("vertex or decider zeros persisted through all offsets")


def extract_components_sphere(f, grid: CubeSphereGrid, quotient: str = "none"):
    """Zero curves of f on S^2 sampled by the cube-sphere grid."""
    struct = grid.structure()
    base_q = grid.base_cube_points()
    quads = struct.quads
    qcenters_base = 0.25 * (base_q[quads[:, 0]] + base_q[quads[:, 1]]
                            + base_q[quads[:, 2]] + base_q[quads[:, 3]]) + 0.0
    for k in range(MAX_OFFSET_RETRIES + 1):
        if k == 0:
            qpts = base_q
            qc = qcenters_base
        else:
            R = _rotation_matrix(k * _SPHERE_OFFSET_ANGLE)
            qpts = base_q @ R.T
            qc = qcenters_base @ R.T
        coords = qpts / np.linalg.norm(qpts, axis=1, keepdims=True)
        centers = qc / np.linalg.norm(qc, axis=1, keepdims=True)
        got = _march_quad_complex(f, struct, coords, centers)
        if got is None:
            continue
        values, segments, seg_quad = got
        comps = _components_from_segments(
            struct, segments, seg_quad, values, coords, np.zeros(3))
        for c in comps:
            c.max_radius = np.inf  # ball filters are not defined on the sphere
            c.closed = True
        rep = ComponentReport(components=comps, grid=grid, dim=1, retries=k,
                              _segments=segments, _complex=struct)
        if quotient == "antipodal":
            return antipodal_quotient(rep)
        return rep
    raise DegeneracyError("vertex or decider zeros persisted through all offsets")


def antipodal_quotient(report: ComponentReport) -> ComponentReport:
    """Identify components of a sphere report under x -> -x.

    Components paired by the antipodal map count once; invariant components
    descend to the quotient and are flagged (their quotient signature is not
    recomputed).
    """
    struct = report._complex
    if struct is None or struct.antipodal_edge is None:
        raise ValueError("report does not come from a symmetric sphere grid")
    edge_to_comp = {}
    for ci, c in enumerate(report.components):
        for e in c.edge_ids:
            edge_to_comp[int(e)] = ci
    out = []
    seen = set()
    for ci, c in enumerate(report.components):
        if ci in seen:
            continue
        img_edges = struct.antipodal_edge[c.edge_ids]
        partners = {edge_to_comp.get(int(e), -1) for e in img_edges}
        if len(partners) != 1 or -1 in partners:
            raise QuotientMismatchError("antipodal image of a component is not a component")
        pj = partners.pop()
        if pj == ci:
            rep_c = replace_component(c, antipodal_invariant=True)
            out.append(rep_c)
            seen.add(ci)
        else:
            back = {edge_to_comp.get(int(e), -1)
                    for e in struct.antipodal_edge[report.components[pj].edge_ids]}
            if back != {ci}:
                raise QuotientMismatchError("antipodal pairing is not mutual")
            out.append(replace_component(c, antipodal_invariant=False))
            seen.update((ci, pj))
    return ComponentReport(components=out, grid=report.grid, dim=report.dim,
                           quotient_mode="antipodal", retries=report.retries,
                           _segments=report._segments, _complex=struct)


def replace_component(c: Component, **kw) -> Component:
    return replace(c, **kw)


def antipodal_quotient_graph_count(report: ComponentReport) -> int:
    """Independent quotient count: union-find over antipodal edge orbits."""
    struct = report._complex
    segs = report._segments
    orbit = np.minimum(np.arange(len(struct.edges)), struct.antipodal_edge)
    labels = kernels.union_pairs_labels(len(struct.edges), orbit[segs])
    crossed = np.unique(orbit[segs].ravel())
    return len(np.unique(labels[crossed]))


# ---------------------------------------------------------------------------
# 1D and 3D extraction
# ---------------------------------------------------------------------------


def _extract_1d(f, grid: GridSpec):
    base = grid.axes()[0]
    h = grid.spacing
    for k in range(MAX_OFFSET_RETRIES + 1):
        ax = base + k * h * _OFFSET_FRACTIONS[0]
        vals = np.asarray(f(ax[:, None]), dtype=np.float64)
        if np.abs(vals).min() < VERTEX_ZERO_TOL:
            continue
        pos = vals > 0
        idx = np.nonzero(pos[:-1] != pos[1:])[0]
        t = vals[idx] / (vals[idx] - vals[idx + 1])
        xs = ax[idx] + t * h
        comps = [
            Component(signature=point_signature(), closed=True,
                      cells=np.array([i]), size=1,
                      max_radius=float(abs(x - grid.center[0])),
                      positions=np.array([[x]]))
            for i, x in zip(idx, xs)
        ]
        return ComponentReport(components=comps, grid=grid, dim=0, retries=k)
    raise DegeneracyError("vertex zeros persisted through all offsets")


def _extract_3d(f, grid: GridSpec):
    res = grid.resolution
    base_axes = grid.axes()
    h = grid.spacing
    for k in range(MAX_OFFSET_RETRIES + 1):
        axes = [ax + k * h * _OFFSET_FRACTIONS[d] for d, ax in enumerate(base_axes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.asarray(f(coords), dtype=np.float64)
        if np.abs(vals).min() < VERTEX_ZERO_TOL:
            continue
        v3 = vals.reshape(res, res, res)
        pos = v3 > 0
        allpos = np.ones((res - 1,) * 3, dtype=bool)
        allneg = np.ones((res - 1,) * 3, dtype=bool)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    blk = pos[di:res - 1 + di, dj:res - 1 + dj, dk:res - 1 + dk]
                    allpos &= blk
                    allneg &= ~blk
        mixed = np.argwhere(~(allpos | allneg))
        if len(mixed) == 0:
            return ComponentReport(components=[], grid=grid, dim=2, retries=k)
        centers = np.stack([axes[0][mixed[:, 0]] + 0.5 * h,
                            axes[1][mixed[:, 1]] + 0.5 * h,
                            axes[2][mixed[:, 2]] + 0.5 * h], axis=1)
        cvals = np.asarray(f(centers), dtype=np.float64)
        if (cvals == 0.0).any():
            continue
        tri_edges, tri_cube = kernels.march_tets(vals, (res, res, res), axes,
                                                 mixed, cvals)
        comps = _mesh_components(tri_edges, tri_cube, vals, cvals, axes,
                                 mixed, np.asarray(grid.center))
        return ComponentReport(components=comps, grid=grid, dim=2, retries=k)
    raise DegeneracyError("vertex or center zeros persisted through all offsets")


def _pack_pairs(pairs):
    """Sorted int pairs (values < 2^31) packed into one int64 key per row."""
    return (pairs[:, 0].astype(np.int64) << 32) | pairs[:, 1].astype(np.int64)


def _mesh_components(tri_edges, tri_cube, flat_vals, center_vals, axes, mixed,
                     origin):
    if len(tri_edges) == 0:
        return []
    n0, n1, n2 = len(axes[0]), len(axes[1]), len(axes[2])
    ngrid = n0 * n1 * n2

    keys = _pack_pairs(tri_edges.reshape(-1, 2))
    ukeys, tri_vids = np.unique(keys, return_inverse=True)
    uverts = np.stack([ukeys >> 32, ukeys & 0xFFFFFFFF], axis=1)
    tri_vids = tri_vids.reshape(-1, 3)

    def endpoint_data(ids):
        xyz = np.empty((len(ids), 3))
        grid_mask = ids < ngrid
        gi = ids[grid_mask]
        xyz[grid_mask, 0] = axes[0][gi // (n1 * n2)]
        xyz[grid_mask, 1] = axes[1][(gi // n2) % n1]
        xyz[grid_mask, 2] = axes[2][gi % n2]
        ci = ids[~grid_mask] - ngrid
        for d in range(3):
            hd = axes[d][1] - axes[d][0]
            xyz[~grid_mask, d] = axes[d][mixed[ci, d]] + 0.5 * hd
        vv = np.empty(len(ids))
        vv[grid_mask] = flat_vals[gi]
        vv[~grid_mask] = center_vals[ci]
        return xyz, vv

    xa, va = endpoint_data(uverts[:, 0])
    xb, vb = endpoint_data(uverts[:, 1])
    t = va / (va - vb)
    vpos = xa + t[:, None] * (xb - xa)

    # undirected triangle edges: slot s of triangle t is (v[s], v[(s+1)%3])
    d_edges = np.stack([tri_vids, np.roll(tri_vids, -1, axis=1)], axis=2).reshape(-1, 2)
    und = np.sort(d_edges, axis=1)
    ekeys, einv, ecounts = np.unique(_pack_pairs(und), return_inverse=True,
                                     return_counts=True)
    if (ecounts > 2).any():
        raise DegeneracyError("non-manifold isosurface mesh")
    order = np.argsort(einv, kind="stable")
    tri_of_slot = order // 3
    starts = np.searchsorted(einv[order], np.arange(len(ekeys)))
    pair_mask = ecounts == 2
    first = starts[pair_mask]
    tpairs = np.stack([tri_of_slot[first], tri_of_slot[first + 1]], axis=1)
    labels = kernels.union_pairs_labels(len(tri_vids), tpairs)

    # orientation consistency: the two traversals of a shared edge must be
    # opposite (we wound all triangles toward the positive side)
    dir_fwd = (d_edges[:, 0] == und[:, 0])
    slot_a = order[first]
    slot_b = order[first + 1]
    consistent = dir_fwd[slot_a] != dir_fwd[slot_b]

    roots = labels[np.arange(len(tri_vids))]
    comp_ids = np.unique(roots)
    comps = []
    bnd_edge_tri = tri_of_slot[starts[ecounts == 1]] if (ecounts == 1).any() else np.empty(0, dtype=np.int64)
    open_roots = set(roots[bnd_edge_tri].tolist())
    bad_roots = set(roots[tpairs[~consistent, 0]].tolist()) if (~consistent).any() else set()

    for root in comp_ids:
        tmask = roots == root
        tris = np.nonzero(tmask)[0]
        vids = np.unique(tri_vids[tris])
        ekeys_c = np.unique(einv.reshape(-1, 3)[tris])
        V, E, F = len(vids), len(ekeys_c), len(tris)
        chi = V - E + F
        closed = root not in open_roots
        orientable = root not in bad_roots
        sig = TopologySignature(dim=2, euler=int(chi), orientable=bool(orientable)) \
            if closed else TopologySignature(dim=2, euler=0, orientable=True)
        comps.append(
            Component(
                signature=sig,
                closed=closed,
                cells=np.unique(tri_cube[tris]),
                size=F,
                max_radius=float(np.linalg.norm(vpos[vids] - origin[None, :], axis=1).max()),
                mesh=(vpos[vids], np.searchsorted(vids, tri_vids[tris])),
            )
        )
    return comps


def extract_components_hypersurface(f, grid: GridSpec) -> ComponentReport:
    """Connected components of {f = 0} on a box grid (dim 1, 2 or 3).

    ``f`` must accept an (npts, dim) array and return (npts,) values.
    Components touching the grid boundary are flagged open and excluded from
    closed-component counts.
    """
    dim = grid.dim
    if dim == 1:
        return _extract_1d(f, grid)
    if dim == 2:
        return _extract_planar_2d(f, grid)
    if dim == 3:
        return _extract_3d(f, grid)
    raise ValueError("hypersurface extraction supports grid dimension 1..3")


# ---------------------------------------------------------------------------
# codimension-r intersections
# ---------------------------------------------------------------------------


def extract_components_codim_r(fs, grid: GridSpec, max_newton=40) -> ComponentReport:
    """Common zeros of r functions on a box grid (counts only).

    Cells where every function changes sign are refined by damped
    Gauss-Newton from the cell center; refined points are clustered by an
    epsilon-neighborhood graph with epsilon = 2 cell diagonals. For
    n - r = 1 closed clusters are circles; for r = n clusters are points.
    """
    r = len(fs)
    n = grid.dim
    if not (2 <= r <= n):
        raise ValueError("need 2 <= r <= grid dim")
    res = grid.resolution
    axes = grid.axes()
    h = grid.spacing
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    shape = (res,) * n

    mixed_all = np.ones((res - 1,) * n, dtype=bool)
    scales = []
    for f in fs:
        vals = np.asarray(f(coords), dtype=np.float64).reshape(shape)
        scales.append(max(np.median(np.abs(vals)), 1e-30))
        pos = vals > 0
        allpos = np.ones((res - 1,) * n, dtype=bool)
        allneg = np.ones((res - 1,) * n, dtype=bool)
        for off in np.ndindex(*(2,) * n):
            sl = tuple(slice(o, res - 1 + o) for o in off)
            allpos &= pos[sl]
            allneg &= ~pos[sl]
        mixed_all &= ~(allpos | allneg)
    cells = np.argwhere(mixed_all)
    if len(cells) == 0:
        return ComponentReport(components=[], grid=grid, dim=n - r)

    starts = np.stack([axes[d][cells[:, d]] + 0.5 * h for d in range(n)], axis=1)

    def F(x):
        return np.stack([np.asarray(f(x), dtype=np.float64) for f in fs], axis=1)

    def jac(x):
        J = np.empty((len(x), r, n))
        for d in range(n):
            dx = np.zeros(n)
            dx[d] = h / 100.0
            J[:, :, d] = (F(x + dx) - F(x - dx)) / (2 * dx[d])
        return J

    pts = starts.copy()
    active = np.ones(len(pts), dtype=bool)
    tol = 1e-9 * np.asarray(scales)
    for _ in range(max_newton):
        if not active.any():
            break
        x = pts[active]
        Fx = F(x)
        done = (np.abs(Fx) <= tol[None, :]).all(axis=1)
        J = jac(x)
        JJt = J @ J.transpose(0, 2, 1) + 1e-12 * np.eye(r)[None]
        step = (J.transpose(0, 2, 1) @ np.linalg.solve(JJt, Fx[:, :, None]))[:, :, 0]
        norm = np.linalg.norm(step, axis=1)
        cap = 0.75 * h
        scale = np.minimum(1.0, cap / np.maximum(norm, 1e-30))
        xn = x - step * scale[:, None]
        upd = ~done
        x[upd] = xn[upd]
        pts[active] = x
        nxt = active.copy()
        nxt[active] = ~done
        active = nxt
    final = F(pts)
    converged = (np.abs(final) <= 10 * tol[None, :]).all(axis=1)
    near = (np.abs(pts - starts) <= 2.5 * h).all(axis=1)
    good = converged & near
    unresolved = int((~good).sum())
    pts = pts[good]
    cells = cells[good]
    if len(pts) == 0:
        return ComponentReport(components=[], grid=grid, dim=n - r,
                               unresolved_cells=unresolved)

    from scipy.spatial import cKDTree

    eps = 2.0 * h * np.sqrt(n)
    tree = cKDTree(pts)
    pairs = np.asarray(sorted(tree.query_pairs(eps)), dtype=np.int64)
    labels = kernels.union_pairs_labels(len(pts), pairs if len(pairs) else np.empty((0, 2), dtype=np.int64))
    center = np.asarray(grid.center)
    lo_b = center - grid.radius + h
    hi_b = center + grid.radius - h
    dim = n - r  # 0 or 1 for the supported (n, r) range
    base_sig = point_signature() if dim == 0 else circle()
    comps = []
    for root in np.unique(labels):
        mask = labels == root
        p = pts[mask]
        closed = bool((p >= lo_b).all() and (p <= hi_b).all())
        flat_cells = np.ravel_multi_index(cells[mask].T, (res - 1,) * n)
        comps.append(
            Component(signature=base_sig, closed=closed, cells=flat_cells,
                      size=int(mask.sum()),
                      max_radius=float(np.linalg.norm(p - center, axis=1).max()),
                      positions=p)
        )
    return ComponentReport(components=comps, grid=grid, dim=dim,
                           unresolved_cells=unresolved)


# ---------------------------------------------------------------------------
# mesh export
# ---------------------------------------------------------------------------


def export_mesh(report: ComponentReport, path):
    """ASCII polygon dump (vertex lines then face/segment index lines)."""
    with open(path, "w") as fh:
        offset = 1
        for ci, comp in enumerate(report.components):
            fh.write(f"# component {ci} euler={comp.signature.euler} closed={comp.closed}\n")
            if comp.mesh is not None:
                verts, faces = comp.mesh
                for v in verts:
                    fh.write("v " + " ".join(f"{x:.17g}" for x in v) + "\n")
                for tri in faces:
                    fh.write("f " + " ".join(str(i + offset) for i in tri) + "\n")
                offset += len(verts)
            elif comp.positions is not None:
                for v in comp.positions:
                    fh.write("v " + " ".join(f"{x:.17g}" for x in v) + "\n")
                offset += len(comp.positions)
    return path
