"""Hot numeric kernels: loop versions (numba-compiled when enabled) + fallbacks.

Public dispatchers pick the active backend; the underlying implementations
stay importable so the test suite can compare both paths on the same inputs.
"""

import numpy as np

from .backend import USING_NUMBA, jit_kernel

# ---------------------------------------------------------------------------
# monomial evaluation
# ---------------------------------------------------------------------------


def _eval_monomials_loop(points, exponents, coeffs, max_exp):
    npts = points.shape[0]
    ncoord = points.shape[1]
    nterm = exponents.shape[0]
    out = np.empty(npts)
    powtab = np.empty((ncoord, max_exp + 1))
    for p in range(npts):
        for j in range(ncoord):
            powtab[j, 0] = 1.0
            xj = points[p, j]
            for e in range(1, max_exp + 1):
                powtab[j, e] = powtab[j, e - 1] * xj
        acc = 0.0
        for a in range(nterm):
            t = coeffs[a]
            for j in range(ncoord):
                t *= powtab[j, exponents[a, j]]
            acc += t
        out[p] = acc
    return out


_eval_monomials_jit = jit_kernel(_eval_monomials_loop, fastmath=True)


def eval_monomials_numpy(points, exponents, coeffs):
    """Vectorized fallback: gather per-coordinate power tables, chunked."""
    npts, ncoord = points.shape
    nterm = exponents.shape[0]
    max_exp = int(exponents.max()) if nterm else 0
    out = np.empty(npts)
    chunk = max(1, 4_000_000 // max(nterm, 1))
    for lo in range(0, npts, chunk):
        hi = min(npts, lo + chunk)
        blk = points[lo:hi]
        vals = np.ones((hi - lo, nterm))
        for j in range(ncoord):
            ptab = blk[:, j, None] ** np.arange(max_exp + 1)[None, :]
            vals *= ptab[:, exponents[:, j]]
        # pairwise summation keeps the reduction order fixed (no BLAS)
        out[lo:hi] = (vals * coeffs[None, :]).sum(axis=1)
    return out


def eval_monomials(points, exponents, coeffs):
    """Sum of coeffs[a] * prod_j points[:,j]**exponents[a,j] per point."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    exponents = np.ascontiguousarray(exponents, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    if USING_NUMBA:
        max_exp = int(exponents.max()) if len(exponents) else 0
        return _eval_monomials_jit(points, exponents, coeffs, max_exp)
    return eval_monomials_numpy(points, exponents, coeffs)


def monomial_matrix(points, exponents, column_scale=None):
    """(npts, nterm) matrix of monomial values, optionally column-scaled."""
    points = np.asarray(points, dtype=np.float64)
    npts, ncoord = points.shape
    nterm = exponents.shape[0]
    max_exp = int(exponents.max()) if nterm else 0
    vals = np.ones((npts, nterm))
    for j in range(ncoord):
        ptab = points[:, j, None] ** np.arange(max_exp + 1)[None, :]
        vals *= ptab[:, exponents[:, j]]
    if column_scale is not None:
        vals *= column_scale[None, :]
    return vals


# ---------------------------------------------------------------------------
# spectral field evaluation
# ---------------------------------------------------------------------------


def _eval_spectral_loop(points, freqs, phases, amplitude):
    npts = points.shape[0]
    ndim = points.shape[1]
    nfreq = freqs.shape[0]
    out = np.empty(npts)
    for p in range(npts):
        acc = 0.0
        for k in range(nfreq):
            arg = phases[k]
            for j in range(ndim):
                arg += freqs[k, j] * points[p, j]
            acc += np.cos(arg)
        out[p] = amplitude * acc
    return out


_eval_spectral_jit = jit_kernel(_eval_spectral_loop, fastmath=True)


def eval_spectral_numpy(points, freqs, phases, amplitude):
    npts, ndim = points.shape
    out = np.empty(npts)
    chunk = max(1, 8_000_000 // max(len(freqs), 1))
    for lo in range(0, npts, chunk):
        hi = min(npts, lo + chunk)
        arg = np.broadcast_to(phases[None, :], (hi - lo, len(freqs))).copy()
        for j in range(ndim):
            arg += points[lo:hi, j, None] * freqs[None, :, j]
        out[lo:hi] = amplitude * np.cos(arg).sum(axis=1)
    return out


def eval_spectral(points, freqs, phases, amplitude):
    """amplitude * sum_k cos(<freqs[k,:ndim], x> + phases[k]) per point x."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    freqs = np.ascontiguousarray(freqs[:, : points.shape[1]], dtype=np.float64)
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    if USING_NUMBA:
        return _eval_spectral_jit(points, freqs, phases, float(amplitude))
    return eval_spectral_numpy(points, freqs, phases, float(amplitude))


# ---------------------------------------------------------------------------
# union-find over int64 parent arrays
# ---------------------------------------------------------------------------


def _uf_find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


def _uf_union_pairs(parent, pairs):
    for s in range(pairs.shape[0]):
        ra = _uf_find(parent, pairs[s, 0])
        rb = _uf_find(parent, pairs[s, 1])
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb


def _uf_roots(parent):
    for i in range(parent.shape[0]):
        parent[i] = _uf_find(parent, i)


if USING_NUMBA:
    from numba import njit

    _uf_find = njit(cache=True, nogil=True)(_uf_find)
    _uf_union_pairs = njit(cache=True, nogil=True)(_uf_union_pairs)
    _uf_roots = njit(cache=True, nogil=True)(_uf_roots)


def union_pairs_labels(n, pairs):
    """Label 0..n-1 elements by connectivity over the given id pairs."""
    parent = np.arange(n, dtype=np.int64)
    if len(pairs):
        _uf_union_pairs(parent, np.ascontiguousarray(pairs, dtype=np.int64))
    _uf_roots(parent)
    return parent


# ---------------------------------------------------------------------------
# marching squares over quad complexes
# ---------------------------------------------------------------------------
# Quad corners (a,b,c,d) are cyclic; local edges 0=ab 1=bc 2=cd 3=da.
# Case table indexed by the 4-bit positivity code (a<<3 | b<<2 | c<<1 | d);
# entries are up to two (edge,edge) segments, -1 = unused. The two diagonal
# codes (5, 10) are saddles and are resolved by the quad-center sign.

_MS_TABLE = -np.ones((16, 4), dtype=np.int8)
for _code, _segs in {
    8: [(0, 3)], 7: [(0, 3)],
    4: [(0, 1)], 11: [(0, 1)],
    2: [(1, 2)], 13: [(1, 2)],
    1: [(2, 3)], 14: [(2, 3)],
    12: [(1, 3)], 3: [(1, 3)],
    6: [(0, 2)], 9: [(0, 2)],
}.items():
    for _k, (_e1, _e2) in enumerate(_segs):
        _MS_TABLE[_code, 2 * _k] = _e1
        _MS_TABLE[_code, 2 * _k + 1] = _e2


def _march_quads_loop(quad_vids, quad_edges, positive, center_positive, table):
    nq = quad_vids.shape[0]
    seg_edges = np.empty((2 * nq, 2), dtype=np.int64)
    seg_quad = np.empty(2 * nq, dtype=np.int64)
    ns = 0
    for q in range(nq):
        code = 0
        for c in range(4):
            code = (code << 1) | (1 if positive[quad_vids[q, c]] else 0)
        if code == 0 or code == 15:
            continue
        if code == 10 or code == 5:
            # saddle: center sign picks the pairing
            cpos = center_positive[q]
            if (code == 10) == (cpos == 1):
                seg_edges[ns, 0] = quad_edges[q, 0]
                seg_edges[ns, 1] = quad_edges[q, 1]
                seg_edges[ns + 1, 0] = quad_edges[q, 2]
                seg_edges[ns + 1, 1] = quad_edges[q, 3]
            else:
                seg_edges[ns, 0] = quad_edges[q, 3]
                seg_edges[ns, 1] = quad_edges[q, 0]
                seg_edges[ns + 1, 0] = quad_edges[q, 1]
                seg_edges[ns + 1, 1] = quad_edges[q, 2]
            seg_quad[ns] = q
            seg_quad[ns + 1] = q
            ns += 2
        else:
            e1 = table[code, 0]
            e2 = table[code, 1]
            seg_edges[ns, 0] = quad_edges[q, e1]
            seg_edges[ns, 1] = quad_edges[q, e2]
            seg_quad[ns] = q
            ns += 1
    return seg_edges[:ns], seg_quad[:ns]


_march_quads_jit = jit_kernel(_march_quads_loop)


def march_quads_numpy(quad_vids, quad_edges, positive, center_positive):
    """Vectorized fallback: one gather per case code."""
    bits = positive[quad_vids].astype(np.int8)
    code = (bits[:, 0] << 3) | (bits[:, 1] << 2) | (bits[:, 2] << 1) | bits[:, 3]
    segs = []
    quads = []
    for c in range(16):
        idx = np.nonzero(code == c)[0]
        if not len(idx):
            continue
        if c in (0, 15):
            continue
        if c in (5, 10):
            cpos = center_positive[idx] == 1
            first = (c == 10) == cpos  # pairing (0,1),(2,3) vs (3,0),(1,2)
            for grp, pairs in ((first, ((0, 1), (2, 3))), (~first, ((3, 0), (1, 2)))):
                sel = idx[grp]
                for e1, e2 in pairs:
                    segs.append(np.stack([quad_edges[sel, e1], quad_edges[sel, e2]], axis=1))
                    quads.append(sel)
        else:
            e1, e2 = int(_MS_TABLE[c, 0]), int(_MS_TABLE[c, 1])
            segs.append(np.stack([quad_edges[idx, e1], quad_edges[idx, e2]], axis=1))
            quads.append(idx)
    if not segs:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(segs), np.concatenate(quads)


def march_quads(quad_vids, quad_edges, positive, center_positive):
    """Zero-curve segments (pairs of crossed-edge ids) per quad cell.

    ``positive`` is the strict vertex-sign array; ``center_positive`` must be
    filled (+-1) for every saddle quad and may be 0 elsewhere.
    """
    if USING_NUMBA:
        return _march_quads_jit(
            np.ascontiguousarray(quad_vids, dtype=np.int64),
            np.ascontiguousarray(quad_edges, dtype=np.int64),
            np.ascontiguousarray(positive, dtype=np.bool_),
            np.ascontiguousarray(center_positive, dtype=np.int8),
            _MS_TABLE,
        )
    return march_quads_numpy(quad_vids, quad_edges, positive, center_positive)


def saddle_mask(quad_vids, positive):
    """Quads whose corner signs alternate (the two ambiguous cases)."""
    bits = positive[quad_vids]
    return (bits[:, 0] == bits[:, 2]) & (bits[:, 1] == bits[:, 3]) & (bits[:, 0] != bits[:, 1])


# ---------------------------------------------------------------------------
# marching tetrahedra on a 3D box grid (center-split: 12 tets per cube)
# ---------------------------------------------------------------------------
# Each cube splits into 12 tets (cube center + 2 triangles per face, faces
# split along the globally fixed g00-g11 diagonal so adjacent cubes agree).
# Face corner order below is (g00, g01, g11, g10) in the (lo-axis, hi-axis)
# local frame of the face; local cube corner index is 4*di + 2*dj + dk.

_FACE_CORNERS = np.array(
    [
        [0, 1, 3, 2],  # i = 0 face, frame (j, k)
        [4, 5, 7, 6],  # i = 1 face
        [0, 1, 5, 4],  # j = 0 face, frame (i, k)
        [2, 3, 7, 6],  # j = 1 face
        [0, 2, 6, 4],  # k = 0 face, frame (i, j)
        [1, 3, 7, 5],  # k = 1 face
    ],
    dtype=np.int64,
)


def _march_tets_loop(flat_vals, n0, n1, n2, axis0, axis1, axis2,
                     mixed_cubes, center_vals, face_corners):
    ncubes = mixed_cubes.shape[0]
    cap = 24 * ncubes
    tri_edges = np.empty((cap, 3, 2), dtype=np.int64)
    tri_cube = np.empty(cap, dtype=np.int64)
    nt = 0
    ngrid = n0 * n1 * n2

    corner_ids = np.empty(8, dtype=np.int64)
    corner_vals = np.empty(8)
    corner_xyz = np.empty((8, 3))
    tet_ids = np.empty(4, dtype=np.int64)
    tet_vals = np.empty(4)
    tet_xyz = np.empty((4, 3))
    cross = np.empty((4, 4), dtype=np.int64)  # local edge -> (a_id, b_id) used?
    pos_idx = np.empty(4, dtype=np.int64)
    neg_idx = np.empty(4, dtype=np.int64)
    pt = np.empty((4, 3))

    for ci in range(ncubes):
        i = mixed_cubes[ci, 0]
        j = mixed_cubes[ci, 1]
        k = mixed_cubes[ci, 2]
        for di in range(2):
            for dj in range(2):
                for dk in range(2):
                    loc = 4 * di + 2 * dj + dk
                    gid = ((i + di) * n1 + (j + dj)) * n2 + (k + dk)
                    corner_ids[loc] = gid
                    corner_vals[loc] = flat_vals[gid]
                    corner_xyz[loc, 0] = axis0[i + di]
                    corner_xyz[loc, 1] = axis1[j + dj]
                    corner_xyz[loc, 2] = axis2[k + dk]
        center_id = ngrid + ci
        cval = center_vals[ci]
        cx = 0.5 * (axis0[i] + axis0[i + 1])
        cy = 0.5 * (axis1[j] + axis1[j + 1])
        cz = 0.5 * (axis2[k] + axis2[k + 1])

        for f in range(6):
            for tsel in range(2):
                # face triangles (g00,g01,g11) and (g00,g11,g10)
                if tsel == 0:
                    l0 = face_corners[f, 0]
                    l1 = face_corners[f, 1]
                    l2 = face_corners[f, 2]
                else:
                    l0 = face_corners[f, 0]
                    l1 = face_corners[f, 2]
                    l2 = face_corners[f, 3]
                tet_ids[0] = center_id
                tet_vals[0] = cval
                tet_xyz[0, 0] = cx
                tet_xyz[0, 1] = cy
                tet_xyz[0, 2] = cz
                tet_ids[1] = corner_ids[l0]
                tet_vals[1] = corner_vals[l0]
                tet_ids[2] = corner_ids[l1]
                tet_vals[2] = corner_vals[l1]
                tet_ids[3] = corner_ids[l2]
                tet_vals[3] = corner_vals[l2]
                for c in range(3):
                    tet_xyz[1, c] = corner_xyz[l0, c]
                    tet_xyz[2, c] = corner_xyz[l1, c]
                    tet_xyz[3, c] = corner_xyz[l2, c]

                npos = 0
                nneg = 0
                for v in range(4):
                    if tet_vals[v] > 0.0:
                        pos_idx[npos] = v
                        npos += 1
                    else:
                        neg_idx[nneg] = v
                        nneg += 1
                if npos == 0 or npos == 4:
                    continue

                if npos == 1 or npos == 3:
                    if npos == 1:
                        apex = pos_idx[0]
                        o0 = neg_idx[0]
                        o1 = neg_idx[1]
                        o2 = neg_idx[2]
                    else:
                        apex = neg_idx[0]
                        o0 = pos_idx[0]
                        o1 = pos_idx[1]
                        o2 = pos_idx[2]
                    others = (o0, o1, o2)
                    for t in range(3):
                        o = others[t]
                        va = tet_vals[apex]
                        vb = tet_vals[o]
                        tt = va / (va - vb)
                        for c in range(3):
                            pt[t, c] = tet_xyz[apex, c] + tt * (tet_xyz[o, c] - tet_xyz[apex, c])
                        a = tet_ids[apex]
                        b = tet_ids[o]
                        if a < b:
                            cross[t, 0] = a
                            cross[t, 1] = b
                        else:
                            cross[t, 0] = b
                            cross[t, 1] = a
                    nverts = 3
                else:
                    # 2-2 split: quad (p0r0, p0r1, p1r1, p1r0) is cyclic
                    pairs = ((pos_idx[0], neg_idx[0]), (pos_idx[0], neg_idx[1]),
                             (pos_idx[1], neg_idx[1]), (pos_idx[1], neg_idx[0]))
                    for t in range(4):
                        pp = pairs[t][0]
                        qq = pairs[t][1]
                        va = tet_vals[pp]
                        vb = tet_vals[qq]
                        tt = va / (va - vb)
                        for c in range(3):
                            pt[t, c] = tet_xyz[pp, c] + tt * (tet_xyz[qq, c] - tet_xyz[pp, c])
                        a = tet_ids[pp]
                        b = tet_ids[qq]
                        if a < b:
                            cross[t, 0] = a
                            cross[t, 1] = b
                        else:
                            cross[t, 0] = b
                            cross[t, 1] = a
                    nverts = 4

                # outward direction: positive-corner centroid minus negative
                gx = 0.0
                gy = 0.0
                gz = 0.0
                for v in range(npos):
                    gx += tet_xyz[pos_idx[v], 0]
                    gy += tet_xyz[pos_idx[v], 1]
                    gz += tet_xyz[pos_idx[v], 2]
                gx /= npos
                gy /= npos
                gz /= npos
                hx = 0.0
                hy = 0.0
                hz = 0.0
                for v in range(nneg):
                    hx += tet_xyz[neg_idx[v], 0]
                    hy += tet_xyz[neg_idx[v], 1]
                    hz += tet_xyz[neg_idx[v], 2]
                hx /= nneg
                hy /= nneg
                hz /= nneg
                dxo = gx - hx
                dyo = gy - hy
                dzo = gz - hz

                ntri = 1 if nverts == 3 else 2
                for s in range(ntri):
                    if s == 0:
                        i0, i1, i2 = 0, 1, 2
                    else:
                        i0, i1, i2 = 0, 2, 3
                    ux = pt[i1, 0] - pt[i0, 0]
                    uy = pt[i1, 1] - pt[i0, 1]
                    uz = pt[i1, 2] - pt[i0, 2]
                    vx = pt[i2, 0] - pt[i0, 0]
                    vy = pt[i2, 1] - pt[i0, 1]
                    vz = pt[i2, 2] - pt[i0, 2]
                    nx = uy * vz - uz * vy
                    ny = uz * vx - ux * vz
                    nz = ux * vy - uy * vx
                    if nx * dxo + ny * dyo + nz * dzo < 0.0:
                        i1, i2 = i2, i1
                    tri_edges[nt, 0, 0] = cross[i0, 0]
                    tri_edges[nt, 0, 1] = cross[i0, 1]
                    tri_edges[nt, 1, 0] = cross[i1, 0]
                    tri_edges[nt, 1, 1] = cross[i1, 1]
                    tri_edges[nt, 2, 0] = cross[i2, 0]
                    tri_edges[nt, 2, 1] = cross[i2, 1]
                    tri_cube[nt] = ci
                    nt += 1
    return tri_edges[:nt], tri_cube[:nt]


_march_tets_jit = jit_kernel(_march_tets_loop)


def march_tets(flat_vals, shape, axes, mixed_cubes, center_vals):
    """Oriented isosurface triangles over the mixed cubes of a box grid.

    Triangle vertices are identified combinatorially by the (sorted) global
    id pair of the tet edge they sit on; cube centers get ids past the grid.
    Triangles are wound so their normal points toward positive values.
    """
    n0, n1, n2 = shape
    args = (
        np.ascontiguousarray(flat_vals, dtype=np.float64), n0, n1, n2,
        np.ascontiguousarray(axes[0], dtype=np.float64),
        np.ascontiguousarray(axes[1], dtype=np.float64),
        np.ascontiguousarray(axes[2], dtype=np.float64),
        np.ascontiguousarray(mixed_cubes, dtype=np.int64),
        np.ascontiguousarray(center_vals, dtype=np.float64),
        _FACE_CORNERS,
    )
    if USING_NUMBA:
        return _march_tets_jit(*args)
    return _march_tets_loop(*args)


# ---------------------------------------------------------------------------
# greedy sphere packing
# ---------------------------------------------------------------------------


def _greedy_pack_loop(candidates, cos_threshold, accepted_init, n_init):
    nc = candidates.shape[0]
    dim = candidates.shape[1]
    accepted = np.empty(nc + n_init, dtype=np.int64)
    acc_pts = np.empty((nc + n_init, dim))
    na = n_init
    for t in range(n_init):
        accepted[t] = -1 - t  # preseeded centers carry negative tags
        for c in range(dim):
            acc_pts[t, c] = accepted_init[t, c]
    for i in range(nc):
        ok = True
        for t in range(na):
            dot = 0.0
            for c in range(dim):
                dot += candidates[i, c] * acc_pts[t, c]
            if dot > cos_threshold:
                ok = False
                break
        if ok:
            accepted[na] = i
            for c in range(dim):
                acc_pts[na, c] = candidates[i, c]
            na += 1
    return accepted[n_init:na]


_greedy_pack_jit = jit_kernel(_greedy_pack_loop)


def greedy_pack_numpy(candidates, cos_threshold, accepted_init, n_init):
    acc = [accepted_init[t] for t in range(n_init)]
    out = []
    for i in range(len(candidates)):
        if acc:
            dots = np.asarray(acc) @ candidates[i]
            if dots.max() > cos_threshold:
                continue
        acc.append(candidates[i])
        out.append(i)
    return np.asarray(out, dtype=np.int64)


def greedy_pack(candidates, cos_threshold, accepted_init=None):
    """First-fit packing: accept candidates whose dot with every accepted
    center stays <= cos_threshold (geodesic separation >= the target angle)."""
    candidates = np.ascontiguousarray(candidates, dtype=np.float64)
    if accepted_init is None:
        accepted_init = np.empty((0, candidates.shape[1]))
    accepted_init = np.ascontiguousarray(accepted_init, dtype=np.float64)
    if USING_NUMBA:
        return _greedy_pack_jit(candidates, float(cos_threshold),
                                accepted_init, len(accepted_init))
    return greedy_pack_numpy(candidates, float(cos_threshold),
                             accepted_init, len(accepted_init))


# ---------------------------------------------------------------------------
# cyclic sign-change count (zero counting on a circle grid)
# ---------------------------------------------------------------------------


def _count_cyclic_crossings_loop(values):
    n = values.shape[0]
    count = 0
    prev = values[n - 1] > 0.0
    for i in range(n):
        cur = values[i] > 0.0
        if cur != prev:
            count += 1
        prev = cur
    return count


_count_cyclic_crossings_jit = jit_kernel(_count_cyclic_crossings_loop)


def count_cyclic_crossings(values):
    if USING_NUMBA:
        return int(_count_cyclic_crossings_jit(np.ascontiguousarray(values, dtype=np.float64)))
    pos = values > 0.0
    return int((pos != np.roll(pos, 1)).sum())
