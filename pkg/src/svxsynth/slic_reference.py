"""Naive scalar SLIC used as a conformance oracle.

Implements the identical contract as run_slic (same window rule, same
distance, same accumulation order, same connectivity procedure) with
plain Python loops and no shared algorithm code, so the two paths can
be compared bit-exactly. O(K * N * iterations); refuses volumes larger
than 64^3 voxels.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .errors import ConstraintError
from .slic import NORMALIZED_TOL, SlicParams, SupervoxelMap
from .volume import MultiModalVolume, VolumeMeta

_MAX_VOXELS = 64 ** 3


def slic_reference(vol: MultiModalVolume, params: SlicParams) -> SupervoxelMap:
    X, Y, Z = vol.meta.dims
    C = vol.meta.channels
    n_total = X * Y * Z
    if n_total > _MAX_VOXELS:
        raise ConstraintError(
            f"reference oracle refuses volumes above {_MAX_VOXELS} voxels, got {n_total}"
        )
    lo = float(vol.data.min())
    hi = float(vol.data.max())
    if lo < -NORMALIZED_TOL or hi > 1.0 + NORMALIZED_TOL:
        raise ConstraintError(
            f"unnormalized input: intensities span [{lo:g}, {hi:g}], expected [0, 1]"
        )
    k_max = params.max_supervoxels
    if k_max > n_total:
        raise ConstraintError(
            f"max_supervoxels {k_max} exceeds voxel count {n_total}"
        )

    spacing = (n_total / k_max) ** (1.0 / 3.0)
    dims = (X, Y, Z)
    counts = [max(1, int(d // spacing)) for d in dims]
    while counts[0] * counts[1] * counts[2] > k_max:
        i = counts.index(max(counts))
        counts[i] -= 1
    growing = True
    while growing:
        growing = False
        order = sorted(range(3), key=lambda i: (-(dims[i] / counts[i]), i))
        for i in order:
            if counts[0] * counts[1] * counts[2] // counts[i] * (counts[i] + 1) <= k_max:
                counts[i] += 1
                growing = True
                break
    nx, ny, nz = counts

    vals = vol.data.astype(np.float64).tolist()  # vals[c][z][y][x]

    cpos = []
    cint = []
    for iz in range(nz):
        cz = (iz + 0.5) * (Z / nz) - 0.5
        vz = min(Z - 1, max(0, math.floor(cz + 0.5)))
        for iy in range(ny):
            cy = (iy + 0.5) * (Y / ny) - 0.5
            vy = min(Y - 1, max(0, math.floor(cy + 0.5)))
            for ix in range(nx):
                cx = (ix + 0.5) * (X / nx) - 0.5
                vx = min(X - 1, max(0, math.floor(cx + 0.5)))
                cpos.append([cx, cy, cz])
                cint.append([vals[c][vz][vy][vx] for c in range(C)])
    k0 = len(cpos)

    w = params.compactness / spacing
    w = w * w
    label = [0] * n_total

    for _ in range(params.iterations):
        best = [math.inf] * n_total
        new_label = label[:]
        for k in range(k0):
            cx, cy, cz = cpos[k]
            ick = cint[k]
            x0 = max(0, math.ceil(cx - spacing))
            x1 = min(X - 1, math.floor(cx + spacing))
            y0 = max(0, math.ceil(cy - spacing))
            y1 = min(Y - 1, math.floor(cy + spacing))
            z0 = max(0, math.ceil(cz - spacing))
            z1 = min(Z - 1, math.floor(cz + spacing))
            for z in range(z0, z1 + 1):
                dz = z - cz
                dz2 = dz * dz
                for y in range(y0, y1 + 1):
                    dy = y - cy
                    dzy = dz2 + dy * dy
                    rows = [vals[c][z][y] for c in range(C)]
                    base = (z * Y + y) * X
                    for x in range(x0, x1 + 1):
                        dx = x - cx
                        ds2 = dzy + dx * dx
                        dc2 = 0.0
                        for c in range(C):
                            t = rows[c][x] - ick[c]
                            dc2 += t * t
                        d2 = dc2 + w * ds2
                        idx = base + x
                        if d2 < best[idx]:
                            best[idx] = d2
                            new_label[idx] = k + 1
        label = new_label
        if 0 in label:
            raise ConstraintError(
                "search windows left voxels unassigned; centers drifted beyond 2S"
            )
        cnt = [0] * k0
        sx = [0.0] * k0
        sy = [0.0] * k0
        sz = [0.0] * k0
        si = [[0.0] * k0 for _ in range(C)]
        idx = 0
        for z in range(Z):
            for y in range(Y):
                rows = [vals[c][z][y] for c in range(C)]
                for x in range(X):
                    k = label[idx] - 1
                    cnt[k] += 1
                    sx[k] += x
                    sy[k] += y
                    sz[k] += z
                    for c in range(C):
                        si[c][k] += rows[c][x]
                    idx += 1
        for k in range(k0):
            n = cnt[k]
            if n > 0:
                cpos[k] = [sx[k] / n, sy[k] / n, sz[k] / n]
                for c in range(C):
                    cint[k][c] = si[c][k] / n

    out = _connectivity_pass(label, (X, Y, Z), params)
    meta = VolumeMeta(vol.meta.dims, 1, "u32", vol.meta.spacing)
    data = np.array(out, dtype=np.uint32).reshape((Z, Y, X))
    return SupervoxelMap(meta, data, int(data.max()))


def _connectivity_pass(label, dims, params):
    """Scalar twin of the connectivity procedure: scan-order components,
    size floor, face-dominant fragment absorption, (label, first-voxel)
    relabeling."""
    X, Y, Z = dims
    n_total = X * Y * Z
    if params.connectivity == 6:
        offsets = [(0, 0, 1), (0, 0, -1), (0, 1, 0), (0, -1, 0), (1, 0, 0), (-1, 0, 0)]
    else:
        offsets = [
            (dz, dy, dx)
            for dz in (-1, 0, 1)
            for dy in (-1, 0, 1)
            for dx in (-1, 0, 1)
            if (dz, dy, dx) != (0, 0, 0)
        ]

    comp = [-1] * n_total
    comp_size = []
    comp_first = []
    comp_label = []
    for start in range(n_total):
        if comp[start] != -1:
            continue
        cid = len(comp_size)
        val = label[start]
        comp[start] = cid
        size = 1
        queue = deque([start])
        while queue:
            idx = queue.popleft()
            z, rem = divmod(idx, Y * X)
            y, x = divmod(rem, X)
            for dz, dy, dx in offsets:
                nz_, ny_, nx_ = z + dz, y + dy, x + dx
                if 0 <= nz_ < Z and 0 <= ny_ < Y and 0 <= nx_ < X:
                    nidx = (nz_ * Y + ny_) * X + nx_
                    if comp[nidx] == -1 and label[nidx] == val:
                        comp[nidx] = cid
                        size += 1
                        queue.append(nidx)
        comp_size.append(size)
        comp_first.append(start)
        comp_label.append(val)
    m_comps = len(comp_size)

    adj = {i: {} for i in range(m_comps)}
    for idx in range(n_total):
        a = comp[idx]
        z, rem = divmod(idx, Y * X)
        y, x = divmod(rem, X)
        if x + 1 < X:
            b = comp[idx + 1]
            if b != a:
                adj[a][b] = adj[a].get(b, 0) + 1
                adj[b][a] = adj[b].get(a, 0) + 1
        if y + 1 < Y:
            b = comp[idx + X]
            if b != a:
                adj[a][b] = adj[a].get(b, 0) + 1
                adj[b][a] = adj[b].get(a, 0) + 1
        if z + 1 < Z:
            b = comp[idx + Y * X]
            if b != a:
                adj[a][b] = adj[a].get(b, 0) + 1
                adj[b][a] = adj[b].get(a, 0) + 1

    theta = params.min_fragment_factor * (n_total / len(set(label)))
    g_label = {i: comp_label[i] for i in range(m_comps)}
    g_first = {i: comp_first[i] for i in range(m_comps)}
    g_kept = {i: comp_size[i] >= theta for i in range(m_comps)}
    largest = min(range(m_comps), key=lambda i: (-comp_size[i], comp_first[i]))
    g_kept[largest] = True

    parent = list(range(m_comps))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    fragments = sorted(
        (i for i in range(m_comps) if comp_size[i] < theta and i != largest),
        key=lambda i: (comp_size[i], comp_first[i]),
    )
    for f in fragments:
        rf = find(f)
        if g_kept[rf]:
            continue
        neigh = adj[rf]
        if not neigh:
            continue
        target = min(
            neigh.items(),
            key=lambda kv: (-kv[1], g_label[kv[0]], g_first[kv[0]]),
        )[0]
        parent[rf] = target
        moved = adj.pop(rf)
        adj[target].pop(rf, None)
        for nb, cval in moved.items():
            if nb == target:
                continue
            adj[target][nb] = adj[target].get(nb, 0) + cval
            d = adj[nb]
            d.pop(rf, None)
            d[target] = d.get(target, 0) + cval
        g_label[target] = min(g_label[target], g_label[rf])
        g_first[target] = min(g_first[target], g_first[rf])

    roots = sorted({find(i) for i in range(m_comps)},
                   key=lambda r: (g_label[r], g_first[r]))
    new_of_root = {r: i + 1 for i, r in enumerate(roots)}
    lut = [new_of_root[find(i)] for i in range(m_comps)]
    return [lut[c] for c in comp]
