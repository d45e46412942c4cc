"""Multi-channel 3D SLIC supervoxelization.

Localized k-means over joint (intensity, spatial) features. Each round,
every voxel considers the clusters whose current center lies within a
2S x 2S x 2S window around it (S = (X*Y*Z / max_supervoxels)^(1/3)) and
takes the closest under

    D^2 = d_c^2 + (d_s / S)^2 * m^2

with d_c the Euclidean intensity distance over channels, d_s the
Euclidean spatial distance in voxel units and m the compactness.
Centers then move to their member means. After the final round a
connectivity pass splits stray same-label islands, absorbs fragments
below a size floor into their face-dominant neighbors, and compacts
labels to {1..K}.

There is no stochastic step: seeds start on a regular grid and ties go
to the smaller cluster id, so the result is a pure function of
(volume, params). Arithmetic is float64 with a fixed accumulation
order (channels ascending; z, then y, then x; voxels in C scan order)
so an independent scalar implementation can reproduce the labels
bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConstraintError, FormatError
from .svol import load_svol, read_header, save_svol
from .volume import LabelVolume, MultiModalVolume, VolumeMeta

NORMALIZED_TOL = 1e-6


@dataclass(frozen=True)
class SlicParams:
    max_supervoxels: int = 400
    compactness: float = 0.15
    iterations: int = 10
    connectivity: int = 6  # 6 or 26 neighborhood
    min_fragment_factor: float = 0.25
    seed: int = 0  # reserved; the algorithm is deterministic and draws nothing

    def __post_init__(self):
        if self.max_supervoxels < 1:
            raise ConstraintError("max_supervoxels must be positive")
        if self.compactness <= 0:
            raise ConstraintError("compactness must be positive")
        if self.iterations < 1:
            raise ConstraintError("iterations must be positive")
        if self.connectivity not in (6, 26):
            raise ConstraintError(f"connectivity must be 6 or 26, got {self.connectivity}")
        if not (0 < self.min_fragment_factor <= 1):
            raise ConstraintError("min_fragment_factor must be in (0, 1]")


@dataclass
class ClusterCenter:
    spatial: tuple[float, float, float]  # (x, y, z), voxel units
    intensity: np.ndarray  # (C,) float64 channel means
    count: int = 0


@dataclass
class SupervoxelMap:
    """Dense per-voxel supervoxel labels, values exactly {1..K}."""

    meta: VolumeMeta
    data: np.ndarray  # (Z, Y, X) uint32
    supervoxel_count: int

    def __post_init__(self):
        if self.meta.dtype != "u32" or self.meta.channels != 1:
            raise FormatError("SupervoxelMap must be single-channel u32")
        if self.data.shape != self.meta.shape_zyx:
            raise FormatError("SupervoxelMap data shape does not match meta")
        k = self.supervoxel_count
        counts = np.bincount(self.data.ravel(), minlength=k + 1)
        if k < 1 or counts[0] != 0 or len(counts) != k + 1 or (counts[1:] == 0).any():
            raise FormatError(
                f"labels are not exactly the contiguous set 1..{k}"
            )


def grid_spacing(dims: tuple[int, int, int], max_supervoxels: int) -> float:
    x, y, z = dims
    return (x * y * z / max_supervoxels) ** (1.0 / 3.0)


def _axis_seed_counts(dims, spacing, max_supervoxels):
    # floor keeps the product <= max_supervoxels unless the >=1 clamp
    # kicks in on a thin axis; shave the largest axis until it fits
    n = [max(1, int(d // spacing)) for d in dims]
    while n[0] * n[1] * n[2] > max_supervoxels:
        i = n.index(max(n))
        n[i] -= 1
    # then grow toward the target count, most under-seeded axis first
    while True:
        order = sorted(range(3), key=lambda i: (-(dims[i] / n[i]), i))
        for i in order:
            if n[0] * n[1] * n[2] // n[i] * (n[i] + 1) <= max_supervoxels:
                n[i] += 1
                break
        else:
            return n


def init_seeds(vol: MultiModalVolume, params: SlicParams) -> list[ClusterCenter]:
    """Place cluster seeds on a regular grid, z-major scan order.

    Per axis, seed i of n sits at (i + 0.5) * (dim / n) - 0.5, i.e. at
    the exact centers of n equal slabs; seed intensity is sampled at
    the nearest voxel.
    """
    X, Y, Z = vol.meta.dims
    total = X * Y * Z
    if params.max_supervoxels > total:
        raise ConstraintError(
            f"max_supervoxels {params.max_supervoxels} exceeds voxel count {total}"
        )
    spacing = grid_spacing(vol.meta.dims, params.max_supervoxels)
    nx, ny, nz = _axis_seed_counts((X, Y, Z), spacing, params.max_supervoxels)
    centers = []
    for iz in range(nz):
        cz = (iz + 0.5) * (Z / nz) - 0.5
        vz = min(Z - 1, max(0, math.floor(cz + 0.5)))
        for iy in range(ny):
            cy = (iy + 0.5) * (Y / ny) - 0.5
            vy = min(Y - 1, max(0, math.floor(cy + 0.5)))
            for ix in range(nx):
                cx = (ix + 0.5) * (X / nx) - 0.5
                vx = min(X - 1, max(0, math.floor(cx + 0.5)))
                intensity = vol.data[:, vz, vy, vx].astype(np.float64)
                centers.append(ClusterCenter((cx, cy, cz), intensity, 0))
    return centers


def _check_normalized(vol: MultiModalVolume):
    lo = float(vol.data.min())
    hi = float(vol.data.max())
    if lo < -NORMALIZED_TOL or hi > 1.0 + NORMALIZED_TOL:
        raise ConstraintError(
            f"unnormalized input: intensities span [{lo:g}, {hi:g}], expected [0, 1]"
        )


def run_slic(vol: MultiModalVolume, params: SlicParams) -> SupervoxelMap:
    """Supervoxelize a [0,1]-normalized multi-channel volume."""
    _check_normalized(vol)
    centers = init_seeds(vol, params)
    X, Y, Z = vol.meta.dims
    C = vol.meta.channels
    S = grid_spacing(vol.meta.dims, params.max_supervoxels)
    w = params.compactness / S
    w = w * w
    k0 = len(centers)

    data = vol.data.astype(np.float64)
    xs = np.arange(X, dtype=np.float64)
    ys = np.arange(Y, dtype=np.float64)
    zs = np.arange(Z, dtype=np.float64)
    grid_z, grid_y, grid_x = np.meshgrid(zs, ys, xs, indexing="ij")
    flat_x, flat_y, flat_z = grid_x.ravel(), grid_y.ravel(), grid_z.ravel()
    flat_i = data.reshape(C, -1)

    cpos = np.array([c.spatial for c in centers], dtype=np.float64)  # (K, 3) xyz
    cint = np.stack([c.intensity for c in centers])  # (K, C)
    label = np.zeros((Z, Y, X), dtype=np.int32)

    for _ in range(params.iterations):
        best = np.full((Z, Y, X), np.inf)
        new_label = label.copy()  # voxels left uncovered keep their label
        for k in range(k0):
            cx, cy, cz = cpos[k]
            x0 = max(0, math.ceil(cx - S))
            x1 = min(X - 1, math.floor(cx + S))
            y0 = max(0, math.ceil(cy - S))
            y1 = min(Y - 1, math.floor(cy + S))
            z0 = max(0, math.ceil(cz - S))
            z1 = min(Z - 1, math.floor(cz + S))
            if x0 > x1 or y0 > y1 or z0 > z1:
                continue
            sub = data[:, z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
            t = sub[0] - cint[k, 0]
            dc2 = t * t
            for c in range(1, C):
                t = sub[c] - cint[k, c]
                dc2 = dc2 + t * t
            dz = zs[z0:z1 + 1] - cz
            dy = ys[y0:y1 + 1] - cy
            dx = xs[x0:x1 + 1] - cx
            ds2 = (dz * dz)[:, None, None] + (dy * dy)[None, :, None]
            ds2 = ds2 + (dx * dx)[None, None, :]
            d2 = dc2 + w * ds2
            bview = best[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
            lview = new_label[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
            upd = d2 < bview
            bview[upd] = d2[upd]
            lview[upd] = k + 1
        label = new_label
        if (label == 0).any():
            raise ConstraintError(
                "search windows left voxels unassigned; centers drifted beyond 2S"
            )
        flat = label.ravel() - 1
        cnt = np.bincount(flat, minlength=k0)
        sx = np.bincount(flat, weights=flat_x, minlength=k0)
        sy = np.bincount(flat, weights=flat_y, minlength=k0)
        sz = np.bincount(flat, weights=flat_z, minlength=k0)
        si = [np.bincount(flat, weights=flat_i[c], minlength=k0) for c in range(C)]
        for k in range(k0):
            n = cnt[k]
            if n > 0:
                cpos[k] = (sx[k] / n, sy[k] / n, sz[k] / n)
                for c in range(C):
                    cint[k, c] = si[c][k] / n

    out = _enforce_connectivity_array(label, params)
    meta = VolumeMeta(vol.meta.dims, 1, "u32", vol.meta.spacing)
    return SupervoxelMap(meta, out, int(out.max()))


def enforce_connectivity(svx: SupervoxelMap, params: SlicParams,
                         vol: MultiModalVolume | None = None) -> SupervoxelMap:
    """Split disconnected labels, absorb small fragments, compact labels.

    `vol` is accepted for interface symmetry but never consulted: the
    pass is purely geometric.
    """
    out = _enforce_connectivity_array(svx.data.astype(np.int64), params)
    meta = VolumeMeta(svx.meta.dims, 1, "u32", svx.meta.spacing)
    return SupervoxelMap(meta, out, int(out.max()))


def _enforce_connectivity_array(label: np.ndarray, params: SlicParams) -> np.ndarray:
    """Connectivity post-process on a raw positive-integer label grid.

    Deterministic procedure:
      1. connected components of equal label (configured neighborhood),
         numbered by first appearance in C scan order;
      2. size floor theta = min_fragment_factor * (N / #distinct labels);
         the globally largest component is always kept;
      3. components below theta, in (size, first-voxel) order, merge
         into the adjacent group sharing the most voxel faces, ties to
         the group with the smallest original label;
      4. groups relabel to 1..K ordered by (original label, first voxel).
    """
    conn = params.connectivity
    structure = ndimage.generate_binary_structure(3, 1 if conn == 6 else 3)
    values = np.unique(label)
    n_total = label.size
    theta = params.min_fragment_factor * (n_total / len(values))

    comp = np.zeros(label.shape, dtype=np.int64)
    offset = 0
    for val in values:
        m = label == val
        cc, n = ndimage.label(m, structure=structure)
        comp[m] = cc[m] + offset
        offset += n
    comp -= 1
    m_comps = offset

    # renumber components by first appearance in scan order
    flat = comp.ravel()
    _, first = np.unique(flat, return_index=True)
    rank = np.empty(m_comps, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(m_comps)
    comp = rank[comp]
    flat = comp.ravel()
    _, first = np.unique(flat, return_index=True)
    sizes = np.bincount(flat, minlength=m_comps)
    orig_label = label.ravel()[first]

    # face adjacency counts between components (6-neighbor faces)
    encoded = []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a = comp[tuple(lo)].ravel()
        b = comp[tuple(hi)].ravel()
        sel = a != b
        pa, pb = a[sel], b[sel]
        encoded.append(np.minimum(pa, pb) * m_comps + np.maximum(pa, pb))
    pair_ids, pair_counts = np.unique(np.concatenate(encoded), return_counts=True)

    adj: dict[int, dict[int, int]] = {i: {} for i in range(m_comps)}
    for e, c in zip(pair_ids.tolist(), pair_counts.tolist()):
        i, j = divmod(e, m_comps)
        adj[i][j] = c
        adj[j][i] = c

    g_label = {i: int(orig_label[i]) for i in range(m_comps)}
    g_first = {i: int(first[i]) for i in range(m_comps)}
    g_kept = {i: bool(sizes[i] >= theta) for i in range(m_comps)}
    largest = min(range(m_comps), key=lambda i: (-int(sizes[i]), int(first[i])))
    g_kept[largest] = True

    parent = list(range(m_comps))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    fragments = sorted(
        (i for i in range(m_comps) if sizes[i] < theta and i != largest),
        key=lambda i: (int(sizes[i]), int(first[i])),
    )
    for f in fragments:
        rf = find(f)
        if g_kept[rf]:
            continue
        neigh = adj[rf]
        if not neigh:
            continue  # group already spans everything it touches
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
    lut = np.array([new_of_root[find(i)] for i in range(m_comps)], dtype=np.uint32)
    return lut[comp]


def save_supervoxels(svx: SupervoxelMap, path) -> None:
    save_svol(svx, path, extra={"supervoxel_count": svx.supervoxel_count})


def load_supervoxels(path) -> SupervoxelMap:
    header = read_header(path)
    vol = load_svol(path)
    if not isinstance(vol, LabelVolume) or vol.meta.dtype != "u32":
        raise FormatError(f"{path} is not a u32 supervoxel map")
    k = int(header.get("supervoxel_count", vol.data.max()))
    return SupervoxelMap(vol.meta, vol.data, k)
