import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import ndimage

from conftest import make_volume
from svxsynth.errors import ConstraintError, FormatError
from svxsynth.phantom import PhantomSpec, generate_phantom
from svxsynth.slic import (ClusterCenter, SlicParams, SupervoxelMap,
                           enforce_connectivity, grid_spacing, init_seeds,
                           load_supervoxels, run_slic, save_supervoxels)
from svxsynth.slic_reference import slic_reference
from svxsynth.volume import MultiModalVolume, VolumeMeta


def make_map(dims, labels):
    x, y, z = dims
    arr = np.asarray(labels, dtype=np.uint32).reshape((z, y, x))
    meta = VolumeMeta(dims, 1, "u32")
    return SupervoxelMap(meta, arr, int(arr.max()))


def assert_connected(svx, connectivity=6):
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    for label in range(1, svx.supervoxel_count + 1):
        _, n = ndimage.label(svx.data == label, structure=structure)
        assert n == 1, f"label {label} has {n} components"


class TestInitSeeds:
    def test_cube_exact_grid(self):
        vol = make_volume((64, 64, 64), fill=0.5)
        seeds = init_seeds(vol, SlicParams(max_supervoxels=64))
        assert len(seeds) == 64
        assert grid_spacing((64, 64, 64), 64) == pytest.approx(16.0)
        xs = sorted({s.spatial[0] for s in seeds})
        assert xs == [7.5, 23.5, 39.5, 55.5]
        assert xs[1] - xs[0] == 16.0

    def test_single_seed_at_middle(self):
        vol = make_volume((10, 10, 10), fill=0.5)
        seeds = init_seeds(vol, SlicParams(max_supervoxels=1))
        assert len(seeds) == 1
        assert seeds[0].spatial == (4.5, 4.5, 4.5)

    def test_paper_geometry_count(self):
        vol = make_volume((160, 216, 32), channels=2, fill=0.5)
        spacing = grid_spacing((160, 216, 32), 400)
        assert spacing == pytest.approx((160 * 216 * 32 / 400) ** (1 / 3))
        seeds = init_seeds(vol, SlicParams(max_supervoxels=400))
        assert 0 < len(seeds) <= 400

    def test_too_many_supervoxels(self):
        vol = make_volume((4, 4, 4), fill=0.5)
        with pytest.raises(ConstraintError, match="exceeds voxel count"):
            init_seeds(vol, SlicParams(max_supervoxels=65))

    def test_intensity_sampled_at_seed_voxel(self):
        vol = make_volume((8, 8, 8), seed=3)
        seeds = init_seeds(vol, SlicParams(max_supervoxels=8))
        for s in seeds:
            vx, vy, vz = (int(np.floor(c + 0.5)) for c in s.spatial)
            assert_array_equal(s.intensity, vol.data[:, vz, vy, vx].astype(np.float64))


class TestRunSlic:
    def test_uniform_grid_partition(self):
        vol = make_volume((16, 16, 16), fill=0.5)
        for m in (0.01, 0.15, 10.0):
            svx = run_slic(vol, SlicParams(max_supervoxels=8, compactness=m))
            assert svx.supervoxel_count == 8
            expected = np.zeros((16, 16, 16), dtype=np.uint32)
            for z in range(16):
                for y in range(16):
                    for x in range(16):
                        expected[z, y, x] = 1 + (z // 8) * 4 + (y // 8) * 2 + (x // 8)
            assert_array_equal(svx.data, expected)

    def test_two_half_volume_boundary(self):
        data = np.zeros((1, 8, 8, 8), dtype=np.float32)
        data[:, :, :, 4:] = 1.0
        vol = MultiModalVolume(VolumeMeta((8, 8, 8), 1, "f32"), data)
        params = SlicParams(max_supervoxels=2, compactness=0.15)
        svx = run_slic(vol, params)
        expected = np.where(data[0] == 0, 1, 2).astype(np.uint32)
        assert_array_equal(svx.data, expected)
        assert_array_equal(slic_reference(vol, params).data, expected)

    def test_deterministic(self):
        vol, _ = generate_phantom(PhantomSpec(dims=(20, 18, 14), lesion_count=(1, 2),
                                              lesion_radius=(3, 4), seed=9))
        params = SlicParams(max_supervoxels=12, compactness=0.15)
        a = run_slic(vol, params)
        b = run_slic(vol, params)
        assert_array_equal(a.data, b.data)
        assert a.supervoxel_count == b.supervoxel_count

    def test_unnormalized_rejected(self):
        vol = make_volume((8, 8, 8), fill=0.5)
        bad = MultiModalVolume(vol.meta, vol.data * np.float32(3.0))
        with pytest.raises(ConstraintError, match="unnormalized"):
            run_slic(bad, SlicParams(max_supervoxels=4))

    def test_totality_and_connectivity(self):
        vol, _ = generate_phantom(PhantomSpec(dims=(22, 20, 16), lesion_count=(2, 3),
                                              lesion_radius=(3, 5), seed=21))
        svx = run_slic(vol, SlicParams(max_supervoxels=10, compactness=0.15))
        assert svx.data.min() == 1
        assert svx.data.max() == svx.supervoxel_count
        assert set(np.unique(svx.data)) == set(range(1, svx.supervoxel_count + 1))
        assert_connected(svx)

    def test_compactness_monotone_surface_ratio(self):
        # grid-like supervoxels have less boundary per voxel
        def mean_ratio(svx):
            surf = np.zeros(svx.supervoxel_count + 1)
            for axis in range(3):
                lo = [slice(None)] * 3
                hi = [slice(None)] * 3
                lo[axis] = slice(None, -1)
                hi[axis] = slice(1, None)
                a = svx.data[tuple(lo)].ravel()
                b = svx.data[tuple(hi)].ravel()
                sel = a != b
                np.add.at(surf, a[sel], 1)
                np.add.at(surf, b[sel], 1)
            sizes = np.bincount(svx.data.ravel(), minlength=svx.supervoxel_count + 1)
            return float(np.mean(surf[1:] / sizes[1:]))

        ratios = {0.01: [], 0.15: [], 10.0: []}
        for seed in range(5):
            vol, _ = generate_phantom(PhantomSpec(
                dims=(24, 24, 24), lesion_count=(3, 5), lesion_radius=(3, 5),
                seed=100 + seed))
            for m in ratios:
                svx = run_slic(vol, SlicParams(max_supervoxels=27, compactness=m))
                ratios[m].append(mean_ratio(svx))
        means = {m: np.mean(v) for m, v in ratios.items()}
        assert means[0.01] >= means[0.15] >= means[10.0]


class TestEnforceConnectivity:
    def test_already_connected_fixed_point(self):
        labels = np.zeros((4, 4, 8), dtype=np.uint32)
        labels[..., :4] = 1
        labels[..., 4:] = 2
        svx = make_map((8, 4, 4), labels)
        out = enforce_connectivity(svx, SlicParams(max_supervoxels=2))
        assert_array_equal(out.data, svx.data)
        assert out.supervoxel_count == 2

    def test_orphan_relabeled_to_surrounding(self):
        labels = np.zeros((6, 6, 12), dtype=np.uint32)
        labels[..., :6] = 1
        labels[..., 6:] = 2
        labels[3, 3, 9] = 1  # orphan of label 1 inside label 2
        svx = make_map((12, 6, 6), labels)
        out = enforce_connectivity(svx, SlicParams(max_supervoxels=2))
        assert out.data[3, 3, 9] == 2
        assert out.supervoxel_count == 2
        assert_connected(out)

    def test_equal_boundary_tie_goes_to_smaller_label(self):
        labels = np.zeros((2, 2, 13), dtype=np.uint32)
        labels[..., :6] = 1
        labels[..., 6] = 3  # 4-voxel fragment, 4 faces to each side
        labels[..., 7:] = 2
        svx = make_map((13, 2, 2), labels)
        out = enforce_connectivity(svx, SlicParams(max_supervoxels=3))
        assert out.supervoxel_count == 2
        assert (out.data[..., 6] == 1).all()
        assert (out.data[..., :6] == 1).all()
        assert (out.data[..., 7:] == 2).all()

    def test_split_label_gets_new_ids(self):
        labels = np.ones((4, 4, 12), dtype=np.uint32)
        labels[..., 8:] = 2
        labels[..., :2] = 2  # second, disconnected island of label 2
        svx = make_map((12, 4, 4), labels)
        out = enforce_connectivity(svx, SlicParams(max_supervoxels=2))
        assert out.supervoxel_count == 3
        assert_connected(out)


class TestReference:
    def test_matches_run_slic_on_phantom(self):
        vol, _ = generate_phantom(PhantomSpec(dims=(12, 12, 12), lesion_count=(1, 2),
                                              lesion_radius=(2, 3), seed=5))
        params = SlicParams(max_supervoxels=8, compactness=0.15)
        assert_array_equal(run_slic(vol, params).data,
                           slic_reference(vol, params).data)

    def test_uniform_16_cube(self):
        vol = make_volume((16, 16, 16), fill=0.5)
        svx = slic_reference(vol, SlicParams(max_supervoxels=8))
        counts = np.bincount(svx.data.ravel())
        assert svx.supervoxel_count == 8
        assert (counts[1:] == 512).all()

    def test_oversized_volume_refused(self):
        vol = make_volume((65, 65, 65), fill=0.5)
        with pytest.raises(ConstraintError, match="refuses"):
            slic_reference(vol, SlicParams(max_supervoxels=8))


class TestSupervoxelMapType:
    def test_non_contiguous_labels_rejected(self):
        arr = np.ones((2, 2, 2), dtype=np.uint32)
        arr[0, 0, 0] = 3  # label 2 missing
        with pytest.raises(FormatError, match="contiguous"):
            SupervoxelMap(VolumeMeta((2, 2, 2), 1, "u32"), arr, 3)

    def test_save_load_round_trip(self, tmp_path):
        vol, _ = generate_phantom(PhantomSpec(dims=(14, 12, 10), lesion_count=(1, 1),
                                              lesion_radius=(2, 3), seed=2))
        svx = run_slic(vol, SlicParams(max_supervoxels=6))
        save_supervoxels(svx, tmp_path / "svx")
        back = load_supervoxels(tmp_path / "svx")
        assert back.supervoxel_count == svx.supervoxel_count
        assert_array_equal(back.data, svx.data)

    def test_params_validation(self):
        with pytest.raises(ConstraintError):
            SlicParams(compactness=0.0)
        with pytest.raises(ConstraintError):
            SlicParams(connectivity=18)
        with pytest.raises(ConstraintError):
            SlicParams(min_fragment_factor=0.0)
