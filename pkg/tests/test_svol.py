import json
import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import make_labels, make_mask, make_volume
from svxsynth.errors import FormatError
from svxsynth.svol import load_mask, load_svol, save_svol
from svxsynth.volume import LabelVolume, MultiModalVolume


def write_fixture(tmp_path, dims, channels, dtype, payload_bytes, name="fix"):
    """Independent writer: header and raw bytes built by hand."""
    header = {"dims": list(dims), "channels": channels, "dtype": dtype}
    (tmp_path / f"{name}.json").write_text(json.dumps(header))
    (tmp_path / f"{name}.bin").write_bytes(payload_bytes)
    return tmp_path / f"{name}.json"


class TestLoad:
    def test_corner_voxel_indexing(self, tmp_path):
        # 2-channel 4x4x4 f32: value encodes ((c*4+z)*4+y)*4+x
        values = [float(((c * 4 + z) * 4 + y) * 4 + x)
                  for c in range(2) for z in range(4) for y in range(4)
                  for x in range(4)]
        payload = struct.pack("<128f", *values)
        path = write_fixture(tmp_path, (4, 4, 4), 2, "f32", payload)
        vol = load_svol(path)
        assert isinstance(vol, MultiModalVolume)
        assert vol.data[0, 0, 0, 0] == 0.0
        assert vol.data[1, 3, 3, 3] == float(((1 * 4 + 3) * 4 + 3) * 4 + 3)
        assert vol.data[0, 2, 1, 3] == float(((0 * 4 + 2) * 4 + 1) * 4 + 3)

    def test_zero_dim_rejected(self, tmp_path):
        path = write_fixture(tmp_path, (0, 4, 4), 1, "f32", b"")
        with pytest.raises(FormatError, match="non-positive dimension"):
            load_svol(path)

    def test_short_body_rejected(self, tmp_path):
        payload = struct.pack("<8f", *range(8))[:-1]
        path = write_fixture(tmp_path, (2, 2, 2), 1, "f32", payload)
        with pytest.raises(FormatError, match="payload length mismatch"):
            load_svol(path)

    def test_unknown_dtype_rejected(self, tmp_path):
        path = write_fixture(tmp_path, (2, 2, 2), 1, "i64", b"\x00" * 64)
        with pytest.raises(FormatError, match="unknown dtype"):
            load_svol(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError, match="missing file"):
            load_svol(tmp_path / "absent.json")

    def test_missing_body(self, tmp_path):
        (tmp_path / "h.json").write_text(
            json.dumps({"dims": [2, 2, 2], "channels": 1, "dtype": "f32"}))
        with pytest.raises(FormatError, match="missing file"):
            load_svol(tmp_path / "h.json")

    def test_non_finite_payload_rejected(self, tmp_path):
        payload = struct.pack("<8f", *([float("inf")] + [0.0] * 7))
        path = write_fixture(tmp_path, (2, 2, 2), 1, "f32", payload)
        with pytest.raises(FormatError, match="non-finite"):
            load_svol(path)

    def test_integer_payload_loads_as_labels(self, tmp_path):
        payload = struct.pack("<8I", *range(8))
        path = write_fixture(tmp_path, (2, 2, 2), 1, "u32", payload)
        vol = load_svol(path)
        assert isinstance(vol, LabelVolume)
        assert_array_equal(vol.data.ravel(), np.arange(8))


class TestRoundTrip:
    @pytest.mark.parametrize("dtype", ["f32", "u32", "u8"])
    def test_bytes_identity(self, tmp_path, dtype):
        rng = np.random.default_rng(3)
        if dtype == "f32":
            vol = make_volume((5, 4, 3), channels=2, seed=5)
        elif dtype == "u32":
            vol = make_labels((5, 4, 3), rng.integers(0, 9, size=60))
        else:
            vol = make_mask((5, 4, 3), rng.integers(0, 2, size=60))
        save_svol(vol, tmp_path / "a")
        first = (tmp_path / "a.bin").read_bytes()
        back = load_svol(tmp_path / "a")
        save_svol(back, tmp_path / "b")
        assert (tmp_path / "b.bin").read_bytes() == first
        assert_array_equal(back.data, vol.data)
        assert back.meta == vol.meta

    def test_mask_round_trip_stays_binary(self, tmp_path):
        rng = np.random.default_rng(4)
        mask = make_mask((4, 4, 4), rng.integers(0, 2, size=64))
        save_svol(mask, tmp_path / "m")
        back = load_mask(tmp_path / "m")
        assert set(np.unique(back.data)) <= {0, 1}
        assert_array_equal(back.data, mask.data)

    def test_minimal_volume_body_is_4_bytes(self, tmp_path):
        vol = make_volume((1, 1, 1), fill=0.25)
        save_svol(vol, tmp_path / "tiny")
        assert (tmp_path / "tiny.bin").stat().st_size == 4

    def test_extra_header_keys_preserved_on_save(self, tmp_path):
        vol = make_labels((2, 2, 2), np.arange(8))
        save_svol(vol, tmp_path / "k", extra={"supervoxel_count": 7})
        header = json.loads((tmp_path / "k.json").read_text())
        assert header["supervoxel_count"] == 7

    def test_load_mask_rejects_wide_integers(self, tmp_path):
        vol = make_labels((2, 2, 2), np.zeros(8))
        save_svol(vol, tmp_path / "wide")
        with pytest.raises(FormatError, match="u8 mask"):
            load_mask(tmp_path / "wide")
