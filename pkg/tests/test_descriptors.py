import numpy as np
import pytest

from keysample import (
    ScanContextConfig,
    SyntheticFieldConfig,
    ValidationError,
    load_descriptors,
    ring_key,
    save_descriptors,
    scan_context,
    synthetic_descriptor,
)
from keysample.descriptors import shifted_descriptor_distance


class TestScanContext:
    def test_empty_cloud(self):
        out = scan_context(np.zeros((0, 4)))
        assert out.shape == (1200,)
        assert np.all(out == 0.0)

    def test_single_point_bin_indices(self):
        # range 10 -> ring floor(20*10/80) = 2; azimuth 0 -> sector 0
        out = scan_context(np.array([[10.0, 0.0, 2.0, 1.0]]))
        grid = out.reshape(20, 60)
        assert grid[2, 0] == 2.0
        assert np.count_nonzero(grid) == 1

    def test_descriptor_length(self):
        out = scan_context(np.random.default_rng(0).normal(size=(50, 4)) * 5)
        assert out.shape == (20 * 60,)

    def test_points_beyond_max_range_discarded(self):
        out = scan_context(np.array([[100.0, 0.0, 3.0, 1.0]]))
        assert np.all(out == 0.0)

    def test_cell_keeps_max_height(self):
        pts = np.array(
            [[10.0, 0.0, -3.0, 1.0], [10.0, 0.0, -1.0, 1.0]]
        )
        grid = scan_context(pts).reshape(20, 60)
        assert grid[2, 0] == -1.0

    def test_point_order_invariance(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(200, 4)) * 10
        a = scan_context(pts)
        b = scan_context(pts[::-1])
        assert np.array_equal(a, b)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            ScanContextConfig(rings=0)
        with pytest.raises(ValidationError):
            ScanContextConfig(max_range=0.0)


class TestRingKey:
    def test_all_zero(self):
        assert np.all(ring_key(np.zeros(1200)) == 0.0)

    def test_single_cell_ring_two(self):
        d = np.zeros(1200)
        d[2 * 60 + 17] = 4.0
        key = ring_key(d)
        assert key[2] == pytest.approx(1.0 / 60.0)
        assert np.count_nonzero(key) == 1

    def test_cyclic_sector_shift_invariance(self):
        rng = np.random.default_rng(2)
        grid = (rng.random((20, 60)) > 0.7) * rng.random((20, 60))
        shifted = np.roll(grid, 13, axis=1)
        assert np.array_equal(
            ring_key(grid.reshape(-1)), ring_key(shifted.reshape(-1))
        )

    def test_wrong_length_rejected(self):
        with pytest.raises(ValidationError):
            ring_key(np.zeros(100))


class TestShiftedDistance:
    def test_identical_grids(self):
        rng = np.random.default_rng(3)
        d = rng.random(1200)
        assert shifted_descriptor_distance(d, d) == 0.0

    def test_rotated_grid_matches(self):
        rng = np.random.default_rng(4)
        grid = rng.random((20, 60))
        rolled = np.roll(grid, 7, axis=1)
        assert shifted_descriptor_distance(
            grid.reshape(-1), rolled.reshape(-1)
        ) == pytest.approx(0.0, abs=1e-12)


class TestSyntheticField:
    def test_zero_frequencies_and_phases(self):
        config = SyntheticFieldConfig(
            dimension=4,
            frequencies=np.zeros((4, 3)),
            phases=np.zeros(4),
        )
        out = synthetic_descriptor([3.0, -2.0, 1.0], config)
        assert np.allclose(out, 1.0)

    def test_noise_free_determinism(self):
        config = SyntheticFieldConfig(dimension=16, seed=5)
        a = synthetic_descriptor([1.0, 2.0, 0.0], config)
        b = synthetic_descriptor([1.0, 2.0, 0.0], config)
        assert np.array_equal(a, b)

    def test_same_seed_same_field(self):
        a = SyntheticFieldConfig(dimension=8, seed=9)
        b = SyntheticFieldConfig(dimension=8, seed=9)
        assert np.array_equal(a.frequencies, b.frequencies)
        assert np.array_equal(a.phases, b.phases)

    def test_finite_difference_matches_analytic_derivative(self):
        config = SyntheticFieldConfig(dimension=8, seed=6)
        p = np.array([0.3, -1.2, 0.7])
        v = np.array([1.0, 0.5, -0.25])
        v = v / np.linalg.norm(v)
        h = 1e-5
        numeric = (
            synthetic_descriptor(p + h * v, config)
            - synthetic_descriptor(p - h * v, config)
        ) / (2.0 * h)
        analytic = -(config.frequencies @ v) * np.sin(
            config.frequencies @ p + config.phases
        )
        assert np.allclose(numeric, analytic, atol=1e-8)

    def test_validation(self):
        with pytest.raises(ValidationError):
            SyntheticFieldConfig(dimension=0)
        with pytest.raises(ValidationError):
            SyntheticFieldConfig(dimension=4, frequencies=np.zeros((3, 3)))
        with pytest.raises(ValidationError):
            SyntheticFieldConfig(dimension=4, phases=np.zeros(3))


class TestDescriptorFileFormat:
    def test_small_round_trip(self, tmp_path):
        path = tmp_path / "d.kdsc"
        save_descriptors(path, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        out = load_descriptors(path)
        assert np.array_equal(out, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

    def test_large_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(7)
        matrix = rng.normal(size=(1000, 256)).astype(np.float32)
        path = tmp_path / "big.kdsc"
        save_descriptors(path, matrix)
        out = load_descriptors(path)
        assert np.array_equal(out.astype(np.float32), matrix)

    def test_count_mismatch_names_both_counts(self, tmp_path):
        path = tmp_path / "d.kdsc"
        save_descriptors(path, np.ones((3, 2)))
        with pytest.raises(ValidationError, match="expected 5.*found 3"):
            load_descriptors(path, expected_count=5)

    def test_header_magic_and_layout(self, tmp_path):
        path = tmp_path / "d.kdsc"
        save_descriptors(path, np.ones((2, 3)))
        raw = path.read_bytes()
        assert raw[:4] == b"KDSC"
        assert len(raw) == 4 + 12 + 2 * 3 * 4

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "d.kdsc"
        save_descriptors(path, np.ones((4, 4)))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValidationError, match="payload"):
            load_descriptors(path)

    def test_unsupported_version_rejected(self, tmp_path):
        import struct

        path = tmp_path / "d.kdsc"
        payload = struct.pack("<III", 9, 1, 1) + struct.pack("<f", 1.0)
        path.write_bytes(b"KDSC" + payload)
        with pytest.raises(ValidationError, match="version"):
            load_descriptors(path)

    def test_csv_fallback(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0\n3.0,4.0\n")
        out = load_descriptors(path)
        assert np.array_equal(out, [[1.0, 2.0], [3.0, 4.0]])

    def test_csv_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(ValidationError, match=":2:"):
            load_descriptors(path)

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ValidationError, match="empty"):
            load_descriptors(path)

    def test_non_2d_matrix_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            save_descriptors(tmp_path / "d.kdsc", np.ones(5))
