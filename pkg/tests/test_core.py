import math

import numpy as np
import pytest

from keysample import (
    Keyframe,
    KeyframeStore,
    Pose,
    Session,
    ValidationError,
    cumulative_arclength,
    pose_distance,
)
from keysample.core import KeyframeWindow, MIN_ARC_STEP

from conftest import make_pose


class TestPose:
    def test_quaternion_is_normalized(self):
        p = Pose([0, 0, 0], [0, 0, 0, 2])
        assert np.allclose(p.quaternion, [0, 0, 0, 1])

    def test_default_quaternion_is_identity(self):
        assert np.allclose(Pose([1, 2, 3]).quaternion, [0, 0, 0, 1])

    def test_zero_quaternion_rejected(self):
        with pytest.raises(ValidationError):
            Pose([0, 0, 0], [0, 0, 0, 0])

    def test_non_finite_position_rejected(self):
        with pytest.raises(ValidationError):
            Pose([np.nan, 0, 0])


class TestPoseDistance:
    def test_identity(self):
        p = make_pose(1.5, -2.0)
        assert pose_distance(p, p) == 0.0

    def test_3_4_5_triangle(self):
        assert pose_distance(Pose([0, 0, 0]), Pose([3, 4, 0])) == 5.0

    def test_unit_diagonal(self):
        d = pose_distance(Pose([1, 1, 1]), Pose([2, 2, 2]))
        assert d == pytest.approx(math.sqrt(3), abs=1e-12)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a, b, c = (Pose(rng.normal(size=3)) for _ in range(3))
            assert pose_distance(a, b) == pose_distance(b, a)
            assert (
                pose_distance(a, c)
                <= pose_distance(a, b) + pose_distance(b, c) + 1e-12
            )


class TestCumulativeArclength:
    def test_single_pose(self):
        assert cumulative_arclength([make_pose(2.0)]).tolist() == [0.0]

    def test_collinear(self):
        poses = [make_pose(0), make_pose(1), make_pose(3)]
        assert cumulative_arclength(poses).tolist() == [0.0, 1.0, 3.0]

    def test_repeated_pose_clamped(self):
        out = cumulative_arclength([make_pose(0), make_pose(0)])
        assert out.tolist() == [0.0, MIN_ARC_STEP]

    def test_strictly_increasing(self):
        rng = np.random.default_rng(11)
        poses = [Pose(rng.normal(size=3) * 0.01) for _ in range(20)]
        out = cumulative_arclength(poses)
        assert np.all(np.diff(out) > 0)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            cumulative_arclength([])


class TestKeyframe:
    def test_negative_id_rejected(self):
        with pytest.raises(ValidationError):
            Keyframe(-1, make_pose(0), [1.0])

    def test_empty_descriptor_rejected(self):
        with pytest.raises(ValidationError):
            Keyframe(0, make_pose(0), [])

    def test_non_finite_descriptor_rejected(self):
        with pytest.raises(ValidationError):
            Keyframe(0, make_pose(0), [1.0, np.inf])

    def test_descriptor_flattened(self):
        kf = Keyframe(0, make_pose(0), [[1.0, 2.0]])
        assert kf.descriptor.shape == (2,)


class TestKeyframeWindow:
    def test_is_full(self):
        w = KeyframeWindow(2)
        assert not w.is_full()
        w.entries.append(Keyframe(0, make_pose(0), [1.0]))
        w.entries.append(Keyframe(1, make_pose(1), [1.0]))
        assert w.is_full()


class TestKeyframeStore:
    def _kf(self, i, x, y=0.0):
        return Keyframe(i, make_pose(x, y), [float(i)])

    def test_duplicate_id_rejected(self):
        store = KeyframeStore()
        store.append(self._kf(3, 0))
        with pytest.raises(ValidationError):
            store.append(self._kf(3, 1))

    def test_contains_len_iter(self):
        store = KeyframeStore()
        store.append(self._kf(0, 0))
        store.append(self._kf(5, 1))
        assert len(store) == 2
        assert 5 in store and 1 not in store
        assert [k.id for k in store] == [0, 5]
        assert store.ids() == [0, 5]

    def test_empty_radius_query(self):
        assert KeyframeStore().radius_query(make_pose(0), 1.0) == []

    def test_boundary_inclusive(self):
        store = KeyframeStore()
        store.append(self._kf(7, 2.5))
        assert store.radius_query(make_pose(0), 2.5) == [7]

    def test_nonpositive_radius_rejected(self):
        store = KeyframeStore()
        store.append(self._kf(0, 0))
        with pytest.raises(ValidationError):
            store.radius_query(make_pose(0), 0.0)

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(21)
        store = KeyframeStore()
        frames = []
        for i in range(100):
            kf = Keyframe(i, Pose(rng.uniform(-5, 5, size=3)), [0.0])
            frames.append(kf)
            store.append(kf)
        for _ in range(50):
            center = Pose(rng.uniform(-5, 5, size=3))
            radius = float(rng.uniform(0.5, 6.0))
            expected = sorted(
                k.id
                for k in frames
                if pose_distance(center, k.pose) <= radius
            )
            assert store.radius_query(center, radius) == expected

    def test_query_after_append_sees_new_point(self):
        store = KeyframeStore()
        store.append(self._kf(0, 0))
        assert store.radius_query(make_pose(0), 1.0) == [0]
        store.append(self._kf(1, 0.5))
        assert store.radius_query(make_pose(0), 1.0) == [0, 1]


class TestSession:
    def test_descriptor_row_mismatch(self):
        with pytest.raises(ValidationError):
            Session([make_pose(0)], descriptors=np.zeros((2, 3)))

    def test_scan_path_mismatch(self):
        with pytest.raises(ValidationError):
            Session([make_pose(0)], scan_paths=["a.bin", "b.bin"])

    def test_keyframes_require_descriptors(self):
        with pytest.raises(ValidationError):
            Session([make_pose(0)]).keyframes()

    def test_keyframes_builder(self):
        s = Session(
            [make_pose(0), make_pose(1)],
            descriptors=[[1.0, 2.0], [3.0, 4.0]],
            scan_paths=["a.bin", "b.bin"],
        )
        kfs = s.keyframes()
        assert [k.id for k in kfs] == [0, 1]
        assert kfs[1].scan_ref == "b.bin"
        assert np.array_equal(kfs[0].descriptor, [1.0, 2.0])
