"""Keyframe capture rule, map assembly, and map directory round-trips."""

import json
import math

import numpy as np
import pytest

from repeatnav.errors import MapError
from repeatnav.geometry import CameraModel
from repeatnav.histogram import HistogramConfig, estimate_shift
from repeatnav.teach import (
    CaptureConfig,
    Keyframe,
    KeyframeRecorder,
    TaughtPath,
    finalize_map,
    load_map,
    save_map,
)

from helpers import make_database, planted_pair, random_feature_set

CAMERA = CameraModel(focal_length_px=500.0, principal_point=(64.0, 48.0),
                     image_size=(128, 96), near_plane_m=0.05)


def features(rng, n=12):
    return random_feature_set(rng, (128, 96), n)


def drive(recorder, samples, rng):
    """Feed (arc, yaw) samples; returns captured (sample_index, keyframe)."""
    captured = []
    for i, (arc, yaw) in enumerate(samples):
        kf = recorder.tick(arc, yaw, speed=1.0, features=features(rng))
        if kf is not None:
            captured.append((i, kf))
    return captured


def test_first_tick_always_captures():
    rng = np.random.default_rng(0)
    recorder = KeyframeRecorder()
    kf = recorder.tick(0.0, 0.0, 1.0, features(rng))
    assert kf is not None
    assert kf.index == 0
    assert kf.arc_length == 0.0
    assert kf.taught_curvature == 0.0


def test_straight_driving_captures_every_d_straight():
    rng = np.random.default_rng(1)
    recorder = KeyframeRecorder(CaptureConfig(d_straight=1.0, d_turn=0.3))
    samples = [(0.1 * i, 0.0) for i in range(51)]  # 5 m at 0.1 m steps
    captured = drive(recorder, samples, rng)
    arcs = [kf.arc_length for _, kf in captured]
    assert arcs == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])


def test_turning_densifies_capture():
    rng = np.random.default_rng(2)
    config = CaptureConfig(d_straight=1.0, d_turn=0.3,
                           heading_threshold=math.radians(10.0))
    recorder = KeyframeRecorder(config)
    # constant curvature of 40 deg/m: 10 deg accumulates every 0.25 m, so
    # the distance gate d_turn = 0.3 m is the binding constraint. Steps of
    # 1/32 m are binary-exact, so the accumulated distance has no drift and
    # the gate fires at 0.3125 m after every capture.
    step = 1.0 / 32.0
    samples = [(step * i, math.radians(40.0) * step * i) for i in range(65)]
    captured = drive(recorder, samples, rng)
    arcs = [kf.arc_length for _, kf in captured]
    assert arcs == pytest.approx(
        [0.0, 0.3125, 0.625, 0.9375, 1.25, 1.5625, 1.875])


def test_turn_capture_requires_both_distance_and_heading():
    rng = np.random.default_rng(3)
    config = CaptureConfig(d_straight=1.0, d_turn=0.3,
                           heading_threshold=math.radians(10.0))
    recorder = KeyframeRecorder(config)
    recorder.tick(0.0, 0.0, 1.0, features(rng))
    # 0.4 m driven but only 5 degrees turned: no capture
    assert recorder.tick(0.4, math.radians(5.0), 1.0, features(rng)) is None
    # heading now past threshold with distance past d_turn: capture
    kf = recorder.tick(0.5, math.radians(11.0), 1.0, features(rng))
    assert kf is not None
    assert kf.arc_length == 0.5


def test_curvature_is_heading_change_over_distance():
    rng = np.random.default_rng(4)
    recorder = KeyframeRecorder(CaptureConfig(d_straight=1.0, d_turn=0.3))
    recorder.tick(0.0, 0.0, 1.0, features(rng))
    kf = recorder.tick(0.5, math.radians(12.0), 1.0, features(rng))
    assert kf.taught_curvature == pytest.approx(math.radians(12.0) / 0.5)


def test_heading_accumulates_through_wraparound():
    rng = np.random.default_rng(5)
    recorder = KeyframeRecorder()
    recorder.tick(0.0, math.radians(174.0), 1.0, features(rng))
    # crossing the +-pi seam: 174 deg -> -174 deg is +12 deg of turn
    kf = recorder.tick(0.4, math.radians(-174.0), 1.0, features(rng))
    assert kf is not None
    assert kf.taught_curvature == pytest.approx(math.radians(12.0) / 0.4)


def test_non_monotone_odometry_rejected():
    rng = np.random.default_rng(6)
    recorder = KeyframeRecorder()
    recorder.tick(1.0, 0.0, 1.0, features(rng))
    with pytest.raises(ValueError):
        recorder.tick(0.9, 0.0, 1.0, features(rng))


def test_capture_config_validation():
    with pytest.raises(ValueError):
        CaptureConfig(d_straight=0.2, d_turn=0.3)
    with pytest.raises(ValueError):
        CaptureConfig(d_turn=0.0)
    with pytest.raises(ValueError):
        CaptureConfig(heading_threshold=0.0)


def raw_keyframes(rng, count=4, spacing=1.0):
    return [Keyframe(index=i, arc_length=spacing * i, features=features(rng),
                     taught_forward_speed=1.0, taught_curvature=0.0)
            for i in range(count)]


def test_finalize_without_shifts_leaves_none():
    rng = np.random.default_rng(7)
    path = finalize_map(raw_keyframes(rng), CAMERA,
                        CaptureConfig(store_shifts=False))
    assert all(kf.stored_shift is None for kf in path.keyframes)
    assert path.total_length == 3.0
    assert len(path) == 4


def test_finalize_with_shifts_matches_direct_estimates():
    rng = np.random.default_rng(8)
    query, reference = planted_pair(rng, (128, 96), 15, shift=(8.0, 0.0))
    third, _ = planted_pair(np.random.default_rng(9), (128, 96), 15,
                            shift=(0.0, 4.0))
    # stored shift of keyframe i treats keyframe i as the reference image
    kfs = [Keyframe(0, 0.0, query, 1.0, 0.0),
           Keyframe(1, 1.0, reference, 1.0, 0.0),
           Keyframe(2, 2.0, third, 1.0, 0.0)]
    config = HistogramConfig()
    path = finalize_map(kfs, CAMERA, CaptureConfig(store_shifts=True),
                        histogram_config=config)
    assert path.keyframes[0].stored_shift is None
    for i in (1, 2):
        est = estimate_shift(kfs[i - 1].features, kfs[i].features, config)
        assert path.keyframes[i].stored_shift == \
            (est.horizontal_shift_px, est.vertical_shift_px)
    # the planted pair gives a known first hop
    assert path.keyframes[1].stored_shift == (8.0, 0.0)


def test_finalize_needs_two_keyframes():
    rng = np.random.default_rng(10)
    with pytest.raises(MapError):
        finalize_map(raw_keyframes(rng, count=1), CAMERA, CaptureConfig())


def test_taught_path_validation():
    rng = np.random.default_rng(11)
    kfs = raw_keyframes(rng, count=3)
    with pytest.raises(MapError):
        TaughtPath(keyframes=tuple(kfs[:1]), total_length=1.0, camera=CAMERA,
                   capture_config=CaptureConfig())
    shuffled = (kfs[1], kfs[0], kfs[2])
    with pytest.raises(MapError):
        TaughtPath(keyframes=shuffled, total_length=2.0, camera=CAMERA,
                   capture_config=CaptureConfig())
    with pytest.raises(MapError):
        TaughtPath(keyframes=tuple(kfs), total_length=1.5, camera=CAMERA,
                   capture_config=CaptureConfig())
    bad_first = (Keyframe(0, 0.0, kfs[0].features, 1.0, 0.0,
                          stored_shift=(1.0, 0.0)),) + tuple(kfs[1:])
    with pytest.raises(MapError):
        TaughtPath(keyframes=bad_first, total_length=2.0, camera=CAMERA,
                   capture_config=CaptureConfig())


def test_nearest_index_ties_go_to_earlier_keyframe():
    database = make_database(np.random.default_rng(12), count=5, spacing=1.0)
    assert database.nearest_index(0.2) == 0
    assert database.nearest_index(1.6) == 2
    assert database.nearest_index(2.5) == 2
    assert database.nearest_index(99.0) == 4


def test_mean_spacing():
    database = make_database(np.random.default_rng(13), count=5, spacing=0.5)
    assert database.mean_spacing == pytest.approx(0.5)


def test_map_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(14)
    kfs = raw_keyframes(rng, count=3, spacing=0.8)
    original = finalize_map(kfs, CAMERA, CaptureConfig(store_shifts=True),
                            histogram_config=HistogramConfig(bin_size_px=2),
                            total_length=2.0)
    save_map(original, tmp_path / "map")
    loaded = load_map(tmp_path / "map")

    assert loaded.total_length == original.total_length
    assert loaded.camera == original.camera
    assert loaded.capture_config == original.capture_config
    assert loaded.histogram_config == original.histogram_config
    assert len(loaded) == len(original)
    for a, b in zip(loaded.keyframes, original.keyframes):
        assert a.index == b.index
        assert a.arc_length == b.arc_length
        assert a.taught_forward_speed == b.taught_forward_speed
        assert a.taught_curvature == b.taught_curvature
        assert a.stored_shift == b.stored_shift
        assert np.array_equal(a.features.positions, b.features.positions)
        assert np.array_equal(a.features.scores, b.features.scores)
        assert np.array_equal(a.features.descriptors, b.features.descriptors)
        assert np.array_equal(a.features.global_descriptor,
                              b.features.global_descriptor)
        assert a.features.image_size == b.features.image_size


def test_saved_map_is_byte_stable(tmp_path):
    rng = np.random.default_rng(15)
    path = finalize_map(raw_keyframes(rng), CAMERA, CaptureConfig())
    save_map(path, tmp_path / "a")
    save_map(path, tmp_path / "b")
    for name in ["manifest.json", "keyframe_00000.trfv", "keyframe_00003.trfv"]:
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_manifest_structure(tmp_path):
    rng = np.random.default_rng(16)
    path = finalize_map(raw_keyframes(rng), CAMERA, CaptureConfig())
    manifest_path = save_map(path, tmp_path / "map")
    manifest = json.loads(manifest_path.read_text())
    assert manifest["format"] == "repeatnav-map"
    assert manifest["version"] == 1
    assert manifest["camera"]["focal_length_px"] == 500.0
    assert manifest["histogram_config"]["bin_size_px"] == 4
    assert [row["features"] for row in manifest["keyframes"]] == \
        [f"keyframe_{i:05d}.trfv" for i in range(4)]
    assert all(row["stored_shift"] is None for row in manifest["keyframes"])


def test_load_map_accepts_manifest_path_directly(tmp_path):
    rng = np.random.default_rng(17)
    path = finalize_map(raw_keyframes(rng), CAMERA, CaptureConfig())
    manifest_path = save_map(path, tmp_path / "map")
    loaded = load_map(manifest_path)
    assert len(loaded) == 4


def test_load_map_error_cases(tmp_path):
    with pytest.raises(MapError, match="manifest"):
        load_map(tmp_path / "absent")

    bad_json = tmp_path / "bad_json"
    bad_json.mkdir()
    (bad_json / "manifest.json").write_text("{not json")
    with pytest.raises(MapError, match="JSON"):
        load_map(bad_json)

    rng = np.random.default_rng(18)
    path = finalize_map(raw_keyframes(rng), CAMERA, CaptureConfig())
    manifest_path = save_map(path, tmp_path / "map")
    manifest = json.loads(manifest_path.read_text())

    wrong_format = dict(manifest, format="other-map")
    (tmp_path / "map" / "manifest.json").write_text(json.dumps(wrong_format))
    with pytest.raises(MapError, match="format"):
        load_map(tmp_path / "map")

    wrong_version = dict(manifest, version=99)
    (tmp_path / "map" / "manifest.json").write_text(json.dumps(wrong_version))
    with pytest.raises(MapError, match="version"):
        load_map(tmp_path / "map")

    missing_field = {k: v for k, v in manifest.items() if k != "camera"}
    (tmp_path / "map" / "manifest.json").write_text(json.dumps(missing_field))
    with pytest.raises(MapError, match="field"):
        load_map(tmp_path / "map")
