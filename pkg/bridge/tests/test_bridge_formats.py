"""Format writers: exact bytes, manifest schemas, pooling conventions."""

import json
import struct

import numpy as np
import pytest

from featbridge import formats

HEADER = struct.Struct("<4sHHIIIHH")


def test_feature_file_bytes_are_exact(tmp_path):
    path = tmp_path / "one.trfv"
    formats.write_feature_file(
        path, image_size=(8, 6),
        positions=np.array([[2.0, 3.0]]),
        scores=np.array([0.5]),
        descriptors=np.array([[1.0, 0.0]]),
        global_descriptor=np.array([1.0, 0.0, 0.0]))
    expected = HEADER.pack(b"TRFV", 1, 0, 8, 6, 1, 2, 3)
    expected += np.array([1.0, 0.0, 0.0], "<f4").tobytes()
    expected += np.array([2.0, 3.0, 0.5, 1.0, 0.0], "<f4").tobytes()
    assert path.read_bytes() == expected


def test_empty_feature_file_is_header_plus_global(tmp_path):
    path = tmp_path / "empty.trfv"
    formats.write_feature_file(
        path, image_size=(32, 32),
        positions=np.zeros((0, 2)), scores=np.zeros(0),
        descriptors=np.zeros((0, 16)),
        global_descriptor=np.zeros(4))
    data = path.read_bytes()
    assert len(data) == HEADER.size + 4 * 4
    magic, version, _, w, h, count, local_dim, global_dim = HEADER.unpack_from(data)
    assert (magic, version, w, h, count, local_dim, global_dim) == \
        (b"TRFV", 1, 32, 32, 0, 16, 4)


def test_pooled_global_descriptor_is_unit_norm():
    descriptors = np.array([[1.0, 0.0, 0.0, 0.0],
                            [0.0, 1.0, 0.0, 0.0]])
    pooled = formats.pooled_global_descriptor(descriptors, global_dim=8)
    assert pooled.shape == (8,)
    assert pooled.dtype == np.float32
    expected = np.zeros(8)
    expected[0] = expected[1] = 1.0 / np.sqrt(2.0)
    assert pooled == pytest.approx(expected)


def test_pooled_global_descriptor_truncates_wide_descriptors():
    wide = np.zeros((1, 300))
    wide[0, 0] = 2.0
    pooled = formats.pooled_global_descriptor(wide, global_dim=256)
    assert pooled.shape == (256,)
    assert pooled[0] == pytest.approx(1.0)
    assert np.all(pooled[1:] == 0.0)


def test_pooled_global_descriptor_empty_is_zero():
    pooled = formats.pooled_global_descriptor(np.zeros((0, 128)))
    assert pooled.shape == (formats.DEFAULT_GLOBAL_DIM,)
    assert np.all(pooled == 0.0)


def test_camera_json_centers_principal_point():
    camera = formats.camera_json(400.0, (336, 336))
    assert camera["focal_length_px"] == 400.0
    assert camera["principal_point"] == [168.0, 168.0]
    assert camera["image_size"] == [336, 336]
    assert camera["near_plane_m"] > 0.0


def test_map_manifest_schema():
    camera = formats.camera_json(400.0, (336, 336))
    keyframes = [
        {"index": 0, "arc_length": 0.0, "speed": 0.5, "curvature": 0.0,
         "stored_shift": None, "features": "a.trfv"},
        {"index": 1, "arc_length": 1.0, "speed": 0.5, "curvature": 0.0,
         "stored_shift": None, "features": "b.trfv"},
    ]
    manifest = formats.map_manifest(camera, keyframes, total_length=1.0,
                                    spacing_m=1.0)
    assert manifest["format"] == "repeatnav-map"
    assert manifest["version"] == 1
    assert manifest["total_length"] == 1.0
    capture = manifest["capture_config"]
    assert 0.0 < capture["d_turn"] <= capture["d_straight"]
    assert capture["heading_threshold"] > 0.0
    assert capture["store_shifts"] is False
    histogram = manifest["histogram_config"]
    assert histogram["bin_size_px"] >= 1
    assert manifest["keyframes"] == keyframes


def test_dataset_manifest_schema():
    camera = formats.camera_json(400.0, (336, 336))
    manifest = formats.dataset_manifest(
        camera, (-0.36, 0.0, 0.36), (-0.26, 0.0, 0.26),
        positions=[{"index": 0, "pose": {"position": [0.0, 0.0, 0.0],
                                         "yaw": 0.0}, "views": []}])
    assert manifest["format"] == "repeatnav-shift-dataset"
    assert manifest["version"] == 1
    assert manifest["lateral_offsets_m"] == [-0.36, 0.0, 0.36]
    assert len(manifest["positions"]) == 1


def test_write_json_is_stable_and_sorted(tmp_path):
    payload = {"b": 1, "a": {"d": 2, "c": 3}}
    first = formats.write_json(tmp_path / "one.json", payload)
    second = formats.write_json(tmp_path / "two.json", payload)
    assert first.read_bytes() == second.read_bytes()
    text = first.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")
    assert json.loads(text) == payload
