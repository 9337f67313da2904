"""Acceptance: bridge outputs round-trip through the navigation package.

These tests import repeatnav deliberately: they verify the cross-package
interface (binary feature files and JSON manifests) from the consumer's
side. The bridge itself never imports repeatnav; see featbridge.formats.
"""

import json

import numpy as np
import pytest

from repeatnav.features import read_feature_file
from repeatnav.histogram import HistogramConfig, estimate_shift
from repeatnav.teach import load_map

from featbridge.cli import main

from bridge_helpers import textured_array, translated_crops, write_png

ONE_BIN_PX = float(HistogramConfig().bin_size_px)


def report(line: str) -> None:
    print(f"\n[acceptance] {line}")


@pytest.fixture(scope="module")
def exported_sequence(tmp_path_factory):
    """Three sample images exported through the CLI at default settings."""
    root = tmp_path_factory.mktemp("bridge_roundtrip")
    input_dir = root / "images"
    input_dir.mkdir()
    for seed, name in enumerate(("first.png", "second.png", "third.png")):
        write_png(input_dir / name, textured_array(seed))
    out_dir = root / "out"
    code = main(["extract", "--input", str(input_dir), "--out", str(out_dir)])
    assert code == 0
    return out_dir


def test_exports_parse_in_primary_loader(exported_sequence):
    out_dir = exported_sequence
    files = sorted(out_dir.glob("*.trfv"))
    assert len(files) == 3
    worst_norm_err = 0.0
    counts = []
    for path in files:
        features = read_feature_file(path)
        assert features.image_size == (336, 336)
        assert len(features) >= 1
        counts.append(len(features))
        norms = np.linalg.norm(features.descriptors.astype(np.float64), axis=1)
        worst_norm_err = max(worst_norm_err, float(np.abs(norms - 1.0).max()))
    assert worst_norm_err <= 1e-5
    report(f"c9 bridge exports: 3/3 files parse in the primary loader, "
           f"counts {counts}, max |norm-1| {worst_norm_err:.2e} (<= 1e-5)")


def test_exported_map_loads_with_matching_counts(exported_sequence):
    out_dir = exported_sequence
    taught = load_map(out_dir)
    reported = json.loads((out_dir / "extract_report.json").read_text())
    expected = {row["features"]: row["feature_count"]
                for row in reported["images"]}
    assert len(taught) == len(expected) == 3
    for keyframe, row in zip(taught.keyframes,
                             json.loads((out_dir / "manifest.json").read_text())["keyframes"]):
        assert len(keyframe.features) == expected[row["features"]]
    report(f"c9 bridge map: load_map reads {len(taught)} keyframes with "
           f"feature counts matching the extract report")


def test_translated_copy_shift_within_one_bin(tmp_path):
    offset = 10
    original, translated = translated_crops(3, offset=offset)
    input_dir = tmp_path / "images"
    input_dir.mkdir()
    write_png(input_dir / "original.png", original)
    write_png(input_dir / "translated.png", translated)
    out_dir = tmp_path / "out"
    assert main(["extract", "--input", str(input_dir),
                 "--out", str(out_dir)]) == 0

    query = read_feature_file(out_dir / "original.trfv")
    reference = read_feature_file(out_dir / "translated.trfv")
    config = HistogramConfig()
    forward = estimate_shift(query, reference, config)
    backward = estimate_shift(reference, query, config)
    # displacement is reference minus query: content moved +offset columns
    assert abs(forward.horizontal_shift_px - offset) <= ONE_BIN_PX
    assert abs(forward.vertical_shift_px) <= ONE_BIN_PX
    assert abs(backward.horizontal_shift_px + offset) <= ONE_BIN_PX
    assert forward.match_count >= 50
    report(f"c9 bridge shift: {offset} px translated copy estimated at "
           f"{forward.horizontal_shift_px:+.1f} px "
           f"({backward.horizontal_shift_px:+.1f} px reversed), "
           f"within one bin ({ONE_BIN_PX:.0f} px) of the truth, "
           f"{forward.match_count} matches")
