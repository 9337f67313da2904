"""Feature sets, mutual-NN matching vs brute force, and the binary file."""

import numpy as np
import pytest

from repeatnav.errors import (
    ConfigurationError,
    DegenerateDescriptorError,
    EmptyFrameError,
    FeatureFileError,
)
from repeatnav.features import (
    FeatureSet,
    cosine_similarity,
    global_descriptor_from_locals,
    match_arrays,
    match_mutual_nn,
    read_feature_file,
    unit_normalize,
    write_feature_file,
)

from helpers import planted_pair, random_feature_set, unit_rows


def brute_force_matches(query, reference):
    """O(n^2) mutual-NN oracle on Euclidean descriptor distance.

    Nearest-neighbor ties break to the lowest index on both sides.
    """
    q = query.descriptors.astype(np.float64)
    r = reference.descriptors.astype(np.float64)
    if len(q) == 0 or len(r) == 0:
        return []
    dist = np.sqrt(((q[:, None, :] - r[None, :, :]) ** 2).sum(axis=2))
    pairs = []
    for qi in range(len(q)):
        ri = int(dist[qi].argmin())
        back = int(dist[:, ri].argmin())
        if back == qi:
            pairs.append((qi, ri))
    return pairs


def test_identical_sets_match_to_self():
    rng = np.random.default_rng(0)
    fs = random_feature_set(rng, (64, 48), 25)
    matches = match_mutual_nn(fs, fs)
    assert len(matches) == 25
    for m in matches:
        assert m.query_index == m.reference_index
        assert np.array_equal(m.displacement, [0.0, 0.0])
        assert m.weight == pytest.approx(2 * fs.scores[m.query_index])


def test_cross_check_excludes_one_sided_pairs():
    # q0's nearest is r0, but r0's nearest is q1, so (q0, r0) must not match
    def unit(deg):
        a = np.radians(deg)
        return [np.cos(a), np.sin(a)]

    query = FeatureSet((32, 32), [[1, 1], [2, 2]], [1, 1],
                       [unit(0), unit(5)],
                       unit_normalize([1, 1]))
    reference = FeatureSet((32, 32), [[3, 3], [4, 4]], [1, 1],
                           [unit(3), unit(90)],
                           unit_normalize([1, 1]))
    matches = match_mutual_nn(query, reference)
    pairs = {(m.query_index, m.reference_index) for m in matches}
    assert (0, 0) not in pairs
    assert (1, 0) in pairs


def test_matching_agrees_with_brute_force_oracle():
    rng = np.random.default_rng(42)
    for _ in range(30):
        nq = int(rng.integers(1, 40))
        nr = int(rng.integers(1, 40))
        query = random_feature_set(rng, (64, 48), nq, local_dim=8)
        reference = random_feature_set(rng, (64, 48), nr, local_dim=8)
        got = match_mutual_nn(query, reference)
        expected = brute_force_matches(query, reference)
        assert [(m.query_index, m.reference_index) for m in got] == expected
        for m in got:
            assert m.weight == pytest.approx(
                float(query.scores[m.query_index])
                + float(reference.scores[m.reference_index]))
            assert np.allclose(
                m.displacement,
                reference.positions[m.reference_index]
                - query.positions[m.query_index])


def test_nn_ties_break_to_lowest_reference_index():
    desc = unit_rows(np.random.default_rng(1), 1, 16)
    query = FeatureSet((32, 32), [[5, 5]], [1.0], desc,
                       global_descriptor_from_locals(desc))
    # two identical reference descriptors: index 0 must win the tie
    reference = FeatureSet((32, 32), [[1, 1], [9, 9]], [1.0, 1.0],
                           np.vstack([desc, desc]),
                           global_descriptor_from_locals(desc))
    matches = match_mutual_nn(query, reference)
    assert len(matches) == 1
    assert matches[0].reference_index == 0


def test_feature_cap_keeps_top_scores_and_original_indices():
    rng = np.random.default_rng(9)
    query, reference = planted_pair(rng, (64, 48), 10, (4.0, 0.0))
    scores = np.linspace(1.0, 0.1, 10).astype(np.float32)
    query = FeatureSet((64, 48), query.positions, scores, query.descriptors,
                       query.global_descriptor)
    reference = FeatureSet((64, 48), reference.positions, scores,
                           reference.descriptors, reference.global_descriptor)
    matches = match_mutual_nn(query, reference, feature_cap=4)
    assert {m.query_index for m in matches} == {0, 1, 2, 3}
    assert {m.reference_index for m in matches} == {0, 1, 2, 3}


def test_empty_inputs_yield_empty_matches():
    rng = np.random.default_rng(2)
    fs = random_feature_set(rng, (64, 48), 5)
    empty = FeatureSet.empty((64, 48))
    assert match_mutual_nn(empty, fs) == []
    assert match_mutual_nn(fs, empty) == []
    qi, ri, w, d = match_arrays(empty, empty)
    assert len(qi) == len(ri) == len(w) == len(d) == 0


def test_dimension_mismatch_raises():
    rng = np.random.default_rng(3)
    a = random_feature_set(rng, (64, 48), 4, local_dim=16)
    b = random_feature_set(rng, (64, 48), 4, local_dim=32)
    with pytest.raises(ConfigurationError):
        match_mutual_nn(a, b)


def test_feature_set_validation():
    desc = unit_rows(np.random.default_rng(4), 1, 8)
    good_global = unit_normalize(np.ones(8))
    with pytest.raises(ConfigurationError):
        FeatureSet((32, 32), [[32, 5]], [1.0], desc, good_global)
    with pytest.raises(ConfigurationError):
        FeatureSet((32, 32), [[-1, 5]], [1.0], desc, good_global)
    with pytest.raises(ConfigurationError):
        FeatureSet((32, 32), [[5, 5]], [-0.5], desc, good_global)
    with pytest.raises(ConfigurationError):
        FeatureSet((32, 32), [[5, 5]], [1.0], desc * 2.0, good_global)
    with pytest.raises(ConfigurationError):
        FeatureSet((32, 32), [[5, 5]], [1.0], desc, np.ones(8) * 0.7)
    fs = FeatureSet((32, 32), [[5, 5]], [1.0], desc, np.zeros(8))
    assert len(fs) == 1
    with pytest.raises(ValueError):
        fs.positions[0, 0] = 3.0


def test_global_descriptor_mean_pool():
    rng = np.random.default_rng(5)
    desc = unit_rows(rng, 6, 32)
    pooled = global_descriptor_from_locals(desc, global_dim=16)
    mean = desc.astype(np.float64).mean(axis=0)[:16]
    assert np.allclose(pooled, mean / np.linalg.norm(mean), atol=1e-7)
    assert np.linalg.norm(pooled.astype(np.float64)) == pytest.approx(1.0, abs=1e-6)

    padded = global_descriptor_from_locals(desc, global_dim=64)
    assert padded.shape == (64,)
    assert np.all(padded[32:] == 0)

    with pytest.raises(EmptyFrameError):
        global_descriptor_from_locals(np.zeros((0, 8)))
    opposed = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(DegenerateDescriptorError):
        global_descriptor_from_locals(opposed, global_dim=2)


def test_unit_normalize():
    v = unit_normalize([3.0, 4.0])
    assert np.allclose(v, [0.6, 0.8])
    assert v.dtype == np.float32
    with pytest.raises(DegenerateDescriptorError):
        unit_normalize([0.0, 0.0])


def test_cosine_similarity_of_unit_vectors():
    assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)
    assert cosine_similarity([1, 0], [-1, 0]) == pytest.approx(-1.0)


def test_feature_file_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    fs = random_feature_set(rng, (336, 336), 57, local_dim=48)
    path = tmp_path / "frame.trfv"
    write_feature_file(path, fs)
    back = read_feature_file(path)
    assert back.image_size == fs.image_size
    assert np.array_equal(back.positions, fs.positions)
    assert np.array_equal(back.scores, fs.scores)
    assert np.array_equal(back.descriptors, fs.descriptors)
    assert np.array_equal(back.global_descriptor, fs.global_descriptor)
    # writing the reread set reproduces the file byte for byte
    path2 = tmp_path / "frame2.trfv"
    write_feature_file(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_feature_file_empty_round_trip(tmp_path):
    fs = FeatureSet.empty((64, 48), local_dim=8, global_dim=4)
    path = tmp_path / "empty.trfv"
    write_feature_file(path, fs)
    back = read_feature_file(path)
    assert len(back) == 0
    assert back.local_dim == 8
    assert len(back.global_descriptor) == 4


def test_feature_file_errors_carry_offsets(tmp_path):
    rng = np.random.default_rng(7)
    fs = random_feature_set(rng, (64, 48), 3, local_dim=8)
    path = tmp_path / "frame.trfv"
    write_feature_file(path, fs)
    data = path.read_bytes()

    short = tmp_path / "short.trfv"
    short.write_bytes(data[:10])
    with pytest.raises(FeatureFileError) as err:
        read_feature_file(short)
    assert err.value.offset == 10

    bad_magic = tmp_path / "magic.trfv"
    bad_magic.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FeatureFileError) as err:
        read_feature_file(bad_magic)
    assert err.value.offset == 0

    bad_version = tmp_path / "version.trfv"
    bad_version.write_bytes(data[:4] + b"\x63\x00" + data[6:])
    with pytest.raises(FeatureFileError) as err:
        read_feature_file(bad_version)
    assert err.value.offset == 4

    truncated = tmp_path / "trunc.trfv"
    truncated.write_bytes(data[:-5])
    with pytest.raises(FeatureFileError):
        read_feature_file(truncated)

    padded = tmp_path / "padded.trfv"
    padded.write_bytes(data + b"\x00\x00")
    with pytest.raises(FeatureFileError):
        read_feature_file(padded)
