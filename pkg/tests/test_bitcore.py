import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokenweave import bitcore
from tokenweave.bitcore import (Fill, KeySet, PartitionLayout, PatternClass, SystemParams,
                                Variant)
from tokenweave.errors import ConstructionError, ExtractionAmbiguous, UsageError


def bits(s):
    return bitcore.as_bits(s)


@st.composite
def systems(draw, max_v=6, min_v=1):
    v = draw(st.integers(min_v, max_v))
    lp = draw(st.integers(8, 24))
    seed = draw(st.integers(0, 2**32))
    params = SystemParams(v, lp, bitcore.min_rows_for(v), seed, Variant.LEGACY)
    keys = bitcore.generate_keys(params)
    layout = PartitionLayout.random(params.W, lp, params.rng(bitcore.STREAM_LAYOUT))
    return params, keys, layout


# -- params and keys ----------------------------------------------------------

def test_params_reject_short_keys():
    with pytest.raises(UsageError):
        SystemParams(4, 7, 3)


def test_distance_variant_needs_multiple_of_four():
    with pytest.raises(UsageError):
        SystemParams(6, 16, 3, variant=Variant.DISTANCE)
    assert SystemParams(8, 16, 3, variant=Variant.DISTANCE).W == 8


def test_grid_variant_needs_room_for_numbers():
    with pytest.raises(UsageError):
        SystemParams(5, 16, 3, variant=Variant.GRID)
    p = SystemParams(4, 16, 3, variant=Variant.GRID)
    assert (p.W, p.row_bits, p.key_bits) == (8, 128, 32)


@pytest.mark.parametrize("v,m", [(1, 1), (2, 2), (4, 3), (5, 4), (7, 4), (8, 4), (9, 5)])
def test_min_rows(v, m):
    assert bitcore.min_rows_for(v) == m


@given(st.integers(1, 8), st.integers(0, 2**40))
def test_generated_grid_halves_are_distinct_and_non_complementary(v, seed):
    p = SystemParams(v, 8, bitcore.min_rows_for(v), seed, Variant.GRID)
    keys = bitcore.generate_keys(p)
    segs = [s.tobytes() for s in keys.segments()]
    comps = [(1 - s).astype(np.uint8).tobytes() for s in keys.segments()]
    assert len(set(segs)) == 2 * v
    assert not set(segs) & set(comps)
    for k, d in zip(keys.keys, keys.digests):
        assert bitcore.digest(k) == d


def test_identify_accepts_complement_only_of_real_keys():
    keys = KeySet.from_keys(["10110010", "01100111"])
    assert keys.identify(bits("10110010")) == 0
    assert keys.identify(bits("10011000")) == 1
    assert keys.identify(bits("11111111")) is None


@given(st.lists(st.integers(0, 1), min_size=1, max_size=70))
def test_hex_round_trip(values):
    b = np.array(values, dtype=np.uint8)
    assert np.array_equal(bitcore.hex_to_bits(bitcore.bits_to_hex(b), len(b)), b)


def test_hex_rejects_dirty_padding():
    with pytest.raises(ValueError):
        bitcore.hex_to_bits("ff", 4)


# -- interleaving ---------------------------------------------------------------

def test_single_key_identity_layout():
    keys = KeySet.from_keys(["1011"] * 1)
    # Lp is a SystemParams constraint; the block machinery itself accepts any width
    layout = PartitionLayout.identity(1, 4)
    X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(1))
    assert bitcore.bits_to_str(X) == "1011"
    assert bitcore.bits_to_str(Y) == "0100"


def test_three_key_layout_matches_bookkeeping_table():
    keys = KeySet.from_keys(["1100", "1010", "0111"])
    groups = [[0, 5, 6, 11], [1, 2, 8, 9], [3, 4, 7, 10]]
    layout = PartitionLayout.from_groups(groups)
    X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(3))
    expected = [None] * 12
    for key, group in zip(["1100", "1010", "0111"], groups):
        for pos, bit in zip(group, key):
            expected[pos] = bit
    assert bitcore.bits_to_str(X) == "".join(expected)
    assert np.array_equal(Y, 1 - X)


@given(systems())
def test_partition_read_back_round_trip(system):
    params, keys, layout = system
    X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(params.v))
    for j in range(params.v):
        assert np.array_equal(X[layout.positions(j)], keys.keys[j])
        assert np.array_equal(Y[layout.positions(j)], 1 - keys.keys[j])


def test_missing_placement_entry():
    keys = KeySet.from_keys(["10101010", "11001100"])
    layout = PartitionLayout.identity(2, 8)
    with pytest.raises(ConstructionError):
        bitcore.interleave_keys(keys, layout, {0: Fill(0)})


def test_layout_groups_are_sorted_and_cover_everything():
    layout = PartitionLayout.random(5, 9, np.random.default_rng(3))
    allpos = np.sort(np.concatenate(layout.groups))
    assert np.array_equal(allpos, np.arange(45))
    assert all(np.all(np.diff(g) > 0) for g in layout.groups)


def test_layout_rejects_overlap():
    with pytest.raises(ConstructionError):
        PartitionLayout.from_groups([[0, 1], [1, 2]])


# -- rows -----------------------------------------------------------------------

def _three_key_blocks():
    keys = KeySet.from_keys(["11001010", "10100110", "01110001"])
    layout = PartitionLayout.random(3, 8, np.random.default_rng(11))
    X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(3))
    return keys, layout, X, Y


def test_all_ones_and_all_zeros_rows():
    _, layout, X, Y = _three_key_blocks()
    assert np.array_equal(bitcore.build_row([1, 1, 1], X, Y, layout), X)
    assert np.array_equal(bitcore.build_row([0, 0, 0], X, Y, layout), Y)


def test_mixed_row_per_partition():
    _, layout, X, Y = _three_key_blocks()
    row = bitcore.build_row([1, 0, 1], X, Y, layout)
    for pos in range(layout.size):
        source = X if layout.owner[pos] in (0, 2) else Y
        assert row[pos] == source[pos]


def test_row_code_length_checked():
    _, layout, X, Y = _three_key_blocks()
    with pytest.raises(ConstructionError):
        bitcore.build_row([1, 0], X, Y, layout)


def test_rows_are_deterministic_per_seed():
    p = SystemParams(5, 16, 4, seed=99, variant=Variant.LEGACY)

    def make():
        keys = bitcore.generate_keys(p)
        layout = PartitionLayout.random(p.W, p.Lp, p.rng(bitcore.STREAM_LAYOUT))
        X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(5))
        return X, Y, bitcore.build_row([1, 0, 0, 1, 1], X, Y, layout)

    for a, b in zip(make(), make()):
        assert np.array_equal(a, b)


# -- pattern search -------------------------------------------------------------

def test_pattern_class_canonical_top_bit():
    assert PatternClass.of([0, 1, 0]) == PatternClass.of([1, 0, 1])
    assert PatternClass.of([0, 1, 0]).representative == (1, 0, 1)


def test_every_column_matches():
    stack = np.array([[1, 0, 1, 0], [1, 0, 1, 0]], dtype=np.uint8)
    assert list(bitcore.find_pattern_positions(stack, PatternClass.of([1, 1]))) == [0, 1, 2, 3]


def test_worked_token_over_first_share_isolates_column_four():
    stack = np.array([[1, 1, 0, 1, 0, 1],
                      [1, 1, 0, 0, 0, 1],
                      [0, 1, 1, 1, 0, 0]], dtype=np.uint8)
    assert list(bitcore.find_pattern_positions(stack, PatternClass.of([1, 0, 1]))) == [3]


def test_absent_class_matches_exhaustive_scan():
    rng = np.random.default_rng(5)
    stack = rng.integers(0, 2, size=(4, 200), dtype=np.uint8)
    present = {PatternClass.of(stack[:, j]) for j in range(200)}
    for rep in np.ndindex(2, 2, 2):
        cls = PatternClass.of((1,) + rep)
        found = bitcore.find_pattern_positions(stack, cls)
        scan = [j for j in range(200) if PatternClass.of(stack[:, j]) == cls]
        assert list(found) == scan
        assert (len(scan) > 0) == (cls in present)


def test_empty_stack_rejected():
    with pytest.raises(UsageError):
        bitcore.find_pattern_positions(np.zeros((0, 4), dtype=np.uint8), PatternClass((1,)))


@given(st.integers(0, 2**32), st.integers(1, 5))
def test_complement_closure(seed, height):
    rng = np.random.default_rng(seed)
    stack = rng.integers(0, 2, size=(height, 64), dtype=np.uint8)
    cls = PatternClass.of(rng.integers(0, 2, size=height))
    assert np.array_equal(bitcore.find_pattern_positions(stack, cls),
                          bitcore.find_pattern_positions(1 - stack, cls))


def test_ignore_mask_excludes_positions():
    stack = np.ones((2, 6), dtype=np.uint8)
    mask = np.array([True, False, False, True, False, False])
    assert list(bitcore.find_pattern_positions(stack, PatternClass((1, 1)), mask)) == [1, 2, 4, 5]


# -- extraction -----------------------------------------------------------------

def test_extract_direct_and_complemented():
    token = bits("0110100111")
    pos = np.array([1, 4, 6, 8])
    assert bitcore.bits_to_str(bitcore.extract_key_half(token, pos, 4)) == "1101"
    assert bitcore.bits_to_str(bitcore.extract_key_half(token, pos, 4, True)) == "0010"


def test_noise_positions_make_extraction_ambiguous():
    # a random-filled partition sharing the search class adds stray matches
    lp = 8
    rng = np.random.default_rng(2)
    partition = np.arange(lp)
    noise = np.array([9, 12, 14])
    with pytest.raises(ExtractionAmbiguous):
        bitcore.extract_key_half(rng.integers(0, 2, 24, dtype=np.uint8),
                                 np.concatenate([partition, noise]), lp)


# with one key the row is the key itself, so mixing needs two or more
@given(systems(max_v=5, min_v=2))
def test_single_row_never_yields_a_key(system):
    params, keys, layout = system
    X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(params.v))
    rng = np.random.default_rng(params.seed)
    row = bitcore.build_row(rng.integers(0, 2, params.v), X, Y, layout)
    for _, pos in bitcore.isolated_classes(row[None, :], params.Lp):
        assert keys.identify(row[pos]) is None
