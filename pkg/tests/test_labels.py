import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctlsed.labels import (
    BLANK,
    BoundaryLabel,
    EventVocabulary,
    collapse_ctc,
    flatten_ctl,
    is_well_nested,
    offset,
    onset,
    parse_sequence,
    render_sequence,
    strong_to_presence,
    strong_to_sequential,
)

CD = EventVocabulary(("C", "D"))


def seq(text, vocab=CD):
    return parse_sequence(text, vocab)


def test_vocabulary_sizes_and_json():
    v = EventVocabulary(("car", "dog", "speech"))
    assert v.num_boundaries == 6
    assert v.num_ctc_symbols == 7
    assert EventVocabulary.from_json(v.to_json()) == v


@pytest.mark.parametrize("classes", [("a", "a"), ("a", "")])
def test_vocabulary_rejects_bad_classes(classes):
    with pytest.raises(ValueError):
        EventVocabulary(classes)


def test_boundary_label_ids_round_trip():
    for i in range(10):
        assert BoundaryLabel.from_id(i).id == i
    assert onset(3).id == 6 and offset(3).id == 7


def test_car_dog_example():
    mask = np.zeros((4, 2), dtype=np.uint8)
    mask[0:4, 0] = 1  # car, frames 1-4
    mask[1:3, 1] = 1  # dog, frames 2-3
    assert strong_to_sequential(mask) == seq("'C 'D `D `C")
    assert render_sequence(strong_to_sequential(mask), CD) == "'C 'D `D `C"
    assert strong_to_presence(mask).tolist() == [1, 1]


def test_empty_mask():
    mask = np.zeros((5, 2), dtype=np.uint8)
    assert strong_to_sequential(mask) == ()
    assert strong_to_presence(mask).tolist() == [0, 0]


def test_single_run():
    mask = np.array([[0], [1], [0]], dtype=np.uint8)
    assert strong_to_sequential(mask) == (onset(0), offset(0))


def test_presence_single_class():
    mask = np.zeros((3, 2), dtype=np.uint8)
    mask[2, 0] = 1
    assert strong_to_presence(mask).tolist() == [1, 0]


def test_tie_breaking_offsets_first_then_class():
    # C ends at frame 2 (offset on frame 3) exactly when D starts at frame 3
    mask = np.array([[1, 0], [1, 0], [0, 1], [1, 1]], dtype=np.uint8)
    assert strong_to_sequential(mask) == seq("'C `C 'D 'C `C `D")
    # two onsets on the same frame go by class index
    both = np.array([[0, 0], [1, 1]], dtype=np.uint8)
    assert strong_to_sequential(both) == seq("'C 'D `C `D")


def test_strong_label_validation():
    with pytest.raises(ValueError):
        strong_to_sequential(np.array([[2]]))
    with pytest.raises(ValueError):
        strong_to_sequential(np.zeros(3))


def test_collapse_ctc_documented_alignments():
    C, D = 0, 1
    a1 = [BLANK, onset(C), onset(D), offset(D), offset(C), BLANK]
    a2 = [onset(C), BLANK, onset(D), offset(D), offset(C), offset(C)]
    target = seq("'C 'D `D `C")
    assert collapse_ctc(a1) == target
    assert collapse_ctc(a2) == target
    assert collapse_ctc([BLANK] * 3) == ()


def test_collapse_ctc_blank_separates_repeats():
    E = onset(0)
    assert collapse_ctc([E, BLANK, E]) == (E, E)
    assert collapse_ctc([E, E]) == (E,)
    assert collapse_ctc([1, 0, 1, 1, 2], blank=0) == (1, 1, 2)


def test_flatten_ctl():
    E, e = onset(0), offset(0)
    assert flatten_ctl([[E], [], [e]]) == (E, e)
    assert flatten_ctl([[E], [E, e], [e]]) == (E, E, e, e)
    assert flatten_ctl([[], [], []]) == ()


def test_is_well_nested():
    assert is_well_nested(seq("'C 'D `D `C"))
    assert is_well_nested(())
    assert not is_well_nested(seq("`C 'C"))
    assert not is_well_nested(seq("'C 'C `C `C"))
    assert not is_well_nested(seq("'C"))


masks = arrays(np.uint8, st.tuples(st.integers(0, 30), st.integers(1, 4)), elements=st.integers(0, 1))


@settings(max_examples=200, deadline=None)
@given(masks)
def test_sequential_is_well_nested(mask):
    out = strong_to_sequential(mask)
    assert is_well_nested(out)
    runs = sum(int(np.sum(np.diff(np.concatenate(([0], mask[:, c], [0])).astype(int)) == 1)) for c in range(mask.shape[1]))
    assert len(out) == 2 * runs
    assert strong_to_presence(mask).tolist() == mask.any(axis=0).astype(int).tolist()


symbols = st.one_of(st.none(), st.builds(BoundaryLabel, st.integers(0, 2), st.integers(0, 1)))


@settings(max_examples=200, deadline=None)
@given(st.lists(symbols, max_size=20))
def test_collapse_idempotent(alignment):
    once = collapse_ctc(alignment)
    assert BLANK not in once
    # blank-free, repeat-free input is a fixed point
    plain = [s for s in alignment if s is not BLANK]
    plain = [s for i, s in enumerate(plain) if i == 0 or s != plain[i - 1]]
    assert collapse_ctc(plain) == tuple(plain)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.builds(BoundaryLabel, st.integers(0, 2), st.integers(0, 1)), max_size=3), max_size=8))
def test_flatten_length(emissions):
    assert len(flatten_ctl(emissions)) == sum(len(f) for f in emissions)
