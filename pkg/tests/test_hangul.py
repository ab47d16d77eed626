import numpy as np
import pytest

from ambispeech import hangul as hg


def test_first_syllable():
    assert hg.decompose("가") == (0, 0, None, "hangul")


def test_syllable_with_coda():
    # U+AC04: i=4 -> coda code 4 -> slot 3
    assert hg.decompose("간") == (0, 0, 3, "hangul")


def test_space_and_other_kinds():
    assert hg.decompose(" ")[3] == "space"
    assert hg.decompose("\t")[3] == "space"
    assert hg.decompose("a")[3] == "other"
    assert hg.decompose("?")[3] == "other"
    assert hg.decompose("ㄱ")[3] == "other"  # bare jamo is not a composed syllable


def test_decompose_rejects_strings():
    with pytest.raises(ValueError):
        hg.decompose("가나")
    with pytest.raises(ValueError):
        hg.decompose("")


def test_round_trip_all_syllables():
    for code in range(0xAC00, 0xD7A4):
        ch = chr(code)
        onset, nucleus, coda, kind = hg.decompose(ch)
        assert kind == "hangul"
        assert hg.compose(onset, nucleus, coda) == ch


def test_compose_range_checks():
    with pytest.raises(ValueError):
        hg.compose(19, 0)
    with pytest.raises(ValueError):
        hg.compose(0, 21)
    with pytest.raises(ValueError):
        hg.compose(0, 0, 27)
    assert hg.compose(0, 0, 26) == chr(0xAC00 + 27)


def test_char_row_open_syllable():
    row = hg.char_row("가")
    assert set(np.nonzero(row)[0]) == {0, 19}


def test_char_row_closed_syllable():
    row = hg.char_row("간")
    assert set(np.nonzero(row)[0]) == {0, 19, 43}


def test_char_row_space_and_other():
    assert np.nonzero(hg.char_row(" "))[0].tolist() == [67]
    assert np.nonzero(hg.char_row("!"))[0].tolist() == [68]


def test_char_row_slot_ranges_disjoint():
    rng = np.random.default_rng(11)
    for code in rng.integers(0xAC00, 0xD7A4, size=200):
        row = hg.char_row(chr(code))
        hot = np.nonzero(row)[0]
        assert len(hot) in (2, 3)
        assert 0 <= hot[0] <= 18
        assert 19 <= hot[1] <= 39
        if len(hot) == 3:
            assert 40 <= hot[2] <= 66
