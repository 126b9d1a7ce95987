import itertools

import numpy as np
import pytest

from acvspectra.errors import GuardError
from acvspectra.moments.words import (
    PairPartition,
    Word,
    build_word_system,
    enumerate_pair_partitions,
    enumerate_words,
    is_matched,
    is_minimal_matched,
    offset_grid,
    partition_count,
    partition_system,
    word_from_indices,
    word_label,
)


@pytest.mark.parametrize("h,count", [(1, 1), (2, 3), (3, 15), (4, 105), (5, 945)])
def test_partition_counts(h, count):
    partitions = enumerate_pair_partitions(h)
    assert len(partitions) == count == partition_count(h)
    assert len(set(partitions)) == count


def test_first_partition_is_adjacent_pairs():
    assert enumerate_pair_partitions(1)[0].pairs == ((1, 2),)
    assert enumerate_pair_partitions(2)[0].pairs == ((1, 2), (3, 4))


@pytest.mark.parametrize("h", [0, 6])
def test_partition_guard(h):
    with pytest.raises(GuardError):
        enumerate_pair_partitions(h)


@pytest.mark.parametrize(
    "pairs",
    [(), ((2, 1),), ((3, 4), (1, 2)), ((1, 2), (2, 3)), ((1, 3),)],
)
def test_pair_partition_rejects(pairs):
    with pytest.raises(GuardError):
        PairPartition(pairs)


@pytest.mark.parametrize("h,d,count", [(1, 0, 1), (2, 0, 1), (2, 1, 9), (3, 1, 27), (2, 2, 25)])
def test_words_per_partition(h, d, count):
    partition = enumerate_pair_partitions(h)[-1]
    words = enumerate_words(partition, d)
    assert len(words) == count
    assert len({w.offsets for w in words}) == count
    if d == 0:
        assert words[0].offsets == (0,) * h


@pytest.mark.parametrize("h,d", [(2, 1), (3, 2)])
def test_word_census(h, d):
    total = sum(len(enumerate_words(P, d)) for P in enumerate_pair_partitions(h))
    assert total == partition_count(h) * (2 * d + 1) ** h


def test_offset_grid_is_lexicographic():
    grid = offset_grid(2, 1)
    assert grid.shape == (9, 2)
    assert [tuple(row) for row in grid] == list(itertools.product((-1, 0, 1), repeat=2))
    with pytest.raises(GuardError):
        offset_grid(2, -1)


def test_magnitude_counts():
    w = Word(enumerate_pair_partitions(3)[0], (0, -1, 1))
    assert w.magnitude_counts(1) == (1, 2)
    assert w.magnitude_counts(2) == (1, 2, 0)
    with pytest.raises(GuardError):
        w.magnitude_counts(0)


def test_word_offset_count_must_match():
    with pytest.raises(GuardError):
        Word(enumerate_pair_partitions(2)[0], (0,))


def test_worked_example_word():
    w = word_from_indices((1, 21, 1, 20, 39, 40), 1)
    assert w.partition.pairs == ((1, 3), (2, 4), (5, 6))
    assert w.offsets == (0, 1, -1)
    assert word_label(w) == "w_0^1 w_0^2 w_0^1 w_1^2 w_0^3 w_-1^3"


@pytest.mark.parametrize(
    "a,d",
    [((1, 2, 3, 4), 1), ((1, 1, 1, 1), 0), ((1, 5), 1), ((1, 2, 3), 1)],
)
def test_word_from_indices_rejects(a, d):
    with pytest.raises(GuardError):
        word_from_indices(a, d)


def test_matching_predicates():
    assert is_matched((1, 2, 3, 4), 1)
    assert not is_minimal_matched((1, 2, 3, 4), 1)
    assert is_minimal_matched((1, 21, 1, 20, 39, 40), 1)
    assert not is_matched((1, 5), 1)
    assert is_matched((1, 1), 0)


class TestSingleLetterWord:
    @pytest.fixture
    def system(self):
        return build_word_system(Word(enumerate_pair_partitions(1)[0], (0,)))

    def test_generating_vertices(self, system):
        assert system.generating == ("t1", "pi0")

    def test_tau_set(self, system):
        assert system.T_set == (2,)
        assert system.tau_offsets == {2: 0}

    def test_signs(self, system):
        assert system.B_set == ((1,),)
        assert system.closes((1,))
        assert system.admissible_signs() == ((1,),)

    def test_pi_one_equals_pi_zero(self, system):
        lambdas = system.lambdas((1,))
        np.testing.assert_array_equal(lambdas[2], lambdas[1])
        np.testing.assert_array_equal(system.shifts((1,)), [0, 0, 0])

    def test_unknown_sign(self, system):
        with pytest.raises(GuardError):
            system.lambdas((1, 1))


def test_positive_tau_offset_has_no_admissible_sign():
    system = build_word_system(Word(enumerate_pair_partitions(1)[0], (1,)))
    assert system.tau_offsets == {2: 1}
    assert system.admissible_signs() == ()


@pytest.mark.parametrize("h", [2, 3])
def test_forms_only_use_earlier_generating_vertices(h):
    for partition in enumerate_pair_partitions(h):
        system = partition_system(partition)
        assert len(system.generating) == h + 1
        elements = np.array(system.generating_elements)
        for forms in system.forms:
            for element, row in enumerate(forms.coef):
                assert np.all(elements[row != 0] <= element)


@pytest.mark.parametrize("h", [2, 3])
def test_generating_vertices_are_first_occurrences(h):
    for partition in enumerate_pair_partitions(h):
        system = partition_system(partition)
        opens = {i for i, _ in partition.pairs}
        expected = [f"t{p}" for p in range(1, h + 1) if p in opens]
        expected.append("pi0")
        expected += [f"pi{j}" for j in range(1, h + 1) if h + j in opens]
        assert list(system.generating) == expected


def test_all_ones_sign_comes_first():
    system = partition_system(enumerate_pair_partitions(3)[4])
    assert system.forms[0].sign == (1, 1, 1)
    assert len(system.forms) == 8


def test_admissible_mask_matches_word_systems():
    partition = enumerate_pair_partitions(2)[1]
    system = partition_system(partition)
    grid = offset_grid(2, 1)
    mask = system.admissible(grid)
    for row, offsets in zip(mask, grid):
        signs = build_word_system(Word(partition, tuple(offsets))).admissible_signs()
        assert tuple(f.sign for f, ok in zip(system.forms, row) if ok) == signs
