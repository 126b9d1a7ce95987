"""
Pair partitions, words and their linear-form systems.

An index tuple a = (t_1, ..., t_h, t_1 + |pi_0 - pi_1|, ..., t_h + |pi_{h-1} - pi_h|)
of the trace expansion of Tr(Gamma_n^h) contributes in the limit only when it is
minimal d-matched: its 2h positions split into h pairs {i_k < j_k} with
a_{i_k} - a_{j_k} = l_k and |l_k| <= d. The pairing together with the offsets l_k
is a *word*.

For a fixed partition and a sign vector b (b_j = sign of pi_{j-1} - pi_j), every
element of E = (t_1..t_h, pi_0..pi_h) is an integer linear form in the h + 1
generating vertices (the first occurrence of each pair, plus pi_0) plus an integer
constant. Offsets only enter the constants, so forms are computed once per
(partition, b) with the constants kept as coefficient vectors over the offsets.

Element order used throughout: index p - 1 is t_p, index h + j is pi_j.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from acvspectra.errors import GuardError

H_MAX = 5

Sign = Tuple[int, ...]


@dataclass(frozen=True)
class PairPartition:
    """Pairs (i_k, j_k), 1-based, i_k < j_k, i_k ascending, covering {1..2h}."""

    pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        h = len(pairs)
        if h < 1:
            raise GuardError("a pair partition needs at least one pair")
        if any(i >= j for i, j in pairs):
            raise GuardError(f"pairs must satisfy i < j: {pairs}")
        if [i for i, _ in pairs] != sorted(i for i, _ in pairs):
            raise GuardError(f"pairs must be ordered by first element: {pairs}")
        if sorted(itertools.chain.from_iterable(pairs)) != list(range(1, 2 * h + 1)):
            raise GuardError(f"pairs must cover 1..{2 * h} exactly once: {pairs}")

    @property
    def h(self) -> int:
        return len(self.pairs)

    def label(self) -> str:
        return " ".join(f"{{{i},{j}}}" for i, j in self.pairs)


@dataclass(frozen=True)
class Word:
    """
    A partition plus one offset per pair.

    ``offsets[k]`` is l with a_{i_k} - a_{j_k} = l, so letter w[i_k] = w_0^k and
    w[j_k] = w_l^k.
    """

    partition: PairPartition
    offsets: Tuple[int, ...]

    def __post_init__(self) -> None:
        offsets = tuple(int(v) for v in self.offsets)
        object.__setattr__(self, "offsets", offsets)
        if len(offsets) != self.partition.h:
            raise GuardError(f"{self.partition.h} pairs but {len(offsets)} offsets")

    @property
    def h(self) -> int:
        return self.partition.h

    def magnitude_counts(self, d: int) -> Tuple[int, ...]:
        """k_i = number of pairs with |offset| = i, for i = 0..d."""
        counts = [0] * (d + 1)
        for value in self.offsets:
            if abs(value) > d:
                raise GuardError(f"offset {value} exceeds d={d}")
            counts[abs(value)] += 1
        return tuple(counts)


def word_label(w: Word) -> str:
    """Letters in position order, e.g. ``w_0^1 w_0^2 w_0^1 w_1^2``."""
    letters: List[str] = [""] * (2 * w.h)
    for k, ((i, j), offset) in enumerate(zip(w.partition.pairs, w.offsets), start=1):
        letters[i - 1] = f"w_0^{k}"
        letters[j - 1] = f"w_{offset}^{k}"
    return " ".join(letters)


# --- Enumeration ---

def _pairings(remaining: Tuple[int, ...]) -> Iterator[Tuple[Tuple[int, int], ...]]:
    if not remaining:
        yield ()
        return
    first, rest = remaining[0], remaining[1:]
    for idx, partner in enumerate(rest):
        for tail in _pairings(rest[:idx] + rest[idx + 1:]):
            yield ((first, partner),) + tail


def enumerate_pair_partitions(h: int, h_max: int = H_MAX) -> List[PairPartition]:
    """
    All (2h)! / (2^h h!) pair partitions of {1..2h}, in canonical order.

    Raises:
        GuardError: Unless 1 <= h <= h_max.
    """
    if not 1 <= h <= h_max:
        raise GuardError(f"h must satisfy 1 <= h <= {h_max}, got {h}")
    return [PairPartition(pairs) for pairs in _pairings(tuple(range(1, 2 * h + 1)))]


def partition_count(h: int) -> int:
    return math.factorial(2 * h) // (2**h * math.factorial(h))


def offset_grid(h: int, d: int) -> np.ndarray:
    """All (2d+1)^h offset vectors as rows, in lexicographic order."""
    if d < 0:
        raise GuardError(f"d must be >= 0, got {d}")
    return np.array(list(itertools.product(range(-d, d + 1), repeat=h)), dtype=int).reshape(-1, h)


def enumerate_words(P: PairPartition, d: int) -> List[Word]:
    """The (2d+1)^h words of a partition."""
    return [Word(P, tuple(row)) for row in offset_grid(P.h, d)]


# --- Index tuples ---

def is_matched(a: Sequence[int], d: int) -> bool:
    """Every coordinate has another within distance d."""
    a = list(a)
    return all(any(abs(a[x] - a[y]) <= d for y in range(len(a)) if y != x) for x in range(len(a)))


def word_from_indices(a: Sequence[int], d: int) -> Word:
    """
    The word of a minimal d-matched index tuple.

    Raises:
        GuardError: If ``a`` has odd length or is not minimal d-matched.
    """
    a = [int(v) for v in a]
    if not a or len(a) % 2:
        raise GuardError(f"index tuple must have even positive length, got {len(a)}")
    close = [[y for y in range(len(a)) if y != x and abs(a[x] - a[y]) <= d] for x in range(len(a))]
    if any(len(c) != 1 for c in close):
        raise GuardError(f"{tuple(a)} is not minimal {d}-matched")
    pairs, offsets = [], []
    for x, (y,) in enumerate(close):
        if x < y:
            pairs.append((x + 1, y + 1))
            offsets.append(a[x] - a[y])
    return Word(PairPartition(tuple(pairs)), tuple(offsets))


def is_minimal_matched(a: Sequence[int], d: int) -> bool:
    try:
        word_from_indices(a, d)
    except GuardError:
        return False
    return True


# --- Linear forms ---

@dataclass(frozen=True)
class SignForms:
    """
    Forms of E for one (partition, b).

    Attributes:
        sign: b in {-1, 1}^h.
        coef: (2h+1, h+1) integer coefficients over the generating vertices.
        offcoef: (2h+1, h) constants as coefficients over the word offsets.
        closes: The form of pi_h is identical to that of pi_0.
    """

    sign: Sign
    coef: np.ndarray
    offcoef: np.ndarray
    closes: bool

    def steps(self) -> np.ndarray:
        """Coefficients of L~_j = b_j (pi_{j-1} - pi_j), shape (h, h+1)."""
        h = len(self.sign)
        b = np.array(self.sign)[:, None]
        return b * (self.coef[h:2 * h] - self.coef[h + 1:])

    def closing_offcoef(self) -> np.ndarray:
        h = len(self.sign)
        return self.offcoef[2 * h] - self.offcoef[h]


@dataclass(frozen=True)
class PartitionSystem:
    """
    Everything about a partition that does not depend on the offsets.

    Attributes:
        generating: Labels of the h+1 generating vertices in element order.
        generating_elements: Their indices into E.
        forms: One SignForms per b, in ``itertools.product((-1, 1), ...)`` order
            reversed so that the all-ones sign comes first.
        tau: j values (1..h) whose step form vanishes for every b; the position
            j + h is then tied to t_j itself.
        tau_offcoef: (len(tau), h); n_j = tau_offcoef @ offsets.
    """

    partition: PairPartition
    generating: Tuple[str, ...]
    generating_elements: Tuple[int, ...]
    forms: Tuple[SignForms, ...]
    tau: Tuple[int, ...]
    tau_offcoef: np.ndarray

    def admissible(self, offsets: np.ndarray) -> np.ndarray:
        """
        Boolean (rows, 2^h): sign b contributes to the word with these offsets.

        Requires b in B(w), n_j <= 0 on tau and the closing identity
        pi_h = pi_0 in both form and constant.
        """
        offsets = np.atleast_2d(np.asarray(offsets, dtype=int))
        n_tau = offsets @ self.tau_offcoef.T
        tau_ok = np.all(n_tau <= 0, axis=1)
        out = np.zeros((offsets.shape[0], len(self.forms)), dtype=bool)
        tau_idx = np.array(self.tau, dtype=int) - 1
        for s, forms in enumerate(self.forms):
            if not forms.closes:
                continue
            in_b = np.all((n_tau != 0) | (np.array(forms.sign)[tau_idx] == 1), axis=1)
            closing = offsets @ forms.closing_offcoef() == 0
            out[:, s] = tau_ok & in_b & closing
        return out


def _signs(h: int) -> List[Sign]:
    return [tuple(-v for v in s) for s in itertools.product((-1, 1), repeat=h)]


def _sign_forms(partition: PairPartition, sign: Sign) -> Tuple[SignForms, List[str], List[int]]:
    h = partition.h
    partner: Dict[int, int] = {}
    pair_index: Dict[int, int] = {}
    for k, (i, j) in enumerate(partition.pairs):
        partner[i], partner[j] = j, i
        pair_index[i] = pair_index[j] = k
    opens = {i for i, _ in partition.pairs}

    coef = np.zeros((2 * h + 1, h + 1), dtype=int)
    offcoef = np.zeros((2 * h + 1, h), dtype=int)
    labels: List[str] = []
    elements: List[int] = []

    def generate(element: int, label: str) -> None:
        coef[element, len(labels)] = 1
        labels.append(label)
        elements.append(element)

    def position(pos: int) -> Tuple[np.ndarray, np.ndarray]:
        if pos <= h:
            return coef[pos - 1], offcoef[pos - 1]
        j = pos - h
        b = sign[j - 1]
        return (
            coef[j - 1] + b * (coef[h + j - 1] - coef[h + j]),
            offcoef[j - 1] + b * (offcoef[h + j - 1] - offcoef[h + j]),
        )

    for p in range(1, h + 1):
        if p in opens:
            generate(p - 1, f"t{p}")
            continue
        # a_i - a_p = l_k with i < p <= h
        i, k = partner[p], pair_index[p]
        coef[p - 1] = coef[i - 1]
        offcoef[p - 1] = offcoef[i - 1]
        offcoef[p - 1, k] -= 1

    generate(h, "pi0")
    for j in range(1, h + 1):
        element, pos = h + j, h + j
        if pos in opens:
            generate(element, f"pi{j}")
            continue
        # t_j + b_j (pi_{j-1} - pi_j) = a_i - l_k
        i, k = partner[pos], pair_index[pos]
        form_i, off_i = position(i)
        target_off = off_i.copy()
        target_off[k] -= 1
        b = sign[j - 1]
        coef[element] = coef[element - 1] + b * (coef[j - 1] - form_i)
        offcoef[element] = offcoef[element - 1] + b * (offcoef[j - 1] - target_off)

    if len(labels) != h + 1:
        raise AssertionError(f"expected {h + 1} generating vertices, got {labels}")
    coef.setflags(write=False)
    offcoef.setflags(write=False)
    closes = bool(np.array_equal(coef[2 * h], coef[h]))
    return SignForms(sign, coef, offcoef, closes), labels, elements


@lru_cache(maxsize=None)
def partition_system(partition: PairPartition) -> PartitionSystem:
    """Forms for every b, the tau set and its offsets; cached per partition."""
    h = partition.h
    built = [_sign_forms(partition, sign) for sign in _signs(h)]
    forms = tuple(f for f, _, _ in built)
    labels, elements = built[0][1], built[0][2]

    opens = {i for i, _ in partition.pairs}
    tau = tuple(
        j for j in range(1, h + 1)
        if h + j not in opens and all(not np.any(f.steps()[j - 1]) for f in forms)
    )
    rows = []
    for j in tau:
        # L_j = L~_j + const = -n_j, with L~_j identically zero
        candidates = {
            tuple(-f.sign[j - 1] * (f.offcoef[h + j - 1] - f.offcoef[h + j])) for f in forms
        }
        if len(candidates) != 1:
            raise AssertionError(f"tau offset for j={j} depends on the signs in {partition.label()}")
        rows.append(candidates.pop())
    tau_offcoef = np.array(rows, dtype=int).reshape(len(tau), h)
    tau_offcoef.setflags(write=False)
    return PartitionSystem(partition, tuple(labels), tuple(elements), forms, tau, tau_offcoef)


@dataclass(frozen=True)
class WordSystem:
    """
    A word with its generating vertices, per-sign forms and admissible signs.

    Attributes:
        word: The word.
        system: The offset-free structure of its partition.
    """

    word: Word
    system: PartitionSystem

    @property
    def generating(self) -> Tuple[str, ...]:
        return self.system.generating

    @property
    def T_set(self) -> Tuple[int, ...]:
        """Positions j + h whose pi-step is forced by t_j itself."""
        h = self.word.h
        return tuple(h + j for j in self.system.tau)

    @property
    def tau_offsets(self) -> Dict[int, int]:
        """n_j for each position j + h in T_set."""
        values = self.system.tau_offcoef @ np.array(self.word.offsets, dtype=int)
        return {pos: int(v) for pos, v in zip(self.T_set, values)}

    def lambdas(self, sign: Sign) -> np.ndarray:
        return self._forms(sign).coef

    def shifts(self, sign: Sign) -> np.ndarray:
        """Constants m_j of every element of E under ``sign``."""
        return self._forms(sign).offcoef @ np.array(self.word.offsets, dtype=int)

    def _forms(self, sign: Sign) -> SignForms:
        for forms in self.system.forms:
            if forms.sign == tuple(sign):
                return forms
        raise GuardError(f"no sign vector {sign} for h={self.word.h}")

    @property
    def B_set(self) -> Tuple[Sign, ...]:
        """b with b_j = 1 whenever position j + h is in T_set and n_j = 0."""
        zero = [pos - self.word.h for pos, n in self.tau_offsets.items() if n == 0]
        return tuple(f.sign for f in self.system.forms if all(f.sign[j - 1] == 1 for j in zero))

    def closes(self, sign: Sign) -> bool:
        """Closing identity pi_h = pi_0 in form and constant."""
        forms = self._forms(sign)
        offsets = np.array(self.word.offsets, dtype=int)
        return forms.closes and int(forms.closing_offcoef() @ offsets) == 0

    def admissible_signs(self) -> Tuple[Sign, ...]:
        mask = self.system.admissible(np.array(self.word.offsets, dtype=int))[0]
        return tuple(f.sign for f, ok in zip(self.system.forms, mask) if ok)


def build_word_system(w: Word) -> WordSystem:
    return WordSystem(word=w, system=partition_system(w.partition))
