"""Morpheme vocabularies, segmentation ingestion, and the word/morpheme index.

A segmentation file is UTF-8 TSV, one word per line:

    word<TAB>m1 m2 ... ml

Lines starting with ``#`` and blank lines are ignored.  Every word's morpheme
list is normalised to a fixed number of slots ``n``: short lists are padded
with a reserved sentinel, long lists keep their first ``n-1`` morphemes and
concatenate the tail into a single synthetic morpheme.  The per-word slot ids
form the index table used by the sharing-based embedding layers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateWordError, SegmentationParseError, WordLookupError

PAD_TOKEN = "<pad>"


@dataclass(frozen=True)
class Segmentation:
    word: str
    morphemes: tuple[str, ...]

    def __post_init__(self):
        if not self.word:
            raise ValueError("word must be non-empty")
        if len(self.morphemes) == 0:
            raise ValueError(f"word {self.word!r} has no morphemes")
        if any(not m for m in self.morphemes):
            raise ValueError(f"word {self.word!r} has an empty morpheme")


class MorphemeVocab:
    """Bijective morpheme <-> id table with a reserved trailing pad id.

    Ids are dense in ``[0, size)``; real morphemes come first in
    first-appearance order and the pad sentinel is always the last id.
    """

    def __init__(self, real_morphemes: Sequence[str]):
        tokens = list(real_morphemes)
        if PAD_TOKEN in tokens:
            raise ValueError(f"{PAD_TOKEN!r} is reserved and cannot be a real morpheme")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate morphemes in vocabulary input")
        tokens.append(PAD_TOKEN)
        self._tokens: tuple[str, ...] = tuple(tokens)
        self._id_of: dict[str, int] = {m: i for i, m in enumerate(self._tokens)}

    @property
    def size(self) -> int:
        return len(self._tokens)

    @property
    def pad_id(self) -> int:
        return len(self._tokens) - 1

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id_of(self, morpheme: str) -> int:
        try:
            return self._id_of[morpheme]
        except KeyError:
            raise WordLookupError(f"unknown morpheme {morpheme!r}") from None

    def morpheme_of(self, morpheme_id: int) -> str:
        if not 0 <= morpheme_id < len(self._tokens):
            raise WordLookupError(f"morpheme id {morpheme_id} out of range")
        return self._tokens[morpheme_id]

    def __len__(self) -> int:
        return self.size

    def __contains__(self, morpheme: str) -> bool:
        return morpheme in self._id_of


class IndexMatrix:
    """Per-word morpheme ids: one row of ``n`` ids per word, pad-filled."""

    def __init__(self, rows: np.ndarray, words: Sequence[str]):
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {rows.shape}")
        if rows.shape[0] != len(words):
            raise ValueError("one word per row required")
        rows.setflags(write=False)  # shared read-only across layers/threads
        self._rows = rows
        self._words = tuple(words)
        self._row_of_word = {w: i for i, w in enumerate(self._words)}
        if len(self._row_of_word) != len(self._words):
            raise DuplicateWordError("duplicate words in index")

    @property
    def order(self) -> int:
        return self._rows.shape[1]

    @property
    def vocab_size(self) -> int:
        return self._rows.shape[0]

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    def row(self, word_id: int) -> np.ndarray:
        if not 0 <= word_id < self._rows.shape[0]:
            raise WordLookupError(f"word id {word_id} out of range [0, {self._rows.shape[0]})")
        return self._rows[word_id]

    def row_of_word(self, word: str) -> int:
        try:
            return self._row_of_word[word]
        except KeyError:
            raise WordLookupError(f"unknown word {word!r}") from None


def load_segmentations(path) -> list[Segmentation]:
    """Parse a segmentation TSV file; order of lines is preserved."""
    segs: list[Segmentation] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SegmentationParseError(
                    f"expected 'word<TAB>morphemes', got {line!r}", line_no, str(path)
                )
            word, morph_field = parts[0].strip(), parts[1]
            morphemes = tuple(morph_field.split())
            if not word or not morphemes:
                raise SegmentationParseError(
                    f"empty word or morpheme list in {line!r}", line_no, str(path)
                )
            if PAD_TOKEN in morphemes:
                raise SegmentationParseError(
                    f"{PAD_TOKEN!r} is reserved and may not appear as a morpheme",
                    line_no,
                    str(path),
                )
            if word in seen:
                raise DuplicateWordError(f"duplicate word {word!r} at line {line_no}")
            seen.add(word)
            segs.append(Segmentation(word, morphemes))
    return segs


def truncate_pad(morphemes: Sequence[str], n: int) -> list[str]:
    """Normalise a morpheme list to exactly ``n`` slots.

    Shorter lists get pad sentinels; longer ones keep the first ``n-1``
    morphemes and concatenate the remainder into one synthetic morpheme.
    """
    if n < 1:
        raise ValueError(f"slot count must be >= 1, got {n}")
    morphemes = list(morphemes)
    if not morphemes:
        raise ValueError("morpheme list must be non-empty")
    l = len(morphemes)
    if l < n:
        return morphemes + [PAD_TOKEN] * (n - l)
    if l == n:
        return morphemes
    return morphemes[: n - 1] + ["".join(morphemes[n - 1 :])]


def _truncate_no_pad(morphemes: Sequence[str], cap: int | None) -> list[str]:
    # truncation only; used for statistics where pads are not morphemes
    if cap is None or len(morphemes) <= cap:
        return list(morphemes)
    return list(morphemes[: cap - 1]) + ["".join(morphemes[cap - 1 :])]


def build_vocab_and_index(
    segs: Sequence[Segmentation], n: int
) -> tuple[MorphemeVocab, IndexMatrix]:
    """Assign morpheme ids in first-appearance order and encode every word.

    The vocabulary holds the post-truncation morpheme strings (concatenated
    tails included) plus the pad sentinel; its size therefore counts the pad.
    """
    if not segs:
        raise ValueError("need at least one segmentation")
    order: list[str] = []
    seen: set[str] = set()
    slot_lists: list[list[str]] = []
    words: list[str] = []
    for seg in segs:
        slots = truncate_pad(seg.morphemes, n)
        slot_lists.append(slots)
        words.append(seg.word)
        for m in slots:
            if m != PAD_TOKEN and m not in seen:
                seen.add(m)
                order.append(m)
    vocab = MorphemeVocab(order)
    rows = np.empty((len(segs), n), dtype=np.int64)
    for j, slots in enumerate(slot_lists):
        rows[j] = [vocab.id_of(m) if m != PAD_TOKEN else vocab.pad_id for m in slots]
    return vocab, IndexMatrix(rows, words)


def random_seg(word: str, rng_seed: int) -> Segmentation:
    """Split a word into three pieces at two uniformly chosen internal gaps.

    Words of three or fewer characters are returned whole.  Gap positions are
    drawn without replacement from the ``len(word)-1`` internal gaps, with a
    per-word stream derived from ``rng_seed`` so a corpus-level seed still
    cuts different words differently.  Characters are unicode scalar values.
    """
    if not word:
        raise ValueError("word must be non-empty")
    length = len(word)
    if length <= 3:
        return Segmentation(word, (word,))
    rng = random.Random(f"{rng_seed}\x1f{word}")
    g1, g2 = sorted(rng.sample(range(1, length), 2))
    return Segmentation(word, (word[:g1], word[g1:g2], word[g2:]))


@dataclass(frozen=True)
class StatsRow:
    label: str
    n1: int
    n2: int
    n3: int
    n4: int
    n_gt4: int
    vocab_size: int  # distinct real morphemes after truncation (no pad)

    def as_tsv(self) -> str:
        return "\t".join(
            str(x) for x in (self.label, self.n1, self.n2, self.n3, self.n4, self.n_gt4, self.vocab_size)
        )


STATS_HEADER = "segmentation\tN=1\tN=2\tN=3\tN=4\tN>4\t|M|"


def morpheme_stats(segs: Sequence[Segmentation], caps: Iterable[int | None]) -> list[StatsRow]:
    """Count words by post-truncation morpheme count for each cap.

    ``None`` means no cap.  The reported vocabulary size counts distinct
    morpheme strings only; pad slots are not morphemes.
    """
    if not segs:
        raise ValueError("need at least one segmentation")
    out = []
    for cap in caps:
        if cap is not None and cap < 1:
            raise ValueError(f"cap must be >= 1, got {cap}")
        buckets = [0, 0, 0, 0, 0]  # N=1..4, N>4
        distinct: set[str] = set()
        for seg in segs:
            truncated = _truncate_no_pad(seg.morphemes, cap)
            count = len(truncated)
            if count > 4:
                buckets[4] += 1
            else:
                buckets[count - 1] += 1
            distinct.update(truncated)
        label = "mor_inf" if cap is None else f"mor_{cap}"
        out.append(StatsRow(label, *buckets, len(distinct)))
    return out
