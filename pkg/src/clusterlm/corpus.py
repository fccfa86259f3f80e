"""Corpus ingestion: vocabularies, corpus encoding, per-word feature maps.

Input text is assumed pre-tokenized, one sentence per line, tokens
separated by whitespace.  No normalization is applied.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_SPECIAL_ROLES = ("bos", "eos", "unk")


@dataclass
class Vocabulary:
    """Token/id bijection with counts and boundary/unknown specials.

    Ids are dense and 0-based; ``tokens[i]`` is the token with id ``i``.
    ``freq[i]`` is the occurrence count observed when the vocabulary was
    built (mass of truncated out-of-vocabulary tokens is folded into the
    unknown entry).  Vocabularies loaded from disk carry zero counts.
    """

    tokens: list[str]
    ids: dict[str, int] = field(repr=False)
    freq: list[int] = field(repr=False)
    bos_id: int
    eos_id: int
    unk_id: int

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    @property
    def specials(self) -> tuple[int, int, int]:
        return (self.bos_id, self.eos_id, self.unk_id)

    def id_of(self, token: str) -> int:
        """Id of ``token``, mapping out-of-vocabulary tokens to unknown."""
        return self.ids.get(token, self.unk_id)

    def decode(self, word_ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in word_ids]

    def save(self, path: str | Path) -> None:
        """One token per line; the 0-based line number (headers excluded)
        is the id.  Specials are recorded in a ``#special`` header block.
        Frequencies are not persisted."""
        lines = [
            f"#special bos {self.tokens[self.bos_id]}",
            f"#special eos {self.tokens[self.eos_id]}",
            f"#special unk {self.tokens[self.unk_id]}",
        ]
        lines.extend(self.tokens)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        specials: dict[str, str] = {}
        tokens: list[str] = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("#special "):
                _, role, token = line.split(" ", 2)
                specials[role] = token
                continue
            tokens.append(line)
        missing = [r for r in _SPECIAL_ROLES if r not in specials]
        if missing:
            raise ValueError(f"vocabulary file lacks special tokens: {missing}")
        ids = {t: i for i, t in enumerate(tokens)}
        if len(ids) != len(tokens):
            raise ValueError("vocabulary file contains duplicate tokens")
        return cls(
            tokens=tokens,
            ids=ids,
            freq=[0] * len(tokens),
            bos_id=ids[specials["bos"]],
            eos_id=ids[specials["eos"]],
            unk_id=ids[specials["unk"]],
        )


def build_vocabulary(token_stream: Iterable[str], max_size: int | None = None) -> Vocabulary:
    """Build a vocabulary from the ``max_size`` most frequent tokens
    (all of them when ``max_size`` is None).

    Ties are broken by first occurrence in the stream.  The boundary and
    unknown specials are appended if absent; the counts of all truncated
    tokens are folded into the unknown entry so that the frequency total
    over non-boundary entries equals the stream length.
    """
    if max_size is not None and max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts: Counter[str] = Counter()
    for token in token_stream:
        counts[token] += 1
    if not counts:
        raise ValueError("empty corpus")

    # Counter preserves first-insertion order, so a stable sort on count
    # alone realizes the first-occurrence tie-break.
    ranked = sorted(counts, key=lambda t: -counts[t])
    kept = ranked[:max_size]
    tokens = list(kept)
    for special in (BOS, EOS, UNK):
        if special not in counts or special not in kept:
            tokens.append(special)
    ids = {t: i for i, t in enumerate(tokens)}
    freq = [counts.get(t, 0) for t in tokens]
    oov_mass = sum(counts[t] for t in ranked[max_size:] if t not in ids)
    freq[ids[UNK]] += oov_mass
    return Vocabulary(
        tokens=tokens,
        ids=ids,
        freq=freq,
        bos_id=ids[BOS],
        eos_id=ids[EOS],
        unk_id=ids[UNK],
    )


def read_corpus_lines(path: str | Path) -> list[str]:
    """Non-blank lines of a one-sentence-per-line UTF-8 corpus file."""
    return [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]


def iter_tokens(lines: Iterable[str]) -> Iterable[str]:
    for line in lines:
        yield from line.split()


def encode_corpus(lines: Iterable[str], vocab: Vocabulary) -> list[list[int]]:
    """Encode one sentence per line into word-id sequences.

    Out-of-vocabulary tokens map to the unknown id.  Sentence framing
    (begin padding, end prediction) is not materialized here; it is
    applied by event extraction and evaluation, which know the context
    width.  Blank lines are skipped.
    """
    sentences = []
    for line in lines:
        toks = line.split()
        if toks:
            sentences.append([vocab.id_of(t) for t in toks])
    return sentences


def decode_corpus(sentences: Iterable[Sequence[int]], vocab: Vocabulary) -> list[str]:
    return [" ".join(vocab.decode(s)) for s in sentences]


@dataclass
class FeatureMapper:
    """Total map from word ids to dense feature-value ids.

    ``kind`` is one of ``identity`` (value = word id), ``tag-map``
    (values loaded from a word/tag file) or ``class-map`` (values are
    learned word categories).  ``value_names`` gives a printable name
    per value id and has length ``arity``.
    """

    name: str
    kind: str
    table: np.ndarray
    arity: int
    value_names: list[str] = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("identity", "tag-map", "class-map"):
            raise ValueError(f"unknown mapper kind: {self.kind}")
        self.table = np.asarray(self.table, dtype=np.int32)
        if self.table.ndim != 1:
            raise ValueError("mapper table must be one-dimensional")
        if self.table.size and not (0 <= self.table.min() and self.table.max() < self.arity):
            raise ValueError("mapper values outside [0, arity)")

    def value_of(self, word_id: int) -> int:
        return int(self.table[word_id])


def identity_mapper(vocab: Vocabulary, name: str = "w") -> FeatureMapper:
    n = len(vocab)
    return FeatureMapper(
        name=name,
        kind="identity",
        table=np.arange(n, dtype=np.int32),
        arity=n,
        value_names=list(vocab.tokens),
    )


def _value_order(values: set[str]) -> list[str]:
    # Numeric sort when every value is an integer literal (class maps),
    # lexicographic otherwise (tag sets).
    try:
        return sorted(values, key=lambda v: int(v))
    except ValueError:
        return sorted(values)


def load_feature_map(path: str | Path, vocab: Vocabulary, kind: str, name: str | None = None) -> FeatureMapper:
    """Load a ``word<TAB>value`` file as a feature mapper over ``vocab``.

    An optional ``#default<TAB>value`` line supplies the value for words
    missing from the file.  A word listed twice with conflicting values
    is an error.  The boundary and unknown specials, when not listed
    explicitly, each receive a dedicated fresh value so that padding
    stays distinguishable from real-word features.
    """
    raw: dict[str, str] = {}
    default: str | None = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#default\t"):
            default = line.split("\t", 1)[1]
            continue
        if line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"malformed feature-map line {lineno}: {line!r}")
        word, value = parts
        if word in raw and raw[word] != value:
            raise ValueError("ambiguous feature map")
        raw[word] = value

    values = {raw[t] for t in vocab.tokens if t in raw}
    if default is not None:
        values.add(default)
    ordered = _value_order(values)
    value_id = {v: i for i, v in enumerate(ordered)}
    names = list(ordered)

    table = np.empty(len(vocab), dtype=np.int32)
    special_ids = set(vocab.specials)
    for wid, token in enumerate(vocab.tokens):
        if token in raw:
            table[wid] = value_id[raw[token]]
        elif wid in special_ids:
            table[wid] = len(names)
            names.append(token)
        elif default is not None:
            table[wid] = value_id[default]
        else:
            raise ValueError("incomplete feature map")
    return FeatureMapper(name=name or kind, kind=kind, table=table, arity=len(names), value_names=names)


def save_feature_map(mapper: FeatureMapper, vocab: Vocabulary, path: str | Path) -> None:
    """Write ``word<TAB>value`` lines for every vocabulary word.

    Specials carrying their auto-generated fresh value are omitted so a
    reload regenerates the identical mapper.
    """
    if len(vocab) != mapper.table.size:
        raise ValueError("mapper/vocabulary size mismatch")
    special_ids = set(vocab.specials)
    lines = []
    for wid, tok in enumerate(vocab.tokens):
        value = mapper.value_names[mapper.table[wid]]
        if wid in special_ids and value == tok:
            continue
        lines.append(f"{tok}\t{value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
