"""Probability models over the vocabulary.

Three model families share one query protocol, ``model.prob(w, history)``
with ``history`` the tuple of word ids preceding ``w`` in its sentence;
each model derives the conditioning view it needs (mapped context tuple
or padded n-gram history) from that common input.

* ``ClassLM``: the two-step clustered model
  p(w | c) = p(G(w) | S(c)) * p(w | G(w)), with the category-given-state
  distribution smoothed by absolute discounting toward the category
  marginal, and a suffix-fallback policy for unseen contexts.
* ``BackoffModel``: interpolated absolute-discounting n-gram model with
  per-order count cutoffs and a uniform-floor unigram.
* ``InterpolatedModel``: a fixed convex combination of other models.

All trained models are immutable and their queries are pure.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from clusterlm.cluster import Clustering, load_clustering
from clusterlm.corpus import Vocabulary, identity_mapper, load_feature_map
from clusterlm.events import ContextTuple, load_counts


# ---------------------------------------------------------------------------
# clustered class model
# ---------------------------------------------------------------------------


class ClassLM:
    """Word probabilities from a word/context clustering.

    p(w | c) factors into p(g | s) * p(w | g) with g the word's category
    and s the context's state.  p(w | g) = N(w)/N(g) is the exact
    relative frequency; p(g | s) discounts each seen joint cell by
    ``discount`` and redistributes the collected mass proportionally to
    the category marginals:

        p(g | s) = max(N(s,g) - D, 0)/N(s) + D*n+(s)/N(s) * N(g)/N.

    A context never seen in training falls back to the state most
    frequent among contexts sharing its longest seen suffix; with no
    seen suffix at all, to the heaviest state.
    """

    def __init__(self, clustering: Clustering, vocab: Vocabulary, discount: float = 0.5):
        if not 0.0 <= discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        self.discount = float(discount)
        self.n_words = clustering.n_words
        self.n_categories = clustering.n_categories
        self.n_states = clustering.n_states
        self.spec = clustering.table.spec
        self.bos_id = vocab.bos_id

        self.G = clustering.G.copy()
        self.word_counts = clustering.word_counts.copy()
        self.joint = clustering.joint.copy()
        self.state_totals = clustering.state_totals.copy()
        self.cat_totals = clustering.cat_totals.copy()
        self.total = int(self.word_counts.sum())
        self._nplus = (self.joint > 0).sum(axis=1).astype(np.int64)

        self.state_of = {c: int(s) for c, s in zip(clustering.contexts, clustering.S)}
        self._fallback = self._build_fallback(clustering)
        self._default_state = int(np.argmax(self.state_totals))
        self._offsets = [slot.offset for slot in self.spec.slots]
        self._tables = [slot.mapper.table for slot in self.spec.slots]
        self._bos_values = tuple(int(t[self.bos_id]) for t in self._tables)

    @staticmethod
    def _build_fallback(clustering: Clustering) -> dict[ContextTuple, int]:
        """Most frequent state (event-weighted, ties to the lower id)
        for every proper context suffix seen in training."""
        depth = clustering.table.spec.depth
        weights: dict[ContextTuple, dict[int, int]] = {}
        for c, s, n in zip(clustering.contexts, clustering.S, clustering.ctx_counts):
            for keep in range(1, depth):
                suf = c[depth - keep :]
                row = weights.setdefault(suf, {})
                row[int(s)] = row.get(int(s), 0) + int(n)
        return {
            suf: min(row, key=lambda s: (-row[s], s)) for suf, row in weights.items()
        }

    def resolve_state(self, context: ContextTuple) -> int:
        """State of a context tuple, through the suffix fallback when
        the exact tuple was never seen."""
        if len(context) != self.spec.depth:
            raise ValueError("context tuple length does not match the model's slots")
        s = self.state_of.get(tuple(context))
        if s is not None:
            return s
        depth = self.spec.depth
        for keep in range(depth - 1, 0, -1):
            s = self._fallback.get(tuple(context[depth - keep :]))
            if s is not None:
                return s
        return self._default_state

    def prob_given_context(self, w: int, context: ContextTuple) -> float:
        """p(w | context) per the two-step factorization."""
        if not 0 <= w < self.n_words:
            raise ValueError("word id out of range")
        s = self.resolve_state(context)
        g = int(self.G[w])
        n_g = int(self.cat_totals[g])
        if n_g == 0:
            return 0.0
        n_s = float(self.state_totals[s])
        d = self.discount
        p_g = (
            max(float(self.joint[s, g]) - d, 0.0) / n_s
            + (d * float(self._nplus[s]) / n_s) * (n_g / self.total)
        )
        p_w = float(self.word_counts[w]) / n_g
        return p_g * p_w

    def context_of(self, history: Sequence[int]) -> ContextTuple:
        """Mapped context tuple for a prediction following ``history``
        (positions before the sentence start take the begin token)."""
        n = len(history)
        return tuple(
            int(table[history[n + off]]) if n + off >= 0 else bos
            for off, table, bos in zip(self._offsets, self._tables, self._bos_values)
        )

    def prob(self, w: int, history: Sequence[int]) -> float:
        return self.prob_given_context(w, self.context_of(history))

    @property
    def n_parameters(self) -> int:
        """Raw stored-entry count: nonzero joint cells, word counts, and
        the context-to-state map."""
        return int(np.count_nonzero(self.joint)) + self.n_words + len(self.state_of)


def save_classlm(
    model: ClassLM,
    path: str | Path,
    *,
    vocab_path: str,
    counts_path: str,
    clustering_path: str,
    mapper_paths: dict[str, tuple[str, str]] | None = None,
) -> None:
    """Write the model as references to its artifacts plus smoothing
    parameters.  ``mapper_paths`` maps slot names to (kind, path) for
    every non-identity feature map the counts were collected with.
    Relative paths are resolved against the model file at load time."""
    lines = [
        "#clusterlm-classlm v1",
        f"#discount\t{model.discount!r}",
        f"#vocab\t{vocab_path}",
        f"#counts\t{counts_path}",
        f"#clustering\t{clustering_path}",
    ]
    for name, (kind, mpath) in sorted((mapper_paths or {}).items()):
        lines.append(f"#mapper\t{name}\t{kind}\t{mpath}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_classlm(path: str | Path) -> ClassLM:
    base = Path(path).parent
    discount = 0.5
    vocab_path = counts_path = clustering_path = None
    mapper_specs: dict[str, tuple[str, str]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#clusterlm-classlm v1":
        raise ValueError("not a class model file")
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split("\t")
        key = parts[0]
        if key == "#discount":
            discount = float(parts[1])
        elif key == "#vocab":
            vocab_path = parts[1]
        elif key == "#counts":
            counts_path = parts[1]
        elif key == "#clustering":
            clustering_path = parts[1]
        elif key == "#mapper":
            mapper_specs[parts[1]] = (parts[2], parts[3])
    if not (vocab_path and counts_path and clustering_path):
        raise ValueError("class model file must reference vocab, counts and clustering")

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    vocab = Vocabulary.load(resolve(vocab_path))
    mappers = {"w": identity_mapper(vocab)}
    for name, (kind, mpath) in mapper_specs.items():
        mappers[name] = load_feature_map(resolve(mpath), vocab, kind, name)
    table = load_counts(resolve(counts_path), mappers=mappers)
    clustering = load_clustering(resolve(clustering_path), table)
    return ClassLM(clustering, vocab, discount=discount)


# ---------------------------------------------------------------------------
# backoff n-gram model
# ---------------------------------------------------------------------------


class BackoffModel:
    """Interpolated absolute-discounting n-gram model.

    For each order k >= 2 with kept counts c and history total c(h):

        p_k(w|h) = max(c(hw) - D, 0)/c(h) + bow(h) * p_{k-1}(w|h'),
        bow(h)   = D * n+(h) / c(h),

    where h' drops the farthest word.  An unseen history backs off with
    weight 1.  The unigram adds a uniform floor over the whole
    vocabulary, so every word has positive probability:

        p_1(w) = (max(c(w) - D, 0) + D * n+ / |V|) / N.

    ``probs`` stores the full interpolated p_k for every kept k-gram;
    ``bows`` stores bow(h) per seen history.
    """

    def __init__(
        self,
        order: int,
        n_words: int,
        discount: float,
        uni: np.ndarray,
        probs: dict[int, dict[tuple[int, ...], float]],
        bows: dict[int, dict[tuple[int, ...], float]],
        bos_id: int | None = None,
    ):
        if order < 1:
            raise ValueError("order must be at least 1")
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.order = int(order)
        self.n_words = int(n_words)
        self.discount = float(discount)
        self.bos_id = bos_id
        self.uni = np.asarray(uni, dtype=np.float64)
        if self.uni.shape != (self.n_words,):
            raise ValueError("unigram table length does not match vocabulary")
        self.probs = probs
        self.bows = bows

    def _padded(self, history: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        h = tuple(int(x) for x in history[-(self.order - 1) :])
        if self.bos_id is not None and len(h) < self.order - 1:
            h = (self.bos_id,) * (self.order - 1 - len(h)) + h
        return h

    def _p(self, k: int, h: tuple[int, ...], w: int) -> float:
        if k == 1:
            return float(self.uni[w])
        if len(h) < k - 1:
            return self._p(k - 1, h, w)
        bow = self.bows[k].get(h)
        if bow is None:
            return self._p(k - 1, h[1:], w)
        p = self.probs[k].get(h + (w,))
        if p is not None:
            return p
        return bow * self._p(k - 1, h[1:], w)

    def prob(self, w: int, history: Sequence[int]) -> float:
        if not 0 <= w < self.n_words:
            raise ValueError("word id out of range")
        return self._p(self.order, self._padded(history), w)

    @property
    def n_parameters(self) -> int:
        """Raw stored-entry count: unigram row plus every kept n-gram
        probability and history weight."""
        return (
            self.n_words
            + sum(len(t) for t in self.probs.values())
            + sum(len(t) for t in self.bows.values())
        )


def ngram_counts(
    sentences: Iterable[Sequence[int]],
    order: int,
    *,
    bos_id: int,
    eos_id: int,
) -> list[dict[tuple[int, ...], int]]:
    """Per-order n-gram counts with one k-gram of every order per
    prediction event: histories are padded with the begin token and the
    end token is predicted once per sentence."""
    if order < 1:
        raise ValueError("order must be at least 1")
    counts: list[dict[tuple[int, ...], int]] = [{} for _ in range(order)]
    for sent in sentences:
        seq = [bos_id] * (order - 1) + [int(x) for x in sent] + [eos_id]
        for i in range(order - 1, len(seq)):
            for k in range(1, order + 1):
                ng = tuple(seq[i - k + 1 : i + 1])
                counts[k - 1][ng] = counts[k - 1].get(ng, 0) + 1
    if not counts[0]:
        raise ValueError("empty corpus")
    return counts


def train_backoff(
    counts: Sequence[dict[tuple[int, ...], int]],
    n_words: int,
    *,
    discount: float = 0.5,
    cutoffs: dict[int, int] | None = None,
    bos_id: int | None = None,
) -> BackoffModel:
    """Build a BackoffModel from per-order n-gram counts.

    ``counts[k-1]`` holds the k-gram counts.  ``cutoffs`` maps an order
    to the count at or below which its n-grams are discarded; by default
    every order >= 3 discards singletons.  A history whose k-grams are
    all discarded becomes unseen and backs off fully.
    """
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    order = len(counts)
    if order < 1:
        raise ValueError("counts for at least one order required")
    if cutoffs is None:
        cutoffs = {k: 1 for k in range(3, order + 1)}
    kept: list[dict[tuple[int, ...], int]] = []
    for k in range(1, order + 1):
        cut = cutoffs.get(k, 0)
        table = {}
        for ng, c in counts[k - 1].items():
            if len(ng) != k:
                raise ValueError(f"order-{k} table contains a length-{len(ng)} entry")
            if c > cut:
                table[ng] = c
        kept.append(table)

    uni_counts = kept[0]
    total = sum(uni_counts.values())
    if total == 0:
        raise ValueError("no unigrams survive the cutoffs")
    nplus = len(uni_counts)
    floor = discount * nplus / n_words
    uni = np.full(n_words, floor / total, dtype=np.float64)
    for (w,), c in uni_counts.items():
        uni[w] = (max(c - discount, 0.0) + floor) / total

    model = BackoffModel(order, n_words, discount, uni, {}, {}, bos_id=bos_id)
    for k in range(2, order + 1):
        hist_tot: dict[tuple[int, ...], int] = {}
        hist_np: dict[tuple[int, ...], int] = {}
        for ng, c in kept[k - 1].items():
            h = ng[:-1]
            hist_tot[h] = hist_tot.get(h, 0) + c
            hist_np[h] = hist_np.get(h, 0) + 1
        bows = {
            h: discount * hist_np[h] / hist_tot[h] for h in hist_tot
        }
        probs = {}
        model.bows[k] = bows
        for ng, c in kept[k - 1].items():
            h = ng[:-1]
            probs[ng] = (c - discount) / hist_tot[h] + bows[h] * model._p(
                k - 1, h[1:], ng[-1]
            )
        model.probs[k] = probs
    return model


def save_backoff(model: BackoffModel, path: str | Path) -> None:
    """Versioned text dump: sorted ``history<TAB>word<TAB>logprob``
    lines per order plus per-history backoff weight sections."""
    lines = [
        "#clusterlm-backoff v1",
        f"#order\t{model.order}",
        f"#discount\t{model.discount!r}",
        f"#n_words\t{model.n_words}",
        f"#bos\t{'none' if model.bos_id is None else model.bos_id}",
        "#1-grams",
    ]
    for w in range(model.n_words):
        lines.append(f"\t{w}\t{math.log(model.uni[w])!r}")
    for k in range(2, model.order + 1):
        lines.append(f"#{k}-grams")
        for ng in sorted(model.probs.get(k, {})):
            h = " ".join(str(v) for v in ng[:-1])
            lines.append(f"{h}\t{ng[-1]}\t{math.log(model.probs[k][ng])!r}")
        lines.append(f"#bow\t{k}")
        for h in sorted(model.bows.get(k, {})):
            hs = " ".join(str(v) for v in h)
            lines.append(f"{hs}\t{math.log(model.bows[k][h])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_backoff(path: str | Path) -> BackoffModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#clusterlm-backoff v1":
        raise ValueError("not a backoff model file")
    order = discount = n_words = None
    bos_id: int | None = None
    uni: np.ndarray | None = None
    probs: dict[int, dict[tuple[int, ...], float]] = {}
    bows: dict[int, dict[tuple[int, ...], float]] = {}
    section: tuple[str, int] | None = None
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line.split("\t")
            key = parts[0]
            if key == "#order":
                order = int(parts[1])
            elif key == "#discount":
                discount = float(parts[1])
            elif key == "#n_words":
                n_words = int(parts[1])
                uni = np.zeros(n_words, dtype=np.float64)
            elif key == "#bos":
                bos_id = None if parts[1] == "none" else int(parts[1])
            elif key == "#bow":
                k = int(parts[1])
                section = ("bow", k)
                bows.setdefault(k, {})
            elif key.endswith("-grams"):
                k = int(key[1:].split("-")[0])
                section = ("grams", k)
                if k > 1:
                    probs.setdefault(k, {})
            else:
                raise ValueError(f"unknown backoff header line: {line!r}")
            continue
        if section is None or uni is None:
            raise ValueError("backoff model body precedes its headers")
        what, k = section
        if what == "grams":
            h_str, w_str, lp_str = line.split("\t")
            if k == 1:
                uni[int(w_str)] = math.exp(float(lp_str))
            else:
                h = tuple(int(v) for v in h_str.split())
                probs[k][h + (int(w_str),)] = math.exp(float(lp_str))
        else:
            h_str, lb_str = line.split("\t")
            h = tuple(int(v) for v in h_str.split())
            bows[k][h] = math.exp(float(lb_str))
    if order is None or discount is None or n_words is None or uni is None:
        raise ValueError("backoff model file missing required headers")
    for k in range(2, order + 1):
        probs.setdefault(k, {})
        bows.setdefault(k, {})
    return BackoffModel(order, n_words, discount, uni, probs, bows, bos_id=bos_id)


# ---------------------------------------------------------------------------
# linear interpolation
# ---------------------------------------------------------------------------


class InterpolatedModel:
    """Fixed convex combination of component models over one
    vocabulary: p(w|.) = sum_k weight_k * p_k(w|.)."""

    def __init__(self, components: Sequence, weights: Sequence[float]):
        if len(components) != len(weights):
            raise ValueError("one weight per component required")
        if not components:
            raise ValueError("at least one component required")
        w = np.asarray(weights, dtype=np.float64)
        if (w < 0).any() or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        sizes = {getattr(c, "n_words") for c in components}
        if len(sizes) != 1:
            raise ValueError("components must share one vocabulary")
        self.components = tuple(components)
        self.weights = w
        self.n_words = sizes.pop()

    def prob(self, w: int, history: Sequence[int]) -> float:
        total = 0.0
        for lam, comp in zip(self.weights, self.components):
            if lam != 0.0:
                total += float(lam) * comp.prob(w, history)
        return total

    @property
    def n_parameters(self) -> int:
        return len(self.weights) + sum(c.n_parameters for c in self.components)


def save_interpolated(
    model: InterpolatedModel, path: str | Path, component_paths: Sequence[str]
) -> None:
    """Write weights plus component model file paths (resolved against
    the model file at load time when relative)."""
    if len(component_paths) != len(model.components):
        raise ValueError("one path per component required")
    lines = ["#clusterlm-interp v1"]
    lines.append("#weights\t" + " ".join(repr(float(x)) for x in model.weights))
    for p in component_paths:
        lines.append(f"#component\t{p}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_interpolated(path: str | Path) -> InterpolatedModel:
    base = Path(path).parent
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#clusterlm-interp v1":
        raise ValueError("not an interpolated model file")
    weights: list[float] = []
    comp_paths: list[Path] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split("\t")
        if parts[0] == "#weights":
            weights = [float(x) for x in parts[1].split()]
        elif parts[0] == "#component":
            q = Path(parts[1])
            comp_paths.append(q if q.is_absolute() else base / q)
    components = [load_model(p) for p in comp_paths]
    return InterpolatedModel(components, weights)


def load_model(path: str | Path):
    """Open any saved model, dispatching on its version line."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "#clusterlm-backoff v1":
        return load_backoff(path)
    if first == "#clusterlm-classlm v1":
        return load_classlm(path)
    if first == "#clusterlm-interp v1":
        return load_interpolated(path)
    raise ValueError(f"unrecognized model file: {path}")
