"""Autoregressive LM backends: vocabulary handling, table and n-gram models.

Local backends expose complete next-token distributions over a fixed
vocabulary.  Both exist to create exactly reproducible desk-scale
distributions -- the table model by explicit enumeration, the n-gram model
by counting a small corpus.
"""
from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .errors import ModelFileError, UnsegmentableText

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Vocabulary:
    """Finite token inventory with a designated EOS token."""

    tokens: tuple[str, ...]
    eos_index: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not (0 <= self.eos_index < len(self.tokens)):
            raise ValueError("eos_index out of range")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("token strings must be unique")
        for i, t in enumerate(self.tokens):
            if t == "" and i != self.eos_index:
                raise ValueError("only the EOS token may render as the empty string")
        object.__setattr__(
            self, "_by_text", {t: i for i, t in enumerate(self.tokens)}
        )
        # longest-first candidate order for greedy segmentation; EOS is
        # excluded so forced text can never smuggle an end-of-sequence token
        object.__setattr__(
            self,
            "_by_length",
            tuple(
                sorted(
                    (
                        i
                        for i, t in enumerate(self.tokens)
                        if t != "" and i != self.eos_index
                    ),
                    key=lambda i: (-len(self.tokens[i]), i),
                )
            ),
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def token_text(self, index: int) -> str:
        return self.tokens[index]

    def index_of(self, text: str) -> int | None:
        return self._by_text.get(text)


def greedy_tokenize(vocab: Vocabulary, text: str) -> list[int]:
    """Segment text by repeatedly taking the longest matching token.

    Ties cannot occur (token strings are unique).  Raises
    UnsegmentableText at the first position with no match.
    """
    out: list[int] = []
    pos = 0
    n = len(text)
    while pos < n:
        for i in vocab._by_length:
            tok = vocab.tokens[i]
            if text.startswith(tok, pos):
                out.append(i)
                pos += len(tok)
                break
        else:
            raise UnsegmentableText(text, pos)
    return out


@dataclass(frozen=True)
class TokenDistribution:
    """Next-token log-probabilities, sorted best-first.

    ``complete`` means the entries cover the whole vocabulary and their
    probabilities sum to one; truncated (top-k) distributions set it False.
    """

    entries: tuple[tuple[int, float], ...]
    complete: bool

    @classmethod
    def from_pairs(
        cls, pairs: Sequence[tuple[int, float]], complete: bool
    ) -> "TokenDistribution":
        ordered = tuple(sorted(pairs, key=lambda p: (-p[1], p[0])))
        return cls(entries=ordered, complete=complete)

    def logprob(self, index: int) -> float | None:
        for i, lp in self.entries:
            if i == index:
                return lp
        return None

    def best(self) -> tuple[int, float]:
        return self.entries[0]


@dataclass(frozen=True)
class BackendCaps:
    supports_full_distribution: bool
    top_k_limit: int | None
    supports_forced_scoring: bool


class LMBackend:
    """Base class: autoregressive scoring over a token vocabulary."""

    vocab: Vocabulary
    caps: BackendCaps

    def next_distribution(self, prefix: Sequence[int]) -> TokenDistribution:
        raise NotImplementedError

    def batch_next_distribution(
        self, prefixes: Sequence[Sequence[int]]
    ) -> list[TokenDistribution]:
        return [self.next_distribution(p) for p in prefixes]

    def score_forced(
        self, prefix: Sequence[int], continuation: Sequence[int]
    ) -> list[float]:
        """Per-token log-probabilities of a forced continuation."""
        out: list[float] = []
        ctx = list(prefix)
        for t in continuation:
            lp = self.next_distribution(ctx).logprob(t)
            out.append(NEG_INF if lp is None else lp)
            ctx.append(t)
        return out

    def tokenize(self, text: str) -> list[int]:
        return greedy_tokenize(self.vocab, text)

    def detokenize(self, tokens: Sequence[int]) -> str:
        return "".join(self.vocab.tokens[t] for t in tokens)


def _logify(probs: Sequence[float]) -> tuple[float, ...]:
    return tuple(math.log(p) if p > 0.0 else NEG_INF for p in probs)


def _check_row(probs: Sequence[float], where: str) -> None:
    if any((not isinstance(p, (int, float))) or p < 0.0 for p in probs):
        raise ModelFileError(f"{where}: probabilities must be non-negative numbers")
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise ModelFileError(f"{where}: probabilities sum to {total!r}, not 1")


class TableLM(LMBackend):
    """Lookup model: the detokenized prefix string selects a probability row.

    ``rows`` may be a mapping from prefix strings to rows, or a callable
    ``prefix -> row | None`` implementing the same lookup virtually (used
    by generated fixtures whose reachable context set is large).  A miss
    falls back to the default row.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        rows: Mapping[str, Sequence[float]] | Callable[[str], Sequence[float] | None],
        default_row: Sequence[float],
        check_rows: bool = True,
    ):
        self.vocab = vocab
        self.caps = BackendCaps(
            supports_full_distribution=True,
            top_k_limit=None,
            supports_forced_scoring=True,
        )
        self._lookup = rows.get if isinstance(rows, Mapping) else rows
        self._rows = rows if isinstance(rows, Mapping) else None
        self._default = tuple(default_row)
        self._check = check_rows
        _check_row(self._default, "default row")
        if len(self._default) != len(vocab):
            raise ModelFileError("default row length differs from vocabulary size")
        if isinstance(rows, Mapping) and check_rows:
            for key, row in rows.items():
                if len(row) != len(vocab):
                    raise ModelFileError(
                        f"row for context {key!r} has wrong length"
                    )
                _check_row(row, f"context {key!r}")

    def next_distribution(self, prefix: Sequence[int]) -> TokenDistribution:
        key = self.detokenize(prefix)
        row = self._lookup(key)
        if row is None:
            row = self._default
        elif self._rows is None and self._check:
            if len(row) != len(self.vocab):
                raise ModelFileError(f"virtual row for {key!r} has wrong length")
            _check_row(row, f"virtual context {key!r}")
        pairs = list(enumerate(_logify(row)))
        return TokenDistribution.from_pairs(pairs, complete=True)

    @classmethod
    def from_json(cls, data: dict) -> "TableLM":
        for key in data:
            if key not in {"vocab", "eos", "contexts", "default"}:
                raise ModelFileError(f"unknown key {key!r} in table model")
        try:
            vocab = Vocabulary(tuple(data["vocab"]), data["eos"])
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFileError(f"bad vocabulary: {e}") from e
        contexts = data.get("contexts", {})
        if not isinstance(contexts, dict):
            raise ModelFileError("'contexts' must be an object")
        if "default" not in data:
            raise ModelFileError("table model requires a 'default' row")
        return cls(vocab, contexts, data["default"])

    @classmethod
    def from_file(cls, path: str) -> "TableLM":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ModelFileError(f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ModelFileError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ModelFileError(f"{path}: table model must be a JSON object")
        return cls.from_json(data)


class NGramLM(LMBackend):
    """Fixed-order n-gram model with add-1 smoothing over the vocabulary.

    Contexts never observed in the corpus back off to the add-1-smoothed
    unigram distribution; prefixes shorter than the context length use the
    same backoff.
    """

    def __init__(self, vocab: Vocabulary, order: int, corpus_tokens: Sequence[int]):
        if order < 1:
            raise ModelFileError("order must be >= 1")
        self.vocab = vocab
        self.caps = BackendCaps(
            supports_full_distribution=True,
            top_k_limit=None,
            supports_forced_scoring=True,
        )
        self.order = order
        self._corpus_len = len(corpus_tokens)
        self._unigram: Counter = Counter(corpus_tokens)
        self._follow: dict[tuple[int, ...], Counter] = {}
        k = order - 1
        for i in range(k, len(corpus_tokens)):
            ctx = tuple(corpus_tokens[i - k : i])
            self._follow.setdefault(ctx, Counter())[corpus_tokens[i]] += 1

    def _row(self, counts: Counter, total: int) -> list[float]:
        v = len(self.vocab)
        return [(counts.get(i, 0) + 1) / (total + v) for i in range(v)]

    def next_distribution(self, prefix: Sequence[int]) -> TokenDistribution:
        k = self.order - 1
        probs: list[float] | None = None
        if len(prefix) >= k:
            ctx = tuple(prefix[len(prefix) - k :])
            counts = self._follow.get(ctx)
            if counts is not None:
                probs = self._row(counts, sum(counts.values()))
        if probs is None:
            probs = self._row(self._unigram, self._corpus_len)
        pairs = list(enumerate(_logify(probs)))
        return TokenDistribution.from_pairs(pairs, complete=True)

    @classmethod
    def from_config(cls, data: dict, base_dir: str = ".") -> "NGramLM":
        for key in data:
            if key not in {"order", "vocab", "corpus_path", "tokenizer"}:
                raise ModelFileError(f"unknown key {key!r} in n-gram config")
        for key in ("order", "vocab", "corpus_path", "tokenizer"):
            if key not in data:
                raise ModelFileError(f"n-gram config is missing {key!r}")
        order = data["order"]
        if not isinstance(order, int) or isinstance(order, bool) or order < 1:
            raise ModelFileError("'order' must be a positive integer")
        tokens = data["vocab"]
        if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
            raise ModelFileError("'vocab' must be a list of strings")
        # the config declares no EOS: an empty-string entry serves as EOS,
        # and one is appended when absent
        tokens = list(tokens)
        if "" in tokens:
            eos = tokens.index("")
        else:
            eos = len(tokens)
            tokens.append("")
        try:
            vocab = Vocabulary(tuple(tokens), eos)
        except ValueError as e:
            raise ModelFileError(f"bad vocabulary: {e}") from e
        tokenizer = data["tokenizer"]
        if tokenizer not in ("char", "word"):
            raise ModelFileError("'tokenizer' must be 'char' or 'word'")
        corpus_path = os.path.join(base_dir, data["corpus_path"])
        try:
            with open(corpus_path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ModelFileError(f"cannot read corpus {corpus_path}: {e}") from e
        pieces = list(text) if tokenizer == "char" else text.split()
        corpus: list[int] = []
        for piece in pieces:
            idx = vocab.index_of(piece)
            if idx is None:
                raise ModelFileError(f"corpus token {piece!r} is not in the vocabulary")
            corpus.append(idx)
        return cls(vocab, order, corpus)

    @classmethod
    def from_file(cls, path: str) -> "NGramLM":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ModelFileError(f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ModelFileError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ModelFileError(f"{path}: n-gram config must be a JSON object")
        return cls.from_config(data, base_dir=os.path.dirname(path) or ".")
