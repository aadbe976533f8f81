"""Token masks and chunk-termination rules for variable decoding.

Variables terminate in exactly one of five ways: a stop phrase appeared
in the value, a OneOf member was completed, EOS was emitted, the token
budget ran out, or decoding simply continues.  OneOf constraints are
enforced with token masks computed against a prefix index of the member
set; stop phrases are ignored inside OneOf variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DeadEnd, IllegalToken
from .sketch import OneOf, VariableSpec

CONTINUE = "continue"
STOP_PHRASE = "stop_phrase"
MEMBER_COMPLETE = "member_complete"
EOS_HIT = "eos"
MAX_TOKENS = "max_tokens"


@dataclass(frozen=True)
class TerminationVerdict:
    """Outcome of appending one token to an open variable chunk."""

    status: str
    phrase: str | None = None

    @property
    def closes_chunk(self) -> bool:
        return self.status != CONTINUE


VERDICT_CONTINUE = TerminationVerdict(CONTINUE)


class PrefixIndex:
    """Trie over a OneOf member set answering prefix queries."""

    __slots__ = ("members", "_root")

    def __init__(self, members: Iterable[str]):
        self.members = tuple(members)
        root: dict = {}
        for m in self.members:
            node = root
            for ch in m:
                node = node.setdefault(ch, {})
            node[""] = True  # end-of-member marker
        self._root = root

    def _walk(self, s: str) -> dict | None:
        node = self._root
        for ch in s:
            node = node.get(ch)
            if node is None:
                return None
        return node

    def is_prefix(self, s: str) -> bool:
        """True when s is a prefix of at least one member."""
        return self._walk(s) is not None

    def is_member(self, s: str) -> bool:
        node = self._walk(s)
        return node is not None and "" in node

    def is_extendable(self, s: str) -> bool:
        """True when some member is strictly longer than s and starts with it."""
        node = self._walk(s)
        return node is not None and any(k != "" for k in node)


def build_prefix_index(one_of: OneOf) -> PrefixIndex:
    return PrefixIndex(one_of.members)


@dataclass(frozen=True)
class MaskState:
    """Progress through one variable chunk: value so far plus token count."""

    partial_value: str = ""
    tokens_emitted: int = 0
    index: PrefixIndex | None = None

    @classmethod
    def start(cls, spec: VariableSpec) -> "MaskState":
        index = build_prefix_index(spec.one_of) if spec.one_of is not None else None
        return cls(partial_value="", tokens_emitted=0, index=index)

    @property
    def constrained(self) -> bool:
        return self.index is not None

    @property
    def is_complete_member(self) -> bool:
        return self.index is not None and self.index.is_member(self.partial_value)


def compute_mask(state: MaskState, vocab) -> frozenset[int]:
    """Token indices that may legally extend the partial value.

    Unconstrained variables allow every token including EOS.  Under OneOf,
    a token is allowed iff partial + token text is still a prefix of some
    member, and EOS is allowed only when the partial is itself a complete
    member.  Raises DeadEnd when nothing is allowed and the partial is not
    a complete member.
    """
    if state.index is None:
        return frozenset(range(len(vocab)))
    allowed: set[int] = set()
    partial = state.partial_value
    for i, text in enumerate(vocab.tokens):
        if i == vocab.eos_index:
            continue
        if state.index.is_prefix(partial + text):
            allowed.add(i)
    complete = state.index.is_member(partial)
    if complete:
        allowed.add(vocab.eos_index)
    if not allowed:
        raise DeadEnd(
            f"no token extends partial value {partial!r} toward any member"
        )
    return frozenset(allowed)


def _first_stop_hit(value: str, stop_phrases: Sequence[str]) -> str | None:
    # substring, not suffix: a phrase may complete mid-token, and the whole
    # token is kept either way; earliest-added phrase wins ties
    for phrase in stop_phrases:
        if phrase in value:
            return phrase
    return None


def advance(
    state: MaskState,
    token_index: int,
    vocab,
    stop_phrases: Sequence[str],
    max_tokens: int,
) -> tuple[MaskState, TerminationVerdict]:
    """Append one token to the open chunk and classify the outcome.

    EOS contributes no text: the value excludes its rendering, though the
    caller still accounts for its log-probability.  Stop phrases fire on
    the detokenized value; the whole matching token is retained.  OneOf
    takes precedence over stop phrases, and a member that can no longer be
    extended completes immediately.
    """
    is_eos = token_index == vocab.eos_index
    if state.index is not None:
        if is_eos:
            if not state.index.is_member(state.partial_value):
                raise IllegalToken("EOS before a member was completed")
            new = MaskState(state.partial_value, state.tokens_emitted + 1, state.index)
            return new, TerminationVerdict(MEMBER_COMPLETE)
        text = vocab.token_text(token_index)
        value = state.partial_value + text
        if not state.index.is_prefix(value):
            raise IllegalToken(
                f"token {text!r} leaves every member (partial {state.partial_value!r})"
            )
        new = MaskState(value, state.tokens_emitted + 1, state.index)
        if state.index.is_member(value) and not state.index.is_extendable(value):
            return new, TerminationVerdict(MEMBER_COMPLETE)
        if new.tokens_emitted >= max_tokens:
            if state.index.is_member(value):
                return new, TerminationVerdict(MEMBER_COMPLETE)
            return new, TerminationVerdict(MAX_TOKENS)
        return new, VERDICT_CONTINUE

    if is_eos:
        new = MaskState(state.partial_value, state.tokens_emitted + 1, None)
        return new, TerminationVerdict(EOS_HIT)
    value = state.partial_value + vocab.token_text(token_index)
    new = MaskState(value, state.tokens_emitted + 1, None)
    phrase = _first_stop_hit(value, stop_phrases)
    if phrase is not None:
        return new, TerminationVerdict(STOP_PHRASE, phrase=phrase)
    if new.tokens_emitted >= max_tokens:
        return new, TerminationVerdict(MAX_TOKENS)
    return new, VERDICT_CONTINUE


def validate_value(spec: VariableSpec, value: str) -> None:
    """Check a finished value against the variable's constraint.

    Used when scoring externally supplied bindings.  Raises
    ConstraintViolation via the caller's wrapper; here we raise ValueError
    to stay context-free.
    """
    if spec.one_of is not None and value not in spec.one_of.members:
        raise ValueError(f"value {value!r} is not a member of the OneOf set")
