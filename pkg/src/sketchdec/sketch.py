"""Sketch templates: ordered chunks of fixed text and model-filled variables.

A sketch interleaves deterministic chunks (text that is forced during
decoding but still likelihood-scored) with variable chunks that the model
fills in.  Sketches are either static (a fixed chunk list) or dynamic (a
program that emits the next chunks as a function of the values bound so
far, which lets templates branch on earlier completions).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import (
    DuplicateAdjacentVariable,
    DynamicProgramError,
    EmptyDeterministicChunk,
    MissingBinding,
    SketchSyntaxError,
)

DEFAULT_MAX_TOKENS = 64

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class OneOf:
    """Membership constraint: the decoded value must equal one member."""

    members: tuple[str, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("OneOf requires at least one member")
        if any(not isinstance(m, str) or m == "" for m in self.members):
            raise ValueError("OneOf members must be non-empty strings")
        if len(set(self.members)) != len(self.members):
            raise ValueError("OneOf members must be distinct")
        # canonical order makes structural equality independent of input order
        object.__setattr__(self, "members", tuple(sorted(self.members)))


@dataclass(frozen=True)
class VariableSpec:
    """Declaration of a model-filled slot."""

    name: str
    stop_phrases: tuple[str, ...] = ()
    max_tokens: int = DEFAULT_MAX_TOKENS
    one_of: OneOf | None = None

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"variable name {self.name!r} is not an identifier")
        if any(not p for p in self.stop_phrases):
            raise ValueError("stop phrases must be non-empty")
        if not isinstance(self.max_tokens, int) or isinstance(self.max_tokens, bool):
            raise ValueError("max_tokens must be an integer")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        object.__setattr__(self, "stop_phrases", tuple(self.stop_phrases))


@dataclass(frozen=True)
class Chunk:
    """One template element: deterministic text or a variable slot."""

    kind: str  # "det" | "var"
    text: str = ""
    var: VariableSpec | None = None

    @classmethod
    def det(cls, text: str) -> "Chunk":
        if text == "":
            raise EmptyDeterministicChunk(-1, "deterministic chunk text is empty")
        return cls(kind="det", text=text)

    @classmethod
    def variable(cls, spec: VariableSpec) -> "Chunk":
        return cls(kind="var", var=spec)

    @property
    def is_det(self) -> bool:
        return self.kind == "det"

    @property
    def is_var(self) -> bool:
        return self.kind == "var"

    def __post_init__(self):
        if self.kind not in ("det", "var"):
            raise ValueError(f"unknown chunk kind {self.kind!r}")
        if self.kind == "det" and self.text == "":
            raise EmptyDeterministicChunk(-1, "deterministic chunk text is empty")
        if self.kind == "var" and self.var is None:
            raise ValueError("variable chunk requires a VariableSpec")


@dataclass(frozen=True)
class Binding:
    """A decoded variable value plus its raw log-probability bookkeeping."""

    name: str
    value: str
    raw_logprob: float = 0.0
    token_count: int = 0


class Bindings:
    """Immutable ordered collection of variable bindings, keyed by name."""

    __slots__ = ("_items", "_by_name")

    def __init__(self, items: Iterable[Binding] = ()):
        items = tuple(items)
        by_name = {}
        for b in items:
            if b.name in by_name:
                raise ValueError(f"duplicate binding for {b.name!r}")
            by_name[b.name] = b
        self._items = items
        self._by_name = by_name

    @classmethod
    def from_values(cls, values: Mapping[str, str]) -> "Bindings":
        return cls(Binding(name=k, value=v) for k, v in values.items())

    def bind(self, binding: Binding) -> "Bindings":
        return Bindings(self._items + (binding,))

    def value(self, name: str) -> str:
        if name not in self._by_name:
            raise MissingBinding(name)
        return self._by_name[name].value

    def get(self, name: str) -> Binding | None:
        return self._by_name.get(name)

    def as_dict(self) -> dict[str, str]:
        return {b.name: b.value for b in self._items}

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[Binding]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Bindings) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        pairs = ", ".join(f"{b.name}={b.value!r}" for b in self._items)
        return f"Bindings({pairs})"


EMPTY_BINDINGS = Bindings()


@dataclass(frozen=True)
class Sketch:
    """A named, validated chunk sequence with at least one variable."""

    name: str
    chunks: tuple[Chunk, ...]

    def __post_init__(self):
        object.__setattr__(self, "chunks", tuple(self.chunks))
        if not any(c.is_var for c in self.chunks):
            raise SketchSyntaxError(0, "sketch has no variable chunks")
        seen: dict[str, int] = {}
        prev: Chunk | None = None
        for i, c in enumerate(self.chunks):
            if c.is_var:
                if prev is not None and prev.is_var and prev.var.name == c.var.name:
                    raise DuplicateAdjacentVariable(
                        i, f"adjacent variables share the name {c.var.name!r}"
                    )
                if c.var.name in seen:
                    # bindings are keyed by name, so every variable needs its own
                    raise SketchSyntaxError(
                        i, f"variable name {c.var.name!r} is reused"
                    )
                seen[c.var.name] = i
            prev = c

    @property
    def variables(self) -> tuple[VariableSpec, ...]:
        return tuple(c.var for c in self.chunks if c.is_var)


def _merge_dets(chunks: Sequence[Chunk]) -> tuple[Chunk, ...]:
    merged: list[Chunk] = []
    for c in chunks:
        if c.is_det and merged and merged[-1].is_det:
            merged[-1] = Chunk.det(merged[-1].text + c.text)
        else:
            merged.append(c)
    return tuple(merged)


def _require_keys(obj: dict, allowed: set[str], where: str, position: int) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SketchSyntaxError(position, f"unknown key(s) {unknown} in {where}")


def _parse_variable(obj: dict, position: int) -> VariableSpec:
    _require_keys(obj, {"kind", "name", "stop", "max_tokens", "constraint"},
                  "variable chunk", position)
    name = obj.get("name")
    if not isinstance(name, str):
        raise SketchSyntaxError(position, "variable chunk requires a string 'name'")
    stop = obj.get("stop", [])
    if not isinstance(stop, list) or any(not isinstance(s, str) for s in stop):
        raise SketchSyntaxError(position, "'stop' must be a list of strings")
    max_tokens = obj.get("max_tokens", DEFAULT_MAX_TOKENS)
    one_of = None
    constraint = obj.get("constraint")
    if constraint is not None:
        if not isinstance(constraint, dict):
            raise SketchSyntaxError(position, "'constraint' must be an object")
        _require_keys(constraint, {"one_of"}, "constraint", position)
        members = constraint.get("one_of")
        if not isinstance(members, list) or any(
            not isinstance(m, str) for m in members
        ):
            raise SketchSyntaxError(position, "'one_of' must be a list of strings")
        try:
            one_of = OneOf(tuple(members))
        except ValueError as e:
            raise SketchSyntaxError(position, str(e)) from e
    try:
        return VariableSpec(
            name=name, stop_phrases=tuple(stop), max_tokens=max_tokens, one_of=one_of
        )
    except ValueError as e:
        raise SketchSyntaxError(position, str(e)) from e


def parse_sketch(document: str) -> Sketch:
    """Parse a strict JSON sketch document.

    Unknown keys anywhere are rejected.  Adjacent deterministic chunks are
    merged.  Raises :class:`SketchSyntaxError` (or one of its subclasses)
    on any violation.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise SketchSyntaxError(e.pos, e.msg) from e
    if not isinstance(data, dict):
        raise SketchSyntaxError(0, "sketch document must be a JSON object")
    _require_keys(data, {"name", "chunks"}, "sketch", 0)
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise SketchSyntaxError(0, "sketch requires a non-empty string 'name'")
    chunk_objs = data.get("chunks")
    if not isinstance(chunk_objs, list):
        raise SketchSyntaxError(0, "'chunks' must be a list")
    chunks: list[Chunk] = []
    for i, obj in enumerate(chunk_objs):
        if not isinstance(obj, dict):
            raise SketchSyntaxError(i, "chunk must be an object")
        kind = obj.get("kind")
        if kind == "det":
            _require_keys(obj, {"kind", "text"}, "deterministic chunk", i)
            text = obj.get("text")
            if not isinstance(text, str):
                raise SketchSyntaxError(i, "deterministic chunk requires string 'text'")
            if text == "":
                raise EmptyDeterministicChunk(i, "deterministic chunk text is empty")
            chunks.append(Chunk.det(text))
        elif kind == "var":
            chunks.append(Chunk.variable(_parse_variable(obj, i)))
        else:
            raise SketchSyntaxError(i, f"chunk kind must be 'det' or 'var', got {kind!r}")
    return Sketch(name=name, chunks=_merge_dets(chunks))


def _chunk_to_obj(chunk: Chunk) -> dict:
    if chunk.is_det:
        return {"kind": "det", "text": chunk.text}
    v = chunk.var
    obj: dict = {"kind": "var", "name": v.name}
    if v.stop_phrases:
        obj["stop"] = list(v.stop_phrases)
    obj["max_tokens"] = v.max_tokens
    if v.one_of is not None:
        obj["constraint"] = {"one_of": list(v.one_of.members)}
    return obj


def serialize_sketch(sketch: Sketch) -> str:
    """Serialize to the same JSON document format accepted by parse_sketch."""
    data = {"name": sketch.name, "chunks": [_chunk_to_obj(c) for c in sketch.chunks]}
    return json.dumps(data, indent=2)


def load_sketch(path: str) -> Sketch:
    with open(path, "r", encoding="utf-8") as f:
        return parse_sketch(f.read())


def instantiate(sketch: Sketch, bindings: Bindings | Mapping[str, str]) -> str:
    """Substitute bound values into the template.

    Raises MissingBinding if a variable has no value.  Empty values are
    accepted; validation against constraints is a separate concern.
    """
    if not isinstance(bindings, Bindings):
        bindings = Bindings.from_values(bindings)
    parts: list[str] = []
    for c in sketch.chunks:
        if c.is_det:
            parts.append(c.text)
        else:
            parts.append(bindings.value(c.var.name))
    return "".join(parts)


class StaticSketchSource:
    """Chunk source backed by a fixed sketch."""

    def __init__(self, sketch: Sketch):
        self.sketch = sketch
        self.name = sketch.name

    def pending(self, bound: Bindings) -> tuple[Chunk, ...]:
        idx = 0
        seen_vars = 0
        chunks = self.sketch.chunks
        while idx < len(chunks) and seen_vars < len(bound):
            if chunks[idx].is_var:
                seen_vars += 1
            idx += 1
        run: list[Chunk] = []
        while idx < len(chunks):
            run.append(chunks[idx])
            if chunks[idx].is_var:
                break
            idx += 1
        return tuple(run)


class DynamicSketchSource:
    """Chunk source driven by a program.

    The program is a callable ``(bindings_dict, seed) -> sequence of chunks``
    returning the next run: zero or more deterministic chunks optionally
    followed by one variable chunk.  An empty return means the template is
    complete.  The program must be a pure function of its arguments so that
    branching decoders can replay it independently per hypothesis.
    """

    def __init__(
        self,
        program: Callable[[Mapping[str, str], int], Sequence[Chunk]],
        seed: int = 0,
        name: str = "dynamic",
    ):
        self.program = program
        self.seed = seed
        self.name = name

    def pending(self, bound: Bindings) -> tuple[Chunk, ...]:
        try:
            run = tuple(self.program(bound.as_dict(), self.seed))
        except Exception as e:  # noqa: BLE001 - program faults become typed errors
            raise DynamicProgramError(f"dynamic program failed: {e!r}") from e
        return run


SketchSource = StaticSketchSource | DynamicSketchSource


def next_pending_chunks(source, bound: Bindings) -> tuple[Chunk, ...]:
    """Return the next run of chunks to decode.

    The run is a maximal sequence of deterministic chunks followed by at
    most one variable chunk.  An empty run means the template is complete.
    A run consisting only of deterministic chunks is terminal: callers must
    force those chunks and stop, without consulting the source again.
    """
    run = source.pending(bound)
    for i, c in enumerate(run):
        if not isinstance(c, Chunk):
            raise DynamicProgramError(f"run element {i} is not a Chunk: {c!r}")
        if c.is_var and i != len(run) - 1:
            raise DynamicProgramError(
                "variable chunk must be the last element of a pending run"
            )
    return run


def as_source(sketch_or_source):
    """Coerce a Sketch into a source; pass sources through unchanged."""
    if isinstance(sketch_or_source, Sketch):
        return StaticSketchSource(sketch_or_source)
    return sketch_or_source
