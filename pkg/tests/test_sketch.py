"""Template parsing, serialization, instantiation, and chunk sources."""
import random

import pytest

from conftest import random_sketch
from sketchdec.errors import (
    DuplicateAdjacentVariable,
    DynamicProgramError,
    EmptyDeterministicChunk,
    MissingBinding,
    SketchSyntaxError,
)
from sketchdec.sketch import (
    DEFAULT_MAX_TOKENS,
    Binding,
    Bindings,
    Chunk,
    DynamicSketchSource,
    OneOf,
    Sketch,
    StaticSketchSource,
    VariableSpec,
    instantiate,
    next_pending_chunks,
    parse_sketch,
    serialize_sketch,
)

LIST4_DOC = """
{"name": "list4", "chunks": [
  {"kind": "det", "text": "- "},
  {"kind": "var", "name": "ITEM1", "stop": ["\\n"], "max_tokens": 8},
  {"kind": "det", "text": "- Frisbee\\n- "},
  {"kind": "var", "name": "ITEM3", "stop": ["\\n"], "max_tokens": 8}
]}
"""


def test_parse_list_template():
    sketch = parse_sketch(LIST4_DOC)
    assert sketch.name == "list4"
    kinds = [c.kind for c in sketch.chunks]
    assert kinds == ["det", "var", "det", "var"]
    assert sketch.chunks[0].text == "- "
    item1 = sketch.chunks[1].var
    assert item1.name == "ITEM1"
    assert item1.stop_phrases == ("\n",)
    assert item1.max_tokens == 8
    assert item1.one_of is None
    assert [v.name for v in sketch.variables] == ["ITEM1", "ITEM3"]


def test_parse_defaults():
    sketch = parse_sketch('{"name": "s", "chunks": [{"kind": "var", "name": "X"}]}')
    spec = sketch.chunks[0].var
    assert spec.stop_phrases == ()
    assert spec.max_tokens == DEFAULT_MAX_TOKENS
    assert spec.one_of is None


def test_parse_one_of_constraint():
    doc = (
        '{"name": "s", "chunks": [{"kind": "var", "name": "X",'
        ' "constraint": {"one_of": ["b", "a"]}}]}'
    )
    spec = parse_sketch(doc).chunks[0].var
    # canonical member order
    assert spec.one_of.members == ("a", "b")


def test_adjacent_deterministic_chunks_merge():
    doc = (
        '{"name": "s", "chunks": [{"kind": "det", "text": "a"},'
        ' {"kind": "det", "text": "b"}, {"kind": "var", "name": "X"}]}'
    )
    sketch = parse_sketch(doc)
    assert len(sketch.chunks) == 2
    assert sketch.chunks[0].text == "ab"


@pytest.mark.parametrize(
    "doc",
    [
        "not json",
        '["not", "an", "object"]',
        '{"chunks": []}',
        '{"name": "", "chunks": []}',
        '{"name": "s", "chunks": [], "extra": 1}',
        '{"name": "s", "chunks": [{"kind": "det", "text": "a"}]}',
        '{"name": "s", "chunks": [{"kind": "wat"}]}',
        '{"name": "s", "chunks": [{"kind": "det"}]}',
        '{"name": "s", "chunks": [{"kind": "det", "text": "a", "x": 1}]}',
        '{"name": "s", "chunks": [{"kind": "var"}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "9bad"}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X", "stop": "\\n"}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X", "max_tokens": 0}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X", "max_tokens": true}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X", "constraint": {}}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X",'
        ' "constraint": {"one_of": []}}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X",'
        ' "constraint": {"one_of": ["a", "a"]}}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X"},'
        ' {"kind": "var", "name": "X"}]}',
        '{"name": "s", "chunks": [{"kind": "var", "name": "X"},'
        ' {"kind": "det", "text": "-"}, {"kind": "var", "name": "X"}]}',
    ],
)
def test_parse_rejects_malformed_documents(doc):
    with pytest.raises(SketchSyntaxError):
        parse_sketch(doc)


def test_empty_deterministic_chunk_rejected():
    with pytest.raises(EmptyDeterministicChunk):
        parse_sketch('{"name": "s", "chunks": [{"kind": "det", "text": ""}]}')
    with pytest.raises(EmptyDeterministicChunk):
        Chunk.det("")


def test_adjacent_same_name_variables_rejected():
    with pytest.raises(DuplicateAdjacentVariable):
        Sketch(
            name="s",
            chunks=(
                Chunk.variable(VariableSpec("X")),
                Chunk.variable(VariableSpec("X")),
            ),
        )


def test_adjacent_distinct_variables_allowed():
    sketch = Sketch(
        name="s",
        chunks=(
            Chunk.variable(VariableSpec("X")),
            Chunk.variable(VariableSpec("Y")),
        ),
    )
    assert len(sketch.variables) == 2


def test_round_trip_random_sketches():
    for seed in range(40):
        sketch = random_sketch(random.Random(seed))
        assert parse_sketch(serialize_sketch(sketch)) == sketch


def test_one_of_validation():
    with pytest.raises(ValueError):
        OneOf(())
    with pytest.raises(ValueError):
        OneOf(("a", ""))
    with pytest.raises(ValueError):
        OneOf(("a", "a"))
    assert OneOf(("b", "a")).members == ("a", "b")


def test_variable_spec_validation():
    with pytest.raises(ValueError):
        VariableSpec("not an identifier")
    with pytest.raises(ValueError):
        VariableSpec("X", stop_phrases=("",))
    with pytest.raises(ValueError):
        VariableSpec("X", max_tokens=0)


def test_instantiate_substitutes_values():
    sketch = parse_sketch(LIST4_DOC)
    text = instantiate(sketch, {"ITEM1": "Camera\n", "ITEM3": "Snacks\n"})
    assert text == "- Camera\n- Frisbee\n- Snacks\n"


def test_instantiate_missing_binding():
    sketch = parse_sketch(LIST4_DOC)
    with pytest.raises(MissingBinding):
        instantiate(sketch, {"ITEM1": "Camera\n"})


def test_instantiate_accepts_empty_values():
    sketch = parse_sketch(LIST4_DOC)
    assert instantiate(sketch, {"ITEM1": "", "ITEM3": ""}) == "- - Frisbee\n- "


def test_bindings_collection():
    b = Bindings.from_values({"A": "1", "B": "2"})
    assert b.value("A") == "1"
    assert b.as_dict() == {"A": "1", "B": "2"}
    assert "A" in b and "C" not in b
    assert [x.name for x in b] == ["A", "B"]
    assert len(b) == 2
    with pytest.raises(MissingBinding):
        b.value("C")
    with pytest.raises(ValueError):
        Bindings((Binding("A", "1"), Binding("A", "2")))
    assert b.bind(Binding("C", "3")).value("C") == "3"


def test_static_source_pending_runs():
    sketch = parse_sketch(LIST4_DOC)
    source = StaticSketchSource(sketch)
    first = next_pending_chunks(source, Bindings())
    assert [c.kind for c in first] == ["det", "var"]
    assert first[1].var.name == "ITEM1"
    bound = Bindings.from_values({"ITEM1": "Camera\n"})
    second = next_pending_chunks(source, bound)
    assert second[1].var.name == "ITEM3"
    done = Bindings.from_values({"ITEM1": "Camera\n", "ITEM3": "Snacks\n"})
    assert next_pending_chunks(source, done) == ()


def test_static_source_trailing_det_run():
    sketch = parse_sketch(
        '{"name": "s", "chunks": [{"kind": "var", "name": "X"},'
        ' {"kind": "det", "text": "tail"}]}'
    )
    source = StaticSketchSource(sketch)
    run = next_pending_chunks(source, Bindings.from_values({"X": "v"}))
    assert [c.kind for c in run] == ["det"]
    assert run[0].text == "tail"


def branching_program(values, seed):
    # second variable depends on the first value; seed feeds the det text
    if "A" not in values:
        return [Chunk.det(f"s{seed}:"), Chunk.variable(VariableSpec("A", max_tokens=1))]
    if "B" not in values:
        members = ("x",) if values["A"] == "a" else ("y",)
        return [
            Chunk.variable(
                VariableSpec("B", one_of=OneOf(members), max_tokens=2)
            )
        ]
    return []


def test_dynamic_source_replays_identically():
    source = DynamicSketchSource(branching_program, seed=3)
    bound = Bindings.from_values({"A": "a"})
    first = source.pending(bound)
    second = source.pending(bound)
    assert first == second
    assert first[0].var.one_of.members == ("x",)
    other = source.pending(Bindings.from_values({"A": "z"}))
    assert other[0].var.one_of.members == ("y",)
    assert source.pending(Bindings.from_values({"A": "a", "B": "x"})) == ()


def test_dynamic_source_seed_changes_stream():
    a = DynamicSketchSource(branching_program, seed=1).pending(Bindings())
    b = DynamicSketchSource(branching_program, seed=2).pending(Bindings())
    assert a[0].text == "s1:" and b[0].text == "s2:"


def test_dynamic_program_faults_become_typed_errors():
    def broken(values, seed):
        raise RuntimeError("boom")

    with pytest.raises(DynamicProgramError):
        DynamicSketchSource(broken).pending(Bindings())


def test_dynamic_run_shape_is_validated():
    bad_element = DynamicSketchSource(lambda v, s: ["not a chunk"])
    with pytest.raises(DynamicProgramError):
        next_pending_chunks(bad_element, Bindings())

    var_not_last = DynamicSketchSource(
        lambda v, s: [
            Chunk.variable(VariableSpec("A")),
            Chunk.det("tail"),
        ]
    )
    with pytest.raises(DynamicProgramError):
        next_pending_chunks(var_not_last, Bindings())
