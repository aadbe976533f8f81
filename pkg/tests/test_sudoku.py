"""Digit-placement grid task: trap pairs punish greedy decoding."""
import pytest

from sketchdec.decoders import decode_argmax, decode_beamvar
from sketchdec.sketch import Binding, Bindings
from sketchdec.tasks import sudoku


def test_generated_instances_are_valid():
    for seed in range(5):
        for blanks in range(1, 7):
            instance, sketch, backend = sudoku.gen_sudoku(seed, blanks)
            assert len(instance.cells) == 9
            assert len(instance.blanks) == blanks
            assert sorted(instance.solution) == sorted(sudoku.DIGITS)
            # the recorded solution actually fills the blanks
            for pos, cell in enumerate(instance.cells):
                if cell is not None:
                    assert instance.solution[pos] == cell


def test_blank_count_validation():
    with pytest.raises(ValueError):
        sudoku.gen_sudoku(0, 0)
    with pytest.raises(ValueError):
        sudoku.gen_sudoku(0, 7)


def test_sketch_variables_match_blanks():
    instance, sketch, _ = sudoku.gen_sudoku(3, 4)
    names = [c.var.name for c in sketch.chunks if c.is_var]
    assert names == [f"C{pos + 1}" for pos in instance.blanks]
    for chunk in sketch.chunks:
        if chunk.is_var:
            assert chunk.var.one_of.members == tuple(sorted(sudoku.DIGITS))
            assert chunk.var.max_tokens == 1


def test_solved_checker_is_independent():
    instance, _, _ = sudoku.gen_sudoku(1, 2)
    right = Bindings(
        tuple(
            Binding(name=f"C{pos + 1}", value=instance.solution[pos])
            for pos in instance.blanks
        )
    )
    assert sudoku.solved(instance, right)
    # swap one blank to a digit that is already fixed elsewhere
    taken = next(c for c in instance.cells if c is not None)
    wrong = Bindings(
        (
            Binding(name=f"C{instance.blanks[0] + 1}", value=taken),
            *(
                Binding(name=f"C{pos + 1}", value=instance.solution[pos])
                for pos in instance.blanks[1:]
            ),
        )
    )
    assert not sudoku.solved(instance, wrong)
    assert not sudoku.solved(instance, Bindings())  # missing blanks


def test_suite_composition():
    instances = sudoku.suite(seed=0)
    assert [len(i.blanks) for i, _, _ in instances] == list(sudoku.SUITE_BLANKS)


def test_greedy_falls_into_the_trap():
    instance, sketch, backend = sudoku.gen_sudoku(7, 2)
    greedy = decode_argmax(sketch, backend)
    assert not sudoku.solved(instance, greedy.bindings)
    searched = decode_beamvar(sketch, backend, width=2)
    assert sudoku.solved(instance, searched.bindings)


def test_task_report_counts():
    reports = {r.decoder: r for r in sudoku.run_sudoku_task()}
    assert reports["argmax"].solved_count == 1
    assert reports["var"].solved_count == 10
    assert reports["beamvar"].solved_count == 10
    assert all(r.total == 10 for r in reports.values())
    assert (
        reports["beamvar"].mean_normalized_score
        > reports["argmax"].mean_normalized_score
    )


def test_reordered_sketch_shape():
    instance, _, _ = sudoku.gen_sudoku(2, 3)
    sketch = sudoku.reordered_sketch(instance)
    assert sketch.chunks[0].is_det
    names = [c.var.name for c in sketch.chunks if c.is_var]
    assert names == [f"C{pos + 1}" for pos in instance.blanks]
    assert sketch.chunks[-1].text.endswith("\n")
