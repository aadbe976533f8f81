"""
Why greedy decoding repeats itself
==================================

A packing-list template asks for items 1 and 3; items 2 and 4 are already
fixed in the text.  The most likely single item is also the one the fixed
text already used, so a greedy decoder repeats it and then pays dearly for
the forced "Frisbee" continuation it made implausible.  Searching a few
alternatives per variable avoids the trap.
"""
from sketchdec.decoders import decode_argmax, decode_var
from sketchdec.tasks import fig1

backend = fig1.fig1_backend()
sketch = fig1.fig1_sketch()

## Greedy: each variable takes its locally best continuation
greedy = decode_argmax(sketch, backend)
print("greedy list:")
print(greedy.text)

## The same template searched with two candidates per variable
searched = decode_var(sketch, backend, width=2)
print("searched list:")
print(searched.text)

## The searched list avoids the duplicate and is more probable overall
for label, result in (("greedy", greedy), ("searched", searched)):
    items = fig1.parse_items(result.text)
    print(
        f"{label:9} duplicate={fig1.has_duplicate(items)!s:5}"
        f" raw={result.best.raw_score:9.4f}"
    )

## The benchmark wrapper runs greedy plus both search variants
print()
for row in fig1.run_fig1_task():
    print(
        f"{row.decoder:7} width={row.width}"
        f" duplicate={row.duplicate!s:5} normalized={row.normalized_score:.4f}"
    )
