"""
Sketches, token tables, and forced scoring
==========================================

A sketch interleaves deterministic text with named variable slots.  A
table backend assigns next-token probabilities per context prefix, which
is all the decoding engine ever asks of a language model.
"""
import math

from sketchdec.lm import TableLM, Vocabulary
from sketchdec.sketch import instantiate, parse_sketch, serialize_sketch

## A sketch is plain JSON: det chunks carry literal text, var chunks a name
document = """
{
  "name": "greeting",
  "chunks": [
    {"kind": "det", "text": "Dear "},
    {"kind": "var", "name": "WHO", "max_tokens": 3,
     "constraint": {"one_of": ["Ada", "Alan"]}},
    {"kind": "det", "text": ", hello!"}
  ]
}
"""
sketch = parse_sketch(document)
print("sketch:", sketch.name)
for chunk in sketch.chunks:
    if chunk.is_var:
        print("  var", chunk.var.name, "one of", chunk.var.one_of.members)
    else:
        print("  det", repr(chunk.text))

## Filling the variables renders the final text
print()
print("instantiated:", repr(instantiate(sketch, {"WHO": "Ada"})))

## The round trip through JSON is exact
assert parse_sketch(serialize_sketch(sketch)) == sketch

## A backend is a distribution table over a fixed vocabulary.  Index 0 is
## the end-of-sequence token and renders as the empty string.
vocab = Vocabulary(("", "a", "b", "ab"), eos_index=0)
backend = TableLM(
    vocab,
    {"a": [0.1, 0.2, 0.6, 0.1]},
    default_row=[0.05, 0.45, 0.30, 0.20],
)

## Token ids for a known string: the segmenter is greedy longest-match
tokens = backend.tokenize("aab")
print()
print("tokenize('aab') ->", tokens, [vocab.tokens[t] for t in tokens])

## The distribution after context "a" comes from the matching table row
dist = backend.next_distribution(backend.tokenize("a"))
for token, logprob in dist.entries:
    print(f"  p({vocab.tokens[token]!r} | 'a') = {math.exp(logprob):.2f}")

## Forcing a continuation sums the same conditionals the decoder would see
logprobs = backend.score_forced((), tokens)
print()
print("forced logprobs:", [round(lp, 4) for lp in logprobs])
print("joint log p    :", round(sum(logprobs), 4))
