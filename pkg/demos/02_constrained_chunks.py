"""
Token masks for constrained variable chunks
===========================================

A one-of constraint restricts a variable to a closed set of values.  At
every step the mask admits exactly the tokens that keep the partial value
a prefix of some member; the walk below makes that visible.
"""
from sketchdec.constraints import MaskState, advance, compute_mask
from sketchdec.lm import Vocabulary
from sketchdec.sketch import OneOf, VariableSpec

vocab = Vocabulary(("", "a", "b", "n", "t", "an", "ba"), eos_index=0)
spec = VariableSpec(
    "ANIMAL",
    one_of=OneOf(("bat", "ban", "ant")),
    max_tokens=5,
)

## Walk the constraint, always taking the longest admitted token
state = MaskState.start(spec)
print("members:", spec.one_of.members)
while True:
    mask = compute_mask(state, vocab)
    texts = sorted(vocab.tokens[t] or "<eos>" for t in mask)
    print(f"value {state.partial_value!r:7} admits {texts}")
    token = max(mask, key=lambda t: (len(vocab.tokens[t]), vocab.tokens[t]))
    state, verdict = advance(state, token, vocab, spec.stop_phrases, spec.max_tokens)
    print(f"  take {vocab.tokens[token]!r} -> {verdict.status}")
    if verdict.status != "continue":
        break
print("final value:", repr(state.partial_value))

## Tokens that would leave the member set are simply absent from the mask
state = MaskState.start(spec)
mask = compute_mask(state, vocab)
assert vocab.tokens.index("n") not in mask  # no member starts with n
assert vocab.tokens.index("an") in mask  # "ant" does start with an

## A vocabulary that cannot spell the remaining members is a dead end:
## without "t" the partial value "an" admits nothing
from sketchdec.errors import DeadEnd

toothless = Vocabulary(("", "a", "b", "n", "an", "ba"), eos_index=0)
state = MaskState.start(spec)
state, _ = advance(state, 4, toothless, spec.stop_phrases, spec.max_tokens)
try:
    compute_mask(state, toothless)
except DeadEnd as e:
    print("dead end:", e)

## Unconstrained chunks instead end on a stop phrase
free = VariableSpec("LINE", stop_phrases=("\n",), max_tokens=8)
state = MaskState.start(free)
for piece in ("a", "b", "\n"):
    token = vocab.tokens.index(piece) if piece != "\n" else None
    if token is None:
        break
    state, verdict = advance(state, token, vocab, free.stop_phrases, free.max_tokens)
print()
print("unconstrained after 'ab':", repr(state.partial_value), "-", verdict.status)

## The stop phrase fires as soon as it appears inside the value, even if
## the final token carried extra characters past it
wide = Vocabulary(("", "x", "y\nz"), eos_index=0)
state = MaskState.start(free)
state, verdict = advance(state, 1, wide, free.stop_phrases, free.max_tokens)
state, verdict = advance(state, 2, wide, free.stop_phrases, free.max_tokens)
print("stop-phrase token kept whole:", repr(state.partial_value), "-", verdict.status)
