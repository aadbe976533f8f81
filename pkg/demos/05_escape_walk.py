"""
Escaping a dungeon with a dynamic sketch
========================================

The template grows as the walk unfolds: after each chosen hallway the
environment appends the next room description, so later chunks depend on
earlier variable values.  Greedy wanders; width-2 pooled search heads for
the exit.
"""
from sketchdec.decoders import DecoderConfig, decode
from sketchdec.tasks import dungeon

instance = dungeon.suite(0)[0]
print("rooms:", ", ".join(f"{i}:{name}" for i, name in enumerate(instance.rooms)))
print("start:", instance.start, " exit:", instance.exit)
print("shortest escape:", instance.shortest, "steps")

backend = dungeon.dungeon_backend(instance)

## Greedy transcript: the walker chases locally plausible room numbers
greedy = decode(
    dungeon.dungeon_source(instance), backend, DecoderConfig(kind="argmax", width=1)
)
print()
print("--- greedy walk " + "-" * 24)
print(greedy.text)

## Searched transcript: two candidate moves per step, scored to the end
searched = decode(
    dungeon.dungeon_source(instance), backend, DecoderConfig(kind="beamvar", width=2)
)
print("--- width-2 walk " + "-" * 23)
print(searched.text)

## Steps actually taken, replayed on the graph
for label, result in (("greedy", greedy), ("searched", searched)):
    actions = [b.value for b in result.bindings]
    steps = dungeon.replay_actions(instance, actions)
    print(f"{label:9} actions={actions} -> {steps} steps")

## Suite means over ten generated dungeons
print()
for report in dungeon.run_dungeon_task():
    mean = "-" if report.mean_steps is None else f"{report.mean_steps:.1f}"
    print(
        f"{report.decoder:7} width={report.width}"
        f" escaped={report.successes}/{report.total} mean steps={mean}"
    )
