"""Decoding-tree capture: every expansion, pruning, and completion event.

Nodes are emitted in (step, pool, rank) order with sequential ids, so the
NDJSON rendering is deterministic for a given decode.
"""
from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class TraceNode:
    id: int
    parent: int | None
    token_text: str
    logprob: float
    norm_score: float
    pool: int | None
    status: str  # "expanded" | "pruned" | "done" | "forced"


@dataclass(frozen=True)
class DecodingTree:
    nodes: tuple[TraceNode, ...]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def to_ndjson(self) -> str:
        lines = []
        for n in self.nodes:
            lines.append(
                json.dumps(
                    {
                        "id": n.id,
                        "parent": n.parent,
                        "token_text": n.token_text,
                        "logprob": n.logprob,
                        "norm_score": n.norm_score,
                        "pool": n.pool,
                        "status": n.status,
                    },
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + "\n"


class TraceRecorder:
    """Collects trace nodes during a decode; the root is created eagerly."""

    def __init__(self):
        self._nodes: list[TraceNode] = [
            TraceNode(
                id=0,
                parent=None,
                token_text="",
                logprob=0.0,
                norm_score=0.0,
                pool=0,
                status="expanded",
            )
        ]

    def add(
        self,
        parent: int,
        token_text: str,
        logprob: float,
        norm_score: float,
        pool: int | None,
        status: str,
    ) -> int:
        node_id = len(self._nodes)
        self._nodes.append(
            TraceNode(
                id=node_id,
                parent=parent,
                token_text=token_text,
                logprob=logprob,
                norm_score=norm_score,
                pool=pool,
                status=status,
            )
        )
        return node_id

    def tree(self) -> DecodingTree:
        return DecodingTree(nodes=tuple(self._nodes))


class NullRecorder:
    """Recorder stand-in that drops every event."""

    def add(self, parent, token_text, logprob, norm_score, pool, status) -> int:
        return 0

    def tree(self) -> None:
        return None
