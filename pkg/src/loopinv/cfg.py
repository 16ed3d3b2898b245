"""Control-flow graph construction and its JSON wire format.

The graph is intentionally small: one entry, one loop-head, one exit, plus
basic blocks (runs of simple statements) and branch nodes for if/else.  Node
text holds reparseable source: statement sequences for basic blocks,
conditions for branch and loop-head nodes, empty for entry/exit.

JSON schema:
    {"nodes":[{"id":int,"kind":str,"text":str}],
     "edges":[{"src":int,"dst":int,"label":str|null}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .ast_nodes import Assign, Assume, Havoc, If, Program, Skip, Stmt, expr_to_c, stmt_to_c, stmt_list

NODE_KINDS = ("entry", "basic-block", "branch", "loop-head", "exit")


@dataclass(frozen=True)
class CfgNode:
    id: int
    kind: str
    text: str


@dataclass(frozen=True)
class CfgEdge:
    src: int
    dst: int
    label: str | None = None


@dataclass(frozen=True)
class Cfg:
    nodes: tuple[CfgNode, ...]
    edges: tuple[CfgEdge, ...]

    def node(self, node_id: int) -> CfgNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def successors(self, node_id: int) -> list[CfgEdge]:
        return [e for e in self.edges if e.src == node_id]


class CfgInvariantError(ValueError):
    pass


def validate_cfg(cfg: Cfg) -> None:
    """Check the structural invariants; raises CfgInvariantError."""
    ids = [n.id for n in cfg.nodes]
    if len(set(ids)) != len(ids):
        raise CfgInvariantError("duplicate node ids")
    by_kind: dict[str, list[CfgNode]] = {}
    for n in cfg.nodes:
        if n.kind not in NODE_KINDS:
            raise CfgInvariantError(f"unknown node kind {n.kind!r}")
        by_kind.setdefault(n.kind, []).append(n)
    if len(by_kind.get("entry", [])) != 1:
        raise CfgInvariantError("expected exactly one entry node")
    if len(by_kind.get("exit", [])) != 1:
        raise CfgInvariantError("expected exactly one exit node")
    if len(by_kind.get("loop-head", [])) != 1:
        raise CfgInvariantError("expected exactly one loop-head node")
    known = set(ids)
    for e in cfg.edges:
        if e.src not in known or e.dst not in known:
            raise CfgInvariantError(f"edge {e} references an unknown node")

    entry = by_kind["entry"][0]
    reached = {entry.id}
    frontier = [entry.id]
    while frontier:
        nxt = []
        for e in cfg.edges:
            if e.src in frontier and e.dst not in reached:
                reached.add(e.dst)
                nxt.append(e.dst)
        frontier = nxt
    if reached != known:
        raise CfgInvariantError(f"unreachable nodes: {sorted(known - reached)}")

    head = by_kind["loop-head"][0]
    out = {e.label: e for e in cfg.edges if e.src == head.id}
    if set(out) != {"true", "false"}:
        raise CfgInvariantError("loop-head must have exactly a true and a false edge")


class _Builder:
    def __init__(self) -> None:
        self.nodes: list[CfgNode] = []
        self.edges: list[CfgEdge] = []

    def add_node(self, kind: str, text: str) -> int:
        node_id = len(self.nodes)
        self.nodes.append(CfgNode(node_id, kind, text))
        return node_id

    def connect(self, srcs: list[tuple[int, str | None]], dst: int) -> None:
        for src, label in srcs:
            self.edges.append(CfgEdge(src, dst, label))

    def build_stmt(self, stmt: Stmt, preds: list[tuple[int, str | None]]) -> list[tuple[int, str | None]]:
        """Wire a statement subgraph after preds; returns the new dangling exits."""
        run: list[Stmt] = []

        def flush(preds_: list[tuple[int, str | None]]) -> list[tuple[int, str | None]]:
            if not run:
                return preds_
            text = " ".join(stmt_to_c(s) for s in run)
            run.clear()
            nid = self.add_node("basic-block", text)
            self.connect(preds_, nid)
            return [(nid, None)]

        for s in stmt_list(stmt):
            if isinstance(s, (Assign, Assume, Havoc)):
                run.append(s)
            elif isinstance(s, If):
                preds = flush(preds)
                branch = self.add_node("branch", expr_to_c(s.cond))
                self.connect(preds, branch)
                then_exits = self.build_stmt(s.then, [(branch, "true")])
                else_exits = self.build_stmt(s.orelse, [(branch, "false")])
                preds = then_exits + else_exits
            elif isinstance(s, Skip):
                continue
            else:  # pragma: no cover - no other Stmt variants exist
                raise TypeError(f"unexpected statement {s!r}")
        return flush(preds)


def build_cfg(program: Program) -> Cfg:
    """Build the CFG of a valid Program; the result satisfies all invariants."""
    b = _Builder()
    entry = b.add_node("entry", "")
    preds: list[tuple[int, str | None]] = [(entry, None)]
    if not isinstance(program.prefix, Skip):
        preds = b.build_stmt(program.prefix, preds)

    head = b.add_node("loop-head", expr_to_c(program.guard))
    b.connect(preds, head)

    if isinstance(program.body, Skip):
        body_node = b.add_node("basic-block", "")
        b.connect([(head, "true")], body_node)
        body_exits: list[tuple[int, str | None]] = [(body_node, None)]
    else:
        body_exits = b.build_stmt(program.body, [(head, "true")])
        if body_exits == [(head, "true")]:  # body of skips only
            body_node = b.add_node("basic-block", "")
            b.connect([(head, "true")], body_node)
            body_exits = [(body_node, None)]
    b.connect(body_exits, head)

    exit_node = b.add_node("exit", "")
    b.connect([(head, "false")], exit_node)

    cfg = Cfg(tuple(b.nodes), tuple(sorted(b.edges, key=_edge_sort_key)))
    validate_cfg(cfg)
    return cfg


def _edge_sort_key(e: CfgEdge) -> tuple:
    return (e.src, e.dst, e.label or "")


def cfg_to_json(cfg: Cfg) -> str:
    """Deterministic JSON rendering (stable key order, nodes sorted by id)."""
    doc = {
        "nodes": [
            {"id": n.id, "kind": n.kind, "text": n.text}
            for n in sorted(cfg.nodes, key=lambda n: n.id)
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "label": e.label}
            for e in sorted(cfg.edges, key=_edge_sort_key)
        ],
    }
    return json.dumps(doc, indent=2)


def cfg_from_json(text: str) -> Cfg:
    doc = json.loads(text)
    nodes = tuple(CfgNode(n["id"], n["kind"], n["text"]) for n in doc["nodes"])
    edges = tuple(CfgEdge(e["src"], e["dst"], e.get("label")) for e in doc["edges"])
    cfg = Cfg(nodes, tuple(sorted(edges, key=_edge_sort_key)))
    validate_cfg(cfg)
    return cfg
