"""Shared test helpers: randomized instrumentation scripts and small builders."""

from __future__ import annotations

import random

from tracegraph.graph import ExecutionGraph
from tracegraph.recorder import IdentityStrategy, TraceContext, VarConfig

WORDS = ["amber", "basket", "cairn", "delta", "ember", "fjord", "gully", "harrow",
         "islet", "jetty", "kiln", "lagoon", "marsh", "nectar", "osprey", "pylon",
         "quartz", "ridge", "sluice", "thicket"]

KEY_STRATEGY = IdentityStrategy("key", lambda value, text: value["key"])


def keyed_var(key: str, text: str, category: str = "note") -> tuple[dict, VarConfig]:
    return ({"key": key, "text": text},
            VarConfig(category=category, identity="key", renderer="field:text"))


def random_graph(seed: int, max_actions: int = 40) -> ExecutionGraph:
    """A valid graph from a random but always-legal instrumentation script."""
    rng = random.Random(seed)
    ctx = TraceContext(graph_id=f"rand{seed}")
    ctx.register_identity(KEY_STRATEGY)
    keys = [f"slot{i}" for i in range(rng.randint(2, 8))]
    refs: list[tuple[str, int]] = []

    def snap():
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 12)))
        return keyed_var(rng.choice(keys), text,
                         category=rng.choice(["raw_message", "memory_unit", "note"]))

    in_session = False
    in_op = False
    for _ in range(max_actions):
        r = rng.random()
        if not in_session:
            ctx.begin_session(rng.choice(["alpha", "beta", "gamma"]))
            in_session = True
            continue
        if not in_op:
            if r < 0.15:
                ctx.end_session()
                in_session = False
            elif r < 0.45:
                refs.append(ctx.comment_variable(*snap()))
            else:
                ctx.begin_operation(rng.choice(["parse", "join", "emit", "filter"]),
                                    category=rng.choice(["stage_a", "stage_b"]))
                in_op = True
            continue
        if r < 0.25:
            ctx.end_operation()
            in_op = False
        elif r < 0.45:
            refs.append(ctx.comment_variable(*snap()))
        elif refs and r < 0.85:
            src = rng.choice(refs) if rng.random() < 0.7 else snap()
            dst = rng.choice(refs) if rng.random() < 0.5 else snap()
            refs.append(ctx.comment_link(src, dst).dst)
        else:
            refs.append(ctx.comment_link(snap(), snap()).dst)
    if in_op:
        ctx.end_operation()
    return ctx.finish()


def chain_graph(n_ops: int = 3) -> ExecutionGraph:
    """o1 -> o2 -> ... -> oN, each passing one value forward."""
    ctx = TraceContext(graph_id="chain")
    ctx.register_identity(KEY_STRATEGY)
    ctx.begin_session("main")
    ref = ctx.comment_variable(*keyed_var("v0", "start"))
    for i in range(n_ops):
        ctx.begin_operation(f"step{i + 1}", op_id=f"o{i + 1}")
        ref = ctx.comment_link(ref, keyed_var(f"v{i + 1}", f"value {i + 1}")).dst
        ctx.end_operation()
    return ctx.finish()


def diamond_graph() -> ExecutionGraph:
    """o1 fans out to o2 and o3; o4 joins them."""
    ctx = TraceContext(graph_id="diamond")
    ctx.register_identity(KEY_STRATEGY)
    ctx.begin_session("main")
    root = ctx.comment_variable(*keyed_var("root", "origin"))
    ctx.begin_operation("split", op_id="o1")
    left = ctx.comment_link(root, keyed_var("left", "left branch")).dst
    right = ctx.comment_link(root, keyed_var("right", "right branch")).dst
    ctx.end_operation()
    ctx.begin_operation("work_left", op_id="o2")
    left_out = ctx.comment_link(left, keyed_var("left_out", "left result")).dst
    ctx.end_operation()
    ctx.begin_operation("work_right", op_id="o3")
    right_out = ctx.comment_link(right, keyed_var("right_out", "right result")).dst
    ctx.end_operation()
    ctx.begin_operation("join", op_id="o4")
    ctx.comment_link(left_out, keyed_var("final", "joined"))
    ctx.comment_link(right_out, ("final", 0))
    ctx.end_operation()
    return ctx.finish()
