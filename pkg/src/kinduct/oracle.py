"""Explicit-state enumeration over small domains.

An independent ground-truth engine used only by the test suite: it
explores every execution of a GotoProgram by branching on each
nondeterministic draw over the full domain of its type (hence the domain
width cap), deduplicating on (pc, store, counters).

With a bound k, paths are cut when any loop activation takes its guard
more than k times; `sigma_failures` counts those cut paths, which is
exactly the set of paths on which an unwinding assertion at depth k
fails.  So

    base_case_holds(g, k)   == no assertion violation within the bound
    forward_holds(g, k)     == base_case_holds and sigma_failures == 0

matching what the unwound BASE and FORWARD formulas check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .frontend import IntType
from .goto_ir import GotoProgram, loops_enclosing
from .interp import eval_expr


class OracleLimit(Exception):
    """The fixture is too large for exhaustive enumeration."""


class _NeedDraw(Exception):
    def __init__(self, key, ty):
        self.key = key
        self.ty = ty


class _Asker:
    def __init__(self, pending: dict):
        self.pending = pending

    def draw(self, nid, ctx, ty: IntType, kind: str) -> int:
        key = (nid, ctx)
        if key not in self.pending:
            raise _NeedDraw(key, ty)
        return self.pending[key]


@dataclass
class Exploration:
    violations: list = field(default_factory=list)  # property locations hit
    sigma_failures: int = 0
    blocked: int = 0
    completed: int = 0
    states: int = 0

    @property
    def violated(self) -> bool:
        return bool(self.violations)


def explore(g: GotoProgram, k: int | None = None, max_states: int = 500_000,
            max_draw_width: int = 8) -> Exploration:
    enclosing = loops_enclosing(g)
    heads: dict = {}
    for loop in g.loops:
        heads.setdefault(loop.head, []).append(loop)
    inner = {
        loop.loop_id: [o.loop_id for o in g.loops
                       if o is not loop and o.head >= loop.head
                       and o.backjump <= loop.backjump]
        for loop in g.loops
    }
    guard_of = {loop.guard_index: loop for loop in g.loops}

    def land(pc: int, counters: dict) -> dict:
        for loop in heads.get(pc, ()):
            counters = dict(counters)
            counters[loop.loop_id] = counters.get(loop.loop_id, 0) + 1
            for lid in inner[loop.loop_id]:
                counters[lid] = 0
        return counters

    out = Exploration()
    n = len(g.instructions)
    init = (0, {}, land(0, {}), {})
    stack = [init]
    seen = set()

    while stack:
        pc, store, counters, pending = stack.pop()
        key = (pc, tuple(sorted(store.items())),
               tuple(sorted(counters.items())),
               tuple(sorted(pending.items())))
        if key in seen:
            continue
        seen.add(key)
        out.states += 1
        if out.states > max_states:
            raise OracleLimit("state budget exhausted")
        if pc >= n:
            out.completed += 1
            continue
        ins = g.instructions[pc]
        ctx = ins.ctx or tuple(counters.get(l.loop_id, 0) for l in enclosing[pc])
        asker = _Asker(pending)

        def push(next_pc: int, next_store: dict):
            stack.append((next_pc, next_store, land(next_pc, counters), {}))

        try:
            if ins.op == "ASSIGN":
                v = eval_expr(ins.expr, store, asker, ctx)
                push(pc + 1, {**store, ins.var: v})
            elif ins.op == "HAVOC":
                ty = g.symbols[ins.var]
                v = asker.draw(ins.nid, ctx, ty, "havoc")
                push(pc + 1, {**store, ins.var: ty.wrap(v)})
            elif ins.op == "ASSUME":
                if eval_expr(ins.expr, store, asker, ctx) == 0:
                    out.blocked += 1
                else:
                    push(pc + 1, store)
            elif ins.op == "ASSERT":
                if eval_expr(ins.expr, store, asker, ctx) == 0:
                    out.violations.append(ins.loc)
                else:
                    push(pc + 1, store)
            elif ins.op == "GOTO":
                push(ins.target, store)
            elif ins.op == "COND_GOTO":
                taken = eval_expr(ins.expr, store, asker, ctx) != 0
                loop = guard_of.get(pc)
                if not taken and loop is not None and k is not None \
                        and counters.get(loop.loop_id, 0) > k:
                    # Guard still true after k full iterations.
                    out.sigma_failures += 1
                else:
                    push(ins.target if taken else pc + 1, store)
            else:  # SKIP
                push(pc + 1, store)
        except _NeedDraw as need:
            ty = need.ty
            if ty.width > max_draw_width:
                raise OracleLimit(
                    f"draw domain of width {ty.width} exceeds the cap") from None
            for v in range(ty.min, ty.max + 1):
                stack.append((pc, store, counters, {**pending, need.key: v}))
    return out


def base_case_holds(g: GotoProgram, k: int, **kw) -> bool:
    """True iff no execution bounded by k iterations per loop activation
    violates an assertion."""
    return not explore(g, k, **kw).violated


def forward_holds(g: GotoProgram, k: int, **kw) -> bool:
    """True iff every execution leaves each loop within k iterations and
    no bounded execution violates an assertion."""
    ex = explore(g, k, **kw)
    return not ex.violated and ex.sigma_failures == 0


def min_violation_k(g: GotoProgram, k_max: int, **kw):
    for k in range(1, k_max + 1):
        if not base_case_holds(g, k, **kw):
            return k
    return None


def min_forward_k(g: GotoProgram, k_max: int, **kw):
    for k in range(1, k_max + 1):
        if forward_holds(g, k, **kw):
            return k
    return None
