"""Loop unwinding for the three k-induction phases.

Each loop is replaced by k copies of its body, each guarded by the loop
condition, nested so that copy i+1 only runs if copy i's guard held.
The innermost position (after all k copies) carries the phase's
terminator over sigma = !(guard):

    BASE, INDUCTIVE   ASSUME(sigma)   cuts paths needing > k iterations
    FORWARD           ASSERT(sigma)   demands the loop finish within k

The inductive step additionally rewrites every loop per
`A; while (c) { S; E; U; } R;`: A havocs the loop variables before copy
1 (any instrumented head invariant is assumed right after, as part of
copy 1's head), S snapshots each loop variable into a per-copy shadow,
U is subsumed by SSA renaming downstream, and R assumes after each
executed copy that some loop variable changed, banning stuttering
iterations.

Every produced instruction carries `ctx`, the tuple of copy indices of
its enclosing unwound loops (outermost first).  Nondeterministic draws
are therefore named (nid, ctx), the same keys a concrete replay of the
original program produces, which is what makes model replay possible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .frontend import Binary, Expr, IntType, Unary, Var
from .goto_ir import (
    GotoProgram, IfItem, Instr, LoopItem, OpItem, _NidSource, flatten_tree,
)


class TransformError(Exception):
    pass


class Phase(enum.Enum):
    BASE = "base"
    FORWARD = "forward"
    INDUCTIVE = "inductive"


_BOOL = IntType(32, True)


@dataclass
class InductiveRewrite:
    """The pieces of one loop's inductive rewrite (metadata for checks)."""

    havoc_block: list = field(default_factory=list)   # A
    store_block: list = field(default_factory=list)   # S (all copies)
    body: list = field(default_factory=list)          # E (all copies)
    update_block: list = field(default_factory=list)  # U (subsumed by SSA)
    remove_block: list = field(default_factory=list)  # R (one assume per copy)
    loop_id: int = 0
    shadows: dict = field(default_factory=dict)       # shadow -> original


@dataclass
class UnwoundProgram:
    body: GotoProgram
    phase: Phase
    k: int
    termination_conditions: list  # sigma per unwound loop instance
    rewrites: list = field(default_factory=list)  # InductiveRewrite per instance
    origin: GotoProgram | None = None  # the program that was unwound


def shadow_name(var: str, ctx: tuple) -> str:
    return f"{var}__pre_{'_'.join(str(c) for c in ctx)}"


def unwind(p: GotoProgram, k: int, phase: Phase) -> UnwoundProgram:
    """Replace every loop with k guarded copies plus the phase terminator.

    Nested loops are unwound recursively with the same global k, once per
    copy of their enclosing loop.
    """
    if k < 1:
        raise TransformError(f"unwinding depth must be >= 1, got {k}")
    nids = _NidSource(p.next_nid)
    symbols = dict(p.symbols)
    sigmas: list = []
    rewrites: list = []
    loop_vars = {l.loop_id: l.loop_vars for l in p.loops}
    inductive = phase is Phase.INDUCTIVE

    def stamp(items: list, ctx: tuple) -> list:
        out: list = []
        for item in items:
            if isinstance(item, OpItem):
                out.append(OpItem(replace(item.instr, ctx=ctx)))
            elif isinstance(item, IfItem):
                out.append(IfItem(item.cond, stamp(item.then, ctx),
                                  stamp(item.els, ctx), loc=item.loc, ctx=ctx))
            elif isinstance(item, LoopItem):
                out.extend(unwind_loop(item, ctx))
            else:
                raise TypeError(f"unexpected tree item {item!r}")
        return out

    def unwind_loop(loop: LoopItem, ctx: tuple) -> list:
        if loop.bottom_test:
            raise TransformError("unwinding requires normalized (top-test) loops")
        sigma = Unary("!", loop.guard, ty=_BOOL, loc=loop.loc)
        sigmas.append(sigma)
        lv = sorted(loop_vars[loop.loop_id])
        term_op, term_tag = (("ASSERT", "unwind_assertion") if phase is Phase.FORWARD
                             else ("ASSUME", "unwind_assumption"))
        rw = InductiveRewrite(loop_id=loop.loop_id)
        inner: list = [OpItem(Instr(term_op, expr=sigma, tag=term_tag,
                                    loop_id=loop.loop_id, loc=loop.loc,
                                    ctx=ctx + (k + 1,)))]
        for i in range(k, 0, -1):
            cctx = ctx + (i,)
            pre_i = stamp(loop.pre, cctx)
            body_i = stamp(loop.body, cctx)
            rw.body.extend(it.instr for it in body_i if isinstance(it, OpItem))
            seq = body_i
            if inductive:
                stores: list = []
                pairs: list = []
                for v in lv:
                    sh = shadow_name(v, cctx)
                    symbols[sh] = symbols[v]
                    rw.shadows[sh] = v
                    stores.append(OpItem(Instr(
                        "ASSIGN", var=sh,
                        expr=Var(v, rid=v, ty=symbols[v], loc=loop.loc),
                        tag="shadow", loc=loop.loc, ctx=cctx)))
                    pairs.append(Binary(
                        "!=", Var(v, rid=v, ty=symbols[v]),
                        Var(sh, rid=sh, ty=symbols[v]), ty=_BOOL, loc=loop.loc))
                changed = pairs[0]
                for e in pairs[1:]:
                    changed = Binary("||", changed, e, ty=_BOOL, loc=loop.loc)
                stutter = OpItem(Instr("ASSUME", expr=changed, tag="stutter",
                                       loop_id=loop.loop_id, loc=loop.loc,
                                       ctx=cctx))
                rw.store_block.extend(it.instr for it in stores)
                rw.remove_block.append(stutter.instr)
                seq = stores + body_i + [stutter]
            inner = pre_i + [IfItem(loop.guard, seq + inner, [],
                                    loc=loop.loc, ctx=cctx)]
        prefix: list = []
        if inductive:
            for v in lv:
                havoc = Instr("HAVOC", var=v, nid=nids.take(), tag="havoc",
                              loop_id=loop.loop_id, loc=loop.loc, ctx=ctx)
                rw.havoc_block.append(havoc)
                prefix.append(OpItem(havoc))
            rewrites.append(rw)
        return prefix + inner

    tree = stamp(p.tree, ())
    body = flatten_tree(tree, symbols, p.name, p.file, nids.next,
                        p.head_invariants)
    return UnwoundProgram(body, phase, k, sigmas, rewrites, p)


def prepare_base_case(p: GotoProgram, k: int) -> UnwoundProgram:
    """Bounded search for violations within k iterations: initial state
    concrete, paths beyond k iterations cut by unwinding assumptions."""
    return unwind(p, k, Phase.BASE)


def prepare_forward_condition(p: GotoProgram, k: int) -> UnwoundProgram:
    """All loops must exit within k iterations (unwinding assertions) and
    every original assertion must hold."""
    return unwind(p, k, Phase.FORWARD)


def prepare_inductive_step(p: GotoProgram, k: int) -> UnwoundProgram:
    """k iterations from an arbitrary (havocked, invariant-constrained)
    state, with stuttering ruled out, must exit and satisfy the
    assertions."""
    return unwind(p, k, Phase.INDUCTIVE)


def dump_unwound(u: UnwoundProgram) -> str:
    from .goto_ir import dump_goto
    head = f"phase={u.phase.value} k={u.k}"
    return head + "\n" + dump_goto(u.body)
