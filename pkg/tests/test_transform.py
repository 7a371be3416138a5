"""Per-phase unwinding and the inductive havoc/store/remove rewrite."""

import pytest

from kinduct import oracle
from kinduct.frontend import pp_expr
from kinduct.goto_ir import count_backjumps, free_vars, loop_variables
from kinduct.interp import COMPLETED, SequentialProvider, run_goto
from kinduct.transform import (
    Phase, TransformError, dump_unwound, prepare_base_case,
    prepare_forward_condition, prepare_inductive_step, unwind,
)
from conftest import FIG1, compile_mc, corpus_entries


def tags(u):
    return [i.tag for i in u.body.instructions if i.tag]


def test_unwound_has_no_backjumps_across_phases(fig1_goto, count_up_goto):
    for g in (fig1_goto, count_up_goto):
        for phase in Phase:
            for k in (1, 2, 3):
                u = unwind(g, k, phase)
                assert count_backjumps(u.body) == 0
                assert u.k == k and u.phase == phase
                assert u.origin is g


def test_terminator_kind_matches_phase(fig1_goto):
    for phase, op, tag in [
        (Phase.BASE, "ASSUME", "unwind_assumption"),
        (Phase.FORWARD, "ASSERT", "unwind_assertion"),
        (Phase.INDUCTIVE, "ASSUME", "unwind_assumption"),
    ]:
        u = unwind(fig1_goto, 2, phase)
        terms = [i for i in u.body.instructions if i.tag == tag]
        assert len(terms) == 1
        assert terms[0].op == op
        assert pp_expr(terms[0].expr) == "!(x > 0)"


def test_fig1_forward_k2_shape(fig1_goto):
    u = unwind(fig1_goto, 2, Phase.FORWARD)
    ops = [i.op for i in u.body.instructions]
    # nondet init, two guarded copies, unwinding assertion, property, ret
    decs = [i for i in u.body.instructions
            if i.op == "ASSIGN" and i.var == "x" and "- 1" in pp_expr(i.expr)]
    assert len(decs) == 2
    asserts = [i for i in u.body.instructions if i.op == "ASSERT"]
    assert len(asserts) == 2
    assert pp_expr(asserts[0].expr) == "!(x > 0)"
    assert pp_expr(asserts[1].expr) == "x == 0"
    assert ops.count("COND_GOTO") == 2


def test_loop_free_program_unchanged_any_k():
    g = compile_mc("int main() { int a = 2; assert(a == 2); return 0; }")
    for k in (1, 4):
        u = unwind(g, k, Phase.FORWARD)
        assert len(u.body.instructions) == len(g.instructions)
        assert u.termination_conditions == []


def test_base_terminator_concretely_satisfiable():
    g = compile_mc("int main() { int i = 0; while (i < 3) { i = i + 1; } return 0; }")
    u = unwind(g, 3, Phase.BASE)
    res = run_goto(u.body, SequentialProvider([]))
    assert res.status == COMPLETED      # assume !(i < 3) passes with i == 3
    assert res.store["i"] == 3


def test_unwinding_rejects_k_below_one(fig1_goto):
    with pytest.raises(TransformError):
        unwind(fig1_goto, 0, Phase.BASE)


def test_prepare_wrappers_set_phase(fig1_goto):
    assert prepare_base_case(fig1_goto, 2).phase == Phase.BASE
    assert prepare_forward_condition(fig1_goto, 2).phase == Phase.FORWARD
    assert prepare_inductive_step(fig1_goto, 2).phase == Phase.INDUCTIVE


def test_inductive_rewrite_blocks(fig1_goto):
    u = unwind(fig1_goto, 1, Phase.INDUCTIVE)
    (rw,) = u.rewrites
    havocs = [i for i in u.body.instructions if i.op == "HAVOC"]
    assert [i.var for i in havocs] == ["x"]
    assert rw.havoc_block == havocs
    # S snapshots every loop variable once per copy
    assert len(rw.store_block) == 1
    assert rw.store_block[0].var in rw.shadows
    assert rw.shadows[rw.store_block[0].var] == "x"
    # R is one stutter-elimination assume per copy
    assert len(rw.remove_block) == 1
    assert rw.remove_block[0].op == "ASSUME"
    assert rw.remove_block[0].tag == "stutter"
    assert "!=" in pp_expr(rw.remove_block[0].expr)


def test_inductive_shadow_count_grows_with_k(fig1_goto):
    u = unwind(fig1_goto, 3, Phase.INDUCTIVE)
    (rw,) = u.rewrites
    assert len(rw.store_block) == 3
    assert len(rw.remove_block) == 3


def test_havoc_completeness_on_corpus():
    """Every variable written in a loop body is havocked for that loop."""
    for path, _expected, _cat in corpus_entries():
        g = compile_mc(path.read_text())
        if not g.loops:
            continue
        u = unwind(g, 1, Phase.INDUCTIVE)
        havocked = {i.var for i in u.body.instructions if i.op == "HAVOC"}
        for loop in g.loops:
            for idx in range(loop.head, loop.backjump):
                ins = g.instructions[idx]
                if ins.op == "ASSIGN":
                    assert ins.var in havocked, (path.name, ins.var)


def test_havoc_set_equals_def3_loop_variables(fig1_goto):
    (loop,) = fig1_goto.loops
    u = unwind(fig1_goto, 1, Phase.INDUCTIVE)
    havocked = {i.var for i in u.body.instructions if i.op == "HAVOC"}
    assert havocked == set(loop_variables(fig1_goto, loop))


def test_nested_unwinding_copies_inner_per_outer():
    g = compile_mc("""int main() {
      int i = 0;
      int t = 0;
      while (i < 2) {
        int j = 0;
        while (j < 2) { t = t + 1; j = j + 1; }
        i = i + 1;
      }
      return 0;
    }""")
    u = unwind(g, 2, Phase.BASE)
    incr = [i for i in u.body.instructions
            if i.op == "ASSIGN" and i.var == "t" and not i.is_init]
    assert len(incr) == 4      # k copies of inner per each of k outer copies
    sigma_assumes = [i for i in u.body.instructions if i.tag == "unwind_assumption"]
    assert len(sigma_assumes) == 3   # inner instance per outer copy, plus outer


def test_forward_monotonicity_on_corpus_oracle():
    from kinduct.driver import KInductionConfig, load_program
    cfg = KInductionConfig(invariants_mode="none", width_override=8)
    for path, _expected, _cat in corpus_entries():
        g = load_program(str(path), cfg)
        mk = oracle.min_forward_k(g, 8)
        if mk is not None:
            for k in range(mk, 9):
                assert oracle.forward_holds(g, k), (path.name, k)


def test_forward_monotonicity_solver_side():
    from kinduct.driver import KInductionConfig, forward_condition, load_program
    cfg = KInductionConfig(invariants_mode="none", width_override=8)
    for name, threshold in [("count_up.mc", 10), ("nested_sum.mc", 2)]:
        from conftest import corpus_path
        g = load_program(str(corpus_path(name)), cfg)
        for k in range(1, threshold + 3):
            holds = forward_condition(g, k, cfg)
            assert holds == (k >= threshold), (name, k)


def test_dump_unwound_mentions_phase(fig1_goto):
    text = dump_unwound(unwind(fig1_goto, 2, Phase.FORWARD))
    assert "forward" in text and "k=2" in text
    assert "ASSERT" in text
