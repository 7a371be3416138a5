"""Randomized properties: round-trips, normalization, and semantics
agreement between the AST walker, the lowered form, and the encoder."""

import hypothesis.strategies as st
from hypothesis import HealthCheck, given, settings

from kinduct import oracle
from kinduct.frontend import parse, pretty_print, typecheck
from kinduct.goto_ir import dump_goto, lower, normalize_loops
from kinduct.interp import COMPLETED, SequentialProvider, run_ast, run_goto
from kinduct.solver import SAT, bitblast, solve
from kinduct.transform import Phase, unwind
from kinduct.vcgen import encode, to_ssa
from conftest import compile_mc

VARS = ("a", "b", "c")
BIN_OPS = ("+", "-", "*", "&", "|", "^", "<<", ">>",
           "<", ">", "<=", ">=", "==", "!=", "&&", "||")
UN_OPS = ("-", "~", "!")

expr_trees = st.recursive(
    st.sampled_from(VARS),
    lambda child: st.one_of(
        st.tuples(st.sampled_from(BIN_OPS), child, child),
        st.tuples(st.sampled_from(UN_OPS), child),
    ),
    max_leaves=12,
)


def render(t):
    if isinstance(t, str):
        return t
    if len(t) == 2:
        return f"({t[0]}{render(t[1])})"
    return f"({render(t[1])} {t[0]} {render(t[2])})"


def wrap(v, width, signed):
    v &= (1 << width) - 1
    if signed and v >= 1 << (width - 1):
        v -= 1 << width
    return v


CMP = {"<": lambda x, y: x < y, ">": lambda x, y: x > y,
       "<=": lambda x, y: x <= y, ">=": lambda x, y: x >= y,
       "==": lambda x, y: x == y, "!=": lambda x, y: x != y}


def ev(t, env):
    """Test-local evaluator, written independently of the package.

    Returns (value, width, signed).  Variables are 8-bit unsigned;
    comparisons and logical forms yield 32-bit signed 0/1; everything
    else works in the wider common type, unsigned if either side is,
    with wraparound arithmetic and mod-width shift amounts.
    """
    if isinstance(t, str):
        return env[t], 8, False
    if len(t) == 2:
        op, operand = t
        v, w, s = ev(operand, env)
        if op == "!":
            return (0 if v else 1), 32, True
        return wrap(-v if op == "-" else ~v, w, s), w, s
    op, l, r = t
    lv, lw, ls = ev(l, env)
    rv, rw, rs = ev(r, env)
    if op == "&&":
        return int(lv != 0 and rv != 0), 32, True
    if op == "||":
        return int(lv != 0 or rv != 0), 32, True
    w, s = max(lw, rw), ls and rs
    x, y = wrap(lv, w, s), wrap(rv, w, s)
    if op in CMP:
        return int(CMP[op](x, y)), 32, True
    if op == "+":
        v = x + y
    elif op == "-":
        v = x - y
    elif op == "*":
        v = x * y
    elif op == "&":
        v = x & y
    elif op == "|":
        v = x | y
    elif op == "^":
        v = x ^ y
    elif op == "<<":
        v = x << (y % w)
    else:
        v = x >> (y % w)
    return wrap(v, w, s), w, s


def straightline(tree, env):
    decls = "\n".join(f"  unsigned char {v} = {env[v]};" for v in VARS)
    return f"int main() {{\n{decls}\n  unsigned char r = {render(tree)};\n  return 0;\n}}\n"


byte = st.integers(min_value=0, max_value=255)


@settings(max_examples=150, deadline=None)
@given(expr_trees, byte, byte, byte)
def test_expression_semantics_agree(tree, a, b, c):
    env = {"a": a, "b": b, "c": c}
    src = straightline(tree, env)
    expected = wrap(ev(tree, env)[0], 8, False)   # r is unsigned char

    prog = typecheck(parse(src))
    ast_run = run_ast(prog, SequentialProvider([]))
    assert ast_run.status == COMPLETED
    assert ast_run.store["r"] == expected

    goto_run = run_goto(lower(prog), SequentialProvider([]))
    assert goto_run.status == COMPLETED
    assert goto_run.store["r"] == expected


@settings(max_examples=100, deadline=None)
@given(expr_trees, byte, byte, byte)
def test_parse_pretty_round_trip(tree, a, b, c):
    src = straightline(tree, {"a": a, "b": b, "c": c})
    first = parse(src)
    again = parse(pretty_print(first))
    assert again == first
    assert pretty_print(again) == pretty_print(first)


# Statement-level generator: assignments, if/else, bounded while loops
# over the fixed prelude variables.

assignments = st.tuples(st.sampled_from(VARS), expr_trees)


def stmt_render(s, indent):
    pad = " " * indent
    kind = s[0]
    if kind == "assign":
        return f"{pad}{s[1]} = {render(s[2])};"
    if kind == "if":
        body = "\n".join(stmt_render(x, indent + 2) for x in s[2])
        if s[3] is not None:
            alt = "\n".join(stmt_render(x, indent + 2) for x in s[3])
            return (f"{pad}if ({render(s[1])}) {{\n{body}\n{pad}}} "
                    f"else {{\n{alt}\n{pad}}}")
        return f"{pad}if ({render(s[1])}) {{\n{body}\n{pad}}}"
    # bounded while: the guard variable strictly decreases
    body = "\n".join(stmt_render(x, indent + 2) for x in s[2])
    return f"{pad}while (c > 0) {{\n{body}\n{pad}  c = c - 1;\n{pad}}}"


loop_free = st.recursive(
    st.tuples(st.just("assign"), st.sampled_from(("a", "b")), expr_trees),
    lambda child: st.tuples(
        st.just("if"), expr_trees,
        st.lists(child, min_size=1, max_size=3),
        st.none() | st.lists(child, min_size=1, max_size=2)),
    max_leaves=8,
)

# loops only at the top level, with loop-free bodies: every iteration
# decrements c exactly once, so each loop runs to completion
stmt_trees = st.one_of(
    loop_free,
    st.tuples(st.just("while"), st.just(None), st.lists(loop_free, max_size=2)),
)


def program(stmts, env):
    decls = "\n".join(f"  unsigned char {v} = {env[v]};" for v in VARS)
    body = "\n".join(stmt_render(s, 2) for s in stmts)
    return f"int main() {{\n{decls}\n{body}\n  return 0;\n}}\n"


@settings(max_examples=100, deadline=None,
          suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(stmt_trees, max_size=4), byte, byte,
       st.integers(min_value=0, max_value=5))
def test_statement_round_trip_and_normalize_idempotence(stmts, a, b, c):
    src = program(stmts, {"a": a, "b": b, "c": c})
    prog = parse(src)
    assert parse(pretty_print(prog)) == prog

    g = lower(typecheck(prog))
    once = normalize_loops(g)
    assert dump_goto(normalize_loops(once)) == dump_goto(once)


@settings(max_examples=100, deadline=None,
          suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(stmt_trees, max_size=3), byte, byte,
       st.integers(min_value=0, max_value=4))
def test_lowering_preserves_statement_semantics(stmts, a, b, c):
    env = {"a": a, "b": b, "c": c}
    src = program(stmts, env)
    prog = typecheck(parse(src))
    ast_run = run_ast(prog, SequentialProvider([]))
    goto_run = run_goto(lower(prog), SequentialProvider([]))
    assert ast_run.status == goto_run.status == COMPLETED
    for v in VARS:
        assert ast_run.store[v] == goto_run.store[v]


guard_ops = st.sampled_from(("<", ">", "<=", ">=", "!="))
small = st.integers(min_value=0, max_value=6)


@settings(max_examples=40, deadline=None,
          suppress_health_check=[HealthCheck.too_slow])
@given(guard_ops, small, st.sampled_from(("+", "-")), small,
       st.integers(min_value=1, max_value=3))
def test_base_case_matches_oracle_on_generated_loops(op, bound, step, avoid, k):
    src = f"""int main() {{
  unsigned char x = *;
  while (x {op} {bound}) {{
    assert(x != {avoid});
    x = x {step} 1;
  }}
  return 0;
}}"""
    g = compile_mc(src, width=8)
    f = encode(to_ssa(unwind(g, k, Phase.BASE)), Phase.BASE)
    solver_sat = solve(bitblast(f)).status == SAT
    assert solver_sat == (not oracle.base_case_holds(g, k))
