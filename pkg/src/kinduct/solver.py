"""Bit-level decision procedure: Tseitin bitblasting plus a small CDCL solver.

Words become vectors of propositional literals, least significant bit
first.  Gates are cached per expression node so shared subterms blast
once.  Propositional variable 1 is reserved as the constant TRUE, which
lets constant bits be plain literals instead of special cases.

The SAT core is a conventional CDCL: two watched literals, first-UIP
conflict analysis, VSIDS-style activity, Luby restarts, phase saving.
No preprocessing.  A conflict budget turns into a BUDGET outcome so the
caller can report unknown instead of looping forever.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

from .frontend import (
    Binary, Cast, Cond, Const, Expr, IntType, Nondet, Unary, Var,
)
from .vcgen import VcFormula

SAT = "SAT"
UNSAT = "UNSAT"
BUDGET = "BUDGET"

TRUE_LIT = 1
FALSE_LIT = -1

DEFAULT_CONFLICT_LIMIT = 10 ** 6


class SolverError(Exception):
    pass


@dataclass
class CnfInstance:
    num_vars: int = 1
    clauses: list = field(default_factory=list)
    bit_map: dict = field(default_factory=dict)   # (symbol, bit) -> var
    symbols: dict = field(default_factory=dict)   # symbol -> IntType


@dataclass
class SolverOutcome:
    status: str
    model: dict | None = None   # symbol -> bit-exact integer
    decisions: int = 0
    conflicts: int = 0
    propagations: int = 0


# ---------------------------------------------------------------------------
# Bitblasting


class _Blaster:
    def __init__(self):
        self.num_vars = 1  # var 1 is constant TRUE
        self.clauses = [[TRUE_LIT]]
        self.cache = {}      # id(expr) -> bit vector
        self.and_cache = {}  # (a, b) -> output literal
        self.or_cache = {}
        self.xor_cache = {}
        self.ite_cache = {}

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add(self, *lits):
        self.clauses.append(list(lits))

    # -- gate primitives; inputs and outputs are literals ------------------

    def g_and(self, a: int, b: int) -> int:
        if a == FALSE_LIT or b == FALSE_LIT or a == -b:
            return FALSE_LIT
        if a == TRUE_LIT or a == b:
            return b
        if b == TRUE_LIT:
            return a
        key = (a, b) if a < b else (b, a)
        out = self.and_cache.get(key)
        if out is None:
            out = self.new_var()
            self.add(-a, -b, out)
            self.add(a, -out)
            self.add(b, -out)
            self.and_cache[key] = out
        return out

    def g_or(self, a: int, b: int) -> int:
        return -self.g_and(-a, -b)

    def g_xor(self, a: int, b: int) -> int:
        if a == FALSE_LIT:
            return b
        if b == FALSE_LIT:
            return a
        if a == TRUE_LIT:
            return -b
        if b == TRUE_LIT:
            return -a
        if a == b:
            return FALSE_LIT
        if a == -b:
            return TRUE_LIT
        key = (a, b) if abs(a) < abs(b) else (b, a)
        out = self.xor_cache.get(key)
        if out is None:
            out = self.new_var()
            self.add(-a, -b, -out)
            self.add(a, b, -out)
            self.add(-a, b, out)
            self.add(a, -b, out)
            self.xor_cache[key] = out
        return out

    def g_ite(self, c: int, a: int, b: int) -> int:
        if c == TRUE_LIT:
            return a
        if c == FALSE_LIT:
            return b
        if a == b:
            return a
        if a == TRUE_LIT and b == FALSE_LIT:
            return c
        if a == FALSE_LIT and b == TRUE_LIT:
            return -c
        key = (c, a, b)
        out = self.ite_cache.get(key)
        if out is None:
            out = self.new_var()
            self.add(-c, -a, out)
            self.add(-c, a, -out)
            self.add(c, -b, out)
            self.add(c, b, -out)
            self.ite_cache[key] = out
        return out

    def g_maj(self, a: int, b: int, c: int) -> int:
        return self.g_or(self.g_and(a, b),
                         self.g_or(self.g_and(a, c), self.g_and(b, c)))

    # -- vector helpers -----------------------------------------------------

    def const_bits(self, value: int, width: int) -> list:
        value &= (1 << width) - 1
        return [TRUE_LIT if (value >> i) & 1 else FALSE_LIT
                for i in range(width)]

    def full_add(self, a: int, b: int, cin: int):
        s = self.g_xor(self.g_xor(a, b), cin)
        cout = self.g_maj(a, b, cin)
        return s, cout

    def v_add(self, a: list, b: list, cin: int = FALSE_LIT):
        out = []
        carry = cin
        for x, y in zip(a, b):
            s, carry = self.full_add(x, y, carry)
            out.append(s)
        return out, carry

    def v_neg(self, a: list) -> list:
        out, _ = self.v_add([-x for x in a], self.const_bits(1, len(a)))
        return out

    def v_sub(self, a: list, b: list):
        # a + ~b + 1; carry out == 1 iff no borrow (a >= b unsigned)
        return self.v_add(a, [-x for x in b], TRUE_LIT)

    def v_ult(self, a: list, b: list) -> int:
        _, carry = self.v_sub(a, b)
        return -carry

    def v_lt(self, a: list, b: list, signed: bool) -> int:
        if not signed:
            return self.v_ult(a, b)
        # Flip sign bits to map signed order onto unsigned order.
        a2 = a[:-1] + [-a[-1]]
        b2 = b[:-1] + [-b[-1]]
        return self.v_ult(a2, b2)

    def v_eq(self, a: list, b: list) -> int:
        out = TRUE_LIT
        for x, y in zip(a, b):
            out = self.g_and(out, -self.g_xor(x, y))
        return out

    def v_ite(self, c: int, a: list, b: list) -> list:
        return [self.g_ite(c, x, y) for x, y in zip(a, b)]

    def v_nonzero(self, a: list) -> int:
        out = FALSE_LIT
        for x in a:
            out = self.g_or(out, x)
        return out

    def v_mul(self, a: list, b: list) -> list:
        width = len(a)
        acc = self.const_bits(0, width)
        for i, bi in enumerate(b):
            partial = [FALSE_LIT] * i + [self.g_and(x, bi) for x in a[:width - i]]
            acc, _ = self.v_add(acc, partial)
        return acc

    def v_shift(self, a: list, amt: list, kind: str) -> list:
        # Barrel shifter; the effective amount is amt mod width.
        width = len(a)
        stages = width.bit_length() - 1  # width is a power of two
        fill = a[-1] if kind == "asr" else FALSE_LIT
        cur = a
        for s in range(stages):
            k = 1 << s
            bit = amt[s]
            if kind == "shl":
                shifted = [FALSE_LIT] * k + cur[:width - k]
            else:
                shifted = cur[k:] + [fill] * k
            cur = self.v_ite(bit, shifted, cur)
        return cur

    def v_udivmod(self, a: list, b: list):
        # Restoring long division, most significant bit first.
        width = len(a)
        rem = self.const_bits(0, width)
        quo = [FALSE_LIT] * width
        for i in range(width - 1, -1, -1):
            rem = [a[i]] + rem[:-1]
            diff, carry = self.v_sub(rem, b)
            quo[i] = carry  # carry == 1 iff rem >= b
            rem = self.v_ite(carry, diff, rem)
        return quo, rem

    def v_divmod(self, a: list, b: list, signed: bool):
        width = len(a)
        if signed:
            sa, sb = a[-1], b[-1]
            abs_a = self.v_ite(sa, self.v_neg(a), a)
            abs_b = self.v_ite(sb, self.v_neg(b), b)
            q, r = self.v_udivmod(abs_a, abs_b)
            qneg = self.g_xor(sa, sb)
            q = self.v_ite(qneg, self.v_neg(q), q)
            r = self.v_ite(sa, self.v_neg(r), r)
        else:
            q, r = self.v_udivmod(a, b)
        # Division by zero yields zero, matching the evaluator; the
        # surrounding ite from the SSA builder shadows it anyway.
        zero = -self.v_nonzero(b)
        zeros = self.const_bits(0, width)
        return self.v_ite(zero, zeros, q), self.v_ite(zero, zeros, r)

    def v_extend(self, a: list, width: int, signed: bool) -> list:
        if width <= len(a):
            return a[:width]
        fill = a[-1] if signed else FALSE_LIT
        return a + [fill] * (width - len(a))

    def bool_word(self, bit: int, width: int) -> list:
        return [bit] + [FALSE_LIT] * (width - 1)

    # -- expression walk ----------------------------------------------------

    def blast(self, e: Expr, symbol_bits: dict) -> list:
        cached = self.cache.get(id(e))
        if cached is not None:
            return cached
        bits = self._blast(e, symbol_bits)
        assert len(bits) == e.ty.width
        self.cache[id(e)] = bits
        return bits

    def _blast(self, e: Expr, symbol_bits: dict) -> list:
        ty = e.ty
        if isinstance(e, Const):
            return self.const_bits(e.value, ty.width)
        if isinstance(e, Var):
            return symbol_bits[e.rid or e.name]
        if isinstance(e, Nondet):
            raise SolverError("formula contains an unsubstituted nondet")
        if isinstance(e, Unary):
            a = self.blast(e.operand, symbol_bits)
            if e.op == "-":
                return self.v_neg(a)
            if e.op == "~":
                return [-x for x in a]
            if e.op == "!":
                return self.bool_word(-self.v_nonzero(a), ty.width)
            raise SolverError(f"unknown unary {e.op}")
        if isinstance(e, Binary):
            return self._blast_binary(e, symbol_bits)
        if isinstance(e, Cast):
            a = self.blast(e.operand, symbol_bits)
            return self.v_extend(a, ty.width, e.operand.ty.signed)
        if isinstance(e, Cond):
            c = self.v_nonzero(self.blast(e.cond, symbol_bits))
            a = self.blast(e.then, symbol_bits)
            b = self.blast(e.els, symbol_bits)
            return self.v_ite(c, a, b)
        raise SolverError(f"cannot blast {e!r}")

    def _blast_binary(self, e: Binary, symbol_bits: dict) -> list:
        op = e.op
        width = e.ty.width
        if op in ("&&", "||"):
            a = self.v_nonzero(self.blast(e.left, symbol_bits))
            b = self.v_nonzero(self.blast(e.right, symbol_bits))
            bit = self.g_and(a, b) if op == "&&" else self.g_or(a, b)
            return self.bool_word(bit, width)
        a = self.blast(e.left, symbol_bits)
        b = self.blast(e.right, symbol_bits)
        signed = e.left.ty.signed
        if op == "+":
            out, _ = self.v_add(a, b)
            return out
        if op == "-":
            out, _ = self.v_sub(a, b)
            return out
        if op == "*":
            return self.v_mul(a, b)
        if op == "/":
            return self.v_divmod(a, b, signed)[0]
        if op == "%":
            return self.v_divmod(a, b, signed)[1]
        if op == "&":
            return [self.g_and(x, y) for x, y in zip(a, b)]
        if op == "|":
            return [self.g_or(x, y) for x, y in zip(a, b)]
        if op == "^":
            return [self.g_xor(x, y) for x, y in zip(a, b)]
        if op == "<<":
            return self.v_shift(a, b, "shl")
        if op == ">>":
            return self.v_shift(a, b, "asr" if signed else "lsr")
        if op == "==":
            return self.bool_word(self.v_eq(a, b), width)
        if op == "!=":
            return self.bool_word(-self.v_eq(a, b), width)
        if op == "<":
            return self.bool_word(self.v_lt(a, b, signed), width)
        if op == ">":
            return self.bool_word(self.v_lt(b, a, signed), width)
        if op == "<=":
            return self.bool_word(-self.v_lt(b, a, signed), width)
        if op == ">=":
            return self.bool_word(-self.v_lt(a, b, signed), width)
        raise SolverError(f"unknown binary {op}")


def bitblast(f: VcFormula) -> CnfInstance:
    """Reduce the word-level query to CNF over per-bit variables."""
    for name, ty in f.symbols.items():
        if ty.width > 64:
            raise SolverError(f"width {ty.width} of {name} not supported")
    bl = _Blaster()
    bit_map = {}
    symbol_bits = {}
    for name in f.symbols:
        ty = f.symbols[name]
        bits = [bl.new_var() for _ in range(ty.width)]
        symbol_bits[name] = bits
        for i, v in enumerate(bits):
            bit_map[(name, i)] = v
    root = bl.v_nonzero(bl.blast(f.shape, symbol_bits))
    bl.add(root)
    return CnfInstance(bl.num_vars, bl.clauses, bit_map, dict(f.symbols))


def decode_model(assign: list, cnf: CnfInstance) -> dict:
    """Turn a propositional assignment into per-symbol integers."""
    model = {}
    for name, ty in cnf.symbols.items():
        value = 0
        for i in range(ty.width):
            var = cnf.bit_map[(name, i)]
            if assign[var]:
                value |= 1 << i
        model[name] = ty.wrap(value)
    return model


# ---------------------------------------------------------------------------
# CDCL


def _luby(i: int) -> int:
    """1-based Luby sequence: 1 1 2 1 1 2 4 1 1 2 ..."""
    while True:
        k = i.bit_length()
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1


class _Cdcl:
    RESTART_UNIT = 100
    VAR_DECAY = 0.95

    def __init__(self, num_vars: int, clauses: list):
        self.n = num_vars
        self.clauses = []          # each: list of literals
        self.watches = {}          # literal -> clause indices watching it
        self.assign = [None] * (num_vars + 1)
        self.level = [0] * (num_vars + 1)
        self.reason = [None] * (num_vars + 1)
        self.trail = []
        self.trail_lim = []
        self.qhead = 0
        self.activity = [0.0] * (num_vars + 1)
        self.var_inc = 1.0
        self.saved_phase = [False] * (num_vars + 1)
        self.order = [(0.0, v) for v in range(1, num_vars + 1)]
        heapq.heapify(self.order)
        self.decisions = 0
        self.conflicts = 0
        self.propagations = 0
        self.ok = True
        for c in clauses:
            if not self.add_clause(c):
                self.ok = False
                break

    def watch(self, lit: int, ci: int):
        self.watches.setdefault(lit, []).append(ci)

    def value(self, lit: int):
        v = self.assign[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def add_clause(self, lits: list) -> bool:
        seen = set()
        out = []
        for lit in lits:
            if -lit in seen:
                return True  # tautology
            if lit not in seen:
                seen.add(lit)
                out.append(lit)
        out = [l for l in out if self.value(l) is not False or self.level[abs(l)] > 0]
        if not out:
            return False
        if len(out) == 1:
            if self.value(out[0]) is False:
                return False
            if self.value(out[0]) is None:
                self.enqueue(out[0], None)
            return True
        ci = len(self.clauses)
        self.clauses.append(out)
        self.watch(out[0], ci)
        self.watch(out[1], ci)
        return True

    def enqueue(self, lit: int, reason):
        v = abs(lit)
        self.assign[v] = lit > 0
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def propagate(self):
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            self.propagations += 1
            false_lit = -lit
            watchers = self.watches.get(false_lit, [])
            i = 0
            while i < len(watchers):
                ci = watchers[i]
                cl = self.clauses[ci]
                if cl[0] == false_lit:
                    cl[0], cl[1] = cl[1], cl[0]
                # cl[1] is the false literal now
                if self.value(cl[0]) is True:
                    i += 1
                    continue
                moved = False
                for j in range(2, len(cl)):
                    if self.value(cl[j]) is not False:
                        cl[1], cl[j] = cl[j], cl[1]
                        self.watch(cl[1], ci)
                        watchers[i] = watchers[-1]
                        watchers.pop()
                        moved = True
                        break
                if moved:
                    continue
                if self.value(cl[0]) is False:
                    return ci  # conflict
                self.enqueue(cl[0], ci)
                i += 1
        return None

    def bump(self, v: int):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for i in range(1, self.n + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100
        if self.assign[v] is None:
            heapq.heappush(self.order, (-self.activity[v], v))

    def analyze(self, conflict_ci: int):
        # First-UIP: walk the implication graph backwards along the trail.
        # A propagated literal sits at index 0 of its reason clause, so
        # reason clauses are scanned from index 1.
        learned = []
        seen = [False] * (self.n + 1)
        counter = 0
        ci = conflict_ci
        first = True
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        while True:
            cl = self.clauses[ci]
            for q in (cl if first else cl[1:]):
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self.bump(v)
                    if self.level[v] == cur_level:
                        counter += 1
                    else:
                        learned.append(q)
            first = False
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            lit = -self.trail[idx]
            v = abs(lit)
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            ci = self.reason[v]
        learned.insert(0, lit)
        if len(learned) == 1:
            back = 0
        else:
            levels = sorted((self.level[abs(l)] for l in learned[1:]), reverse=True)
            back = levels[0]
            mi = max(range(1, len(learned)),
                     key=lambda i: self.level[abs(learned[i])])
            learned[1], learned[mi] = learned[mi], learned[1]
        return learned, back

    def backtrack(self, level: int):
        while self.trail_lim and len(self.trail_lim) > level:
            limit = self.trail_lim.pop()
            while len(self.trail) > limit:
                lit = self.trail.pop()
                v = abs(lit)
                self.saved_phase[v] = lit > 0
                self.assign[v] = None
                self.reason[v] = None
                heapq.heappush(self.order, (-self.activity[v], v))
        self.qhead = len(self.trail)

    def pick_branch(self):
        # Lazy heap: entries for assigned variables are popped and
        # dropped; backtrack re-pushes on unassignment, so every free
        # variable always has at least one live entry.
        while self.order:
            _, v = self.order[0]
            if self.assign[v] is not None:
                heapq.heappop(self.order)
                continue
            return v if self.saved_phase[v] else -v
        return 0

    def solve(self, conflict_limit: int, deadline: float | None = None) -> str:
        if not self.ok:
            return UNSAT
        restart_idx = 1
        budget_next = _luby(restart_idx) * self.RESTART_UNIT
        since_restart = 0
        ticks = 0
        while True:
            ticks += 1
            if deadline is not None and ticks % 512 == 0 \
                    and time.monotonic() > deadline:
                return BUDGET
            conflict = self.propagate()
            if conflict is not None:
                self.conflicts += 1
                since_restart += 1
                if self.conflicts >= conflict_limit:
                    return BUDGET
                if not self.trail_lim:
                    return UNSAT
                learned, back = self.analyze(conflict)
                self.backtrack(back)
                if len(learned) == 1:
                    self.enqueue(learned[0], None)
                else:
                    ci = len(self.clauses)
                    self.clauses.append(learned)
                    self.watch(learned[0], ci)
                    self.watch(learned[1], ci)
                    self.enqueue(learned[0], ci)
                self.var_inc /= self.VAR_DECAY
                continue
            if since_restart >= budget_next:
                restart_idx += 1
                budget_next = _luby(restart_idx) * self.RESTART_UNIT
                since_restart = 0
                self.backtrack(0)
                continue
            lit = self.pick_branch()
            if lit == 0:
                return SAT
            self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self.enqueue(lit, None)


def solve(cnf: CnfInstance,
          conflict_limit: int = DEFAULT_CONFLICT_LIMIT,
          deadline: float | None = None) -> SolverOutcome:
    """Decide a CNF instance; decode the model through bit_map when SAT.

    `deadline` is a time.monotonic() timestamp; running past it yields
    the same BUDGET outcome as exceeding the conflict limit.
    """
    engine = _Cdcl(cnf.num_vars, cnf.clauses)
    status = engine.solve(conflict_limit, deadline)
    outcome = SolverOutcome(status, None, engine.decisions,
                            engine.conflicts, engine.propagations)
    if status == SAT:
        assign = [bool(v) for v in (engine.assign[i] for i in range(cnf.num_vars + 1))]
        outcome.model = decode_model(assign, cnf)
    return outcome


def emit_dimacs(cnf: CnfInstance) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    for (name, bit), var in sorted(cnf.bit_map.items(), key=lambda kv: kv[1]):
        lines.insert(0, f"c {var} = {name}[{bit}]")
    for cl in cnf.clauses:
        lines.append(" ".join(str(l) for l in cl) + " 0")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SMT-LIB emission (cross-check channel)


def _bv(value: int, width: int) -> str:
    return f"(_ bv{value & ((1 << width) - 1)} {width})"


def _smt_bool(e: Expr) -> str:
    return f"(distinct {_smt(e)} {_bv(0, e.ty.width)})"


def _smt(e: Expr) -> str:
    ty = e.ty
    if isinstance(e, Const):
        return _bv(e.value, ty.width)
    if isinstance(e, Var):
        return e.rid or e.name
    if isinstance(e, Unary):
        a = _smt(e.operand)
        if e.op == "-":
            return f"(bvneg {a})"
        if e.op == "~":
            return f"(bvnot {a})"
        if e.op == "!":
            return (f"(ite (= {a} {_bv(0, e.operand.ty.width)}) "
                    f"{_bv(1, ty.width)} {_bv(0, ty.width)})")
        raise SolverError(f"unknown unary {e.op}")
    if isinstance(e, Binary):
        op = e.op
        if op in ("&&", "||"):
            word = "and" if op == "&&" else "or"
            return (f"(ite ({word} {_smt_bool(e.left)} {_smt_bool(e.right)}) "
                    f"{_bv(1, ty.width)} {_bv(0, ty.width)})")
        a, b = _smt(e.left), _smt(e.right)
        signed = e.left.ty.signed
        width = e.left.ty.width
        simple = {"+": "bvadd", "-": "bvsub", "*": "bvmul",
                  "&": "bvand", "|": "bvor", "^": "bvxor"}
        if op in simple:
            return f"({simple[op]} {a} {b})"
        if op in ("/", "%"):
            inner = {("/", True): "bvsdiv", ("/", False): "bvudiv",
                     ("%", True): "bvsrem", ("%", False): "bvurem"}[(op, signed)]
            # Division by zero is a zero word here; the SSA ite shadows it.
            return (f"(ite (= {b} {_bv(0, width)}) {_bv(0, width)} "
                    f"({inner} {a} {b}))")
        if op in ("<<", ">>"):
            amt = f"(bvand {b} {_bv(width - 1, width)})"
            inner = "bvshl" if op == "<<" else ("bvashr" if signed else "bvlshr")
            return f"({inner} {a} {amt})"
        cmps = {"==": "=", "!=": "distinct",
                "<": "bvslt" if signed else "bvult",
                ">": "bvsgt" if signed else "bvugt",
                "<=": "bvsle" if signed else "bvule",
                ">=": "bvsge" if signed else "bvuge"}
        if op in cmps:
            return (f"(ite ({cmps[op]} {a} {b}) "
                    f"{_bv(1, ty.width)} {_bv(0, ty.width)})")
        raise SolverError(f"unknown binary {op}")
    if isinstance(e, Cast):
        src = e.operand.ty
        a = _smt(e.operand)
        if ty.width == src.width:
            return a
        if ty.width < src.width:
            return f"((_ extract {ty.width - 1} 0) {a})"
        ext = "sign_extend" if src.signed else "zero_extend"
        return f"((_ {ext} {ty.width - src.width}) {a})"
    if isinstance(e, Cond):
        return f"(ite {_smt_bool(e.cond)} {_smt(e.then)} {_smt(e.els)})"
    raise SolverError(f"cannot emit {e!r}")


def emit_smtlib(f: VcFormula) -> str:
    """Render the query as a QF_BV script for external cross-checking."""
    lines = ["(set-logic QF_BV)"]
    for name in sorted(f.symbols):
        ty = f.symbols[name]
        lines.append(f"(declare-const {name} (_ BitVec {ty.width}))")
    lines.append(f"(assert {_smt_bool(f.shape)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
