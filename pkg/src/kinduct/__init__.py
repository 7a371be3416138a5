"""kinduct: a bit-precise k-induction model checker for MiniC programs.

The pipeline: MiniC source -> typed AST -> GOTO-style IR -> per-phase
loop-free unwinding -> SSA verification condition -> bit-blasted CNF ->
built-in CDCL SAT solver.  Affine invariants inferred by an interval and
pair-equality abstract interpreter (or translated from PIPS-style
comments) strengthen the induction hypothesis.
"""

__version__ = "0.1.0"
