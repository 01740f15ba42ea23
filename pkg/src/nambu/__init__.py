"""Exact exterior-calculus engine for divergence-free phase flows.

Subpackages:

- ``exprcore``: rationals, sparse polynomials, canonical rational functions,
  and the scalar expression parser.
- ``extcalc``: differential forms (wedge, exterior derivative, interior
  product, Lie derivative), flow/form conversion, divergence.
- ``mech``: Nambu-bracket flows, vector Hamiltonians via the radial homotopy
  operator, hyperplane-coordinate factorization, certificates, and
  classification.
- ``numlab``: floating-point cross-checks (RK4 trajectories, invariant drift,
  advected-loop line integrals).
- ``systems``: built-in example systems with pre-registered invariants.
- ``cli``: the ``nambu`` command-line front end over a plain-text system
  definition format.
"""

from .exprcore import Polynomial, Rational, RationalFunction, parse_expr
from .extcalc import DiffForm, VectorField, parse_form

__all__ = [
    "Polynomial",
    "Rational",
    "RationalFunction",
    "parse_expr",
    "DiffForm",
    "VectorField",
    "parse_form",
]
