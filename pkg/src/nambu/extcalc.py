"""Graded exterior algebra of differential forms with rational-function
coefficients on R^n coordinate charts.

A k-form is a sparse mapping from strictly increasing index tuples (the
ordered multi-indices labelling basis k-vectors) to RationalFunction
coefficients.  The contraction convention is fixed so that a vector field X
maps to the (n-1)-form

    X . Omega = sum_i X_i * (-1)^(i-1) dx_1 ^ ... ^ [dx_i] ^ ... ^ dx_n

(the bracket marks omission).  With this sign choice the exterior derivative
of the flow form equals the divergence times the volume form, and the
hyperplane factorization in :mod:`nambu.mech` reconstructs flow forms
exactly.  The opposite overall sign is equally consistent internally but
breaks those identities.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import (
    DegreeError,
    DimensionMismatchError,
    ExprSyntaxError,
    UnknownIdentifierError,
)
from .exprcore import (
    ExprParser,
    Polynomial,
    RationalFunction,
    _TokenStream,
    is_simple_factor,
    lower,
    rf_to_text,
    tokenize,
)

MultiIndex = tuple  # strictly increasing tuple[int, ...]


def merge_indices(a: MultiIndex, b: MultiIndex) -> tuple[int, MultiIndex | None]:
    """Merge two strictly increasing index tuples.

    Returns (sign, merged) where sign is the parity of the interleaving
    permutation, or (0, None) when the tuples share an index.
    """
    i, j = 0, 0
    sign = 1
    out = []
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            return 0, None
        if a[i] < b[j]:
            out.append(a[i])
            i += 1
        else:
            # b[j] jumps over the remaining len(a)-i entries of a
            if (len(a) - i) % 2:
                sign = -sign
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return sign, tuple(out)


class VectorField:
    """A vector field on R^n: one RationalFunction component per variable."""

    __slots__ = ("vars", "components")

    def __init__(self, components: Sequence[RationalFunction]):
        components = tuple(components)
        if not components:
            raise DimensionMismatchError("a vector field needs at least one component")
        ctx = components[0].vars
        if len(ctx) != len(components):
            raise DimensionMismatchError(
                f"{len(components)} components over a {len(ctx)}-variable context"
            )
        for c in components:
            if c.vars != ctx:
                raise DimensionMismatchError("components use different variable contexts")
        self.vars = ctx
        self.components = components

    @property
    def dim(self) -> int:
        return len(self.components)

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __repr__(self) -> str:
        return "VectorField(" + ", ".join(str(c) for c in self.components) + ")"


class DiffForm:
    """Sparse exterior form of fixed degree on R^n."""

    __slots__ = ("vars", "degree", "terms")

    def __init__(
        self,
        variables: Sequence[str],
        degree: int,
        terms: Mapping[MultiIndex, RationalFunction] | None = None,
    ):
        self.vars = tuple(variables)
        n = len(self.vars)
        if not 0 <= degree <= n + 1:
            raise DegreeError(f"degree {degree} out of range for n={n}")
        self.degree = degree
        self.terms = {}
        if terms:
            for idx, coeff in terms.items():
                idx = tuple(idx)
                if len(idx) != degree:
                    raise DegreeError(f"index {idx} has length {len(idx)}, degree is {degree}")
                if list(idx) != sorted(set(idx)):
                    raise ValueError(f"multi-index {idx} is not strictly increasing")
                if idx and not (0 <= idx[0] and idx[-1] < n):
                    raise IndexError(f"multi-index {idx} out of range for n={n}")
                if coeff.vars != self.vars:
                    raise DimensionMismatchError("coefficient context mismatch")
                if not coeff.is_zero():
                    self.terms[idx] = coeff

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str], degree: int) -> "DiffForm":
        return cls(variables, degree)

    @classmethod
    def from_function(cls, f: RationalFunction) -> "DiffForm":
        """Wrap a scalar function as a 0-form."""
        return cls(f.vars, 0, {(): f})

    @classmethod
    def volume(cls, variables: Sequence[str]) -> "DiffForm":
        """The volume form dx_1 ^ ... ^ dx_n with coefficient 1."""
        n = len(variables)
        one = RationalFunction.constant(variables, 1)
        return cls(variables, n, {tuple(range(n)): one})

    @classmethod
    def differential(cls, variables: Sequence[str], index: int) -> "DiffForm":
        """The basis 1-form dx_index."""
        one = RationalFunction.constant(variables, 1)
        return cls(variables, 1, {(index,): one})

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.terms.values())

    def coefficient(self, idx: MultiIndex) -> RationalFunction:
        return self.terms.get(tuple(idx), RationalFunction.zero(self.vars))

    def sorted_terms(self) -> list[tuple[MultiIndex, RationalFunction]]:
        return sorted(self.terms.items())

    # -- linear structure ------------------------------------------------------

    def _check(self, other: "DiffForm") -> None:
        if self.vars != other.vars:
            raise DimensionMismatchError(
                f"variable contexts differ: {self.vars} vs {other.vars}"
            )
        if self.degree != other.degree:
            raise DegreeError(
                f"cannot combine forms of degree {self.degree} and {other.degree}"
            )

    def __add__(self, other: "DiffForm") -> "DiffForm":
        self._check(other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            s = out.get(idx)
            s = c if s is None else s + c
            if s.is_zero():
                out.pop(idx, None)
            else:
                out[idx] = s
        return DiffForm._raw(self.vars, self.degree, out)

    def __sub__(self, other: "DiffForm") -> "DiffForm":
        return self + (-other)

    def __neg__(self) -> "DiffForm":
        return DiffForm._raw(
            self.vars, self.degree, {i: -c for i, c in self.terms.items()}
        )

    def scale(self, factor: RationalFunction | Fraction | int) -> "DiffForm":
        if isinstance(factor, (Fraction, int)):
            factor = RationalFunction.constant(self.vars, factor)
        if factor.is_zero():
            return DiffForm.zero(self.vars, self.degree)
        out = {}
        for idx, c in self.terms.items():
            p = c * factor
            if not p.is_zero():
                out[idx] = p
        return DiffForm._raw(self.vars, self.degree, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffForm):
            return NotImplemented
        return (
            self.vars == other.vars
            and self.degree == other.degree
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return hash((self.vars, self.degree, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"DiffForm({form_to_text(self)!r}, degree={self.degree})"

    def __str__(self) -> str:
        return form_to_text(self)

    @classmethod
    def _raw(cls, variables, degree, terms) -> "DiffForm":
        obj = object.__new__(cls)
        obj.vars = variables
        obj.degree = degree
        obj.terms = terms
        return obj


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    """Exterior product a ^ b.

    Bilinear and associative, with a ^ b = (-1)^(deg a * deg b) b ^ a.
    Degrees beyond n give the zero form of the clamped degree n+1.
    """
    if a.vars != b.vars:
        raise DimensionMismatchError("wedge operands use different variable contexts")
    n = len(a.vars)
    degree = a.degree + b.degree
    if degree > n:
        return DiffForm.zero(a.vars, min(degree, n + 1))
    out: dict = {}
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            sign, merged = merge_indices(ia, ib)
            if sign == 0:
                continue
            c = ca * cb
            if sign < 0:
                c = -c
            s = out.get(merged)
            s = c if s is None else s + c
            if s.is_zero():
                out.pop(merged, None)
            else:
                out[merged] = s
    return DiffForm._raw(a.vars, degree, out)


def wedge_all(forms: Sequence[DiffForm]) -> DiffForm:
    """Wedge a non-empty sequence of forms left to right."""
    if not forms:
        raise ValueError("wedge_all needs at least one form")
    acc = forms[0]
    for f in forms[1:]:
        acc = wedge(acc, f)
    return acc


def ext_d(a: DiffForm) -> DiffForm:
    """Exterior derivative.  Total: the derivative of an n-form is the zero
    (n+1)-form, so d(d(a)) = 0 holds for every input degree."""
    n = len(a.vars)
    degree = a.degree + 1
    if a.degree >= n:
        return DiffForm.zero(a.vars, degree)
    out: dict = {}
    for idx, c in a.terms.items():
        for v in range(n):
            if v in idx:
                continue
            dc = c.derivative(v)
            if dc.is_zero():
                continue
            # insert dx_v in front: sign from sorting v into idx
            below = sum(1 for i in idx if i < v)
            pos = below
            merged = idx[:pos] + (v,) + idx[pos:]
            if below % 2:
                dc = -dc
            s = out.get(merged)
            s = dc if s is None else s + dc
            if s.is_zero():
                out.pop(merged, None)
            else:
                out[merged] = s
    return DiffForm._raw(a.vars, degree, out)


def _contract(X: VectorField, a: DiffForm) -> DiffForm:
    """Interior product with the convention X . (0-form) = 0."""
    if a.degree == 0:
        return DiffForm.zero(a.vars, 0)
    out: dict = {}
    for idx, c in a.terms.items():
        for j, v in enumerate(idx):
            comp = X.components[v]
            if comp.is_zero():
                continue
            coeff = c * comp
            if j % 2:
                coeff = -coeff
            rest = idx[:j] + idx[j + 1 :]
            s = out.get(rest)
            s = coeff if s is None else s + coeff
            if s.is_zero():
                out.pop(rest, None)
            else:
                out[rest] = s
    return DiffForm._raw(a.vars, a.degree - 1, out)


def interior(X: VectorField, a: DiffForm) -> DiffForm:
    """Interior product X . a (degree drops by one).

    Antiderivation of degree -1; contracting twice with the same field gives
    zero.  Degree-0 input is an error.
    """
    if X.vars != a.vars:
        raise DimensionMismatchError("field and form use different variable contexts")
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined")
    return _contract(X, a)


def lie_derivative(X: VectorField, a: DiffForm) -> DiffForm:
    """Lie derivative along X by the homotopy formula
    L_X a = X . d(a) + d(X . a); on 0-forms this is the directional
    derivative X(f)."""
    if X.vars != a.vars:
        raise DimensionMismatchError("field and form use different variable contexts")
    first = _contract(X, ext_d(a))
    if a.degree == 0:
        return first
    return first + ext_d(_contract(X, a))


def flow_to_form(X: VectorField) -> DiffForm:
    """Contract a flow with the volume form:  X . Omega as an (n-1)-form.

    Linear in X and exactly invertible by :func:`form_to_flow`.
    """
    n = X.dim
    if n < 2:
        raise DimensionMismatchError("flow forms need dimension at least 2")
    out: dict = {}
    full = tuple(range(n))
    for i in range(n):
        comp = X.components[i]
        if comp.is_zero():
            continue
        idx = full[:i] + full[i + 1 :]
        out[idx] = comp if i % 2 == 0 else -comp
    return DiffForm._raw(X.vars, n - 1, out)


def form_to_flow(w: DiffForm) -> VectorField:
    """Exact inverse of :func:`flow_to_form` on (n-1)-forms."""
    n = len(w.vars)
    if w.degree != n - 1:
        raise DegreeError(f"expected an (n-1)-form, got degree {w.degree} with n={n}")
    full = tuple(range(n))
    comps = []
    for i in range(n):
        idx = full[:i] + full[i + 1 :]
        c = w.coefficient(idx)
        comps.append(c if i % 2 == 0 else -c)
    return VectorField(comps)


def divergence(X: VectorField) -> RationalFunction:
    """Sum of d(X_i)/d(x_i); satisfies d(flow_to_form(X)) = divergence(X) * Omega."""
    total = RationalFunction.zero(X.vars)
    for i, comp in enumerate(X.components):
        total = total + comp.derivative(i)
    return total


def is_closed(a: DiffForm) -> bool:
    """True when the exterior derivative vanishes identically."""
    return ext_d(a).is_zero()


# ---------------------------------------------------------------------------
# Form literals
# ---------------------------------------------------------------------------


def parse_form(
    text: str,
    variables: Sequence[str],
    params: Mapping[str, Fraction] | None = None,
) -> DiffForm:
    """Parse a form literal such as ``z^2*dy^dz - x^2*dx^dz``.

    Grammar: ``form := term (('+'|'-') term)*`` where each term is an
    optional scalar coefficient, ``*``, and a chain of differentials joined
    by ``^``.  A term with no differentials contributes to a 0-form.  The
    ``^`` token is a wedge between differentials and an integer power inside
    coefficients; differentials are ``d`` followed by a declared variable
    name.  All terms must have the same degree.
    """
    variables = tuple(variables)
    diff_names = {f"d{name}": i for i, name in enumerate(variables)}
    stream = _TokenStream(tokenize(text))
    parser = ExprParser(stream, stop_idents=frozenset(diff_names))

    result: DiffForm | None = None
    sign = 1
    first = True
    while True:
        tok = stream.current
        if tok.kind == "end":
            if first:
                raise ExprSyntaxError("empty form literal", tok.pos)
            break
        if not first:
            if tok.kind == "op" and tok.text in "+-":
                sign = 1 if tok.text == "+" else -1
                stream.advance()
            else:
                raise ExprSyntaxError(
                    f"expected '+' or '-' between form terms, found {tok.text!r}",
                    tok.pos,
                )
        else:
            sign = 1

        term = _parse_form_term(stream, parser, variables, diff_names, params)
        if sign < 0:
            term = -term
        if result is None:
            result = term
        else:
            if result.degree != term.degree:
                raise DegreeError(
                    f"mixed degrees in form literal: {result.degree} and {term.degree}"
                )
            result = result + term
        first = False
    assert result is not None
    return result


def _parse_form_term(
    stream: _TokenStream,
    parser: ExprParser,
    variables,
    diff_names: Mapping[str, int],
    params,
) -> DiffForm:
    tok = stream.current
    coeff = None
    if not (tok.kind == "ident" and tok.text in diff_names):
        ast = parser.parse_expr()
        coeff = lower(ast, variables, params)
        tok = stream.current
        if tok.kind == "op" and tok.text == "*":
            nxt = stream.peek()
            if nxt.kind == "ident" and nxt.text in diff_names:
                stream.advance()
                tok = stream.current

    indices: list[int] = []
    while stream.current.kind == "ident" and stream.current.text in diff_names:
        indices.append(diff_names[stream.current.text])
        stream.advance()
        tok = stream.current
        if tok.kind == "op" and tok.text == "^":
            nxt = stream.peek()
            if nxt.kind == "ident" and nxt.text in diff_names:
                stream.advance()
                continue
        break

    if coeff is None and not indices:
        raise ExprSyntaxError("expected a form term", stream.current.pos)
    if coeff is None:
        coeff = RationalFunction.constant(variables, 1)
    if not indices:
        return DiffForm.from_function(coeff)

    # canonical sign for the written differential order
    order = indices
    if len(set(order)) != len(order):
        return DiffForm.zero(variables, len(order))
    swaps = 0
    seq = list(order)
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                swaps += 1
    if swaps % 2:
        coeff = -coeff
    return DiffForm(variables, len(order), {tuple(seq): coeff})


def form_to_text(a: DiffForm) -> str:
    """Render a form in the literal grammar with terms in index order."""
    if not a.terms:
        return "0"
    pieces: list[str] = []
    for idx, coeff in a.sorted_terms():
        chain = "^".join(f"d{a.vars[i]}" for i in idx)
        negative = False
        neg = -coeff
        text = rf_to_text(coeff)
        if text.startswith("-") and is_simple_factor(neg):
            negative = True
            coeff = neg
            text = rf_to_text(coeff)
        if not idx:
            body = text if is_simple_factor(coeff) or coeff.is_constant() else f"({text})"
        elif coeff.is_constant() and coeff.constant_value() == 1:
            body = chain
        elif is_simple_factor(coeff):
            body = f"{text}*{chain}"
        else:
            body = f"({text})*{chain}"
        if not pieces:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f"- {body}" if negative else f"+ {body}")
    return " ".join(pieces)
