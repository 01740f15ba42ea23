"""Exact arithmetic kernel: rationals, sparse multivariate polynomials, and
canonical rational functions.

Coefficients are arbitrary-precision rationals (``fractions.Fraction``).  A
polynomial is a sparse mapping from exponent vectors to nonzero coefficients,
tied to an ordered tuple of variable names.  A rational function is a reduced
pair of polynomials: the polynomial GCD of numerator and denominator is 1 and
the denominator is monic under the graded-lexicographic term order, so equal
functions have identical representations and ``==`` is exact semantic
equality.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import (
    DimensionMismatchError,
    ExprSyntaxError,
    PoleError,
    UnknownIdentifierError,
    ZeroDenominatorError,
)

Rational = Fraction

Exponent = tuple  # tuple[int, ...], one entry per context variable

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _grlex_key(exp: Exponent):
    return (sum(exp), exp)


class Polynomial:
    """Sparse multivariate polynomial over the rationals.

    ``vars`` is the ordered variable context; ``terms`` maps exponent tuples
    (length ``len(vars)``) to nonzero Fraction coefficients.  Instances are
    immutable; all arithmetic returns new canonical objects.
    """

    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Mapping[Exponent, Fraction]):
        self.vars = tuple(variables)
        self.terms = {e: c for e, c in terms.items() if c != 0}
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "Polynomial":
        return cls(variables, {})

    @classmethod
    def constant(cls, variables: Sequence[str], value) -> "Polynomial":
        value = Fraction(value)
        if value == 0:
            return cls(variables, {})
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, variables: Sequence[str], index: int) -> "Polynomial":
        n = len(variables)
        if not 0 <= index < n:
            raise IndexError(f"variable index {index} out of range for {n} variables")
        exp = [0] * n
        exp[index] = 1
        return cls(variables, {tuple(exp): _ONE})

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        if not self.terms:
            return _ZERO
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def is_one(self) -> bool:
        return self.is_constant() and self.constant_value() == 1

    def total_degree(self) -> int:
        """Total degree; the zero polynomial reports -1."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def degree_in(self, index: int) -> int:
        if not self.terms:
            return -1
        return max(e[index] for e in self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- term access -------------------------------------------------------

    def leading_term(self) -> tuple[Exponent, Fraction]:
        """Greatest term under graded lex (total degree, then exponent tuple)."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        exp = max(self.terms, key=_grlex_key)
        return exp, self.terms[exp]

    def sorted_terms(self) -> list[tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if self.vars != other.vars:
            raise DimensionMismatchError(
                f"variable contexts differ: {self.vars} vs {other.vars}"
            )

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        if not self.terms:
            return other
        if not other.terms:
            return self
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, _ZERO) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Polynomial._raw(self.vars, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        if not other.terms:
            return self
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, _ZERO) - c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Polynomial._raw(self.vars, out)

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.vars, {e: -c for e, c in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        if not self.terms or not other.terms:
            return Polynomial._raw(self.vars, {})
        if len(other.terms) < len(self.terms):
            self, other = other, self
        out: dict = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                s = out.get(e, _ZERO) + ca * cb
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return Polynomial._raw(self.vars, out)

    def scale(self, value) -> "Polynomial":
        value = Fraction(value)
        if value == 0:
            return Polynomial._raw(self.vars, {})
        return Polynomial._raw(
            self.vars, {e: c * value for e, c in self.terms.items()}
        )

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("polynomial powers take non-negative integer exponents")
        result = Polynomial.constant(self.vars, 1)
        base = self
        n = exponent
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def mul_monomial(self, exp: Exponent, coeff: Fraction) -> "Polynomial":
        if coeff == 0:
            return Polynomial._raw(self.vars, {})
        return Polynomial._raw(
            self.vars,
            {tuple(a + b for a, b in zip(e, exp)): c * coeff for e, c in self.terms.items()},
        )

    # -- calculus and evaluation -------------------------------------------

    def derivative(self, index: int) -> "Polynomial":
        out: dict = {}
        for e, c in self.terms.items():
            k = e[index]
            if k == 0:
                continue
            de = list(e)
            de[index] = k - 1
            de = tuple(de)
            s = out.get(de, _ZERO) + c * k
            if s:
                out[de] = s
            else:
                out.pop(de, None)
        return Polynomial._raw(self.vars, out)

    def evaluate(self, point: Sequence) -> Fraction:
        if len(point) != len(self.vars):
            raise DimensionMismatchError(
                f"point has {len(point)} coordinates, context has {len(self.vars)}"
            )
        vals = [Fraction(v) for v in point]
        total = _ZERO
        for e, c in self.terms.items():
            term = c
            for v, k in zip(vals, e):
                if k:
                    term *= v ** k
            total += term
        return total

    # -- canonical identity --------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.vars, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({self.vars!r}, {poly_to_text(self)!r})"

    def __str__(self) -> str:
        return poly_to_text(self)

    # internal: construct without re-filtering zero coefficients
    @classmethod
    def _raw(cls, variables, terms) -> "Polynomial":
        obj = object.__new__(cls)
        obj.vars = variables
        obj.terms = terms
        obj._hash = None
        return obj


# ---------------------------------------------------------------------------
# Polynomial GCD (primitive PRS) and exact division
# ---------------------------------------------------------------------------


def divexact(a: Polynomial, b: Polynomial) -> Polynomial:
    """Exact polynomial quotient a / b; raises ValueError when b does not
    divide a."""
    if b.is_zero():
        raise ZeroDenominatorError("division by the zero polynomial")
    if a.is_zero():
        return a
    if b.is_constant():
        return a.scale(1 / b.constant_value())
    lb_exp, lb_coeff = b.leading_term()
    quot: dict = {}
    rem = a
    while rem.terms:
        le, lc = rem.leading_term()
        qe = tuple(x - y for x, y in zip(le, lb_exp))
        if any(x < 0 for x in qe):
            raise ValueError("not an exact polynomial division")
        qc = lc / lb_coeff
        quot[qe] = quot.get(qe, _ZERO) + qc
        rem = rem - b.mul_monomial(qe, qc)
    return Polynomial(a.vars, quot)


def _int_content_and_sign(p: Polynomial) -> tuple[Polynomial, Fraction]:
    """Scale p to integer coefficients with content 1 and positive grlex
    leading coefficient.  Returns (primitive_poly, scale) with
    p == primitive_poly * scale."""
    if p.is_zero():
        return p, _ONE
    denom_lcm = 1
    for c in p.terms.values():
        denom_lcm = denom_lcm * c.denominator // math.gcd(denom_lcm, c.denominator)
    numer_gcd = 0
    for c in p.terms.values():
        numer_gcd = math.gcd(numer_gcd, abs(c.numerator * (denom_lcm // c.denominator)))
    scale = Fraction(numer_gcd, denom_lcm)
    _, lead = p.leading_term()
    if lead < 0:
        scale = -scale
    return p.scale(1 / scale), scale


def _min_exponents(p: Polynomial) -> Exponent:
    its = iter(p.terms)
    first = next(its)
    mins = list(first)
    for e in its:
        for i, k in enumerate(e):
            if k < mins[i]:
                mins[i] = k
    return tuple(mins)


def _coefficients_in(p: Polynomial, index: int) -> dict[int, Polynomial]:
    """View p as univariate in variable ``index`` with polynomial coefficients
    (which have exponent 0 in that variable)."""
    buckets: dict[int, dict] = {}
    for e, c in p.terms.items():
        k = e[index]
        re = list(e)
        re[index] = 0
        buckets.setdefault(k, {})[tuple(re)] = c
    return {k: Polynomial(p.vars, t) for k, t in buckets.items()}


def _from_coefficients(vars_, index: int, coeffs: Mapping[int, Polynomial]) -> Polynomial:
    terms: dict = {}
    for k, poly in coeffs.items():
        for e, c in poly.terms.items():
            ne = list(e)
            ne[index] = k
            terms[tuple(ne)] = c
    return Polynomial(vars_, terms)


def _content_wrt(p: Polynomial, index: int) -> Polynomial:
    coeffs = _coefficients_in(p, index)
    g = Polynomial.zero(p.vars)
    for poly in coeffs.values():
        g = poly_gcd(g, poly)
        if g.is_one():
            break
    return g


def _pseudo_steps(u: Polynomial, v: Polynomial, index: int) -> Polynomial:
    """Remainder of a fraction-free division of u by v in the main variable.

    Equal to the classical pseudo-remainder up to a nonzero factor, which is
    irrelevant because callers take primitive parts."""
    dv = v.degree_in(index)
    lv = _coefficients_in(v, index)[dv]
    r = u
    while not r.is_zero():
        dr = r.degree_in(index)
        if dr < dv:
            break
        lr = _coefficients_in(r, index)[dr]
        shift = [0] * len(u.vars)
        shift[index] = dr - dv
        r = r * lv - v.mul_monomial(tuple(shift), _ONE) * lr
    return r


def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Polynomial GCD up to rational scale, returned as a primitive
    integer-coefficient polynomial with positive grlex leading coefficient.

    Content is ignored: the GCD of two nonzero constants is 1.  Computed by
    primitive pseudo-remainder sequences, recursing on the variable set.
    """
    if a.is_zero():
        return _int_content_and_sign(b)[0]
    if b.is_zero():
        return _int_content_and_sign(a)[0]
    a = _int_content_and_sign(a)[0]
    b = _int_content_and_sign(b)[0]
    if a.is_constant() or b.is_constant():
        return Polynomial.constant(a.vars, 1)

    # split off the common monomial factor cheaply
    ma = _min_exponents(a)
    mb = _min_exponents(b)
    common = tuple(min(x, y) for x, y in zip(ma, mb))
    if any(ma):
        a = a.mul_monomial(tuple(-x for x in ma), _ONE)
    if any(mb):
        b = b.mul_monomial(tuple(-x for x in mb), _ONE)

    shared = [
        i
        for i in range(len(a.vars))
        if a.degree_in(i) > 0 and b.degree_in(i) > 0
    ]
    if not shared:
        g = Polynomial.constant(a.vars, 1)
    else:
        main = min(shared, key=lambda i: min(a.degree_in(i), b.degree_in(i)))
        g = _gcd_prs(a, b, main)
    if any(common):
        g = g.mul_monomial(common, _ONE)
    return g


def _gcd_prs(a: Polynomial, b: Polynomial, index: int) -> Polynomial:
    ca = _content_wrt(a, index)
    cb = _content_wrt(b, index)
    cont = poly_gcd(ca, cb)
    pa = divexact(a, ca)
    pb = divexact(b, cb)
    if pa.degree_in(index) < pb.degree_in(index):
        pa, pb = pb, pa
    while True:
        r = _pseudo_steps(pa, pb, index)
        if r.is_zero():
            break
        r = divexact(r, _content_wrt(r, index))
        pa, pb = pb, _int_content_and_sign(r)[0]
        if pb.degree_in(index) == 0:
            pb = Polynomial.constant(a.vars, 1)
            break
    g = cont * _int_content_and_sign(pb)[0]
    return _int_content_and_sign(g)[0]


# ---------------------------------------------------------------------------
# Rational functions
# ---------------------------------------------------------------------------


class RationalFunction:
    """Quotient of polynomials in canonical form.

    Canonical means: numerator and denominator share no polynomial factor,
    and the denominator is monic under graded lex (so a polynomial has
    denominator 1).  Equality and hashing are structural, which by
    canonicality coincides with equality of functions.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Polynomial, den: Polynomial):
        # trusted constructor; use normalize() for arbitrary pairs
        self.num = num
        self.den = den
        self._hash = None

    @staticmethod
    def normalize(num: Polynomial, den: Polynomial) -> "RationalFunction":
        if num.vars != den.vars:
            raise DimensionMismatchError(
                f"variable contexts differ: {num.vars} vs {den.vars}"
            )
        if den.is_zero():
            raise ZeroDenominatorError("zero denominator")
        if num.is_zero():
            return RationalFunction(num, Polynomial.constant(num.vars, 1))
        if not den.is_constant():
            g = poly_gcd(num, den)
            if not g.is_one():
                num = divexact(num, g)
                den = divexact(den, g)
        _, lead = den.leading_term()
        if lead != 1:
            num = num.scale(1 / lead)
            den = den.scale(1 / lead)
        return RationalFunction(num, den)

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "RationalFunction":
        if p.is_zero():
            return cls(p, Polynomial.constant(p.vars, 1))
        return cls(p, Polynomial.constant(p.vars, 1))

    @classmethod
    def constant(cls, variables: Sequence[str], value) -> "RationalFunction":
        return cls.from_polynomial(Polynomial.constant(variables, value))

    @classmethod
    def variable(cls, variables: Sequence[str], index: int) -> "RationalFunction":
        return cls.from_polynomial(Polynomial.variable(variables, index))

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "RationalFunction":
        return cls.from_polynomial(Polynomial.zero(variables))

    # -- predicates ----------------------------------------------------------

    @property
    def vars(self) -> tuple:
        return self.num.vars

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_one()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("rational function is not constant")
        return self.num.constant_value()

    def __bool__(self) -> bool:
        return not self.num.is_zero()

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other: "RationalFunction") -> None:
        if self.vars != other.vars:
            raise DimensionMismatchError(
                f"variable contexts differ: {self.vars} vs {other.vars}"
            )

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            num = self.num + other.num
            if self.den.is_one():
                return RationalFunction(num, self.den)
            return RationalFunction.normalize(num, self.den)
        if self.den.is_one():
            # gcd(num*other.den + other.num, other.den) = gcd(other.num, other.den) = 1
            return RationalFunction(self.num * other.den + other.num, other.den)
        if other.den.is_one():
            return RationalFunction(self.num + other.num * self.den, self.den)
        return RationalFunction.normalize(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return self + (-other)

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __mul__(self, other: "RationalFunction") -> "RationalFunction":
        self._check(other)
        if self.is_zero() or other.is_zero():
            return RationalFunction.zero(self.vars)
        if self.den.is_one() and other.den.is_one():
            return RationalFunction(self.num * other.num, self.den)
        # cross-cancel so the product needs no further reduction
        na, da = self.num, self.den
        nb, db = other.num, other.den
        g1 = poly_gcd(na, db)
        if not g1.is_one():
            na = divexact(na, g1)
            db = divexact(db, g1)
        g2 = poly_gcd(nb, da)
        if not g2.is_one():
            nb = divexact(nb, g2)
            da = divexact(da, g2)
        num = na * nb
        den = da * db
        _, lead = den.leading_term()
        if lead != 1:
            num = num.scale(1 / lead)
            den = den.scale(1 / lead)
        return RationalFunction(num, den)

    def __truediv__(self, other: "RationalFunction") -> "RationalFunction":
        self._check(other)
        if other.is_zero():
            raise ZeroDenominatorError("division by the zero function")
        return self * RationalFunction.normalize(other.den, other.num)

    def scale(self, value) -> "RationalFunction":
        value = Fraction(value)
        if value == 0:
            return RationalFunction.zero(self.vars)
        return RationalFunction(self.num.scale(value), self.den)

    def __pow__(self, exponent: int) -> "RationalFunction":
        if not isinstance(exponent, int):
            raise ValueError("powers take integer exponents")
        if exponent < 0:
            if self.is_zero():
                raise ZeroDenominatorError("negative power of the zero function")
            return RationalFunction.normalize(self.den, self.num) ** (-exponent)
        num = self.num ** exponent
        den = self.den ** exponent
        return RationalFunction(num, den)

    # -- calculus and evaluation ----------------------------------------------

    def derivative(self, index: int) -> "RationalFunction":
        """Exact partial derivative with respect to variable ``index``."""
        dn = self.num.derivative(index)
        if self.den.is_one():
            return RationalFunction(dn, self.den)
        dd = self.den.derivative(index)
        return RationalFunction.normalize(
            dn * self.den - self.num * dd, self.den * self.den
        )

    def evaluate(self, point: Sequence) -> Fraction:
        dval = self.den.evaluate(point)
        if dval == 0:
            raise PoleError(f"denominator vanishes at {tuple(map(str, point))}")
        return self.num.evaluate(point) / dval

    # -- identity -------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def __repr__(self) -> str:
        return f"RationalFunction({rf_to_text(self)!r})"

    def __str__(self) -> str:
        return rf_to_text(self)


def normalize(num: Polynomial, den: Polynomial) -> RationalFunction:
    """Reduce a numerator/denominator pair to canonical form."""
    return RationalFunction.normalize(num, den)


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------


def _monomial_text(variables: Sequence[str], exp: Exponent) -> str:
    parts = []
    for name, k in zip(variables, exp):
        if k == 0:
            continue
        parts.append(name if k == 1 else f"{name}^{k}")
    return "*".join(parts)


def poly_to_text(p: Polynomial) -> str:
    """Render a polynomial in the expression grammar, terms in descending
    graded-lex order."""
    if p.is_zero():
        return "0"
    pieces: list[str] = []
    for exp, coeff in p.sorted_terms():
        mono = _monomial_text(p.vars, exp)
        mag = abs(coeff)
        if not mono:
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        if not pieces:
            pieces.append(body if coeff > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(pieces)


def rf_to_text(f: RationalFunction) -> str:
    """Render a rational function; reparsing yields the identical canonical
    object."""
    if f.den.is_one():
        return poly_to_text(f.num)
    return f"({poly_to_text(f.num)})/({poly_to_text(f.den)})"


def is_simple_factor(f: RationalFunction) -> bool:
    """True when the printed form needs no parentheses as a '*' factor:
    a single monomial term with positive coefficient and denominator 1."""
    if not f.den.is_one():
        return False
    if len(f.num.terms) != 1:
        return False
    coeff = next(iter(f.num.terms.values()))
    return coeff > 0


# ---------------------------------------------------------------------------
# Expression AST and parser
# ---------------------------------------------------------------------------


class ExprNode:
    """Base class for parsed expression nodes."""

    __slots__ = ()


class Const(ExprNode):
    __slots__ = ("value",)

    def __init__(self, value: Fraction):
        self.value = value


class Var(ExprNode):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index


class BinOp(ExprNode):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: ExprNode, right: ExprNode):
        self.op = op  # one of + - * /
        self.left = left
        self.right = right


class Neg(ExprNode):
    __slots__ = ("arg",)

    def __init__(self, arg: ExprNode):
        self.arg = arg


class Pow(ExprNode):
    __slots__ = ("base", "exponent")

    def __init__(self, base: ExprNode, exponent: int):
        self.base = base
        self.exponent = exponent


_OPERATOR_CHARS = "+-*/^()"


class Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind  # int | ident | op | end
        self.text = text
        self.pos = pos

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.pos})"


def tokenize(text: str) -> list[Token]:
    """Split expression/form text into integer, identifier, and operator
    tokens.  Raises ExprSyntaxError on any other character."""
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], i))
            i = j
            continue
        if ch in _OPERATOR_CHARS:
            tokens.append(Token("op", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(Token("end", "", n))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.k = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.k]

    def peek(self, offset: int = 1) -> Token:
        j = min(self.k + offset, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        tok = self.tokens[self.k]
        if tok.kind != "end":
            self.k += 1
        return tok

    def expect_op(self, text: str) -> Token:
        tok = self.current
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected {text!r}", tok.pos)
        return self.advance()


class ExprParser:
    """Recursive-descent parser for the scalar expression grammar:

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := base ('^' integer)?
        base   := integer | identifier | '(' expr ')' | '-' factor

    Rational literals such as ``3/4`` and ``-1/2`` come out of the division
    and negation rules with identical values.  A ``stop_idents`` set makes
    identifiers (used for differentials in form context) terminate the
    expression instead of being consumed.
    """

    def __init__(self, stream: _TokenStream, stop_idents=frozenset()):
        self.stream = stream
        self.stop_idents = stop_idents

    def _at_stop_ident(self) -> bool:
        tok = self.stream.current
        return tok.kind == "ident" and tok.text in self.stop_idents

    def parse_expr(self) -> ExprNode:
        node = self.parse_term()
        while True:
            tok = self.stream.current
            if tok.kind == "op" and tok.text in "+-":
                # in form context a +/- starting a differential term belongs
                # to the enclosing form sum, not to this expression
                nxt = self.stream.peek()
                if nxt.kind == "ident" and nxt.text in self.stop_idents:
                    break
                self.stream.advance()
                rhs = self.parse_term()
                node = BinOp(tok.text, node, rhs)
            else:
                break
        return node

    def parse_term(self) -> ExprNode:
        node = self.parse_factor()
        while True:
            tok = self.stream.current
            if tok.kind == "op" and tok.text in "*/":
                nxt = self.stream.peek()
                if tok.text == "*" and nxt.kind == "ident" and nxt.text in self.stop_idents:
                    break  # leave '*' for the form parser (coefficient * diff)
                self.stream.advance()
                rhs = self.parse_factor()
                node = BinOp(tok.text, node, rhs)
            else:
                break
        return node

    def parse_factor(self) -> ExprNode:
        tok = self.stream.current
        if tok.kind == "op" and tok.text == "-":
            self.stream.advance()
            return Neg(self.parse_factor())
        node = self.parse_base()
        tok = self.stream.current
        if tok.kind == "op" and tok.text == "^":
            nxt = self.stream.peek()
            if nxt.kind == "ident" and nxt.text in self.stop_idents:
                # wedge between differentials, not a power
                return node
            self.stream.advance()
            node = Pow(node, self._parse_integer())
        return node

    def _parse_integer(self) -> int:
        sign = 1
        tok = self.stream.current
        if tok.kind == "op" and tok.text == "-":
            sign = -1
            self.stream.advance()
            tok = self.stream.current
        if tok.kind != "int":
            raise ExprSyntaxError("expected integer exponent", tok.pos)
        self.stream.advance()
        return sign * int(tok.text)

    def parse_base(self) -> ExprNode:
        tok = self.stream.current
        if tok.kind == "int":
            self.stream.advance()
            return Const(Fraction(int(tok.text)))
        if tok.kind == "ident":
            if tok.text in self.stop_idents:
                raise ExprSyntaxError(
                    f"differential {tok.text!r} not allowed inside a coefficient",
                    tok.pos,
                )
            self.stream.advance()
            return _Name(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.stream.advance()
            node = self.parse_expr()
            self.stream.expect_op(")")
            return node
        raise ExprSyntaxError(f"expected a value, found {tok.text or 'end of input'!r}", tok.pos)


class _Name(ExprNode):
    """Unresolved identifier; resolved to Var or Const at lowering."""

    __slots__ = ("name", "pos")

    def __init__(self, name: str, pos: int):
        self.name = name
        self.pos = pos


def lower(
    node: ExprNode,
    variables: Sequence[str],
    params: Mapping[str, Fraction] | None = None,
) -> RationalFunction:
    """Evaluate an AST into a canonical RationalFunction over ``variables``.

    Raises UnknownIdentifierError for unresolved names and
    ZeroDenominatorError when dividing by an identically zero expression.
    """
    params = params or {}
    variables = tuple(variables)
    index = {name: i for i, name in enumerate(variables)}

    def go(n: ExprNode) -> RationalFunction:
        if isinstance(n, Const):
            return RationalFunction.constant(variables, n.value)
        if isinstance(n, _Name):
            if n.name in index:
                return RationalFunction.variable(variables, index[n.name])
            if n.name in params:
                return RationalFunction.constant(variables, params[n.name])
            raise UnknownIdentifierError(
                f"unknown identifier {n.name!r} (declared variables: {', '.join(variables)})"
            )
        if isinstance(n, Var):
            return RationalFunction.variable(variables, n.index)
        if isinstance(n, Neg):
            return -go(n.arg)
        if isinstance(n, Pow):
            return go(n.base) ** n.exponent
        if isinstance(n, BinOp):
            left = go(n.left)
            right = go(n.right)
            if n.op == "+":
                return left + right
            if n.op == "-":
                return left - right
            if n.op == "*":
                return left * right
            if n.op == "/":
                if right.is_zero():
                    raise ZeroDenominatorError(
                        "division by an identically zero expression"
                    )
                return left / right
        raise TypeError(f"unexpected AST node {n!r}")

    return go(node)


def parse_ast(text: str) -> ExprNode:
    """Parse expression text to an AST without resolving identifiers."""
    stream = _TokenStream(tokenize(text))
    parser = ExprParser(stream)
    node = parser.parse_expr()
    tok = stream.current
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return node


def parse_expr(
    text: str,
    variables: Sequence[str],
    params: Mapping[str, Fraction] | None = None,
) -> RationalFunction:
    """Parse expression text and lower it to a canonical RationalFunction."""
    return lower(parse_ast(text), variables, params)
