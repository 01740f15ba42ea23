"""Mechanics layer: bracket-generated flows, vector Hamiltonians, direct
factorization of (n-1)-forms into 1-forms, certificate verification, and
classification of divergence-free flows.

A divergence-free field X on R^n corresponds to the closed (n-1)-form
``w = flow_to_form(X)``.  Because w is closed and polynomial fields have
polynomial flow forms, the radial homotopy operator produces an (n-2)-form h
with d(h) = w (the vector Hamiltonian).  A *certificate* is an ordered list
of forms whose wedge is claimed to reproduce w (up to a constant); its factor
degrees sum to n-1.  The classification reads the certificate structure:
all factors exact 1-forms, all 1-forms but not all exact, or some factor of
degree two and higher.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    DegreeError,
    DimensionMismatchError,
    NonZeroDivergenceError,
    UnsupportedCoefficientsError,
)
from .exprcore import Polynomial, RationalFunction
from .extcalc import (
    DiffForm,
    VectorField,
    divergence,
    ext_d,
    flow_to_form,
    is_closed,
    lie_derivative,
    wedge_all,
)


# ---------------------------------------------------------------------------
# Bracket flows
# ---------------------------------------------------------------------------


def _det(rows: list[list[RationalFunction]]) -> RationalFunction:
    """Determinant by cofactor expansion; fine for the n <= 6 sizes used here."""
    size = len(rows)
    if size == 1:
        return rows[0][0]
    if size == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    ctx = rows[0][0].vars
    total = RationalFunction.zero(ctx)
    for j, top in enumerate(rows[0]):
        if top.is_zero():
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        term = top * _det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def nambu_flow(invariants: Sequence[RationalFunction]) -> VectorField:
    """Build the flow generated by n-1 scalar invariants on R^n.

    Component i is (-1)^i times the Jacobian minor of the invariants with
    column i removed, so that ``flow_to_form(result)`` equals
    dI_1 ^ ... ^ dI_(n-1) exactly.  For n = 3 this is the cross product of
    the two gradients; for n = 2 it is the classical Hamiltonian field
    (dx_1/dt, dx_2/dt) = (dH/dx_2, -dH/dx_1).
    """
    invariants = list(invariants)
    if not invariants:
        raise DimensionMismatchError("need at least one invariant")
    ctx = invariants[0].vars
    n = len(ctx)
    if len(invariants) != n - 1:
        raise DimensionMismatchError(
            f"expected {n - 1} invariants for {n} variables, got {len(invariants)}"
        )
    for f in invariants:
        if f.vars != ctx:
            raise DimensionMismatchError("invariants use different variable contexts")
    jac = [[f.derivative(j) for j in range(n)] for f in invariants]
    comps = []
    for i in range(n):
        minor = [row[:i] + row[i + 1 :] for row in jac]
        d = _det(minor) if minor else RationalFunction.constant(ctx, 1)
        comps.append(d if i % 2 == 0 else -d)
    return VectorField(comps)


# ---------------------------------------------------------------------------
# Radial homotopy operator
# ---------------------------------------------------------------------------


def homotopy_operator(a: DiffForm) -> DiffForm:
    """Antiderivative candidate K(a) for polynomial forms of degree >= 1.

    For a monomial term m(x) dx_I of polynomial degree p and form degree k,
    K contributes the contraction of the term with the Euler field
    (x_1, ..., x_n) scaled by 1/(p + k).  Satisfies
    d(K(a)) + K(d(a)) = a, hence d(K(a)) = a whenever a is closed.
    """
    if a.degree == 0:
        raise DegreeError("the homotopy operator needs a form of degree >= 1")
    if not a.is_polynomial():
        raise UnsupportedCoefficientsError(
            "the radial homotopy operator supports polynomial coefficients only"
        )
    ctx = a.vars
    k = a.degree
    out = DiffForm.zero(ctx, k - 1)
    collected: dict = {}
    for idx, coeff in a.terms.items():
        for exp, c in coeff.num.terms.items():
            p = sum(exp)
            factor = Fraction(c, p + k)
            # contraction of x^exp dx_idx with the Euler field
            for j, v in enumerate(idx):
                bumped = list(exp)
                bumped[v] += 1
                mono = (tuple(bumped), factor if j % 2 == 0 else -factor)
                rest = idx[:j] + idx[j + 1 :]
                bucket = collected.setdefault(rest, {})
                e, val = mono
                s = bucket.get(e, Fraction(0)) + val
                if s:
                    bucket[e] = s
                else:
                    bucket.pop(e, None)
    terms = {}
    for rest, bucket in collected.items():
        poly = Polynomial(ctx, bucket)
        if not poly.is_zero():
            terms[rest] = RationalFunction.from_polynomial(poly)
    return out + DiffForm(ctx, k - 1, terms)


def vector_hamiltonian(X: VectorField) -> DiffForm:
    """An (n-2)-form h with d(h) = flow_to_form(X) for a polynomial
    divergence-free field.

    h is gauge-dependent (unique only up to an exact form); this
    implementation returns the radial-homotopy antiderivative.
    """
    div = divergence(X)
    if not div.is_zero():
        raise NonZeroDivergenceError(f"divergence nonzero: {div}")
    if not X.is_polynomial():
        raise UnsupportedCoefficientsError(
            "vector Hamiltonians are computed for polynomial components only"
        )
    return homotopy_operator(flow_to_form(X))


# ---------------------------------------------------------------------------
# Direct factorization of (n-1)-forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Factorization:
    """Result of factoring an (n-1)-form into n-1 one-forms."""

    factors: tuple[DiffForm, ...]
    pivot: int  # variable index whose coefficient was used as pivot

    def __iter__(self):
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, k: int) -> DiffForm:
        return self.factors[k]


def factorize_eq4(w: DiffForm) -> Factorization:
    """Factor a nonzero (n-1)-form w = sum_i A_i dS_i into n-1 one-forms
    whose wedge reproduces w exactly.

    With pivot p = smallest index with A_p != 0 and q the first non-pivot
    index, the factors are

        s * (A_p dx_q - A_q dx_p),   s = (-1)^p  (0-based p),
        (dx_i - (A_i/A_p) dx_p)      for the remaining indices i,

    a purely algebraic identity: closedness of w is not required.  The sign
    s compensates the orientation of the omitted-index basis when the pivot
    is not the first variable.
    """
    ctx = w.vars
    n = len(ctx)
    if w.degree != n - 1:
        raise DegreeError(f"expected an (n-1)-form, got degree {w.degree} with n={n}")
    if w.is_zero():
        raise ValueError("cannot factor the zero form")
    from .extcalc import form_to_flow

    coeffs = form_to_flow(w).components  # A_i with the dS_i sign convention
    pivot = next(i for i in range(n) if not coeffs[i].is_zero())
    others = [i for i in range(n) if i != pivot]
    q = others[0]
    a_p = coeffs[pivot]

    dx = [DiffForm.differential(ctx, i) for i in range(n)]
    first = dx[q].scale(a_p) - dx[pivot].scale(coeffs[q])
    if pivot % 2:
        first = -first
    factors = [first]
    for i in others[1:]:
        factors.append(dx[i] - dx[pivot].scale(coeffs[i] / a_p))
    return Factorization(tuple(factors), pivot)


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertFactor:
    """One certificate factor with its verified structure flags.

    ``exact`` is three-valued: True (antiderivative attached), False
    (not closed, hence not exact), or None (closed with non-polynomial
    coefficients, exactness untestable constructively on this chart).
    """

    form: DiffForm
    closed: bool
    exact: Optional[bool]
    antiderivative: Optional[DiffForm] = None

    @property
    def degree(self) -> int:
        return self.form.degree


@dataclass(frozen=True)
class Certificate:
    """Ordered list of forms claiming to wedge to a flow form.

    Factor degrees must sum to n-1.  Flags are computed at construction:
    closedness by differentiation, exactness constructively through the
    homotopy operator when coefficients are polynomial.
    """

    factors: tuple[CertFactor, ...]

    @staticmethod
    def from_forms(forms: Sequence[DiffForm]) -> "Certificate":
        forms = list(forms)
        if not forms:
            raise ValueError("a certificate needs at least one factor")
        ctx = forms[0].vars
        n = len(ctx)
        total = 0
        entries = []
        for f in forms:
            if f.vars != ctx:
                raise DimensionMismatchError("certificate factors use different contexts")
            total += f.degree
            closed = is_closed(f)
            exact: Optional[bool]
            anti: Optional[DiffForm] = None
            if not closed:
                exact = False
            elif f.degree == 0:
                exact = False  # nonzero 0-forms are never d of anything
            elif f.is_polynomial():
                anti = homotopy_operator(f)
                exact = ext_d(anti) == f
                if not exact:
                    anti = None
            else:
                exact = None
            entries.append(CertFactor(f, closed, exact, anti))
        if total != n - 1:
            raise DegreeError(
                f"certificate degrees sum to {total}, expected n-1 = {n - 1}"
            )
        return Certificate(tuple(entries))

    @property
    def forms(self) -> tuple[DiffForm, ...]:
        return tuple(e.form for e in self.factors)

    def signature(self) -> "Signature":
        return Signature(tuple(sorted((e.degree for e in self.factors), reverse=True)))

    def product(self) -> DiffForm:
        return wedge_all([e.form for e in self.factors])


@dataclass(frozen=True)
class Signature:
    """Multiset of certificate factor degrees, sorted descending."""

    degrees: tuple[int, ...]

    def __post_init__(self):
        if any(k < 1 for k in self.degrees):
            raise DegreeError("signature entries must be >= 1")
        if tuple(sorted(self.degrees, reverse=True)) != self.degrees:
            raise ValueError("signature must be sorted descending")

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.degrees)) + ")"


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of checking w against a certificate product."""

    passed: bool
    scale: Optional[Fraction]
    residual: DiffForm

    def __bool__(self) -> bool:
        return self.passed


def verify_certificate(
    w: DiffForm, cert: Certificate, allow_scale: bool = False
) -> VerificationReport:
    """Check whether the certificate product reproduces w.

    Without scaling the claim is w = J_1 ^ ... ^ J_m exactly.  With
    ``allow_scale`` a single constant rational c with w = c * product is
    solved from the first matching nonzero coefficient pair and then checked
    globally; all comparisons are exact.
    """
    product = cert.product()
    if product.vars != w.vars:
        raise DimensionMismatchError("certificate and form use different contexts")
    if product.degree != w.degree:
        raise DegreeError(
            f"certificate degrees sum to {product.degree}, form degree is {w.degree}"
        )
    scale: Optional[Fraction] = Fraction(1)
    if allow_scale:
        if product.is_zero():
            scale = None if not w.is_zero() else Fraction(1)
        else:
            idx, coeff = product.sorted_terms()[0]
            ratio = w.coefficient(idx) / coeff
            if ratio.is_constant():
                scale = ratio.constant_value()
            else:
                scale = None
    if scale is None:
        return VerificationReport(False, None, w - product)
    residual = w - product.scale(scale)
    return VerificationReport(residual.is_zero(), scale, residual)


# ---------------------------------------------------------------------------
# Invariance checks
# ---------------------------------------------------------------------------


def first_integral_check(X: VectorField, invariant: RationalFunction) -> RationalFunction:
    """Directional derivative X(I) = sum_i X_i dI/dx_i in canonical form;
    identically zero exactly when I is a first integral of the flow."""
    if X.vars != invariant.vars:
        raise DimensionMismatchError("field and invariant use different contexts")
    total = RationalFunction.zero(X.vars)
    for i, comp in enumerate(X.components):
        if comp.is_zero():
            continue
        di = invariant.derivative(i)
        if di.is_zero():
            continue
        total = total + comp * di
    return total


def lie_invariance_check(X: VectorField, form: DiffForm) -> DiffForm:
    """Lie derivative of a form along the flow; the zero form certifies the
    form as an integral invariant."""
    return lie_derivative(X, form)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


class MechanicsClass(Enum):
    NAMBU = "Nambu"
    POINCARE = "Poincare"
    CARTAN = "Cartan"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ClassLabel:
    """Classification outcome plus the provenance of the evidence."""

    label: MechanicsClass
    provenance: str  # "certificate-based" or "eq4-based"
    signature: Signature

    def __str__(self) -> str:
        return f"{self.label.value} ({self.provenance}, signature {self.signature})"


def _classify_factors(factors: Sequence[CertFactor], provenance: str) -> ClassLabel:
    signature = Signature(tuple(sorted((f.degree for f in factors), reverse=True)))
    if any(f.degree >= 2 for f in factors):
        return ClassLabel(MechanicsClass.CARTAN, provenance, signature)
    if all(f.exact is True for f in factors):
        return ClassLabel(MechanicsClass.NAMBU, provenance, signature)
    if any(f.exact is False for f in factors):
        return ClassLabel(MechanicsClass.POINCARE, provenance, signature)
    return ClassLabel(MechanicsClass.UNDETERMINED, provenance, signature)


def classify(X: VectorField, cert: Optional[Certificate] = None) -> ClassLabel:
    """Classify a divergence-free flow by how its flow form splits.

    With a certificate the certificate is first verified against
    flow_to_form(X) (scale allowed); its factor structure then decides:
    every factor an exact 1-form gives Nambu, all 1-forms but not all exact
    gives Poincare, any factor of degree >= 2 gives Cartan.  Without a
    certificate the flow form is factored directly into 1-forms and each
    factor is tested; a closed factor with non-polynomial coefficients
    leaves exactness untestable and the result Undetermined.

    Note: a signature of all ones with a non-exact factor is labelled
    Poincare even in even dimension where a different, coarser reading
    would say Cartan; the signature in the label records the evidence.
    """
    div = divergence(X)
    if not div.is_zero():
        raise NonZeroDivergenceError(f"divergence nonzero: {div}")
    w = flow_to_form(X)
    if cert is not None:
        report = verify_certificate(w, cert, allow_scale=True)
        if not report.passed:
            raise ValueError(
                "certificate does not reproduce the flow form (even up to scale)"
            )
        return _classify_factors(cert.factors, "certificate-based")
    factors = factorize_eq4(w)
    entries = []
    for f in factors:
        closed = is_closed(f)
        if not closed:
            exact: Optional[bool] = False
        elif f.is_polynomial():
            anti = homotopy_operator(f)
            exact = ext_d(anti) == f
        else:
            exact = None
        entries.append(CertFactor(f, closed, exact))
    return _classify_factors(entries, "eq4-based")
