"""Floating-point cross-checks: trajectory integration, invariant drift, and
advected-loop line integrals.

Exact rational coefficients are compiled once into plain Python/numpy
expressions (so repeated evaluation costs no exact arithmetic), and all
integration uses classical fixed-step RK4 in double precision.  Loop line
integrals use the composite midpoint rule on the polyline: coefficients are
evaluated at segment midpoints and dotted with the segment increments.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DegreeError, DimensionMismatchError, PoleError
from .exprcore import Polynomial, RationalFunction
from .extcalc import DiffForm, VectorField

DEFAULT_DT = 1e-3
DEFAULT_T_END = 10.0
DEFAULT_LOOP_POINTS = 256
DEFAULT_LOOP_RADIUS = 0.05


# ---------------------------------------------------------------------------
# Compilation of exact coefficients to float expressions
# ---------------------------------------------------------------------------


def _poly_source(p: Polynomial) -> str:
    if p.is_zero():
        return "0.0"
    pieces = []
    for exp, coeff in p.sorted_terms():
        factors = [repr(float(coeff))]
        for i, k in enumerate(exp):
            if k == 1:
                factors.append(f"v{i}")
            elif k > 1:
                factors.append(f"v{i}**{k}")
        pieces.append("*".join(factors))
    return "(" + " + ".join(pieces) + ")"


def _rf_source(f: RationalFunction) -> str:
    if f.den.is_one():
        return _poly_source(f.num)
    return f"({_poly_source(f.num)})/({_poly_source(f.den)})"


class CompiledMap:
    """Several scalar rational functions compiled into one tuple expression.

    Calling with a state vector returns a float tuple; calling with an
    (m, n) array of states returns an (m, k) array.  Division by zero at an
    evaluation point raises PoleError.
    """

    def __init__(self, functions: Sequence[RationalFunction]):
        functions = list(functions)
        if not functions:
            raise ValueError("need at least one function")
        self.vars = functions[0].vars
        for f in functions:
            if f.vars != self.vars:
                raise DimensionMismatchError("functions use different variable contexts")
        source = "(" + ", ".join(_rf_source(f) for f in functions) + ")"
        self._code = compile(source, "<compiled-map>", "eval")
        self.arity = len(functions)

    def _env(self, state) -> dict:
        return {f"v{i}": state[..., i] for i in range(len(self.vars))}

    def __call__(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        try:
            with np.errstate(divide="raise", invalid="raise"):
                values = eval(self._code, {"__builtins__": {}}, self._env(state))
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise PoleError(f"denominator vanished during evaluation: {exc}") from exc
        if state.ndim == 1:
            return np.array(values, dtype=float)
        return np.stack([np.broadcast_to(v, state.shape[:-1]) for v in values], axis=-1)


def compile_field(X: VectorField) -> CompiledMap:
    return CompiledMap(X.components)


def compile_scalar(f: RationalFunction) -> CompiledMap:
    return CompiledMap([f])


def _one_form_coefficients(J: DiffForm) -> list[RationalFunction]:
    if J.degree != 1:
        raise DegreeError("loop integrals are defined for 1-forms")
    n = len(J.vars)
    return [J.coefficient((i,)) for i in range(n)]


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of dx/dt = X(x): strictly increasing times and one
    state row per time."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states have different lengths")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _rk4_steps(field: CompiledMap, state: np.ndarray, t_end: float, dt: float):
    """Yield (t, state) after each step; the caller owns recording."""
    t = 0.0
    while t < t_end - 1e-12 * max(1.0, t_end):
        h = min(dt, t_end - t)
        k1 = field(state)
        k2 = field(state + (h / 2) * k1)
        k3 = field(state + (h / 2) * k2)
        k4 = field(state + h * k3)
        state = state + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise FloatingPointError(f"non-finite state at t={t + h}")
        t += h
        yield t, state


def rk4_integrate(
    X: VectorField | CompiledMap,
    x0: Sequence[float],
    t_end: float,
    dt: float = DEFAULT_DT,
) -> Trajectory:
    """Integrate dx/dt = X(x) with classical 4th-order Runge-Kutta.

    Fixed step dt (the final step is shortened to land on t_end exactly);
    local error O(dt^5).  Raises PoleError if a denominator of X vanishes at
    an evaluation point and FloatingPointError if the state leaves the
    representable range.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    field = X if isinstance(X, CompiledMap) else compile_field(X)
    state = np.array([float(v) for v in x0], dtype=float)
    if len(state) != len(field.vars):
        raise DimensionMismatchError(
            f"initial state has {len(state)} components, field has {len(field.vars)}"
        )
    times = [0.0]
    states = [state]
    for t, s in _rk4_steps(field, state, t_end, dt):
        times.append(t)
        states.append(s)
    return Trajectory(np.array(times), np.array(states))


def invariant_drift(traj: Trajectory, invariant: RationalFunction | CompiledMap) -> float:
    """Largest deviation |I(x(t)) - I(x(0))| over the trajectory samples."""
    if len(traj.states) == 0:
        raise ValueError("empty trajectory")
    func = invariant if isinstance(invariant, CompiledMap) else compile_scalar(invariant)
    values = func(traj.states)[..., 0]
    return float(np.max(np.abs(values - values[0])))


# ---------------------------------------------------------------------------
# Loops
# ---------------------------------------------------------------------------


MIN_LOOP_POINTS = 16


@dataclass(frozen=True)
class LoopSample:
    """Closed polyline through m >= 16 phase points.

    ``points`` holds the m distinct vertices; the closing segment from the
    last vertex back to the first is implicit.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("loop points must form an (m, n) array")
        if len(pts) < MIN_LOOP_POINTS:
            raise ValueError(f"a loop needs at least {MIN_LOOP_POINTS} points")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def circle_loop(
    center: Sequence[float],
    radius: float,
    m: int = DEFAULT_LOOP_POINTS,
    axes: tuple[int, int] = (0, 1),
) -> LoopSample:
    """Circle of the given radius in a coordinate plane around ``center``."""
    center = np.array([float(v) for v in center], dtype=float)
    theta = 2 * np.pi * np.arange(m) / m
    pts = np.repeat(center[None, :], m, axis=0)
    pts[:, axes[0]] += radius * np.cos(theta)
    pts[:, axes[1]] += radius * np.sin(theta)
    return LoopSample(pts)


def level_set_loop(
    invariants: Sequence[RationalFunction],
    center: Sequence[float],
    radius: float,
    m: int = DEFAULT_LOOP_POINTS,
    tol: float = 1e-13,
) -> LoopSample:
    """Circle around ``center`` lying on the common level set of the given
    scalar invariants.

    A circle in the tangent plane of the level set (the null space of the
    invariant gradients at the center) is projected onto the level set by
    Gauss-Newton iteration.  Loops built this way probe the transport of
    1-forms along the flow within an invariant leaf, which is where loop
    integrals of leaf-closed forms are conserved quantities.
    """
    center = np.array([float(v) for v in center], dtype=float)
    n = len(center)
    invariants = list(invariants)
    if not invariants:
        raise ValueError("need at least one invariant to define a level set")
    values = CompiledMap(invariants)
    grads = CompiledMap(
        [inv.derivative(i) for inv in invariants for i in range(n)]
    )
    k = len(invariants)

    def grad_matrix(q: np.ndarray) -> np.ndarray:
        return grads(q).reshape(k, n)

    target = values(center)
    g0 = grad_matrix(center)
    # orthonormal basis of the tangent plane: last two right-singular vectors
    _, svals, vt = np.linalg.svd(g0)
    rank = int(np.sum(svals > 1e-12 * max(1.0, svals[0])))
    if n - rank < 2:
        raise ValueError("level set has no 2-dimensional tangent plane here")
    b1, b2 = vt[-2], vt[-1]

    theta = 2 * np.pi * np.arange(m) / m
    pts = center[None, :] + radius * (
        np.cos(theta)[:, None] * b1[None, :] + np.sin(theta)[:, None] * b2[None, :]
    )
    for row in range(m):
        q = pts[row]
        for _ in range(60):
            residual = values(q) - target
            if np.max(np.abs(residual)) < tol:
                break
            step, *_ = np.linalg.lstsq(grad_matrix(q), residual, rcond=None)
            q = q - step
        else:
            raise ValueError("level-set projection did not converge")
        pts[row] = q
    return LoopSample(pts)


def loop_line_integral(J: DiffForm | CompiledMap, loop: LoopSample) -> float:
    """Line integral of a 1-form over the closed polyline, midpoint rule."""
    coeffs = (
        J if isinstance(J, CompiledMap) else CompiledMap(_one_form_coefficients(J))
    )
    pts = loop.points
    nxt = np.roll(pts, -1, axis=0)
    mid = 0.5 * (pts + nxt)
    values = coeffs(mid)
    return float(np.einsum("ij,ij->", values, nxt - pts))


def advect_loop_integral(
    X: VectorField,
    loop: LoopSample,
    J: DiffForm,
    t_end: float,
    dt: float = DEFAULT_DT,
) -> tuple[float, float]:
    """Line integral of the 1-form J over the loop before and after every
    vertex is advected by the flow for time t_end."""
    field = compile_field(X)
    coeffs = CompiledMap(_one_form_coefficients(J))
    before = loop_line_integral(coeffs, loop)
    state = loop.points
    for _, state in _rk4_steps(field, state, t_end, dt):
        pass
    after = loop_line_integral(coeffs, LoopSample(state))
    return before, after


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def trajectory_report(
    traj: Trajectory,
    invariants: Sequence[tuple[str, RationalFunction]] = (),
    stride: int = 1,
) -> str:
    """Tab-separated table: time, state components, then one column per
    named invariant."""
    columns = ["t"] + [f"x{i+1}" for i in range(traj.states.shape[1])]
    funcs: list[tuple[str, CompiledMap]] = []
    for name, inv in invariants:
        columns.append(name)
        funcs.append((name, compile_scalar(inv)))
    lines = ["\t".join(columns)]
    idx = list(range(0, len(traj.times), stride))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    sampled = traj.states[idx]
    inv_values = [f(sampled)[..., 0] for _, f in funcs]
    for row, i in enumerate(idx):
        cells = [repr(float(traj.times[i]))]
        cells += [repr(float(v)) for v in traj.states[i]]
        cells += [repr(float(vals[row])) for vals in inv_values]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
