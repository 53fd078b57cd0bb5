"""Classical numerical machinery: quadrature, RK4, damped Newton, shooting.

Every solver here is deliberately plain.  The only non-textbook pieces are
the two endpoint ramps in the RK4 driver, which let initial-value problems
with an integrable endpoint singularity (kernels like t^{-alpha} at the
left end or (1-t)^{-alpha} at the right end) keep their accuracy without
adaptive stepping.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, GridError, SolverError

__all__ = [
    "OdeSystem",
    "NewtonOptions",
    "NewtonResult",
    "Trajectory",
    "BvpSpec",
    "BvpSolution",
    "quad",
    "rk4_solve",
    "newton_solve",
    "shoot_bvp",
]

_RAMP_RATIO = 1.25


@dataclass(frozen=True)
class OdeSystem:
    """First-order system y' = rhs(t, y) of a given dimension.

    ``singular_start`` declares an integrable singularity at the left end
    of the integration interval: the trajectory then starts at t0 + offset
    with a caller-supplied state, and the first interval is traversed with
    geometrically growing substeps.  ``singular_end`` mirrors this at the
    right end (last node clamped to t1 - offset, shrinking substeps).
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    singular_start: bool = False
    singular_end: bool = False
    offset: float = 1e-8

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("OdeSystem dimension must be at least 1")
        if self.offset <= 0.0:
            raise DomainError("singularity offset must be positive")


@dataclass(frozen=True)
class NewtonOptions:
    max_iterations: int = 100
    tolerance: float = 1e-10
    fd_step: float = 1e-7
    max_halvings: int = 30
    # residuals built from finite-difference data carry a noise floor the
    # tolerance cannot see; a stalled iterate below this norm is accepted
    stall_tolerance: float = 0.0
    # declare convergence once the full Newton step falls below this size
    # relative to the iterate; shooting maps whose conditions differ in
    # sensitivity by many orders of magnitude quantise the unknowns before
    # the residual can reach any absolute tolerance
    step_tolerance: float = 0.0

    def __post_init__(self):
        if min(self.max_iterations, self.max_halvings) < 1:
            raise DomainError("iteration limits must be positive")
        if min(self.tolerance, self.fd_step) <= 0.0:
            raise DomainError("tolerance and step must be positive")
        if min(self.stall_tolerance, self.step_tolerance) < 0.0:
            raise DomainError("stall and step tolerances must not be negative")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    history: tuple


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        t.setflags(write=False)
        y.setflags(write=False)

    def component(self, k: int) -> np.ndarray:
        return self.y[:, k]

    def __len__(self) -> int:
        return len(self.t)


# ---------------------------------------------------------------------------
# quadrature

def _uniform_spacing(nodes: np.ndarray) -> float:
    if nodes.ndim != 1 or nodes.size < 2:
        raise GridError("quadrature needs at least 2 nodes")
    steps = np.diff(nodes)
    h = steps[0]
    if np.any(steps <= 0.0) or np.any(np.abs(steps - h) > 1e-12 * max(abs(h), 1.0)):
        raise GridError("quadrature nodes must be uniform and increasing")
    return float(h)


def quad(nodes, values, rule: str = "trapezoid") -> float:
    """Composite quadrature on a uniform grid."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != nodes.shape:
        raise GridError("nodes and values must have the same length")
    h = _uniform_spacing(nodes)
    if rule == "left_rect":
        return h * float(np.sum(values[:-1]))
    if rule == "trapezoid":
        return float(np.trapezoid(values, dx=h))
    raise DomainError(f"unknown quadrature rule {rule!r}")


# ---------------------------------------------------------------------------
# RK4 with endpoint ramps

def _rk4_step(rhs, t: float, h: float, y: np.ndarray) -> np.ndarray:
    k1 = np.asarray(rhs(t, y), dtype=float)
    k2 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(rhs(t + h, y + h * k3), dtype=float)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _ramp_from_start(a: float, b: float, scale: float) -> list:
    # distances from the singular point (at a - scale) grow geometrically
    nodes = [a]
    d = scale
    while d * _RAMP_RATIO < (b - a) + scale:
        d *= _RAMP_RATIO
        nodes.append(a - scale + d)
    nodes.append(b)
    return nodes


def _ramp_to_end(a: float, b: float, scale: float) -> list:
    # mirror image: substeps shrink approaching the singular point at b + scale
    mirrored = _ramp_from_start(0.0, b - a, scale)
    return [b - s for s in reversed(mirrored)]


def rk4_solve(sys: OdeSystem, t0: float, t1: float, initial, steps: int) -> Trajectory:
    """Fixed-step classical RK4 on [t0, t1] with ``steps`` intervals.

    For singular-start systems the initial state is understood to be the
    value at t0 + offset, and the reported grid starts there; similarly a
    singular end clamps the final node to t1 - offset.
    """
    if steps < 1:
        raise GridError("rk4_solve needs at least one step")
    if not t1 > t0:
        raise DomainError("integration interval must have t1 > t0")
    y0 = np.asarray(initial, dtype=float)
    if y0.shape != (sys.dimension,):
        raise DomainError("initial state dimension mismatch")
    h = (t1 - t0) / steps
    if (sys.singular_start or sys.singular_end) and sys.offset >= 0.5 * h:
        raise GridError("step size must exceed twice the singularity offset")

    nodes = t0 + h * np.arange(steps + 1)
    if sys.singular_start:
        nodes[0] = t0 + sys.offset
    if sys.singular_end:
        nodes[-1] = t1 - sys.offset

    out = np.empty((steps + 1, sys.dimension))
    out[0] = y0
    state = y0
    for k in range(steps):
        a, b = nodes[k], nodes[k + 1]
        if k == 0 and sys.singular_start:
            sub = _ramp_from_start(a, b, sys.offset)
        elif k == steps - 1 and sys.singular_end:
            sub = _ramp_to_end(a, b, sys.offset)
        else:
            # near a singular endpoint, substeps stay proportional to the
            # distance from it so t^(-alpha)-type kernels keep RK4 accuracy
            m = 1
            if sys.singular_start:
                m = max(m, math.ceil((b - a) / (0.25 * (a - t0))))
            if sys.singular_end:
                m = max(m, math.ceil((b - a) / (0.25 * (t1 - b))))
            m = min(m, 64)
            sub = np.linspace(a, b, m + 1) if m > 1 else (a, b)
        for s0, s1 in zip(sub[:-1], sub[1:]):
            state = _rk4_step(sys.rhs, s0, s1 - s0, state)
        if not np.all(np.isfinite(state)):
            raise SolverError(
                "state became non-finite during integration", t=float(b), step=k
            )
        out[k + 1] = state
    return Trajectory(nodes, out)


# ---------------------------------------------------------------------------
# damped Newton

def _fd_jacobian(residual, x: np.ndarray, r0: np.ndarray, step: float) -> np.ndarray:
    n = len(x)
    jac = np.empty((len(r0), n))
    for j in range(n):
        hj = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += hj
        jac[:, j] = (np.asarray(residual(xp), dtype=float) - r0) / hj
    return jac


def newton_solve(residual, guess, opts: NewtonOptions | None = None) -> NewtonResult:
    """Damped Newton iteration for residual(x) = 0.

    Steps that fail to reduce the max-norm residual are halved up to the
    damping limit; an accepted step never increases the residual.
    """
    opts = opts or NewtonOptions()
    x = np.asarray(guess, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    if r.shape != x.shape:
        raise DomainError(
            f"residual dimension {r.shape} does not match unknowns {x.shape}"
        )
    history = []
    norm = float(np.max(np.abs(r)))
    history.append(norm)
    for iteration in range(opts.max_iterations):
        if norm <= opts.tolerance:
            return NewtonResult(x, iteration, norm, tuple(history))
        jac = _fd_jacobian(residual, x, r, opts.fd_step)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            try:
                condition = float(np.linalg.cond(jac, 1))
            except np.linalg.LinAlgError:
                condition = math.inf
            raise ConvergenceError(
                "singular Jacobian",
                last_iterate=x.copy(),
                condition=condition,
                residual_history=tuple(history),
            ) from None
        if opts.step_tolerance > 0.0:
            moved = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(x))))
            if moved <= opts.step_tolerance:
                x = x + step
                r = np.asarray(residual(x), dtype=float)
                norm = float(np.max(np.abs(r)))
                history.append(norm)
                return NewtonResult(x, iteration + 1, norm, tuple(history))
        lam = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = x + lam * step
            r_trial = np.asarray(residual(trial), dtype=float)
            trial_norm = float(np.max(np.abs(r_trial)))
            if math.isfinite(trial_norm) and (trial_norm < norm or trial_norm <= opts.tolerance):
                break
            lam *= 0.5
        else:
            if norm <= opts.stall_tolerance:
                return NewtonResult(x, iteration, norm, tuple(history))
            raise ConvergenceError(
                "damping failed to reduce the residual",
                last_iterate=x.copy(),
                residual_history=tuple(history),
            )
        x, r, norm = trial, r_trial, trial_norm
        history.append(norm)
    if norm <= max(opts.tolerance, opts.stall_tolerance):
        return NewtonResult(x, opts.max_iterations, norm, tuple(history))
    raise ConvergenceError(
        "maximum iterations exceeded",
        last_iterate=x.copy(),
        residual_norm=norm,
        residual_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# shooting

@dataclass(frozen=True)
class BvpSpec:
    """Two-point boundary value problem solved by shooting.

    The initial state template carries the known components; entries named
    by ``unknown_indices`` are overwritten by the shooting unknowns.  The
    terminal residual must return one equation per shooting unknown plus
    one per free parameter.  Free parameters (a terminal time, say) enter
    through ``system_factory``; a fixed system can be passed directly.
    """

    t0: float
    t1: float
    initial_state: np.ndarray
    unknown_indices: tuple
    terminal_residual: Callable[[np.ndarray, np.ndarray], np.ndarray]
    system: OdeSystem | None = None
    system_factory: Callable[[np.ndarray], OdeSystem] | None = None
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "initial_state", np.asarray(self.initial_state, dtype=float)
        )
        object.__setattr__(self, "unknown_indices", tuple(self.unknown_indices))
        if (self.system is None) == (self.system_factory is None):
            raise DomainError("provide exactly one of system or system_factory")
        if self.n_params < 0:
            raise DomainError("n_params must be non-negative")
        if self.n_params and self.system_factory is None:
            raise DomainError("free parameters require a system factory")

    def make_system(self, params: np.ndarray) -> OdeSystem:
        if self.system_factory is not None:
            return self.system_factory(params)
        return self.system


@dataclass(frozen=True)
class BvpSolution:
    trajectory: Trajectory
    unknowns: np.ndarray
    params: np.ndarray
    newton: NewtonResult


def _split(spec: BvpSpec, z: np.ndarray):
    n_u = len(spec.unknown_indices)
    return z[:n_u], z[n_u:]


def _initial_from(spec: BvpSpec, unknowns: np.ndarray) -> np.ndarray:
    y0 = spec.initial_state.copy()
    for idx, value in zip(spec.unknown_indices, unknowns):
        y0[idx] = value
    return y0


def _check_square(spec: BvpSpec, residual: np.ndarray):
    want = len(spec.unknown_indices) + spec.n_params
    if residual.shape != (want,):
        raise DomainError(
            f"terminal residual has dimension {residual.shape[0]}, "
            f"but {want} unknowns are being solved"
        )


def shoot_bvp(
    spec: BvpSpec,
    guess,
    steps: int,
    opts: NewtonOptions | None = None,
) -> BvpSolution:
    """Solve a two-point BVP by single shooting with damped Newton.

    If single shooting fails to converge, a four-segment multiple-shooting
    pass is attempted, seeded from the best single-shooting trajectory.
    """
    opts = opts or NewtonOptions()
    guess = np.asarray(guess, dtype=float)
    n_u = len(spec.unknown_indices)
    if guess.shape != (n_u + spec.n_params,):
        raise DomainError(
            f"guess must supply {n_u} initial unknowns plus {spec.n_params} parameters"
        )

    def integrate(z: np.ndarray) -> Trajectory:
        u, p = _split(spec, z)
        sys = spec.make_system(p)
        return rk4_solve(sys, spec.t0, spec.t1, _initial_from(spec, u), steps)

    def single_residual(z: np.ndarray) -> np.ndarray:
        u, p = _split(spec, z)
        res = np.atleast_1d(
            np.asarray(spec.terminal_residual(integrate(z).y[-1], p), dtype=float)
        )
        _check_square(spec, res)
        return res

    try:
        result = newton_solve(single_residual, guess, opts)
    except (ConvergenceError, SolverError) as failure:
        result = _multiple_shooting(spec, guess, steps, opts, failure)
        z = result.x[: n_u + spec.n_params]
        u, p = _split(spec, z)
        return BvpSolution(_integrate_segments(spec, result.x, steps), u, p, result)
    z = result.x
    u, p = _split(spec, z)
    return BvpSolution(integrate(z), u, p, result)


def _segment_bounds(spec: BvpSpec, steps: int):
    cuts = sorted({0, steps // 4, steps // 2, (3 * steps) // 4, steps})
    cuts = [c for c in cuts if 0 <= c <= steps]
    if len(cuts) < 3:
        raise GridError("too few steps for multiple shooting")
    h = (spec.t1 - spec.t0) / steps
    times = [spec.t0 + c * h for c in cuts]
    times[-1] = spec.t1
    counts = [b - a for a, b in zip(cuts[:-1], cuts[1:])]
    return times, counts


def _segment_system(sys: OdeSystem, first: bool, last: bool) -> OdeSystem:
    return dataclasses.replace(
        sys,
        singular_start=sys.singular_start and first,
        singular_end=sys.singular_end and last,
    )


def _multiple_shooting(spec, guess, steps, opts, failure) -> NewtonResult:
    times, counts = _segment_bounds(spec, steps)
    n_seg = len(counts)
    dim = len(spec.initial_state)
    n_u = len(spec.unknown_indices)

    # seed interior joint states from the best available whole trajectory
    try:
        u, p = _split(spec, guess)
        sys = spec.make_system(p)
        warm = rk4_solve(sys, spec.t0, spec.t1, _initial_from(spec, u), steps)
        joints = [
            warm.y[min(int(round((tj - spec.t0) / (spec.t1 - spec.t0) * steps)), steps)]
            for tj in times[1:-1]
        ]
    except (SolverError, ConvergenceError):
        joints = [spec.initial_state.copy() for _ in times[1:-1]]

    def unpack(z):
        head = z[: n_u + spec.n_params]
        u, p = _split(spec, head)
        states = [
            z[n_u + spec.n_params + k * dim : n_u + spec.n_params + (k + 1) * dim]
            for k in range(n_seg - 1)
        ]
        return u, p, states

    def residual(z):
        u, p, states = unpack(z)
        sys = spec.make_system(p)
        start = _initial_from(spec, u)
        pieces = []
        for k in range(n_seg):
            seg_sys = _segment_system(sys, first=(k == 0), last=(k == n_seg - 1))
            traj = rk4_solve(seg_sys, times[k], times[k + 1], start, counts[k])
            end = traj.y[-1]
            if k < n_seg - 1:
                pieces.append(end - states[k])
                start = states[k]
            else:
                tail = np.atleast_1d(
                    np.asarray(spec.terminal_residual(end, p), dtype=float)
                )
                _check_square(spec, tail)
                pieces.append(tail)
        return np.concatenate(pieces)

    z0 = np.concatenate([guess] + [np.asarray(j, dtype=float) for j in joints])
    try:
        return newton_solve(residual, z0, opts)
    except ConvergenceError as second:
        raise ConvergenceError(
            "single and multiple shooting both failed",
            single_shooting=str(failure),
            multiple_shooting=str(second),
            residual_history=second.diagnostics.get("residual_history", ()),
        ) from second


def _integrate_segments(spec: BvpSpec, z: np.ndarray, steps: int) -> Trajectory:
    times, counts = _segment_bounds(spec, steps)
    n_seg = len(counts)
    dim = len(spec.initial_state)
    n_u = len(spec.unknown_indices)
    head = z[: n_u + spec.n_params]
    u, p = _split(spec, head)
    states = [
        z[n_u + spec.n_params + k * dim : n_u + spec.n_params + (k + 1) * dim]
        for k in range(n_seg - 1)
    ]
    sys = spec.make_system(p)
    start = _initial_from(spec, u)
    ts, ys = [], []
    for k in range(n_seg):
        seg_sys = _segment_system(sys, first=(k == 0), last=(k == n_seg - 1))
        traj = rk4_solve(seg_sys, times[k], times[k + 1], start, counts[k])
        skip = 1 if k else 0
        ts.append(traj.t[skip:])
        ys.append(traj.y[skip:])
        start = states[k] if k < n_seg - 1 else traj.y[-1]
    return Trajectory(np.concatenate(ts), np.vstack(ys))
