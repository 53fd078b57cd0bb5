"""Direct discretization of fractional variational problems.

The functional J[x] = integral of L(t, x, x', D^alpha x) is discretized on
a uniform grid with the Grünwald-Letnikov sum standing in for the
fractional derivative.  Stationarity of the resulting finite sum in the
interior values x_1..x_{n-1} gives an algebraic system; its solution
approximates the extremal.  Two routes to that system are provided: the
gradient of the rectangle-rule sum (Euler-like) and the discrete first
variation tested against hat-function variations.  They agree up to a
factor h for Lagrangians without x'.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, GridError, UnsupportedProblemError
from .funcmodel import eval_expr, expr_variables, parse_expr
from .numerics import NewtonOptions, newton_solve
from .special import gl_weights

__all__ = [
    "UniformGrid",
    "BasicFvp",
    "IsoperimetricFvp",
    "DiscreteSolution",
    "euler_like_residual",
    "first_variation_residual",
    "solve_euler_like",
    "first_variation_solve",
    "isoperimetric_solve",
]

_FD_STEP = 1e-7
_LAGRANGIAN_VARS = {"t", "x", "xp", "Dx"}
_CONSTRAINT_VARS = {"t", "x", "Dx"}

# the 1e-7 central differences put a ~1e-9 noise floor under every
# residual, and terms divided by the mesh width amplify it further, so
# the outer Newton must not chase tolerances below that floor
_DIRECT_NEWTON = NewtonOptions(tolerance=1e-8, fd_step=1e-5, stall_tolerance=1e-4)


@dataclass(frozen=True)
class UniformGrid:
    """Nodes t_i = a + i h, i = 0..n, h = (b - a)/n."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise GridError("a grid needs at least 2 subintervals")
        if not self.b > self.a:
            raise GridError("grid interval must satisfy a < b")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        out = np.linspace(self.a, self.b, self.n + 1)
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class BasicFvp:
    """Fixed-endpoint problem for integral of L(t, x, x', D^alpha x).

    The Lagrangian is an expression over the variables t, x, xp (for x')
    and Dx (for the left fractional derivative of order alpha based at a).
    """

    alpha: float
    a: float
    b: float
    lagrangian: str
    x_a: float
    x_b: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("problems cover derivative orders in (0, 1)")
        if not self.b > self.a:
            raise DomainError("interval must satisfy a < b")
        if not (np.isfinite(self.x_a) and np.isfinite(self.x_b)):
            raise DomainError("boundary values must be finite")
        tree = parse_expr(self.lagrangian)
        used = expr_variables(tree)
        if not used <= _LAGRANGIAN_VARS:
            raise UnsupportedProblemError(
                f"Lagrangian may only use t, x, xp, Dx; got {sorted(used)}"
            )
        object.__setattr__(self, "_tree", tree)
        object.__setattr__(self, "uses_xp", "xp" in used)

    @property
    def tree(self):
        return self._tree


@dataclass(frozen=True)
class IsoperimetricFvp:
    """BasicFvp plus one integral constraint over g(t, x, D^alpha x) = K."""

    base: BasicFvp
    constraint: str
    K: float

    def __post_init__(self):
        tree = parse_expr(self.constraint)
        used = expr_variables(tree)
        if not used <= _CONSTRAINT_VARS:
            raise UnsupportedProblemError(
                f"constraint may only use t, x, Dx; got {sorted(used)}"
            )
        object.__setattr__(self, "_tree", tree)

    @property
    def tree(self):
        return self._tree


@dataclass(frozen=True)
class DiscreteSolution:
    """Grid values of the computed extremal with solver diagnostics."""

    grid: UniformGrid
    values: np.ndarray
    iterations: int
    residual_norm: float
    wall_time: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes


def _gl_values(x: np.ndarray, alpha: float, h: float, w: np.ndarray) -> np.ndarray:
    n = len(x) - 1
    return h ** (-alpha) * np.convolve(w, x)[: n + 1]


def _partial(tree, env: dict, name: str) -> np.ndarray:
    base = env[name]
    step = _FD_STEP
    up = dict(env)
    up[name] = base + step
    down = dict(env)
    down[name] = base - step
    diff = (eval_expr(tree, up) - eval_expr(tree, down)) / (2.0 * step)
    # constant expressions evaluate to scalars
    return np.broadcast_to(np.asarray(diff, dtype=float), np.shape(base)).copy()


def _env_for(p: BasicFvp, grid: UniformGrid, x: np.ndarray, w: np.ndarray) -> dict:
    h = grid.h
    env = {
        "t": grid.nodes,
        "x": x,
        "Dx": _gl_values(x, p.alpha, h, w),
    }
    if p.uses_xp:
        xp = np.empty_like(x)
        xp[1:] = np.diff(x) / h
        xp[0] = xp[1]
        env["xp"] = xp
    return env


def _check_candidate(grid: UniformGrid, values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.shape != (grid.n + 1,):
        raise DomainError(
            f"candidate must have {grid.n + 1} entries, got shape {x.shape}"
        )
    return x


def euler_like_residual(p: BasicFvp, grid: UniformGrid, values) -> np.ndarray:
    """Stationarity defect of the rectangle-rule sum, one row per interior node.

    Row i is the gradient component of sum_i h L(t_i, x_i, x'_i, Dx_i)
    with respect to x_i, divided by h: dL/dx at node i, plus the
    Grünwald-Letnikov transpose term h^{-alpha} sum_k w_k dL/dDx at node
    i+k, plus the backward-difference x' coupling when L uses x'.
    """
    x = _check_candidate(grid, values)
    n, h = grid.n, grid.h
    w = gl_weights(p.alpha, n).weights
    env = _env_for(p, grid, x, w)
    dLdx = _partial(p.tree, env, "x")
    dLdDx = _partial(p.tree, env, "Dx")
    frac = h ** (-p.alpha) * np.convolve(w, dLdDx[::-1])[: n + 1][::-1]
    res = dLdx[1:n] + frac[1:n]
    if p.uses_xp:
        dLdxp = _partial(p.tree, env, "xp")
        res = res + (dLdxp[1:n] - dLdxp[2 : n + 1]) / h
    return res


def first_variation_residual(p: BasicFvp, grid: UniformGrid, values) -> np.ndarray:
    """Discrete first variation of J tested against interior hat functions.

    Row j is J'[x, eta_j] with eta_j the order-one spline peaking at node
    j; the fractional derivative of eta_j contributes the weight tail
    w_{i-j} for i >= j.  Valid for Lagrangians without x'.
    """
    if p.uses_xp:
        raise UnsupportedProblemError(
            "the first-variation discretization covers Lagrangians "
            "without an x' argument"
        )
    x = _check_candidate(grid, values)
    n, h = grid.n, grid.h
    w = gl_weights(p.alpha, n).weights
    env = _env_for(p, grid, x, w)
    dLdx = _partial(p.tree, env, "x")
    dLdDx = _partial(p.tree, env, "Dx")
    scale = h ** (-p.alpha)
    out = np.empty(n - 1)
    for j in range(1, n):
        out[j - 1] = h * (dLdx[j] + scale * np.dot(w[: n - j + 1], dLdDx[j:]))
    return out


def _linear_guess(grid: UniformGrid, x_a: float, x_b: float) -> np.ndarray:
    return x_a + (x_b - x_a) * (grid.nodes - grid.a) / (grid.b - grid.a)


def _with_boundaries(p: BasicFvp, grid: UniformGrid, interior: np.ndarray) -> np.ndarray:
    full = np.empty(grid.n + 1)
    full[0] = p.x_a
    full[-1] = p.x_b
    full[1:-1] = interior
    return full


def _solve_interior(p, grid, residual_of_full, guess_interior, options):
    def residual(z):
        return residual_of_full(_with_boundaries(p, grid, z))

    return newton_solve(residual, guess_interior, options)


def _run_solver(p: BasicFvp, n: int, residual_fn, options: Optional[NewtonOptions]):
    if n < 3:
        raise DomainError("direct solves need n >= 3")
    options = options or _DIRECT_NEWTON
    grid = UniformGrid(p.a, p.b, n)
    start = time.perf_counter()

    def attempt(guess_interior):
        return _solve_interior(
            p, grid, lambda full: residual_fn(p, grid, full), guess_interior, options
        )

    guess = _linear_guess(grid, p.x_a, p.x_b)[1:-1]
    try:
        result = attempt(guess)
    except Exception:
        if n < 6:
            raise
        coarse = _run_solver(p, n // 2, residual_fn, options)
        warm = np.interp(grid.nodes, coarse.grid.nodes, coarse.values)[1:-1]
        result = attempt(warm)
    elapsed = time.perf_counter() - start
    return DiscreteSolution(
        grid,
        _with_boundaries(p, grid, result.x),
        result.iterations,
        result.residual_norm,
        elapsed,
    )


def solve_euler_like(p: BasicFvp, n: int, options: Optional[NewtonOptions] = None) -> DiscreteSolution:
    """Extremal from the Euler-like algebraic system on n subintervals.

    The initial guess is the boundary-interpolating line; if Newton fails
    from there, the solve restarts from an interpolated coarser-grid
    solution.
    """
    return _run_solver(p, n, euler_like_residual, options)


def first_variation_solve(p: BasicFvp, n: int, options: Optional[NewtonOptions] = None) -> DiscreteSolution:
    """Extremal from the vanishing discrete first variation."""
    return _run_solver(p, n, first_variation_residual, options)


def isoperimetric_solve(
    p: IsoperimetricFvp, n: int, options: Optional[NewtonOptions] = None
) -> tuple:
    """Constrained extremal and its multiplier.

    Stationarity of L + lambda g replaces that of L, and the discretized
    constraint h sum g(t_i, x_i, Dx_i) = K joins the system; the unknown
    vector is (x_1..x_{n-1}, lambda).
    """
    if n < 3:
        raise DomainError("direct solves need n >= 3")
    base = p.base
    if base.uses_xp:
        raise UnsupportedProblemError(
            "the first-variation discretization covers Lagrangians "
            "without an x' argument"
        )
    options = options or _DIRECT_NEWTON
    grid = UniformGrid(base.a, base.b, n)
    n_sub, h = grid.n, grid.h
    w = gl_weights(base.alpha, n_sub).weights
    scale = h ** (-base.alpha)
    start = time.perf_counter()

    def residual(z):
        lam = z[-1]
        full = _with_boundaries(base, grid, z[:-1])
        env = _env_for(base, grid, full, w)
        g_values = eval_expr(p.tree, env)
        dFdx = _partial(base.tree, env, "x") + lam * _partial(p.tree, env, "x")
        dFdDx = _partial(base.tree, env, "Dx") + lam * _partial(p.tree, env, "Dx")
        rows = np.empty(n_sub)
        for j in range(1, n_sub):
            rows[j - 1] = h * (dFdx[j] + scale * np.dot(w[: n_sub - j + 1], dFdDx[j:]))
        rows[-1] = h * np.sum(np.broadcast_to(g_values, full.shape)[1:]) - p.K
        return rows

    guess = np.append(_linear_guess(grid, base.x_a, base.x_b)[1:-1], 0.0)
    result = newton_solve(residual, guess, options)
    elapsed = time.perf_counter() - start
    solution = DiscreteSolution(
        grid,
        _with_boundaries(base, grid, result.x[:-1]),
        result.iterations,
        result.residual_norm,
        elapsed,
    )
    return solution, float(result.x[-1])
