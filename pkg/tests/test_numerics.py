"""Quadrature, RK4 integration, damped Newton, and shooting."""
from __future__ import annotations

import math

import numpy as np
import pytest

from fracvar.errors import ConvergenceError, DomainError, GridError, SolverError
from fracvar.numerics import (
    BvpSpec,
    NewtonOptions,
    OdeSystem,
    Trajectory,
    newton_solve,
    quad,
    rk4_solve,
    shoot_bvp,
)
from fracvar.special import gamma


class TestQuad:
    def test_constant(self):
        t = np.linspace(0.0, 1.0, 11)
        assert quad(t, np.ones_like(t), "left_rect") == pytest.approx(1.0)
        assert quad(t, np.ones_like(t), "trapezoid") == pytest.approx(1.0)

    def test_trapezoid_exact_on_linear(self):
        t = np.array([0.0, 0.5, 1.0])
        assert quad(t, t, "trapezoid") == pytest.approx(0.5, abs=1e-15)

    def test_left_rectangle_first_order(self):
        t = np.arange(0.0, 1.0 + 1e-12, 1e-3)
        assert quad(t, t**2, "left_rect") == pytest.approx(1.0 / 3.0, abs=1e-3)

    def test_non_uniform_rejected(self):
        with pytest.raises(GridError):
            quad(np.array([0.0, 0.1, 0.3]), np.zeros(3))

    def test_unknown_rule(self):
        with pytest.raises(DomainError):
            quad(np.array([0.0, 1.0]), np.zeros(2), "simpson")


def _exponential() -> OdeSystem:
    return OdeSystem(1, lambda t, y: y)


class TestRk4:
    def test_exponential(self):
        traj = rk4_solve(_exponential(), 0.0, 1.0, [1.0], 100)
        assert traj.y[-1, 0] == pytest.approx(math.e, abs=1e-8)
        assert len(traj) == 101

    def test_quadrature_as_ode(self):
        # V' = -x with x = t^2 accumulates -t^3/3
        sys = OdeSystem(1, lambda t, v: np.array([-(t**2)]))
        traj = rk4_solve(sys, 0.0, 1.0, [0.0], 64)
        assert traj.y[-1, 0] == pytest.approx(-1.0 / 3.0, abs=1e-8)

    def test_constant_rhs_zero(self):
        sys = OdeSystem(2, lambda t, y: np.zeros(2))
        traj = rk4_solve(sys, 0.0, 2.0, [3.0, -1.0], 10)
        assert np.allclose(traj.y, [3.0, -1.0])

    def test_fourth_order_convergence(self):
        errs = []
        for steps in (10, 20, 40):
            traj = rk4_solve(_exponential(), 0.0, 1.0, [1.0], steps)
            errs.append(abs(traj.y[-1, 0] - math.e))
        slope = math.log(errs[0] / errs[2]) / math.log(4.0)
        assert abs(slope - 4.0) <= 0.3

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_state(self):
        sys = OdeSystem(1, lambda t, y: y**2)
        with pytest.raises(SolverError):
            rk4_solve(sys, 0.0, 2.0, [2.0], 40)

    def test_singular_start_grid(self):
        sys = OdeSystem(1, lambda t, y: np.array([t**-0.5]), singular_start=True)
        traj = rk4_solve(sys, 0.0, 1.0, [2e-4], 50)
        assert traj.t[0] == pytest.approx(1e-8, abs=1e-20)
        # x(t) = 2 sqrt(t), started from x(delta) = 2e-4
        assert traj.y[-1, 0] == pytest.approx(2.0, abs=1e-5)

    def test_singular_end_clamp(self):
        sys = OdeSystem(
            1, lambda t, y: np.array([(1.0 - t) ** -0.5]), singular_end=True
        )
        traj = rk4_solve(sys, 0.0, 1.0, [0.0], 50)
        assert traj.t[-1] == pytest.approx(1.0 - 1e-8, abs=1e-20)
        # x(t) = 2 - 2 sqrt(1-t), evaluated at the clamped node 1 - 1e-8
        expected = 2.0 - 2.0 * math.sqrt(1e-8)
        assert traj.y[-1, 0] == pytest.approx(expected, abs=1e-5)

    def test_validation(self):
        with pytest.raises(GridError):
            rk4_solve(_exponential(), 0.0, 1.0, [1.0], 0)
        with pytest.raises(DomainError):
            rk4_solve(_exponential(), 1.0, 0.0, [1.0], 5)
        with pytest.raises(DomainError):
            rk4_solve(_exponential(), 0.0, 1.0, [1.0, 2.0], 5)


class TestNewton:
    def test_sqrt_two(self):
        result = newton_solve(lambda x: x**2 - 2.0, np.array([1.0]))
        assert result.x[0] == pytest.approx(math.sqrt(2.0), abs=1e-10)
        assert result.residual_norm <= 1e-10

    def test_affine_two_iterations(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 5)) + 5.0 * np.eye(5)
        b = rng.normal(size=5)
        result = newton_solve(lambda x: a @ x - b, np.zeros(5))
        assert result.iterations <= 2
        assert np.allclose(a @ result.x, b, atol=1e-9)

    def test_singular_jacobian(self):
        # residual independent of the unknowns: the Jacobian is exactly zero
        with pytest.raises(ConvergenceError) as exc:
            newton_solve(
                lambda x: np.array([1.0, 2.0]), np.array([0.3, -0.4])
            )
        assert "condition" in exc.value.diagnostics
        assert "singular" in str(exc.value)

    def test_damping_monotone_history(self):
        # scalar with a long flat approach; every accepted step must not
        # increase the max-norm residual
        result = newton_solve(
            lambda x: np.array([math.atan(x[0])]), np.array([20.0])
        )
        history = np.array(result.history)
        assert np.all(np.diff(history) <= 0.0)
        assert abs(result.x[0]) <= 1e-10

    def test_max_iterations(self):
        opts = NewtonOptions(max_iterations=3)
        with pytest.raises(ConvergenceError) as exc:
            newton_solve(
                lambda x: np.array([math.atan(x[0])]), np.array([500.0]), opts
            )
        assert "residual_history" in exc.value.diagnostics

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            newton_solve(lambda x: np.array([x[0], x[0]]), np.array([1.0]))


def _free_motion_spec() -> BvpSpec:
    sys = OdeSystem(2, lambda t, y: np.array([y[1], 0.0]))
    return BvpSpec(
        t0=0.0,
        t1=1.0,
        initial_state=np.array([0.0, 0.0]),
        unknown_indices=(1,),
        terminal_residual=lambda y, p: np.array([y[0] - 1.0]),
        system=sys,
    )


def _example_curved_solution(alpha: float, t):
    c = 1.0 / (2.0 * gamma(3.0 - alpha))
    return -c * (1.0 - t) ** (2.0 - alpha) + (1.0 - c) * t + c


class TestShooting:
    def test_straight_line(self):
        sol = shoot_bvp(_free_motion_spec(), np.array([0.3]), steps=50)
        assert np.max(np.abs(sol.trajectory.y[:, 0] - sol.trajectory.t)) <= 1e-9
        assert sol.unknowns[0] == pytest.approx(1.0, abs=1e-9)

    def test_guess_independence_linear(self):
        a = shoot_bvp(_free_motion_spec(), np.array([-50.0]), steps=50)
        b = shoot_bvp(_free_motion_spec(), np.array([50.0]), steps=50)
        assert np.max(np.abs(a.trajectory.y - b.trajectory.y)) <= 1e-9

    def test_singular_forcing_bvp(self):
        # x'' = -(1/(2 Gamma(1-a)))(1-t)^(-a), x(0)=0, x(1)=1
        alpha = 0.5
        c = 1.0 / (2.0 * gamma(1.0 - alpha))

        def rhs(t, y):
            return np.array([y[1], -c * (1.0 - t) ** -alpha])

        spec = BvpSpec(
            t0=0.0,
            t1=1.0,
            initial_state=np.array([0.0, 0.0]),
            unknown_indices=(1,),
            terminal_residual=lambda y, p: np.array([y[0] - 1.0]),
            system=OdeSystem(2, rhs, singular_end=True),
        )
        sol = shoot_bvp(spec, np.array([1.0]), steps=2000)
        exact = _example_curved_solution(alpha, sol.trajectory.t)
        assert np.max(np.abs(sol.trajectory.y[:, 0] - exact)) <= 1e-6

    def test_free_parameter(self):
        # recover the decay rate k from x' = -k x, x(0)=1, x(1)=1/e
        def factory(p):
            return OdeSystem(1, lambda t, y: -p[0] * y)

        spec = BvpSpec(
            t0=0.0,
            t1=1.0,
            initial_state=np.array([1.0]),
            unknown_indices=(),
            terminal_residual=lambda y, p: np.array([y[0] - math.exp(-1.0)]),
            system_factory=factory,
            n_params=1,
        )
        sol = shoot_bvp(spec, np.array([0.5]), steps=100)
        assert sol.params[0] == pytest.approx(1.0, abs=1e-8)

    def test_multiple_shooting_fallback(self):
        # stiff growth makes single shooting from a bad guess blow up
        lam = 12.0

        def rhs(t, y):
            return np.array([y[1], lam * lam * y[0]])

        spec = BvpSpec(
            t0=0.0,
            t1=1.0,
            initial_state=np.array([1.0, 0.0]),
            unknown_indices=(1,),
            terminal_residual=lambda y, p: np.array([y[0] - 1.0]),
            system=OdeSystem(2, rhs),
        )
        sol = shoot_bvp(spec, np.array([0.0]), steps=200)
        # exact: x = cosh(lam t) + s sinh(lam t)/lam with x(1)=1
        s = (1.0 - math.cosh(lam)) / math.sinh(lam) * lam
        exact = np.cosh(lam * sol.trajectory.t) + (s / lam) * np.sinh(
            lam * sol.trajectory.t
        )
        assert abs(sol.trajectory.y[-1, 0] - 1.0) <= 1e-7
        assert np.max(np.abs(sol.trajectory.y[:, 0] - exact)) <= 1e-5

    def test_square_check(self):
        spec = BvpSpec(
            t0=0.0,
            t1=1.0,
            initial_state=np.array([0.0, 0.0]),
            unknown_indices=(1,),
            terminal_residual=lambda y, p: np.array([y[0], y[1]]),
            system=OdeSystem(2, lambda t, y: np.array([y[1], 0.0])),
        )
        with pytest.raises(DomainError):
            shoot_bvp(spec, np.array([0.0]), steps=10)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            BvpSpec(
                t0=0.0,
                t1=1.0,
                initial_state=np.zeros(2),
                unknown_indices=(1,),
                terminal_residual=lambda y, p: np.zeros(1),
            )


class TestTrajectory:
    def test_read_only(self):
        traj = Trajectory(np.linspace(0, 1, 3), np.zeros((3, 2)))
        with pytest.raises(ValueError):
            traj.t[0] = 5.0
        assert traj.component(1).shape == (3,)
