"""Delay solvers, the optimal pair, kernel selection, and the LP probe."""

import math

import numpy as np
import pytest

from kerndetect.alternatives import (
    michaelis_menten,
    step,
    truncated_exponential,
    truncated_linear,
)
from kerndetect.delay import (
    lp_oracle,
    power_design,
    psi,
    select_kernel,
    solve_optimal_pair,
    solve_rho0,
    solve_rho0_design,
    tabulated_design,
    uniform_design,
)
from kerndetect.errors import NoSolutionError, ParameterError, SelectionError
from kerndetect.kernels import epanechnikov, gaussian, laplace, make_optimal_kernel, triangular


def riemann_psi(kernel, alt, rho, n=200_000):
    """Midpoint-rule oracle for int_0^rho K(s - rho) m0(s) ds."""
    lo = max(0.0, rho - kernel.effective_radius)
    if lo >= rho:
        return 0.0
    s = np.linspace(lo, rho, n + 1)
    mid = 0.5 * (s[1:] + s[:-1])
    return float(np.sum(kernel.eval(mid - rho) * alt(mid)) * (rho - lo) / n)


class TestPsi:
    def test_against_midpoint_oracle(self):
        alt = truncated_linear(1.0, 4.0)
        for kernel in (gaussian(), epanechnikov()):
            for rho in (0.3, 1.0, 2.5):
                assert psi(kernel, alt, rho) == pytest.approx(
                    riemann_psi(kernel, alt, rho), abs=1e-8
                )

    def test_zero_at_zero_and_negative_rejected(self):
        alt = truncated_linear(1.0, 4.0)
        assert psi(gaussian(), alt, 0.0) == 0.0
        with pytest.raises(ParameterError):
            psi(gaussian(), alt, -0.1)

    def test_step_alternative_is_shifted_cdf(self):
        # for m0 = a, psi(rho) = a * (F_K(0) - F_K(-rho))
        alt = step(2.0)
        k = gaussian()
        for rho in (0.5, 1.5):
            expect = 2.0 * (k.cdf(0.0) - k.cdf(-rho))
            assert psi(k, alt, rho) == pytest.approx(expect, abs=1e-10)


class TestSolveRho0:
    def test_step_closed_form(self):
        # crossing at quantile(1/2 + c/a) for a flat drift
        for kernel in (gaussian(), epanechnikov()):
            for ratio in (0.1, 0.25, 0.4):
                sol = solve_rho0(kernel, step(1.0), ratio)
                assert sol.status == "converged"
                assert sol.rho == pytest.approx(kernel.quantile(0.5 + ratio), abs=1e-8)

    def test_scale_equivariance_is_exact(self):
        # scaling (m0, c) by the same factor leaves the bracket path identical
        kernel = gaussian()
        base = solve_rho0(kernel, truncated_linear(1.0, 4.0), 0.5)
        scaled = solve_rho0(kernel, truncated_linear(7.0, 4.0), 3.5)
        assert scaled.rho == base.rho

    def test_no_crossing_when_threshold_exceeds_peak(self):
        sol = solve_rho0(triangular(), truncated_linear(1.0, 4.0), 10.0)
        assert sol.status == "no_crossing"
        assert math.isnan(sol.rho)
        assert sol.to_dict()["rho"] is None  # serialized as null
        assert not sol.converged

    def test_at_upper_bound_when_window_too_small(self):
        # psi for the step drift rises toward a/2; stop while still rising
        sol = solve_rho0(gaussian(), step(1.0), 0.45, R=0.5)
        assert sol.status == "at_upper_bound"

    def test_invalid_arguments(self):
        alt = truncated_linear(1.0, 4.0)
        with pytest.raises(ParameterError):
            solve_rho0(gaussian(), alt, 0.0)
        with pytest.raises(ParameterError):
            solve_rho0(gaussian(), alt, 0.5, R=-1.0)
        with pytest.raises(ParameterError):
            solve_rho0(gaussian(), alt, 0.5, grid_step=100.0)


class TestDesigns:
    def test_uniform_design_is_identity(self):
        d = uniform_design()
        assert d.quantile(0.25) == 0.25
        assert d.density(0.5) == 1.0
        assert d.density(2.0) == 0.0

    def test_power_design_density_and_quantile(self):
        d = power_design(2.0)
        assert d.density(0.5) == pytest.approx(1.0, abs=1e-12)  # 2s at s=1/2
        assert d.quantile(0.25) == pytest.approx(0.5, abs=1e-12)
        with pytest.raises(ParameterError):
            power_design(0.5)

    def test_tabulated_design_roundtrip(self):
        us = np.linspace(0.0, 1.0, 101)
        d = tabulated_design(us, us**0.5)
        assert d.quantile(0.25) == pytest.approx(0.5, abs=1e-3)

    def test_design_solver_reduces_to_uniform(self):
        # under the identity design the displayed root solves
        # rho * int_0^1 K(rho(s-1)) m0(s) ds = c
        kernel = gaussian()
        alt = truncated_linear(1.0, 4.0)
        sol = solve_rho0_design(kernel, alt, 0.3, uniform_design())
        assert sol.converged
        rho = sol.rho
        s = np.linspace(max(0.0, 1.0 - kernel.effective_radius / rho), 1.0, 200_001)
        mid = 0.5 * (s[1:] + s[:-1])
        val = rho * float(np.mean(kernel.eval(rho * (mid - 1.0)) * alt(mid))) * (
            s[-1] - s[0]
        )
        assert val == pytest.approx(0.3, abs=1e-6)

    def test_power_design_known_root(self):
        sol = solve_rho0_design(gaussian(), truncated_linear(1.0, 4.0), 0.3, power_design(2.0))
        assert sol.converged
        assert sol.rho == pytest.approx(1.2077378403664625, abs=1e-8)


class TestOptimalPair:
    CASES = [
        (truncated_linear(1.0, 4.0), 0.5),
        (truncated_exponential(0.5, 4.0), 0.8),
        (michaelis_menten(1.0, 0.5, 0.3, 10.0), 0.3),
    ]

    @pytest.mark.parametrize("alt,c", CASES, ids=lambda x: getattr(x, "form", x))
    def test_self_consistency(self, alt, c):
        pair = solve_optimal_pair(alt, c)
        assert abs(psi(pair.kernel, alt, pair.rho_star) - c) < 1e-8

    def test_root_matches_scalar_equation_for_linear(self):
        # int_0^rho m0^2 / (2 int_0^inf m0) = c gives rho^3/48 = c for m0 = t on [0,4]
        pair = solve_optimal_pair(truncated_linear(1.0, 4.0), 0.5)
        assert pair.rho_star == pytest.approx((48.0 * 0.5) ** (1.0 / 3.0), abs=1e-8)

    def test_unreachable_threshold_raises(self):
        with pytest.raises(NoSolutionError):
            solve_optimal_pair(truncated_linear(1.0, 4.0), 10.0)

    def test_untruncated_alternative_rejected(self):
        with pytest.raises(ParameterError):
            solve_optimal_pair(step(1.0), 0.3)


class TestSelectKernel:
    def test_picks_smallest_delay(self):
        alt = truncated_linear(1.0, 4.0)
        cands = [gaussian(), epanechnikov(), triangular(), laplace(1.5)]
        sel = select_kernel(cands, alt, 0.5)
        rhos = [s.rho for s in sel.solutions]
        best = sel.best_index
        assert all(rhos[best] <= r for r in rhos if r is not None)

    def test_non_converged_candidates_rank_last(self):
        alt = truncated_linear(1.0, 4.0)
        # triangular converges at c=0.5; a tiny search bound starves gaussian
        sel = select_kernel([gaussian(), triangular()], alt, 0.5, R=None)
        assert sel.solutions[sel.best_index].converged

    def test_all_failures_raise(self):
        alt = truncated_linear(1.0, 4.0)
        with pytest.raises(SelectionError):
            select_kernel([gaussian(), triangular()], alt, 50.0)
        with pytest.raises(ParameterError):
            select_kernel([], alt, 0.5)


class TestLpOracle:
    def test_sup_dominates_any_feasible_kernel(self):
        alt = truncated_linear(1.0, 4.0)
        probe = lp_oracle(alt, 2.0, grid_n=128, lipschitz_cap=2.0, sup_cap=1.0)
        for kernel in (triangular(), epanechnikov()):
            assert probe.sup_value >= probe.objective_of(kernel, alt) - 1e-9

    def test_argmax_kernel_is_valid_and_attains_sup(self):
        alt = truncated_linear(1.0, 4.0)
        probe = lp_oracle(alt, 2.0, grid_n=128, lipschitz_cap=2.0, sup_cap=1.0)
        k = probe.argmax_kernel
        assert abs(k.mass() - 1.0) < 1e-9
        assert probe.objective_of(k, alt) == pytest.approx(probe.sup_value, abs=1e-9)

    def test_monotone_in_rho_for_nondecreasing_drift(self):
        alt = truncated_linear(1.0, 4.0)
        vals = [
            lp_oracle(alt, rho, grid_n=64).sup_value for rho in np.linspace(0.5, 4.0, 8)
        ]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_parameter_validation(self):
        alt = truncated_linear(1.0, 4.0)
        with pytest.raises(ParameterError):
            lp_oracle(alt, 0.0)
        with pytest.raises(ParameterError):
            lp_oracle(alt, 1.0, grid_n=1)
