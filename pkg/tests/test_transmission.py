"""Tests for the nonlinear DtN / NtD interface operators.

The linear (alpha=0) cases have closed-form maps: on a subdomain of width a
with zero outer data, DtN is multiplication by 1/a (outward convention on
both sides).  The nonlinear cases use the diffusion-transform flux as the
oracle, plus the discrete round-trip identity that flux extraction was
designed to satisfy.
"""

import numpy as np
import pytest

from nldd import (
    NewtonConfig,
    ProblemSpec,
    SolverFailure,
    Tally,
    dtn_derivative,
    dtn_eval,
    kirchhoff_exact,
    kirchhoff_flux,
    left_subdomain,
    linear_ramp,
    ntd_eval,
    right_subdomain,
    sine_forcing,
    split_problem,
)


LIN = ProblemSpec(alpha=0.0, g_left=0.0, g_right=0.0)


def test_linear_dtn_left_subdomain():
    # ramp from 0 to lam over (0, 0.5); outward normal +x at the interface
    psi1 = left_subdomain(LIN, 0.5, 50)
    assert dtn_eval(1.0, psi1) == pytest.approx(2.0, abs=1e-12)
    assert dtn_eval(-3.0, psi1) == pytest.approx(-6.0, abs=1e-12)


def test_linear_dtn_right_subdomain():
    # ramp from lam at 0.5 to 0 at 1; outward normal -x at the interface
    psi2 = right_subdomain(LIN, 0.5, 50)
    for lam in (1.0, -2.5):
        assert dtn_eval(lam, psi2) == pytest.approx(2.0 * lam, abs=1e-12)


def test_linear_symmetric_sign_convention():
    # for the symmetric error equation both operators agree, both outward
    psi1 = left_subdomain(LIN, 0.5, 50)
    psi2 = right_subdomain(LIN, 0.5, 50)
    for lam in (0.7, -1.3, 4.0):
        assert dtn_eval(lam, psi1) == pytest.approx(dtn_eval(lam, psi2),
                                                    abs=1e-12)


def test_linear_ntd_right_subdomain():
    # v(x) = 2(x-1) has outward flux -v' = -2 at x=0.5 and trace -1
    psi2 = right_subdomain(LIN, 0.5, 50)
    assert ntd_eval(-2.0, psi2) == pytest.approx(-1.0, abs=1e-12)


def test_nonlinear_dtn_matches_transform_flux():
    # trace of the global solution at 0.5 must reproduce the constant flux
    spec = ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0)
    psi1, psi2 = split_problem(spec, 0.5, 1e-3)
    lam = kirchhoff_exact(spec, 0.5)
    c = kirchhoff_flux(spec)
    # the solution has a gradient ~2700 near x=0, so the O(h^2)
    # discretization error of the flux carries a large constant
    assert dtn_eval(lam, psi1) == pytest.approx(c, rel=1e-3)
    assert dtn_eval(lam, psi2) == pytest.approx(-c, rel=1e-3)


def test_nonlinear_ntd_matches_transform_trace():
    spec = ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0)
    _, psi2 = split_problem(spec, 0.5, 1e-3)
    c = kirchhoff_flux(spec)
    lam = kirchhoff_exact(spec, 0.5)
    assert ntd_eval(-c, psi2) == pytest.approx(lam, rel=1e-4)


@pytest.mark.parametrize("spec,gamma", [
    (ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0), 0.5),
    (ProblemSpec(alpha=1.0, forcing=linear_ramp(100.0), g_left=0.0,
                 g_right=-20.0), 0.3),
    (ProblemSpec(alpha=1.0, forcing=sine_forcing(10), g_left=0.0,
                 g_right=10.0), 0.5),
])
def test_round_trip_identity(spec, gamma):
    # ntd(dtn(lam)) = lam at the discrete level, both subdomains.  The mesh
    # must resolve h * flux < ~3: beyond that the cell flux relation is
    # non-monotone in the increment and discrete Dirichlet solutions can
    # fail to exist for sign-changing interface data.
    rng = np.random.default_rng(2024)
    psi1, psi2 = split_problem(spec, gamma, 1e-4)
    for psi in (psi1, psi2):
        for lam in rng.uniform(-20.0, 20.0, 5):
            phi = dtn_eval(lam, psi)
            back = ntd_eval(phi, psi)
            assert abs(back - lam) <= 1e-10 * max(1.0, abs(lam))


def test_dtn_derivative_linear_values():
    # linear DtN is multiplication by 1/width on either side
    psi1 = left_subdomain(LIN, 0.3, 30)
    psi2 = right_subdomain(LIN, 0.3, 70)
    assert dtn_derivative(2.0, psi1) == pytest.approx(10.0 / 3.0, rel=1e-8)
    assert dtn_derivative(2.0, psi2) == pytest.approx(10.0 / 7.0, rel=1e-8)


def test_dtn_derivative_richardson_self_check():
    # central difference with steps eps and eps/2 must agree to 1e-4
    spec = ProblemSpec(alpha=1.0, forcing=linear_ramp(100.0), g_left=0.0,
                       g_right=-20.0)
    psi1, _ = split_problem(spec, 0.5, 1e-3)
    lam = -15.8
    d = dtn_derivative(lam, psi1)
    cfg = NewtonConfig(tol_residual=1e-12)
    eps = 0.5e-6 * max(1.0, abs(lam))
    d_half = (dtn_eval(lam + eps, psi1, cfg) -
              dtn_eval(lam - eps, psi1, cfg)) / (2.0 * eps)
    assert d == pytest.approx(d_half, rel=1e-4)


def test_tally_counts_inner_iterations():
    spec = ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0)
    psi1, _ = split_problem(spec, 0.5, 1e-2)
    tally = Tally()
    dtn_eval(10.0, psi1, tally=tally)
    assert tally.inner_newton > 0


def test_solver_failure_carries_subdomain_label():
    # force a failure with an absurd flux and a single-iteration budget
    spec = ProblemSpec(alpha=1.0, g_left=0.0, g_right=20.0)
    _, psi2 = split_problem(spec, 0.5, 1e-2)
    cfg = NewtonConfig(max_iter=1, tol_residual=1e-15)
    with pytest.raises(SolverFailure) as exc:
        ntd_eval(-1e9, psi2, cfg)
    assert exc.value.subdomain == psi2.label
