"""1D discretization and damped Newton solver.

Flux-form centered finite differences: the half-edge flux is

    F_{i+1/2} = nu((u_i + u_{i+1})/2) * (u_{i+1} - u_i) / h,

interior residual rows are -(F_{i+1/2} - F_{i-1/2})/h - f(x_i), Dirichlet
rows are u - g, and a Neumann face row is the half-cell balance so that the
discrete flux at the face equals the prescribed outward value exactly.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidInput, SolverFailure, UnsupportedOracle
from .problem import Dirichlet, Neumann, SubdomainSolution, validate_bc_pair

_EPS = np.finfo(float).eps


def _half_edge_flux(u, spec, h):
    mid = 0.5 * (u[:-1] + u[1:])
    return spec.nu(mid) * (u[1:] - u[:-1]) / h


def assemble_residual_1d(u, spec, mesh, bc):
    """Residual of the discrete nonlinear system; bc = (left, right) faces."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidInput(
            f"state has {u.shape} entries, mesh wants ({mesh.n_nodes},)")
    left, right = bc
    validate_bc_pair(left, right)

    h = mesh.h
    fx = spec.forcing(mesh.nodes)
    F = _half_edge_flux(u, spec, h)

    r = np.empty_like(u)
    r[1:-1] = -(F[1:] - F[:-1]) / h - fx[1:-1]
    if isinstance(left, Dirichlet):
        r[0] = u[0] - left.value
    else:
        # outward normal is -x: prescribed flux is -nu*u'(x0)
        r[0] = -(F[0] + left.flux) / (0.5 * h) - fx[0]
    if isinstance(right, Dirichlet):
        r[-1] = u[-1] - right.value
    else:
        r[-1] = -(right.flux - F[-1]) / (0.5 * h) - fx[-1]
    return r


@dataclass
class Tridiagonal:
    """Tridiagonal matrix in (lower, diag, upper) band storage."""

    lower: np.ndarray   # entries (i+1, i), length n-1
    diag: np.ndarray    # length n
    upper: np.ndarray   # entries (i, i+1), length n-1

    def to_dense(self):
        n = self.diag.size
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.lower
        a[np.arange(n - 1), np.arange(1, n)] = self.upper
        return a

    @property
    def norm_inf(self):
        n = self.diag.size
        rowsum = np.abs(self.diag).copy()
        rowsum[1:] += np.abs(self.lower)
        rowsum[:-1] += np.abs(self.upper)
        return float(rowsum.max())

    def solve(self, rhs):
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return solve_banded((1, 1), ab, rhs)


def assemble_jacobian_1d(u, spec, mesh, bc):
    """Analytic Jacobian of assemble_residual_1d, including nu'(u) terms."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidInput(
            f"state has {u.shape} entries, mesh wants ({mesh.n_nodes},)")
    left, right = bc
    validate_bc_pair(left, right)

    n = mesh.n_nodes
    h = mesh.h
    mid = 0.5 * (u[:-1] + u[1:])
    nu = spec.nu(mid)
    dnu = spec.dnu(mid)
    s = (u[1:] - u[:-1]) / h
    # F_k = nu_k * s_k depends on its two endpoint values:
    dF_l = 0.5 * dnu * s - nu / h   # d F_k / d u_k
    dF_r = 0.5 * dnu * s + nu / h   # d F_k / d u_{k+1}

    diag = np.zeros(n)
    lower = np.zeros(n - 1)
    upper = np.zeros(n - 1)

    i = np.arange(1, n - 1)
    diag[i] = (-dF_l[i] + dF_r[i - 1]) / h
    lower[i - 1] = dF_l[i - 1] / h       # (i, i-1)
    upper[i] = -dF_r[i] / h              # (i, i+1)

    two_over_h = 2.0 / h
    if isinstance(left, Dirichlet):
        diag[0] = 1.0
        upper[0] = 0.0
    else:
        diag[0] = -dF_l[0] * two_over_h
        upper[0] = -dF_r[0] * two_over_h
    if isinstance(right, Dirichlet):
        diag[-1] = 1.0
        lower[-1] = 0.0
    else:
        diag[-1] = dF_r[-1] * two_over_h
        lower[-1] = dF_l[-1] * two_over_h
    return Tridiagonal(lower, diag, upper)


def extract_outward_flux(u, spec, mesh, face, f_values=None):
    """Discrete outward flux at a face, via the half-cell balance.

    This is the exact value that, prescribed as a Neumann datum on the same
    face, makes the converged Dirichlet solution a solution of the mixed
    problem as well (it zeroes the Neumann residual row).
    """
    u = np.asarray(u, dtype=float)
    h = mesh.h
    if f_values is None:
        f_values = spec.forcing(mesh.nodes)
    F = _half_edge_flux(u, spec, h)
    if face == "left":
        return float(-F[0] - 0.5 * h * f_values[0])
    if face == "right":
        return float(F[-1] - 0.5 * h * f_values[-1])
    raise InvalidInput(f"unknown face {face!r}")


def default_initial_guess(mesh, bc):
    """Linear interpolation of Dirichlet data; constant extension at a Neumann face."""
    left, right = bc
    gl = left.value if isinstance(left, Dirichlet) else None
    gr = right.value if isinstance(right, Dirichlet) else None
    if gl is None:
        gl = gr
    if gr is None:
        gr = gl
    return np.linspace(gl, gr, mesh.n_nodes)


def _residual_floor(jac_norm, u_norm):
    # Achievable residual scale in floating point: the interior rows are
    # second differences of O(nu*|u|) quantities divided by h^2.
    return 4.0 * _EPS * jac_norm * max(1.0, u_norm)


def _natural_newton(u, spec, mesh, bc, config, iterations):
    """Damped Newton with the natural (affine-covariant) monotonicity test.

    Backtracks on ||J(u)^-1 r(trial)|| <= (1 - s/2)||J(u)^-1 r(u)||, reusing
    the current Jacobian.  More robust than residual-monotone damping on
    interior-layer profiles, where the residual infinity norm has spurious
    local minima; used as a rescue phase only.
    """
    u = u.copy()
    for _ in range(iterations, config.max_iter):
        r = assemble_residual_1d(u, spec, mesh, bc)
        rnorm = float(np.abs(r).max())
        jac = assemble_jacobian_1d(u, spec, mesh, bc)
        if rnorm <= config.tol_residual:
            return SubdomainSolution(u, True, iterations, rnorm)
        du = jac.solve(-r)
        if not np.all(np.isfinite(du)):
            break
        nd = float(np.abs(du).max())
        if nd <= 4.0 * _EPS * max(1.0, float(np.abs(u).max())):
            floor = _residual_floor(jac.norm_inf, float(np.abs(u).max()))
            return SubdomainSolution(u, rnorm <= max(config.tol_residual, floor),
                                     iterations, rnorm)
        step = 1.0
        while step >= config.min_step:
            trial = jac.solve(-assemble_residual_1d(u + step * du, spec,
                                                    mesh, bc))
            if float(np.abs(trial).max()) <= (1.0 - 0.5 * step) * nd:
                break
            step *= config.backtrack_factor
        u += step * du
        iterations += 1
    r = assemble_residual_1d(u, spec, mesh, bc)
    rnorm = float(np.abs(r).max())
    jac_norm = assemble_jacobian_1d(u, spec, mesh, bc).norm_inf
    floor = _residual_floor(jac_norm, float(np.abs(u).max()))
    return SubdomainSolution(u, rnorm <= max(config.tol_residual, floor),
                             iterations, rnorm)


def _cell_step(u_known, t, alpha, forward):
    """Solve one flux-form cell relation for the unknown endpoint value.

    With s the increment across the cell, nu((u_i+u_{i+1})/2)*s = t is a
    cubic in s.  For alpha*u^2 > 3 the cubic is non-monotone and has up to
    three real roots (the scheme's non-monotone regime); the physical branch
    is selected as the root nearest the Kirchhoff-transform prediction
    w -> w + t, which is exact for the continuum equation.
    """
    if alpha == 0.0:
        return u_known + t if forward else u_known - t
    w = u_known + alpha * u_known ** 3 / 3.0
    if forward:
        s_pred = float(invert_kirchhoff(w + t, alpha)) - u_known
        coeffs = (0.25 * alpha, alpha * u_known,
                  1.0 + alpha * u_known ** 2, -t)
    else:
        s_pred = u_known - float(invert_kirchhoff(w - t, alpha))
        coeffs = (0.25 * alpha, -alpha * u_known,
                  1.0 + alpha * u_known ** 2, -t)
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-8 * np.maximum(1.0, np.abs(roots))]
    s = float(real.real[np.argmin(np.abs(real.real - s_pred))])
    # polish to machine precision (np.roots is only eigenvalue-accurate)
    a3, a2, a1, a0 = coeffs
    for _ in range(3):
        p = ((a3 * s + a2) * s + a1) * s + a0
        dp = (3.0 * a3 * s + 2.0 * a2) * s + a1
        if dp != 0.0:
            s -= p / dp
    return u_known + s if forward else u_known - s


def _march_solve(spec, mesh, bc, config):
    """Exact cell-by-cell rescue solver for the 1D flux-form system.

    The interior rows determine every edge flux from the first one, so the
    system reduces to a chain of scalar cell solves: a Neumann face fixes
    the first flux directly, while the Dirichlet-Dirichlet case shoots on it
    (the end value is increasing in the flux, so brentq applies).  This is
    immune to the interior-layer local minima that defeat damped Newton.
    """
    from scipy.optimize import brentq
    left, right = bc
    h, m = mesh.h, mesh.n_nodes
    fx = spec.forcing(mesh.nodes)
    alpha = spec.alpha

    def forward_march(c):
        u = np.empty(m)
        u[0] = left.value
        flux = c
        for i in range(m - 1):
            u[i + 1] = _cell_step(u[i], h * flux, alpha, forward=True)
            flux -= h * fx[i + 1]
        return u

    if isinstance(left, Neumann):
        flux_edges = -left.flux - 0.5 * h * fx[0] - h * np.concatenate(
            ([0.0], np.cumsum(fx[1:-1])))
        u = np.empty(m)
        u[-1] = right.value
        for i in range(m - 2, -1, -1):
            u[i] = _cell_step(u[i + 1], h * flux_edges[i], alpha,
                              forward=False)
    elif isinstance(right, Neumann):
        c0 = right.flux + 0.5 * h * fx[-1] + h * float(np.sum(fx[1:-1]))
        u = forward_march(c0)
    else:
        # shoot on the first edge flux; center the bracket on the flux of
        # the transformed (alpha=0) problem, which is the continuum value
        spec0 = replace(spec, alpha=0.0)
        tr = (Dirichlet(left.value + alpha * left.value ** 3 / 3.0),
              Dirichlet(right.value + alpha * right.value ** 3 / 3.0))
        w = np.zeros(m)
        jac = assemble_jacobian_1d(w, spec0, mesh, tr)
        w = jac.solve(-assemble_residual_1d(w, spec0, mesh, tr))
        c_pred = float(_half_edge_flux(w, spec0, h)[0])

        def endpoint_gap(c):
            return forward_march(c)[-1] - right.value

        d = max(1.0, 0.05 * abs(c_pred))
        lo, hi = c_pred - d, c_pred + d
        flo, fhi = endpoint_gap(lo), endpoint_gap(hi)
        for _ in range(60):
            if flo <= 0.0 <= fhi:
                break
            d *= 2.0
            if flo > 0.0:
                lo -= d
                flo = endpoint_gap(lo)
            if fhi < 0.0:
                hi += d
                fhi = endpoint_gap(hi)
        else:
            raise SolverFailure(
                "subdomain solve did not converge (no flux bracket)")
        c = brentq(endpoint_gap, lo, hi,
                   xtol=1e-13 * max(1.0, abs(c_pred)), maxiter=200)
        u = forward_march(c)
        u[-1] = right.value

    r = assemble_residual_1d(u, spec, mesh, bc)
    rnorm = float(np.abs(r).max())
    jac_norm = assemble_jacobian_1d(u, spec, mesh, bc).norm_inf
    floor = _residual_floor(jac_norm, float(np.abs(u).max()))
    if rnorm > max(config.tol_residual, 8.0 * floor):
        # a couple of Newton steps remove the shooting-tolerance remainder
        return _natural_newton(u, spec, mesh, bc, config, 0)
    return SubdomainSolution(u, True, 0, rnorm)


def newton_subdomain_solve(spec, mesh, bc, initial_guess=None, config=None):
    """Damped Newton on the 1D discrete system.

    Backtracks by halving until the residual norm decreases (floor 2^-20).
    When the iteration stagnates at the floating-point roundoff floor of the
    residual evaluation, the result is accepted as converged provided the
    residual is at that roundoff scale; an absolute tolerance below the floor
    is otherwise unattainable for large states on fine meshes.
    """
    from .problem import NewtonConfig, validate_bc_pair
    validate_bc_pair(*bc)
    if config is None:
        config = NewtonConfig()
    if initial_guess is None:
        u = default_initial_guess(mesh, bc)
    else:
        u = np.asarray(initial_guess, dtype=float).copy()
        if u.shape != (mesh.n_nodes,):
            raise InvalidInput("initial guess does not match the mesh")
    # Satisfy the (linear) Dirichlet rows exactly from the start, blending the
    # correction linearly across the subdomain.  A hard clamp of only the
    # boundary node would put an O(g/h) kink into the guess, and an O(1)
    # boundary mismatch is invisible to the residual infinity norm next to
    # the O(1/h^2) interior rows.
    t = np.linspace(0.0, 1.0, mesh.n_nodes)
    if isinstance(bc[0], Dirichlet) and isinstance(bc[1], Dirichlet):
        u += (bc[0].value - u[0]) * (1.0 - t) + (bc[1].value - u[-1]) * t
    elif isinstance(bc[0], Dirichlet):
        u += bc[0].value - u[0]
    elif isinstance(bc[1], Dirichlet):
        u += bc[1].value - u[-1]

    r = assemble_residual_1d(u, spec, mesh, bc)
    rnorm = float(np.abs(r).max())
    iterations = 0
    converged = rnorm <= config.tol_residual

    while not converged and iterations < config.max_iter:
        jac = assemble_jacobian_1d(u, spec, mesh, bc)
        try:
            du = jac.solve(-r)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SolverFailure(f"singular Jacobian: {exc}") from exc
        if not np.all(np.isfinite(du)):
            raise SolverFailure("singular Jacobian (non-finite Newton step)")

        step = 1.0
        while True:
            u_new = u + step * du
            r_new = assemble_residual_1d(u_new, spec, mesh, bc)
            rnorm_new = float(np.abs(r_new).max())
            if rnorm_new < rnorm:
                break
            if not config.damping or step < config.min_step:
                # stagnation: no step decreases the residual any further
                floor = _residual_floor(jac.norm_inf, float(np.abs(u).max()))
                if rnorm <= max(config.tol_residual, floor):
                    return SubdomainSolution(u, True, iterations, rnorm)
                # residual-monotone damping can trap in a local minimum of
                # the residual norm when the solution has a steep interior
                # layer; retry with the affine-covariant (natural) test,
                # then with homotopy continuation from the zero problem
                rescue = _natural_newton(u, spec, mesh, bc, config,
                                         iterations)
                if rescue.converged:
                    return rescue
                return _march_solve(spec, mesh, bc, config)
            step *= config.backtrack_factor

        u, r, rnorm = u_new, r_new, rnorm_new
        iterations += 1
        if rnorm <= config.tol_residual:
            converged = True
        elif float(np.abs(step * du).max()) <= 4.0 * _EPS * max(1.0, float(np.abs(u).max())):
            jac_norm = assemble_jacobian_1d(u, spec, mesh, bc).norm_inf
            floor = _residual_floor(jac_norm, float(np.abs(u).max()))
            if rnorm <= max(config.tol_residual, floor):
                return SubdomainSolution(u, True, iterations, rnorm)
            return _march_solve(spec, mesh, bc, config)

    return SubdomainSolution(u, converged, iterations, rnorm)


def solve_tolerance(config):
    return config.tol_residual


# ---------------------------------------------------------------------------
# analytic reference for f = 0
# ---------------------------------------------------------------------------

def _invert_cubic(w, alpha, lo, hi):
    # solve u + alpha*u^3/3 = w; strictly increasing, bisection to 1e-14
    def phi(v):
        return v + alpha * v ** 3 / 3.0 - w
    while phi(lo) > 0:
        lo -= 1.0
    while phi(hi) < 0:
        hi += 1.0
    for _ in range(200):
        midpt = 0.5 * (lo + hi)
        if hi - lo <= 1e-14 * max(1.0, abs(midpt)):
            break
        if phi(midpt) <= 0:
            lo = midpt
        else:
            hi = midpt
    return 0.5 * (lo + hi)


def invert_kirchhoff(w, alpha):
    """Vectorized solve of u + alpha*u^3/3 = w (monotone cubic).

    Newton from u0 = w converges monotonically for this convex/concave
    increasing function; used to map transformed profiles back to u.
    """
    w = np.asarray(w, dtype=float)
    if alpha == 0.0:
        return w.copy()
    u = w.copy()
    for _ in range(60):
        f = u + alpha * u ** 3 / 3.0 - w
        u_new = u - f / (1.0 + alpha * u * u)
        if np.all(np.abs(u_new - u) <= 1e-14 * np.maximum(1.0, np.abs(u_new))):
            u = u_new
            break
        u = u_new
    return u


def kirchhoff_exact(spec, x):
    """Exact solution of -(nu(u)u')' = 0 via the transform w = u + alpha*u^3/3.

    w is linear in x between the transformed boundary values; u is recovered
    by monotone bisection.  Only valid for zero forcing.
    """
    if not spec.forcing.is_zero:
        raise UnsupportedOracle("analytic reference requires zero forcing")
    a = spec.alpha
    w0 = spec.g_left + a * spec.g_left ** 3 / 3.0
    w1 = spec.g_right + a * spec.g_right ** 3 / 3.0
    lo = min(spec.g_left, spec.g_right) - 1.0
    hi = max(spec.g_left, spec.g_right) + 1.0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ws = w0 + (w1 - w0) * xs / spec.length
    us = np.array([_invert_cubic(w, a, lo, hi) for w in ws])
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(us[0])
    return us


def kirchhoff_flux(spec):
    """The constant flux nu(u)u' = w' of the zero-forcing exact solution."""
    if not spec.forcing.is_zero:
        raise UnsupportedOracle("analytic reference requires zero forcing")
    a = spec.alpha
    w0 = spec.g_left + a * spec.g_left ** 3 / 3.0
    w1 = spec.g_right + a * spec.g_right ** 3 / 3.0
    return (w1 - w0) / spec.length


def monodomain_mesh(spec, h):
    from .problem import Mesh1D
    n = int(round(spec.length / h))
    return Mesh1D(0.0, spec.length, n)


def solve_monodomain(spec, mesh, config=None):
    """Global Dirichlet solve on the full interval; baseline and reference."""
    bc = (Dirichlet(spec.g_left), Dirichlet(spec.g_right))
    sol = newton_subdomain_solve(spec, mesh, bc, config=config)
    if not sol.converged:
        raise SolverFailure("monodomain Newton did not converge")
    return sol
