"""The Dirichlet-Neumann iteration and its multi-subdomain extension.

The two-subdomain update on the interface variable is

    lam_new = (1 - theta) * lam + theta * NtD2(-DtN1(lam, psi1), psi2),

whose fixed point is the interface trace of the global discrete solution.
Histories measure the interface error against that trace (computed once by
a monodomain Newton solve on the union mesh), so the curves isolate the
decomposition convergence from discretization error.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolated, InvalidInput, SolverFailure
from .pde1d import newton_subdomain_solve, extract_outward_flux
from .pde2d import (FaceBC2D, extract_outward_flux_2d, newton_solve_2d)
from .problem import (Dirichlet, Grid2D, Mesh1D, Neumann, NewtonConfig,
                      ProblemSpec)
from .transmission import SubdomainData, Tally, dtn_derivative, dtn_eval, ntd_eval


@dataclass(frozen=True)
class DNConfig:
    theta: float = 0.5
    tol: float = 1e-10           # on the relative interface error
    max_outer: int = 200
    inner: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise InvalidInput("theta must lie in (0, 1)")
        if self.tol <= 0:
            raise InvalidInput("tol must be positive")
        if self.max_outer < 1:
            raise InvalidInput("max_outer must be at least 1")


@dataclass
class HistoryEntry:
    iteration: int
    error_inf: float
    residual_inf: float
    inner_newton_total: int


@dataclass
class ConvergenceHistory:
    entries: list = field(default_factory=list)
    converged: bool = False
    method: str = ""
    theta: float = float("nan")
    h: float = float("nan")
    subdomains: int = 2

    def record(self, iteration, error, residual, inner_total):
        self.entries.append(HistoryEntry(iteration, float(error),
                                         float(residual), int(inner_total)))

    @property
    def errors(self):
        return np.array([e.error_inf for e in self.entries])

    @property
    def n_iterations(self):
        return self.entries[-1].iteration if self.entries else 0

    def iterations_to(self, rel_tol):
        """First iteration index with relative error <= rel_tol (None if never)."""
        errs = self.errors
        if errs.size == 0:
            return None
        e0 = errs[0] if errs[0] > 0 else 1.0
        hits = np.nonzero(errs <= rel_tol * e0)[0]
        return int(self.entries[hits[0]].iteration) if hits.size else None


# ---------------------------------------------------------------------------
# two-subdomain iteration
# ---------------------------------------------------------------------------

def g_map_eval(lam, psi1, psi2, theta, config=None, tally=None):
    """One relaxed DN update of the interface value."""
    config = config or NewtonConfig()
    phi = dtn_eval(lam, psi1, config, tally)
    trace = ntd_eval(-phi, psi2, config, tally)
    return (1.0 - theta) * lam + theta * trace


def union_mesh(psi1, psi2):
    """Merge two adjacent subdomain meshes into the monodomain mesh."""
    m1, m2 = psi1.mesh, psi2.mesh
    if psi1.interface_side != "right" or psi2.interface_side != "left":
        raise InvalidInput("expected (left, right) subdomain pair")
    if abs(m1.x_right - m2.x_left) > 1e-12 * max(1.0, abs(m1.x_right)):
        raise InvalidInput("subdomain meshes do not share the interface node")
    if abs(m1.h - m2.h) > 1e-10 * m1.h:
        raise InvalidInput("subdomain meshes have mismatched spacing")
    return Mesh1D(m1.x_left, m2.x_right, m1.n_cells + m2.n_cells)


def reference_trace(psi1, psi2, config=None, tally=None):
    """Interface trace of the monodomain Newton solution on the union mesh."""
    config = config or NewtonConfig()
    mesh = union_mesh(psi1, psi2)
    bc = (Dirichlet(psi1.outer_value), Dirichlet(psi2.outer_value))
    sol = newton_subdomain_solve(psi1, mesh, bc, config=config)
    if tally is not None:
        tally.add(sol.newton_iterations)
    if not sol.converged:
        raise SolverFailure("monodomain reference solve did not converge")
    return float(sol.values[psi1.mesh.n_cells]), sol


def dn_solve(lam0, psi1, psi2, config=None, lam_ref=None):
    """Fixed-point DN iteration; returns (final lambda, ConvergenceHistory)."""
    config = config or DNConfig()
    tally = Tally()
    if lam_ref is None:
        lam_ref, _ = reference_trace(psi1, psi2, config.inner, tally)

    hist = ConvergenceHistory(method="dn", theta=config.theta,
                              h=psi1.mesh.h, subdomains=2)
    lam = float(lam0)
    e0 = abs(lam - lam_ref)
    # an initial error at roundoff scale cannot be reduced relatively;
    # fall back to an absolute criterion (lam0 already is the fixed point)
    scale = e0 if e0 > 1e-14 * max(1.0, abs(lam_ref)) else 1.0

    for n in range(config.max_outer + 1):
        err = abs(lam - lam_ref)
        lam_next = g_map_eval(lam, psi1, psi2, config.theta, config.inner, tally)
        hist.record(n, err, abs(lam - lam_next), tally.inner_newton)
        if err <= config.tol * scale:
            hist.converged = True
            break
        lam = lam_next
    return lam, hist


def optimal_theta(psi1, psi2, config=None, lam_ref=None):
    """Relaxation parameter giving a zero derivative of the DN map at the
    exact trace: theta_q = 1/(1+delta) with delta the ratio of the two
    interface-flux derivatives there.  Returns (theta_q, delta)."""
    config = config or NewtonConfig()
    if lam_ref is None:
        lam_ref, _ = reference_trace(psi1, psi2, config)
    d1 = dtn_derivative(lam_ref, psi1, config)
    d2 = dtn_derivative(lam_ref, psi2, config)
    if d1 * d2 <= 0:
        raise HypothesisViolated(
            f"interface flux derivatives have opposite signs ({d1:g}, {d2:g}); "
            "no quadratic relaxation parameter exists")
    delta = d1 / d2
    return 1.0 / (1.0 + delta), delta


# ---------------------------------------------------------------------------
# multi-subdomain sweep, 1D
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition1D:
    """N subdomains of a 1D problem, node-aligned at the interior interfaces."""

    spec: ProblemSpec
    boundaries: tuple      # Gamma_0 = 0 < Gamma_1 < ... < Gamma_N = length
    cells: tuple           # cells per subdomain

    def __post_init__(self):
        b = np.asarray(self.boundaries)
        if len(self.cells) != len(self.boundaries) - 1:
            raise InvalidInput("cells must have one entry per subdomain")
        if not np.all(np.diff(b) > 0):
            raise InvalidInput("interfaces must be strictly ordered")

    @classmethod
    def uniform(cls, spec, n_subdomains, h):
        if n_subdomains < 2:
            raise InvalidInput("need at least two subdomains")
        bounds = np.linspace(0.0, spec.length, n_subdomains + 1)
        cells = tuple(int(round((bounds[j + 1] - bounds[j]) / h))
                      for j in range(n_subdomains))
        return cls(spec, tuple(bounds), cells)

    @property
    def n_subdomains(self):
        return len(self.cells)

    @property
    def meshes(self):
        b = self.boundaries
        return [Mesh1D(b[j], b[j + 1], self.cells[j])
                for j in range(self.n_subdomains)]

    @property
    def h(self):
        m = self.meshes[0]
        return m.h


def _multi_reference_1d(decomp, config):
    spec = decomp.spec
    n_total = sum(decomp.cells)
    mesh = Mesh1D(0.0, spec.length, n_total)
    bc = (Dirichlet(spec.g_left), Dirichlet(spec.g_right))
    sol = newton_subdomain_solve(spec, mesh, bc, config=config)
    if not sol.converged:
        raise SolverFailure("monodomain reference solve did not converge")
    offsets = np.cumsum(decomp.cells)[:-1]
    return sol.values[offsets].astype(float), sol


def dn_multi_sweep(lam_left, lam_right, decomp, theta, config=None, tally=None,
                   guesses=None):
    """One left-to-right sweep of the multi-subdomain DN method (1D).

    ``lam_left[j]``/``lam_right[j]`` hold the previous-iteration traces of
    subdomains j and j+1 at interface j.  Each subdomain receives the flux
    of the *just-computed* left neighbour (strictly sequential sweep) and a
    relaxed Dirichlet value on its right interface.  Returns the updated
    trace pair and the list of subdomain solutions.
    """
    config = config or NewtonConfig()
    spec = decomp.spec
    meshes = decomp.meshes
    n_sub = decomp.n_subdomains
    dirichlet = (1.0 - theta) * np.asarray(lam_left) + theta * np.asarray(lam_right)

    sols = []
    flux_from_left = None
    for j in range(n_sub):
        mesh = meshes[j]
        left = Dirichlet(spec.g_left) if j == 0 else Neumann(-flux_from_left)
        right = (Dirichlet(float(dirichlet[j])) if j < n_sub - 1
                 else Dirichlet(spec.g_right))
        guess = guesses[j] if guesses is not None else None
        sol = newton_subdomain_solve(spec, mesh, (left, right),
                                     initial_guess=guess, config=config)
        if tally is not None:
            tally.add(sol.newton_iterations)
        if not sol.converged:
            raise SolverFailure(
                f"subdomain {j} did not converge in the sweep", subdomain=j)
        sols.append(sol)
        if j < n_sub - 1:
            flux_from_left = extract_outward_flux(sol.values, spec, mesh, "right")

    new_left = dirichlet.copy()
    new_right = np.array([sols[j + 1].values[0] for j in range(n_sub - 1)])
    return new_left, new_right, sols


def dn_multi_solve(decomp, theta, tol=1e-8, max_outer=400, inner=None,
                   lam0=None):
    """Iterate dn_multi_sweep until the relative interface error meets tol."""
    inner = inner or NewtonConfig()
    spec = decomp.spec
    n_ifc = decomp.n_subdomains - 1
    lam_ref, _ = _multi_reference_1d(decomp, inner)
    if lam0 is None:
        # linear interpolation of the outer Dirichlet data, matching the
        # initial-guess convention used for the subdomain solves
        gam = np.asarray(decomp.boundaries[1:-1], float)
        lam0 = spec.g_left + (spec.g_right - spec.g_left) * gam / spec.length
    lam_left = np.asarray(lam0, float).copy()
    lam_right = lam_left.copy()

    tally = Tally()
    hist = ConvergenceHistory(method="dn", theta=theta, h=decomp.h,
                              subdomains=decomp.n_subdomains)
    # lam^n: the relaxed Dirichlet data that the next sweep would impose
    lam = (1.0 - theta) * lam_left + theta * lam_right
    e0 = float(np.abs(lam - lam_ref).max())
    scale = e0 if e0 > 0 else 1.0
    hist.record(0, e0, float(np.abs(lam_right - lam_left).max()), 0)
    guesses = None

    for n in range(1, max_outer + 1):
        lam_left, lam_right, sols = dn_multi_sweep(
            lam_left, lam_right, decomp, theta, inner, tally, guesses)
        guesses = [s.values for s in sols]
        lam = (1.0 - theta) * lam_left + theta * lam_right
        err = float(np.abs(lam - lam_ref).max())
        hist.record(n, err, float(np.abs(lam_right - lam_left).max()),
                    tally.inner_newton)
        if err <= tol * scale:
            hist.converged = True
            break
    return lam, hist


# ---------------------------------------------------------------------------
# multi-subdomain sweep, 2D strips
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripDecomposition2D:
    """Vertical strips of a rectangle; interfaces are grid-aligned lines."""

    problem: object        # Problem2D
    n_strips: int
    nx_per_strip: int      # cells in x per strip (equal strips)
    ny: int

    def __post_init__(self):
        if self.n_strips < 2:
            raise InvalidInput("need at least two strips")

    @property
    def strip_width(self):
        return self.problem.length_x / self.n_strips

    def grid(self, j):
        w = self.strip_width
        return Grid2D(j * w, (j + 1) * w, 0.0, self.problem.length_y,
                      self.nx_per_strip, self.ny)

    @property
    def union_grid(self):
        return Grid2D(0.0, self.problem.length_x, 0.0, self.problem.length_y,
                      self.nx_per_strip * self.n_strips, self.ny)


def _strip_bc(decomp, j, left_face, right_face):
    p = decomp.problem
    g = decomp.grid(j)
    bottom = Dirichlet(p.g.on_edge("bottom", g.xs))
    top = Dirichlet(p.g.on_edge("top", g.xs))
    return FaceBC2D(left_face, right_face, bottom, top)


def _multi_reference_2d(decomp, config):
    p = decomp.problem
    g = decomp.union_grid
    bc = FaceBC2D(Dirichlet(p.g.on_edge("left", g.ys[1:-1])),
                  Dirichlet(p.g.on_edge("right", g.ys[1:-1])),
                  Dirichlet(p.g.on_edge("bottom", g.xs)),
                  Dirichlet(p.g.on_edge("top", g.xs)))
    sol = newton_solve_2d(p, g, bc, config=config)
    if not sol.converged:
        raise SolverFailure("2D monodomain reference solve did not converge")
    refs = [sol.values[(j + 1) * decomp.nx_per_strip, 1:-1].copy()
            for j in range(decomp.n_strips - 1)]
    return refs, sol


def dn_multi_solve_2d(decomp, theta, tol=1e-8, max_outer=400, inner=None):
    """Multi-strip DN iteration in 2D; traces live on interior interface nodes."""
    inner = inner or NewtonConfig()
    p = decomp.problem
    n_sub = decomp.n_strips
    n_ifc = n_sub - 1
    refs, _ = _multi_reference_2d(decomp, inner)
    ys_int = decomp.grid(0).ys[1:-1]

    # initial traces: interpolate the left/right boundary data linearly in x,
    # matching the initial-guess convention of the subdomain solves
    g_l = np.broadcast_to(np.asarray(p.g.on_edge("left", ys_int), float),
                          ys_int.shape)
    g_r = np.broadcast_to(np.asarray(p.g.on_edge("right", ys_int), float),
                          ys_int.shape)
    lam_left = []
    for j in range(n_ifc):
        t = decomp.grid(j).x1 / p.length_x
        lam_left.append((1.0 - t) * g_l + t * g_r)
    lam_right = [v.copy() for v in lam_left]

    tally = Tally()
    hist = ConvergenceHistory(method="dn", theta=theta,
                              h=decomp.union_grid.hx, subdomains=n_sub)

    def current_lam():
        return [(1.0 - theta) * lam_left[j] + theta * lam_right[j]
                for j in range(n_ifc)]

    lam = current_lam()
    e0 = max(float(np.abs(lam[j] - refs[j]).max()) for j in range(n_ifc))
    scale = e0 if e0 > 0 else 1.0
    jump = max(float(np.abs(lam_right[j] - lam_left[j]).max()) for j in range(n_ifc))
    hist.record(0, e0, jump, 0)
    guesses = [None] * n_sub

    for n in range(1, max_outer + 1):
        dirichlet = current_lam()
        sols = []
        flux_from_left = None
        for j in range(n_sub):
            grid = decomp.grid(j)
            if j == 0:
                left = Dirichlet(p.g.on_edge("left", ys_int))
            else:
                left = Neumann(-flux_from_left)
            if j < n_sub - 1:
                right = Dirichlet(dirichlet[j])
            else:
                right = Dirichlet(p.g.on_edge("right", ys_int))
            bc = _strip_bc(decomp, j, left, right)
            sol = newton_solve_2d(p, grid, bc, initial_guess=guesses[j],
                                  config=inner)
            tally.add(sol.newton_iterations)
            if not sol.converged:
                raise SolverFailure(f"strip {j} did not converge", subdomain=j)
            sols.append(sol)
            guesses[j] = sol.values
            if j < n_sub - 1:
                flux_from_left = extract_outward_flux_2d(sol.values, p, grid,
                                                         "right")
        lam_left = [d.copy() for d in dirichlet]
        lam_right = [sols[j + 1].values[0, 1:-1].copy() for j in range(n_ifc)]
        lam = current_lam()
        err = max(float(np.abs(lam[j] - refs[j]).max()) for j in range(n_ifc))
        jump = max(float(np.abs(lam_right[j] - lam_left[j]).max())
                   for j in range(n_ifc))
        hist.record(n, err, jump, tally.inner_newton)
        if err <= tol * scale:
            hist.converged = True
            break
    return lam, hist
