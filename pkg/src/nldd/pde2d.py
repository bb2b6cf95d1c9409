"""2D discretization on rectangles and strips.

Five-point conservative scheme with half-edge coefficients
nu((u_P + u_Q)/2).  Neumann data only appears on vertical faces (strip
decompositions); its residual row is the half-cell balance in x combined
with the full y-flux difference, mirroring the 1D convention.  States are
node arrays of shape (nx+1, ny+1), indexed [i, j] with i along x.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidInput, SolverFailure
from .problem import Dirichlet, Neumann, NewtonConfig, SubdomainSolution

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FaceBC2D:
    """Boundary conditions for the four faces of a Grid2D.

    left/right: Dirichlet(values over interior-y nodes, length ny-1) or
    Neumann(outward flux over interior-y nodes).  bottom/top: Dirichlet
    (values over all x nodes, length nx+1); they own the corners.
    """

    left: object
    right: object
    bottom: object
    top: object

    def __post_init__(self):
        for name in ("bottom", "top"):
            if not isinstance(getattr(self, name), Dirichlet):
                raise InvalidInput(f"{name} face must be Dirichlet")
        for name in ("left", "right"):
            if not isinstance(getattr(self, name), (Dirichlet, Neumann)):
                raise InvalidInput(f"{name} face must be Dirichlet or Neumann")
        if isinstance(self.left, Neumann) and isinstance(self.right, Neumann):
            raise InvalidInput("both vertical faces Neumann is not supported")


def _face_values(face, m):
    v = np.asarray(face.value if isinstance(face, Dirichlet) else face.flux,
                   dtype=float)
    if v.ndim == 0:
        v = np.full(m, float(v))
    if v.shape != (m,):
        raise InvalidInput(f"face data has shape {v.shape}, expected ({m},)")
    return v


def _fluxes(u, spec, grid):
    fx = spec.nu(0.5 * (u[:-1, :] + u[1:, :])) * (u[1:, :] - u[:-1, :]) / grid.hx
    fy = spec.nu(0.5 * (u[:, :-1] + u[:, 1:])) * (u[:, 1:] - u[:, :-1]) / grid.hy
    return fx, fy


def assemble_residual_2d(u, spec, grid, bc):
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise InvalidInput(f"state has shape {u.shape}, grid wants {grid.shape}")
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    f = spec.forcing(X, Y)
    Fx, Fy = _fluxes(u, spec, grid)

    r = np.empty_like(u)
    r[1:-1, 1:-1] = (-(Fx[1:, 1:-1] - Fx[:-1, 1:-1]) / hx
                     - (Fy[1:-1, 1:] - Fy[1:-1, :-1]) / hy
                     - f[1:-1, 1:-1])

    r[:, 0] = u[:, 0] - _face_values(bc.bottom, nx + 1)
    r[:, -1] = u[:, -1] - _face_values(bc.top, nx + 1)

    jj = slice(1, ny)
    ydiff_l = (Fy[0, 1:] - Fy[0, :-1]) / hy
    ydiff_r = (Fy[-1, 1:] - Fy[-1, :-1]) / hy
    if isinstance(bc.left, Dirichlet):
        r[0, jj] = u[0, jj] - _face_values(bc.left, ny - 1)
    else:
        phi = _face_values(bc.left, ny - 1)
        r[0, jj] = (-(Fx[0, jj] + phi) / (0.5 * hx)
                    - ydiff_l[jj.start - 1:ny - 1] - f[0, jj])
    if isinstance(bc.right, Dirichlet):
        r[-1, jj] = u[-1, jj] - _face_values(bc.right, ny - 1)
    else:
        phi = _face_values(bc.right, ny - 1)
        r[-1, jj] = (-(phi - Fx[-1, jj]) / (0.5 * hx)
                     - ydiff_r[jj.start - 1:ny - 1] - f[-1, jj])
    return r


def extract_outward_flux_2d(u, spec, grid, face):
    """Outward flux over the interior-y nodes of a vertical face (half-cell balance)."""
    u = np.asarray(u, dtype=float)
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    f = spec.forcing(X, Y)
    Fx, Fy = _fluxes(u, spec, grid)
    jj = slice(1, ny)
    if face == "left":
        ydiff = (Fy[0, 1:] - Fy[0, :-1]) / hy
        return -Fx[0, jj] - 0.5 * hx * (ydiff[:ny - 1] + f[0, jj])
    if face == "right":
        ydiff = (Fy[-1, 1:] - Fy[-1, :-1]) / hy
        return Fx[-1, jj] - 0.5 * hx * (ydiff[:ny - 1] + f[-1, jj])
    raise InvalidInput(f"unknown face {face!r}")


def _node_index(nx, ny):
    def idx(i, j):
        return i * (ny + 1) + j
    return idx


def assemble_jacobian_2d(u, spec, grid, bc):
    """Sparse analytic Jacobian (CSR) matching assemble_residual_2d."""
    u = np.asarray(u, dtype=float)
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    n = (nx + 1) * (ny + 1)
    idx = _node_index(nx, ny)

    mx = 0.5 * (u[:-1, :] + u[1:, :])
    sx = (u[1:, :] - u[:-1, :]) / hx
    dFx_l = 0.5 * spec.dnu(mx) * sx - spec.nu(mx) / hx
    dFx_r = 0.5 * spec.dnu(mx) * sx + spec.nu(mx) / hx
    my = 0.5 * (u[:, :-1] + u[:, 1:])
    sy = (u[:, 1:] - u[:, :-1]) / hy
    dFy_l = 0.5 * spec.dnu(my) * sy - spec.nu(my) / hy
    dFy_r = 0.5 * spec.dnu(my) * sy + spec.nu(my) / hy

    rows, cols, vals = [], [], []
    I, J = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
    I, J = I.ravel(), J.ravel()

    def add_block(ri, rj, ci, cj, v):
        rows.append(np.asarray(idx(ri, rj)).ravel())
        cols.append(np.asarray(idx(ci, cj)).ravel())
        vals.append(np.asarray(v, dtype=float).ravel())

    # interior rows
    add_block(I, J, I - 1, J, dFx_l[I - 1, J] / hx)
    add_block(I, J, I + 1, J, -dFx_r[I, J] / hx)
    add_block(I, J, I, J - 1, dFy_l[I, J - 1] / hy)
    add_block(I, J, I, J + 1, -dFy_r[I, J] / hy)
    add_block(I, J, I, J,
              (-dFx_l[I, J] + dFx_r[I - 1, J]) / hx
              + (-dFy_l[I, J] + dFy_r[I, J - 1]) / hy)

    # bottom/top Dirichlet rows (own the corners)
    ib = np.arange(nx + 1)
    add_block(ib, np.zeros_like(ib), ib, np.zeros_like(ib), np.ones(nx + 1))
    add_block(ib, np.full_like(ib, ny), ib, np.full_like(ib, ny), np.ones(nx + 1))

    jv = np.arange(1, ny)
    z = np.zeros_like(jv)
    two_over_hx = 2.0 / hx
    if isinstance(bc.left, Dirichlet):
        add_block(z, jv, z, jv, np.ones(ny - 1))
    else:
        # r = -(Fx[0,j] + phi)/(hx/2) - (Fy[0,j]-Fy[0,j-1])/hy - f
        add_block(z, jv, z, jv,
                  -dFx_l[0, jv] * two_over_hx
                  + (-dFy_l[0, jv] + dFy_r[0, jv - 1]) / hy)
        add_block(z, jv, z + 1, jv, -dFx_r[0, jv] * two_over_hx)
        add_block(z, jv, z, jv - 1, dFy_l[0, jv - 1] / hy)
        add_block(z, jv, z, jv + 1, -dFy_r[0, jv] / hy)
    zr = np.full_like(jv, nx)
    if isinstance(bc.right, Dirichlet):
        add_block(zr, jv, zr, jv, np.ones(ny - 1))
    else:
        # r = -(phi - Fx[nx-1,j])/(hx/2) - (Fy[nx,j]-Fy[nx,j-1])/hy - f
        add_block(zr, jv, zr, jv,
                  dFx_r[-1, jv] * two_over_hx
                  + (-dFy_l[-1, jv] + dFy_r[-1, jv - 1]) / hy)
        add_block(zr, jv, zr - 1, jv, dFx_l[-1, jv] * two_over_hx)
        add_block(zr, jv, zr, jv - 1, dFy_l[-1, jv - 1] / hy)
        add_block(zr, jv, zr, jv + 1, -dFy_r[-1, jv] / hy)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def default_initial_guess_2d(grid, bc):
    """Interpolate in x between the vertical-face data (constant at a Neumann face)."""
    nx, ny = grid.nx, grid.ny
    u = np.zeros(grid.shape)
    jj = slice(1, ny)
    gl = _face_values(bc.left, ny - 1) if isinstance(bc.left, Dirichlet) else None
    gr = _face_values(bc.right, ny - 1) if isinstance(bc.right, Dirichlet) else None
    if gl is None:
        gl = gr
    if gr is None:
        gr = gl
    t = np.linspace(0.0, 1.0, nx + 1)[:, None]
    u[:, jj] = (1.0 - t) * gl[None, :] + t * gr[None, :]
    u[:, 0] = _face_values(bc.bottom, nx + 1)
    u[:, -1] = _face_values(bc.top, nx + 1)
    return u


def newton_solve_2d(spec, grid, bc, initial_guess=None, config=None):
    """Damped Newton on the 2D discrete system; direct sparse linear solves."""
    if config is None:
        config = NewtonConfig()
    if initial_guess is None:
        u = default_initial_guess_2d(grid, bc)
    else:
        u = np.asarray(initial_guess, dtype=float).copy()
        if u.shape != grid.shape:
            raise InvalidInput("initial guess does not match the grid")
    # start with the (linear) Dirichlet rows exactly satisfied, blending the
    # vertical-face correction linearly in x (see the 1D solver for why)
    t = np.linspace(0.0, 1.0, grid.nx + 1)[:, None]
    inner_y = slice(1, grid.ny)
    if isinstance(bc.left, Dirichlet) and isinstance(bc.right, Dirichlet):
        u[:, inner_y] += ((_face_values(bc.left, grid.ny - 1) - u[0, inner_y])
                          * (1.0 - t)
                          + (_face_values(bc.right, grid.ny - 1) - u[-1, inner_y]) * t)
    elif isinstance(bc.left, Dirichlet):
        u[:, inner_y] += _face_values(bc.left, grid.ny - 1) - u[0, inner_y]
    elif isinstance(bc.right, Dirichlet):
        u[:, inner_y] += _face_values(bc.right, grid.ny - 1) - u[-1, inner_y]
    u[:, 0] = _face_values(bc.bottom, grid.nx + 1)
    u[:, -1] = _face_values(bc.top, grid.nx + 1)

    r = assemble_residual_2d(u, spec, grid, bc)
    rnorm = float(np.abs(r).max())
    iterations = 0
    converged = rnorm <= config.tol_residual

    while not converged and iterations < config.max_iter:
        jac = assemble_jacobian_2d(u, spec, grid, bc)
        jnorm = float(np.abs(jac).sum(axis=1).max())
        try:
            du = splu(jac.tocsc()).solve(-r.ravel()).reshape(grid.shape)
        except RuntimeError as exc:
            raise SolverFailure(f"singular Jacobian: {exc}") from exc
        if not np.all(np.isfinite(du)):
            raise SolverFailure("singular Jacobian (non-finite Newton step)")

        step = 1.0
        while True:
            u_new = u + step * du
            r_new = assemble_residual_2d(u_new, spec, grid, bc)
            rnorm_new = float(np.abs(r_new).max())
            if rnorm_new < rnorm:
                break
            if not config.damping or step < config.min_step:
                floor = 4.0 * _EPS * jnorm * max(1.0, float(np.abs(u).max()))
                return SubdomainSolution(u, rnorm <= max(config.tol_residual, floor),
                                         iterations, rnorm)
            step *= config.backtrack_factor

        u, r, rnorm = u_new, r_new, rnorm_new
        iterations += 1
        if rnorm <= config.tol_residual:
            converged = True
        elif float(np.abs(step * du).max()) <= 4.0 * _EPS * max(1.0, float(np.abs(u).max())):
            floor = 4.0 * _EPS * jnorm * max(1.0, float(np.abs(u).max()))
            return SubdomainSolution(u, rnorm <= max(config.tol_residual, floor),
                                     iterations, rnorm)

    return SubdomainSolution(u, converged, iterations, rnorm)
