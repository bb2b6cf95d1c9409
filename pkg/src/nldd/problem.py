"""Problem descriptions, meshes and boundary conditions.

The continuous model is the nonlinear diffusion equation

    -(nu(u) u')' = f,   nu(u) = 1 + alpha*u**2,  alpha >= 0,

posed on an interval (1D) or a rectangle (2D) with Dirichlet data on the
outer boundary.  Forcings come from a small closed set of named profiles,
which keeps experiment manifests fully self-describing.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput


# ---------------------------------------------------------------------------
# forcings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Forcing:
    """Named 1D forcing: 'zero', 'linear_ramp' (c*x) or 'sine' (c*sin(k*pi*x))."""

    kind: str
    c: float = 0.0
    k: int = 0

    _KINDS = ("zero", "linear_ramp", "sine")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise InvalidInput(f"unknown forcing kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear_ramp":
            return self.c * x
        return self.c * np.sin(self.k * np.pi * x)

    @property
    def is_zero(self):
        return self.kind == "zero"

    def describe(self):
        if self.kind == "zero":
            return "0"
        if self.kind == "linear_ramp":
            return f"{self.c:g}*x"
        return f"{self.c:g}*sin({self.k:g}*pi*x)"


def zero_forcing():
    return Forcing("zero")


def linear_ramp(c):
    return Forcing("linear_ramp", c=c)


def sine_forcing(k, c=1.0):
    return Forcing("sine", c=c, k=k)


# ---------------------------------------------------------------------------
# problem specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """1D problem on (0, length) with Dirichlet values g_left, g_right."""

    alpha: float
    forcing: Forcing = field(default_factory=zero_forcing)
    g_left: float = 0.0
    g_right: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidInput("alpha must be nonnegative (uniform ellipticity)")
        if self.length <= 0:
            raise InvalidInput("domain length must be positive")

    def nu(self, u):
        return 1.0 + self.alpha * u * u

    def dnu(self, u):
        return 2.0 * self.alpha * u


@dataclass(frozen=True)
class EdgeTraces:
    """Dirichlet data for the four edges of a rectangle.

    ``left``/``right`` are functions of y (or constants), ``bottom``/``top``
    functions of x.  Corner ownership: bottom/top edges own the corners.
    """

    left: object = 0.0
    right: object = 0.0
    bottom: object = 0.0
    top: object = 0.0

    @staticmethod
    def _eval(g, coord):
        coord = np.asarray(coord, dtype=float)
        if callable(g):
            return np.asarray(g(coord), dtype=float) * np.ones_like(coord)
        return float(g) * np.ones_like(coord)

    def on_edge(self, edge, coord):
        return self._eval(getattr(self, edge), coord)


@dataclass(frozen=True)
class Problem2D:
    """2D problem on (0, length_x) x (0, length_y), all-Dirichlet outer data."""

    alpha: float
    g: EdgeTraces = field(default_factory=EdgeTraces)
    length_x: float = 1.0
    length_y: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidInput("alpha must be nonnegative")
        if self.length_x <= 0 or self.length_y <= 0:
            raise InvalidInput("domain lengths must be positive")

    def nu(self, u):
        return 1.0 + self.alpha * u * u

    def dnu(self, u):
        return 2.0 * self.alpha * u

    def forcing(self, x, y):
        # 2D experiments use f = 0; kept as a method so a variant with
        # nonzero forcing only has to subclass/replace this hook.
        return np.zeros(np.broadcast(x, y).shape)


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mesh1D:
    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 1:
            raise InvalidInput("n_cells must be a positive integer")
        if not self.x_right > self.x_left:
            raise InvalidInput("mesh interval must have positive length")

    @property
    def h(self):
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def n_nodes(self):
        return self.n_cells + 1

    @property
    def nodes(self):
        return np.linspace(self.x_left, self.x_right, self.n_cells + 1)


@dataclass(frozen=True)
class Grid2D:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidInput("grid must have at least one cell per direction")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidInput("grid extents must be positive")

    @property
    def hx(self):
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self):
        return (self.y1 - self.y0) / self.ny

    @property
    def shape(self):
        # node array shape, indexed [i, j] with i along x and j along y
        return (self.nx + 1, self.ny + 1)

    @property
    def xs(self):
        return np.linspace(self.x0, self.x1, self.nx + 1)

    @property
    def ys(self):
        return np.linspace(self.y0, self.y1, self.ny + 1)


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet face: prescribed trace (scalar in 1D, vector along a face in 2D)."""

    value: object

    kind = "dirichlet"


@dataclass(frozen=True)
class Neumann:
    """Neumann face: prescribed *outward* flux nu(u) du/dn (sign of N_j)."""

    flux: object

    kind = "neumann"


def validate_bc_pair(left, right):
    for face in (left, right):
        if not isinstance(face, (Dirichlet, Neumann)):
            raise InvalidInput(f"not a boundary condition: {face!r}")
    if isinstance(left, Neumann) and isinstance(right, Neumann):
        raise InvalidInput("doubly-Neumann 1D problem is singular")


# ---------------------------------------------------------------------------
# Newton configuration and solve results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-12
    max_iter: int = 200
    damping: bool = True
    backtrack_factor: float = 0.5
    min_step: float = 2.0 ** -20

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise InvalidInput("tol_residual must be positive")
        if self.max_iter < 1:
            raise InvalidInput("max_iter must be at least 1")


@dataclass
class SubdomainSolution:
    values: np.ndarray
    converged: bool
    newton_iterations: int
    residual_norm: float
