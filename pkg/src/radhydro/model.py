"""Physical parameters, derived constants, periodic perturbation fields,
the nonlinear sources, and the compressible/incompressible velocity split.

The model describes a viscous heat-conducting gas coupled to a radiative
intensity in the diffusion regime.  Everything here works on the
perturbation (rho~, u~, theta~, j0) of the constant equilibrium state
(rho, u, theta, I0) = (1, 0, 1, b(1)), sampled on a uniform periodic grid.
All derivatives are spectral; no finite differences appear in production
paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np


class ConstraintError(ValueError):
    """A parameter constraint (positivity / sign condition) failed."""


class PositivityError(ValueError):
    """A pointwise positivity requirement (1+rho > 0, 1+theta > 0) failed."""


# ---------------------------------------------------------------------------
# parameters and derived constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BLaw:
    """Radiative equilibrium law theta -> b(theta) with its derivative.

    Any smooth law is admissible as long as b'(1) > 0.  The physically
    standard choice is the fourth-power law b(theta) = theta^4.  Both
    callables must accept scalars and numpy arrays.
    """

    b: Callable
    b_prime: Callable
    name: str = "custom"


def theta_fourth_law() -> BLaw:
    """The default b(theta) = theta^4 equilibrium law."""
    return BLaw(b=lambda th: th ** 4, b_prime=lambda th: 4.0 * th ** 3,
                name="theta^4")


@dataclass(frozen=True)
class PhysicalParams:
    """Fluid and radiation coefficients plus the b-law.

    mu      shear viscosity (> 0)
    lam     second viscosity; any real sign as long as nu = lam + 2 mu > 0
            (that combination is validated by `derive_constants`)
    kappa   thermal conductivity (>= 0; zero selects the variant without
            heat conduction in the gas)
    c_light speed-of-light scale C (> 0)
    l_rad   radiation length scale L (> 0)
    sigma_a absorption coefficient (> 0)
    sigma_s scattering coefficient (>= 0)
    b_law   radiative equilibrium law, default theta^4
    """

    mu: float = 1.0
    lam: float = 0.0
    kappa: float = 1.0
    c_light: float = 1.0
    l_rad: float = 1.0
    sigma_a: float = 1.0
    sigma_s: float = 1.0
    b_law: BLaw = field(default_factory=theta_fourth_law)

    def __post_init__(self):
        checks = [
            ("mu > 0", self.mu > 0),
            ("kappa >= 0", self.kappa >= 0),
            ("c_light > 0", self.c_light > 0),
            ("l_rad > 0", self.l_rad > 0),
            ("sigma_a > 0", self.sigma_a > 0),
            ("sigma_s >= 0", self.sigma_s >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ConstraintError(f"parameter constraint violated: {name}")


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from `PhysicalParams`.

    nu     = lam + 2 mu        (effective viscosity of the d-equation)
    gamma  = L sigma_a b'(1)   (relaxation coupling of theta)
    a_diff = C / (3 L (sigma_a + sigma_s))   (radiative diffusivity)
    b_bar  = L sigma_a         (radiative relaxation rate)
    b_eq   = b(1)              (equilibrium radiative intensity)

    kappa and c_light are carried through unchanged: together with the
    four derived values they form the complete constant bundle
    (nu, gamma, kappa, C, a, b) that the symbol and energy layers
    depend on.
    """

    nu: float
    gamma: float
    a_diff: float
    b_bar: float
    b_eq: float
    kappa: float
    c_light: float


def derive_constants(params: PhysicalParams) -> DerivedConstants:
    """Compute nu, gamma, a, b-bar and b(1) from the physical parameters.

    Rejects nu <= 0 and b'(1) <= 0; every other positivity constraint is
    already enforced by the `PhysicalParams` constructor.
    """
    nu = params.lam + 2.0 * params.mu
    if nu <= 0.0:
        raise ConstraintError(
            f"constraint nu = lam + 2*mu > 0 violated (nu = {nu:g})")
    bp1 = float(params.b_law.b_prime(1.0))
    if bp1 <= 0.0:
        raise ConstraintError(
            f"constraint b'(1) > 0 violated (b'(1) = {bp1:g})")
    return DerivedConstants(
        nu=nu,
        gamma=params.l_rad * params.sigma_a * bp1,
        a_diff=params.c_light / (3.0 * params.l_rad
                                 * (params.sigma_a + params.sigma_s)),
        b_bar=params.l_rad * params.sigma_a,
        b_eq=float(params.b_law.b(1.0)),
        kappa=params.kappa,
        c_light=params.c_light,
    )


def eval_b_remainder(params: PhysicalParams, theta_pert):
    """Quadratic Taylor remainder b(1+t) - b(1) - b'(1) t of the b-law.

    Accepts scalars or arrays; requires 1 + theta_pert > 0 pointwise
    (temperature positivity).
    """
    th = np.asarray(theta_pert, dtype=float)
    if np.any(1.0 + th <= 0.0):
        raise PositivityError(
            "1 + theta must stay positive (min value "
            f"{float((1.0 + th).min()):.6g})")
    law = params.b_law
    out = law.b(1.0 + th) - law.b(1.0) - law.b_prime(1.0) * th
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# grid and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, l_box)^dim with n points per axis.

    Holds the wavenumber lattice and the basic spectral operators.  The
    wavenumbers carry the physical scaling 2*pi/l_box, so all thresholds
    in the analysis refer to |xi| on this lattice.
    """

    dim: int
    n: int
    l_box: float = 2.0 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3 (got {self.dim})")
        if self.n < 2:
            raise ValueError(f"n must be at least 2 (got {self.n})")
        if self.l_box <= 0:
            raise ValueError("l_box must be positive")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def dx(self):
        return self.l_box / self.n

    @cached_property
    def k(self):
        """Wavenumber component arrays, each broadcastable to `shape`."""
        k1 = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        out = []
        for axis in range(self.dim):
            sh = [1] * self.dim
            sh[axis] = self.n
            out.append(k1.reshape(sh))
        return out

    @cached_property
    def k_sq(self):
        ks = sum(ki ** 2 for ki in self.k)
        return np.broadcast_to(ks, self.shape)

    @cached_property
    def k_norm(self):
        return np.sqrt(self.k_sq)

    @cached_property
    def inv_k_norm(self):
        """1/|xi| with the zero mode mapped to 0 (mean-free inverse)."""
        kn = self.k_norm.copy()
        kn.flat[0] = 1.0
        inv = 1.0 / kn
        inv.flat[0] = 0.0
        return inv

    @cached_property
    def dealias_mask(self):
        """Two-thirds rule mask: True on retained modes."""
        m1 = np.fft.fftfreq(self.n) * self.n
        keep = np.abs(m1) < self.n / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for axis in range(self.dim):
            sh = [1] * self.dim
            sh[axis] = self.n
            mask &= keep.reshape(sh)
        return mask

    def mesh(self):
        """Coordinate arrays of full shape (indexing 'ij')."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    # -- transforms and derivative operators --------------------------------

    def fft(self, f):
        return np.fft.fftn(f, axes=tuple(range(-self.dim, 0)))

    def ifft(self, f_hat):
        return np.fft.ifftn(f_hat, axes=tuple(range(-self.dim, 0))).real

    def grad(self, f_hat):
        """Physical-space gradient of a spectral scalar, shape (dim, ...)."""
        return np.stack([self.ifft(1j * ki * f_hat) for ki in self.k])

    def div_hat(self, u_hat):
        """Spectral divergence of a spectral vector field."""
        return sum(1j * self.k[i] * u_hat[i] for i in range(self.dim))

    def div(self, u_hat):
        return self.ifft(self.div_hat(u_hat))

    def laplacian(self, f_hat):
        return self.ifft(-self.k_sq * f_hat)

    # -- norms --------------------------------------------------------------

    def l2_norm(self, f):
        """L2 norm of a physical field; vector fields include all components."""
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dx ** self.dim))

    def l2_norm_spec(self, f_hat):
        scale = self.l_box ** self.dim / self.n ** (2 * self.dim)
        return float(np.sqrt(np.sum(np.abs(f_hat) ** 2) * scale))

    def seminorm_sq(self, f_hat, order):
        """Squared L2 norm of nabla^order applied to a spectral field."""
        scale = self.l_box ** self.dim / self.n ** (2 * self.dim)
        w = self.k_norm ** (2 * order) if order else 1.0
        return float(np.sum(w * np.abs(f_hat) ** 2) * scale)

    def sobolev_norm_sq(self, f_hat, m):
        """Squared H^m norm: sum over 0 <= j <= m of the nabla^j seminorms."""
        return sum(self.seminorm_sq(f_hat, j) for j in range(m + 1))


def _prepare(f, shape, project_mean, name):
    f = np.array(f, dtype=float)
    if f.shape != shape:
        raise ValueError(f"{name} has shape {f.shape}, expected {shape}")
    if project_mean:
        f -= f.mean()
    f.flags.writeable = False
    return f


class StateField:
    """Perturbation fields (rho~, u~, theta~, j0) on a periodic grid.

    Physical samples are stored read-only; spectral coefficients are
    computed on first access and cached, so the cache always equals the
    DFT of the samples.  By default every field is projected to zero
    spatial mean at construction (Lambda^{-1} is singular on the mean
    mode); pass project_mean=False to keep constant offsets for
    homogeneous-state source checks.
    """

    def __init__(self, grid: Grid, rho, u, theta, j0, project_mean=True):
        self.grid = grid
        u = np.array(u, dtype=float)
        if u.shape != (grid.dim,) + grid.shape:
            raise ValueError(
                f"u has shape {u.shape}, expected {(grid.dim,) + grid.shape}")
        if project_mean:
            for i in range(grid.dim):
                u[i] -= u[i].mean()
        u.flags.writeable = False
        self.u = u
        self.rho = _prepare(rho, grid.shape, project_mean, "rho")
        self.theta = _prepare(theta, grid.shape, project_mean, "theta")
        self.j0 = _prepare(j0, grid.shape, project_mean, "j0")
        self._spec = {}

    @classmethod
    def zeros(cls, grid: Grid):
        z = np.zeros(grid.shape)
        return cls(grid, z, np.zeros((grid.dim,) + grid.shape), z.copy(),
                   z.copy())

    @classmethod
    def from_spectral(cls, grid: Grid, rho_hat, u_hat, theta_hat, j0_hat):
        return cls(grid,
                   grid.ifft(rho_hat),
                   np.stack([grid.ifft(u_hat[i]) for i in range(grid.dim)]),
                   grid.ifft(theta_hat),
                   grid.ifft(j0_hat))

    def _hat(self, name):
        if name not in self._spec:
            f = getattr(self, name)
            if name == "u":
                h = np.stack([np.fft.fftn(f[i]) for i in range(self.grid.dim)])
            else:
                h = np.fft.fftn(f)
            h.flags.writeable = False
            self._spec[name] = h
        return self._spec[name]

    @property
    def rho_hat(self):
        return self._hat("rho")

    @property
    def u_hat(self):
        return self._hat("u")

    @property
    def theta_hat(self):
        return self._hat("theta")

    @property
    def j0_hat(self):
        return self._hat("j0")


@dataclass
class SourceField:
    """Nonlinear sources S1..S4 plus the advective/dilatational split of -S1.

    s11 = u . grad rho and s12 = rho div u, so that s1 = -(s11 + s12).
    """

    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    s4: np.ndarray
    s11: np.ndarray
    s12: np.ndarray


# ---------------------------------------------------------------------------
# nonlinear sources
# ---------------------------------------------------------------------------

def nonlinear_sources(state: StateField, params: PhysicalParams,
                      consts: DerivedConstants) -> SourceField:
    """Evaluate the quadratic-and-higher perturbation sources pointwise.

    With g(rho) = 1/(1+rho) - 1 and h(rho) = 1/(1+rho):

      S1 = -div(rho u)                                (split into s11, s12)
      S2 = -(u.grad)u - (g + h theta) grad rho + g divT
           - g grad j0 / (3C)
      S3 = -(2/3) theta div u + (2/3) kappa g lap theta
           - (2/3) h b_bar * b_rem - (2/3) g (gamma theta - b_bar j0)
           + (2/3) h T:grad u + (2/(9C)) h u.grad j0 - u.grad theta
      S4 = C b_bar * b_rem

    where T = mu (grad u + grad u^T) + lam (div u) I is the viscous tensor,
    divT = mu lap u + (mu+lam) grad div u, and b_rem is the quadratic
    remainder of the b-law.  Derivatives come from the state's spectral
    cache; prefactors g, h are evaluated exactly as rational functions.
    """
    grid = state.grid
    dim = grid.dim
    rho, theta, j0, u = state.rho, state.theta, state.j0, state.u

    dens = 1.0 + rho
    if dens.min() <= 0.0:
        loc = tuple(int(i) for i in
                    np.unravel_index(int(np.argmin(dens)), grid.shape))
        raise PositivityError(
            f"1 + rho must stay positive; min {dens.min():.6g} "
            f"at grid index {loc}")
    h = 1.0 / dens
    g = h - 1.0

    grad_rho = grid.grad(state.rho_hat)
    grad_theta = grid.grad(state.theta_hat)
    grad_j0 = grid.grad(state.j0_hat)
    lap_theta = grid.laplacian(state.theta_hat)
    # jac[i, j] = d_j u_i
    jac = np.stack([grid.grad(state.u_hat[i]) for i in range(dim)])
    div_u = np.trace(jac, axis1=0, axis2=1)
    div_u_hat = grid.div_hat(state.u_hat)
    lap_u = np.stack([grid.laplacian(state.u_hat[i]) for i in range(dim)])
    grad_div_u = grid.grad(div_u_hat)

    def advect(grad_stack):
        return sum(u[i] * grad_stack[i] for i in range(dim))

    s11 = advect(grad_rho)
    s12 = rho * div_u
    s1 = -(s11 + s12)

    mu, lam = params.mu, params.lam
    c = params.c_light
    div_t = mu * lap_u + (mu + lam) * grad_div_u
    conv_u = np.stack([advect(jac[i]) for i in range(dim)])
    s2 = (-conv_u
          - (g + h * theta) * grad_rho
          + g * div_t
          - (g / (3.0 * c)) * grad_j0)

    # T : grad u  =  mu sum_ij (d_j u_i)(d_j u_i + d_i u_j) + lam (div u)^2
    visc_heat = (mu * np.sum(jac * (jac + np.swapaxes(jac, 0, 1)),
                             axis=(0, 1))
                 + lam * div_u ** 2)
    b_rem = eval_b_remainder(params, theta)
    s3 = (-(2.0 / 3.0) * theta * div_u
          + (2.0 / 3.0) * params.kappa * g * lap_theta
          - (2.0 / 3.0) * consts.b_bar * h * b_rem
          - (2.0 / 3.0) * g * (consts.gamma * theta - consts.b_bar * j0)
          + (2.0 / 3.0) * h * visc_heat
          + (2.0 / (9.0 * c)) * h * advect(grad_j0)
          - advect(grad_theta))
    s4 = c * consts.b_bar * b_rem

    return SourceField(s1=s1, s2=s2, s3=s3, s4=s4, s11=s11, s12=s12)


# ---------------------------------------------------------------------------
# Helmholtz split
# ---------------------------------------------------------------------------

def helmholtz_split_spectral(u_hat, grid: Grid):
    """Spectral Helmholtz split of a zero-mean velocity.

    Returns (d_hat, pu_hat) with d = Lambda^{-1} div u the compressible
    scalar and Pu the divergence-free projection.  The mean mode of each
    component must vanish.
    """
    n_tot = grid.n ** grid.dim
    for i in range(grid.dim):
        mean = u_hat[i].flat[0]
        if abs(mean) > 1e-10 * n_tot:
            raise ValueError(
                f"velocity component {i} has nonzero mean mode "
                f"({mean / n_tot:.3e}); Lambda^{{-1}} requires zero mean")
    div_hat = grid.div_hat(u_hat)
    d_hat = div_hat * grid.inv_k_norm
    comp = np.stack([-1j * grid.k[i] * grid.inv_k_norm * d_hat
                     for i in range(grid.dim)])
    pu_hat = u_hat - comp
    return d_hat, pu_hat


def helmholtz_split(state: StateField):
    """Split state.u into (d, Pu), returned as physical fields.

    d = Lambda^{-1} div u;  Pu is divergence-free; the compressible part
    -Lambda^{-1} grad d plus Pu reconstructs u.
    """
    grid = state.grid
    d_hat, pu_hat = helmholtz_split_spectral(state.u_hat, grid)
    pu = np.stack([grid.ifft(pu_hat[i]) for i in range(grid.dim)])
    return grid.ifft(d_hat), pu
