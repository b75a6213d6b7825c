"""Frequency-localized energy functionals and their admissible constants.

The linear decay mechanism is monitored through two quadratic functionals.
On dyadic shells above the threshold k1 the pair (L_hk, H_hk) weighs the
compressible variables with viscous/diffusive corrections,

    L_hk = int rho_k^2 + nu b1 |grad rho_k|^2 - 2 b1 (Lam rho_k) d_k
           + d_k^2 + (3/2) theta_k^2 + j0_k^2,
    H_hk = L_hk + b2 (|Lam d_k|^2 + (3/2)|Lam theta_k|^2 + |Lam j0_k|^2)
           + |Pu_k|^2 + |Lam Pu_k|^2,

with d = Lam^{-1} div u and Pu the solenoidal part.  Below the radius r0 a
per-frequency form in the transformed variables (rho^, d^, Theta^, Xi^),

    L_l = 1/2 |rho^|^2 - b3 |xi| Re(rho^ conj(d^)) + 1/2 |d^|^2
          + c1/(4 C) |Theta^|^2 + 3 c2/(4 gamma) |Xi^|^2,

contracts like exp(-C4 |xi|^2 t) along the zero-source evolution.  The
coefficients b1, b2, b3 are picked maximal inside their admissibility
windows; the comparison constants and the contraction rate C4 carry no
closed forms and are measured here as extremal generalized eigenvalues of
the associated 4x4 forms.  All field-side evaluation is discrete Plancherel
on the grid spectrum.

Sign convention: the evolution of a single frequency is dU/dt + A(rho) U
= 0, so a functional U* Q U dissipates at rate U* S U with S = A^T Q + Q A.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import ConstraintError, DerivedConstants, Grid, StateField
from .model import helmholtz_split_spectral
from .lp import (Decomposition, build_decomposition, high_freq_threshold,
                 low_freq_radius, _in_range)
from .symbol import (assemble_symbol, mode_change, mode_system_matrix,
                     mode_transform_matrix)

__all__ = [
    "AnalysisConstants",
    "EnergyReport",
    "select_constants",
    "high_freq_functional",
    "high_freq_form",
    "high_freq_dissipation",
    "low_freq_functional",
    "low_freq_form",
    "damped_mode",
    "damped_mode_inverse",
    "measure_low_freq_rate",
    "measure_equivalence",
    "energy_report",
]


@dataclass(frozen=True)
class AnalysisConstants:
    """Admissible weights, band thresholds, and measured comparison bounds.

    beta1..beta3 are the maximal admissible functional weights; k0/k1/r0/R0
    are the band thresholds; c1..c6 the transformed-system coefficients
    (c6 as printed, see ModeChange.mismatch for the derived value).  The
    measured entries are low_freq_rate (the contraction rate C4 of L_l),
    equiv_high (two-sided constant between H_hk and (1+4^k)|U_k|^2),
    equiv_low_modes (L_l against the transformed amplitudes) and
    equiv_low_state (L_l against the state amplitudes).
    """

    consts: DerivedConstants
    beta1: float
    beta2: float
    beta3: float
    k0: int
    k1: int
    r0: float
    R0: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5_const: float
    c5_quad: float
    c6: float
    low_freq_rate: float
    equiv_high: float
    equiv_low_modes: float
    equiv_low_state: float

    def c5(self, rho_freq):
        return self.c5_const + self.c5_quad * float(rho_freq) ** 2


@dataclass(frozen=True)
class EnergyReport:
    """Snapshot of every functional on one state.

    shell_ks/shell_L/shell_H: the resolvable shells above k1 and their
    (L_hk, H_hk) values.  low_xi/low_L: |xi| and L_l for every nonzero
    lattice mode with |xi| <= R0, using amplitudes normalized by n^dim so
    the per-mode values are grid independent.  Theta_norm/Xi_norm: L2 norms
    of the combined and damped modes.
    """

    shell_ks: tuple
    shell_L: tuple
    shell_H: tuple
    low_xi: np.ndarray
    low_L: np.ndarray
    Theta_norm: float
    Xi_norm: float


@lru_cache(maxsize=8)
def _cached_decomposition(grid: Grid, consts: DerivedConstants):
    return build_decomposition(grid, consts)


def _resolve_decomp(grid, consts, decomp):
    if decomp is None:
        return _cached_decomposition(grid, consts)
    if decomp.grid != grid:
        raise ValueError(
            f"decomposition was built for a different grid "
            f"(dim {decomp.grid.dim}, n {decomp.grid.n}) than the state "
            f"(dim {grid.dim}, n {grid.n})")
    return decomp


# -- constant selection -----------------------------------------------------

def _beta_weights(consts: DerivedConstants, mc, big_r: float):
    """Maximal (beta1, beta2, beta3) inside the admissibility windows."""
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    kap, cc = consts.kappa, consts.c_light
    beta1 = min(kap / 2.0, nu / 4.0, 9.0 * a * cc * cc / 4.0, 1.0)
    denom = abs((b + cc * gam) ** 2 / gam + 1.0 / (9.0 * nu * cc * cc)
                - cc * b)
    second = math.inf if denom == 0.0 else (a / 16.0) / denom
    beta2 = min(beta1 * nu / 8.0, second)
    beta3 = min(2.0 * nu / 3.0, mc.c3 / (16.0 * cc * mc.c1),
                1.0 / (2.0 * big_r))
    return beta1, beta2, beta3


def select_constants(consts: DerivedConstants,
                     decomp: Decomposition | None = None) -> AnalysisConstants:
    """Maximal admissible weights plus measured comparison constants.

    Deterministic for fixed constants.  The high-frequency windows divide
    by kappa, so the selection is only defined for kappa > 0; the kappa = 0
    physics path is unaffected elsewhere.  A decomposition, when supplied,
    is cross-checked against the thresholds derived from `consts`.
    """
    if consts.kappa <= 0.0:
        raise ConstraintError(
            f"constant selection needs kappa > 0 (got {consts.kappa:g}); "
            f"the high-frequency weight window collapses at kappa = 0")
    k1 = high_freq_threshold(consts)
    r0 = low_freq_radius(consts)
    big_r = 2.0 ** (k1 + 1)
    k0 = math.frexp(r0)[1] - 2
    if decomp is not None and (decomp.k1 != k1 or decomp.r0 != r0):
        raise ValueError(
            f"decomposition thresholds (k1 = {decomp.k1}, r0 = {decomp.r0:g})"
            f" disagree with the supplied constants (k1 = {k1}, "
            f"r0 = {r0:g})")
    mc = mode_change(consts)
    beta1, beta2, beta3 = _beta_weights(consts, mc, big_r)
    if not (beta1 > 0.0 and beta2 > 0.0 and beta3 > 0.0):
        raise ConstraintError(
            f"degenerate weight selection (beta1 = {beta1:g}, "
            f"beta2 = {beta2:g}, beta3 = {beta3:g})")
    ac = AnalysisConstants(
        consts=consts, beta1=beta1, beta2=beta2, beta3=beta3,
        k0=k0, k1=k1, r0=r0, R0=big_r,
        c1=mc.c1, c2=mc.c2, c3=mc.c3, c4=mc.c4,
        c5_const=mc.c5_const, c5_quad=mc.c5_quad, c6=mc.c6,
        low_freq_rate=math.nan, equiv_high=math.nan,
        equiv_low_modes=math.nan, equiv_low_state=math.nan)
    rate = measure_low_freq_rate(ac)
    if rate <= 0.0:
        raise ConstraintError(
            f"low-frequency dissipation is not coercive on (0, r0] "
            f"(measured rate {rate:g})")
    eq_high, eq_modes, eq_state = measure_equivalence(ac)
    return replace(ac, low_freq_rate=rate, equiv_high=eq_high,
                   equiv_low_modes=eq_modes, equiv_low_state=eq_state)


# -- per-mode quadratic forms ----------------------------------------------

def high_freq_form(ac: AnalysisConstants, rho_freq: float):
    """4x4 form of H_hk at one frequency, variables (rho^, d^, th^, j0^).

    The solenoidal part is not included; its per-mode weight is the scalar
    (1 + rho^2) on each Pu component.
    """
    r = float(rho_freq)
    nu = ac.consts.nu
    q = np.zeros((4, 4))
    q[0, 0] = 1.0 + nu * ac.beta1 * r * r
    q[0, 1] = q[1, 0] = -ac.beta1 * r
    q[1, 1] = 1.0 + ac.beta2 * r * r
    q[2, 2] = 1.5 * (1.0 + ac.beta2 * r * r)
    q[3, 3] = 1.0 + ac.beta2 * r * r
    return q


def high_freq_dissipation(ac: AnalysisConstants, rho_freq: float):
    """S = A^T Q + Q A for the H_hk form; PSD on the band rho > 2^k1."""
    a4 = assemble_symbol(ac.consts, rho_freq).entries
    q = high_freq_form(ac, rho_freq)
    return a4.T @ q + q @ a4


def low_freq_form(ac: AnalysisConstants, rho_freq: float):
    """4x4 form of L_l at one frequency, variables (rho^, d^, Theta^, Xi^)."""
    r = float(rho_freq)
    cc, gam = ac.consts.c_light, ac.consts.gamma
    q = np.diag([0.5, 0.5, ac.c1 / (4.0 * cc), 3.0 * ac.c2 / (4.0 * gam)])
    q[0, 1] = q[1, 0] = -0.5 * ac.beta3 * r
    return q


def _mode_lift(consts: DerivedConstants):
    """Block map (rho^, d^, th^, j0^) -> (rho^, d^, Theta^, Xi^)."""
    m = np.eye(4)
    m[2:, 2:] = mode_transform_matrix(consts)
    return m


# -- functionals ------------------------------------------------------------

def high_freq_functional(state: StateField, k: int, ac: AnalysisConstants,
                         decomp: Decomposition | None = None):
    """(L_hk, H_hk) of the shell-k projection of a state, k > k1.

    Evaluated by discrete Plancherel on the masked spectrum.  An index at
    or below k1 is rejected; one outside the resolvable range warns and
    returns zeros, matching the projection semantics.
    """
    if k <= ac.k1:
        raise ValueError(
            f"high-frequency functional needs k > k1 = {ac.k1} "
            f"(got k = {k})")
    grid = state.grid
    decomp = _resolve_decomp(grid, ac.consts, decomp)
    if not _in_range(decomp, k):
        return 0.0, 0.0
    mask = decomp.cutoffs[k]
    rh = np.where(mask, state.rho_hat, 0.0)
    th = np.where(mask, state.theta_hat, 0.0)
    jh = np.where(mask, state.j0_hat, 0.0)
    uh = np.where(mask, state.u_hat, 0.0)
    dh, puh = helmholtz_split_spectral(uh, grid)
    scale = grid.l_box ** grid.dim / grid.n ** (2 * grid.dim)
    nn = lambda f_hat: float(np.sum(np.abs(f_hat) ** 2)) * scale
    cross = float(np.sum(grid.k_norm * np.real(np.conj(rh) * dh))) * scale
    b1, b2 = ac.beta1, ac.beta2
    low = (nn(rh) + ac.consts.nu * b1 * grid.seminorm_sq(rh, 1)
           - 2.0 * b1 * cross + nn(dh) + 1.5 * nn(th) + nn(jh))
    high = (low + b2 * (grid.seminorm_sq(dh, 1)
                        + 1.5 * grid.seminorm_sq(th, 1)
                        + grid.seminorm_sq(jh, 1))
            + nn(puh) + grid.seminorm_sq(puh, 1))
    return low, high


def low_freq_functional(amps, xi_norm: float, ac: AnalysisConstants) -> float:
    """L_l of one frequency from state amplitudes (rho^, d^, th^, j0^).

    The damped-mode pair (Theta^, Xi^) is formed internally.  Defined for
    0 <= |xi| <= R0 only.
    """
    xi = float(xi_norm)
    if not math.isfinite(xi) or xi < 0.0:
        raise ValueError(f"|xi| must be a finite nonnegative number "
                         f"(got {xi_norm!r})")
    if xi > ac.R0:
        raise ValueError(
            f"low-frequency functional is defined for |xi| <= R0 = "
            f"{ac.R0:g} (got |xi| = {xi:g})")
    amps = np.asarray(amps, dtype=complex)
    if amps.shape != (4,):
        raise ValueError(f"expected 4 amplitudes, got shape {amps.shape}")
    rho, d, th, j0 = amps
    cc, gam, b = ac.consts.c_light, ac.consts.gamma, ac.consts.b_bar
    big_t = 3.0 * cc * th + 2.0 * j0
    big_x = gam * th - b * j0
    return float(0.5 * abs(rho) ** 2
                 - ac.beta3 * xi * np.real(rho * np.conj(d))
                 + 0.5 * abs(d) ** 2
                 + ac.c1 / (4.0 * cc) * abs(big_t) ** 2
                 + 3.0 * ac.c2 / (4.0 * gam) * abs(big_x) ** 2)


def damped_mode(state: StateField, consts: DerivedConstants):
    """Pointwise combined/damped pair (Theta, Xi) = (3C th + 2 j0, gam th - b j0)."""
    cc, gam, b = consts.c_light, consts.gamma, consts.b_bar
    return (3.0 * cc * state.theta + 2.0 * state.j0,
            gam * state.theta - b * state.j0)


def damped_mode_inverse(big_theta, big_xi, consts: DerivedConstants):
    """Invert the damped-mode map: (th, j0) from (Theta, Xi)."""
    cc, gam, b = consts.c_light, consts.gamma, consts.b_bar
    delta = 3.0 * cc * b + 2.0 * gam
    theta = (b * np.asarray(big_theta) + 2.0 * np.asarray(big_xi)) / delta
    j0 = (gam * np.asarray(big_theta)
          - 3.0 * cc * np.asarray(big_xi)) / delta
    return theta, j0


# -- measured constants -----------------------------------------------------

def measure_low_freq_rate(ac: AnalysisConstants, rho_freqs=None) -> float:
    """Contraction rate C4: min over (0, r0] of eigmin(S, Q)/rho^2.

    Q is the L_l form in the transformed variables and S its dissipation
    along dV/dt = -A_m V with A_m the conjugated system matrix, so
    L_l(t) <= L_l(0) exp(-C4 rho^2 t) for every sampled frequency.
    """
    if rho_freqs is None:
        rho_freqs = default_low_rate_samples(ac)
    worst = math.inf
    for r in np.asarray(rho_freqs, dtype=float):
        a_m = mode_system_matrix(ac.consts, r)
        q = low_freq_form(ac, r)
        s = a_m.T @ q + q @ a_m
        lam = scipy.linalg.eigh(s, q, eigvals_only=True)[0]
        worst = min(worst, lam / (r * r))
    return float(worst)


def default_low_rate_samples(ac: AnalysisConstants, n: int = 200):
    """Geometric frequency samples on (0, r0] used at selection time."""
    return np.geomspace(ac.r0 * 1e-3, ac.r0, n)


def measure_equivalence(ac: AnalysisConstants, shells=None,
                        shell_rho_freqs=None, low_rho_freqs=None):
    """Measured two-sided comparison constants (high, low-modes, low-state).

    high: H_hk against (1 + 4^k)|(rho, u, th, j0)_k|^2, extremal over the
    sampled shells (default k1+1 .. k1+6, geometric samples per shell; a
    dict k -> frequencies overrides).  low-modes / low-state: L_l against
    the plain amplitude square in transformed / state variables over
    [0, R0].  Each constant is max(upper, 1/lower), so it is >= 1 and the
    two-sided bound reads C^{-1} lhs <= rhs <= C lhs.
    """
    if shells is None:
        shells = range(ac.k1 + 1, ac.k1 + 7)
    worst_high = 1.0
    for k in shells:
        if shell_rho_freqs is not None:
            rhos = np.asarray(shell_rho_freqs[k], dtype=float)
        else:
            # both endpoints: the extremal ratios are monotone across the
            # shell, so the closure endpoints dominate the open interior
            rhos = 2.0 ** (k + np.linspace(-0.5, 0.5, 9))
        wt = 1.0 + 4.0 ** k
        for r in rhos:
            evs = np.linalg.eigvalsh(high_freq_form(ac, r))
            lo = min(evs[0], 1.0 + r * r)
            hi = max(evs[-1], 1.0 + r * r)
            worst_high = max(worst_high, hi / wt, wt / lo)
    if low_rho_freqs is None:
        low_rho_freqs = np.concatenate(
            [[0.0], np.geomspace(ac.r0 * 1e-2, ac.R0, 120)])
    lift = _mode_lift(ac.consts)
    worst_modes = 1.0
    worst_state = 1.0
    for r in np.asarray(low_rho_freqs, dtype=float):
        q = low_freq_form(ac, r)
        evs = np.linalg.eigvalsh(q)
        worst_modes = max(worst_modes, evs[-1], 1.0 / evs[0])
        evs = np.linalg.eigvalsh(lift.T @ q @ lift)
        worst_state = max(worst_state, evs[-1], 1.0 / evs[0])
    return float(worst_high), float(worst_modes), float(worst_state)


# -- whole-state report -----------------------------------------------------

def energy_report(state: StateField, ac: AnalysisConstants,
                  decomp: Decomposition | None = None) -> EnergyReport:
    """Every functional on one state: shells above k1, low modes, Theta/Xi.

    The per-mode L_l values use amplitudes f^/n^dim (the actual Fourier
    coefficients), so they agree across grids resolving the same field;
    the zero mode is excluded.
    """
    grid = state.grid
    decomp = _resolve_decomp(grid, ac.consts, decomp)
    ks = tuple(k for k in sorted(decomp.cutoffs) if k > ac.k1)
    pairs = [high_freq_functional(state, k, ac, decomp) for k in ks]
    shell_l = tuple(p[0] for p in pairs)
    shell_h = tuple(p[1] for p in pairs)

    dh, _ = helmholtz_split_spectral(state.u_hat, grid)
    cc, gam, b = ac.consts.c_light, ac.consts.gamma, ac.consts.b_bar
    th, jh = state.theta_hat, state.j0_hat
    big_t_hat = 3.0 * cc * th + 2.0 * jh
    big_x_hat = gam * th - b * jh
    kn = grid.k_norm
    w3 = ac.c1 / (4.0 * cc)
    w4 = 3.0 * ac.c2 / (4.0 * gam)
    values = (0.5 * np.abs(state.rho_hat) ** 2
              - ac.beta3 * kn * np.real(state.rho_hat * np.conj(dh))
              + 0.5 * np.abs(dh) ** 2
              + w3 * np.abs(big_t_hat) ** 2 + w4 * np.abs(big_x_hat) ** 2)
    keep = (kn > 0.0) & (kn <= ac.R0)
    n_tot = grid.n ** grid.dim
    low_xi = kn[keep].ravel().copy()
    low_l = (values[keep].ravel() / n_tot ** 2).copy()
    low_xi.setflags(write=False)
    low_l.setflags(write=False)
    return EnergyReport(
        shell_ks=ks, shell_L=shell_l, shell_H=shell_h,
        low_xi=low_xi, low_L=low_l,
        Theta_norm=grid.l2_norm_spec(big_t_hat),
        Xi_norm=grid.l2_norm_spec(big_x_hat))
