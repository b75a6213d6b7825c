"""Fourier-symbol analysis of the linearized system.

After the Helmholtz reduction the compressible block acts on
(rho^, d^, theta^, j0^) through a real 4x4 matrix A(rho) depending on the
frequency magnitude rho = |xi| only, in the convention

    d/dt U + A(rho) U = S.

This module builds A, its characteristic polynomial and eigenvalues
(numeric and small-frequency expansions), the Routh-Hurwitz determinant
chain, the spectral gap over an annulus, the (Theta, Xi) mode change that
isolates the damped mode, and the matrix propagator exp(-t A).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .model import DerivedConstants


class RootFindingError(RuntimeError):
    """Eigenvalue refinement failed to reach the residual tolerance."""


class SpectralGapError(RuntimeError):
    """A non-positive spectral gap, contradicting strict stability."""


class PropagatorError(RuntimeError):
    """Propagator construction failed (overflow or inconsistency)."""


# ---------------------------------------------------------------------------
# the 4x4 compressible-block symbol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolMatrix:
    rho_freq: float
    entries: np.ndarray


def assemble_symbol(consts: DerivedConstants, rho_freq: float) -> SymbolMatrix:
    """The 4x4 matrix A(rho) on (rho^, d^, theta^, j0^).

    Rows:  (0, rho, 0, 0)
           (-rho, nu rho^2, -rho, -rho/(3C))
           (0, 2 rho/3, (2/3) kappa rho^2 + 2 gamma/3, -2 b/3)
           (0, 0, -C gamma, a rho^2 + C b)
    """
    if rho_freq < 0:
        raise ValueError(f"rho_freq must be >= 0 (got {rho_freq})")
    r = float(rho_freq)
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light
    m = np.array([
        [0.0, r, 0.0, 0.0],
        [-r, nu * r * r, -r, -r / (3.0 * c)],
        [0.0, 2.0 * r / 3.0, (2.0 / 3.0) * kap * r * r + 2.0 * gam / 3.0,
         -2.0 * b / 3.0],
        [0.0, 0.0, -c * gam, a * r * r + c * b],
    ])
    return SymbolMatrix(rho_freq=r, entries=m)


def assemble_full_symbol(params, consts: DerivedConstants, xi):
    """Complex (dim+3)x(dim+3) symbol on (rho^, u^_1..u^_dim, theta^, j0^).

    The viscous block is derived from the operator -mu*lap - (mu+lam)*
    grad div, giving mu|xi|^2 delta_ij + (mu+lam) xi_i xi_j; its action on
    the compressible direction xi/|xi| is nu|xi|^2, which is the only
    combination that survives in the reduced 4x4 symbol.
    """
    xi = np.asarray(xi, dtype=float)
    dim = xi.size
    r2 = float(xi @ xi)
    gam, a, b = consts.gamma, consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light
    n = dim + 3
    m = np.zeros((n, n), dtype=complex)
    m[0, 1:1 + dim] = 1j * xi
    for j in range(dim):
        m[1 + j, 0] = 1j * xi[j]
        m[1 + j, 1 + dim] = 1j * xi[j]
        m[1 + j, 2 + dim] = 1j * xi[j] / (3.0 * c)
        for l in range(dim):
            m[1 + j, 1 + l] = (params.mu + params.lam) * xi[j] * xi[l]
        m[1 + j, 1 + j] += params.mu * r2
    m[1 + dim, 1:1 + dim] = (2.0 / 3.0) * 1j * xi
    m[1 + dim, 1 + dim] = (2.0 / 3.0) * kap * r2 + 2.0 * gam / 3.0
    m[1 + dim, 2 + dim] = -2.0 * b / 3.0
    m[2 + dim, 1 + dim] = -c * gam
    m[2 + dim, 2 + dim] = a * r2 + c * b
    return m


def symbol_bank(consts: DerivedConstants, rho_freqs) -> np.ndarray:
    """Stacked symbols A(rho_i), shape (n, 4, 4), vectorized over rho.

    Entry-for-entry the same matrix as `assemble_symbol`, assembled in
    one shot for quadrature and grid-sized frequency sets; the two
    constructions are pinned against each other in the test suite.
    """
    r = np.asarray(rho_freqs, dtype=float)
    if r.ndim != 1:
        raise ValueError(f"rho_freqs must be one-dimensional (got ndim="
                         f"{r.ndim})")
    if r.size and r.min() < 0:
        raise ValueError(f"rho_freqs must be >= 0 (min {r.min():g})")
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light
    out = np.zeros(r.shape + (4, 4))
    out[:, 0, 1] = r
    out[:, 1, 0] = -r
    out[:, 1, 1] = nu * r * r
    out[:, 1, 2] = -r
    out[:, 1, 3] = -r / (3.0 * c)
    out[:, 2, 1] = 2.0 * r / 3.0
    out[:, 2, 2] = (2.0 / 3.0) * kap * r * r + 2.0 * gam / 3.0
    out[:, 2, 3] = -2.0 * b / 3.0
    out[:, 3, 2] = -c * gam
    out[:, 3, 3] = a * r * r + c * b
    return out


# ---------------------------------------------------------------------------
# characteristic polynomial
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CharPoly:
    """P(lambda) = a0 l^4 - a1 l^3 + a2 l^2 - a3 l + a4 = det(lambda I - A).

    For a 4x4 matrix det(lambda I - A) = det(A - lambda I), so the one
    stored convention covers both determinant orderings.
    """

    a0: float
    a1: float
    a2: float
    a3: float
    a4: float

    def eval(self, lam):
        return ((((self.a0 * lam - self.a1) * lam + self.a2) * lam
                 - self.a3) * lam + self.a4)

    def deriv(self, lam):
        return ((4.0 * self.a0 * lam - 3.0 * self.a1) * lam
                + 2.0 * self.a2) * lam - self.a3

    @property
    def coeffs(self):
        """Coefficients in descending powers, with the alternating signs."""
        return np.array([self.a0, -self.a1, self.a2, -self.a3, self.a4])


def char_poly(consts: DerivedConstants, rho_freq: float) -> CharPoly:
    """Closed-form coefficients of det(lambda I - A(rho)).

    a1..a4 are polynomials in rho^2 built from (nu, gamma, kappa, C, a, b);
    a4 carries an overall rho^4, so the zero frequency has a triple root 0
    and the simple root a1(0) = 2 gamma/3 + C b.
    """
    if rho_freq < 0:
        raise ValueError(f"rho_freq must be >= 0 (got {rho_freq})")
    r2 = float(rho_freq) ** 2
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light
    a1 = (a + 2.0 * kap / 3.0 + nu) * r2 + 2.0 * gam / 3.0 + c * b
    a2 = ((nu * a + 2.0 * nu * kap / 3.0 + 2.0 * a * kap / 3.0) * r2
          + 2.0 * gam * nu / 3.0 + c * b * nu + 2.0 * gam * a / 3.0
          + 2.0 * kap * c * b / 3.0 + 5.0 / 3.0) * r2
    a3 = ((2.0 / 3.0) * a * kap * nu * r2 * r2
          + (2.0 * (gam * a + kap * c * b) * nu / 3.0 + 5.0 * a / 3.0
             + 2.0 * kap / 3.0) * r2
          + 5.0 * c * b / 3.0 + 8.0 * gam / 9.0) * r2
    a4 = (2.0 / 3.0) * (a * kap * r2 + a * gam + kap * c * b) * r2 * r2
    return CharPoly(a0=1.0, a1=a1, a2=a2, a3=a3, a4=a4)


# ---------------------------------------------------------------------------
# eigenvalues: numeric and asymptotic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HurwitzChain:
    """Routh-Hurwitz determinants A1..A4 and the A2 factor coefficients."""

    a_1: float
    a_2: float
    a_3: float
    a_4: float
    a21: float
    a22: float
    a23: float


@dataclass(frozen=True)
class SpectrumReport:
    rho_freq: float
    eigenvalues: np.ndarray        # 4 complex values, sorted by (Re, Im)
    abscissa: float                # min real part
    hurwitz: HurwitzChain | None = None


def _refine_roots(poly: CharPoly, roots):
    """Two guarded Newton refinements on each companion-matrix root.

    Refinement runs in extended precision so that evaluation noise of the
    large characteristic coefficients does not stall the iteration;
    returns (roots, residuals) with residuals evaluated in extended
    precision as well.
    """
    coeff = np.array([poly.a0, -poly.a1, poly.a2, -poly.a3, poly.a4],
                     dtype=np.longdouble)
    dcoeff = coeff[:4] * np.array([4.0, 3.0, 2.0, 1.0], dtype=np.longdouble)

    def horner(cs, x):
        acc = np.clongdouble(0.0)
        for c in cs:
            acc = acc * x + c
        return acc

    out = np.empty(len(roots), dtype=complex)
    res = np.empty(len(roots))
    for i, lam0 in enumerate(roots):
        lam = np.clongdouble(lam0)
        p = horner(coeff, lam)
        for _ in range(2):
            dp = horner(dcoeff, lam)
            if abs(dp) < 1e-300:
                break
            trial = lam - p / dp
            p_trial = horner(coeff, trial)
            if abs(p_trial) < abs(p):
                lam, p = trial, p_trial
            else:
                break
        out[i] = complex(lam)
        res[i] = float(abs(p))
    return out, res


def _sort_spectrum(vals):
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def eigenvalues(consts: DerivedConstants, rho_freq: float,
                tol: float = 1e-9) -> SpectrumReport:
    """Numeric spectrum of A(rho) via the companion matrix of P.

    Each root gets two guarded Newton refinements in extended precision.
    Residuals are certified against

        tol * max((1+|lam|)^4, sum_i |a_i| |lam|^{4-i}),

    i.e. the plain (1+|lam|)^4 scale whenever the coefficients are O(1)
    (small and moderate rho) and the attainable backward-error scale when
    the coefficients grow like rho^6; a violation raises
    `RootFindingError`.  For rho > 0 the report also carries the
    Routh-Hurwitz chain.
    """
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6] (got {tol})")
    poly = char_poly(consts, rho_freq)
    roots = np.roots(poly.coeffs)
    roots, residuals = _refine_roots(poly, roots)
    mags = np.abs(poly.coeffs)
    bounds = np.array([
        tol * max((1.0 + abs(lam)) ** 4,
                  float(np.polyval(mags, abs(lam))))
        for lam in roots])
    if np.any(residuals > bounds):
        raise RootFindingError(
            f"root refinement did not converge at rho = {rho_freq:g}: "
            f"residuals {residuals.tolist()}")
    roots = _sort_spectrum(roots)
    hz = routh_hurwitz(consts, rho_freq) if rho_freq > 0 else None
    return SpectrumReport(rho_freq=float(rho_freq), eigenvalues=roots,
                          abscissa=float(roots.real.min()), hurwitz=hz)


def expansion_coefficients(consts: DerivedConstants, kappa_zero=False):
    """Coefficients of the small-frequency eigenvalue expansions.

    Returns a dict with the sound-pair frequency and damping, the slow real
    mode's quadratic coefficient, and the damped mode's constant and
    quadratic coefficients.  The damped-mode quadratic coefficient is
    produced by second-order perturbation theory around the simple
    eigenvalue 2 gamma/3 + C b,

        [(4 gamma kappa + 9 C a b)(2 gamma + 3 C b) - 6 gamma]
            / (3 (2 gamma + 3 C b)^2).

    The dict also carries `fast_quadratic_claimed`, the simpler
    single-denominator form (4 gamma kappa + 9 C b a - gamma) /
    (6 gamma + 9 C b) that this coefficient is sometimes reduced to; it
    disagrees with the perturbation series and is kept for comparison
    only -- the numeric convergence tests pin down `fast_quadratic`.
    """
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    c = consts.c_light
    kap = 0.0 if kappa_zero else consts.kappa
    denom = 2.0 * gam + 3.0 * c * b
    sound_freq = np.sqrt((8.0 * gam + 15.0 * c * b)
                         / (6.0 * gam + 9.0 * c * b))
    sound_damp = (9.0 * gam / (6.0 * gam + 9.0 * c * b) ** 2
                  + 2.0 * (a * gam + kap * c * b) * (gam + 3.0 * c * b)
                  / ((8.0 * gam + 15.0 * c * b) * denom)
                  + nu / 2.0)
    slow_quad = 6.0 * (a * gam + kap * c * b) / (15.0 * c * b + 8.0 * gam)
    fast_zero = 2.0 * gam / 3.0 + c * b
    fast_quad = ((4.0 * gam * kap + 9.0 * c * a * b) * denom - 6.0 * gam) \
        / (3.0 * denom ** 2)
    fast_quad_claimed = (4.0 * gam * kap + 9.0 * c * b * a - gam) \
        / (6.0 * gam + 9.0 * c * b)
    return {
        "sound_freq": float(sound_freq),
        "sound_damp": float(sound_damp),
        "slow_quadratic": float(slow_quad),
        "fast_zero": float(fast_zero),
        "fast_quadratic": float(fast_quad),
        "fast_quadratic_claimed": float(fast_quad_claimed),
    }


def asymptotic_eigenvalues(consts: DerivedConstants, rho_freq: float,
                           kappa_zero=False):
    """Truncated eigenvalue expansions through O(rho^2).

    Valid for small rho (documented range rho <= 0.5; the caller owns the
    validity range).  Returns 4 complex values sorted by (Re, Im):
    the conjugate sound pair, the slow real mode, and the damped mode.
    With kappa_zero=True the kappa-dependent slots are evaluated at
    kappa = 0 (the variant without gas heat conduction).
    """
    co = expansion_coefficients(consts, kappa_zero=kappa_zero)
    r = float(rho_freq)
    r2 = r * r
    pair_re = co["sound_damp"] * r2
    pair_im = co["sound_freq"] * r
    vals = np.array([
        pair_re + 1j * pair_im,
        pair_re - 1j * pair_im,
        co["slow_quadratic"] * r2,
        co["fast_zero"] + co["fast_quadratic"] * r2,
    ])
    return _sort_spectrum(vals)


# ---------------------------------------------------------------------------
# Routh-Hurwitz chain and spectral gap
# ---------------------------------------------------------------------------

def routh_hurwitz(consts: DerivedConstants, rho_freq: float) -> HurwitzChain:
    """Hurwitz determinants of P in closed form.

    A1 = a1, A2 = a1 a2 - a0 a3 (= a21 r^6 + a22 r^4 + a23 r^2),
    A3 = a3 A2 - a1^2 a4, A4 = a4 A3.  All four are positive for every
    rho > 0, which is exactly strict stability of A(rho).
    """
    if rho_freq <= 0:
        raise ValueError(f"rho_freq must be > 0 (got {rho_freq})")
    p = char_poly(consts, rho_freq)
    nu, gam = consts.nu, consts.gamma
    a, b = consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light

    big_a1 = p.a1
    big_a2 = p.a1 * p.a2 - p.a0 * p.a3
    big_a3 = p.a3 * (p.a1 * p.a2 - p.a0 * p.a3) - p.a1 ** 2 * p.a4
    big_a4 = p.a4 * big_a3

    quad = (nu * a + 2.0 * nu * kap / 3.0 + 2.0 * a * kap / 3.0)
    lin = (2.0 * gam * nu / 3.0 + c * b * nu + 2.0 * gam * a / 3.0
           + 2.0 * kap * c * b / 3.0 + 5.0 / 3.0)
    a21 = (a + 2.0 * kap / 3.0 + nu) * quad - 2.0 * a * kap * nu / 3.0
    a22 = ((2.0 * gam / 3.0 + c * b) * quad
           + (a + 2.0 * kap / 3.0 + nu) * lin
           - (2.0 * (gam * a + kap * c * b) * nu / 3.0 + 5.0 * a / 3.0
              + 2.0 * kap / 3.0))
    a23 = ((2.0 * gam / 3.0 + c * b) * lin
           - (5.0 * c * b / 3.0 + 8.0 * gam / 9.0))
    return HurwitzChain(a_1=big_a1, a_2=big_a2, a_3=big_a3, a_4=big_a4,
                        a21=a21, a22=a22, a23=a23)


@dataclass(frozen=True)
class SpectralGap:
    iota: float
    argmin_rho: float
    r: float
    big_r: float
    n_grid: int


def spectral_gap(consts: DerivedConstants, r: float, big_r: float,
                 n_grid: int) -> SpectralGap:
    """Minimum spectral abscissa of A(rho) over a log grid on [r, R].

    Returns iota = min over the grid of min Re lambda(A(rho)) together
    with the argmin; a non-positive result is a model inconsistency and
    raises `SpectralGapError`.
    """
    if not 0.0 < r < big_r:
        raise ValueError(f"need 0 < r < R (got r={r}, R={big_r})")
    if n_grid < 2:
        raise ValueError(f"n_grid must be >= 2 (got {n_grid})")
    rhos = np.geomspace(r, big_r, n_grid)
    best = np.inf
    best_rho = rhos[0]
    for rho in rhos:
        absc = eigenvalues(consts, rho).abscissa
        if absc < best:
            best = absc
            best_rho = rho
    if best <= 0.0:
        raise SpectralGapError(
            f"non-positive spectral abscissa {best:g} at rho = {best_rho:g}; "
            "strict stability fails")
    return SpectralGap(iota=float(best), argmin_rho=float(best_rho),
                       r=float(r), big_r=float(big_r), n_grid=int(n_grid))


# ---------------------------------------------------------------------------
# (Theta, Xi) mode change
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeChange:
    """Transform (theta^, j0^) -> (Theta^, Xi^) = (3C theta + 2 j0,
    gamma theta - b j0) and the coefficients of the transformed system.

    c1..c4, c5_const, c5_quad, c6 are the closed-form claim values
    (c5(rho) = c5_const + c5_quad rho^2).  `derived` holds the values
    extracted from the numerically conjugated symbol T A T^{-1};
    `mismatch` lists any coefficient whose claim value disagrees with the
    conjugation beyond 1e-10 relative, as name -> (claimed, derived).
    The transform is not corrected: callers choose which set to trust.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5_const: float
    c5_quad: float
    c6: float
    transform: np.ndarray
    derived: dict = field(default_factory=dict)
    mismatch: dict = field(default_factory=dict)

    def c5(self, rho_freq):
        return self.c5_const + self.c5_quad * float(rho_freq) ** 2

    @property
    def flagged(self):
        return bool(self.mismatch)


def mode_transform_matrix(consts: DerivedConstants):
    """The 2x2 map rows (3C, 2) and (gamma, -b)."""
    return np.array([[3.0 * consts.c_light, 2.0],
                     [consts.gamma, -consts.b_bar]])


def mode_system_matrix(consts: DerivedConstants, rho_freq: float):
    """A(rho) conjugated to the (rho^, d^, Theta^, Xi^) variables."""
    a4 = assemble_symbol(consts, rho_freq).entries
    t = np.eye(4)
    t[2:, 2:] = mode_transform_matrix(consts)
    return t @ a4 @ np.linalg.inv(t)


def mode_change(consts: DerivedConstants) -> ModeChange:
    """Coefficients c1..c6 of the transformed system.

    The closed forms are
        c1 = (b + gamma/(3C)) / (3Cb + 2 gamma),   c2 = 1/(3Cb + 2 gamma),
        c3 = (2 kappa C b + 2 a gamma) / (3Cb + 2 gamma),
        c4 = (6 a C - 4 kappa C) / (3Cb + 2 gamma),
        c5 = (4 kappa gamma + 9 a b C) rho^2 / (3 (3Cb + 2 gamma))
             + 2 gamma/3 + C b,
        c6 = (2 kappa gamma b - 3 a b gamma) / (3 (3Cb + 2 gamma)).

    Every coefficient is cross-checked against the conjugated matrix
    T A(rho) T^{-1}; disagreements are flagged in `mismatch` with the
    derived value, never silently corrected.
    """
    gam, a, b = consts.gamma, consts.a_diff, consts.b_bar
    kap, c = consts.kappa, consts.c_light
    delta = 3.0 * c * b + 2.0 * gam
    c1 = (b + gam / (3.0 * c)) / delta
    c2 = 1.0 / delta
    c3 = (2.0 * kap * c * b + 2.0 * a * gam) / delta
    c4 = (6.0 * a * c - 4.0 * kap * c) / delta
    c5_const = 2.0 * gam / 3.0 + c * b
    c5_quad = (4.0 * kap * gam + 9.0 * a * b * c) / (3.0 * delta)
    c6 = (2.0 * kap * gam * b - 3.0 * a * b * gam) / (3.0 * delta)

    # extract the same coefficients from the conjugated matrix at two
    # frequencies (separating the constant and quadratic parts of c5)
    r_lo, r_hi = 0.7, 1.3
    m_lo = mode_system_matrix(consts, r_lo)
    m_hi = mode_system_matrix(consts, r_hi)
    d_c5_const = (m_lo[3, 3] * r_hi ** 2 - m_hi[3, 3] * r_lo ** 2) \
        / (r_hi ** 2 - r_lo ** 2)
    derived = {
        "c1": -m_lo[1, 2] / r_lo,
        "c2": -m_lo[1, 3] / r_lo,
        "c3": m_lo[2, 2] / r_lo ** 2,
        "c4": -m_lo[2, 3] / r_lo ** 2,
        "c5_const": d_c5_const,
        "c5_quad": (m_hi[3, 3] - m_lo[3, 3]) / (r_hi ** 2 - r_lo ** 2),
        "c6": -m_lo[3, 2] / r_lo ** 2,
    }
    claimed = {"c1": c1, "c2": c2, "c3": c3, "c4": c4,
               "c5_const": c5_const, "c5_quad": c5_quad, "c6": c6}
    mismatch = {}
    for name, value in claimed.items():
        ref = derived[name]
        scale = max(abs(value), abs(ref), 1.0)
        if abs(value - ref) > 1e-10 * scale:
            mismatch[name] = (value, ref)

    return ModeChange(c1=c1, c2=c2, c3=c3, c4=c4, c5_const=c5_const,
                      c5_quad=c5_quad, c6=c6,
                      transform=mode_transform_matrix(consts),
                      derived={k: float(v) for k, v in derived.items()},
                      mismatch=mismatch)


# ---------------------------------------------------------------------------
# propagator
# ---------------------------------------------------------------------------

_EIG_COND_LIMIT = 1e6


def _expm_neg(a, t):
    """exp(-t a) by eigendecomposition when safe, else Pade expm."""
    if t == 0.0:
        return np.eye(a.shape[0])
    try:
        w, v = np.linalg.eig(a)
        cond = np.linalg.cond(v)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < _EIG_COND_LIMIT:
        with np.errstate(over="ignore", invalid="ignore"):
            e = (v * np.exp(-t * w)) @ np.linalg.inv(v)
        return e.real
    return expm(-t * a)


def propagator(consts: DerivedConstants, rho_freq: float, t: float,
               check: bool = True):
    """The 4x4 real matrix exp(-t A(rho)).

    Uses eigendecomposition when the eigenvector basis is well conditioned
    (condition number < 1e6) and scaling-and-squaring Pade otherwise; A is
    non-normal and nearly defective for small rho, where the Pade route is
    the safe one.  When `check` is set the half-step identity
    E(t) = E(t/2)^2 is verified to 1e-10 relative.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0 (got {t})")
    a = assemble_symbol(consts, rho_freq).entries
    e = _expm_neg(a, t)
    if not np.all(np.isfinite(e)):
        raise PropagatorError(
            f"propagator overflow at rho = {rho_freq:g}, t = {t:g}")
    if check and t > 0.0:
        half = _expm_neg(a, 0.5 * t)
        err = np.linalg.norm(half @ half - e)
        if err > 1e-10 * max(1.0, np.linalg.norm(e)):
            raise PropagatorError(
                f"half-step identity violated at rho = {rho_freq:g}, "
                f"t = {t:g} (residual {err:.3e})")
    return e


def propagator_bank(consts: DerivedConstants, rho_freqs, t: float):
    """Stacked propagators exp(-t A(rho_i)) for an array of frequencies.

    Vectorized eigendecomposition with a per-frequency Pade fallback when
    the eigenvector condition number exceeds the safety limit.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0 (got {t})")
    rho_freqs = np.asarray(rho_freqs, dtype=float)
    mats = symbol_bank(consts, rho_freqs)
    if t == 0.0:
        return np.broadcast_to(np.eye(4), mats.shape).copy()
    out = np.empty_like(mats)
    w, v = np.linalg.eig(mats)
    conds = np.linalg.cond(v)
    good = np.isfinite(conds) & (conds < _EIG_COND_LIMIT)
    if np.any(good):
        vg = v[good]
        eg = (vg * np.exp(-t * w[good])[:, None, :]) @ np.linalg.inv(vg)
        out[good] = eg.real
    for i in np.nonzero(~good)[0]:
        out[i] = expm(-t * mats[i])
    if not np.all(np.isfinite(out)):
        raise PropagatorError(f"propagator overflow in bank at t = {t:g}")
    return out
