import numpy as np
import pytest

from radhydro.model import Grid, PhysicalParams, StateField, derive_constants


@pytest.fixture
def ref_params():
    """Reference parameter set: mu=1, lam=0, kappa=1, C=L=sigma_a=sigma_s=1."""
    return PhysicalParams()


@pytest.fixture
def ref_consts(ref_params):
    return derive_constants(ref_params)


def band_limited_field(rng, grid, kmax=5, amp=1.0):
    """Random real zero-mean field with spectrum supported in |k_i| <= kmax."""
    f_hat = np.zeros(grid.shape, dtype=complex)
    idx = np.fft.fftfreq(grid.n) * grid.n
    sel = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        sh = [1] * grid.dim
        sh[axis] = grid.n
        sel &= (np.abs(idx) <= kmax).reshape(sh)
    coeffs = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    f_hat[sel] = coeffs[sel]
    f_hat.flat[0] = 0.0
    f = np.fft.ifftn(f_hat).real
    scale = np.abs(f).max()
    return amp * f / scale if scale > 0 else f


def random_state(rng, grid, kmax=5, amp=0.05):
    """Small random band-limited state on the given grid."""
    return StateField(
        grid,
        band_limited_field(rng, grid, kmax, amp),
        np.stack([band_limited_field(rng, grid, kmax, amp)
                  for _ in range(grid.dim)]),
        band_limited_field(rng, grid, kmax, amp),
        band_limited_field(rng, grid, kmax, amp),
    )
