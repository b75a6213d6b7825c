"""Numerical laboratory for radiation hydrodynamics in the diffusion
approximation.

Subpackages cover the nonlinear perturbation sources around the radiative
equilibrium (model), the 4x4 Fourier symbol of the linearized compressible
block and its spectral artifacts (symbol), Littlewood-Paley decomposition
and Besov norms (lp), frequency-localized energy functionals (energy), a
periodic pseudo-spectral solver with a whole-space quadrature path
(solver), decay-rate fitting against theoretical targets (decay), and a
command line front end (cli).
"""

__version__ = "0.1.0"
