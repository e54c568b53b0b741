"""Admissible functions for the assumed-mode expansion.

Flexural shapes are the clamped-free Euler-Bernoulli eigenfunctions
phi_j(x) = cosh(bx) - cos(bx) - sigma_j*(sinh(bx) - sin(bx)), b = lambda_j/L,
with the classical normalization (int phi_j^2 dx = L).  Torsional shapes are
the fixed-free rod sinusoids psi_j(x) = sin((2j-1)*pi*x/(2L)).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


def _char(lam):
    return 1.0 + np.cos(lam) * np.cosh(lam)


def _char_prime(lam):
    return np.cos(lam) * np.sinh(lam) - np.sin(lam) * np.cosh(lam)


def flexural_eigenvalues(n):
    """First n roots of 1 + cos(lam)*cosh(lam) = 0, ascending.

    Root j lies within 1 of (2j-1)*pi/2; the characteristic function changes
    sign across that bracket, so brentq is guaranteed to converge.  A couple
    of Newton polish steps push the residual toward machine level.
    """
    if n < 0:
        raise ValueError("mode count must be >= 0")
    roots = []
    for j in range(1, n + 1):
        center = (2 * j - 1) * np.pi / 2.0
        lam = brentq(_char, center - 1.0, center + 1.0, xtol=1e-13, rtol=8.9e-16)
        for _ in range(2):
            slope = _char_prime(lam)
            if slope != 0.0:
                lam -= _char(lam) / slope
        roots.append(lam)
    return roots


@dataclass(frozen=True)
class ModalBasis:
    """Flexural + torsional admissible functions for one beam length."""

    n: int
    length: float
    flexural_roots: np.ndarray
    sigma: np.ndarray
    # 1 - sigma_j, computed cancellation-free; needed for stable evaluation
    # of the hyperbolic part at large arguments.
    one_minus_sigma: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, n, length):
        if n < 1:
            raise ValueError("mode count must be >= 1")
        if length <= 0:
            raise ValueError("beam length must be > 0")
        lam = np.asarray(flexural_eigenvalues(n))
        sigma = (np.cosh(lam) + np.cos(lam)) / (np.sinh(lam) + np.sin(lam))
        # 1 - sigma = (sin - cos - exp(-lam)) / (sinh + sin), exact rearrangement
        dsig = (np.sin(lam) - np.cos(lam) - np.exp(-lam)) / (np.sinh(lam) + np.sin(lam))
        return cls(n=n, length=float(length), flexural_roots=lam, sigma=sigma,
                   one_minus_sigma=dsig)

    def _check_args(self, j, x):
        if not 1 <= j <= self.n:
            raise ValueError(f"mode index {j} outside 1..{self.n}")
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.length * (1 + 1e-12)):
            raise ValueError(f"position outside [0, {self.length}]")
        return x

    def flexural_mode(self, j, x):
        """Return (phi, phi', phi'') of flexural mode j at x (scalar or array).

        The combinations cosh(z) - sigma*sinh(z) are evaluated as
        0.5*((1-sigma)*e^z + (1+sigma)*e^-z) so no large-argument cancellation
        occurs even though sigma -> 1 for high modes.
        """
        x = self._check_args(j, x)
        lam = self.flexural_roots[j - 1]
        sig = self.sigma[j - 1]
        dsig = self.one_minus_sigma[j - 1]
        beta = lam / self.length
        z = beta * x
        ep, em = np.exp(z), np.exp(-z)
        even = 0.5 * (dsig * ep + (1.0 + sig) * em)   # cosh z - sig*sinh z
        odd = 0.5 * (dsig * ep - (1.0 + sig) * em)    # sinh z - sig*cosh z
        c, s = np.cos(z), np.sin(z)
        phi = even - c + sig * s
        dphi = beta * (odd + s + sig * c)
        ddphi = beta * beta * (even + c - sig * s)
        return phi, dphi, ddphi

    def torsional_mode(self, j, x):
        """Return (psi, psi') of torsional mode j at x."""
        x = self._check_args(j, x)
        k = (2 * j - 1) * np.pi / (2.0 * self.length)
        return np.sin(k * x), k * np.cos(k * x)

    def flexural_tip_values(self):
        """phi_j(L) for all modes (output weights of the tip deflection)."""
        return np.array([self.flexural_mode(j, self.length)[0] for j in range(1, self.n + 1)])

    def torsional_tip_values(self):
        return np.array([self.torsional_mode(j, self.length)[0] for j in range(1, self.n + 1)])
