"""Lorentz-Drude environment statistics.

Spectral density ``J(w) = 2 lam w wc / (w**2 + wc**2)``. The bath correlation
function is expanded into the Drude exponential plus Matsubara exponentials
with frequencies ``nu_n = 2 pi n / beta``. The first ``matsubara_terms`` of
those are summed explicitly and the remainder is added in closed form
(digamma functions in the frequency domain, polylogarithms in the time
domain), so results do not depend on the truncation point.

Two normalizations of the correlation function are supported:

``"rate"`` (default)
    ``C(t) = (1/2pi) int J(w) [coth(beta w/2) cos wt - i sin wt] dw``, so that
    ``Re Gamma(w) = rate_gamma(w) / 2`` and the golden-rule transition rate
    ``2 Re Gamma`` equals ``J(w) (n(w) + 1)``.
``"reorganization"``
    ``C(t) = (1/pi) int ...``, the convention in which ``lam`` is the
    reorganization energy of ``C``; ``Re Gamma(w) = rate_gamma(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import psi

KB_CM_PER_K = 0.6950348  # Boltzmann constant in cm^-1 / K

CONVENTIONS = {"rate": 0.5, "reorganization": 1.0}


class MatsubaraResonanceError(ValueError):
    """A Matsubara frequency coincides with the Drude cutoff."""


@dataclass(frozen=True)
class BathSpec:
    lam: float = 35.0
    cutoff: float = 106.0
    temperature: float = 300.0
    matsubara_terms: int = 1000
    tail_tol: float = 1e-10
    convention: str = "rate"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if int(self.matsubara_terms) != self.matsubara_terms or self.matsubara_terms < 1:
            raise ValueError(f"matsubara_terms must be a positive integer, got {self.matsubara_terms}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {sorted(CONVENTIONS)}, got {self.convention!r}")
        x = self.cutoff_ratio
        k = round(x)
        if k >= 1 and abs(x - k) <= 1e-10 * x:
            raise MatsubaraResonanceError(
                f"Matsubara frequency nu_{k} = 2 pi {k} kB T coincides with the cutoff "
                f"{self.cutoff} cm^-1; perturb the cutoff by about 1 part in 1e9 "
                f"(e.g. {self.cutoff * (1 + 1e-9):.12g})"
            )
        bound = truncation_bound(self)
        if bound > self.tail_tol:
            raise ValueError(
                f"truncation bound {bound:.3g} exceeds tail_tol {self.tail_tol:.3g}; "
                "increase matsubara_terms"
            )

    @property
    def kbt(self) -> float:
        return KB_CM_PER_K * self.temperature

    @property
    def beta(self) -> float:
        return 1.0 / self.kbt

    @property
    def scale(self) -> float:
        return CONVENTIONS[self.convention]

    @property
    def kappa(self) -> float:
        """Matsubara spacing 2 pi / beta."""
        return 2.0 * np.pi / self.beta

    @property
    def cutoff_ratio(self) -> float:
        return self.cutoff / self.kappa


def spectral_density(w, b: BathSpec):
    w = np.asarray(w, dtype=float)
    return 2.0 * b.lam * w * b.cutoff / (w**2 + b.cutoff**2)


def bose(w, b: BathSpec):
    w = np.asarray(w, dtype=float)
    return 1.0 / np.expm1(b.beta * w)


def rate_gamma(w, b: BathSpec):
    """J(w) (n(w) + 1); the w -> 0 limit is 2 lam kB T / wc."""
    w = np.asarray(w, dtype=float)
    zero = w == 0
    safe = np.where(zero, 1.0, w)
    with np.errstate(over="ignore"):
        val = spectral_density(safe, b) / -np.expm1(-b.beta * safe)
    out = np.where(zero, 2.0 * b.lam * b.kbt / b.cutoff, val)
    return out if out.ndim else float(out)


def exponential_terms(b: BathSpec) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and decay rates of the explicitly summed exponentials.

    Index 0 is the Drude term; 1..N are Matsubara terms.
    """
    n = np.arange(1, b.matsubara_terms + 1)
    nu = b.kappa * n
    drude = b.lam * b.cutoff * (1.0 / np.tan(b.beta * b.cutoff / 2.0) - 1j)
    mats = (4.0 * b.lam * b.cutoff / b.beta) * nu / (nu**2 - b.cutoff**2)
    coef = b.scale * np.concatenate(([drude], mats.astype(complex)))
    rates = np.concatenate(([b.cutoff], nu))
    return coef, rates


def truncation_bound(b: BathSpec) -> float:
    """Upper bound on the part of C(t) the closed-form remainder neglects.

    The remainder keeps the 1/n and x^2/n^3 pieces of n/(n^2 - x^2); the
    rest is below x^4 / (4 N^4 (1 - x^2/(N+1)^2)) per unit prefactor.
    """
    n = b.matsubara_terms
    x = b.cutoff_ratio
    pref = b.scale * 2.0 * b.lam * b.cutoff / np.pi
    return float(pref * x**4 / (4.0 * n**4 * (1.0 - x**2 / (n + 1) ** 2)))


def _tail_time(tau: float, b: BathSpec) -> float:
    n_terms = b.matsubara_terms
    a = b.kappa * tau
    if a * (n_terms + 1) > 700.0:
        return 0.0
    q = np.exp(-a)
    n = np.arange(1, n_terms + 1)
    qn = q**n
    tail1 = -np.log1p(-q) - np.sum(qn / n)
    tail3 = float(mpmath.polylog(3, q)) - np.sum(qn / n**3)
    x = b.cutoff_ratio
    pref = b.scale * 2.0 * b.lam * b.cutoff / np.pi
    return float(pref * (tail1 + x**2 * tail3))


def correlation_function(tau, b: BathSpec):
    """C(tau) for tau >= 0.

    For tau > 0 the Matsubara remainder beyond ``matsubara_terms`` is
    included; its real part diverges logarithmically as tau -> 0, so at
    tau == 0 exactly the explicitly truncated series is returned.
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0):
        raise ValueError("correlation_function requires tau >= 0")
    coef, rates = exponential_terms(b)
    out = np.exp(-np.outer(taus, rates)) @ coef
    for k, t in enumerate(taus):
        if t > 0:
            out[k] += _tail_time(t, b)
    return out if np.ndim(tau) else complex(out[0])


def _remainder_freq(w: np.ndarray, b: BathSpec) -> np.ndarray:
    # sum_{n>N} n / ((n^2 - x^2)(n - z)) by partial fractions, z = i w / kappa
    n1 = b.matsubara_terms + 1
    x = b.cutoff_ratio
    z = 1j * w / b.kappa
    ca = 1.0 / (2.0 * (x - z))
    cb = -1.0 / (2.0 * (x + z))
    cc = z / (z**2 - x**2)
    s = -(ca * psi(n1 - x) + cb * psi(n1 + x) + cc * psi(n1 - z))
    return b.scale * (2.0 * b.lam * b.cutoff / (np.pi * b.kappa)) * s


def half_fourier(w, b: BathSpec, chunk: int = 256):
    """Gamma(w) = int_0^inf C(tau) exp(i w tau) d tau, term by term."""
    ws = np.atleast_1d(np.asarray(w, dtype=float))
    coef, rates = exponential_terms(b)
    out = np.empty(ws.shape, dtype=complex)
    flat_in = ws.ravel()
    flat_out = out.reshape(-1)
    for s in range(0, flat_in.size, chunk):
        seg = flat_in[s:s + chunk]
        flat_out[s:s + chunk] = (coef[None, :] / (rates[None, :] - 1j * seg[:, None])).sum(axis=1)
    flat_out += _remainder_freq(flat_in, b)
    return out if np.ndim(w) else complex(out.ravel()[0])
