"""Bosonic bath: spectral densities, Planck occupation and two-point functions.

Channel labels follow the coupling convention ``B^1 = B = sum_k lambda_k b_k``
and ``B^2 = B^dagger``. Only ``D^{12}`` and ``D^{21}`` are non-zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .quadrature import (EPSABS, EPSREL, LIMIT, PrincipalValueError,
                         QuadratureError, cauchy_integral, principal_value, quad)

VACUUM = math.inf
CHANNELS = (1, 2)


@dataclass(frozen=True)
class OhmicExponential:
    """``g(w) = eta * w * exp(-w / cutoff)``."""

    eta: float
    cutoff: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("ohmic coupling eta must be non-negative")
        if not self.cutoff > 0:
            raise ValueError("ohmic cutoff must be positive")

    @property
    def scale(self) -> float:
        return self.cutoff

    def g(self, w):
        return self.eta * w * np.exp(-w / self.cutoff)


@dataclass(frozen=True)
class DiscreteModes:
    """Finite set of oscillators ``(lambda_k, Omega_k)``.

    ``smearing`` is the Gaussian width used wherever a smooth ``g`` is needed
    (plotting and frequency-domain dissipators). Time correlators and
    principal values use the exact mode sums.
    """

    modes: tuple
    smearing: float = 0.05

    def __post_init__(self):
        modes = tuple((float(lam), float(om)) for lam, om in self.modes)
        if not modes:
            raise ValueError("discrete bath needs at least one mode")
        if any(om <= 0 for _, om in modes):
            raise ValueError("mode frequencies must be positive")
        if not self.smearing > 0:
            raise ValueError("smearing width must be positive")
        object.__setattr__(self, "modes", modes)

    @property
    def scale(self) -> float:
        return max(om for _, om in self.modes) + 10 * self.smearing

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.modes])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([om for _, om in self.modes])

    def g(self, w):
        w = np.asarray(w, dtype=float)
        s = self.smearing
        out = np.zeros_like(w)
        for lam, om in self.modes:
            out = out + lam ** 2 * np.exp(-0.5 * ((w - om) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        return 2 * math.pi * out


BathModel = Union[OhmicExponential, DiscreteModes]


@dataclass(frozen=True)
class BathSpec:
    model: BathModel
    beta: float = VACUUM

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError("inverse temperature must be positive (use VACUUM for T = 0)")

    @property
    def is_vacuum(self) -> bool:
        return math.isinf(self.beta)


def planck_occupation(omega, beta: float):
    """Bose occupation ``1 / (exp(beta w) - 1)``; zero in the vacuum."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("Planck occupation needs omega > 0")
    if math.isinf(beta):
        out = np.zeros_like(w)
    else:
        out = 1.0 / np.expm1(beta * w)
    return float(out) if out.ndim == 0 else out


def spectral_density(bath: BathSpec, omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("spectral density is defined for omega > 0")
    out = bath.model.g(w)
    return float(out) if np.ndim(out) == 0 else out


def _occ(w, beta):
    """Planck occupation without the positivity check (w > 0 assumed)."""
    if math.isinf(beta):
        return np.zeros_like(w)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(beta * w)


def _occ_plus_one(w, beta):
    if math.isinf(beta):
        return np.ones_like(w)
    return -1.0 / np.expm1(-beta * w)


def trigamma(z):
    """Trigamma function for complex arrays with ``Re z > 0``.

    Upward recurrence to ``|z| >= 20`` followed by the asymptotic series.
    """
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    w = z.copy()
    small = np.abs(w) < 20.0
    while np.any(small):
        acc[small] += 1.0 / w[small] ** 2
        w[small] += 1.0
        small = np.abs(w) < 20.0
    iw = 1.0 / w
    iw2 = iw * iw
    coeffs = (-1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0)
    tail = np.zeros_like(w)
    for c in reversed(coeffs):
        tail = c + iw2 * tail
    series = iw + 0.5 * iw2 + iw2 * iw / 6.0 + iw2 * iw2 * iw * tail
    return acc + series


class BathCorrelation:
    """Two-point functions of a bath in time and frequency.

    Parameters
    ----------
    bath : BathSpec
    omega_cutoff : float, optional
        Upper limit of frequency integrals. Defaults to 40x the bath scale.
    pv_exclusion : float
        Half-width of the exclusion window used for principal values.
    """

    def __init__(self, bath: BathSpec, omega_cutoff: Optional[float] = None,
                 pv_exclusion: float = 1e-3):
        self.bath = bath
        self.model = bath.model
        self.beta = bath.beta
        self.omega_cutoff = float(omega_cutoff) if omega_cutoff else 40.0 * bath.model.scale
        self.pv_exclusion = pv_exclusion
        self._pv_cache = {}

    # -- frequency domain ---------------------------------------------------

    def freq(self, a: int, b: int, omega):
        """``D~^{ab}(omega)``, real and non-negative."""
        w = np.asarray(omega, dtype=float)
        out = np.zeros_like(w)
        if (a, b) == (1, 2):
            m = w > 0
            out[m] = self.model.g(w[m]) * _occ_plus_one(w[m], self.beta)
        elif (a, b) == (2, 1):
            m = w < 0
            out[m] = self.model.g(-w[m]) * _occ(-w[m], self.beta)
        elif a not in CHANNELS or b not in CHANNELS:
            raise ValueError(f"channels must be 1 or 2, got ({a}, {b})")
        return float(out) if out.ndim == 0 else out

    def _support_density(self, a, b):
        """``D~^{ab}`` on its support, as a function of ``u = |omega| > 0``."""
        # clip at a tiny positive frequency so g(u) n(u) takes its u -> 0 limit
        if (a, b) == (1, 2):
            return lambda u: self.model.g(np.maximum(u, 1e-300)) * _occ_plus_one(
                np.maximum(u, 1e-300), self.beta)
        return lambda u: self.model.g(np.maximum(u, 1e-300)) * _occ(np.maximum(u, 1e-300), self.beta)

    def freq_complex(self, a: int, b: int, z: complex) -> complex:
        """Analytic continuation of ``D~^{ab}`` off the real axis (ohmic only)."""
        if (a, b) not in ((1, 2), (2, 1)):
            return 0.0
        if not isinstance(self.model, OhmicExponential):
            raise NotImplementedError("analytic continuation needs a smooth spectral density")
        u = z if (a, b) == (1, 2) else -z
        if u.real <= 0:
            return 0.0
        if (a, b) == (2, 1) and math.isinf(self.beta):
            return 0.0
        g = self.model.eta * u * np.exp(-u / self.model.cutoff)
        if math.isinf(self.beta):
            return complex(g)
        occ = 1.0 / np.expm1(self.beta * u)
        return complex(g * (1.0 + occ) if (a, b) == (1, 2) else g * occ)

    def pv(self, a: int, b: int, x: float) -> float:
        r"""``J^{ab}(x) = P \int d\omega/2\pi\, D~^{ab}(\omega) / (x - \omega)``."""
        if (a, b) not in ((1, 2), (2, 1)):
            return 0.0
        key = (a, b, float(x))
        if key not in self._pv_cache:
            self._pv_cache[key] = self._pv(a, b, float(x))
        return self._pv_cache[key]

    def _pv(self, a, b, x):
        if isinstance(self.model, DiscreteModes):
            lam2 = self.model.lambdas ** 2
            om = self.model.frequencies
            if (a, b) == (1, 2):
                return float(np.sum(lam2 * _occ_plus_one(om, self.beta) / (x - om)))
            return float(np.sum(lam2 * _occ(om, self.beta) / (x + om)))
        if (a, b) == (2, 1) and math.isinf(self.beta):
            return 0.0
        h = self._support_density(a, b)
        # D~^{21} lives on omega < 0: substitute omega = -u.
        pole, sign = (x, 1.0) if (a, b) == (1, 2) else (-x, -1.0)
        if pole == 0.0:
            if float(h(np.array([1e-300]))[0]) > 1e-100:
                raise PrincipalValueError(
                    f"J^{a}{b}({x}): pole at the spectral edge with non-zero density diverges")
            val = quad(lambda u: h(u) / (pole - u), 0.0, self.omega_cutoff)
        else:
            width = min(self.pv_exclusion, abs(pole) / 3, abs(self.omega_cutoff - pole) / 3)
            val = principal_value(h, pole, 0.0, self.omega_cutoff, width)
        return sign * val / (2 * math.pi)

    def resolvent(self, a: int, b: int, w: complex, side: int) -> complex:
        r"""``R^{ab}(w) = \int d\omega/2\pi\, D~^{ab}(\omega) / (w - \omega)``.

        ``side = +1`` continues the function from the upper half plane,
        ``side = -1`` from the lower half plane. On the real axis this is the
        Plemelj limit ``J(w) -/+ (i/2) D~(w)``.
        """
        if (a, b) not in ((1, 2), (2, 1)):
            return 0j
        w = complex(w)
        if isinstance(self.model, DiscreteModes):
            if w.imag == 0.0:
                return self.pv(a, b, w.real) - side * 0.5j * self.freq(a, b, w.real)
            lam2 = self.model.lambdas ** 2
            om = self.model.frequencies
            if (a, b) == (1, 2):
                return complex(np.sum(lam2 * _occ_plus_one(om, self.beta) / (w - om)))
            return complex(np.sum(lam2 * _occ(om, self.beta) / (w + om)))
        if w.imag == 0.0:
            return self.pv(a, b, w.real) - side * 0.5j * self.freq(a, b, w.real)
        if (a, b) == (2, 1) and math.isinf(self.beta):
            return 0j
        h = self._support_density(a, b)
        if (a, b) == (1, 2):
            direct = cauchy_integral(h, w, 0.0, self.omega_cutoff)
        else:
            direct = -cauchy_integral(h, -w, 0.0, self.omega_cutoff)
        direct /= 2 * math.pi
        if w.imag * side > 0:
            return direct
        return direct - side * 1j * self.freq_complex(a, b, w)

    # -- time domain --------------------------------------------------------

    def time(self, a: int, b: int, t, method: str = "exact"):
        """``D^{ab}(t) = Tr[rho_B B^a(t) B^b(0)]``.

        ``method="exact"`` uses closed forms (mode sums, or the trigamma
        series for the ohmic bath); ``method="quad"`` integrates the
        spectral representation up to ``omega_cutoff``.
        """
        t = np.asarray(t, dtype=float)
        if a not in CHANNELS or b not in CHANNELS:
            raise ValueError(f"channels must be 1 or 2, got ({a}, {b})")
        if (a, b) not in ((1, 2), (2, 1)):
            out = np.zeros(t.shape, dtype=complex)
        elif method == "quad":
            out = np.vectorize(lambda s: self._time_quad(a, b, s, self.omega_cutoff),
                               otypes=[complex])(t)
        elif isinstance(self.model, DiscreteModes):
            lam2 = self.model.lambdas ** 2
            om = self.model.frequencies
            if (a, b) == (1, 2):
                w = lam2 * _occ_plus_one(om, self.beta)
                out = np.exp(-1j * np.multiply.outer(t, om)) @ w
            else:
                w = lam2 * _occ(om, self.beta)
                out = np.exp(1j * np.multiply.outer(t, om)) @ w
        else:
            out = self._time_ohmic(a, b, t)
        return complex(out) if out.ndim == 0 else out

    def _time_ohmic(self, a, b, t):
        eta, wc, beta = self.model.eta, self.model.cutoff, self.beta
        pref = eta / (2 * math.pi)
        if (a, b) == (1, 2):
            z = 1.0 / wc + 1j * t
            if math.isinf(beta):
                return pref / z ** 2
            return pref * trigamma(z / beta) / beta ** 2
        if math.isinf(beta):
            return np.zeros(t.shape, dtype=complex)
        z = 1.0 / wc - 1j * t
        return pref * trigamma(1.0 + z / beta) / beta ** 2

    def _time_quad(self, a, b, t, cutoff):
        h = self._support_density(a, b)
        sgn = -1.0 if (a, b) == (1, 2) else 1.0
        kw = dict(epsabs=EPSABS, epsrel=EPSREL, limit=LIMIT)
        if t == 0.0:
            re = quad(h, 0.0, cutoff)
            im = 0.0
        else:
            try:
                re = integrate.quad(h, 0.0, cutoff, weight="cos", wvar=t, **kw)[0]
                im = sgn * integrate.quad(h, 0.0, cutoff, weight="sin", wvar=t, **kw)[0]
            except Exception as exc:  # pragma: no cover - scipy raises several types
                raise QuadratureError(f"time correlator quadrature failed at t={t}") from exc
        return (re + 1j * im) / (2 * math.pi)


def bath_correlation_time(corr: BathCorrelation, a: int, b: int, t, method: str = "exact"):
    return corr.time(a, b, t, method=method)


def bath_correlation_freq(corr: BathCorrelation, a: int, b: int, omega):
    return corr.freq(a, b, omega)
