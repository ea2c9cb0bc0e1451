"""Adaptive quadrature helpers: principal values and Cauchy-type integrals."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

EPSABS = 1e-14
EPSREL = 1e-11
LIMIT = 400


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class PrincipalValueError(QuadratureError):
    """Principal-value integral is ill-defined or did not converge."""


def quad(f, a, b, points=None, epsabs=EPSABS, epsrel=EPSREL):
    """Real adaptive quadrature that raises instead of warning."""
    if b <= a:
        return 0.0
    if points is not None:
        points = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, points=points, epsabs=epsabs,
                                    epsrel=epsrel, limit=LIMIT)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    return val


def principal_value(f, pole, a, b, delta):
    r"""``P \int_a^b f(u) / (pole - u) du`` by symmetric exclusion.

    The integral with the window ``(pole - delta, pole + delta)`` removed is
    linear in ``delta`` to leading order; two window sizes are combined to
    cancel that term, leaving an ``O(delta^3)`` error.
    """
    if not (a < pole < b):
        return quad(lambda u: f(u) / (pole - u), a, b)
    if pole - a < 2 * delta or b - pole < 2 * delta:
        raise PrincipalValueError(
            f"pole at {pole} lies within 2*delta of an integration endpoint ({a}, {b})")

    def excluded(width):
        g = lambda u: f(u) / (pole - u)
        return quad(g, a, pole - width) + quad(g, pole + width, b)

    return 2.0 * excluded(delta / 2) - excluded(delta)


def cauchy_integral(f, z, a, b):
    r"""``\int_a^b f(u) / (z - u) du`` for complex ``z`` off the real segment.

    Near ``x = Re z`` the integrand is folded about ``x`` and ``f(x)`` is
    subtracted (its part is done in closed form), so the folded integrand
    stays bounded and smooth as ``Im z -> 0``.
    """
    z = complex(z)
    x, y = z.real, z.imag
    if y == 0.0:
        raise ValueError("cauchy_integral needs Im z != 0; use principal_value")
    y2 = y * y
    if not (a < x < b):
        pts = [x + k * abs(y) for k in (-20, -4, -1, 0, 1, 4, 20)]
        re = quad(lambda u: f(u) * (x - u) / ((x - u) ** 2 + y2), a, b, points=pts)
        im = quad(lambda u: -f(u) * y / ((x - u) ** 2 + y2), a, b, points=pts)
        return re + 1j * im
    fx = float(f(x))
    half = min(x - a, b - x)
    spts = [k * abs(y) for k in (1, 4, 20)]

    def fold_re(s):
        return -(f(x + s) - f(x - s)) * s / (s * s + y2)

    def fold_im(s):
        return -(f(x + s) + f(x - s) - 2.0 * fx) * y / (s * s + y2)

    re = quad(fold_re, 0.0, half, points=spts)
    im = quad(fold_im, 0.0, half, points=spts)
    # closed form of fx * int_{x-half}^{x+half} du / (z - u)
    im += -2.0 * fx * math.atan2(half, y) if y > 0 else 2.0 * fx * math.atan2(half, -y)
    lo, hi = (a, x - half) if x - half > a else (x + half, b)
    if hi > lo:
        re += quad(lambda u: f(u) * (x - u) / ((x - u) ** 2 + y2), lo, hi)
        im += quad(lambda u: -f(u) * y / ((x - u) ** 2 + y2), lo, hi)
    return re + 1j * im


def richardson_zero(hs, values):
    """Neville extrapolation of ``values(h)`` to ``h -> 0`` (polynomial in h)."""
    hs = np.asarray(hs, dtype=float)
    table = [np.asarray(v, dtype=complex) for v in values]
    n = len(table)
    for k in range(1, n):
        table = [
            (hs[i + k] * table[i] - hs[i] * table[i + 1]) / (hs[i + k] - hs[i])
            for i in range(n - k)
        ]
    return table[0]
