"""Closed-form two-level system coupled through ``sigma^+ B + sigma^- B^dagger``.

Basis order is ``(|+>, |->)`` with energies ``(omega0/2, -omega0/2)``, so
``sigma^+ = |+><-|`` raises the system.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .bath import BathCorrelation, planck_occupation
from .core import SimulationConfig, SystemSpec, pair_index
from .kernel import gksl_builder, shift_at

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
LABELS = {"+": 0, "-": 1}


@dataclass(frozen=True)
class QubitParams:
    """Splitting ``omega0``, ``g0 = g(omega0)``, ``n0 = n(omega0)`` and shift ``delta``."""

    omega0: float
    g0: float
    n0: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.g0 < 0 or self.n0 < 0:
            raise ValueError("g0 and n0 must be non-negative")

    @property
    def gamma1(self) -> float:
        """Population relaxation rate ``g0 (1 + 2 n0)``."""
        return self.g0 * (1 + 2 * self.n0)

    @property
    def excited_population(self) -> float:
        """Stationary ``rho_++``."""
        return self.n0 / (1 + 2 * self.n0)

    @property
    def shifted_frequency(self) -> float:
        return self.omega0 - self.delta


def qubit_system(omega0: float) -> SystemSpec:
    return SystemSpec.from_jump([omega0 / 2, -omega0 / 2], SIGMA_PLUS)


def qubit_params(omega0: float, corr: BathCorrelation, with_shift: bool = True,
                 cfg: Optional[SimulationConfig] = None) -> QubitParams:
    """Read ``g0``, ``n0`` and the shift off a bath."""
    g0 = float(corr.model.g(omega0))
    n0 = planck_occupation(omega0, corr.beta)
    delta = 0.0
    if with_shift:
        sys = qubit_system(omega0)
        D = shift_at(sys, corr, sys.pair_energies(), cfg=cfg)
        delta = float(D[pair_index(0, 1, 2), pair_index(0, 1, 2)].real)
    return QubitParams(omega0, g0, n0, delta)


def qubit_rates(p: QubitParams) -> Dict[str, float]:
    """The six non-zero dissipator elements, keyed ``"pp',qq'"``."""
    gain, loss = p.g0 * p.n0, p.g0 * (1 + p.n0)
    coh = -0.5 * p.gamma1
    return {
        "++,++": -loss,
        "--,++": loss,
        "++,--": gain,
        "--,--": -gain,
        "+-,+-": coh,
        "-+,-+": coh,
    }


def rates_superoperator(rates: Dict[str, float]) -> np.ndarray:
    M = np.zeros((4, 4), dtype=complex)
    for key, val in rates.items():
        row, col = key.split(",")
        M[pair_index(LABELS[row[0]], LABELS[row[1]], 2),
          pair_index(LABELS[col[0]], LABELS[col[1]], 2)] = val
    return M


def qubit_analytic(p: QubitParams, rho0, t):
    """Exact solution of the qubit master equation at time(s) ``t``.

    Returns a ``(2, 2)`` array for scalar ``t`` and ``(n, 2, 2)`` otherwise.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    pinf = p.excited_population
    decay = np.exp(-p.gamma1 * ts)
    pp = pinf + (rho0[0, 0].real - pinf) * decay
    coh = rho0[0, 1] * np.exp(-1j * p.shifted_frequency * ts) * np.exp(-0.5 * p.gamma1 * ts)
    out = np.empty((len(ts), 2, 2), dtype=complex)
    out[:, 0, 0] = pp
    out[:, 1, 1] = 1 - pp
    out[:, 0, 1] = coh
    out[:, 1, 0] = coh.conj()
    return out[0] if np.ndim(t) == 0 else out


def qubit_lindblad_generator(p: QubitParams) -> np.ndarray:
    """GKSL generator with decay at ``g0 (1 + n0)`` and excitation at ``g0 n0``."""
    H = 0.5 * p.shifted_frequency * SIGMA_Z
    return gksl_builder(H, [[SIGMA_MINUS], [SIGMA_PLUS]],
                        [np.array([[p.g0 * (1 + p.n0)]]), np.array([[p.g0 * p.n0]])])
