"""Shared value types and the superoperator index convention.

Density matrices and superoperators are plain complex numpy arrays. A
superoperator ``M`` acts on vectorized density matrices with row index
``p * d + p'`` and column index ``q * d + q'`` (row-pair-major), so that

    rho_new[p, p'] = sum_{q q'} M[p*d + p', q*d + q'] * rho[q, q']

which is exactly ``M @ rho.reshape(-1)`` with numpy's default C order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Array shape does not match the system dimension."""


class InvalidStateError(ValueError):
    """A density matrix fails Hermiticity, trace or positivity checks."""


@dataclass(frozen=True)
class SystemSpec:
    """Few-level system in its energy eigenbasis.

    Parameters
    ----------
    energies : sequence of float
        Level energies ``E_p`` (angular frequency units, hbar = 1).
    couplings : sequence of (d, d) complex arrays
        Coupling operators ``S^alpha``; channel 1 couples to the bath
        annihilation sum ``B``, channel 2 to ``B^dagger``.
    conjugate_pairs : sequence of int
        Involution on channel positions with ``S[pairs[a]] == S[a]^dagger``.
    """

    energies: tuple
    couplings: tuple
    conjugate_pairs: tuple = (1, 0)

    def __post_init__(self):
        energies = tuple(float(e) for e in self.energies)
        if len(energies) < 2:
            raise DimensionError("a system needs at least two levels")
        if not all(math.isfinite(e) for e in energies):
            raise ValueError("energies must be finite")
        d = len(energies)
        couplings = []
        for S in self.couplings:
            S = np.array(S, dtype=complex)
            if S.shape != (d, d):
                raise DimensionError(f"coupling has shape {S.shape}, expected {(d, d)}")
            S.setflags(write=False)
            couplings.append(S)
        if len(couplings) != 2:
            raise ValueError("exactly two channels (B and B^dagger) are supported")
        pairs = tuple(int(a) for a in self.conjugate_pairs)
        if sorted(pairs) != list(range(len(couplings))):
            raise ValueError(f"conjugate_pairs {pairs} is not a permutation of the channels")
        for a, b in enumerate(pairs):
            if pairs[b] != a:
                raise ValueError("conjugate_pairs must be an involution")
            scale = max(1.0, float(np.abs(couplings[a]).max()))
            if np.abs(couplings[b] - couplings[a].conj().T).max() > 1e-12 * scale:
                raise ValueError(f"S^{b + 1} is not the adjoint of S^{a + 1}; H_SB would not be Hermitian")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "couplings", tuple(couplings))
        object.__setattr__(self, "conjugate_pairs", pairs)

    @classmethod
    def from_jump(cls, energies: Sequence[float], S) -> "SystemSpec":
        """System coupled as ``S B + S^dagger B^dagger``."""
        S = np.asarray(S, dtype=complex)
        return cls(tuple(energies), (S, S.conj().T), (1, 0))

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def E(self) -> np.ndarray:
        return np.array(self.energies)

    def coupling(self, alpha: int) -> np.ndarray:
        """Coupling operator for channel label ``alpha`` in {1, 2}."""
        return self.couplings[alpha - 1]

    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.E).astype(complex)

    def bohr(self) -> np.ndarray:
        """Matrix of level splittings ``E_pq = E_p - E_q``."""
        E = self.E
        return E[:, None] - E[None, :]

    def pair_energies(self) -> np.ndarray:
        """``E_pp'`` flattened in superoperator row order."""
        return self.bohr().reshape(-1)

    def energy_scale(self) -> float:
        return float(np.abs(self.bohr()).max())


@dataclass(frozen=True)
class TimeGrid:
    start: float = 0.0
    stop: float = 10.0
    step: float = 0.01

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("time step must be positive")
        if self.stop < self.start:
            raise ValueError("time grid stop precedes start")

    @property
    def n_steps(self) -> int:
        return int(round((self.stop - self.start) / self.step))

    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class SimulationConfig:
    """Numerical settings shared by the kernel and dynamics modules.

    ``omega_cutoff`` of ``None`` means "choose automatically" (see
    :func:`resolve_cutoff`). ``history_depth`` is a time span.
    """

    time_grid: TimeGrid = field(default_factory=TimeGrid)
    tol_herm: float = 1e-10
    tol_trace: float = 1e-10
    tol_pos: float = 1e-8
    energy_match_tol: float = 1e-9
    pv_exclusion: float = 1e-3
    omega_cutoff: Optional[float] = None
    history_depth: float = 50.0
    ode_tol: float = 1e-10

    def __post_init__(self):
        for name in ("tol_herm", "tol_trace", "tol_pos", "energy_match_tol",
                     "pv_exclusion", "history_depth", "ode_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.omega_cutoff is not None and not self.omega_cutoff > 0:
            raise ValueError("omega_cutoff must be positive")


CUTOFF_FACTOR = 10.0


def resolve_cutoff(cfg: SimulationConfig, sys: Optional[SystemSpec], bath_scale: float) -> float:
    """Upper limit for spectral integrals.

    At least ``CUTOFF_FACTOR`` times the largest Bohr frequency and 40 times
    the bath's own frequency scale, so exponential tails are below 1e-17.
    """
    floor = 40.0 * bath_scale
    if sys is not None:
        floor = max(floor, CUTOFF_FACTOR * sys.energy_scale())
    if cfg.omega_cutoff is None:
        return floor
    if sys is not None and cfg.omega_cutoff < 5.0 * sys.energy_scale():
        raise ValueError("omega_cutoff must exceed 5 x the largest Bohr frequency")
    return float(cfg.omega_cutoff)


# -- vectorization ----------------------------------------------------------

def vectorize(rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).astype(complex)


def devectorize(vec, d: Optional[int] = None) -> np.ndarray:
    vec = np.asarray(vec)
    if d is None:
        d = math.isqrt(vec.size)
    if vec.ndim != 1 or vec.size != d * d:
        raise DimensionError(f"vector of length {vec.size} is not a {d}x{d} matrix")
    return vec.reshape(d, d)


def pair_index(p: int, pp: int, d: int) -> int:
    return p * d + pp


def sandwich(A, B) -> np.ndarray:
    """Superoperator of ``X -> A X B``."""
    return np.kron(A, np.asarray(B).T)


def swap_permutation(d: int) -> np.ndarray:
    """Index map ``(p, p') -> (p', p)`` in row-pair-major order."""
    idx = np.arange(d * d).reshape(d, d)
    return idx.T.reshape(-1)


def trace_defect(M) -> float:
    """``max_{qq'} |sum_p M[pp, qq']|``; zero for trace-annihilating maps."""
    M = np.asarray(M)
    d = math.isqrt(M.shape[0])
    diag = [p * d + p for p in range(d)]
    return float(np.abs(M[diag, :].sum(axis=0)).max())


def hermiticity_defect(M) -> float:
    """``max |M[pp', qq']* - M[p'p, q'q]|``; zero for Hermiticity-preserving maps."""
    M = np.asarray(M)
    perm = swap_permutation(math.isqrt(M.shape[0]))
    return float(np.abs(M.conj() - M[np.ix_(perm, perm)]).max())


def max_norm(M) -> float:
    return float(np.abs(np.asarray(M)).max())


# -- density matrices -------------------------------------------------------

@dataclass(frozen=True)
class DensityReport:
    herm_defect: float
    trace_defect: float
    min_eig: float
    purity: float

    def ok(self, cfg: SimulationConfig) -> bool:
        return (self.herm_defect <= cfg.tol_herm and self.trace_defect <= cfg.tol_trace
                and self.min_eig >= -cfg.tol_pos)


def check_density(rho, cfg: Optional[SimulationConfig] = None) -> DensityReport:
    """Diagnostics for a candidate density matrix; never raises on bad states."""
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = float(abs(np.trace(rho) - 1.0))
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    purity = float(np.real(np.trace(rho @ rho)))
    return DensityReport(herm, tr, float(eigs.min()), purity)


def as_density(rho, cfg: Optional[SimulationConfig] = None) -> np.ndarray:
    """Validate and return ``rho`` as a complex array, raising on failure."""
    cfg = cfg or SimulationConfig()
    rho = np.array(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    rep = check_density(rho, cfg)
    if not rep.ok(cfg):
        raise InvalidStateError(f"not a valid density matrix: {rep}")
    return rho


def thermal_populations(energies, beta: float) -> np.ndarray:
    E = np.asarray(energies, dtype=float)
    if math.isinf(beta):
        w = (E == E.min()).astype(float)
    else:
        w = np.exp(-beta * (E - E.min()))
    return w / w.sum()
