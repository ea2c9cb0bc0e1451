"""Propagation of the reduced density matrix and spectral analysis of the kernel.

Markovian evolution integrates ``d rho / dt = G rho`` for a constant
superoperator ``G``. Non-Markovian evolution solves the integro-differential
equation

    d rho / dt = -i [H_S, rho] + int_0^t K(t - s) rho(s) ds

with a sampled Born kernel. Resonances are the zeros of the inverse
transmission matrix ``-i (omega - E_pp') delta - K~(omega)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy import linalg

from .core import (SimulationConfig, SystemSpec, TimeGrid, as_density, check_density,
                   devectorize)
from .kernel import MemoryKernel, QPGenerator, free_generator

MAX_HALVINGS = 16


class NumericalFailure(RuntimeError):
    """A solver could not meet its accuracy target."""


class SingularTransmissionError(NumericalFailure):
    """Inverse transmission matrix is singular: omega sits on a resonance."""


class ConvergenceError(NumericalFailure):
    """Newton iteration or step-halving did not converge."""


class HistoryTruncationError(ValueError):
    """Memory window is too short for the kernel's support."""


class DegenerateSteadyStateError(NumericalFailure):
    """Generator null space is not one-dimensional."""


@dataclass
class Trajectory:
    """Density matrices on a time grid with per-step diagnostics."""

    times: np.ndarray
    states: np.ndarray
    trace_defect: np.ndarray
    herm_defect: np.ndarray
    min_eig: np.ndarray
    purity: np.ndarray
    error_estimate: Optional[float] = None
    positivity_violated: bool = False

    @classmethod
    def from_states(cls, times, states, cfg: SimulationConfig, error_estimate=None):
        reps = [check_density(r) for r in states]
        min_eig = np.array([r.min_eig for r in reps])
        return cls(np.asarray(times), np.asarray(states),
                   np.array([r.trace_defect for r in reps]),
                   np.array([r.herm_defect for r in reps]),
                   min_eig, np.array([r.purity for r in reps]),
                   error_estimate, bool(np.any(min_eig < -cfg.tol_pos)))

    def __len__(self):
        return len(self.times)

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))


@dataclass(frozen=True)
class Resonance:
    omega: complex
    sector: tuple
    residual: float
    det_residual: float
    iterations: int = 0


@dataclass
class ResonanceSet:
    """Complex roots of the inverse transmission matrix, one per tracked eigenvalue."""

    roots: List[Resonance] = field(default_factory=list)
    mode: str = "full"

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    def in_sector(self, pair) -> List[Resonance]:
        return [r for r in self.roots if tuple(pair) in r.sector]


# -- free and spectral objects -----------------------------------------------

def free_transmission(sys: SystemSpec, t: float) -> np.ndarray:
    """``T0(t) = diag(exp(-i E_pp' t))`` for ``t >= 0``, zero before."""
    n = sys.dim ** 2
    if t < 0:
        return np.zeros((n, n), dtype=complex)
    return np.diag(np.exp(-1j * sys.pair_energies() * t))


def inverse_transmission(sys: SystemSpec, K: np.ndarray, omega: complex) -> np.ndarray:
    return np.diag(-1j * (omega - sys.pair_energies())) - K


def transmission_freq(sys: SystemSpec, kernel_at: Callable[[complex], np.ndarray],
                      cond_limit: float = 1e13) -> Callable[[complex], np.ndarray]:
    """Return ``omega -> [T0~(omega)^-1 - K~(omega)]^-1``.

    ``kernel_at(omega)`` must return the full kernel superoperator.
    """

    def T(omega):
        M = inverse_transmission(sys, kernel_at(omega), omega)
        if np.linalg.cond(M) > cond_limit:
            raise SingularTransmissionError(f"inverse transmission is singular at omega={omega}")
        return np.linalg.inv(M)

    return T


def _sectors(sys: SystemSpec, tol: float):
    w = sys.pair_energies()
    done = np.zeros(len(w), bool)
    out = []
    for i in range(len(w)):
        if done[i]:
            continue
        idx = np.flatnonzero(np.abs(w - w[i]) < tol)
        done[idx] = True
        out.append((float(w[i]), idx))
    return out


def _pairs(sys: SystemSpec, idx) -> tuple:
    d = sys.dim
    return tuple((int(i) // d, int(i) % d) for i in idx)


def resonance_roots(sys: SystemSpec, kernel_at: Callable[..., np.ndarray],
                    mode: str = "full", max_iter: int = 50, root_tol: float = 1e-12,
                    cfg: Optional[SimulationConfig] = None, fd_step: float = 1e-6) -> ResonanceSet:
    """Roots of ``omega = E + i K~(omega)`` sector by sector.

    A sector collects the rows sharing one unperturbed pole ``E_pp'``. In
    ``quasiparticle`` mode the kernel is frozen at that pole and the roots
    are ``E + i * eig(K~_block(E))``. In ``full`` mode each of those roots
    seeds a complex Newton iteration on ``h(omega) = omega - E - i lambda(omega)``,
    where ``lambda`` is the eigenvalue of the sector block that continues the
    seed. With ``rwa=off`` kernels the full matrix is used in place of the block.

    ``kernel_at(omega, rows=None)`` returns ``K~(omega)``; rows outside
    ``rows`` may be left at zero (see :class:`oqsfield.kernel.FrequencyKernel`).
    """
    if mode not in ("full", "quasiparticle"):
        raise ValueError("mode must be 'full' or 'quasiparticle'")
    cfg = cfg or SimulationConfig()
    tol = cfg.energy_match_tol * max(1.0, sys.energy_scale())
    w = sys.pair_energies()
    out = ResonanceSet(mode=mode)
    for E, idx in _sectors(sys, tol):
        K0 = kernel_at(complex(E), idx)
        others = np.setdiff1d(np.arange(len(w)), idx)
        coupled = bool(np.any(K0[np.ix_(idx, others)] != 0))
        if coupled:
            K0 = kernel_at(complex(E))

        def block_eigs(z, coupled=coupled, idx=idx, E=E):
            if coupled:
                return np.linalg.eigvals(np.diag(w.astype(complex)) + 1j * kernel_at(z))
            return E + 1j * np.linalg.eigvals(kernel_at(z, idx)[np.ix_(idx, idx)])

        if coupled:
            seeds = np.linalg.eigvals(np.diag(w.astype(complex)) + 1j * K0)
            seeds = seeds[np.argsort(np.abs(seeds - E))[:len(idx)]]
        else:
            seeds = E + 1j * np.linalg.eigvals(K0[np.ix_(idx, idx)])
        for s in seeds:
            if mode == "quasiparticle":
                out.roots.append(Resonance(complex(s), _pairs(sys, idx), 0.0,
                                           _block_det(sys, K0, s, idx, coupled), 0))
                continue
            out.roots.append(_newton(sys, kernel_at, block_eigs, complex(s), idx, coupled,
                                     max_iter, root_tol, fd_step))
    return out


def _block_det(sys, K, omega, idx, coupled) -> float:
    """``|det|`` of the inverse transmission restricted to the sector (or in full)."""
    M = inverse_transmission(sys, K, omega)
    if not coupled:
        M = M[np.ix_(idx, idx)]
    return float(abs(np.linalg.det(M)))


def _newton(sys, kernel_at, block_eigs, seed, idx, coupled, max_iter, root_tol, fd_step):
    def h(z, target):
        lam = block_eigs(z)
        pick = lam[np.argmin(np.abs(lam - target))]
        return z - pick, pick

    z = seed
    scale = max(1.0, abs(seed))
    f = np.inf
    for it in range(1, max_iter + 1):
        f, lam = h(z, z)
        if abs(f) < root_tol * scale:
            K = kernel_at(z) if coupled else kernel_at(z, idx)
            return Resonance(z, _pairs(sys, idx), float(abs(f)),
                             _block_det(sys, K, z, idx, coupled), it)
        step = fd_step * scale
        fp, _ = h(z + step, lam)
        deriv = (fp - f) / step
        if deriv == 0:
            raise ConvergenceError(f"zero derivative in Newton iteration at omega={z}")
        z = z - f / deriv
    raise ConvergenceError(
        f"Newton did not converge in sector {_pairs(sys, idx)} after {max_iter} iterations "
        f"(last omega={z}, residual={abs(f):.3e})")


# -- Markovian evolution -----------------------------------------------------

def _generator_matrix(gen) -> np.ndarray:
    if isinstance(gen, QPGenerator):
        return gen.generator
    return np.asarray(gen, dtype=complex)


def _rk4_step_matrix(G: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step for a linear system, as a matrix."""
    A = h * G
    I = np.eye(G.shape[0])
    A2 = A @ A
    return I + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24


def _run_linear(step: np.ndarray, v0: np.ndarray, n_out: int, sub: int) -> np.ndarray:
    P = np.linalg.matrix_power(step, sub)
    out = np.empty((n_out + 1, len(v0)), dtype=complex)
    out[0] = v0
    for k in range(n_out):
        out[k + 1] = P @ out[k]
    return out


def evolve_markov(gen: Union[QPGenerator, np.ndarray], rho0, grid: TimeGrid,
                  cfg: Optional[SimulationConfig] = None) -> Trajectory:
    """Fixed-step fourth-order Runge-Kutta with step-halving error control.

    The grid step is subdivided until two successive halvings agree to
    ``cfg.ode_tol`` at every output time; the finer solution is returned.
    """
    cfg = cfg or SimulationConfig()
    G = _generator_matrix(gen)
    rho0 = as_density(rho0, cfg)
    d = rho0.shape[0]
    if G.shape != (d * d, d * d):
        raise ValueError(f"generator shape {G.shape} does not match a {d}-level state")
    v0 = rho0.reshape(-1)
    n = grid.n_steps
    sub = 1
    coarse = _run_linear(_rk4_step_matrix(G, grid.step / sub), v0, n, sub)
    for _ in range(MAX_HALVINGS):
        sub *= 2
        fine = _run_linear(_rk4_step_matrix(G, grid.step / sub), v0, n, sub)
        err = float(np.abs(fine - coarse).max()) if n else 0.0
        if err < cfg.ode_tol:
            states = fine.reshape(-1, d, d)
            return Trajectory.from_states(grid.times(), states, cfg, err)
        coarse = fine
    raise ConvergenceError(f"step halving did not reach ode_tol={cfg.ode_tol} (last error {err:.3e})")


# -- memory-kernel evolution -------------------------------------------------

def _volterra(L0: np.ndarray, K: np.ndarray, v0: np.ndarray, h: float, n: int,
              depth: int) -> np.ndarray:
    """Implicit trapezoid in time with a trapezoidal memory integral.

    ``K[j]`` is the kernel at lag ``j * h``; lags beyond ``depth`` are dropped.
    """
    m = len(v0)
    out = np.empty((n + 1, m), dtype=complex)
    out[0] = v0
    A = np.eye(m) - 0.5 * h * (L0 + 0.5 * h * K[0])
    lu = linalg.lu_factor(A)
    # doubled buffer: the newest depth+1 states are always a contiguous slice
    buf = np.zeros((2 * (depth + 1), m), dtype=complex)
    head = depth + 1  # buf[head - 1] is the newest state
    buf[head - 1] = v0
    f_prev = L0 @ v0
    Krev = K[:depth + 1][::-1]  # Krev[-1 - j] is lag j
    for k in range(n):
        nk = k + 1  # step being computed
        lo = max(0, nk - depth)  # oldest history index kept
        count = k + 1 - lo  # stored states used: indices lo..k
        hist = buf[head - count:head]  # states lo..k
        lags = Krev[depth - count:depth]  # lags nk-lo .. 1, matching hist order
        w = np.ones(count)
        w[0] = 0.5  # left end of the (possibly truncated) trapezoid window
        known = h * np.einsum("j,jab,jb->a", w, lags, hist)
        rhs = out[k] + 0.5 * h * (f_prev + known)
        v = linalg.lu_solve(lu, rhs)
        out[nk] = v
        f_prev = L0 @ v + known + 0.5 * h * (K[0] @ v)
        if head == buf.shape[0]:
            buf[:depth] = buf[head - depth:head]
            head = depth
        buf[head] = v
        head += 1
    return out


def evolve_memory(sys: SystemSpec, K: MemoryKernel, rho0, grid: TimeGrid,
                  cfg: Optional[SimulationConfig] = None, verify: bool = True,
                  tail_tol: float = 0.05) -> Trajectory:
    """Integrate the Born master equation with memory.

    The kernel step must divide the grid step. When the ratio is even the
    run is repeated at half the step and the largest difference is stored
    as ``error_estimate``.
    """
    cfg = cfg or SimulationConfig()
    rho0 = as_density(rho0, cfg)
    ratio = grid.step / K.dt
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * ratio:
        raise ValueError(f"kernel step {K.dt} must divide the time step {grid.step}")
    duration = grid.stop - grid.start
    memory = min(cfg.history_depth, duration)
    if memory > K.span + 1e-12 * max(1.0, memory):
        raise HistoryTruncationError(
            f"kernel sampled to {K.span} but the memory window needs {memory}")
    if duration > cfg.history_depth:
        window = K.samples[:int(round(cfg.history_depth / K.dt)) + 1]
        tail = MemoryKernel(K.dt, window, sys).tail_fraction()
        if tail > tail_tol:
            raise HistoryTruncationError(
                f"history_depth={cfg.history_depth} truncates the kernel: "
                f"{tail:.2e} of its weight lies in the last tenth of the window")
    L0 = free_generator(sys)
    v0 = rho0.reshape(-1)
    n = grid.n_steps

    def solve(step_ratio, steps):
        h = K.dt * step_ratio
        Ks = K.samples[::step_ratio]
        depth = min(int(round(memory / h)), len(Ks) - 1, steps)
        return _volterra(L0, Ks, v0, h, steps, max(depth, 1))

    vecs = solve(r, n)
    err = None
    if verify and r % 2 == 0:
        fine = solve(r // 2, 2 * n)[::2]
        err = float(np.abs(fine - vecs).max())
    d = sys.dim
    return Trajectory.from_states(grid.times(), vecs.reshape(-1, d, d), cfg, err)


# -- stationary state --------------------------------------------------------

def steady_state(gen: Union[QPGenerator, np.ndarray], null_tol: float = 1e-9) -> np.ndarray:
    """Density matrix spanning the one-dimensional null space of ``gen``."""
    G = _generator_matrix(gen)
    _, s, vh = np.linalg.svd(G)
    scale = s[0] if s[0] > 0 else 1.0
    null = int(np.sum(s < null_tol * scale))
    if null != 1:
        raise DegenerateSteadyStateError(f"generator null space has dimension {null}, expected 1")
    rho = devectorize(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho)
