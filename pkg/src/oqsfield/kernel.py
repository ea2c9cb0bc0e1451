"""Second-order (Born) kernels in time and frequency, and their Markov reduction.

All superoperators use the row-pair-major convention of :mod:`oqsfield.core`.
The kernel has four terms; with ``U = exp(-i H_S tau)`` for ``tau > 0``::

    K(tau) rho = - sum_ab [ S^a U S^b rho U^+ D^ab(tau)
                          + U rho S^a U^+ S^b D^ab(-tau)
                          - S^a U rho S^b U^+ D^ba(-tau)
                          - U S^a rho U^+ S^b D^ba(tau) ]

In frequency space the time integrals become resolvents of the bath
spectrum, ``R^ab(w) = int dw'/2pi D~^ab(w') / (w - w')``. On the real axis
``R = J -/+ (i/2) D~``, which splits the kernel into a dissipator ``L~``
(the ``D~`` parts) and a shift ``Delta~`` (the principal values ``J``) with
``K~ = L~ + i Delta~``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .bath import BathCorrelation, BathSpec
from .core import (SimulationConfig, SystemSpec, max_norm, resolve_cutoff, sandwich,
                   swap_permutation)
from .quadrature import richardson_zero

CHANNEL_PAIRS = ((1, 2), (2, 1))


def _correlation(bath, cfg: Optional[SimulationConfig] = None,
                 sys: Optional[SystemSpec] = None) -> BathCorrelation:
    """Accept either a ready correlation object or a bath spec to wrap."""
    if isinstance(bath, BathCorrelation):
        return bath
    cfg = cfg or SimulationConfig()
    return BathCorrelation(bath, resolve_cutoff(cfg, sys, bath.model.scale), cfg.pv_exclusion)


def rwa_mask(sys: SystemSpec, tol: float) -> np.ndarray:
    """Boolean ``(d^2, d^2)`` selector ``|E_pp' - E_qq'| < tol``."""
    w = sys.pair_energies()
    return np.abs(w[:, None] - w[None, :]) < tol


def _match_tol(sys: SystemSpec, cfg: Optional[SimulationConfig]) -> float:
    cfg = cfg or SimulationConfig()
    return cfg.energy_match_tol * max(1.0, sys.energy_scale())


# -- time domain -------------------------------------------------------------

def born_kernel_time(sys: SystemSpec, bath, t: float,
                     cfg: Optional[SimulationConfig] = None) -> np.ndarray:
    """Born kernel ``K(t)`` as a ``(d^2, d^2)`` superoperator.

    Built from operator products, so it serves as an independent check of
    the vectorised sampler in :func:`sample_memory_kernel`. ``t = 0`` gives
    the right limit ``K(0+)``; negative times return zero (retarded kernel).
    """
    corr = _correlation(bath, cfg, sys)
    d = sys.dim
    if t < 0:
        return np.zeros((d * d, d * d), dtype=complex)
    U = np.diag(np.exp(-1j * sys.E * t))
    Ud = U.conj().T
    out = np.zeros((d * d, d * d), dtype=complex)
    for a, b in CHANNEL_PAIRS:
        Sa, Sb = sys.coupling(a), sys.coupling(b)
        dab_p, dab_m = corr.time(a, b, t), corr.time(a, b, -t)
        dba_p, dba_m = corr.time(b, a, t), corr.time(b, a, -t)
        out -= sandwich(Sa @ U @ Sb, Ud) * dab_p
        out -= sandwich(U, Sa @ Ud @ Sb) * dab_m
        out += sandwich(Sa @ U, Sb @ Ud) * dba_m
        out += sandwich(U @ Sa, Ud @ Sb) * dba_p
    return out


def _kernel_samples(sys: SystemSpec, corr: BathCorrelation, ts: np.ndarray) -> np.ndarray:
    """Element-wise kernel on many times at once, shape ``(n, d^2, d^2)``."""
    d = sys.dim
    E = sys.E
    w = E[:, None] - E[None, :]
    ph = np.exp(-1j * ts[:, None, None] * w[None, :, :])  # ph[t, a, b] = e^{-i E_ab t}
    K = np.zeros((len(ts), d, d, d, d), dtype=complex)  # [t, p, p', q, q']
    eye = np.eye(d)
    for a, b in CHANNEL_PAIRS:
        Sa, Sb = sys.coupling(a), sys.coupling(b)
        dab_p, dab_m = corr.time(a, b, ts), corr.time(a, b, -ts)
        dba_p, dba_m = corr.time(b, a, ts), corr.time(b, a, -ts)
        # -delta_{p'q'} sum_l S^a_pl S^b_lq e^{-i E_lp' t} D^ab(t)
        A1 = np.einsum("pl,lq,tlr,t->tpqr", Sa, Sb, ph, dab_p)
        K -= np.einsum("tpqr,rs->tprqs", A1, eye)
        # -delta_pq sum_l S^a_q'l S^b_lp' e^{-i E_pl t} D^ab(-t)
        A2 = np.einsum("sl,lr,tpl,t->tpsr", Sa, Sb, ph, dab_m)
        K -= np.einsum("tpsr,pq->tprqs", A2, eye)
        # +S^a_pq S^b_q'p' e^{-i E_qp' t} D^ba(-t)
        K += np.einsum("pq,sr,tqr,t->tprqs", Sa, Sb, ph, dba_m)
        # +S^a_pq S^b_q'p' e^{-i E_pq' t} D^ba(t)
        K += np.einsum("pq,sr,tps,t->tprqs", Sa, Sb, ph, dba_p)
    return K.reshape(len(ts), d * d, d * d)


@dataclass(frozen=True)
class MemoryKernel:
    """Born kernel sampled on ``t_j = j * dt``, ``j = 0 .. n-1``."""

    dt: float
    samples: np.ndarray
    system: SystemSpec
    bath: Optional[BathSpec] = None

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def span(self) -> float:
        return self.dt * (self.n_samples - 1)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_samples)

    def subsample(self, ratio: int) -> "MemoryKernel":
        return MemoryKernel(self.dt * ratio, self.samples[::ratio], self.system, self.bath)

    def tail_fraction(self, fraction: float = 0.1) -> float:
        """Share of the integrated ``max|K(t)|`` found in the last ``fraction`` of the span."""
        norms = np.abs(self.samples).max(axis=(1, 2))
        total = norms.sum()
        if total == 0:
            return 0.0
        k = max(1, int(math.ceil(fraction * self.n_samples)))
        return float(norms[-k:].sum() / total)


def sample_memory_kernel(sys: SystemSpec, bath, dt: float, span: float,
                         cfg: Optional[SimulationConfig] = None,
                         chunk: int = 4096) -> MemoryKernel:
    """Sample ``K(t)`` on ``[0, span]`` with step ``dt``."""
    if not dt > 0:
        raise ValueError("kernel step must be positive")
    corr = _correlation(bath, cfg, sys)
    n = int(round(span / dt)) + 1
    ts = dt * np.arange(n)
    parts = [_kernel_samples(sys, corr, ts[i:i + chunk]) for i in range(0, n, chunk)]
    return MemoryKernel(dt, np.concatenate(parts), sys, corr.bath)


# -- frequency domain --------------------------------------------------------

def _assemble(sys: SystemSpec, row_freq: np.ndarray, f_plus: Callable, f_minus: Callable,
              mask: Optional[np.ndarray], rows=None) -> np.ndarray:
    """Generic four-term frequency kernel.

    ``f_plus(a, b, x)`` and ``f_minus(a, b, x)`` give the bath factor of the
    terms continued from above and below the real axis; ``row_freq[pp']`` is
    the frequency at which row ``pp'`` is evaluated. Rows outside ``rows``
    (when given) are left at zero.
    """
    d = sys.dim
    E = sys.E
    Ebohr = E[:, None] - E[None, :]
    K = np.zeros((d, d, d, d), dtype=complex)
    W = np.asarray(row_freq).reshape(d, d)
    keep = None if rows is None else {int(r) for r in rows}
    for a, b in CHANNEL_PAIRS:
        Sa, Sb = sys.coupling(a), sys.coupling(b)
        for p in range(d):
            for pp in range(d):
                if keep is not None and p * d + pp not in keep:
                    continue
                w = W[p, pp]
                for l in range(d):
                    # term 1: -delta_{p'q'} S^a_pl S^b_lq F+^{ab}(w + E_p'l)
                    row = Sa[p, l] * Sb[l, :]
                    if np.any(row):
                        K[p, pp, :, pp] -= row * f_plus(a, b, w + Ebohr[pp, l])
                    # term 2: -delta_pq S^a_q'l S^b_lp' F-^{ab}(-w - E_lp)
                    col = Sa[:, l] * Sb[l, pp]
                    if np.any(col):
                        K[p, pp, p, :] -= col * f_minus(a, b, -w - Ebohr[l, p])
                for q in range(d):
                    if Sa[p, q] == 0:
                        continue
                    for qq in range(d):
                        s = Sa[p, q] * Sb[qq, pp]
                        if s == 0:
                            continue
                        # term 3: +S^a_pq S^b_q'p' F-^{ba}(-w - E_p'q)
                        K[p, pp, q, qq] += s * f_minus(b, a, -w - Ebohr[pp, q])
                        # term 4: +S^a_pq S^b_q'p' F+^{ba}(w + E_q'p)
                        K[p, pp, q, qq] += s * f_plus(b, a, w + Ebohr[qq, p])
    K = K.reshape(d * d, d * d)
    if mask is not None:
        K = np.where(mask, K, 0.0)
    return K


def _row_freq(sys: SystemSpec, omega) -> np.ndarray:
    omega = np.asarray(omega)
    if omega.ndim == 0:
        return np.full(sys.dim ** 2, omega, dtype=omega.dtype if np.iscomplexobj(omega) else float)
    if omega.shape != (sys.dim ** 2,):
        raise ValueError("per-row frequencies need length d^2")
    return omega


def dissipator_at(sys: SystemSpec, bath, omega, rwa: bool = True,
                  cfg: Optional[SimulationConfig] = None) -> np.ndarray:
    """Dissipative part ``L~(omega)``: bath spectra read at shifted arguments.

    ``omega`` may be a scalar or one frequency per superoperator row.
    """
    corr = _correlation(bath, cfg, sys)
    half = lambda a, b, x: 0.5 * corr.freq(a, b, float(np.real(x)))
    mask = rwa_mask(sys, _match_tol(sys, cfg)) if rwa else None
    return _assemble(sys, _row_freq(sys, omega), half, half, mask)


def shift_at(sys: SystemSpec, bath, omega, rwa: bool = True,
             cfg: Optional[SimulationConfig] = None) -> np.ndarray:
    """Shift ``Delta~(omega)`` built from principal-value integrals of the spectra."""
    corr = _correlation(bath, cfg, sys)
    mask = rwa_mask(sys, _match_tol(sys, cfg)) if rwa else None
    return _assemble(sys, _row_freq(sys, omega),
                     lambda a, b, x: corr.pv(a, b, float(np.real(x))),
                     lambda a, b, x: -corr.pv(a, b, float(np.real(x))),
                     mask)


def kernel_continued(sys: SystemSpec, bath, omega: complex, rwa: bool = True,
                     cfg: Optional[SimulationConfig] = None, rows=None) -> np.ndarray:
    """``K~(omega)`` for ``eps -> 0+`` and its analytic continuation to complex ``omega``.

    On the real axis this equals ``dissipator_at + 1j * shift_at``. ``rows``
    restricts the evaluation to a subset of superoperator rows.
    """
    corr = _correlation(bath, cfg, sys)
    mask = rwa_mask(sys, _match_tol(sys, cfg)) if rwa else None
    omega = complex(omega)
    return _assemble(sys, _row_freq(sys, omega),
                     lambda a, b, x: 1j * corr.resolvent(a, b, x, +1),
                     lambda a, b, x: -1j * corr.resolvent(a, b, x, -1),
                     mask, rows)


@dataclass
class FrequencyKernel:
    """Callable ``(omega, rows=None) -> K~(omega)`` for spectral analysis."""

    system: SystemSpec
    correlation: BathCorrelation
    rwa: bool = True
    cfg: Optional[SimulationConfig] = None

    def __call__(self, omega, rows=None) -> np.ndarray:
        return kernel_continued(self.system, self.correlation, omega, self.rwa, self.cfg, rows)


def born_kernel_freq(sys: SystemSpec, bath, omega: float, eps: float, rwa: bool = True,
                     extrapolate: bool = True, cfg: Optional[SimulationConfig] = None,
                     levels: int = 4) -> np.ndarray:
    """Fourier-space Born kernel with the ``omega + i eps`` prescription.

    Every resolvent is a Cauchy integral over the bath spectrum evaluated by
    adaptive quadrature at distance ``eps`` from the real axis. With
    ``extrapolate`` the result is Richardson-extrapolated to ``eps -> 0``
    from ``eps, eps/2, ..., eps/2^(levels-1)``.
    """
    if not eps > 0:
        raise ValueError("regulator eps must be positive")
    corr = _correlation(bath, cfg, sys)
    mask = rwa_mask(sys, _match_tol(sys, cfg)) if rwa else None
    row = _row_freq(sys, float(omega))

    def at(e):
        cache = {}

        def R(a, b, w):
            key = (a, b, w)
            if key not in cache:
                cache[key] = corr.resolvent(a, b, w, 1 if w.imag > 0 else -1)
            return cache[key]

        return _assemble(sys, row + 1j * e,
                         lambda a, b, x: 1j * R(a, b, x),
                         lambda a, b, x: -1j * R(a, b, x),
                         mask)

    if not extrapolate:
        return at(eps)
    hs = [eps / 2 ** k for k in range(levels)]
    return richardson_zero(hs, [at(h) for h in hs])


# -- quasi-particle generator ------------------------------------------------

@dataclass(frozen=True)
class QPGenerator:
    """Constant generator from locking each row to its unperturbed pole ``E_pp'``.

    ``generator = free + 1j * shift + dissipator``. The shift entries are
    real whenever the couplings are real in the energy basis.
    """

    free: np.ndarray
    shift: np.ndarray
    dissipator: np.ndarray
    rwa: bool = True
    degenerate_clusters: tuple = ()
    near_misses: tuple = ()

    @property
    def generator(self) -> np.ndarray:
        return self.free + 1j * self.shift + self.dissipator

    @property
    def kernel(self) -> np.ndarray:
        """``K~`` at the locked frequencies, without the free part."""
        return self.dissipator + 1j * self.shift


def free_generator(sys: SystemSpec) -> np.ndarray:
    return np.diag(-1j * sys.pair_energies())


def _degeneracy_report(sys: SystemSpec, tol: float):
    w = sys.pair_energies()
    order = np.argsort(w, kind="stable")
    clusters, current = [], [int(order[0])]
    for i in order[1:]:
        if abs(w[i] - w[current[-1]]) < tol:
            current.append(int(i))
        else:
            clusters.append(tuple(current))
            current = [int(i)]
    clusters.append(tuple(current))
    # distinct poles so close that a looser tolerance would merge them
    near = tuple((int(i), int(j)) for i in range(len(w)) for j in range(i + 1, len(w))
                 if tol <= abs(w[i] - w[j]) < 1e3 * tol)
    return tuple(c for c in clusters if len(c) > 1), near


def qp_generator(sys: SystemSpec, bath, rwa: bool = True,
                 cfg: Optional[SimulationConfig] = None) -> QPGenerator:
    """Markovian generator with row ``pp'`` evaluated at ``omega = E_pp'``."""
    corr = _correlation(bath, cfg, sys)
    tol = _match_tol(sys, cfg)
    w = sys.pair_energies()
    L = dissipator_at(sys, corr, w, rwa=rwa, cfg=cfg)
    D = shift_at(sys, corr, w, rwa=rwa, cfg=cfg)
    clusters, near = _degeneracy_report(sys, tol)
    return QPGenerator(free_generator(sys), D, L, rwa, clusters, near)


# -- standard (GKSL) forms ---------------------------------------------------

def gksl_builder(H, jumps: Sequence[Sequence[np.ndarray]], gammas: Sequence[np.ndarray],
                 herm_tol: float = 1e-12) -> np.ndarray:
    """Superoperator of ``-i[H, rho] + sum_k sum_ab g_k^ab (S_k^b rho S_k^a+ - {S_k^a+ S_k^b, rho}/2)``.

    Parameters
    ----------
    H : (d, d) Hermitian array
    jumps : list of operator lists
        ``jumps[k]`` holds the operators ``S_k^a`` sharing the rate matrix ``gammas[k]``.
    gammas : list of (m_k, m_k) Hermitian arrays
    """
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    eye = np.eye(d)
    M = -1j * (sandwich(H, eye) - sandwich(eye, H))
    if len(jumps) != len(gammas):
        raise ValueError("need one rate matrix per jump set")
    for ops, g in zip(jumps, gammas):
        g = np.atleast_2d(np.asarray(g, dtype=complex))
        if g.shape != (len(ops), len(ops)):
            raise ValueError(f"rate matrix shape {g.shape} does not match {len(ops)} operators")
        if np.abs(g - g.conj().T).max() > herm_tol * max(1.0, np.abs(g).max()):
            raise ValueError("rate matrix must be Hermitian")
        for a, Sa in enumerate(ops):
            Sad = np.asarray(Sa, dtype=complex).conj().T
            for b, Sb in enumerate(ops):
                if g[a, b] == 0:
                    continue
                Sb = np.asarray(Sb, dtype=complex)
                P = Sad @ Sb
                M += g[a, b] * (sandwich(Sb, Sad) - 0.5 * sandwich(P, eye) - 0.5 * sandwich(eye, P))
    return M


def bohr_components(sys: SystemSpec, op: np.ndarray, tol: float) -> Dict[float, np.ndarray]:
    """Split ``op`` into ``sum_w op(w)`` with ``op(w) = sum_{E_k' - E_k = w} P_k op P_k'``."""
    E = sys.E
    parts: Dict[float, np.ndarray] = {}
    keys: List[float] = []
    for k in range(sys.dim):
        for kk in range(sys.dim):
            if op[k, kk] == 0:
                continue
            w = E[kk] - E[k]
            key = next((x for x in keys if abs(x - w) < tol), None)
            if key is None:
                key = w
                keys.append(w)
                parts[key] = np.zeros_like(op)
            parts[key][k, kk] = op[k, kk]
    return parts


def standard_lindblad_dissipator(sys: SystemSpec, bath, rwa: bool = True,
                                 cfg: Optional[SimulationConfig] = None) -> np.ndarray:
    """Dissipator of the textbook secular Born-Markov derivation.

    Each coupling is split into Bohr-frequency components ``S^a(w)`` and the
    rates are ``gamma_ab(w) = D~^{a' b}(w)`` with ``a'`` the conjugate channel.
    Only the secular form exists, so ``rwa=False`` is rejected.
    """
    if not rwa:
        raise ValueError("the standard dissipator is defined only in secular (RWA) form")
    corr = _correlation(bath, cfg, sys)
    tol = _match_tol(sys, cfg)
    comps = [bohr_components(sys, np.asarray(sys.coupling(a)), tol) for a in (1, 2)]
    freqs: List[float] = []
    for c in comps:
        for w in c:
            if not any(abs(w - x) < tol for x in freqs):
                freqs.append(w)
    jumps, gammas = [], []
    zero = np.zeros((sys.dim, sys.dim), dtype=complex)
    for w in freqs:
        ops = [next((v for k, v in c.items() if abs(k - w) < tol), zero) for c in comps]
        g = np.zeros((2, 2))
        for ia, a in enumerate((1, 2)):
            abar = sys.conjugate_pairs[ia] + 1
            for ib, b in enumerate((1, 2)):
                g[ia, ib] = corr.freq(abar, b, w)
        jumps.append(ops)
        gammas.append(g)
    return gksl_builder(np.zeros((sys.dim, sys.dim)), jumps, gammas)


# -- diagnostics -------------------------------------------------------------

def symmetry_defect(M: np.ndarray, M_mirror: Optional[np.ndarray] = None) -> float:
    """``max |M_{pp',qq'}* - N_{p'p,q'q}|`` with ``N = M_mirror`` (default ``M``)."""
    N = M if M_mirror is None else M_mirror
    perm = swap_permutation(math.isqrt(M.shape[0]))
    return float(np.abs(M.conj() - N[np.ix_(perm, perm)]).max())


def relative(defect: float, M: np.ndarray) -> float:
    scale = max_norm(M)
    return defect / scale if scale > 0 else defect
