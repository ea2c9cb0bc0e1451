"""Wick contractions for the bath operators and a brute-force Fock-space oracle.

An operator string is an ordered product of bath operators ``B^{a}(t)``
with ``a = 1`` for ``B = sum_k lambda_k b_k`` and ``a = 2`` for
``B^dagger``. Thermal averages of such strings are computed in two
independent ways: as a sum over perfect matchings of two-point functions,
and by direct matrix products on a truncated Fock space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from scipy import sparse

from .bath import BathCorrelation, BathSpec, DiscreteModes, VACUUM

MAX_STRING_LENGTH = 12
MAX_FOCK_DIM = 4096
TRUNCATION_THRESHOLD = 1e-8


class WickLimitError(ValueError):
    """Operator string or Fock space exceeds the configured size limit."""


class TruncationError(RuntimeError):
    """Thermal weight at the photon cutoff is too large for a faithful trace."""


@dataclass(frozen=True)
class OperatorString:
    """Ordered bath operators as ``(channel, time)`` tokens."""

    tokens: tuple = ()

    def __post_init__(self):
        toks = tuple((int(a), float(t)) for a, t in self.tokens)
        for a, t in toks:
            if a not in (1, 2):
                raise ValueError(f"token channel must be 1 (B) or 2 (B^dagger), got {a}")
            if not math.isfinite(t):
                raise ValueError("token times must be finite")
        object.__setattr__(self, "tokens", toks)

    def __len__(self):
        return len(self.tokens)

    @property
    def channels(self) -> Tuple[int, ...]:
        return tuple(a for a, _ in self.tokens)

    @property
    def times(self) -> Tuple[float, ...]:
        return tuple(t for _, t in self.tokens)


def perfect_matchings(n: int) -> Iterator[List[Tuple[int, int]]]:
    """All perfect matchings of ``range(n)`` as lists of ``(i, j)`` with ``i < j``.

    The first unpaired position is always paired next, so each matching is
    produced exactly once and pairs come out sorted by their first index.
    """
    if n % 2:
        return

    def rec(free):
        if not free:
            yield []
            return
        i, rest = free[0], free[1:]
        for k, j in enumerate(rest):
            for tail in rec(rest[:k] + rest[k + 1:]):
                yield [(i, j)] + tail

    yield from rec(tuple(range(n)))


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def wick_contraction_sum(s: OperatorString, corr: BathCorrelation,
                         max_n: int = MAX_STRING_LENGTH) -> complex:
    """Thermal average of ``s`` as a sum over pairwise contractions.

    Each pair ``(i, j)`` with ``i < j`` contributes ``D^{a_i a_j}(t_i - t_j)``,
    keeping the operator order of the string regardless of the times.

    Parameters
    ----------
    s : OperatorString
    corr : BathCorrelation
        Two-point functions of the bath the string lives in.
    max_n : int
        Longest string accepted; the number of matchings is ``(n-1)!!``.
    """
    n = len(s)
    if n > max_n:
        raise WickLimitError(f"string length {n} exceeds the limit {max_n}")
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        return 0j
    a, t = s.channels, s.times
    pair = {}
    for i in range(n):
        for j in range(i + 1, n):
            pair[i, j] = corr.time(a[i], a[j], t[i] - t[j])
    total = 0j
    count = 0
    for m in perfect_matchings(n):
        total += math.prod(pair[ij] for ij in m)
        count += 1
    assert count == double_factorial(n - 1), "matching enumeration is incomplete"
    return complex(total)


@dataclass(frozen=True)
class FockOracle:
    """Truncated Fock space of a few discrete bath modes.

    Parameters
    ----------
    modes : sequence of (lambda, Omega)
    n_max : int
        Highest photon number kept per mode.
    beta : float
        Inverse temperature; ``VACUUM`` for the ground state.
    max_dim : int
        Largest total Hilbert-space dimension accepted.
    """

    modes: tuple
    n_max: int = 40
    beta: float = VACUUM
    max_dim: int = MAX_FOCK_DIM

    def __post_init__(self):
        object.__setattr__(self, "modes", DiscreteModes(self.modes).modes)
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.dim > self.max_dim:
            raise WickLimitError(f"Fock dimension {self.dim} exceeds the limit {self.max_dim}")

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** len(self.modes)

    def bath(self) -> BathSpec:
        return BathSpec(DiscreteModes(self.modes), self.beta)

    def correlation(self) -> BathCorrelation:
        """Exact two-point functions of the same (untruncated) bath."""
        return BathCorrelation(self.bath())

    def mode_populations(self) -> np.ndarray:
        """Truncated thermal distribution over ``0..n_max`` for each mode."""
        levels = np.arange(self.n_max + 1)
        rows = []
        for _, om in self.modes:
            if math.isinf(self.beta):
                w = (levels == 0).astype(float)
            else:
                w = np.exp(-self.beta * om * levels)
            rows.append(w / w.sum())
        return np.array(rows)

    def truncation_error(self) -> float:
        """Largest thermal weight sitting on the top kept level."""
        return float(self.mode_populations()[:, -1].max())

    def _mode_operators(self):
        n = self.n_max + 1
        b = sparse.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, format="csr")
        eye = sparse.identity(n, format="csr")
        ops = []
        for k in range(len(self.modes)):
            factors = [eye] * len(self.modes)
            factors[k] = b
            op = factors[0]
            for f in factors[1:]:
                op = sparse.kron(op, f, format="csr")
            ops.append(op)
        return ops

    def thermal_diagonal(self) -> np.ndarray:
        pops = self.mode_populations()
        diag = pops[0]
        for p in pops[1:]:
            diag = np.kron(diag, p)
        return diag


def thermal_expectation_bruteforce(oracle: FockOracle, s: OperatorString,
                                   check_truncation: bool = True) -> complex:
    """``Tr[rho_B B^{a_1}(t_1) ... B^{a_n}(t_n)]`` on the truncated Fock space."""
    if check_truncation:
        err = oracle.truncation_error()
        if err > TRUNCATION_THRESHOLD:
            raise TruncationError(
                f"population {err:.3e} at n_max={oracle.n_max} exceeds {TRUNCATION_THRESHOLD}")
    if len(s) == 0:
        return 1.0 + 0j
    bs = oracle._mode_operators()
    bds = [b.T.tocsr() for b in bs]
    lam = np.array([l for l, _ in oracle.modes])
    om = np.array([o for _, o in oracle.modes])

    def token(a, t):
        if a == 1:
            ph = lam * np.exp(-1j * om * t)
            return sum(c * b for c, b in zip(ph, bs))
        ph = lam * np.exp(1j * om * t)
        return sum(c * b for c, b in zip(ph, bds))

    # right-to-left product keeps every intermediate sparse and banded
    prod = token(*s.tokens[-1])
    for a, t in reversed(s.tokens[:-1]):
        prod = token(a, t) @ prod
    return complex(np.dot(oracle.thermal_diagonal(), prod.diagonal()))


@dataclass
class WickReport:
    """Per-length maximum relative deviation between the two averages."""

    max_deviation: float
    by_length: Dict[int, float] = field(default_factory=dict)
    n_strings: int = 0
    truncation_error: float = 0.0


def random_string(rng: np.random.Generator, n: int, t_max: float = 2.0,
                  balanced: bool = True) -> OperatorString:
    """Random string of length ``n``; balanced strings carry equal numbers of B and B^dagger."""
    if balanced and n % 2 == 0:
        ch = np.array([1] * (n // 2) + [2] * (n // 2))
        rng.shuffle(ch)
    else:
        ch = rng.integers(1, 3, size=n)
    times = rng.uniform(0.0, t_max, size=n)
    return OperatorString(tuple(zip(ch.tolist(), times.tolist())))


def verify_wick(oracle: FockOracle, corr: BathCorrelation, max_n: int,
                strings_per_length: int = 5, seed: int = 0, eps: float = 1e-12,
                t_max: float = 2.0) -> WickReport:
    """Compare contraction sums with brute-force traces on random strings.

    Deviation is ``|brute - wick| / (|brute| + eps)``; strings of every even
    length ``2..max_n`` are drawn from a seeded generator.
    """
    if max_n > 8:
        raise WickLimitError("verify_wick supports max_n <= 8")
    if max_n < 2 or max_n % 2:
        raise ValueError("max_n must be a positive even integer")
    rng = np.random.default_rng(seed)
    by_length = {}
    count = 0
    for n in range(2, max_n + 1, 2):
        worst = 0.0
        for _ in range(strings_per_length):
            s = random_string(rng, n, t_max)
            bf = thermal_expectation_bruteforce(oracle, s)
            wk = wick_contraction_sum(s, corr)
            worst = max(worst, abs(bf - wk) / (abs(bf) + eps))
            count += 1
        by_length[n] = worst
    return WickReport(max(by_length.values()), by_length, count, oracle.truncation_error())


def strings_of(channels: Sequence[int], times: Sequence[float]) -> OperatorString:
    return OperatorString(tuple(zip(channels, times)))
