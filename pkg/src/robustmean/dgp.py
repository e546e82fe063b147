"""Seeded samplers for the five benchmark data-generating processes.

Reproducibility contract: every draw comes from a Philox4x64 counter-based
bit generator keyed by the seed, consumed as uniform doubles
(``next_uint64 >> 11`` times 2**-53, numpy's standard conversion), and all
distributions are derived from those uniforms by documented transforms:

- normals: Box-Muller pairs  z1 = sqrt(-2 log(1-u1)) cos(2 pi u2),
  z2 = the sine twin; the unused half of an odd request is discarded;
- chi-square with even integer dof: sum of dof/2 draws of -2 log(1-u);
  odd integer dof adds one squared normal; non-integer dof uses the
  Marsaglia-Tsang gamma squeeze (normal/uniform pairs per round);
- Pareto survival u^(-a): inverse CDF on v = 1-u;
- Rademacher signs: u < 0.5 maps to -1.

Streams are therefore a pure function of (spec, n, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gaussian",
    "CenteredLogNormal",
    "StudentT",
    "SymmetricPareto",
    "ContamRandom",
    "ContamAdversarial",
    "ContamBlockAware",
    "DGP_KINDS",
    "make_dgp",
    "sample",
]


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _normals(gen: np.random.Generator, n: int) -> np.ndarray:
    half = (n + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 in (0, 1], no log(0)
    ang = 2.0 * np.pi * u2
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:n]


def _exponentials(gen: np.random.Generator, shape) -> np.ndarray:
    return -np.log1p(-gen.random(shape))


def _gamma_mt(gen: np.random.Generator, a: float, n: int) -> np.ndarray:
    """Marsaglia-Tsang gamma(shape a >= 1) via batched rejection rounds.

    Rounds propose for all unfilled slots at once; consumption order is a
    fixed function of the stream, so output is reproducible.
    """
    out = np.empty(n)
    unfilled = np.arange(n)
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while unfilled.size:
        m = unfilled.size
        x = _normals(gen, m)
        u = gen.random(m)
        v = np.power(1.0 + c * x, 3)
        ok = v > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = ok & (np.log(u) < 0.5 * x * x + d - d * v + d * np.log(np.where(ok, v, 1.0)))
        out[unfilled[accept]] = d * v[accept]
        unfilled = unfilled[~accept]
    return out


def _chi2(gen: np.random.Generator, nu: float, n: int) -> np.ndarray:
    if abs(nu - round(nu)) < 1e-12:
        k = int(round(nu))
        v = np.zeros(n)
        if k >= 2:
            v = 2.0 * np.sum(_exponentials(gen, (n, k // 2)), axis=1)
        if k % 2 == 1:
            v = v + np.square(_normals(gen, n))
        return v
    return 2.0 * _gamma_mt(gen, nu / 2.0, n)


def _rademacher(gen: np.random.Generator, n: int) -> np.ndarray:
    return np.where(gen.random(n) < 0.5, -1.0, 1.0)


@dataclass(frozen=True)
class Gaussian:
    """X = mu + sigma Z."""

    mu_star: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        return self.mu_star + self.sigma * _normals(gen, n)


@dataclass(frozen=True)
class CenteredLogNormal:
    """Skewed heavy tails, mean preserved: X = mu + (exp(tau Y) - exp(tau^2/2))."""

    mu_star: float = 1.0
    tau: float = 1.5

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        y = _normals(gen, n)
        return self.mu_star + (np.exp(self.tau * y) - math.exp(self.tau**2 / 2.0))


@dataclass(frozen=True)
class StudentT:
    """Symmetric heavy tails with finite variance: X = mu + s Z / sqrt(V/nu)."""

    mu_star: float = 1.0
    s: float = 1.0
    nu: float = 4.0

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"s must be positive, got {self.s}")
        if self.nu <= 2:
            raise ValueError(f"nu must exceed 2, got {self.nu}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        z = _normals(gen, n)
        v = _chi2(gen, self.nu, n)
        return self.mu_star + self.s * z / np.sqrt(v / self.nu)


@dataclass(frozen=True)
class SymmetricPareto:
    """Infinite variance, finite mean: X = mu + S U, P(U > u) = u**(-a), u >= 1."""

    mu_star: float = 1.0
    tail_a: float = 1.5

    def __post_init__(self):
        if not (1.0 < self.tail_a < 2.0):
            raise ValueError(f"tail index must be in (1, 2), got {self.tail_a}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        s = _rademacher(gen, n)
        v = 1.0 - gen.random(n)  # uniform on (0, 1]
        u = np.power(v, -1.0 / self.tail_a)
        return self.mu_star + s * u


@dataclass(frozen=True)
class ContamRandom:
    """Mean-preserving contamination: each point independently becomes
    mu +/- M with probability kappa (equiprobable sign)."""

    mu_star: float = 1.0
    sigma0: float = 1.0
    kappa: float = 0.05
    M: float = 100.0

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not (0.0 < self.kappa < 1.0):
            raise ValueError(f"kappa must be in (0, 1), got {self.kappa}")
        if self.M <= 0:
            raise ValueError(f"M must be positive, got {self.M}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        x = self.mu_star + self.sigma0 * _normals(gen, n)
        flip = gen.random(n) < self.kappa
        signs = _rademacher(gen, n)
        return np.where(flip, self.mu_star + signs * self.M, x)


@dataclass(frozen=True)
class ContamAdversarial:
    """One-sided corruption: exactly floor(kappa n) points replaced by mu + M.

    The first indices of the clean draw are the victims; estimators under
    test are permutation-invariant or reshuffle internally, so the placement
    is an arbitrary deterministic choice.  The realized sample mean is
    shifted: the nominal center remains mu_star.
    """

    mu_star: float = 1.0
    sigma0: float = 1.0
    kappa: float = 0.05
    M: float = 100.0

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not (0.0 < self.kappa < 1.0):
            raise ValueError(f"kappa must be in (0, 1), got {self.kappa}")

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        x = self.mu_star + self.sigma0 * _normals(gen, n)
        x[: int(self.kappa * n)] = self.mu_star + self.M
        return x


@dataclass(frozen=True)
class ContamBlockAware:
    """Adversary aimed at blockwise aggregation.

    The first m*k samples (m = floor(n/k), leftovers untouched) are viewed
    as k consecutive size-m blocks; the first ceil(k/2) blocks each get one
    outlier mu + M at their first position, optionally capped by a global
    budget.
    """

    mu_star: float = 1.0
    sigma0: float = 1.0
    k: int = 10
    M: float = 1e6
    budget: int | None = None

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def victim_indices(self, n: int) -> np.ndarray:
        m = n // self.k
        if m == 0:
            return np.array([], dtype=int)
        r = math.ceil(self.k / 2)
        if self.budget is not None:
            r = min(r, self.budget)
        return np.arange(r) * m

    def sample(self, n: int, seed: int) -> np.ndarray:
        gen = _generator(seed)
        x = self.mu_star + self.sigma0 * _normals(gen, n)
        x[self.victim_indices(n)] = self.mu_star + self.M
        return x


DGP_KINDS = {
    "gaussian": Gaussian,
    "lognormal": CenteredLogNormal,
    "student_t": StudentT,
    "pareto": SymmetricPareto,
    "contam_random": ContamRandom,
    "contam_adversarial": ContamAdversarial,
    "contam_block": ContamBlockAware,
}


def make_dgp(kind: str, **params):
    """Build a process by kind name, e.g. make_dgp('gaussian', sigma=2.0)."""
    key = kind.lower().replace("-", "_")
    if key not in DGP_KINDS:
        raise ValueError(f"unknown process {kind!r}; choose from {sorted(DGP_KINDS)}")
    return DGP_KINDS[key](**params)


def sample(spec, n: int, seed: int) -> np.ndarray:
    """Draw n points from a process spec; deterministic in (spec, n, seed)."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    return spec.sample(n, int(seed))
