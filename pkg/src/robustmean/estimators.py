"""Location estimators: block plans, median-of-means, the blockwise
adaptive-loss estimator, theory tunings, the central-root estimator, and a
registry of named estimators for the benchmark harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .calibrate import CalibConfig, DegenerateDataError, FitResult, alternate_fit
from .gnc import GncConfig, gnc_irls, m_estimate_fixed, weighted_mean
from .loss import ALPHA_WELSCH, drho_deps

__all__ = [
    "BlockPlan",
    "TheoryTuning",
    "EstimationError",
    "NoCentralRootError",
    "MultipleRootsError",
    "UnimplementedEstimatorError",
    "mom",
    "default_block_count",
    "are",
    "are_blocks",
    "are_ht_plan",
    "fv_tuning",
    "central_root",
    "gnc_tls",
    "make_estimator",
    "ESTIMATOR_NAMES",
    "RESERVED_ESTIMATORS",
]


class EstimationError(RuntimeError):
    """An estimator could not produce a value on this sample."""


class NoCentralRootError(EstimationError):
    """The empirical score has no zero inside the pilot interval."""


class MultipleRootsError(EstimationError):
    """The empirical score changes sign more than once inside the interval."""


class UnimplementedEstimatorError(NotImplementedError):
    """Reserved estimator name whose defining loss is not specified."""


@dataclass(frozen=True)
class BlockPlan:
    """Partition of n samples into k disjoint blocks.

    Sequential assignment slices the sample in order; a shuffle seed first
    permutes the indices with a counter-based generator so the partition is
    a reproducible function of (n, seed) alone.  When k does not divide n,
    the first ``n mod k`` blocks take one extra point, so no data is
    discarded.
    """

    k: int
    shuffle_seed: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"block count must be >= 1, got {self.k}")

    def blocks(self, n: int) -> list[np.ndarray]:
        if self.k > n:
            raise ValueError(f"block count {self.k} exceeds sample size {n}")
        if self.shuffle_seed is None:
            idx = np.arange(n)
        else:
            gen = np.random.Generator(np.random.Philox(key=self.shuffle_seed))
            idx = gen.permutation(n)
        base, extra = divmod(n, self.k)
        out = []
        pos = 0
        for j in range(self.k):
            size = base + (1 if j < extra else 0)
            out.append(idx[pos:pos + size])
            pos += size
        return out


def median(values) -> float:
    """Sample median; midpoint of the central order statistics when even."""
    return float(np.median(np.asarray(values, dtype=float)))


def mom(data, plan: BlockPlan) -> float:
    """Median of blockwise means."""
    arr = np.asarray(data, dtype=float)
    blocks = plan.blocks(arr.size)
    return median([float(np.mean(arr[b])) for b in blocks])


def default_block_count(n: int, delta: float | None = None, c0: float = 4.0) -> int:
    """Default block count: ceil(c0 log(1/delta)) given a confidence level,
    else the ceil(log n) heuristic; clamped to [1, n // 2]."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if delta is not None:
        if not (0.0 < delta < 1.0):
            raise ValueError(f"delta must be in (0,1), got {delta}")
        k = math.ceil(c0 * math.log(1.0 / delta))
    else:
        k = math.ceil(math.log(n))
    return max(1, min(k, n // 2))


def are_blocks(data, plan: BlockPlan | None = None, calib: CalibConfig | None = None,
               gnc: GncConfig | None = None, shared_fit: bool = False) -> list[FitResult]:
    """Per-block adaptive fits backing the blockwise robust estimator.

    Each block gets its own (shape, scale) calibration and robust location
    solve; a constant block short-circuits to its value.  When no
    calibration config is given, the shape search is restricted to [0, 1],
    the bounded-score regime assumed by the block-aggregation guarantees.
    ``shared_fit`` calibrates once on the full sample and only re-solves
    the location per block (opt-in fast path).
    """
    arr = np.asarray(data, dtype=float)
    if plan is None:
        plan = BlockPlan(default_block_count(arr.size))
    blocks = plan.blocks(arr.size)
    if min(len(b) for b in blocks) < 2:
        raise ValueError(
            f"blocks of size < 2 cannot be calibrated: k={plan.k} on n={arr.size}"
        )
    if calib is None:
        calib = CalibConfig(alpha_bounds=(0.0, 1.0))
    if gnc is None:
        gnc = GncConfig()

    shared_params = None
    if shared_fit:
        full = alternate_fit(arr, calib, gnc)
        shared_params = full.params

    fits: list[FitResult] = []
    for b in blocks:
        xb = arr[b]
        if np.all(xb == xb[0]):
            from .loss import LossParams

            fits.append(FitResult(x=float(xb[0]), params=LossParams(1.0, 1.0),
                                  alternations=0, nll_value=float("nan"), converged=True))
        elif shared_params is not None:
            sol = gnc_irls(xb, shared_params.alpha, shared_params.c, gnc)
            from .loss import nll as _nll

            fits.append(FitResult(x=sol.x, params=shared_params, alternations=1,
                                  nll_value=_nll(xb, sol.x, shared_params),
                                  converged=sol.converged))
        else:
            fits.append(alternate_fit(xb, calib, gnc))
    return fits


def are(data, plan: BlockPlan | None = None, calib: CalibConfig | None = None,
        gnc: GncConfig | None = None, shared_fit: bool = False) -> float:
    """Blockwise adaptive robust estimate: median of per-block fits."""
    fits = are_blocks(data, plan, calib, gnc, shared_fit)
    return median([f.x for f in fits])


def are_ht_plan(n: int, delta: float, eps_moment: float = 1.0, v_moment: float = 1.0,
                tau: float = 1.0) -> tuple[int, int, float]:
    """Heavy-tail block plan: (k, m, block scale).

    k = ceil(8 log(2/delta)), m = floor(n/k), and the block scale is
    tau * (v * m / log(2/delta0))**(1/(1+eps)) with delta0 = 1/4.
    """
    if not (0.0 < delta < 0.5):
        raise ValueError(f"delta must be in (0, 1/2), got {delta}")
    if not (0.0 < eps_moment <= 1.0):
        raise ValueError(f"eps_moment must be in (0, 1], got {eps_moment}")
    if v_moment <= 0 or tau <= 0:
        raise ValueError("v_moment and tau must be positive")
    k = math.ceil(8.0 * math.log(2.0 / delta))
    m = n // k
    if m < 2:
        raise ValueError(f"n={n} leaves blocks of size {m} < 2 at k={k}")
    delta0 = 0.25
    c_m = tau * (v_moment * m / math.log(2.0 / delta0)) ** (1.0 / (1.0 + eps_moment))
    return k, m, c_m


def fv_tuning(m: int, gamma_exp: float) -> tuple[float, float]:
    """Finite-variance tuning: scale m**(1/2+gamma), radius m**(gamma/4)."""
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if gamma_exp <= 0:
        raise ValueError(f"gamma_exp must be positive, got {gamma_exp}")
    return float(m) ** (0.5 + gamma_exp), float(m) ** (gamma_exp / 4.0)


@dataclass(frozen=True)
class TheoryTuning:
    """Scale/radius regime for the central-root estimator.

    ``finite_variance`` uses the deterministic m**(1/2+gamma) scale;
    ``heavy_tailed`` balances truncation bias against score concentration
    under a (1+eps)-moment bound.
    """

    regime: str = "finite_variance"
    alpha: float = 1.0
    gamma_exp: float = 0.25
    delta: float = 0.05
    eps_moment: float = 1.0
    v_moment: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.regime not in ("finite_variance", "heavy_tailed"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"central-root shape must be in (0, 1], got {self.alpha}")
        if self.regime == "finite_variance" and self.gamma_exp <= 0:
            raise ValueError("gamma_exp must be positive")
        if self.regime == "heavy_tailed":
            if not (0.0 < self.delta < 0.5):
                raise ValueError(f"delta must be in (0, 1/2), got {self.delta}")
            if not (0.0 < self.eps_moment <= 1.0):
                raise ValueError(f"eps_moment must be in (0, 1], got {self.eps_moment}")
            if self.v_moment <= 0 or self.tau <= 0:
                raise ValueError("v_moment and tau must be positive")

    def scale_radius(self, m: int) -> tuple[float, float]:
        if self.regime == "finite_variance":
            return fv_tuning(m, self.gamma_exp)
        delta0 = 0.25
        c_m = self.tau * (self.v_moment * m / math.log(2.0 / delta0)) ** (
            1.0 / (1.0 + self.eps_moment)
        )
        return c_m, math.sqrt(c_m)


def central_root(data, alpha: float, c_m: float, pilot: float | None = None,
                 r_m: float | None = None, scan_points: int = 64) -> float:
    """Unique zero of the empirical score inside a pilot-centered interval.

    The score equation is -(1/m) sum_i d rho/d eps (X_i - x) = 0.  The
    interval [pilot - r, pilot + r] is scanned for sign changes: none
    raises ``NoCentralRootError``, more than one ``MultipleRootsError``,
    and a single bracket is polished by bisection to 1e-12 * c_m.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("central_root requires nonempty data")
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"central-root shape must be in (0, 1], got {alpha}")
    if not (c_m > 0):
        raise ValueError(f"scale must be positive, got {c_m}")
    if pilot is None:
        pilot = median(arr)
    if r_m is None or not (r_m > 0):
        raise ValueError("central_root requires a positive interval radius r_m")

    def ghat(x):
        return -float(np.mean(drho_deps(arr - x, alpha, c_m)))

    xs = np.linspace(pilot - r_m, pilot + r_m, scan_points)
    vals = np.array([ghat(x) for x in xs])
    zero_hits = np.flatnonzero(vals == 0.0)
    if zero_hits.size:
        return float(xs[zero_hits[0]])
    sign_changes = np.flatnonzero(np.diff(np.sign(vals)) != 0)
    if sign_changes.size == 0:
        raise NoCentralRootError(
            f"no sign change of the empirical score on [{xs[0]:g}, {xs[-1]:g}]"
        )
    if sign_changes.size > 1:
        raise MultipleRootsError(
            f"{sign_changes.size} sign changes of the empirical score on the interval"
        )
    i = int(sign_changes[0])
    return float(brentq(ghat, xs[i], xs[i + 1], xtol=1e-12 * c_m))


def gnc_tls(data, cbar: float | None = None, gamma: float = 1.4,
            eps_x: float = 1e-8, t_max: int = 100) -> float:
    """Truncated-least-squares location via graduated nonconvexity.

    Loss min((eps/cbar)^2 / 2, 1/2).  The surrogate's control parameter mu
    starts near zero (effectively quadratic) and grows geometrically; its
    three-zone weights are 1 inside mu/(mu+1) cbar^2, 0 outside
    (mu+1)/mu cbar^2, and cbar sqrt(mu(mu+1))/|eps| - mu between.  Default
    truncation point is 3 MAD.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("gnc_tls requires nonempty data")
    if arr.size == 1:
        return float(arr[0])
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    if cbar is None:
        med = np.median(arr)
        cbar = 3.0 * float(np.median(np.abs(arr - med)))
        if cbar == 0:
            cbar = 3.0 * float(np.mean(np.abs(arr - med))) or 1.0
    if cbar <= 0:
        raise ValueError(f"cbar must be positive, got {cbar}")

    x = float(np.mean(arr))
    c2 = cbar * cbar
    max_sq = float(np.max(np.square(arr - x)))
    if max_sq <= c2:
        return x  # nothing is ever truncated: plain least squares
    mu = c2 / (2.0 * max_sq - c2)
    mu_stop = 1e6
    while True:
        for _ in range(t_max):
            sq = np.square(arr - x)
            lo, hi = (mu / (mu + 1.0)) * c2, ((mu + 1.0) / mu) * c2
            w = np.empty_like(sq)
            inside = sq <= lo
            outside = sq >= hi
            mid = ~inside & ~outside
            w[inside] = 1.0
            w[outside] = 0.0
            if np.any(mid):
                w[mid] = cbar * math.sqrt(mu * (mu + 1.0)) / np.sqrt(sq[mid]) - mu
            if not np.any(w > 0):
                # everything truncated: keep the current location
                break
            x_new = weighted_mean(arr, w)
            done = abs(x_new - x) <= eps_x
            x = x_new
            if done:
                break
        if mu >= mu_stop:
            break
        mu = min(mu * gamma, mu_stop)
    return x


# ---------------------------------------------------------------------------
# Named estimator registry for the benchmark harness and CLI
# ---------------------------------------------------------------------------

ESTIMATOR_NAMES = ("l2", "cauchy", "gm", "welsch", "adapt", "gnc_adapt", "gnc_tls", "mom", "are")
RESERVED_ESTIMATORS = ("amb", "gnc_amb")


@dataclass(frozen=True)
class Estimator:
    """A named estimator with a data -> float evaluation rule."""

    name: str
    fixed_shape: float | None = None
    fixed_scale: float = 1.0
    tls_cbar: float | None = None
    plan: BlockPlan | None = None
    calib: CalibConfig | None = None
    gnc: GncConfig | None = None
    continuation: bool = False
    tuning: TheoryTuning | None = None

    def estimate(self, data) -> float:
        arr = np.asarray(data, dtype=float)
        if self.name == "l2":
            return float(np.mean(arr))
        if self.name in ("cauchy", "gm", "welsch"):
            return m_estimate_fixed(arr, self.fixed_shape, self.fixed_scale)
        if self.name in ("adapt", "gnc_adapt"):
            return alternate_fit(arr, self.calib, self.gnc,
                                 continuation=self.continuation).x
        if self.name == "gnc_tls":
            return gnc_tls(arr, self.tls_cbar)
        if self.name == "mom":
            plan = self.plan or BlockPlan(default_block_count(arr.size))
            return mom(arr, plan)
        if self.name == "are":
            return are(arr, self.plan, self.calib, self.gnc)
        if self.name == "central_root":
            tuning = self.tuning or TheoryTuning()
            c_m, r_m = tuning.scale_radius(arr.size)
            return central_root(arr, tuning.alpha, c_m, r_m=r_m)
        raise ValueError(f"unknown estimator {self.name!r}")


_FIXED_SHAPES = {"cauchy": 0.0, "gm": -2.0, "welsch": ALPHA_WELSCH}


def make_estimator(name: str, c: float = 1.0, k: int | None = None,
                   cbar: float | None = None, tuning: TheoryTuning | None = None,
                   calib: CalibConfig | None = None, gnc: GncConfig | None = None) -> Estimator:
    """Build a registry estimator by name.

    The reserved names raise: their defining loss is referenced but never
    specified, so the harness records them as unimplemented rather than
    guessing.
    """
    name = name.lower()
    if name in RESERVED_ESTIMATORS:
        raise UnimplementedEstimatorError(
            f"{name!r} is reserved: its loss has no published definition"
        )
    if name == "l2":
        return Estimator("l2")
    if name in _FIXED_SHAPES:
        return Estimator(name, fixed_shape=_FIXED_SHAPES[name], fixed_scale=c)
    if name == "adapt":
        return Estimator("adapt", calib=calib, gnc=gnc, continuation=False)
    if name == "gnc_adapt":
        return Estimator("gnc_adapt", calib=calib, gnc=gnc, continuation=True)
    if name == "gnc_tls":
        return Estimator("gnc_tls", tls_cbar=cbar)
    if name == "mom":
        return Estimator("mom", plan=BlockPlan(k) if k else None)
    if name == "are":
        return Estimator("are", plan=BlockPlan(k) if k else None, calib=calib, gnc=gnc)
    if name == "central_root":
        return Estimator("central_root", tuning=tuning)
    raise ValueError(f"unknown estimator {name!r}")
