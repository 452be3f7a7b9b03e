"""
MMD and Kolmogorov-Smirnov baselines.

The MMD uses the centred Sobolev kernel of the kernels module, so the biased
MMD and the score statistic (the grand mean of the interaction gram) are the
same quantity up to a factor depending only on the group sizes.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import special

from .errors import ConfigurationError, DomainError, PLRError
from .kernels import Dataset, GramSet, KernelConfig, build_grams, decompose_continuous_gram, sobolev_gram
from .plr import permutation_pvalue
from .utils import _debug_print, make_rng, worker_count

METHODS = ("mmd_perm", "ks_asymptotic", "ks_perm")


@dataclass(frozen=True)
class BaselineResult:
    statistic: float
    p_value: float
    method: str
    n_permutations: int = 0

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value <= alpha


def _centered_x(data: Dataset, cfg: Optional[KernelConfig], grams: Optional[GramSet]) -> np.ndarray:
    if grams is not None:
        return grams.q1_x
    return decompose_continuous_gram(sobolev_gram(data.x, data.x, cfg))[1]


def _mmd_from_centered(q1_x: np.ndarray, z: np.ndarray) -> float:
    g1 = z == 1
    g0 = ~g1
    n0, n1 = int(g0.sum()), int(g1.sum())
    if n0 == 0 or n1 == 0:
        raise DomainError("single group: MMD needs both labels")
    within0 = q1_x[np.ix_(g0, g0)].sum()
    within1 = q1_x[np.ix_(g1, g1)].sum()
    cross = q1_x[np.ix_(g0, g1)].sum()
    return float(within0 / n0 ** 2 - 2.0 * cross / (n0 * n1) + within1 / n1 ** 2)


def mmd_biased(data: Dataset, cfg: Optional[KernelConfig] = None, grams: Optional[GramSet] = None) -> float:
    """Biased squared MMD with the centred Sobolev kernel (i = j terms included)."""
    data.require_two_groups()
    return _mmd_from_centered(_centered_x(data, cfg, grams), data.z)


def score_statistic(data: Dataset, cfg: Optional[KernelConfig] = None, grams: Optional[GramSet] = None) -> float:
    """Squared norm of the score at the uniform density: sum(q_interaction) / n^2.

    The plug-in interaction kernel factors as 2 v_z v_z~ K1(x, x~) with
    v = (w1, -w0), so mmd_biased is score_to_mmd_factor(n0, n1) times the
    score (8 for balanced groups), never the score itself.
    """
    grams = grams if grams is not None else build_grams(data, cfg)
    return float(grams.q_interaction.sum() / data.n ** 2)


def score_to_mmd_factor(n0: int, n1: int) -> float:
    """c with mmd_biased == c * score_statistic: n^4 / (2 n0^2 n1^2)."""
    if n0 < 1 or n1 < 1:
        raise DomainError("both groups must be nonempty")
    n = n0 + n1
    return n ** 4 / (2.0 * n0 ** 2 * n1 ** 2)


def ks_statistic(x0, x1) -> float:
    """sup_t |F0(t) - F1(t)| over the pooled sample."""
    x0 = np.sort(np.asarray(x0, dtype=float).ravel())
    x1 = np.sort(np.asarray(x1, dtype=float).ravel())
    if x0.size == 0 or x1.size == 0:
        raise DomainError("KS statistic needs two nonempty samples")
    pooled = np.concatenate([x0, x1])
    f0 = np.searchsorted(x0, pooled, side="right") / x0.size
    f1 = np.searchsorted(x1, pooled, side="right") / x1.size
    return float(np.max(np.abs(f0 - f1)))


def _ks_of(data: Dataset) -> float:
    return ks_statistic(data.group(0), data.group(1))


def _replicate(data, statistic_fn, seed, b):
    shuffled = data.with_labels(make_rng(seed, b).permutation(data.z))
    try:
        return float(statistic_fn(shuffled))
    except PLRError as exc:
        _debug_print(f"baseline permutation {b}: {exc}")
        return float("nan")


def baseline_permutation(
    data: Dataset,
    statistic_fn: Callable[[Dataset], float],
    B: int = 199,
    seed: int = 0,
    observed: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> float:
    """Permutation p-value of ``statistic_fn`` under seeded relabelings."""
    if B < 19:
        raise ConfigurationError(f"need at least 19 permutations, got {B}")
    if observed is None:
        observed = float(statistic_fn(data))
    n_jobs = worker_count() if n_jobs is None else n_jobs
    if n_jobs == 1:
        reps = [_replicate(data, statistic_fn, seed, b) for b in range(B)]
    else:
        reps = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_replicate)(data, statistic_fn, seed, b) for b in range(B)
        )
    return permutation_pvalue(observed, np.asarray(reps, dtype=float))


def ks_test(x0, x1, method: str = "asymptotic", B: int = 199, seed: int = 0) -> BaselineResult:
    """Two-sample KS test with the Kolmogorov limit law or by permutation."""
    d = ks_statistic(x0, x1)
    x0 = np.asarray(x0, dtype=float).ravel()
    x1 = np.asarray(x1, dtype=float).ravel()
    if method == "asymptotic":
        effective = x0.size * x1.size / (x0.size + x1.size)
        p = float(special.kolmogorov(math.sqrt(effective) * d))
        return BaselineResult(d, min(1.0, max(0.0, p)), "ks_asymptotic")
    if method == "permutation":
        data = Dataset(
            _to_unit(np.concatenate([x0, x1])),
            np.concatenate([np.zeros(x0.size, dtype=int), np.ones(x1.size, dtype=int)]),
        )
        p = baseline_permutation(data, _ks_of, B, seed, observed=d)
        return BaselineResult(d, p, "ks_perm", B)
    raise ConfigurationError(f"unknown KS method {method!r}; expected 'asymptotic' or 'permutation'")


def _to_unit(values: np.ndarray) -> np.ndarray:
    # D depends on ranks only; dense ranks keep ties tied
    uniq, inverse = np.unique(values, return_inverse=True)
    return (inverse + 1.0) / (uniq.size + 1.0)


def mmd_test(data: Dataset, B: int = 199, seed: int = 0, cfg: Optional[KernelConfig] = None,
             n_jobs: Optional[int] = None) -> BaselineResult:
    """MMD with permutation calibration; the centred gram is computed once."""
    data.require_two_groups()
    q1_x = _centered_x(data, cfg, None)
    observed = _mmd_from_centered(q1_x, data.z)
    p = baseline_permutation(data, lambda d: _mmd_from_centered(q1_x, d.z), B, seed, observed, n_jobs)
    return BaselineResult(observed, p, "mmd_perm", B)
