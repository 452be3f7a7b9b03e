"""
Penalized likelihood ratio statistic and its calibration.

PLR = l(reduced fit) - l(full fit) at a common smoothing level. Under equal
group densities 2n*PLR is approximately normal with centre theta and spread
sqrt(2)*sigma, where theta and sigma are eigen-sums over the interaction
gram. The permutation and chi-square readings of the same statistic are
provided as alternatives.
"""

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, optimize, stats

from .errors import (
    BracketError,
    CalibrationUnreliableError,
    ConfigurationError,
    DegenerateCalibrationError,
    DomainError,
    PLRError,
    SplitDegeneracyError,
)
from .estimator import FittedDensity, ModelKind, NewtonConfig, fit, make_dataset
from .kernels import Dataset, GramSet, KernelConfig, build_grams
from .quadrature import QuadGrid, joint_grid
from .utils import _debug_print, make_rng, worker_count

RHO_MODES = ("inverse", "literal")
CALIBRATIONS = ("asymptotic", "permutation", "chi2")
LAMBDA_BRACKET = (1e-12, 1e3)
MAX_FAILURE_SHARE = 0.05
SPLIT_ATTEMPTS = 20


@dataclass(frozen=True, eq=False)
class NullParams:
    """Centre and spread of the null law of 2n*PLR."""

    theta_hat: float
    sigma_hat: float
    rho_mode: str
    spectrum: np.ndarray = field(repr=False)
    lam: float = float("nan")
    n: int = 0


@dataclass(frozen=True)
class PlrResult:
    plr: float
    lam: float
    theta_hat: float
    sigma_hat: float
    z_score: float
    p_value: float
    reject: bool
    calibration: str
    n_permutations: int = 0
    alpha: float = 0.05
    n: int = 0
    rho_mode: str = "inverse"
    fallback: bool = False
    split_seed: Optional[int] = None
    chi2_df: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> "PlrResult":
        record = dict(record)
        record["lam"] = record.pop("lambda")
        return cls(**record)


def _spectrum(q_interaction) -> np.ndarray:
    a = np.asarray(q_interaction, dtype=float)
    if a.ndim == 2:
        if a.shape[0] != a.shape[1]:
            raise DomainError(f"interaction gram must be square, got shape {a.shape}")
        a = linalg.eigvalsh(a)
    elif a.ndim != 1:
        raise DomainError("expected an interaction gram or its eigenvalues")
    return np.clip(np.sort(a)[::-1], 0.0, None)


def _sums(spectrum: np.ndarray, lam: float, n: int, mode: str, eig_floor: float, top: Optional[int]):
    if mode not in RHO_MODES:
        raise ConfigurationError(f"unknown rho mode {mode!r}; expected one of {RHO_MODES}")
    gamma = spectrum if top is None else spectrum[:top]
    if not np.any(gamma > eig_floor):
        raise DegenerateCalibrationError(
            "interaction spectrum is numerically zero; use permutation calibration"
        )
    if mode == "inverse":
        gamma = gamma[gamma > eig_floor]
        ratio = gamma / (gamma + n * lam)
    else:
        ratio = 1.0 / (1.0 + lam * gamma[:n])
    return float(ratio.sum()), float(math.sqrt(np.dot(ratio, ratio)))


def null_params(
    q_interaction,
    lam: float,
    n: int,
    mode: str = "inverse",
    eig_floor: float = 1e-10,
    top: Optional[int] = None,
) -> NullParams:
    """Plug-in theta and sigma from the eigenvalues of the interaction gram.

    ``inverse`` reads gamma_p as the inverse eigen-rate, giving
    theta = sum gamma/(gamma + n*lambda); ``literal`` uses 1/(1 + lambda*gamma_p)
    over the first n eigenvalues. ``top`` keeps only the k leading eigenvalues.
    Accepts the gram or a precomputed spectrum.
    """
    if not (np.isfinite(lam) and lam > 0):
        raise DomainError(f"smoothing parameter must be positive, got {lam!r}")
    if top is not None and top < 1:
        raise ConfigurationError(f"top must be a positive integer, got {top!r}")
    spectrum = _spectrum(q_interaction)
    theta, sigma = _sums(spectrum, lam, n, mode, eig_floor, top)
    return NullParams(theta_hat=theta, sigma_hat=sigma, rho_mode=mode, spectrum=spectrum, lam=float(lam), n=int(n))


def effective_dimension(q_interaction, lam: float, n: int) -> float:
    """trace(Q (Q + n*lambda I)^-1), computed by a linear solve."""
    q = np.asarray(q_interaction, dtype=float)
    shifted = q + n * lam * np.eye(q.shape[0])
    return float(np.trace(linalg.solve(shifted, q, assume_a="sym")))


def separation_estimate(q_interaction, lam: float, n: int, mode: str = "inverse", **kwargs) -> float:
    """sqrt(lambda + sigma_hat/n), the empirical separation at lambda."""
    return math.sqrt(lam + null_params(q_interaction, lam, n, mode, **kwargs).sigma_hat / n)


def adaptive_lambda(
    q_interaction,
    n: int,
    mode: str = "inverse",
    eig_floor: float = 1e-10,
    top: Optional[int] = None,
    bracket: Tuple[float, float] = LAMBDA_BRACKET,
) -> float:
    """Largest lambda with lambda < sigma_hat_lambda / n, by bisection.

    f(lambda) = sigma_hat/n - lambda is strictly decreasing, so the rule picks
    its root inside ``bracket``.
    """
    spectrum = _spectrum(q_interaction)

    def gap(lam):
        return _sums(spectrum, lam, n, mode, eig_floor, top)[1] / n - lam

    lo, hi = bracket
    f_lo, f_hi = gap(lo), gap(hi)
    if f_lo < 0 or f_hi > 0:
        summary = {
            "n": int(n),
            "rank": int(np.sum(spectrum > eig_floor)),
            "largest": float(spectrum[0]) if spectrum.size else 0.0,
            "total": float(spectrum.sum()),
        }
        raise BracketError(
            f"no root of sigma/n - lambda in [{lo:g}, {hi:g}] (f={f_lo:.3g}, {f_hi:.3g})",
            spectrum_summary=summary,
        )
    root = optimize.bisect(gap, lo, hi, xtol=1e-300, rtol=1e-10, maxiter=200)
    _debug_print(f"adaptive lambda: {root:.6g} (n={n}, mode={mode})")
    return float(root)


def separation_rate(n: int, m: int = 2, d: int = 1) -> float:
    """Minimax separation rate n^(-2m/(4m+d))."""
    if n < 1 or m < 1 or d < 1:
        raise DomainError(f"n, m and d must be positive, got {(n, m, d)}")
    return float(n) ** (-2.0 * m / (4.0 * m + d))


def oracle_lambda(n: int, m: int = 2, d: int = 1) -> float:
    """Rate-optimal smoothing level n^(-4m/(4m+d))."""
    if n < 1 or m < 1 or d < 1:
        raise DomainError(f"n, m and d must be positive, got {(n, m, d)}")
    return float(n) ** (-4.0 * m / (4.0 * m + d))


def asymptotic_calibration(plr: float, n: int, theta: float, sigma: float) -> Tuple[float, float]:
    """Standardized statistic (2n*PLR - theta)/(sqrt(2)*sigma) and its two-sided normal p-value."""
    z_score = (2 * n * plr - theta) / (math.sqrt(2.0) * sigma)
    return float(z_score), float(2.0 * stats.norm.sf(abs(z_score)))


def chi2_calibration(plr: float, n: int, theta: float, sigma: float) -> Tuple[float, float, float]:
    """Scaled statistic 2n*r*PLR referred to chi-square with r*theta degrees of freedom, r = theta/sigma^2.

    Returns (statistic, df, upper-tail p-value).
    """
    ratio = theta / sigma ** 2
    statistic = 2 * n * ratio * plr
    df = ratio * theta
    return float(statistic), float(df), float(stats.chi2.sf(statistic, df))


def plr_statistic(
    data: Dataset,
    lam: float,
    cfg: Optional[KernelConfig] = None,
    grid: Optional[QuadGrid] = None,
    grams: Optional[GramSet] = None,
    newton: Optional[NewtonConfig] = None,
) -> Tuple[float, FittedDensity, FittedDensity]:
    """Fit both models at ``lam`` and return (plr, full fit, reduced fit)."""
    data.require_two_groups()
    grams = grams if grams is not None else build_grams(data, cfg)
    grid = grid or joint_grid()
    full = fit(data, grams, ModelKind.FULL, lam, grid, newton=newton)
    reduced = fit(data, grams, ModelKind.REDUCED, lam, grid, newton=newton)
    return reduced.objective - full.objective, full, reduced


def _replicate(data, q_x, lam, cfg, grid, newton, seed, b):
    z = make_rng(seed, b).permutation(data.z)
    shuffled = data.with_labels(z)
    try:
        grams = build_grams(shuffled, cfg, q_x=q_x)
        return plr_statistic(shuffled, lam, cfg, grid, grams, newton)[0]
    except PLRError as exc:
        _debug_print(f"permutation {b}: {type(exc).__name__}: {exc}")
        return float("nan")


def permutation_replicates(
    data: Dataset,
    lam: float,
    B: int = 199,
    seed: int = 0,
    cfg: Optional[KernelConfig] = None,
    grid: Optional[QuadGrid] = None,
    newton: Optional[NewtonConfig] = None,
    q_x: Optional[np.ndarray] = None,
    n_jobs: Optional[int] = None,
) -> np.ndarray:
    """PLR under B seeded label permutations (NaN marks a failed fit)."""
    cfg = cfg or KernelConfig()
    grid = grid or joint_grid()
    n_jobs = worker_count() if n_jobs is None else n_jobs
    if q_x is None:
        q_x = build_grams(data, cfg).q_x
    if n_jobs == 1:
        values = [_replicate(data, q_x, lam, cfg, grid, newton, seed, b) for b in range(B)]
    else:
        values = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_replicate)(data, q_x, lam, cfg, grid, newton, seed, b) for b in range(B)
        )
    return np.asarray(values, dtype=float)


def permutation_pvalue(observed: float, replicates: np.ndarray, tol: float = 1e-12) -> float:
    """(1 + #{replicate >= observed}) / (B + 1) over the finite replicates."""
    replicates = np.asarray(replicates, dtype=float)
    valid = replicates[np.isfinite(replicates)]
    B = replicates.size
    failed = B - valid.size
    if B and failed > MAX_FAILURE_SHARE * B:
        raise CalibrationUnreliableError(f"{failed} of {B} permutation replicates failed")
    exceed = int(np.sum(valid >= observed - tol * max(1.0, abs(observed))))
    return (1.0 + exceed) / (valid.size + 1.0)


def permutation_calibrate(
    data: Dataset,
    lam: float,
    B: int = 199,
    seed: int = 0,
    cfg: Optional[KernelConfig] = None,
    grid: Optional[QuadGrid] = None,
    observed: Optional[float] = None,
    newton: Optional[NewtonConfig] = None,
    n_jobs: Optional[int] = None,
) -> float:
    """Permutation p-value of the PLR statistic with lambda held fixed."""
    if B < 19:
        raise ConfigurationError(f"need at least 19 permutations, got {B}")
    cfg = cfg or KernelConfig()
    grid = grid or joint_grid()
    grams = build_grams(data, cfg)
    if observed is None:
        observed = plr_statistic(data, lam, cfg, grid, grams, newton)[0]
    reps = permutation_replicates(data, lam, B, seed, cfg, grid, newton, q_x=grams.q_x, n_jobs=n_jobs)
    return permutation_pvalue(observed, reps)


def test(
    data: Dataset,
    alpha: float = 0.05,
    lam: Union[str, float] = "auto",
    calibration: str = "asymptotic",
    cfg: Optional[KernelConfig] = None,
    seed: int = 0,
    B: int = 199,
    grid: Optional[QuadGrid] = None,
    mode: str = "inverse",
    top: Optional[int] = None,
    newton: Optional[NewtonConfig] = None,
    n_jobs: Optional[int] = None,
) -> PlrResult:
    """Two-sample PLR test.

    ``lam='auto'`` applies the adaptive rule on the same data. A numerically
    zero interaction spectrum switches asymptotic and chi2 calibration to
    permutation and sets ``fallback``.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if calibration not in CALIBRATIONS:
        raise ConfigurationError(f"unknown calibration {calibration!r}; expected one of {CALIBRATIONS}")
    data.require_two_groups()
    cfg = cfg or KernelConfig()
    grid = grid or joint_grid()
    grams = build_grams(data, cfg)
    n = data.n
    spectrum = grams.interaction_spectrum

    if isinstance(lam, str):
        if lam != "auto":
            raise ConfigurationError(f"lambda must be 'auto' or a positive number, got {lam!r}")
        lam = adaptive_lambda(spectrum, n, mode, cfg.eig_floor, top)
    lam = float(lam)

    plr, _, _ = plr_statistic(data, lam, cfg, grid, grams, newton)

    fallback = False
    try:
        params = null_params(spectrum, lam, n, mode, cfg.eig_floor, top)
        theta, sigma = params.theta_hat, params.sigma_hat
    except DegenerateCalibrationError:
        theta = sigma = float("nan")
        if calibration != "permutation":
            _debug_print("degenerate interaction spectrum, falling back to permutation calibration")
            calibration = "permutation"
            fallback = True

    z_score = float("nan")
    if sigma > 0:
        z_score, p_value = asymptotic_calibration(plr, n, theta, sigma)
    chi2_df = None
    n_perm = 0
    if calibration == "chi2":
        _, chi2_df, p_value = chi2_calibration(plr, n, theta, sigma)
    elif calibration == "permutation":
        p_value = permutation_calibrate(data, lam, B, seed, cfg, grid, observed=plr, newton=newton, n_jobs=n_jobs)
        n_perm = B
    p_value = min(1.0, max(0.0, p_value))

    return PlrResult(
        plr=float(plr),
        lam=lam,
        theta_hat=theta,
        sigma_hat=sigma,
        z_score=float(z_score),
        p_value=p_value,
        reject=bool(p_value <= alpha),
        calibration=calibration,
        n_permutations=n_perm,
        alpha=alpha,
        n=n,
        rho_mode=mode,
        fallback=fallback,
        chi2_df=chi2_df,
    )


# Not a test function for pytest's collector
test.__test__ = False


def split_test(
    raw_x,
    raw_z,
    alpha: float = 0.05,
    seed: int = 0,
    calibration: str = "asymptotic",
    mapping: str = "rank",
    cfg: Optional[KernelConfig] = None,
    grid: Optional[QuadGrid] = None,
    mode: str = "inverse",
    B: int = 199,
    newton: Optional[NewtonConfig] = None,
    n_jobs: Optional[int] = None,
) -> PlrResult:
    """Tune lambda on one random half, test on the other.

    The first ceil(n/2) shuffled points choose lambda by the adaptive rule;
    the rest are mapped to [0,1] on their own and tested at that lambda.
    """
    raw_x = np.asarray(raw_x, dtype=float).ravel()
    raw_z = np.asarray(raw_z).ravel()
    n = raw_x.size
    if n < 8:
        raise DomainError(f"data splitting needs at least 8 observations, got {n}")
    if raw_z.size != n:
        raise DomainError(f"x and z lengths differ ({n} != {raw_z.size})")
    cfg = cfg or KernelConfig()
    half = (n + 1) // 2

    for attempt in range(SPLIT_ATTEMPTS):
        order = make_rng(seed, attempt).permutation(n)
        first, second = order[:half], order[half:]
        if len(set(raw_z[first].tolist())) < 2 or len(set(raw_z[second].tolist())) < 2:
            _debug_print(f"split attempt {attempt}: a half lacks one group, reshuffling")
            continue
        tune = make_dataset(raw_x[first], raw_z[first], mapping)
        lam = adaptive_lambda(build_grams(tune, cfg).interaction_spectrum, tune.n, mode, cfg.eig_floor)
        held_out = make_dataset(raw_x[second], raw_z[second], mapping)
        result = test(held_out, alpha, lam, calibration, cfg, seed, B, grid, mode, newton=newton, n_jobs=n_jobs)
        return replace(result, split_seed=int(seed))
    raise SplitDegeneracyError(f"{SPLIT_ATTEMPTS} shuffles left a half with a single group")
