"""
Simulation settings and the seeded size/power harness.

Settings 1-4 contrast normal laws and mixtures, settings 5-6 Beta laws and a
Beta mixture. Group labels are Bernoulli(1/2) over 2n draws, so n is the
average group size. Every trial draws its data from its own counter-based
stream, so tables do not depend on execution order.
"""

import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import baselines, plr
from .errors import ConfigurationError, DomainError, PLRError
from .estimator import make_dataset
from .kernels import KernelConfig
from .quadrature import DEFAULT_RESOLUTION, QuadGrid, joint_grid
from .utils import _debug_print, derive_seed, make_rng, worker_count

STUDY_DELTAS: Dict[int, Tuple[float, ...]] = {
    1: (0.0, 0.2, 0.3),
    2: (0.0, 1.0, 1.2),
    3: (0.0, 0.3, 0.45),
    4: (0.0, 0.3, 0.6),
    5: (0.0, 0.4, 0.6),
    6: (0.0, 0.3, 0.45),
}
STUDY_SIZES = (125, 250, 375, 500, 625, 750, 875, 1000)
DESK_SIZES = (125, 250, 500, 1000)
DEFAULT_TRIALS = 200
FULL_TRIALS = 1000
ALPHA = 0.05
METHODS = ("plr_asymptotic", "plr_permutation", "plr_split", "plr_chi2", "mmd_perm", "ks")
DEFAULT_METHODS = ("plr_asymptotic", "mmd_perm", "ks")
CSV_COLUMNS = ["setting", "delta", "n", "method", "trials", "rejections", "rate", "mean_runtime_ms"]
MAX_FAILURE_SHARE = 0.05


@dataclass(frozen=True)
class SettingSpec:
    id: int
    delta: float = 0.0
    n_per_group: int = 200

    def __post_init__(self):
        if self.id not in STUDY_DELTAS:
            raise DomainError(f"setting must be one of 1-6, got {self.id!r}")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise DomainError(f"delta must be a nonnegative number, got {self.delta!r}")
        if self.id in (3, 4) and self.delta >= 1:
            raise DomainError(f"setting {self.id} needs delta < 1 (the scale 1 - delta must stay positive)")
        if self.n_per_group < 1:
            raise DomainError(f"group size must be positive, got {self.n_per_group!r}")


def normal(rng: np.random.Generator, size=None) -> np.ndarray:
    return rng.standard_normal(size)


def beta(a, b, rng: np.random.Generator, size=None) -> np.ndarray:
    """Beta(a, b) as X/(X+Y) with X ~ Gamma(a), Y ~ Gamma(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("Beta shape parameters must be positive")
    x = rng.standard_gamma(a, size)
    y = rng.standard_gamma(b, size)
    return x / (x + y)


def generate(spec: SettingSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Raw observations and labels for one trial of ``spec``."""
    rng = make_rng(seed)
    size = 2 * spec.n_per_group
    z = (rng.random(size) < 0.5).astype(np.intp)
    t = z.astype(float)
    d = spec.delta
    pick = rng.random(size) < 0.5
    eps = normal(rng, size)

    if spec.id == 1:
        x = (1.0 + d * t) * eps
    elif spec.id == 2:
        sign = np.where(pick, -1.0, 1.0)
        x = sign * d * t + np.sqrt(1.0 + d * d * (1.0 - t)) * eps
    elif spec.id == 3:
        x = np.where(pick, 2.0 + eps, -2.0 + (1.0 - d * t) * eps)
    elif spec.id == 4:
        x = np.where(pick, 2.0, -2.0) + (1.0 - d * t) * eps
    else:
        s = 1.0 + d * t
        if spec.id == 5:
            x = beta(2 * s, 2 * s, rng, size)
        else:
            x = np.where(pick, beta(2 * s, 6 * s, rng, size), beta(6 * s, 2 * s, rng, size))
    return x, z


def run_trial(
    spec: SettingSpec,
    seed: int,
    methods: Sequence[str],
    alpha: float = ALPHA,
    B: int = 199,
    cfg: Optional[KernelConfig] = None,
    grid: Optional[QuadGrid] = None,
) -> Dict[str, Tuple[Optional[bool], float]]:
    """One trial: method -> (reject, runtime in ms); reject is None on failure."""
    raw_x, z = generate(spec, seed)
    cfg = cfg or KernelConfig()
    grid = grid or joint_grid()
    out = {}
    for method in methods:
        start = time.perf_counter()
        try:
            reject = bool(_decide(method, raw_x, z, alpha, B, seed, cfg, grid))
        except PLRError as exc:
            _debug_print(f"trial {spec} seed={seed} {method} failed: {type(exc).__name__}: {exc}")
            reject = None
        out[method] = (reject, (time.perf_counter() - start) * 1e3)
    return out


def _decide(method, raw_x, z, alpha, B, seed, cfg, grid) -> bool:
    if method == "plr_split":
        return plr.split_test(raw_x, z, alpha, seed, cfg=cfg, grid=grid, n_jobs=1).reject
    if method == "ks":
        return baselines.ks_test(raw_x[z == 0], raw_x[z == 1]).reject(alpha)
    data = make_dataset(raw_x, z)
    if method == "mmd_perm":
        return baselines.mmd_test(data, B, seed, cfg, n_jobs=1).reject(alpha)
    calibration = {"plr_asymptotic": "asymptotic", "plr_permutation": "permutation", "plr_chi2": "chi2"}[method]
    return plr.test(data, alpha, "auto", calibration, cfg, seed, B, grid, n_jobs=1).reject


@dataclass(frozen=True)
class PowerRow:
    setting: int
    delta: float
    n: int
    method: str
    trials: int
    rejections: int
    rate: float
    mean_runtime_ms: float = 0.0
    failures: int = 0

    @property
    def invalid(self) -> bool:
        return self.failures > MAX_FAILURE_SHARE * (self.trials + self.failures)


@dataclass
class PowerTable:
    rows: List[PowerRow] = field(default_factory=list)
    master_seed: int = 0

    def to_frame(self, extended: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame.from_records(
            [asdict(row) for row in self.rows], columns=CSV_COLUMNS + ["failures"]
        )
        if not extended:
            return frame[CSV_COLUMNS]
        frame["invalid"] = [row.invalid for row in self.rows]
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", encoding="utf-8")

    def rate(self, setting: int, delta: float, n: int, method: str) -> float:
        for row in self.rows:
            if (row.setting, row.delta, row.n, row.method) == (setting, delta, n, method):
                return row.rate
        raise KeyError((setting, delta, n, method))

    def invalid_cells(self) -> List[PowerRow]:
        return [row for row in self.rows if row.invalid]

    def plot_svg(self, path) -> None:
        """Rejection rate against n, one panel per (setting, delta), one line per method."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        frame = self.to_frame()
        panels = list(frame.groupby(["setting", "delta"], sort=True))
        fig, axes = plt.subplots(1, max(1, len(panels)), figsize=(4 * max(1, len(panels)), 3.2), squeeze=False)
        for ax, ((setting, delta), part) in zip(axes[0], panels):
            for method, series in part.groupby("method", sort=False):
                series = series.sort_values("n")
                ax.plot(series["n"], series["rate"], marker="o", label=method)
            ax.axhline(ALPHA, linewidth=0.8, linestyle="--", color="grey")
            ax.set_ylim(0.0, 1.0)
            ax.set_xlabel("n per group")
            ax.set_ylabel("rejection rate")
            ax.set_title(f"setting {setting}, delta={delta:g}")
            ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _delta_key(delta: float) -> int:
    return int(round(delta * 1_000_000))


def trial_seed(master_seed: int, spec: SettingSpec, trial: int) -> int:
    return derive_seed(master_seed, spec.id, _delta_key(spec.delta), spec.n_per_group, trial)


def _cell_key(spec: SettingSpec, method: str, trials: int, master_seed: int, alpha: float, B: int) -> str:
    return f"{spec.id}|{spec.delta!r}|{spec.n_per_group}|{method}|{trials}|{master_seed}|{alpha!r}|{B}"


def run_experiment(
    settings: Iterable[int],
    deltas: Union[None, Iterable[float], Mapping[int, Iterable[float]]] = None,
    sizes: Iterable[int] = DESK_SIZES,
    methods: Sequence[str] = DEFAULT_METHODS,
    trials: int = DEFAULT_TRIALS,
    master_seed: int = 0,
    alpha: float = ALPHA,
    B: int = 199,
    store=None,
    timing: bool = False,
    n_jobs: Optional[int] = None,
    cfg: Optional[KernelConfig] = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> PowerTable:
    """Seeded rejection frequencies for every (setting, delta, n, method) cell.

    ``deltas`` may be a list shared by all settings, a per-setting mapping,
    or None for the values shown for each setting. ``store`` (any ResultStore)
    caches finished cells. Runtimes are recorded only when ``timing`` is set.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be at least 1, got {trials}")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigurationError(f"unknown methods {unknown}; expected a subset of {METHODS}")
    methods = list(dict.fromkeys(methods))
    n_jobs = worker_count() if n_jobs is None else n_jobs
    cfg = cfg or KernelConfig()
    grid = joint_grid(resolution)

    table = PowerTable(master_seed=master_seed)
    for setting in settings:
        if deltas is None:
            cell_deltas = STUDY_DELTAS.get(setting, ())
        elif isinstance(deltas, Mapping):
            cell_deltas = deltas[setting]
        else:
            cell_deltas = deltas
        for delta in cell_deltas:
            for n in sizes:
                spec = SettingSpec(int(setting), float(delta), int(n))
                keys = {m: _cell_key(spec, m, trials, master_seed, alpha, B) for m in methods}
                todo = [m for m in methods if store is None or keys[m] not in store]
                fresh = _run_cell(spec, todo, trials, master_seed, alpha, B, cfg, grid, n_jobs) if todo else {}
                for method in methods:
                    if method in fresh:
                        row = fresh[method]
                        if store is not None:
                            store[keys[method]] = asdict(row)
                    else:
                        _debug_print(f"cache hit: {keys[method]}")
                        row = PowerRow(**store[keys[method]])
                    if not timing:
                        row = PowerRow(**{**asdict(row), "mean_runtime_ms": 0.0})
                    if row.invalid:
                        _debug_print(f"cell {spec} {method}: {row.failures} failures, flagged invalid")
                    table.rows.append(row)
    return table


def _run_cell(spec, methods, trials, master_seed, alpha, B, cfg, grid, n_jobs) -> Dict[str, PowerRow]:
    _debug_print(f"cell setting={spec.id} delta={spec.delta:g} n={spec.n_per_group}: {trials} trials x {methods}")
    seeds = [trial_seed(master_seed, spec, t) for t in range(trials)]
    if n_jobs == 1:
        outcomes = [run_trial(spec, s, methods, alpha, B, cfg, grid) for s in seeds]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(
            delayed(run_trial)(spec, s, methods, alpha, B, cfg, grid) for s in seeds
        )
    rows = {}
    for method in methods:
        decisions = [o[method][0] for o in outcomes]
        done = [d for d in decisions if d is not None]
        runtimes = [o[method][1] for o in outcomes if o[method][0] is not None]
        rejections = int(sum(done))
        rows[method] = PowerRow(
            setting=spec.id,
            delta=spec.delta,
            n=spec.n_per_group,
            method=method,
            trials=len(done),
            rejections=rejections,
            rate=rejections / len(done) if done else 0.0,
            mean_runtime_ms=float(np.mean(runtimes)) if runtimes else 0.0,
            failures=len(decisions) - len(done),
        )
    return rows
