"""
Reproducing kernels on [0,1] x {0,1} and their empirical gram matrices.

The continuous margin uses the homogeneous Sobolev kernel of order m built
from scaled Bernoulli polynomials; the label margin uses the indicator kernel.
Both margins are split into a mean part and a centred part with plug-in
measures (sample mean over x, group proportions over z), and the product
grams for the full, reduced and interaction models are assembled from them.
The reduced model is fitted with the kernel of the additive functions, which
needs no averaging measure and sits inside the full space.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, DomainError, ShapeError, PLRError
from .utils import _debug_print

ArrayLike = Union[float, np.ndarray]

# Model tags accepted by model_gram and GramSet.model_gram.
_MODELS = ("full", "reduced")


@dataclass(frozen=True)
class KernelConfig:
    """Smoothness order and numerical tolerances shared by all kernel computations."""

    m: int = 2
    eig_floor: float = 1e-10
    psd_tol: float = 1e-8

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ConfigurationError(f"Sobolev order m must be 1 or 2, got {self.m!r}")
        if not self.eig_floor > 0:
            raise ConfigurationError(f"eig_floor must be positive, got {self.eig_floor!r}")
        if not self.psd_tol >= 0:
            raise ConfigurationError(f"psd_tol must be nonnegative, got {self.psd_tol!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired observations (x_i in [0,1], z_i in {0,1}).

    Arrays are copied and made read-only on construction.
    """

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        z_raw = np.asarray(self.z)
        if x.ndim != 1 or z_raw.ndim != 1:
            raise ShapeError("x and z must be one-dimensional")
        if x.shape != z_raw.shape:
            raise ShapeError(f"x and z lengths differ ({x.size} != {z_raw.size})")
        if x.size < 2:
            raise DomainError(f"need at least 2 observations, got {x.size}")
        if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
            raise DomainError("x values must lie in [0, 1]; map raw data with map_to_unit first")
        if not np.all(np.isin(z_raw, (0, 1))):
            raise DomainError("labels must be 0 or 1")
        z = z_raw.astype(np.intp)
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def n1(self) -> int:
        return int(self.z.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def omega_hat(self) -> Tuple[float, float]:
        """Group proportions (n0/n, n1/n)."""
        return (self.n0 / self.n, self.n1 / self.n)

    def require_two_groups(self):
        if self.n0 == 0 or self.n1 == 0:
            raise DomainError("single group: both labels 0 and 1 must be present")

    def group(self, label: int) -> np.ndarray:
        return self.x[self.z == label]

    def reindex(self, order) -> "Dataset":
        """Same pairs, listed in a different order."""
        order = np.asarray(order)
        return Dataset(self.x[order], self.z[order])

    def with_labels(self, z) -> "Dataset":
        return Dataset(self.x, z)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, n0={self.n0}, n1={self.n1})"


def bernoulli_k(r: int, t: ArrayLike) -> ArrayLike:
    """Scaled Bernoulli polynomial k_r(t) = B_r(t)/r! for r in {2, 4}."""
    t = np.asarray(t, dtype=float)
    if r == 2:
        out = (t * t - t + 1.0 / 6.0) / 2.0
    elif r == 4:
        s = t - 0.5
        s2 = s * s
        out = (s2 * s2 - 0.5 * s2 + 7.0 / 240.0) / 24.0
    else:
        raise ConfigurationError(f"scaled Bernoulli polynomial k_{r} is not implemented (r must be 2 or 4)")
    return out[()] if out.ndim == 0 else out


def _check_unit(*arrays):
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.size and (not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0):
            raise DomainError("kernel arguments must lie in [0, 1]")


def sobolev_kernel(x: ArrayLike, x_tilde: ArrayLike, cfg: Optional[KernelConfig] = None) -> ArrayLike:
    """K(x, x~) = 1 + (-1)^(m-1) k_2m(|x - x~|); broadcasts over array arguments."""
    cfg = cfg or KernelConfig()
    _check_unit(x, x_tilde)
    lag = np.abs(np.asarray(x, dtype=float) - np.asarray(x_tilde, dtype=float))
    sign = 1.0 if cfg.m % 2 == 1 else -1.0
    out = 1.0 + sign * np.asarray(bernoulli_k(2 * cfg.m, lag))
    return out[()] if out.ndim == 0 else out


def sobolev_gram(x: np.ndarray, y: np.ndarray, cfg: Optional[KernelConfig] = None) -> np.ndarray:
    """Cross gram [K(x_i, y_k)] of shape (len(x), len(y))."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    return np.asarray(sobolev_kernel(x[:, None], y[None, :], cfg), dtype=float)


def discrete_kernel(z: ArrayLike, z_tilde: ArrayLike) -> ArrayLike:
    """Indicator kernel 1{z == z~}."""
    out = (np.asarray(z) == np.asarray(z_tilde)).astype(float)
    return out[()] if out.ndim == 0 else out


def decompose_discrete(omega) -> Tuple[np.ndarray, np.ndarray]:
    """Split the indicator kernel on {0,1} into (K0, K1) under group weights omega.

    K0(z, z~) = w_z + w_z~ - sum(w^2) and K1 = indicator - K0, both as 2x2 tables
    indexed by the labels.
    """
    w = np.asarray(omega, dtype=float)
    if w.shape != (2,):
        raise ShapeError(f"omega must hold two group weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"group weights must be nonnegative and sum to 1, got {tuple(w)}")
    sq = float(np.dot(w, w))
    k0 = w[:, None] + w[None, :] - sq
    k1 = np.eye(2) - k0
    return k0, k1


def decompose_continuous_gram(q_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Plug-in mean/centred split of a marginal gram.

    q0 holds rowmean + colmean - grandmean; q1 = q - q0 is the double-centred
    gram C q C with C = I - 11'/n.
    """
    q = np.asarray(q_x, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ShapeError(f"gram must be square, got shape {q.shape}")
    row = q.mean(axis=1)
    grand = row.mean()
    q0 = row[:, None] + row[None, :] - grand
    q1 = q - q0
    return q0, q1


def _tag(model) -> str:
    # ModelKind is a str Enum; accept it or a plain string
    key = getattr(model, "value", model)
    if key not in _MODELS:
        raise ConfigurationError(f"unknown model {model!r}; expected one of {_MODELS}")
    return key


def reduced_kernel(x: ArrayLike, x_tilde: ArrayLike, z: ArrayLike, z_tilde: ArrayLike,
                   cfg: Optional[KernelConfig] = None) -> ArrayLike:
    """Reproducing kernel of the additive functions f(x) + g(z) inside the full space.

    The full space splits orthogonally into constants and the centred periodic
    part P of the Sobolev space, tensored with R^2. Additive functions are
    constants x R^2 plus P x span{(1,1)}, so their kernel under the inherited
    norm is 1{z == z~} + (K(x, x~) - 1)/2. No averaging measure enters.
    """
    centred = np.asarray(sobolev_kernel(x, x_tilde, cfg)) - 1.0
    out = np.asarray(discrete_kernel(z, z_tilde)) + 0.5 * centred
    return out[()] if out.ndim == 0 else out


def model_gram(model, x, z, x_tilde, z_tilde, cfg: Optional[KernelConfig] = None) -> np.ndarray:
    """Cross gram of the full or reduced model kernel between (x, z) and (x~, z~)."""
    key = _tag(model)
    x = np.asarray(x, dtype=float).ravel()
    x_tilde = np.asarray(x_tilde, dtype=float).ravel()
    z = np.asarray(z).ravel()
    z_tilde = np.asarray(z_tilde).ravel()
    if x.shape != z.shape or x_tilde.shape != z_tilde.shape:
        raise ShapeError("x and z must have equal lengths on both sides")
    if not (np.all(np.isin(z, (0, 1))) and np.all(np.isin(z_tilde, (0, 1)))):
        raise DomainError("labels must be 0 or 1")
    kx = sobolev_gram(x, x_tilde, cfg)
    kz = discrete_kernel(z[:, None], z_tilde[None, :])
    if key == "full":
        return kx * kz
    return kz + 0.5 * (kx - 1.0)


@dataclass(frozen=True, eq=False)
class GramSet:
    """Empirical grams of one Dataset under one KernelConfig.

    q_reduced and q_interaction use the plug-in split and drive the null
    spectrum and the score statistic. The reduced model itself is fitted with
    the additive kernel (q_additive), which is nested in the full space.
    """

    data: Dataset
    cfg: KernelConfig
    q_x: np.ndarray
    q_z: np.ndarray
    q0_x: np.ndarray
    q1_x: np.ndarray
    q0_z: np.ndarray
    q1_z: np.ndarray
    q_full: np.ndarray
    q_reduced: np.ndarray
    q_interaction: np.ndarray

    @property
    def n(self) -> int:
        return self.data.n

    @cached_property
    def q_additive(self) -> np.ndarray:
        return self.q_z + 0.5 * (self.q_x - 1.0)

    def model_gram(self, model) -> np.ndarray:
        """Sample gram of the kernel ``model`` is fitted with."""
        return self.q_full if _tag(model) == "full" else self.q_additive

    @cached_property
    def interaction_spectrum(self) -> np.ndarray:
        """Eigenvalues of q_interaction, nonincreasing, negatives clipped to 0."""
        w = linalg.eigvalsh(self.q_interaction)
        return np.clip(w[::-1], 0.0, None)

    def check(self, strict_reduced: bool = False) -> Dict[str, Any]:
        """Verify symmetry, telescoping and positivity; return the measured residuals.

        Raises PLRError naming the first violated property.
        """
        report = {}
        for name in ("q_x", "q_z", "q0_x", "q1_x", "q0_z", "q1_z", "q_full", "q_reduced", "q_interaction"):
            a = getattr(self, name)
            report[f"asym_{name}"] = float(np.max(np.abs(a - a.T)))
        report["split_x"] = float(np.max(np.abs(self.q0_x + self.q1_x - self.q_x)))
        report["split_z"] = float(np.max(np.abs(self.q0_z + self.q1_z - self.q_z)))
        report["split_full"] = float(np.max(np.abs(self.q_reduced + self.q_interaction - self.q_full)))
        psd_names = ["q_full", "q_interaction", "q_additive"] + (["q_reduced"] if strict_reduced else [])
        for name in ("q_full", "q_reduced", "q_interaction", "q_additive"):
            report[f"min_eig_{name}"] = float(linalg.eigvalsh(getattr(self, name))[0])

        for key, value in report.items():
            if key.startswith(("asym_", "split_")) and value > 1e-12:
                raise PLRError(f"gram invariant {key} violated: {value:.3e} > 1e-12")
        for name in psd_names:
            if report[f"min_eig_{name}"] < -self.cfg.psd_tol:
                raise PLRError(f"{name} is not positive semidefinite: min eigenvalue {report[f'min_eig_{name}']:.3e}")
        if report["min_eig_q_reduced"] < -self.cfg.psd_tol:
            _debug_print(f"plug-in q_reduced is indefinite: min eigenvalue {report['min_eig_q_reduced']:.3e}")
        return report


def build_grams(data: Dataset, cfg: Optional[KernelConfig] = None, q_x: Optional[np.ndarray] = None) -> GramSet:
    """Assemble every gram the estimator and the calibration need.

    ``q_x`` may be passed to reuse a marginal gram across relabelings of the
    same x values (permutation replicates).
    """
    cfg = cfg or KernelConfig()
    if q_x is None:
        q_x = sobolev_gram(data.x, data.x, cfg)
    elif q_x.shape != (data.n, data.n):
        raise ShapeError(f"precomputed q_x has shape {q_x.shape}, expected {(data.n, data.n)}")
    q0_x, q1_x = decompose_continuous_gram(q_x)

    z = data.z
    k0_z, k1_z = decompose_discrete(data.omega_hat)
    q_z = discrete_kernel(z[:, None], z[None, :])
    q0_z = k0_z[z[:, None], z[None, :]]
    q1_z = k1_z[z[:, None], z[None, :]]

    q_full = q_x * q_z
    q_interaction = q1_x * q1_z
    q_reduced = q0_x * q0_z + q1_x * q0_z + q0_x * q1_z

    return GramSet(
        data=data,
        cfg=cfg,
        q_x=q_x,
        q_z=q_z,
        q0_x=q0_x,
        q1_x=q1_x,
        q0_z=q0_z,
        q1_z=q1_z,
        q_full=q_full,
        q_reduced=q_reduced,
        q_interaction=q_interaction,
    )
