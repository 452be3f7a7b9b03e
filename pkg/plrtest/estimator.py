"""
Penalized maximum-likelihood log-density estimation on [0,1] x {0,1}.

The log-density is eta(y) = sum_p c_p K(P_p, y) over the representer points
P = (sample points, quadrature nodes), with K the full kernel or the additive
(reduced) kernel. The coefficients minimise

    l(c) = -(1/n) sum_{i <= n} (Mc)_i + sum_q w_q exp((Mc)_q) + (lambda/2) c'Mc

where M is the model gram over P. The likelihood only sees eta at the sample
and at the nodes, so the minimiser over the whole kernel space lies in this
span, and the reduced fit is the minimiser over a subspace of the full one.

Fits run in a whitened basis of the sample-mean section and the node
sections, where the penalty is the identity and the Newton system is
bounded below by lambda.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import linalg, stats

from .errors import ConfigurationError, ConvergenceError, DomainError, FitDivergenceError
from .kernels import Dataset, GramSet, KernelConfig, model_gram
from .quadrature import QuadGrid, joint_grid
from .utils import _debug_print


class ModelKind(str, Enum):
    """Which gram parameterizes eta."""

    FULL = "full"
    REDUCED = "reduced"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rules and safeguards of the damped Newton solver.

    grad_tol and decrement_tol are relative to max(1, |objective|).
    """

    grad_tol: float = 1e-8
    decrement_tol: float = 1e-12
    max_iter: int = 100
    min_step: float = 2.0 ** -30
    jitter: float = 1e-10
    armijo: float = 1e-4
    max_eta: float = 700.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.min_step < 1:
            raise ConfigurationError(f"min_step must lie in (0, 1), got {self.min_step}")
        if not 0 < self.armijo < 0.5:
            raise ConfigurationError(f"armijo constant must lie in (0, 0.5), got {self.armijo}")
        if self.grad_tol <= 0 or self.decrement_tol <= 0 or self.jitter < 0:
            raise ConfigurationError("tolerances must be positive and jitter nonnegative")


def map_to_unit(raw_x, method: str = "rank", eps: float = 0.05) -> np.ndarray:
    """Map raw observations into [0,1].

    ``rank``: pooled average ranks divided by n+1. ``minmax``: affine map of
    [min, max] onto [eps, 1-eps].
    """
    raw = np.asarray(raw_x, dtype=float).ravel()
    if raw.size == 0:
        raise DomainError("cannot map an empty sample")
    if not np.all(np.isfinite(raw)):
        raise DomainError("raw x values must be finite")
    if method == "rank":
        return stats.rankdata(raw, method="average") / (raw.size + 1)
    if method == "minmax":
        if not 0 <= eps < 0.5:
            raise ConfigurationError(f"minmax margin must lie in [0, 0.5), got {eps}")
        lo, hi = raw.min(), raw.max()
        if hi == lo:
            return np.full(raw.size, 0.5)
        return eps + (1.0 - 2.0 * eps) * (raw - lo) / (hi - lo)
    raise ConfigurationError(f"unknown mapping {method!r}; expected 'rank' or 'minmax'")


def make_dataset(raw_x, z, method: str = "rank") -> Dataset:
    return Dataset(map_to_unit(raw_x, method), np.asarray(z).ravel())


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise DomainError(f"smoothing parameter must be positive and finite, got {lam!r}")


def _kind(model) -> ModelKind:
    try:
        return ModelKind(getattr(model, "value", model))
    except ValueError:
        raise ConfigurationError(f"unknown model {model!r}; expected 'full' or 'reduced'") from None


def representer_points(data: Dataset, grid: QuadGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Sample points followed by the quadrature nodes."""
    return np.concatenate([data.x, grid.x]), np.concatenate([data.z, grid.z])


def _guard(eta: np.ndarray, max_eta: float) -> np.ndarray:
    if not np.all(np.isfinite(eta)) or eta.max() > max_eta:
        raise FitDivergenceError(f"log-density overflow at quadrature nodes (max eta {np.nanmax(eta):.3g})")
    return eta


class _Problem:
    """The objective as a function of the coefficients over the representer points."""

    def __init__(self, grams: GramSet, model, lam: float, grid: QuadGrid, newton: Optional[NewtonConfig] = None):
        _check_lambda(lam)
        self.model = _kind(model)
        self.lam = float(lam)
        self.n = grams.n
        self.max_eta = (newton or NewtonConfig()).max_eta
        px, pz = representer_points(grams.data, grid)
        self.size = px.size
        self.gram = model_gram(self.model, px, pz, px, pz, grams.cfg)
        self.weights = grid.weights

    def _check(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.size,):
            raise DomainError(f"coefficient vector must have length {self.size}, got shape {c.shape}")
        return c

    def _state(self, c):
        c = self._check(c)
        values = self.gram @ c
        return c, values, _guard(values[self.n:], self.max_eta)

    def value(self, c) -> float:
        c, values, eta = self._state(c)
        return float(-values[:self.n].mean() + self.weights @ np.exp(eta) + 0.5 * self.lam * c @ values)

    def gradient(self, c) -> np.ndarray:
        c, _, eta = self._state(c)
        loss = np.concatenate([np.full(self.n, -1.0 / self.n), self.weights * np.exp(eta)])
        return self.gram @ (loss + self.lam * c)

    def hessian(self, c) -> np.ndarray:
        _, _, eta = self._state(c)
        nodes = self.gram[:, self.n:]
        h = (nodes * (self.weights * np.exp(eta))) @ nodes.T + self.lam * self.gram
        return (h + h.T) / 2.0


class _Whitened:
    """The same objective on span{sample-mean section, node sections}.

    With B the gram of that basis and B = V diag(w) V', coordinates
    b = diag(w)^(1/2) V'a turn the penalty into |b|^2; eigenvalues at rounding
    level are dropped.
    """

    def __init__(self, grams: GramSet, model: ModelKind, lam: float, grid: QuadGrid, newton: NewtonConfig):
        data, cfg = grams.data, grams.cfg
        self.n = data.n
        self.lam = float(lam)
        self.max_eta = newton.max_eta
        self.weights = grid.weights

        cross = model_gram(model, data.x, data.z, grid.x, grid.z, cfg)
        mean_nodes = cross.mean(axis=0)
        basis = np.empty((grid.size + 1, grid.size + 1))
        basis[0, 0] = grams.model_gram(model).mean()
        basis[0, 1:] = basis[1:, 0] = mean_nodes
        basis[1:, 1:] = model_gram(model, grid.x, grid.z, grid.x, grid.z, cfg)

        w, v = linalg.eigh(basis)
        keep = w > w[-1] * basis.shape[0] * np.finfo(float).eps
        root = np.sqrt(w[keep])
        self.mean_row = v[0, keep] * root
        self.node_rows = v[1:, keep] * root
        self.to_basis = v[:, keep] / root
        self.dim = int(keep.sum())

    def grid_eta(self, b) -> np.ndarray:
        return _guard(self.node_rows @ b, self.max_eta)

    def value(self, b) -> float:
        eta = self.grid_eta(b)
        return float(-self.mean_row @ b + self.weights @ np.exp(eta) + 0.5 * self.lam * b @ b)

    def gradient(self, b) -> np.ndarray:
        we = self.weights * np.exp(self.grid_eta(b))
        return -self.mean_row + self.node_rows.T @ we + self.lam * b

    def hessian(self, b) -> np.ndarray:
        we = self.weights * np.exp(self.grid_eta(b))
        h = (self.node_rows.T * we) @ self.node_rows + self.lam * np.eye(self.dim)
        return (h + h.T) / 2.0

    def coefficients(self, b) -> np.ndarray:
        """Coefficients over the representer points; the sample ones are all equal."""
        a = self.to_basis @ b
        return np.concatenate([np.full(self.n, a[0] / self.n), a[1:]])


def objective(c, data: Dataset, grams: GramSet, model, lam: float, grid: Optional[QuadGrid] = None) -> float:
    """Penalized negative log-likelihood at coefficients ``c`` over the representer points."""
    _same_data(data, grams)
    return _Problem(grams, model, lam, grid or joint_grid()).value(c)


def gradient(c, data: Dataset, grams: GramSet, model, lam: float, grid: Optional[QuadGrid] = None) -> np.ndarray:
    _same_data(data, grams)
    return _Problem(grams, model, lam, grid or joint_grid()).gradient(c)


def hessian(c, data: Dataset, grams: GramSet, model, lam: float, grid: Optional[QuadGrid] = None) -> np.ndarray:
    _same_data(data, grams)
    return _Problem(grams, model, lam, grid or joint_grid()).hessian(c)


def _same_data(data, grams):
    if data is not grams.data and data.n != grams.n:
        raise DomainError(f"grams were built for {grams.n} observations, data has {data.n}")


@dataclass(frozen=True, eq=False)
class FittedDensity:
    """Result of one penalized likelihood fit.

    ``grid_eta`` and ``eval_eta`` are shifted by ``log_mass`` so the fitted
    density integrates to one on the grid; ``objective`` is the unshifted optimum.
    """

    coeffs: np.ndarray
    model: ModelKind
    grams: GramSet = field(repr=False)
    grid: QuadGrid = field(repr=False)
    lam: float
    final_grad_norm: float
    iterations: int
    objective: float
    trace: Tuple[float, ...] = field(repr=False)
    converged: bool = True
    grid_eta: np.ndarray = field(default=None, repr=False)
    log_mass: float = 0.0

    @property
    def data(self) -> Dataset:
        return self.grams.data

    @property
    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        return representer_points(self.data, self.grid)

    @property
    def gram(self) -> np.ndarray:
        """Model gram over the representer points."""
        px, pz = self.points
        return model_gram(self.model, px, pz, px, pz, self.grams.cfg)

    @property
    def mass(self) -> float:
        """Quadrature integral of exp(eta) over [0,1] x {0,1}."""
        return self.grid.integrate(np.exp(self.grid_eta))


def _newton_direction(h: np.ndarray, g: np.ndarray, jitter: float) -> np.ndarray:
    n = h.shape[0]
    h = h + (jitter * np.trace(h) / n) * np.eye(n)
    try:
        return -linalg.cho_solve(linalg.cho_factor(h, check_finite=False), g, check_finite=False)
    except linalg.LinAlgError:
        return -linalg.solve(h, g, assume_a="sym")


def fit(
    data: Dataset,
    grams: GramSet,
    model,
    lam: float,
    grid: Optional[QuadGrid] = None,
    cfg: Optional[KernelConfig] = None,
    newton: Optional[NewtonConfig] = None,
) -> FittedDensity:
    """Minimise the penalized likelihood by damped Newton iterations from eta = 0.

    Raises ConvergenceError (carrying the last iterate) when the line search
    finds no decrease at the smallest step or max_iter is exhausted.
    """
    _same_data(data, grams)
    if cfg is not None and cfg != grams.cfg:
        raise ConfigurationError("grams were built with a different KernelConfig")
    _check_lambda(lam)
    kind = _kind(model)
    newton = newton or NewtonConfig()
    grid = grid or joint_grid()
    problem = _Whitened(grams, kind, lam, grid, newton)
    slack = 4.0 * np.finfo(float).eps

    b = np.zeros(problem.dim)
    f = problem.value(b)
    trace = [f]
    g = problem.gradient(b)
    gnorm = float(np.linalg.norm(g))
    reason = None
    for it in range(newton.max_iter):
        scale = max(1.0, abs(f))
        if gnorm < newton.grad_tol * scale:
            reason = "gradient"
            break
        step = _newton_direction(problem.hessian(b), g, newton.jitter)
        slope = float(g @ step)
        if -0.5 * slope <= newton.decrement_tol * scale:
            reason = "decrement"
            break

        t = 1.0
        while True:
            try:
                f_new = problem.value(b + t * step)
            except FitDivergenceError:
                f_new = np.inf
            if f_new <= f + newton.armijo * t * slope + slack * scale:
                break
            t /= 2.0
            if t < newton.min_step:
                if -0.5 * slope <= 1e-8 * scale:
                    reason = "line search floor"
                    break
                raise ConvergenceError(
                    f"{kind} model: no decrease along the Newton direction at step {t * 2:.3g} "
                    f"(iteration {it}, gradient norm {gnorm:.3e}, lambda {lam:.3g})",
                    iterate=problem.coefficients(b),
                    model=kind,
                    grad_norm=gnorm,
                )
        if reason is not None:
            break
        b = b + t * step
        f = f_new
        trace.append(f)
        g = problem.gradient(b)
        gnorm = float(np.linalg.norm(g))
        _debug_print(f"newton[{kind}] it={it + 1} f={f:.12g} |g|={gnorm:.3e} step={t:g}")
    else:
        scale = max(1.0, abs(f))
        if gnorm < newton.grad_tol * scale:
            reason = "gradient"
        else:
            raise ConvergenceError(
                f"{kind} model: {newton.max_iter} Newton iterations without convergence "
                f"(gradient norm {gnorm:.3e}, lambda {lam:.3g})",
                iterate=problem.coefficients(b),
                model=kind,
                grad_norm=gnorm,
            )

    _debug_print(f"newton[{kind}] stopped on {reason} after {len(trace) - 1} steps, f={f:.12g}")
    coeffs = problem.coefficients(b)
    coeffs.setflags(write=False)
    eta = problem.grid_eta(b)
    log_mass = float(np.log(grid.integrate(np.exp(eta))))
    grid_eta = eta - log_mass
    grid_eta.setflags(write=False)
    return FittedDensity(
        coeffs=coeffs,
        model=kind,
        grams=grams,
        grid=grid,
        lam=float(lam),
        final_grad_norm=gnorm,
        iterations=len(trace) - 1,
        objective=f,
        trace=tuple(trace),
        converged=True,
        grid_eta=grid_eta,
        log_mass=log_mass,
    )


def eval_eta(fitted: FittedDensity, x, z):
    """Fitted log-density at (x, z), normalized on the grid; scalars in, scalar out."""
    scalar = np.ndim(x) == 0 and np.ndim(z) == 0
    x, z = np.broadcast_arrays(np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(z)))
    px, pz = fitted.points
    sections = model_gram(fitted.model, px, pz, x, z, fitted.grams.cfg)
    out = sections.T @ fitted.coeffs - fitted.log_mass
    return float(out[0]) if scalar else out


def eval_density(fitted: FittedDensity, x, z):
    """exp(eta) divided by its quadrature mass."""
    eta = eval_eta(fitted, x, z)
    return np.exp(eta) / fitted.mass


class AnovaParts(NamedTuple):
    const: np.ndarray
    main_x: np.ndarray
    main_z: np.ndarray
    interaction: np.ndarray


def anova_components(fitted: FittedDensity, x, z) -> AnovaParts:
    """Split eta(x, z) into constant, x, z and interaction parts.

    Averaging over x uses the sample points, averaging over z the group
    proportions; the four parts sum to eta(x, z).
    """
    scalar = np.ndim(x) == 0 and np.ndim(z) == 0
    x, z = np.broadcast_arrays(np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(z)).astype(np.intp))
    data = fitted.data
    w0, w1 = data.omega_hat
    k, n = x.size, data.n

    pts = np.concatenate([x, data.x])
    both = np.concatenate([pts, pts])
    labels = np.repeat(np.array([0, 1], dtype=np.intp), pts.size)
    eta = np.asarray(eval_eta(fitted, both, labels)).reshape(2, k + n)

    averaged_z = w0 * eta[0] + w1 * eta[1]
    const = averaged_z[k:].mean()
    averaged_x = eta[:, k:].mean(axis=1)

    own = eta[z, np.arange(k)]
    main_x = averaged_z[:k] - const
    main_z = averaged_x[z] - const
    interaction = own - const - main_x - main_z
    const = np.full(k, const)
    if scalar:
        return AnovaParts(float(const[0]), float(main_x[0]), float(main_z[0]), float(interaction[0]))
    return AnovaParts(const, main_x, main_z, interaction)
