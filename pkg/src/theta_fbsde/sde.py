"""Forward particle simulation of the controlled state equation.

The state follows an Euler scheme driven by Gaussian increments from
counter-based per-particle streams, so parallel and serial runs, and runs over
nested horizons, see bit-identical noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError, UsageError
from .measures import EmpiricalMeasure
from .uncertainty import AmbiguityMap


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` steps on [0, horizon]."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise ConfigurationError(f"need at least one step, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_nodes)


# ---------------------------------------------------------------------------
# coefficient descriptors


@dataclass(frozen=True, eq=False)
class AffineControlDrift:
    """b(t, x, w) = C0 - C1 (1 + 3 w) x with C1 symmetric."""

    C0: np.ndarray
    C1: np.ndarray

    def __post_init__(self):
        c0 = np.atleast_1d(np.asarray(self.C0, dtype=float))
        c1 = np.atleast_2d(np.asarray(self.C1, dtype=float))
        if c0.ndim != 1 or c1.shape != (c0.size, c0.size):
            raise ConfigurationError("C0 must be a vector and C1 a matching square matrix")
        if not (np.all(np.isfinite(c0)) and np.all(np.isfinite(c1))):
            raise ConfigurationError("drift coefficients must be finite")
        if not np.allclose(c1, c1.T, atol=1e-12):
            raise ConfigurationError("C1 must be symmetric")
        object.__setattr__(self, "C0", c0)
        object.__setattr__(self, "C1", c1)

    def x_lipschitz(self, control_lo: float, control_hi: float) -> float:
        gain = max(abs(1.0 + 3.0 * control_lo), abs(1.0 + 3.0 * control_hi))
        return float(np.linalg.norm(self.C1, 2)) * gain

    def __call__(self, t, x, a, mu):
        mult = 1.0 + 3.0 * np.asarray(a, dtype=float)
        return self.C0 - mult[..., None] * (x @ self.C1)


@dataclass(frozen=True)
class CallableDrift:
    """Generic drift (t, x, a, mu) -> (n, k) with a declared Lipschitz bound."""

    fn: Callable
    lipschitz: float

    def __post_init__(self):
        if not math.isfinite(self.lipschitz):
            raise ConfigurationError("a finite Lipschitz bound must be declared for generic drift")

    def __call__(self, t, x, a, mu):
        return self.fn(t, x, a, mu)


@dataclass(frozen=True, eq=False)
class ConstantVolatility:
    """sigma(t, x, a, mu) = fixed (k, d) matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if not np.all(np.isfinite(m)):
            raise ConfigurationError("volatility matrix must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def noise_dim(self) -> int:
        return int(self.matrix.shape[1])

    def __call__(self, t, x, a, mu):
        return self.matrix


@dataclass(frozen=True)
class CallableVolatility:
    """Generic volatility (t, x, a, mu) -> (n, k, d) with a declared bound."""

    fn: Callable
    lipschitz: float
    noise_dim: int

    def __post_init__(self):
        if not math.isfinite(self.lipschitz):
            raise ConfigurationError("a finite Lipschitz bound must be declared for generic volatility")
        if self.noise_dim < 1:
            raise ConfigurationError("noise dimension must be at least 1")

    def __call__(self, t, x, a, mu):
        return self.fn(t, x, a, mu)


@dataclass(frozen=True, eq=False)
class LinearTerminal:
    """phi(x) = coeffs . x"""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("terminal coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __call__(self, x):
        return x @ self.coeffs


@dataclass(frozen=True)
class QuadraticTerminal:
    """phi(x) = |x|^2 (locally Lipschitz; fine on bounded clouds)."""

    def __call__(self, x):
        return np.sum(x * x, axis=-1)


@dataclass(frozen=True)
class CallableTerminal:
    fn: Callable
    lipschitz: float = math.inf

    def __call__(self, x):
        return self.fn(x)


@dataclass(frozen=True)
class ConstantTerminal:
    value: float

    def __call__(self, x):
        return np.full(x.shape[:-1], float(self.value))


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficient bundle of the coupled system."""

    horizon: float
    x0: np.ndarray
    drift: AffineControlDrift | CallableDrift
    volatility: ConstantVolatility | CallableVolatility
    driver: object
    terminal: object
    ambiguity: AmbiguityMap
    noise_dim: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise ConfigurationError("x0 must be a finite vector")
        object.__setattr__(self, "x0", x0)
        d = self.noise_dim
        if hasattr(self.volatility, "noise_dim"):
            if d is not None and d != self.volatility.noise_dim:
                raise ConfigurationError(
                    f"noise_dim {d} contradicts the volatility shape {self.volatility.noise_dim}"
                )
            d = self.volatility.noise_dim
        if d is None:
            raise ConfigurationError("noise_dim is required with a generic volatility")
        object.__setattr__(self, "noise_dim", int(d))
        if isinstance(self.drift, AffineControlDrift) and self.drift.C0.size != x0.size:
            raise ConfigurationError("drift dimension does not match x0")

    @property
    def state_dim(self) -> int:
        return int(self.x0.size)

    def terminal_at_start(self) -> float:
        return float(np.asarray(self.terminal(self.x0[None, :])).ravel()[0])


# ---------------------------------------------------------------------------
# noise and forward integration


def brownian_increments(
    seed: int, n_particles: int, n_steps: int, noise_dim: int, dt: float
) -> np.ndarray:
    """Increments of shape (n_steps, n_particles, noise_dim), scaled by sqrt(dt).

    Particle ``p`` draws from a Philox stream keyed by (seed, p) in step-major
    order, so any prefix of the horizon and any particle batching reproduce the
    same numbers.
    """
    if not 0 <= int(seed) < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed}")
    out = np.empty((n_steps, n_particles, noise_dim))
    for p in range(n_particles):
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, p], dtype=np.uint64))
        )
        out[:, p, :] = gen.standard_normal((n_steps, noise_dim))
    out *= math.sqrt(dt)
    return out


def simulate_forward(
    spec: ProblemSpec,
    grid: TimeGrid,
    controls: np.ndarray,
    laws: Sequence[EmpiricalMeasure | None],
    noise: int | np.ndarray,
) -> np.ndarray:
    """Euler paths of the state under given controls and measure flow.

    ``controls`` has shape (n_nodes, n) or (n_nodes,) for state-free controls;
    the terminal row is unused.  ``noise`` is either an integer seed or a
    precomputed increment array of shape (n_steps, n, noise_dim) already
    scaled by sqrt(dt).  Returns an (n_nodes, n, k) array.
    """
    if abs(grid.horizon - spec.horizon) > 1e-12 * max(1.0, spec.horizon):
        raise UsageError(
            f"grid horizon {grid.horizon} does not match the problem horizon {spec.horizon}"
        )
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    if controls.shape[0] != grid.n_nodes:
        raise UsageError("controls must be given at every grid node")
    if isinstance(noise, (int, np.integer)):
        n = controls.shape[1]
        increments = brownian_increments(int(noise), n, grid.n_steps, spec.noise_dim, grid.dt)
    else:
        increments = np.asarray(noise, dtype=float)
        if increments.ndim != 3 or increments.shape[0] != grid.n_steps or increments.shape[2] != spec.noise_dim:
            raise UsageError(
                f"noise increments must be (n_steps, n, noise_dim), got {increments.shape}"
            )
        n = increments.shape[1]
    if controls.shape[1] not in (1, n):
        raise UsageError(
            f"controls are for {controls.shape[1]} particles but the noise carries {n}"
        )

    k = spec.state_dim
    xs = np.empty((grid.n_nodes, n, k))
    x = np.tile(spec.x0, (n, 1))
    xs[0] = x
    times = grid.times
    for i in range(grid.n_steps):
        a_i = controls[i] if controls.shape[1] == n else np.full(n, controls[i, 0])
        b = spec.drift(times[i], x, a_i, laws[i])
        s = spec.volatility(times[i], x, a_i, laws[i])
        if np.ndim(s) == 2:
            diffusion = increments[i] @ np.asarray(s).T
        else:
            diffusion = np.einsum("nkd,nd->nk", np.asarray(s), increments[i])
        x = x + np.asarray(b) * grid.dt + diffusion
        if not np.all(np.isfinite(x)):
            raise DivergenceError("state became non-finite", node=i + 1)
        xs[i + 1] = x
    return xs


# ---------------------------------------------------------------------------
# assembled solutions


@dataclass(frozen=True, eq=False)
class SolutionPaths:
    """Node-by-particle arrays of the solution plus per-node value laws."""

    times: np.ndarray              # (n_nodes,)
    X: np.ndarray                  # (n_nodes, n, k)
    Y: np.ndarray                  # (n_nodes, n)
    Z: np.ndarray                  # (n_nodes, n, d)
    A: np.ndarray                  # (n_nodes, n)
    measures: tuple[EmpiricalMeasure, ...]

    def __post_init__(self):
        n_nodes, n, _ = self.X.shape
        if self.Y.shape != (n_nodes, n) or self.A.shape != (n_nodes, n):
            raise ConfigurationError("Y and A must be (n_nodes, n) arrays")
        if self.Z.shape[:2] != (n_nodes, n):
            raise ConfigurationError("Z must be an (n_nodes, n, d) array")
        if self.times.shape != (n_nodes,) or len(self.measures) != n_nodes:
            raise ConfigurationError("times and measures must cover every node")

    @property
    def n_particles(self) -> int:
        return int(self.X.shape[1])

    @property
    def y0(self) -> float:
        return float(np.mean(self.Y[0]))


def write_paths_csv(path, sol: SolutionPaths) -> None:
    """Dump paths as CSV with columns t, particle, X_1..X_k, Y, Z_1..Z_d, A.

    Formatting is fixed at 17 significant digits so identical runs produce
    byte-identical files.
    """
    k = sol.X.shape[2]
    d = sol.Z.shape[2]
    header = (
        ["t", "particle"]
        + [f"X_{j + 1}" for j in range(k)]
        + ["Y"]
        + [f"Z_{j + 1}" for j in range(d)]
        + ["A"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(sol.times):
            for p in range(sol.n_particles):
                row = [f"{t:.17g}", str(p)]
                row += [f"{v:.17g}" for v in sol.X[i, p]]
                row.append(f"{sol.Y[i, p]:.17g}")
                row += [f"{v:.17g}" for v in sol.Z[i, p]]
                row.append(f"{sol.A[i, p]:.17g}")
                fh.write(",".join(row) + "\n")
