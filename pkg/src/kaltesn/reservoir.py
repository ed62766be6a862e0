"""Sparse random reservoirs, leaky-tanh state updates and linear readouts."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .timeseries import TimeSeries

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    "tanh": np.tanh,
    "identity": lambda x: x,
}


class DegenerateReservoirError(ValueError):
    """The sampled recurrent matrix has zero spectral radius; resample with a new seed."""


@dataclass(frozen=True)
class ReservoirConfig:
    n: int
    d: int
    p: float = 0.01
    spectral_radius_target: float = 0.9
    alpha: float = 0.3
    input_scale: float = 1.0
    seed: int = 0
    activation: str = "tanh"
    enforce_esp: bool = True

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if not 0 < self.p < 1:
            raise ValueError(f"connection probability must lie in (0, 1), got {self.p}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"leakage rate must lie in (0, 1], got {self.alpha}")
        if not self.spectral_radius_target > 0:
            raise ValueError("spectral_radius_target must be positive")
        if self.enforce_esp and not self.spectral_radius_target < 1:
            raise ValueError(
                f"spectral_radius_target={self.spectral_radius_target} breaks the echo-state property"
            )
        if not self.input_scale > 0:
            raise ValueError("input_scale must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Reservoir:
    """Fixed recurrent weights ``W`` (sparse n x n), input weights ``W_in`` (n x d) and state ``r``."""

    W: sparse.csr_matrix
    W_in: np.ndarray
    alpha: float
    activation: str = "tanh"
    r: np.ndarray = field(default=None)
    config: ReservoirConfig | None = None

    def __post_init__(self):
        self.W = sparse.csr_matrix(self.W, dtype=float)
        self.W_in = np.atleast_2d(np.asarray(self.W_in, dtype=float))
        if self.W.shape != (self.n, self.n):
            raise ValueError(f"W must be square n x n, got {self.W.shape}")
        if self.W_in.shape[0] != self.n:
            raise ValueError(f"W_in must have {self.n} rows, got {self.W_in.shape}")
        if self.r is None:
            self.r = np.zeros(self.n)
        else:
            self.r = np.asarray(self.r, dtype=float).copy()

    @property
    def n(self) -> int:
        return self.W_in.shape[0]

    @property
    def d(self) -> int:
        return self.W_in.shape[1]

    @property
    def psi(self):
        return ACTIVATIONS[self.activation]

    def reset(self) -> None:
        self.r = np.zeros(self.n)

    def clone(self) -> "Reservoir":
        """Deep copy; weights are shared by value, state is independent."""
        return copy.deepcopy(self)

    def advance(self, states: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """Apply the leaky update to a batch of states without touching ``self.r``.

        ``states`` is (n,) or (n, M); ``inputs`` is (d,) or (d, M).
        """
        pre = self.W @ states + self.W_in @ inputs
        return (1.0 - self.alpha) * states + self.alpha * self.psi(pre)

    def save(self, path) -> None:
        save_reservoir(self, path)


@dataclass
class ReadoutWeights:
    W_out: np.ndarray

    def __post_init__(self):
        self.W_out = np.atleast_2d(np.asarray(self.W_out, dtype=float))
        if not np.all(np.isfinite(self.W_out)):
            raise ValueError("readout weights contain non-finite entries")

    @property
    def d(self) -> int:
        return self.W_out.shape[0]

    @property
    def n(self) -> int:
        return self.W_out.shape[1]


def spectral_radius(W, max_iter: int = 1000, tol: float = 1e-10, seed: int = 0) -> float:
    """Largest eigenvalue magnitude of ``W``.

    Power iteration first. A dominant complex pair (or a tie in modulus) keeps
    the Rayleigh estimate oscillating, so on non-convergence the estimate is
    taken from a Krylov subspace instead (implicitly restarted Arnoldi), with a
    dense eigenvalue solve as the last resort for small matrices.
    """
    W = sparse.csr_matrix(W)
    n = W.shape[0]
    if W.nnz == 0:
        return 0.0
    if n <= 2:
        return float(np.max(np.abs(np.linalg.eigvals(W.toarray()))))

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for it in range(max_iter):
        y = W @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            # x hit the null space; nilpotent matrices end up here
            break
        new = norm
        x = y / norm
        if abs(new - estimate) <= tol * new:
            # Converged magnitude; confirm it is an eigenvalue and not a rotating pair.
            residual = np.linalg.norm(W @ x - (x @ (W @ x)) * x)
            if residual <= 1e-8 * new:
                return float(abs(x @ (W @ x)))
        estimate = new

    logger.debug("power iteration did not converge after %d iterations; using Arnoldi", max_iter)
    if n <= 64:
        return float(np.max(np.abs(np.linalg.eigvals(W.toarray()))))
    try:
        vals = splinalg.eigs(W, k=min(6, n - 2), which="LM", tol=1e-13,
                             return_eigenvectors=False, v0=rng.standard_normal(n),
                             maxiter=20 * n)
        return float(np.max(np.abs(vals)))
    except splinalg.ArpackNoConvergence:
        logger.debug("ARPACK did not converge; dense eigenvalue solve")
        return float(np.max(np.abs(np.linalg.eigvals(W.toarray()))))


def _erdos_renyi(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Directed G(n, p) edge list (self-loops allowed): each of the n*n slots is kept w.p. p."""
    count = rng.binomial(n * n, p)
    flat = np.sort(rng.choice(n * n, size=count, replace=False))
    return flat // n, flat % n


def build_reservoir(config: ReservoirConfig) -> Reservoir:
    """Sample ``W`` and ``W_in`` from ``config.seed`` and rescale ``W`` to the target spectral radius.

    Raises:
        DegenerateReservoirError: if the sampled ``W`` has spectral radius zero.
    """
    rng = np.random.default_rng(config.seed)
    rows, cols = _erdos_renyi(config.n, config.p, rng)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(config.n, config.n))
    W_in = rng.uniform(-config.input_scale, config.input_scale, size=(config.n, config.d))

    rho = spectral_radius(W, seed=config.seed)
    if not rho > 1e-12:
        raise DegenerateReservoirError(
            f"sampled W (n={config.n}, p={config.p}, seed={config.seed}) has zero spectral radius; "
            "resample with a new seed"
        )
    W = W * (config.spectral_radius_target / rho)
    return Reservoir(W=W, W_in=W_in, alpha=config.alpha, activation=config.activation, config=config)


def step(res: Reservoir, u) -> np.ndarray:
    """Advance the stored state by one input and return it."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != res.d:
        raise ValueError(f"input has dimension {u.shape[0]}, reservoir expects {res.d}")
    if not np.all(np.isfinite(u)):
        raise ValueError("input contains non-finite entries")
    res.r = res.advance(res.r, u)
    return res.r


def readout(w: ReadoutWeights, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape[0] != w.n:
        raise ValueError(f"state has dimension {r.shape[0]}, readout expects {w.n}")
    return w.W_out @ r


def drive(res: Reservoir, inputs: TimeSeries) -> np.ndarray:
    """Step through every column of ``inputs`` and collect the states, shape (n, N)."""
    if inputs.d != res.d:
        raise ValueError(f"inputs have dimension {inputs.d}, reservoir expects {res.d}")
    states = np.empty((res.n, len(inputs)))
    r = res.r
    for k in range(len(inputs)):
        r = res.advance(r, inputs.values[:, k])
        states[:, k] = r
    res.r = r.copy()
    return states


def predict_autonomous(res: Reservoir, w: ReadoutWeights, warmup: TimeSeries, horizon: int) -> TimeSeries:
    """Drive with ``warmup``, then run ``horizon`` closed-loop steps feeding each output back as input.

    The first prediction is the readout after the last warmup sample, i.e. the
    estimate of the sample following the warmup.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if w.d != res.d or w.n != res.n:
        raise ValueError(f"readout shape {w.W_out.shape} does not fit reservoir (n={res.n}, d={res.d})")
    drive(res, warmup)
    out = np.empty((res.d, horizon))
    y = w.W_out @ res.r
    out[:, 0] = y
    for k in range(1, horizon):
        res.r = res.advance(res.r, y)
        y = w.W_out @ res.r
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"autonomous prediction diverged at step {k}")
        out[:, k] = y
    start = warmup.start_time + len(warmup) * warmup.dt
    return TimeSeries(out, warmup.dt, start)


def save_reservoir(res: Reservoir, path) -> None:
    """Dump config, W triplets, W_in and r to an ``.npz`` archive (bit-exact round trip)."""
    coo = res.W.tocoo()
    cfg = asdict(res.config) if res.config is not None else {}
    np.savez(
        path,
        W_row=coo.row, W_col=coo.col, W_val=coo.data, W_shape=np.array(coo.shape),
        W_in=res.W_in, r=res.r, alpha=np.array(res.alpha),
        activation=np.array(res.activation),
        config_keys=np.array(list(cfg.keys()), dtype=str),
        config_vals=np.array([repr(v) for v in cfg.values()], dtype=str),
    )


def load_reservoir(path) -> Reservoir:
    import ast

    with np.load(path, allow_pickle=False) as data:
        W = sparse.csr_matrix(
            (data["W_val"], (data["W_row"], data["W_col"])), shape=tuple(data["W_shape"])
        )
        cfg = {k: ast.literal_eval(v) for k, v in zip(data["config_keys"], data["config_vals"])}
        return Reservoir(
            W=W, W_in=data["W_in"], alpha=float(data["alpha"]),
            activation=str(data["activation"]), r=data["r"],
            config=ReservoirConfig(**cfg) if cfg else None,
        )
