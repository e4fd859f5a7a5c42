"""Kernel regression machinery: RR, SVR, MRR and MSVR.

All four models share one dual representation: stored training inputs X, an
N x 3 dual weight matrix A and a bias 3-vector, predicting
F(x) = sum_i k(x_i, x) A_i + b.

MRR solves joint kernel ridge regression in closed form through the bordered
system

    [K + I/(2C)  1] [A]   [Y]
    [1^T         0] [b] = [0]

whose rows are exactly the stationarity conditions of the quadratic-loss
objective with an unregularized bias.

MSVR couples the outputs through a hyperspherical epsilon-insensitive loss
on the residual 2-norm u_i = ||y_i - F(x_i)||: zero inside the tube,
(u - eps)^2 outside. A per-output tube with independent weights would
decouple into three scalar SVRs, losing the cross-channel coupling that is
the whole point of the multi-output model. The solver is iteratively
reweighted least squares: each round rebuilds per-sample weights
a_i = 2C (u_i - eps) / u_i on the active set, solves the weighted ridge
system, and backtracks along the update direction until the true objective
decreases, so the reported objective sequence is non-increasing.

SVR is the same IRWLS restricted to one output at a time (|r| tube); RR is
the one-output ridge special case. Both train the three channels
independently.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._binio import atomic_write_bytes, pack_string, read_string
from .core import (
    ConfigError,
    FeatureVector,
    FormatError,
    Illuminant,
    InputError,
    InvalidIlluminantError,
    LabeledSample,
    normalize_illuminant,
)

MODEL_MAGIC = b"ILKMDL1"
MODEL_VERSION = 1
MODEL_KINDS = ("rr", "svr", "mrr", "msvr")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice: "linear" or "rbf" with coefficient gamma."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not (math.isfinite(self.gamma) and self.gamma > 0):
                raise ConfigError(f"rbf kernel needs finite gamma > 0, got {self.gamma}")
        elif self.gamma is not None:
            raise ConfigError("linear kernel takes no gamma")


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix k(a_i, b_j); symmetric PSD when b is a."""
    if b is None:
        b = a
    if spec.kind == "linear":
        return a @ b.T
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SolverConfig:
    """IRWLS stopping thresholds; defaults keep desk-scale oracle checks tight."""

    rel_tol: float = 1e-8
    max_iter: int = 500
    max_halvings: int = 30


@dataclass(frozen=True)
class TrainingInfo:
    converged: bool
    n_iter: int
    objective_history: tuple[float, ...]


@dataclass(frozen=True)
class RegressionModel:
    """Trained kernel machine in dual form."""

    model_kind: str
    kernel: KernelSpec
    training_inputs: np.ndarray   # (N, d)
    dual_weights: np.ndarray      # (N, 3)
    bias: np.ndarray              # (3,)
    hyperparams: dict
    source_tag: str = ""
    training: tuple[TrainingInfo, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise InputError(f"unknown model kind {self.model_kind!r}")
        x = np.array(self.training_inputs, dtype=np.float64, order="C")
        a = np.array(self.dual_weights, dtype=np.float64, order="C")
        b = np.array(self.bias, dtype=np.float64, order="C")
        if x.ndim != 2 or a.ndim != 2 or a.shape != (x.shape[0], 3) or b.shape != (3,):
            raise InputError(
                f"inconsistent model shapes: inputs {x.shape}, weights {a.shape}, bias {b.shape}")
        for name, arr in (("inputs", x), ("weights", a), ("bias", b)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"model {name} contain non-finite values")
        for name, arr in (("training_inputs", x), ("dual_weights", a), ("bias", b)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.training_inputs.shape[1]

    @property
    def converged(self) -> bool:
        return all(t.converged for t in self.training) if self.training else True

    @property
    def n_support(self) -> int:
        return int(np.count_nonzero(np.any(self.dual_weights != 0.0, axis=1)))


def _stack_samples(samples) -> tuple[np.ndarray, np.ndarray, str]:
    samples = list(samples)
    if len(samples) < 2:
        raise InputError(f"need at least 2 training samples, got {len(samples)}")
    dims = {s.features.dim for s in samples}
    if len(dims) != 1:
        raise InputError(f"inconsistent feature dimensions: {sorted(dims)}")
    tags = {s.features.source_tag for s in samples}
    if len(tags) != 1:
        raise InputError(f"mixed feature sources: {sorted(tags)}")
    x = np.stack([s.features.values for s in samples])
    y = np.stack([s.target.as_array() for s in samples])
    return x, y, tags.pop()


def _check_c(c: float) -> float:
    if not (math.isfinite(c) and c > 0):
        raise ConfigError(f"C must be finite and > 0, got {c}")
    return float(c)


def _ridge_solve(kernel: np.ndarray, targets: np.ndarray, c: float,
                 weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Solve the bordered ridge system; `weights` selects the active-set variant.

    Returns dual coefficients (zero on inactive rows) and the bias row.
    """
    n = kernel.shape[0]
    if weights is None:
        active = np.arange(n)
        diag = np.full(n, 1.0 / (2.0 * c))
    else:
        active = np.flatnonzero(weights > 0)
        diag = 1.0 / weights[active]
    m = active.size
    system = np.zeros((m + 1, m + 1))
    system[:m, :m] = kernel[np.ix_(active, active)]
    system[:m, :m][np.diag_indices(m)] += diag
    system[:m, m] = 1.0
    system[m, :m] = 1.0
    rhs = np.zeros((m + 1, targets.shape[1]))
    rhs[:m] = targets[active]
    solution = np.linalg.solve(system, rhs)
    coeffs = np.zeros_like(targets)
    coeffs[active] = solution[:m]
    return coeffs, solution[m]


def _tube_objective(kernel, targets, coeffs, bias, c, eps,
                    k_coeffs=None) -> float:
    """0.5 ||W||^2 + C * sum (u_i - eps)_+^2 with u_i the residual 2-norm."""
    if k_coeffs is None:
        k_coeffs = kernel @ coeffs
    reg = 0.5 * float((coeffs * k_coeffs).sum())
    residual = targets - k_coeffs - bias
    u = np.sqrt((residual * residual).sum(axis=1))
    excess = np.maximum(u - eps, 0.0)
    return reg + c * float((excess * excess).sum())


def _irwls_fit(kernel: np.ndarray, targets: np.ndarray, c: float, eps: float,
               config: SolverConfig) -> tuple[np.ndarray, np.ndarray, TrainingInfo]:
    n = kernel.shape[0]
    coeffs = np.zeros_like(targets)
    bias = targets.mean(axis=0)
    k_coeffs = np.zeros_like(targets)
    objective = _tube_objective(kernel, targets, coeffs, bias, c, eps, k_coeffs)
    history = [objective]
    converged = False

    for _ in range(config.max_iter):
        residual = targets - k_coeffs - bias
        u = np.sqrt((residual * residual).sum(axis=1))
        if eps == 0.0:
            sample_weights = np.full(n, 2.0 * c)
        else:
            sample_weights = np.where(u >= eps, 2.0 * c * (u - eps) / np.maximum(u, eps), 0.0)

        if np.any(sample_weights > 0):
            target_coeffs, target_bias = _ridge_solve(kernel, targets, c, sample_weights)
        else:
            target_coeffs, target_bias = np.zeros_like(targets), bias

        delta_coeffs = target_coeffs - coeffs
        delta_bias = target_bias - bias
        if not (np.any(delta_coeffs) or np.any(delta_bias)):
            converged = True
            break

        # Backtracking line search on the true objective; each step reuses
        # the two kernel products so candidate evaluations are O(N).
        k_delta = kernel @ delta_coeffs
        step = 1.0
        accepted = None
        for _ in range(config.max_halvings + 1):
            candidate = _tube_objective(kernel, targets, coeffs + step * delta_coeffs,
                                        bias + step * delta_bias, c, eps,
                                        k_coeffs + step * k_delta)
            if candidate < objective:
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            converged = True
            break

        coeffs = coeffs + step * delta_coeffs
        bias = bias + step * delta_bias
        k_coeffs = k_coeffs + step * k_delta
        history.append(accepted)
        if abs(objective - accepted) <= config.rel_tol * max(abs(objective), 1e-300):
            objective = accepted
            converged = True
            break
        objective = accepted

    info = TrainingInfo(converged=converged, n_iter=len(history) - 1,
                        objective_history=tuple(history))
    return coeffs, bias, info


def train_mrr(samples, c: float, kernel: KernelSpec) -> RegressionModel:
    """Multi-output ridge regression via the closed-form bordered solve."""
    c = _check_c(c)
    x, y, tag = _stack_samples(samples)
    gram = kernel_matrix(kernel, x)
    coeffs, bias = _ridge_solve(gram, y, c)
    objective = _tube_objective(gram, y, coeffs, bias, c, 0.0)
    info = TrainingInfo(converged=True, n_iter=0, objective_history=(objective,))
    return RegressionModel("mrr", kernel, x, coeffs, bias, {"C": c},
                           source_tag=tag, training=(info,))


def train_msvr(samples, c: float, epsilon: float, kernel: KernelSpec,
               config: SolverConfig = SolverConfig()) -> RegressionModel:
    """Multi-output support vector regression trained by IRWLS."""
    c = _check_c(c)
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise ConfigError(f"epsilon must be finite and >= 0, got {epsilon}")
    x, y, tag = _stack_samples(samples)
    gram = kernel_matrix(kernel, x)
    coeffs, bias, info = _irwls_fit(gram, y, c, float(epsilon), config)
    return RegressionModel("msvr", kernel, x, coeffs, bias,
                           {"C": c, "epsilon": float(epsilon)},
                           source_tag=tag, training=(info,))


def train_rr(samples, c: float, kernel: KernelSpec) -> RegressionModel:
    """Per-channel single-output ridge regression."""
    c = _check_c(c)
    x, y, tag = _stack_samples(samples)
    gram = kernel_matrix(kernel, x)
    coeffs = np.zeros_like(y)
    bias = np.zeros(3)
    infos = []
    for channel in range(3):
        col, b = _ridge_solve(gram, y[:, channel:channel + 1], c)
        objective = _tube_objective(gram, y[:, channel:channel + 1], col, b, c, 0.0)
        coeffs[:, channel] = col[:, 0]
        bias[channel] = b[0]
        infos.append(TrainingInfo(converged=True, n_iter=0, objective_history=(objective,)))
    return RegressionModel("rr", kernel, x, coeffs, bias, {"C": c},
                           source_tag=tag, training=tuple(infos))


def train_svr(samples, c: float, epsilon: float, kernel: KernelSpec,
              config: SolverConfig = SolverConfig()) -> RegressionModel:
    """Per-channel single-output SVR with the scalar tube, trained by IRWLS."""
    c = _check_c(c)
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise ConfigError(f"epsilon must be finite and >= 0, got {epsilon}")
    x, y, tag = _stack_samples(samples)
    gram = kernel_matrix(kernel, x)
    coeffs = np.zeros_like(y)
    bias = np.zeros(3)
    infos = []
    for channel in range(3):
        col, b, info = _irwls_fit(gram, y[:, channel:channel + 1], c, float(epsilon), config)
        coeffs[:, channel] = col[:, 0]
        bias[channel] = b[0]
        infos.append(info)
    return RegressionModel("svr", kernel, x, coeffs, bias,
                           {"C": c, "epsilon": float(epsilon)},
                           source_tag=tag, training=tuple(infos))


def predict_raw(model: RegressionModel, inputs: np.ndarray) -> np.ndarray:
    """Unnormalized F(x) for a batch of row vectors; shape (M, 3)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != model.dim:
        raise InputError(
            f"feature dimension {inputs.shape[1]} does not match model dimension {model.dim}")
    cross = kernel_matrix(model.kernel, inputs, model.training_inputs)
    return cross @ model.dual_weights + model.bias


def predict(model: RegressionModel, features: FeatureVector) -> Illuminant:
    """Evaluate the machine and renormalize the clamped output to a unit illuminant."""
    raw = predict_raw(model, features.values[None, :])[0]
    clamped = np.maximum(raw, 0.0)
    if not clamped.max() > 0:
        raise InvalidIlluminantError(f"prediction {raw} has no positive component")
    return normalize_illuminant(clamped)


def msvr_objective(model: RegressionModel, samples) -> float:
    """Training objective of an MSVR/MRR model on its own formulation."""
    x, y, _ = _stack_samples(samples)
    gram = kernel_matrix(model.kernel, x)
    eps = float(model.hyperparams.get("epsilon", 0.0) or 0.0)
    return _tube_objective(gram, y, model.dual_weights, model.bias,
                           model.hyperparams["C"], eps)


def save_model(model: RegressionModel, path) -> None:
    """Serialize to the versioned ILKMDL1 container; round-trips are bit-exact."""
    parts = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION)]
    for text in (model.model_kind, model.kernel.kind, model.source_tag):
        parts.append(pack_string(text))
    gamma = math.nan if model.kernel.gamma is None else model.kernel.gamma
    epsilon = model.hyperparams.get("epsilon")
    epsilon = math.nan if epsilon is None else epsilon
    parts.append(struct.pack("<ddd", gamma, model.hyperparams["C"], epsilon))
    parts.append(struct.pack("<B", 1 if model.converged else 0))
    n, d = model.training_inputs.shape
    parts.append(struct.pack("<II", n, d))
    parts.append(model.training_inputs.astype("<f8").tobytes())
    parts.append(model.dual_weights.astype("<f8").tobytes())
    parts.append(model.bias.astype("<f8").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def load_model(path) -> RegressionModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 11 or blob[:7] != MODEL_MAGIC:
        raise FormatError(f"bad model magic {blob[:7]!r}", offset=0)
    (version,) = struct.unpack_from("<I", blob, 7)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", offset=7)
    offset = 11
    model_kind, offset = read_string(blob, offset)
    kernel_kind, offset = read_string(blob, offset)
    source_tag, offset = read_string(blob, offset)
    if offset + 25 + 8 > len(blob):
        raise FormatError("truncated model header", offset=offset)
    gamma, c, epsilon = struct.unpack_from("<ddd", blob, offset)
    offset += 24
    (converged,) = struct.unpack_from("<B", blob, offset)
    offset += 1
    n, d = struct.unpack_from("<II", blob, offset)
    offset += 8
    need = 8 * (n * d + n * 3 + 3)
    if offset + need != len(blob):
        raise FormatError(
            f"payload size {len(blob) - offset} does not match N={n}, d={d}", offset=offset)
    inputs = np.frombuffer(blob, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    offset += 8 * n * d
    weights = np.frombuffer(blob, dtype="<f8", count=n * 3, offset=offset).reshape(n, 3)
    offset += 8 * n * 3
    bias = np.frombuffer(blob, dtype="<f8", count=3, offset=offset)
    kernel = KernelSpec(kernel_kind, None if math.isnan(gamma) else gamma)
    hyperparams = {"C": c}
    if not math.isnan(epsilon):
        hyperparams["epsilon"] = epsilon
    info = TrainingInfo(converged=bool(converged), n_iter=0, objective_history=())
    return RegressionModel(model_kind, kernel, inputs, weights, bias,
                           hyperparams, source_tag=source_tag, training=(info,))
