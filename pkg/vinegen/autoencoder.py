"""A small dense autoencoder trained with Adam, written directly on numpy.

Layer ``i`` maps ``layer_dims[i]`` to ``layer_dims[i + 1]`` through
``x @ weights[i] + biases[i]``. The bottleneck layer is linear, the other
hidden layers use the configured hidden activation and the output layer is
either sigmoid (binary cross-entropy loss) or linear (mean squared error).
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from vinegen.errors import BundleFormatError, DomainError, TrainingDivergedError

HIDDEN_ACTIVATIONS = ("relu", "linear")
OUTPUT_ACTIVATIONS = ("sigmoid", "linear")
BCE_CLIP = 1e-7
GRADCHECK_STEP = 1e-5
GRADCHECK_FLOOR = 1e-6
SMOOTHING_SPAN = 10


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.001
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    latent_dim: int = 10
    hidden_dims: tuple[int, ...] = (32,)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise DomainError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.epochs < 0 or self.batch_size < 1 or self.latent_dim < 1:
            raise DomainError("epochs >= 0, batch_size >= 1 and latent_dim >= 1 are required")
        if any(h < 1 for h in self.hidden_dims):
            raise DomainError(f"hidden layer sizes must be positive, got {self.hidden_dims}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise DomainError("Adam betas must lie in [0, 1)")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise DomainError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise DomainError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")

    @property
    def loss(self) -> str:
        return "bce" if self.output_activation == "sigmoid" else "mse"

    def layer_dims(self, input_dim: int) -> tuple[int, ...]:
        hidden = tuple(self.hidden_dims)
        return (input_dim, *hidden, self.latent_dim, *reversed(hidden), input_dim)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["hidden_dims"] = list(self.hidden_dims)
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "TrainConfig":
        payload = dict(payload)
        payload["hidden_dims"] = tuple(payload.get("hidden_dims", ()))
        return cls(**payload)


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "sigmoid":
        return expit(pre)
    return pre


@dataclass(eq=False)
class DenseAutoencoder:
    layer_dims: tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 3 or len(dims) % 2 == 0 or dims != dims[::-1]:
            raise DomainError(f"layer_dims must be odd-length and symmetric, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DomainError("one weight matrix and bias vector per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise DomainError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} do not match {dims}"
                )
        self.layer_dims = dims

    @classmethod
    def initialize(
        cls,
        layer_dims: Sequence[int],
        seed: Optional[int] = 0,
        hidden_activation: str = "relu",
        output_activation: str = "sigmoid",
        rng: Optional[np.random.Generator] = None,
    ) -> "DenseAutoencoder":
        rng = rng if rng is not None else np.random.default_rng(seed)
        dims = tuple(int(d) for d in layer_dims)
        weights = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases = [np.zeros(d) for d in dims[1:]]
        return cls(dims, weights, biases, hidden_activation, output_activation)

    @classmethod
    def zeros(
        cls,
        layer_dims: Sequence[int],
        hidden_activation: str = "relu",
        output_activation: str = "sigmoid",
    ) -> "DenseAutoencoder":
        dims = tuple(int(d) for d in layer_dims)
        weights = [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])]
        biases = [np.zeros(d) for d in dims[1:]]
        return cls(dims, weights, biases, hidden_activation, output_activation)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def latent_dim(self) -> int:
        return self.layer_dims[self.bottleneck]

    @property
    def bottleneck(self) -> int:
        return len(self.layer_dims) // 2

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def loss_name(self) -> str:
        return "bce" if self.output_activation == "sigmoid" else "mse"

    def activation(self, layer: int) -> str:
        if layer == self.n_layers - 1:
            return self.output_activation
        if layer + 1 == self.bottleneck:
            return "linear"
        return self.hidden_activation

    def _run(self, x: np.ndarray, start: int, stop: int) -> tuple[List[np.ndarray], List[np.ndarray]]:
        outputs = [x]
        pre_activations = []
        for i in range(start, stop):
            pre = outputs[-1] @ self.weights[i] + self.biases[i]
            pre_activations.append(pre)
            outputs.append(_activate(self.activation(i), pre))
        return outputs, pre_activations

    def _check_width(self, x: np.ndarray, width: int, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != width:
            raise DomainError(f"{what} expects {width} columns, got shape {x.shape}")
        return x

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = self._check_width(x, self.input_dim, "encode")
        return self._run(x, 0, self.bottleneck)[0][-1]

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = self._check_width(z, self.latent_dim, "decode")
        out = self._run(z, self.bottleneck, self.n_layers)[0][-1]
        if self.output_activation == "sigmoid":
            # saturated sigmoids round to 0 or 1 in float64
            out = np.clip(out, BCE_CLIP, 1.0 - BCE_CLIP)
        return out

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(x))

    def _loss(self, output: np.ndarray, target: np.ndarray) -> float:
        if self.loss_name == "bce":
            clipped = np.clip(output, BCE_CLIP, 1.0 - BCE_CLIP)
            return float(
                -np.mean(target * np.log(clipped) + (1.0 - target) * np.log1p(-clipped))
            )
        return float(np.mean((output - target) ** 2))

    def loss(self, x: np.ndarray) -> float:
        x = self._check_width(x, self.input_dim, "loss")
        return self._loss(self.reconstruct(x), x)

    def relu_masks(self, x: np.ndarray) -> List[np.ndarray]:
        _, pre = self._run(np.asarray(x, dtype=float), 0, self.n_layers)
        return [p > 0 for i, p in enumerate(pre) if self.activation(i) == "relu"]

    def gradients(self, x: np.ndarray) -> tuple[float, List[np.ndarray], List[np.ndarray]]:
        """Loss and its exact gradients (no weight decay) for reconstructing ``x``."""
        x = self._check_width(x, self.input_dim, "gradients")
        outputs, pre = self._run(x, 0, self.n_layers)
        output = outputs[-1]
        scale = 1.0 / output.size
        if self.loss_name == "bce":
            inside = (output > BCE_CLIP) & (output < 1.0 - BCE_CLIP)
            delta = np.where(inside, output - x, 0.0) * scale
        else:
            delta = 2.0 * (output - x) * scale
        grad_w: List[np.ndarray] = [np.empty(0)] * self.n_layers
        grad_b: List[np.ndarray] = [np.empty(0)] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grad_w[i] = outputs[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
                if self.activation(i - 1) == "relu":
                    delta = delta * (pre[i - 1] > 0)
        return self._loss(output, x), grad_w, grad_b

    def parameters(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "DenseAutoencoder":
        return DenseAutoencoder(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layer_dims": list(self.layer_dims),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DenseAutoencoder":
        try:
            dims = tuple(int(d) for d in payload["layer_dims"])
            weights = [
                np.asarray(w, dtype=float).reshape(dims[i], dims[i + 1])
                for i, w in enumerate(payload["weights"])
            ]
            biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
            return cls(
                dims,
                weights,
                biases,
                payload.get("hidden_activation", "relu"),
                payload.get("output_activation", "sigmoid"),
            )
        except (KeyError, TypeError, ValueError, IndexError, DomainError) as exc:
            raise BundleFormatError(f"Invalid autoencoder payload: {exc}") from exc


@dataclass
class TrainResult:
    model: DenseAutoencoder
    history: List[float] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.history[-1]


class _Adam:
    def __init__(self, params: Sequence[np.ndarray], cfg: TrainConfig) -> None:
        self.cfg = cfg
        self.step_count = 0
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        cfg = self.cfg
        self.step_count += 1
        correction1 = 1.0 - cfg.adam_beta1**self.step_count
        correction2 = 1.0 - cfg.adam_beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.first, self.second):
            g = g + cfg.weight_decay * p
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * g * g
            p -= cfg.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + cfg.adam_eps)


def train(
    data: np.ndarray,
    cfg: TrainConfig,
    init: Optional[DenseAutoencoder] = None,
) -> TrainResult:
    """Minibatch Adam with L2 weight decay; history[0] is the loss before training."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DomainError(f"Training data must be a non-empty (n, p) array, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("Training data contains non-finite values")
    if cfg.loss == "bce" and (x.min() < 0.0 or x.max() > 1.0):
        raise DomainError("Cross-entropy training needs data in [0, 1]")

    rng = np.random.default_rng(cfg.seed)
    if init is None:
        model = DenseAutoencoder.initialize(
            cfg.layer_dims(x.shape[1]),
            hidden_activation=cfg.hidden_activation,
            output_activation=cfg.output_activation,
            rng=rng,
        )
    else:
        model = init.copy()
        if model.input_dim != x.shape[1]:
            raise DomainError(f"Model expects {model.input_dim} columns, data has {x.shape[1]}")

    started = time.perf_counter()
    params = model.parameters()
    optimizer = _Adam(params, cfg)
    history = [model.loss(x)]
    n = x.shape[0]
    logging.info(
        "Training autoencoder dims=%s n=%s epochs=%s lr=%g wd=%g",
        model.layer_dims,
        n,
        cfg.epochs,
        cfg.learning_rate,
        cfg.weight_decay,
    )
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = x[order[start : start + cfg.batch_size]]
            _, grad_w, grad_b = model.gradients(batch)
            optimizer.step(params, [*grad_w, *grad_b])
        current = model.loss(x)
        if not math.isfinite(current):
            raise TrainingDivergedError(epoch, cfg.learning_rate)
        history.append(current)
        logging.debug("Epoch %s/%s loss=%.6f", epoch, cfg.epochs, current)
    elapsed = time.perf_counter() - started
    logging.info(
        "Autoencoder trained: loss %.6f -> %.6f in %.2fs", history[0], history[-1], elapsed
    )
    return TrainResult(model=model, history=history, elapsed=elapsed)


def smoothed_history(history: Sequence[float], span: int = SMOOTHING_SPAN) -> np.ndarray:
    """Exponential moving average with smoothing factor 2 / (span + 1)."""
    values = np.asarray(history, dtype=float)
    if values.size == 0:
        return values
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(values)
    out[0] = values[0]
    for i in range(1, values.size):
        out[i] = alpha * values[i] + (1.0 - alpha) * out[i - 1]
    return out


def gradient_check(
    ae: DenseAutoencoder,
    batch: np.ndarray,
    n_weights: int = 100,
    step: float = GRADCHECK_STEP,
    seed: int = 0,
) -> float:
    """Largest relative error between backprop and central differences.

    Parameters whose perturbation changes any ReLU on/off pattern are
    skipped, since the loss has a kink there.
    """
    x = ae._check_width(batch, ae.input_dim, "gradient_check")
    _, grad_w, grad_b = ae.gradients(x)
    params = ae.parameters()
    analytic = [*grad_w, *grad_b]
    positions = [(k, idx) for k, p in enumerate(params) for idx in np.ndindex(p.shape)]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(positions))
    base_masks = ae.relu_masks(x)

    worst = 0.0
    checked = 0
    skipped = 0
    for pick in order:
        if checked >= n_weights:
            break
        k, idx = positions[pick]
        original = params[k][idx]
        params[k][idx] = original + step
        loss_plus, masks_plus = ae.loss(x), ae.relu_masks(x)
        params[k][idx] = original - step
        loss_minus, masks_minus = ae.loss(x), ae.relu_masks(x)
        params[k][idx] = original
        if not all(
            np.array_equal(a, b) and np.array_equal(a, c)
            for a, b, c in zip(base_masks, masks_plus, masks_minus)
        ):
            skipped += 1
            continue
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        exact = float(analytic[k][idx])
        denom = max(abs(exact), abs(numeric), GRADCHECK_FLOOR)
        worst = max(worst, abs(exact - numeric) / denom)
        checked += 1
    logging.debug(
        "Gradient check: %s parameters compared, %s skipped at kinks, max rel err %.3g",
        checked,
        skipped,
        worst,
    )
    return worst
