"""Jointly trained wide (multinomial logit) and deep (RELU net) classifier.

The wide component scores each of the four classes linearly; the deep
component is a feed-forward network with RELU hidden layers and a linear
4-way output projection.  Per-class logits are the weighted sum of both
components' scores, turned into probabilities by a softmax, and both
components receive gradients from the same cross-entropy loss.

Everything is plain numpy: forward, backward, and the AdaGrad / RMSProp /
Adam update rules are written out explicitly so they can be checked
against finite differences and closed-form single-step values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ModelFormatError, TrainingError
from .features import FeatureScaler
from .trips import MODES

MODEL_FORMAT_VERSION = 1
N_CLASSES = len(MODES)
LOG_CLAMP = 1e-12

OPTIMIZERS = ("adagrad", "rmsprop", "adam")


@dataclass
class WideParams:
    """Per-class linear weights (n_classes x d) and biases (n_classes)."""

    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "WideParams":
        return cls(weights=np.zeros((N_CLASSES, d)), bias=np.zeros(N_CLASSES))


@dataclass
class DeepParams:
    """Hidden RELU layers plus a linear output projection of width 4.

    ``layers[i] = (W, b)`` with W of shape (fan_out, fan_in); all but the
    last layer are followed by RELU.
    """

    layers: list[tuple[np.ndarray, np.ndarray]]

    @classmethod
    def init(cls, d: int, hidden: Sequence[int],
             rng: np.random.Generator) -> "DeepParams":
        """He-uniform weight init, zero biases."""
        widths = [d, *hidden, N_CLASSES]
        layers = []
        for fan_in, fan_out in zip(widths, widths[1:]):
            limit = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            layers.append((w, np.zeros(fan_out)))
        return cls(layers=layers)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "rmsprop"
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    rmsprop_decay: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    epsilon: float = 1e-8
    hidden_widths: tuple[int, ...] = (400, 100, 50)
    combine_trainable: bool = False

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class WideDeepModel:
    wide: WideParams
    deep: DeepParams
    combine_weights: np.ndarray  # (w_wide, w_deep)
    scaler: Optional[FeatureScaler] = None
    class_order: tuple[str, ...] = MODES
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.wide.weights.shape[1]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities for normalized input(s) x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        logits = joint_logits(x, self)
        return softmax(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Class indices (into class_order) for normalized input(s)."""
        return np.argmax(self.predict_proba(x), axis=1)


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.atleast_2d(scores)
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def wide_logits(x: np.ndarray, wide: WideParams) -> np.ndarray:
    """Per-class linear scores; softmax of these is the standalone GLM."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != wide.weights.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} features, wide weights expect "
            f"{wide.weights.shape[1]}")
    return x @ wide.weights.T + wide.bias


def deep_forward(x: np.ndarray,
                 deep: DeepParams) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass; returns (output scores, cached layer activations).

    Activations[0] is the input; hidden layers apply RELU, the final
    projection is linear.
    """
    a = np.atleast_2d(np.asarray(x, dtype=float))
    activations = [a]
    n_layers = len(deep.layers)
    for li, (w, b) in enumerate(deep.layers):
        z = a @ w.T + b
        a = np.maximum(0.0, z) if li < n_layers - 1 else z
        if not np.all(np.isfinite(a)):
            raise TrainingError(f"non-finite activation at layer {li}")
        activations.append(a)
    return a, activations


def joint_logits(x: np.ndarray, model: WideDeepModel) -> np.ndarray:
    w_wide, w_deep = model.combine_weights
    deep_scores, _ = deep_forward(x, model.deep)
    return w_wide * wide_logits(x, model.wide) + w_deep * deep_scores


def joint_predict(x: np.ndarray, model: WideDeepModel) -> np.ndarray:
    """Probability vector(s) of the joint model for normalized input."""
    return softmax(joint_logits(x, model))


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample -log p(true class), clamped away from log(0)."""
    p_true = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(p_true, LOG_CLAMP))


def loss_and_grads(x: np.ndarray, labels: np.ndarray, model: WideDeepModel,
                   combine_trainable: bool = False,
                   ) -> tuple[float, dict[str, np.ndarray | list]]:
    """Mean cross-entropy over the batch and analytic gradients.

    Gradients cover the wide weights/bias, every deep layer, and (when
    requested) the two combination weights.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=int)
    n = len(labels)
    w_wide, w_deep = model.combine_weights

    wide_scores = wide_logits(x, model.wide)
    deep_scores, acts = deep_forward(x, model.deep)
    probs = softmax(w_wide * wide_scores + w_deep * deep_scores)
    loss = float(cross_entropy(probs, labels).mean())

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    d_wide_scores = w_wide * dlogits
    grad_wide_w = d_wide_scores.T @ x
    grad_wide_b = d_wide_scores.sum(axis=0)

    # back-propagate through the deep stack
    grad_layers: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.deep.layers)
    delta = w_deep * dlogits
    for li in range(len(model.deep.layers) - 1, -1, -1):
        w, _ = model.deep.layers[li]
        a_in = acts[li]
        grad_layers[li] = (delta.T @ a_in, delta.sum(axis=0))
        if li > 0:
            delta = (delta @ w) * (acts[li] > 0.0)

    grads: dict = {
        "wide_weights": grad_wide_w,
        "wide_bias": grad_wide_b,
        "deep_layers": grad_layers,
    }
    if combine_trainable:
        grads["combine"] = np.array([
            float((dlogits * wide_scores).sum()),
            float((dlogits * deep_scores).sum()),
        ])
    return loss, grads


# ---------------------------------------------------------------------------
# Optimizers


def optimizer_init(params: list[np.ndarray], optimizer: str) -> dict:
    zeros = [np.zeros_like(p) for p in params]
    if optimizer == "adagrad":
        return {"G": zeros}
    if optimizer == "rmsprop":
        return {"E": zeros}
    if optimizer == "adam":
        return {"m": zeros, "v": [np.zeros_like(p) for p in params], "t": 0}
    raise ValueError(f"unknown optimizer {optimizer!r}")


def optimizer_step(params: list[np.ndarray], grads: list[np.ndarray],
                   state: dict, cfg: TrainConfig) -> None:
    """One in-place update of every parameter array.

    AdaGrad:  G += g^2;            theta -= lr * g / (sqrt(G) + eps)
    RMSProp:  E = rho*E+(1-rho)g^2; theta -= lr * g / (sqrt(E) + eps)
    Adam:     biased first/second moments with bias correction, then
              theta -= lr * m_hat / (sqrt(v_hat) + eps)
    """
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient")
    lr, eps = cfg.learning_rate, cfg.epsilon
    if cfg.optimizer == "adagrad":
        for p, g, G in zip(params, grads, state["G"]):
            G += g * g
            p -= lr * g / (np.sqrt(G) + eps)
    elif cfg.optimizer == "rmsprop":
        rho = cfg.rmsprop_decay
        for p, g, E in zip(params, grads, state["E"]):
            E *= rho
            E += (1.0 - rho) * g * g
            p -= lr * g / (np.sqrt(E) + eps)
    elif cfg.optimizer == "adam":
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        state["t"] += 1
        t = state["t"]
        for p, g, m, v in zip(params, grads, state["m"], state["v"]):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** t)
            v_hat = v / (1.0 - b2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# Training


def _flatten_params(model: WideDeepModel,
                    combine_trainable: bool) -> list[np.ndarray]:
    params = [model.wide.weights, model.wide.bias]
    for w, b in model.deep.layers:
        params.extend((w, b))
    if combine_trainable:
        params.append(model.combine_weights)
    return params


def _flatten_grads(grads: dict, combine_trainable: bool) -> list[np.ndarray]:
    flat = [grads["wide_weights"], grads["wide_bias"]]
    for gw, gb in grads["deep_layers"]:
        flat.extend((gw, gb))
    if combine_trainable:
        flat.append(grads["combine"])
    return flat


def init_model(d: int, cfg: TrainConfig,
               rng: Optional[np.random.Generator] = None) -> WideDeepModel:
    if d < 1:
        raise DimensionError("feature dimension must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return WideDeepModel(
        wide=WideParams.zeros(d),
        deep=DeepParams.init(d, cfg.hidden_widths, rng),
        combine_weights=np.array([1.0, 1.0]),
    )


def train(x: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
          scaler: Optional[FeatureScaler] = None,
          combine_weights: Optional[tuple[float, float]] = None,
          epoch_log: Optional[list] = None) -> WideDeepModel:
    """Mini-batch training of the joint model on normalized features.

    Deterministic given the seed: both the parameter init and the per-epoch
    shuffles come from one seeded generator.  ``combine_weights`` can pin
    the component mix (e.g. (1, 0) trains the standalone GLM on the shared
    code path).  ``epoch_log`` receives (epoch, mean training loss) rows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if len(set(labels.tolist())) < 2:
        raise TrainingError("training set must contain at least 2 classes")
    n, d = x.shape
    rng = np.random.default_rng(cfg.seed)
    model = init_model(d, cfg, rng)
    if combine_weights is not None:
        model.combine_weights = np.array(combine_weights, dtype=float)
    params = _flatten_params(model, cfg.combine_trainable)
    state = optimizer_init(params, cfg.optimizer)
    batch = max(1, min(cfg.batch_size, n))
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            loss, grads = loss_and_grads(x[idx], labels[idx], model,
                                         cfg.combine_trainable)
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            optimizer_step(params, _flatten_grads(grads, cfg.combine_trainable),
                           state, cfg)
            epoch_loss += loss
            n_batches += 1
        if epoch_log is not None:
            epoch_log.append((epoch, epoch_loss / n_batches))
    model.scaler = scaler
    model.metadata = {
        "optimizer": cfg.optimizer,
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "hidden_widths": list(cfg.hidden_widths),
        "combine_trainable": cfg.combine_trainable,
    }
    return model


# ---------------------------------------------------------------------------
# Serialization


def model_to_dict(model: WideDeepModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "wide_deep",
        "class_order": list(model.class_order),
        "combine_weights": model.combine_weights.tolist(),
        "wide": {"weights": model.wide.weights.tolist(),
                 "bias": model.wide.bias.tolist()},
        "deep": [{"weights": w.tolist(), "bias": b.tolist()}
                 for w, b in model.deep.layers],
        "scaler": model.scaler.to_dict() if model.scaler else None,
        "metadata": model.metadata,
    }


def save_model(model: WideDeepModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def model_from_dict(doc: dict) -> WideDeepModel:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} "
            f"(expected {MODEL_FORMAT_VERSION})")
    if doc.get("kind") != "wide_deep":
        raise ModelFormatError(f"not a wide_deep model: kind={doc.get('kind')!r}")
    try:
        wide = WideParams(weights=np.array(doc["wide"]["weights"], dtype=float),
                          bias=np.array(doc["wide"]["bias"], dtype=float))
        deep = DeepParams(layers=[(np.array(l["weights"], dtype=float),
                                   np.array(l["bias"], dtype=float))
                                  for l in doc["deep"]])
        scaler = (FeatureScaler.from_dict(doc["scaler"])
                  if doc.get("scaler") else None)
        return WideDeepModel(
            wide=wide, deep=deep,
            combine_weights=np.array(doc["combine_weights"], dtype=float),
            scaler=scaler,
            class_order=tuple(doc["class_order"]),
            metadata=doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from exc


def load_model(path: str | Path) -> WideDeepModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: cannot read model: {exc}") from exc
    return model_from_dict(doc)
