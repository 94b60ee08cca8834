"""Fully connected network with hand-written backpropagation, and its file format.

A model file is ``EPDM`` magic, a little-endian u16 version, a u32 header length, the
UTF-8 JSON header (layer sizes, activation, input standardization, seed, support) and
the parameters as little-endian f64 in ``W0, b0, W1, b1, ...`` order.
"""

import json
import struct
from pathlib import Path
from typing import Any
from typing_extensions import Self

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import expit

from emergent_pde.constants import MODEL_MAGIC, MODEL_VERSION, Activation
from emergent_pde.utils.errors import ShapeMismatchError, TensorFormatError
from emergent_pde.utils.helpers import make_rng

_HEADER = struct.Struct("<4sHI")


def swish(z: np.ndarray) -> np.ndarray:
    """z * sigmoid(z).

    >>> float(swish(np.array(0.0)))
    0.0
    >>> round(float(swish(np.array(1.0))), 4)
    0.7311
    """
    return z * expit(z)


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    return swish(z) if activation == Activation.SWISH else np.tanh(z)


def _activate_grad(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.SWISH:
        sig = expit(z)
        return sig + z * sig * (1.0 - sig)
    return 1.0 - np.tanh(z) ** 2


class MlpModel(BaseModel):
    """Affine layers with an activation between hidden layers and a linear output.

    Inputs are standardized with ``x_mean``/``x_std`` before the first layer. When
    ``support`` is set the output is forced to 0 wherever the first input lies outside
    the closed interval.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    layer_dims: list[int]
    activation: Activation = Activation.SWISH
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    x_mean: np.ndarray
    x_std: np.ndarray
    seed: int = 0
    support: tuple[float, float] | None = None

    @field_validator("x_mean", "x_std", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=np.float64).ravel()

    @field_validator("weights", "biases", mode="before")
    @classmethod
    def _as_arrays(cls, value: Any) -> list[np.ndarray]:
        return [np.array(v, dtype=np.float64) for v in value]

    @model_validator(mode="after")
    def _check_shapes(self) -> Self:
        dims = self.layer_dims
        if len(dims) < 2 or any(d < 1 for d in dims):  # noqa: PLR2004
            msg = f"layer_dims must hold at least two positive sizes, got {dims}"
            raise ValueError(msg)
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            msg = f"{len(dims) - 1} weight matrices and bias vectors are required"
            raise ShapeMismatchError(msg)
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                msg = f"layer {i} has W{w.shape} b{b.shape}, expected ({dims[i]}, {dims[i + 1]})"
                raise ShapeMismatchError(msg)
        if self.x_mean.shape != (dims[0],) or self.x_std.shape != (dims[0],):
            msg = "standardization statistics must match the input size"
            raise ShapeMismatchError(msg)
        if np.any(self.x_std <= 0):
            msg = "x_std must be positive"
            raise ValueError(msg)
        if not all(np.all(np.isfinite(p)) for p in (*self.weights, *self.biases)):
            msg = "model parameters must be finite"
            raise ValueError(msg)
        return self

    @classmethod
    def initialize(
        cls, layer_dims: list[int], activation: Activation = Activation.SWISH, seed: int = 0
    ) -> "MlpModel":
        """Seeded scaled-uniform init: every layer draws from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        rng = make_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:], strict=True):
            bound = np.sqrt(1.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(
            layer_dims=layer_dims,
            activation=activation,
            weights=weights,
            biases=biases,
            x_mean=np.zeros(layer_dims[0]),
            x_std=np.ones(layer_dims[0]),
            seed=seed,
        )

    @classmethod
    def zeros(cls, layer_dims: list[int], activation: Activation = Activation.SWISH) -> "MlpModel":
        """Network whose weights and biases are all zero (outputs 0 everywhere)."""
        return cls(
            layer_dims=layer_dims,
            activation=activation,
            weights=[np.zeros((a, b)) for a, b in zip(layer_dims[:-1], layer_dims[1:], strict=True)],
            biases=[np.zeros(b) for b in layer_dims[1:]],
            x_mean=np.zeros(layer_dims[0]),
            x_std=np.ones(layer_dims[0]),
        )

    @property
    def param_count(self) -> int:
        """Sum over layers of dims[i] * dims[i+1] + dims[i+1]."""
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))

    @property
    def n_inputs(self) -> int:
        """Input size."""
        return self.layer_dims[0]

    def standardize(self, x: np.ndarray, fit: bool = False) -> np.ndarray:
        """Z-score inputs with the stored statistics, refitting them first if ``fit``."""
        if fit:
            std = x.std(axis=0)
            self.x_mean = x.mean(axis=0)
            self.x_std = np.where(std > 0, std, 1.0)
        return (x - self.x_mean) / self.x_std

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        batch = x[None, :] if x.ndim == 1 else x
        if batch.ndim != 2 or batch.shape[1] != self.n_inputs:  # noqa: PLR2004
            msg = f"expected {self.n_inputs} inputs per sample, got array of shape {x.shape}"
            raise ShapeMismatchError(msg)
        return batch

    def in_support(self, x: np.ndarray) -> np.ndarray:
        """Boolean per sample: whether the output may be nonzero."""
        batch = self._as_batch(x)
        if self.support is None:
            return np.ones(batch.shape[0], dtype=bool)
        lo, hi = self.support
        return (batch[:, 0] >= lo) & (batch[:, 0] <= hi)

    def _forward_cache(self, batch: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Pre-activations and layer inputs of every layer."""
        h = self.standardize(batch)
        inputs, pre = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = z if i == last else _activate(z, self.activation)
        return inputs, pre

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the network.

        Args:
            x: One input vector or a batch of shape (n, n_inputs).

        Returns:
            One output per sample.

        Raises:
            ShapeMismatchError: If the input size does not match the first layer.
        """
        batch = self._as_batch(x)
        _, pre = self._forward_cache(batch)
        out = pre[-1][:, 0]
        if self.support is not None:
            out = np.where(self.in_support(batch), out, 0.0)
        return out

    __call__ = forward

    def loss_and_grads(
        self, x: np.ndarray, y: np.ndarray
    ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean squared error and its gradient with respect to every weight and bias.

        Returns:
            The loss, then per-layer weight gradients and bias gradients.
        """
        batch = self._as_batch(x)
        y = np.asarray(y, dtype=np.float64).ravel()
        inputs, pre = self._forward_cache(batch)
        residual = pre[-1][:, 0] - y
        if self.support is not None:
            residual = np.where(self.in_support(batch), residual, -y)
        loss = float(np.mean(residual**2))

        delta = (2.0 / batch.shape[0]) * residual[:, None]
        if self.support is not None:
            delta *= self.in_support(batch)[:, None]
        grad_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grad_b: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            grad_w[i] = inputs[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * _activate_grad(pre[i - 1], self.activation)
        return loss, grad_w, grad_b

    def get_parameters(self) -> np.ndarray:
        """All parameters as one flat vector in ``W0, b0, W1, b1, ...`` order."""
        return np.concatenate([
            part.ravel() for w, b in zip(self.weights, self.biases, strict=True) for part in (w, b)
        ])

    def set_parameters(self, flat: np.ndarray) -> None:
        """Load parameters from a flat vector produced by :meth:`get_parameters`.

        Raises:
            ShapeMismatchError: If the vector length is not :attr:`param_count`.
        """
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.param_count:
            msg = f"expected {self.param_count} parameters, got {flat.size}"
            raise ShapeMismatchError(msg)
        offset = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = flat[offset : offset + w.size].reshape(w.shape).copy()
            offset += w.size
            n_bias = self.biases[i].size
            self.biases[i] = flat[offset : offset + n_bias].copy()
            offset += n_bias

    def flat_gradient(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Loss and gradient as a flat vector aligned with :meth:`get_parameters`."""
        loss, grad_w, grad_b = self.loss_and_grads(x, y)
        return loss, np.concatenate([
            part.ravel() for gw, gb in zip(grad_w, grad_b, strict=True) for part in (gw, gb)
        ])

    def copy_model(self) -> "MlpModel":
        """Deep copy with independent parameter arrays."""
        return self.model_copy(
            update={
                "weights": [w.copy() for w in self.weights],
                "biases": [b.copy() for b in self.biases],
                "x_mean": self.x_mean.copy(),
                "x_std": self.x_std.copy(),
            }
        )

    def save(self, path: Path) -> Path:
        """Write the model file.

        Returns:
            Path: The file written.
        """
        header = ModelHeader(
            layer_dims=self.layer_dims,
            activation=self.activation,
            x_mean=self.x_mean.tolist(),
            x_std=self.x_std.tolist(),
            seed=self.seed,
            support=self.support,
            param_count=self.param_count,
        )
        header_bytes = header.model_dump_json().encode()
        payload = np.ascontiguousarray(self.get_parameters(), dtype="<f8").tobytes()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(
            _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(header_bytes)) + header_bytes + payload
        )
        logger.trace(f"Saved {self.layer_dims} model to {path}")
        return path

    @classmethod
    def load(cls, path: Path) -> "MlpModel":
        """Read a model written by :meth:`save`.

        Raises:
            TensorFormatError: On a wrong magic or version, or a truncated file.
        """
        data = path.read_bytes()
        if len(data) < _HEADER.size:
            msg = f"{path} is too short to be a model file"
            raise TensorFormatError(msg)
        magic, version, header_len = _HEADER.unpack_from(data)
        if magic != MODEL_MAGIC:
            msg = f"{path} has magic {magic!r}, expected {MODEL_MAGIC!r}"
            raise TensorFormatError(msg)
        if version != MODEL_VERSION:
            msg = f"{path} has model version {version}, expected {MODEL_VERSION}"
            raise TensorFormatError(msg)

        start = _HEADER.size + header_len
        try:
            header = ModelHeader.model_validate(json.loads(data[_HEADER.size : start]))
        except ValueError as e:
            msg = f"{path} has an unreadable model header: {e}"
            raise TensorFormatError(msg) from e
        if len(data) - start != 8 * header.param_count:
            msg = f"{path} holds {len(data) - start} payload bytes, expected {8 * header.param_count}"
            raise TensorFormatError(msg)

        model = cls.zeros(header.layer_dims, header.activation)
        model.set_parameters(np.frombuffer(data, dtype="<f8", offset=start).astype(np.float64))
        model.x_mean = np.asarray(header.x_mean)
        model.x_std = np.asarray(header.x_std)
        model.seed = header.seed
        model.support = header.support
        return model


class ModelHeader(BaseModel):
    """JSON header of a model file."""

    layer_dims: list[int]
    activation: Activation
    x_mean: list[float]
    x_std: list[float]
    seed: int
    support: tuple[float, float] | None = None
    param_count: int


class TrainConfig(BaseModel):
    """Optimizer, schedule and batching for network training."""

    model_config = ConfigDict(frozen=True)

    lr0: float = Field(default=0.005, gt=0)
    plateau_patience: int = Field(default=75, ge=1)
    lr_factor: float = Field(default=0.5, gt=0, lt=1)
    epochs: int = Field(default=1500, ge=1)
    batch: int = Field(default=128, ge=1)
    seed: int = 0
    n_validation: int = Field(default=10, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class TrainHistory(BaseModel):
    """Per-epoch training loss, validation loss and learning rate."""

    train: list[float] = Field(default_factory=list)
    validation: list[float] = Field(default_factory=list)
    lr: list[float] = Field(default_factory=list)

    def save_csv(self, path: Path) -> Path:
        """Write ``epoch,train,validation,lr`` rows; missing validation is left empty.

        Returns:
            Path: The file written.
        """
        lines = ["epoch,train,validation,lr"]
        for epoch, (loss, lr) in enumerate(zip(self.train, self.lr, strict=True), start=1):
            val = f"{self.validation[epoch - 1]:.17g}" if epoch <= len(self.validation) else ""
            lines.append(f"{epoch},{loss:.17g},{val},{lr:.17g}")
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load_csv(cls, path: Path) -> "TrainHistory":
        """Read a history written by :meth:`save_csv`."""
        history = cls()
        for line in path.read_text().splitlines()[1:]:
            _, loss, val, lr = line.split(",")
            history.train.append(float(loss))
            if val:
                history.validation.append(float(val))
            history.lr.append(float(lr))
        return history
