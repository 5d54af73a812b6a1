# Copyright (c) 2024, the coop-delivery authors.  All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Small feed-forward preference network trained with BCE and Adam, in numpy."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from coop_delivery.core.errors import DimensionMismatch, EmptyDataset, LengthMismatch, ShapeMismatch
from coop_delivery.core.logger import logger

CLAMP = 1e-7
LOGIT_LIMIT = 30.0

Layer = Tuple[np.ndarray, np.ndarray]


class Architecture(str, Enum):
    SHARED = "shared"
    SHARED_PLUS_SPECIFIC = "shared_plus_specific"


def _logistic(z: np.ndarray) -> np.ndarray:
    # |z| <= LOGIT_LIMIT keeps the output strictly inside (0, 1) in float64
    return 0.5 * (1.0 + np.tanh(0.5 * np.clip(z, -LOGIT_LIMIT, LOGIT_LIMIT)))


@dataclass
class Mlp:
    """ReLU hidden layers and a logistic output unit.

    ``n_shared`` counts the leading layers that form the shared block; the rest
    (if any) are the specific layers appended during transfer.
    """

    layers: List[Layer]
    architecture: Architecture = Architecture.SHARED
    n_shared: Optional[int] = None

    def __post_init__(self):
        if not self.layers:
            raise ShapeMismatch("an Mlp needs at least one layer")
        for k, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatch(f"layer {k}: weight {w.shape} and bias {b.shape} do not chain")
            if k and self.layers[k - 1][0].shape[1] != w.shape[0]:
                raise ShapeMismatch(f"layer {k} expects {w.shape[0]} inputs, previous emits {self.layers[k - 1][0].shape[1]}")
        if self.layers[-1][0].shape[1] != 1:
            raise ShapeMismatch("output dimension must be 1")
        if self.n_shared is None:
            self.n_shared = len(self.layers)

    @classmethod
    def initialize(cls, sizes: Sequence[int], seed: int = 0, **kwargs) -> "Mlp":
        """Xavier-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        return cls(layers=[_xavier(rng, n_in, n_out) for n_in, n_out in zip(sizes, sizes[1:])], **kwargs)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "Mlp":
        return cls(layers=[(np.zeros((n_in, n_out)), np.zeros(n_out)) for n_in, n_out in zip(sizes, sizes[1:])])

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def sizes(self) -> List[int]:
        return [self.input_dim] + [w.shape[1] for w, _ in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([(w.copy(), b.copy()) for w, b in self.layers], self.architecture, self.n_shared)

    def parameters(self) -> List[np.ndarray]:
        return [p for layer in self.layers for p in layer]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Mlp":
        layers = [(params[2 * k], params[2 * k + 1]) for k in range(len(self.layers))]
        return Mlp(layers, self.architecture, self.n_shared)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape[-1]}")
        return x

    def forward(self, x) -> np.ndarray:
        """Preference in (0, 1) for one feature vector or a batch of them."""
        x = self._check_input(x)
        single = x.ndim == 1
        h = np.atleast_2d(x)
        for w, b in self.layers[:-1]:
            h = np.maximum(h @ w + b, 0.0)
        w, b = self.layers[-1]
        out = _logistic(h @ w + b)[:, 0]
        return out[0] if single else out

    def _forward_cache(self, x: np.ndarray):
        activations = [x]
        pre = []
        h = x
        for k, (w, b) in enumerate(self.layers):
            z = h @ w + b
            pre.append(z)
            h = _logistic(z) if k == len(self.layers) - 1 else np.maximum(z, 0.0)
            activations.append(h)
        return pre, activations


def _xavier(rng: np.random.Generator, n_in: int, n_out: int) -> Layer:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out)), np.zeros(n_out)


def forward(model: Mlp, x) -> np.ndarray:
    return model.forward(x)


def bce_loss(preds, labels) -> float:
    preds = np.asarray(preds, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if preds.shape != labels.shape or preds.size == 0:
        raise LengthMismatch(f"{preds.size} predictions vs {labels.size} labels")
    p = np.clip(preds, CLAMP, 1.0 - CLAMP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


def backprop_gradients(model: Mlp, x, y) -> List[Layer]:
    """Exact gradients of the mean BCE loss with respect to every (W, b)."""
    x = np.atleast_2d(model._check_input(x))
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise LengthMismatch(f"{x.shape[0]} samples vs {y.shape[0]} labels")
    pre, activations = model._forward_cache(x)
    # logistic output with BCE: dL/dz = (y_hat - y) / N
    delta = (activations[-1] - y) / x.shape[0]
    grads: List[Layer] = []
    for k in range(len(model.layers) - 1, -1, -1):
        w, _ = model.layers[k]
        grads.append((activations[k].T @ delta, delta.sum(axis=0)))
        if k:
            delta = (delta @ w.T) * (pre[k - 1] > 0)
    grads.reverse()
    return grads


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-3) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], lr=lr)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr_scales: Optional[Sequence[float]] = None,
) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update; ``lr_scales`` holds one factor per parameter array."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ShapeMismatch("parameters and gradients do not have the same shapes")
    if any(p.shape != m.shape for p, m in zip(params, state.m)) or len(state.m) != len(params):
        raise ShapeMismatch("optimizer state does not match parameter shapes")
    t = state.t + 1
    scales = lr_scales if lr_scales is not None else [1.0] * len(params)
    new_params, new_m, new_v = [], [], []
    for p, g, m, v, scale in zip(params, grads, state.m, state.v, scales):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new_params.append(p - scale * state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)


@dataclass
class TrainResult:
    model: Mlp
    losses: List[float] = field(default_factory=list)


def train(
    model: Mlp,
    x,
    y,
    epochs: int,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
    layer_lr_scales: Optional[Sequence[float]] = None,
    progress: bool = False,
) -> TrainResult:
    """Mini-batch Adam with seeded shuffling; returns the per-epoch mean loss."""
    x = np.atleast_2d(model._check_input(x))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} samples vs {y.shape[0]} labels")
    scales = layer_lr_scales_to_list(model, layer_lr_scales)
    rng = np.random.default_rng(seed)
    params = [p.copy() for p in model.parameters()]
    state = AdamState.for_params(params, lr)
    losses: List[float] = []
    for epoch in tqdm(range(epochs), desc="epochs", disable=not progress):
        order = rng.permutation(x.shape[0])
        total = 0.0
        for start in range(0, x.shape[0], batch_size):
            idx = order[start : start + batch_size]
            current = model.with_parameters(params)
            total += bce_loss(current.forward(x[idx]), y[idx]) * idx.size
            grads = [g for layer in backprop_gradients(current, x[idx], y[idx]) for g in layer]
            params, state = adam_step(params, grads, state, scales)
        losses.append(total / x.shape[0])
        logger.debug(f"epoch {epoch}: loss {losses[-1]:.6f}")
    return TrainResult(model.with_parameters(params), losses)


def layer_lr_scales_to_list(model: Mlp, layer_lr_scales: Optional[Sequence[float]]) -> List[float]:
    if layer_lr_scales is None:
        return [1.0] * len(model.parameters())
    if len(layer_lr_scales) != len(model.layers):
        raise ShapeMismatch(f"{len(layer_lr_scales)} learning-rate scales for {len(model.layers)} layers")
    return [s for s in layer_lr_scales for _ in range(2)]
