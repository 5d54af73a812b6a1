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

"""Carries the courier preference network over to GVs and UAVs."""

from enum import Enum

import numpy as np

from coop_delivery.core.errors import DimensionMismatch
from coop_delivery.core.logger import logger
from coop_delivery.preference.mlp import Architecture, Mlp, _xavier, train


class TransferMode(str, Enum):
    GV_FINE_TUNE = "gv_fine_tune"
    UAV_SPECIFIC = "uav_specific"


def attach_specific(source: Mlp, specific: list, seed: int = 0) -> Mlp:
    """Keeps every layer but the output head as the shared block and stacks fresh layers on top."""
    trunk = [(w.copy(), b.copy()) for w, b in source.layers[:-1]]
    width = trunk[-1][0].shape[1] if trunk else source.input_dim
    rng = np.random.default_rng(seed)
    sizes = [width] + list(specific) + [1]
    head = [_xavier(rng, n_in, n_out) for n_in, n_out in zip(sizes, sizes[1:])]
    return Mlp(trunk + head, Architecture.SHARED_PLUS_SPECIFIC, n_shared=len(trunk))


def transfer_finetune(source: Mlp, x, y, mode: TransferMode, cfg, seed: int = 0) -> Mlp:
    """:param PreferenceConfig cfg: learning rates, epochs and specific-layer widths."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != source.input_dim:
        raise DimensionMismatch(f"source expects {source.input_dim} features, dataset has {x.shape[-1]}")
    reduced = cfg.finetune_lr_scale
    if mode is TransferMode.GV_FINE_TUNE:
        model = source.copy()
        scales = [reduced] * len(model.layers)
    else:
        model = attach_specific(source, cfg.specific, seed=seed)
        scales = [reduced] * model.n_shared + [1.0] * (len(model.layers) - model.n_shared)
    logger.info(f"Transferring preference model ({mode.value}) on {x.shape[0]} samples")
    result = train(
        model,
        x,
        y,
        epochs=cfg.finetune_epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        seed=seed,
        layer_lr_scales=scales,
    )
    return result.model
