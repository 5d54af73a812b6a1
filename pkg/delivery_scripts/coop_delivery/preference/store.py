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

"""JSON persistence of preference models and of the trained bundle."""

import json
import os
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from coop_delivery.core.agents import AgentKind
from coop_delivery.core.errors import MalformedRecord
from coop_delivery.preference.mlp import Architecture, Mlp

FORMAT = "coop-delivery-mlp"
VERSION = 1


def model_to_dict(model: Mlp, fingerprint: Optional[str] = None) -> Dict:
    # python floats round-trip through json exactly
    return {
        "format": FORMAT,
        "version": VERSION,
        "architecture": model.architecture.value,
        "n_shared": model.n_shared,
        "fingerprint": fingerprint,
        "layers": [
            {"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()} for w, b in model.layers
        ],
    }


def model_from_dict(data: Dict) -> Mlp:
    if data.get("format") != FORMAT:
        raise MalformedRecord(f"not a preference model dump: format={data.get('format')}")
    if data.get("version") != VERSION:
        raise MalformedRecord(f"unsupported model version {data.get('version')}")
    layers = []
    for layer in data["layers"]:
        w = np.array(layer["weights"], dtype=float).reshape(layer["shape"])
        layers.append((w, np.array(layer["bias"], dtype=float)))
    return Mlp(layers, Architecture(data["architecture"]), data["n_shared"])


def save_model(model: Mlp, path: str, fingerprint: Optional[str] = None) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(model, fingerprint), f)


def load_model(path: str) -> Mlp:
    with open(path) as f:
        return model_from_dict(json.load(f))


@dataclass
class ModelBundle:
    courier: Mlp
    gv: Mlp
    uav: Mlp
    fingerprint: Optional[str] = None

    NAMES = ("courier", "gv", "uav")

    def as_models(self) -> Dict[AgentKind, Mlp]:
        return {AgentKind.COURIER: self.courier, AgentKind.GV: self.gv, AgentKind.UAV: self.uav}

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        for name in self.NAMES:
            save_model(getattr(self, name), os.path.join(directory, f"f_{name}.json"), self.fingerprint)
        with open(os.path.join(directory, "bundle.json"), "w") as f:
            json.dump({"fingerprint": self.fingerprint, "models": {n: f"f_{n}.json" for n in self.NAMES}}, f, indent=2)

    @classmethod
    def load(cls, directory: str) -> "ModelBundle":
        with open(os.path.join(directory, "bundle.json")) as f:
            meta = json.load(f)
        models = {name: load_model(os.path.join(directory, file)) for name, file in meta["models"].items()}
        return cls(fingerprint=meta.get("fingerprint"), **models)
