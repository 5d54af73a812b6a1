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

import json
import sys

import hydra
import omegaconf
from pydantic import ValidationError

from coop_delivery.core.errors import DeliveryError
from coop_delivery.core.stages import OracleCheck, Simulate, Sweep, Synth, Train

STR2STAGECLASS = {
    "synth": Synth,
    "train": Train,
    "simulate": Simulate,
    "sweep": Sweep,
    "oracle_check": OracleCheck,
}


def error_payload(err: Exception) -> dict:
    if isinstance(err, DeliveryError):
        return err.to_dict()
    if isinstance(err, (ValidationError, omegaconf.errors.OmegaConfBaseException, KeyError)):
        return {"error": "invalid_config", "message": str(err)}
    if isinstance(err, OSError):
        return {"error": "io_error", "message": str(err)}
    if isinstance(err, ValueError):
        return {"error": "invalid_argument", "message": str(err)}
    return {"error": "internal_error", "message": f"{type(err).__name__}: {err}"}


def run_stages(cfg: omegaconf.DictConfig) -> None:
    """Runs the requested stages in order; the first failure is reported as JSON on stderr and exits 1."""
    for stage_name in cfg.get("stages"):
        try:
            if stage_name not in STR2STAGECLASS:
                raise ValueError(f"unknown stage {stage_name!r}, choose from {sorted(STR2STAGECLASS)}")
            stage = STR2STAGECLASS[stage_name](cfg)
            stage.run()
        except Exception as err:
            print(json.dumps({"stage": stage_name, **error_payload(err)}, default=str), file=sys.stderr)
            sys.exit(1)

        command = " \\\n  ".join(sys.argv)
        with open(stage.get_job_path().command_file, "w") as f:
            f.write(command)


@hydra.main(config_path="conf", config_name="config", version_base="1.2")
def main(cfg: omegaconf.DictConfig):
    run_stages(cfg)


if __name__ == "__main__":
    main()
