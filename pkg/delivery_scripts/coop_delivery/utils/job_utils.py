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

from pathlib import Path
from typing import Union


class JobPaths:
    """Creates paths related to one stage run and its outputs"""

    def __init__(self, folder: Union[Path, str], job_name: str,) -> None:
        self._folder = Path(folder).expanduser().absolute()
        self._job_name = job_name

    @property
    def folder(self) -> Path:
        return self._folder

    @property
    def results_folder(self) -> Path:
        return self._folder / "results"

    @property
    def config_file(self) -> Path:
        return Path(self.folder / f"{self._job_name}_hydra.yaml")

    @property
    def command_file(self) -> Path:
        return Path(self.folder / "delivery_cmd.log")

    @property
    def metrics_file(self) -> Path:
        return self.results_folder / "metrics.json"

    @property
    def event_log(self) -> Path:
        return self.results_folder / "events.jsonl"

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.folder})"
