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

"""Package logging.

Every module logs under ``COOP_DELIVERY``; ``get_logger(__name__)`` gives a
child such as ``COOP_DELIVERY.sim.engine``. Records emitted while the engine
holds the simulated clock carry it as ``sim_time`` (seconds), otherwise ``-``.
"""

import logging
import os
from contextlib import contextmanager
from contextvars import ContextVar
from logging import config
from typing import Iterator, Optional, Union

ROOT_LOGGER = "COOP_DELIVERY"
PACKAGE = "coop_delivery"

# COOP_DELIVERY_LOG_LEVEL takes a level name or number; NOCONFIG leaves logging alone
LOG_VARNAME = "COOP_DELIVERY_LOG_LEVEL"
level_str = os.environ.get(LOG_VARNAME, "INFO").upper()
level: Union[int, str] = level_str if not level_str.isdigit() else int(level_str)

_sim_clock: ContextVar[Optional[float]] = ContextVar("coop_delivery_sim_clock", default=None)


class SimClockFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        now = _sim_clock.get()
        record.sim_time = "-" if now is None else f"{now:.0f}"
        return True


@contextmanager
def sim_clock(now: float) -> Iterator[None]:
    """Stamp records logged inside the block with simulated time ``now``."""
    token = _sim_clock.set(now)
    try:
        yield
    finally:
        _sim_clock.reset(token)


CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "filters": {"coop_delivery_clock": {"()": SimClockFilter}},
    "formatters": {
        "coop_delivery_basic": {
            "format": "%(name)s %(levelname)s (%(asctime)s) [t=%(sim_time)s] - %(message)s"
        }
    },
    "handlers": {
        "coop_delivery_out": {
            "class": "logging.StreamHandler",
            "level": "DEBUG",
            "filters": ["coop_delivery_clock"],
            "formatter": "coop_delivery_basic",
            "stream": "ext://sys.stdout",
        },
        "coop_delivery_err": {
            "class": "logging.StreamHandler",
            "level": "WARNING",
            "filters": ["coop_delivery_clock"],
            "formatter": "coop_delivery_basic",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        ROOT_LOGGER: {
            "handlers": ["coop_delivery_err", "coop_delivery_out"],
            "level": level,
            "propagate": False,
        }
    },
}


if level != "NOCONFIG":
    logging.config.dictConfig(CONFIG)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """``COOP_DELIVERY`` itself, or its child for module ``name``."""
    if not name or name == PACKAGE:
        return logging.getLogger(ROOT_LOGGER)
    if name.startswith(PACKAGE + "."):
        name = name[len(PACKAGE) + 1 :]
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


logger = get_logger()
