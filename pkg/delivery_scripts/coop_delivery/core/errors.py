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

"""Domain errors. Every error renders to a machine-readable dict for the CLI."""

from typing import Any, Dict, Optional


class DeliveryError(Exception):
    """Base class of all coop-delivery errors."""

    code = "delivery_error"

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, **self.details}


class NoRoute(DeliveryError):
    code = "no_route"


class InvalidSpeed(DeliveryError, ValueError):
    code = "invalid_speed"


class NegativeWeight(DeliveryError, ValueError):
    code = "negative_weight"


class DimensionMismatch(DeliveryError, ValueError):
    code = "dimension_mismatch"


class LengthMismatch(DeliveryError, ValueError):
    code = "length_mismatch"


class ShapeMismatch(DeliveryError, ValueError):
    code = "shape_mismatch"


class EmptyDataset(DeliveryError, ValueError):
    code = "empty_dataset"


class MalformedRecord(DeliveryError, ValueError):
    code = "malformed_record"


class InstanceTooLarge(DeliveryError, ValueError):
    code = "instance_too_large"


class InvalidScenario(DeliveryError, ValueError):
    code = "invalid_scenario"


class InvalidConfig(DeliveryError, ValueError):
    code = "invalid_config"


class CorruptLog(DeliveryError, ValueError):
    code = "corrupt_log"


class PlanViolation(DeliveryError, RuntimeError):
    """A committed plan was violated at execution time. Always a defect."""

    code = "plan_violation"


class _LineError(DeliveryError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, **details: Any):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line, **details)
        self.line = line


class ParseError(_LineError):
    code = "parse_error"


class OutOfBounds(_LineError):
    code = "out_of_bounds"
