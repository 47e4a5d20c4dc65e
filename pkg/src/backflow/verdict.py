"""Outcome of a numerical check evaluated on a time grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .numerics import TimeGrid


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"

    def __str__(self) -> str:
        return self.value


@dataclass
class Verdict:
    """Result of a check.

    ``margin`` is the worst-case value of the checked quantity and the check
    passes when ``margin <= tolerance`` (ties pass). Composite checks report a
    slack ``margin - tolerance`` with ``tolerance = 0``. Per-point values, when
    the check runs on a grid, are kept in ``times`` / ``margins``.
    """

    name: str
    status: Status
    margin: float
    tolerance: float
    witness_point: dict | None = None
    grid: TimeGrid | None = None
    method: str = "exact"
    times: np.ndarray | None = None
    margins: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.status = Status(self.status)
        if self.status is Status.FAIL and self.witness_point is None:
            raise ValueError(f"failed verdict {self.name!r} needs a witness point")

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    @property
    def failed(self) -> bool:
        return self.status is Status.FAIL

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "status": self.status.value,
            "margin": _jsonable(self.margin),
            "tolerance": _jsonable(self.tolerance),
            "method": self.method,
            "witness_point": _jsonable(self.witness_point),
        }
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        if self.details:
            out["details"] = _jsonable(self.details)
        return out


def _jsonable(value: Any) -> Any:
    """Recursively convert numpy/complex values into JSON-friendly data."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Verdict):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, TimeGrid):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            if np.allclose(value.imag, 0, atol=1e-15):
                return _jsonable(value.real.tolist())
            return {"re": _jsonable(value.real.tolist()), "im": _jsonable(value.imag.tolist())}
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "to_dict"):
        return _jsonable(value.to_dict())
    return value


def worst_index(values: np.ndarray) -> int:
    """Index of the largest entry, earliest on ties."""
    return int(np.argmax(values))
