"""Uniform record for a numerical check: value, tolerance, standard error, verdict."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    tol: float | None = None
    se: float | None = None  # Monte Carlo standard error of ``value`` (None: deterministic)
    mandatory: bool = True
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.mandatory else "WARN")
        parts = [f"[{tag}] {self.name}"]
        if self.value is not None:
            parts.append(f"value={_fmt(self.value)}")
        if self.tol is not None:
            parts.append(f"tol={_fmt(self.tol)}")
        if self.se is not None:
            parts.append(f"se={_fmt(self.se)}")
        return " ".join(parts)

    def as_dict(self) -> dict:
        return _clean(asdict(self))


def _fmt(x) -> str:
    return f"{x:.4g}" if isinstance(x, float) else str(x)


def _clean(obj):
    """JSON-safe copy (numpy scalars/arrays, non-finite floats as strings)."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


clean = _clean
