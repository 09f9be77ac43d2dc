from __future__ import annotations
import hashlib
import json
from typing import Any, Sequence

import numpy as np

from nct.utils.errors import DomainError

UNIT_NORM_TOL = 1e-12


def as_direction(components: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validated unit 3-vector (a single direction of flight)."""
    v = np.asarray(components, dtype=float)
    if v.shape != (3,):
        raise DomainError(f"direction must have 3 components, got shape {v.shape}")
    norm = float(np.sqrt(v @ v))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise DomainError(f"direction must be a unit vector (|Ω| = {norm!r})")
    return v


def normalize_directions(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def is_probability(value: float, *, closed_top: bool = True) -> bool:
    if not np.isfinite(value) or value < 0.0:
        return False
    return value <= 1.0 if closed_top else value < 1.0


def check_nonnegative_length(s: Any, name: str = "s") -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DomainError(f"{name} must be >= 0")
    return arr


def odd_coefficients(coeffs: Sequence[float]) -> list[int]:
    """Powers with nonzero weight in a polynomial that must be even."""
    return [k for k, a in enumerate(coeffs) if k % 2 == 1 and a != 0.0]


def fingerprint(payload: Any) -> str:
    """Stable short hash of a JSON-able payload (numpy arrays become nested lists)."""

    def _default(o: Any) -> Any:
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"cannot fingerprint {type(o).__name__}")

    text = json.dumps(payload, sort_keys=True, default=_default, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
