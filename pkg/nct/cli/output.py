from __future__ import annotations
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from nct import __version__
from nct.cli.document import SCHEMA_VERSION, RunDocument
from nct.config import settings
from nct.utils.grid import SpatialGrid
from nct.utils.validators import fingerprint

log = logging.getLogger(__name__)

_NON_RESULT = {"threads", "log_level"}


def config_hash(doc: RunDocument) -> str:
    """Hash of the resolved document together with the process settings it ran under."""
    return fingerprint({"document": doc.model_dump(mode="json"),
                        "settings": settings.model_dump(mode="json", exclude=_NON_RESULT)})


def provenance(doc: RunDocument, command: str) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": doc.seed,
        "config_hash": config_hash(doc),
        "command": command,
        "version": __version__,
    }


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(o: Any) -> Any:
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(payload: Mapping[str, Any], path: Optional[Path] = None) -> None:
    # json emits repr() floats: shortest string that round-trips exactly
    text = json.dumps(payload, indent=2, default=_jsonable, allow_nan=True)
    if path is None:
        sys.stdout.write(text + "\n")
        return
    Path(path).write_text(text + "\n", encoding="utf-8")
    log.info("wrote %s", path)


def write_field_csv(path: Optional[Path], grid: SpatialGrid, columns: Mapping[str, np.ndarray],
                    header: Mapping[str, Any]) -> None:
    """One row per cell (row-major): i,j,k,x,y,z then the named per-cell columns."""
    ijk = grid.cell_indices()
    xyz = grid.cell_centers()
    flat = {name: np.asarray(v, dtype=float).ravel() for name, v in columns.items()}
    fh = sys.stdout if path is None else open(path, "w", newline="", encoding="utf-8")
    try:
        for key, value in header.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "k", "x", "y", "z", *flat])
        for n in range(grid.n_cells):
            writer.writerow([*ijk[n].tolist(), *(fmt(v) for v in xyz[n]),
                             *(fmt(col[n]) for col in flat.values())])
    finally:
        if path is not None:
            fh.close()
            log.info("wrote %s (%d cells)", path, grid.n_cells)
