"""Artifact writers. Primary outputs are deterministic; timestamps go to run_metadata.json only."""
import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from app.utils.logger import logger


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values and complex numbers ([re, im]) for json."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """CSV with round-trip float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[column]) for column in header])
    logger.info(f"Wrote {path}")
    return path


def read_timings(path: Path) -> List[float]:
    """Timings from a JSON array or an object with ``timings_ns``."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("timings_ns")
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of timings or an object with 'timings_ns'")
    return [float(t) for t in data]


def write_metadata(out_dir: Path, command: str, seed: int, config_path: Any = None) -> Path:
    return write_json(Path(out_dir) / "run_metadata.json", {
        "command": command,
        "seed": seed,
        "config": str(config_path) if config_path else None,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })
