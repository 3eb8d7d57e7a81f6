"""
Deterministic result tables.

CSV files start with `# key: value` metadata lines (values JSON-encoded),
followed by a header row and data rows with floats at 17 significant
digits. JSON files hold {"metadata": {...}, "rows": [...]}. Neither format
carries timestamps, so identical inputs give byte-identical files.
"""

import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
METADATA_PREFIX = "# "


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def _plain(value: Any) -> Any:
    """Convert numpy scalars and non-finite floats to JSON-friendly values."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def config_hash(run_config: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON encoding of a run configuration."""
    canonical = json.dumps(_plain(run_config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ResultTable:
    """Rows of one command's result with the metadata needed to reproduce them."""
    metadata: Dict[str, Any] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_csv(self) -> str:
        lines = [f"{METADATA_PREFIX}{key}: {json.dumps(_plain(value), sort_keys=True)}"
                 for key, value in self.metadata.items()]
        buffer = io.StringIO()
        frame = pd.DataFrame([_plain(row) for row in self.rows])
        frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
        return "\n".join(lines) + ("\n" if lines else "") + buffer.getvalue()

    def to_json(self) -> str:
        payload = {"metadata": _plain(self.metadata), "rows": [_plain(row) for row in self.rows]}
        return json.dumps(payload, indent=2) + "\n"

    def render(self, output_format: Union[OutputFormat, str]) -> str:
        output_format = OutputFormat(output_format)
        return self.to_csv() if output_format is OutputFormat.CSV else self.to_json()


def write_table(table: ResultTable, path: Union[str, Path], output_format: Union[OutputFormat, str]) -> Path:
    """Write the table; parent directories are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = table.render(output_format)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {len(table.rows)} rows to {path}")
    return path


def read_table(path: Union[str, Path]) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """Read a CSV or JSON table written by write_table."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if path.suffix.lower() == ".json":
        payload = json.loads(text)
        return payload["metadata"], pd.DataFrame(payload["rows"])

    metadata: Dict[str, Any] = {}
    body_start = 0
    lines = text.splitlines(keepends=True)
    for i, line in enumerate(lines):
        if not line.startswith(METADATA_PREFIX):
            body_start = i
            break
        key, _, value = line[len(METADATA_PREFIX):].partition(": ")
        metadata[key] = json.loads(value)
    else:
        body_start = len(lines)
    body = "".join(lines[body_start:])
    frame = pd.read_csv(io.StringIO(body), float_precision="round_trip") if body.strip() else pd.DataFrame()
    return metadata, frame
