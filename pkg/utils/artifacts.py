import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

import config

LOGGER = logging.getLogger(__name__)

VERSION = "1.0.0"


def _default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f"not serializable: {type(value).__name__}")


class ArtifactWriter:
    """Writes CSV tables and JSON reports under one output directory.

    Outputs carry the run configuration but no timestamps, so two runs with
    the same config and seed produce identical files.
    """

    def __init__(self, output_dir: Optional[str] = None, run_config: Optional[Dict[str, Any]] = None,
                 command: str = "", seed: int = config.DEFAULT_SEED):
        self.output_dir = Path(output_dir or config.OUTPUT_DIR)
        self.run_config = dict(run_config or {})
        self.command = command
        self.seed = seed

    def with_config(self, run_config: Dict[str, Any]) -> 'ArtifactWriter':
        """Same directory, command and seed under another config header."""
        return ArtifactWriter(str(self.output_dir), run_config, self.command, self.seed)

    def _path(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def provenance(self) -> Dict[str, Any]:
        return {
            'config': self.run_config,
            'seed': self.seed,
            'version': VERSION,
            'command': self.command,
        }

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write("# config: " + json.dumps(self.run_config, sort_keys=True, default=_default) + "\n")
            frame.to_csv(f, index=False, float_format="%.12g")
        LOGGER.info("wrote %s (%d rows)", path, len(frame))
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._path(name)
        document = dict(payload)
        document['provenance'] = self.provenance()
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(document, f, indent=4, sort_keys=True, default=_default)
            f.write("\n")
        LOGGER.info("wrote %s", path)
        return path


def read_trajectory_csv(path: str) -> pd.DataFrame:
    """Read a trajectory table written by write_csv, skipping the config line."""
    return pd.read_csv(path, comment='#')


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=4, sort_keys=True, default=_default)


def records(frame: pd.DataFrame):
    """Rows as dicts with missing values as None, ready for JSON."""
    return frame.astype(object).where(frame.notna(), None).to_dict(orient='records')
