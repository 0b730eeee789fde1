#!/usr/bin/env python3
"""
Results Storage for the Transmutation Toolkit
CSV tables at full double precision plus a JSON run manifest per output directory
"""

import json
import time
import logging
import platform
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from toolkit_settings import TOOLKIT_VERSION, get_settings

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
_TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "python-dotenv")


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version(), "toolkit": TOOLKIT_VERSION}
    for name in _TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


class ResultsStorage:
    """Output directory holding CSV tables and the run manifest"""

    def __init__(self, out_dir: Optional[str] = None):
        """
        Prepare the output directory

        Args:
            out_dir: target directory; defaults to TRANSMUTE_OUTPUT_DIR
        """
        self.out_dir = Path(out_dir or get_settings().output_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"❌ Cannot create output directory {self.out_dir}: {e}")
            raise

        self.manifest: Dict[str, Any] = {
            "created_at": datetime.now().isoformat(),
            "versions": package_versions(),
            "config": None,
            "timings": {},
            "certificates": {},
            "warnings": [],
            "files": [],
            "status": None,
        }
        self._stage_started: Dict[str, float] = {}
        logger.info(f"📁 Results directory ready: {self.out_dir}")

    # ------------------------------------------------------------------
    # tables
    # ------------------------------------------------------------------

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a table as <name>.csv with 17 significant digits"""
        path = self.out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.manifest["files"].append(path.name)
        logger.info(f"💾 Wrote {path.name} ({len(frame)} rows)")
        return path

    def read_frame(self, name: str) -> pd.DataFrame:
        path = self.out_dir / (name if name.endswith(".csv") else f"{name}.csv")
        return pd.read_csv(path, float_precision="round_trip")

    # ------------------------------------------------------------------
    # manifest
    # ------------------------------------------------------------------

    def record_config(self, config: Dict[str, Any]) -> None:
        self.manifest["config"] = config

    def start_stage(self, stage: str) -> None:
        self._stage_started[stage] = time.perf_counter()

    def finish_stage(self, stage: str) -> float:
        elapsed = time.perf_counter() - self._stage_started.pop(stage, time.perf_counter())
        self.manifest["timings"][stage] = elapsed
        logger.debug(f"Stage {stage} took {elapsed:.3f}s")
        return elapsed

    def record_certificate(self, name: str, value: Any) -> None:
        self.manifest["certificates"][name] = value

    def record_warnings(self, messages: List[str]) -> None:
        self.manifest["warnings"].extend(messages)

    def write_manifest(self, status: int, error: Optional[str] = None) -> Path:
        self.manifest["status"] = status
        if error is not None:
            self.manifest["error"] = error
        path = self.out_dir / MANIFEST_NAME
        path.write_text(json.dumps(self.manifest, indent=2, default=str))
        logger.info(f"✅ Manifest written to {path}")
        return path

    def get_stats(self) -> Dict[str, Any]:
        """Get storage statistics"""
        return {
            "out_dir": str(self.out_dir),
            "files": len(self.manifest["files"]),
            "warnings": len(self.manifest["warnings"]),
            "timings": dict(self.manifest["timings"]),
        }
