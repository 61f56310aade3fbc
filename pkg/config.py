import logging
import os
from typing import Any, Dict


class Config:
    """Runtime configuration read from the environment."""

    def __init__(self):
        # Output
        self.OUT_DIR = os.environ.get('TOPO_META_OUT', 'results')

        # Logging
        self.LOG_LEVEL = os.environ.get('TOPO_META_LOG_LEVEL', 'INFO').upper()
        self.LOG_DIR = os.environ.get('TOPO_META_LOG_DIR', 'logs')

        # Search
        self.CANDIDATE_BUDGET = _int_env('TOPO_META_CANDIDATE_BUDGET', 10000)
        self.WORKERS = _int_env('TOPO_META_WORKERS', 1)

    def validate(self) -> Dict[str, Any]:
        """
        Validate configuration and return status.

        Returns:
            Dict with validation status, any issues and the effective run settings
        """
        issues = []

        if not self.OUT_DIR.strip():
            issues.append("TOPO_META_OUT must not be empty")

        if not isinstance(logging.getLevelName(self.LOG_LEVEL), int):
            issues.append(f"TOPO_META_LOG_LEVEL {self.LOG_LEVEL!r} is not a logging level")

        if self.CANDIDATE_BUDGET is None or self.CANDIDATE_BUDGET < 1:
            issues.append("TOPO_META_CANDIDATE_BUDGET should be a positive integer")

        if self.WORKERS is None or self.WORKERS < 1:
            issues.append("TOPO_META_WORKERS should be a positive integer")

        return {
            "valid": len(issues) == 0,
            "issues": issues,
            "run_config": {
                'out_dir': self.OUT_DIR,
                'log_level': self.LOG_LEVEL,
                'log_dir': self.LOG_DIR,
                'candidate_budget': self.CANDIDATE_BUDGET,
                'workers': self.WORKERS
            }
        }


def _int_env(name: str, default: int):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        return None
