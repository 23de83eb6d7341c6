"""CSV tables for traces, per-input results and summaries."""

import logging
import os
from typing import List, Optional

import pandas as pd

logger = logging.getLogger("odskit")

FLOAT_FORMAT = "%.6g"


def write_table(path, frame: pd.DataFrame, columns: "Optional[List[str]]" = None) -> None:
    """Write a DataFrame with a fixed column order, creating parent dirs."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if columns is not None:
        frame = frame.reindex(columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def read_table(path, columns: "Optional[List[str]]" = None) -> "Optional[pd.DataFrame]":
    """Read a CSV table; a missing file yields None."""
    if not os.path.exists(path):
        logger.warning(f"Table not found: {path}")
        return None
    frame = pd.read_csv(path)
    if columns is not None:
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise ValueError(f"{path} is missing columns: {missing}")
    return frame
