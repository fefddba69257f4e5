"""Structured event log and run-log handler of the harness."""

from __future__ import annotations

import datetime
import json
import logging
import pathlib

from typing import Any

from psx.harness import constants


def log_event(
    event_type: str,
    stage: str,
    data: dict[str, Any],
    path: pathlib.Path | None = None,
) -> None:
    """Append a structured event to the harness event log."""
    log_entry = {
        'timestamp': datetime.datetime.now().isoformat(),
        'event': event_type,
        'stage': stage,
        'data': data,
    }
    log_path = path or constants.EVENT_LOG_PATH
    try:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with log_path.open('a', encoding='utf-8') as f:
            f.write(json.dumps(log_entry, default=str) + '\n')
    except OSError as e:
        logging.warning('Failed to write to psx event log: %s', e)


def create_file_handler(
    path: pathlib.Path | None = None,
) -> logging.FileHandler:
    """File handler for the run log, ``psx.log`` under the logs dir."""
    log_path = path or constants.RUN_LOG_PATH
    log_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_path, encoding='utf-8')
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(
        logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s')
    )
    return file_handler
