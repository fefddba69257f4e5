"""Runtime constants of the psx harness."""

import os
import pathlib


LOGS_DIR = pathlib.Path(os.environ.get('PSX_LOGS_DIR', '.logs'))
EVENT_LOG_PATH = LOGS_DIR / 'psx_events.log'
RUN_LOG_PATH = LOGS_DIR / 'psx.log'

DEFAULT_MODEL_URL = os.environ.get('PSX_MODEL_URL', 'http://127.0.0.1:8090')

RESULTS_CSV = 'results.csv'
SUMMARY_CSV = 'summary.csv'
YIELD_CSV = 'yield.csv'
TIMINGS_CSV = 'timings.csv'
RUN_CONFIG_JSON = 'run-config.json'
OVERLAY_DIR = 'overlays'
EXPLANATION_DIR = 'explanations'

CORPUS_SUFFIXES = ('.png', '.ppm')
