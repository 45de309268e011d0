import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger

load_dotenv()

LOG_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | "
    "<cyan>{name}:{function}:{line}</cyan> - <level>{message}</level>"
)
LOG_LEVEL = os.getenv("BLGV_LOG_LEVEL", "INFO").upper()

logger.remove()
_console_sink_id = logger.add(sys.stderr, level=LOG_LEVEL, format=LOG_FORMAT)

THREADS_STR = os.getenv("BLGV_THREADS", "2")
THREADS = 2
try:
    THREADS = max(1, int(THREADS_STR))
except ValueError:
    logger.warning(
        f"BLGV_THREADS ('{THREADS_STR}') is not a valid integer. Falling back to {THREADS}."
    )

OUTPUT_ROOT = os.getenv("BLGV_OUTPUT_ROOT")
LEDGER_URL = os.getenv("BLGV_LEDGER_URL")
BASELINE_FILE = os.getenv("BLGV_BASELINE_FILE", "recorded_baselines.json")

# Exit codes of the command line entry point.
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_ABORTED = 3

# Magnitudes above this are treated as an overflow of weighted/amplified values.
OVERFLOW_THRESHOLD = 1e100
BLOW_UP_THRESHOLD = 1e6


def setup_logging(level: str = None):
    """Reinstalls the console sink, optionally at a different level."""
    global _console_sink_id
    if level:
        new_sink = logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)
        logger.remove(_console_sink_id)
        _console_sink_id = new_sink
    logger.debug(f"Logging configured at level {level or LOG_LEVEL}.")


def resolve_ledger_url(output_root: Path) -> str:
    """SQLAlchemy URL of the experiment ledger, or empty string when disabled."""
    if LEDGER_URL is None:
        return f"sqlite:///{(output_root / 'ledger.sqlite').as_posix()}"
    if LEDGER_URL.strip().lower() == "none":
        return ""
    return LEDGER_URL
