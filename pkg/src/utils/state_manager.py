import json
import os
from typing import Dict, Optional

from loguru import logger

from core import config

REGRESSION_TOLERANCE = 0.10


def load_baselines(path: str = None) -> Dict[str, float]:
    """Loads the recorded first-release constants from a JSON file."""
    path = path or config.BASELINE_FILE
    if os.path.exists(path):
        try:
            with open(path, "r") as f:
                data = json.load(f)
                return {str(k): float(v) for k, v in data.items()}
        except (json.JSONDecodeError, ValueError, TypeError) as e:
            logger.warning(f"Error loading or parsing '{path}': {e}. Starting without baselines.")
            return {}
    logger.info(f"File '{path}' not found. Starting without recorded baselines.")
    return {}


def save_baselines(baselines: Dict[str, float], path: str = None):
    path = path or config.BASELINE_FILE
    try:
        with open(path, "w") as f:
            json.dump({str(k): float(v) for k, v in baselines.items()}, f, indent=4, sort_keys=True)
        logger.info(f"Recorded baselines saved to '{path}'.")
    except OSError as e:
        logger.error(f"Error saving recorded baselines to '{path}': {e}")


def compare_with_baseline(key: str, value: float, path: str = None) -> Dict[str, Optional[float]]:
    """Records value on first sight, otherwise checks it within +-10% of the recording.

    Returns the recorded value, the relative deviation and whether it passed.
    """
    baselines = load_baselines(path)
    if key not in baselines:
        baselines[key] = value
        save_baselines(baselines, path)
        logger.info(f"Baseline '{key}' recorded at {value:.6g}.")
        return {"recorded": value, "deviation": 0.0, "passed": True, "first_release": True}
    recorded = baselines[key]
    deviation = abs(value - recorded) / abs(recorded) if recorded else abs(value)
    passed = deviation <= REGRESSION_TOLERANCE
    if passed:
        logger.info(f"Baseline '{key}': {value:.6g} vs recorded {recorded:.6g} ({deviation:.2%}).")
    else:
        logger.error(
            f"Baseline '{key}' regressed: {value:.6g} vs recorded {recorded:.6g} ({deviation:.2%})."
        )
    return {"recorded": recorded, "deviation": deviation, "passed": passed, "first_release": False}
