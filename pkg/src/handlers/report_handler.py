import csv
import json
import shutil
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from loguru import logger

from core import config
from core.run_config import RunConfig

# CSV name -> (plot title, x column, y column, color column or None)
PLOT_SPECS = {
    "norms.csv": ("Norms vs t", "t", "value", "norm_name"),
    "mu.csv": ("mu vs t", "t", "mu", None),
    "apriori.csv": ("lhs/rhs ratio vs t", "t", "ratio", None),
    "radius.csv": ("Analyticity radius: measured vs predicted", "t", "measured", None),
    "spectrum.csv": ("Spectrum decay vs |xi|", "abs_xi", "amplitude", "t"),
    "uniqueness.csv": ("Difference norms vs t", "t", "difference", "norm_name"),
    "nu_limit.csv": ("Uniform bound vs nu", "nu", "uniform_bound", None),
    "mms.csv": ("MMS error vs resolution", "h", "err_u", "study"),
}


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ReportHandler:
    """Owns one report directory: config copy, CSV series, key=value summary, log file."""

    def __init__(self, root: Path, experiment: str, stamp: Optional[str] = None, attach_log: bool = True):
        stamp = stamp or datetime.now().strftime("%Y%m%d-%H%M%S")
        directory = Path(root) / f"{experiment}-{stamp}"
        suffix = 1
        while directory.exists():
            directory = Path(root) / f"{experiment}-{stamp}-{suffix}"
            suffix += 1
        directory.mkdir(parents=True)
        self.directory = directory
        self.experiment = experiment
        self._sink_id = None
        if attach_log:
            self._sink_id = logger.add(
                directory / "run.log", level="DEBUG", format=config.LOG_FORMAT, colorize=False
            )
        logger.info(f"Report directory: '{directory}'.")

    @classmethod
    def for_job(cls, parent: "ReportHandler", name: str) -> "ReportHandler":
        job = cls.__new__(cls)
        job.directory = parent.directory / name
        job.directory.mkdir(parents=True, exist_ok=False)
        job.experiment = f"{parent.experiment}/{name}"
        job._sink_id = None
        return job

    def close(self):
        if self._sink_id is not None:
            logger.remove(self._sink_id)
            self._sink_id = None

    def write_config(self, cfg: RunConfig, source: Optional[Path] = None):
        if source is not None:
            shutil.copyfile(source, self.directory / "config.toml")
        with open(self.directory / "config.resolved.json", "w") as f:
            json.dump(cfg.as_dict(), f, indent=2, sort_keys=True)

    def write_rows(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.directory / name
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            count = 0
            for row in rows:
                writer.writerow([format_value(v) for v in row])
                count += 1
        logger.debug(f"{count} rows written to '{path.name}'.")
        return path

    def write_summary(self, summary: Dict[str, Any]) -> Path:
        path = self.directory / "summary.kv"
        with open(path, "w") as f:
            for key, value in summary.items():
                f.write(f"{key}={format_value(value)}\n")
        return path


def read_summary(path: Path) -> Dict[str, str]:
    out = {}
    with open(path) as f:
        for line in f:
            if "=" in line:
                key, value = line.rstrip("\n").split("=", 1)
                out[key] = value
    return out


def _vega_lite(title: str, csv_name: str, x: str, y: str, color: Optional[str]) -> Dict[str, Any]:
    encoding = {
        "x": {"field": x, "type": "quantitative"},
        "y": {"field": y, "type": "quantitative"},
    }
    if color:
        encoding["color"] = {"field": color, "type": "nominal"}
    return {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": title,
        "data": {"url": f"../{csv_name}", "format": {"type": "csv"}},
        "mark": {"type": "line", "point": True},
        "encoding": encoding,
    }


def emit_plots(report_dir: Path) -> List[Path]:
    """Writes one Vega-Lite plot specification per known CSV found in report_dir (and job subdirs)."""
    report_dir = Path(report_dir)
    written = []
    directories = [report_dir] + sorted(p for p in report_dir.iterdir() if p.is_dir() and p.name != "plots")
    for directory in directories:
        present = [name for name in PLOT_SPECS if (directory / name).exists()]
        if not present:
            continue
        plots = directory / "plots"
        plots.mkdir(exist_ok=True)
        for name in present:
            title, x, y, color = PLOT_SPECS[name]
            target = plots / f"{Path(name).stem}.vl.json"
            with open(target, "w") as f:
                json.dump(_vega_lite(title, name, x, y, color), f, indent=2)
            written.append(target)
    if not written:
        logger.warning(f"No CSV series found in '{report_dir}'; no plot scripts emitted.")
    else:
        missing = [name for name in PLOT_SPECS if not any((d / name).exists() for d in directories)]
        absent = ", ".join(missing) or "none"
        logger.info(f"{len(written)} plot scripts emitted; series not present: {absent}.")
    return written
