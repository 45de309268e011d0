from typing import Awaitable, Callable, Dict

from core.run_config import RunConfig
from experiments.apriori import run_apriori
from experiments.lp_selftest import run_lp_selftest
from experiments.mms_study import run_mms
from experiments.radius import run_radius
from experiments.simulation import run_simulation
from experiments.trajectory import ExperimentOutcome
from experiments.uniqueness import run_uniqueness
from experiments.viscosity_limit import run_viscosity_limit
from handlers.report_handler import ReportHandler

Experiment = Callable[[RunConfig, ReportHandler], Awaitable[ExperimentOutcome]]

EXPERIMENT_RUNNERS: Dict[str, Experiment] = {
    "run": run_simulation,
    "mms": run_mms,
    "apriori": run_apriori,
    "radius": run_radius,
    "uniqueness": run_uniqueness,
    "nu_limit": run_viscosity_limit,
    "lp_selftest": run_lp_selftest,
}
