"""Observers attached to a trajectory: norm ledgers, snapshots, radius audit."""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core.exceptions import SpectrumUnderresolvedError
from experiments.trajectory import Observer
from processing.grid import forward_transform
from processing.lpaley import BesovSpec, CheminLernerAccumulator, DyadicPartition, WeightProfile
from processing.phase import PhasedSpectra, PhaseState, measured_radius, spectrum_profile
from processing.solver import Forcing, SolveState
from tools.snapshot_io import write_snapshot

INF = math.inf


@dataclass(frozen=True)
class NormSpec:
    """One time-space norm: field 'u' or 'theta', Besov (s, j), time exponent p."""

    name: str
    field: str
    s: float
    j: int
    p: float
    offset: int = 0
    density: str = ""

    def accumulator(self, n_blocks: int) -> CheminLernerAccumulator:
        return CheminLernerAccumulator(
            BesovSpec(self.s, self.j), self.p, n_blocks, self.offset, self.name, self.density
        )


# Left-hand side of the a priori estimate; the last four carry the mu-dot density.
APRIORI_NORMS: Tuple[NormSpec, ...] = (
    NormSpec("u_phi", "u", 1.0, 1, INF),
    NormSpec("theta_phi", "theta", 1.0, 1, INF),
    NormSpec("dy_u_phi", "u", 1.0, 1, 2, offset=1),
    NormSpec("dy_theta_phi", "theta", 1.0, 1, 2, offset=1),
    NormSpec("dyy_u_phi", "u", 0.5, 0, INF, offset=2),
    NormSpec("dyy_theta_phi", "theta", 0.5, 0, INF, offset=2),
    NormSpec("dyyy_u_phi", "u", 0.5, 0, 2, offset=3),
    NormSpec("dyyy_theta_phi", "theta", 0.5, 0, 2, offset=3),
    NormSpec("u_phi", "u", 1.5, 1, 2, density="mu"),
    NormSpec("theta_phi", "theta", 1.5, 1, 2, density="mu"),
    NormSpec("dyy_u_phi", "u", 1.0, 0, 2, offset=2, density="mu"),
    NormSpec("dyy_theta_phi", "theta", 1.0, 0, 2, offset=2, density="mu"),
)

# Norms entering the Cauchy-Schwarz consistency checks of the mu rate.
CONSISTENCY_NORMS: Tuple[NormSpec, ...] = (
    NormSpec("dy_u_phi", "u", 0.5, 2, 2, offset=1),
    NormSpec("dy_theta_phi", "theta", 0.5, 2, 2, offset=1),
)

# Uniform-in-nu bound with the halved phase.
NU_LIMIT_NORMS: Tuple[NormSpec, ...] = (
    NormSpec("u_phi_half", "u", 3.0, 1, INF),
    NormSpec("theta_phi_half", "theta", 3.0, 1, INF),
    NormSpec("dy_u_phi_half", "u", 3.0, 1, 2, offset=1),
    NormSpec("dy_theta_phi_half", "theta", 3.0, 1, 2, offset=1),
)


class NormMonitor(Observer):
    """Accumulates Chemin-Lerner norms of e^{radius |D|} (u, theta) along a trajectory.

    L^2 norms use the left rectangle rule on the state at t_n; L^inf norms are
    updated with every new state, the initial one included.
    """

    def __init__(
        self,
        grid,
        specs: Sequence[NormSpec],
        radius_of: Callable[[PhaseState], float] = lambda phase: phase.radius,
        norm_every: int = 1,
    ):
        self.partition = DyadicPartition(grid)
        self.specs = tuple(specs)
        self.accumulators = [s.accumulator(len(self.partition.blocks)) for s in self.specs]
        self.radius_of = radius_of
        self.norm_every = norm_every
        self.rows: List[Tuple[float, str, float]] = []
        self.steps = 0
        self._current: Optional[PhasedSpectra] = None
        self._recorded_at: Optional[float] = None

    def spectra(self, state: SolveState, phase: PhaseState) -> PhasedSpectra:
        w = WeightProfile.for_grid(state.grid, state.theta_E, state.t)
        return PhasedSpectra(state.stacks, w, max(self.radius_of(phase), 0.0), self.partition)

    @staticmethod
    def _table(spectra: PhasedSpectra, field: str):
        return spectra.u if field == "u" else spectra.theta

    def _update_sup(self, spectra: PhasedSpectra):
        for spec, acc in zip(self.specs, self.accumulators):
            if spec.p == INF:
                acc.update(self._table(spectra, spec.field), dt=0.0)

    def _integrate(self, spectra: PhasedSpectra, t: float, dt: float, mu_dot: float):
        for spec, acc in zip(self.specs, self.accumulators):
            if spec.p == 2:
                density = mu_dot if spec.density == "mu" else 1.0
                acc.update(self._table(spectra, spec.field), dt, density)

    def on_start(self, state: SolveState, phase: PhaseState):
        self._current = self.spectra(state, phase)
        self._update_sup(self._current)
        self._record(state.t)

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        self._integrate(self._current, prev.t, curr.t - prev.t, phase.mu_dot)
        self._current = self.spectra(curr, phase)
        self._update_sup(self._current)
        self.steps += 1
        if self.steps % self.norm_every == 0:
            self._record(curr.t)

    def on_finish(self, state: SolveState, phase: PhaseState, status: str):
        if self._recorded_at != state.t:
            self._record(state.t)

    def _record(self, t: float):
        self._recorded_at = t
        for acc in self.accumulators:
            self.rows.append((t, acc.label, acc.value()))

    def values(self) -> Dict[str, float]:
        return {acc.label: acc.value() for acc in self.accumulators}

    def value(self, name: str) -> float:
        return self.values()[name]


class AprioriMonitor(NormMonitor):
    """Norm ledger of the a priori estimate plus the consistency ratios of the mu rate."""

    def __init__(self, grid, lam: float, data_norm: float, epsilon: float, norm_every: int = 1):
        super().__init__(grid, APRIORI_NORMS + CONSISTENCY_NORMS, norm_every=norm_every)
        self.lam = lam
        self.data_norm = data_norm
        self.epsilon = epsilon
        self.ratio_rows: List[Tuple[float, float, float, float]] = []
        self.s_half = 0.0
        self.linear_integral = 0.0
        self.quadratic_integral = 0.0

    def _integrate(self, spectra: PhasedSpectra, t: float, dt: float, mu_dot: float):
        super()._integrate(spectra, t, dt, mu_dot)
        bt = 1.0 + t
        u, th = spectra.u, spectra.theta
        self.s_half += dt * bt**0.5
        self.linear_integral += dt * bt**0.25 * (u.besov(0.5, 2, offset=1) + th.besov(0.5, 2, offset=1))
        self.quadratic_integral += dt * bt**0.5 * (u.besov(1.0, 0) ** 2 + th.besov(1.0, 0) ** 2)

    def lhs(self) -> float:
        values = [acc.value() for acc in self.accumulators[: len(APRIORI_NORMS)]]
        return sum(values[:8]) + math.sqrt(self.lam) * sum(values[8:])

    def ratio(self) -> float:
        return self.lhs() / self.data_norm if self.data_norm > 0 else 0.0

    def smallness_ratio(self) -> float:
        theta_sup = self.accumulators[1].value()
        return theta_sup / self.epsilon if self.epsilon > 0 else 0.0

    def consistency_ratios(self) -> Dict[str, float]:
        """Discrete Cauchy-Schwarz ratios; both are <= 1 up to round-off."""
        first = len(APRIORI_NORMS)
        cl_dy = self.accumulators[first].value() + self.accumulators[first + 1].value()
        sup = self.accumulators[0].value() ** 2 + self.accumulators[1].value() ** 2
        linear = 0.0
        if self.s_half > 0 and cl_dy > 0:
            linear = self.linear_integral / (math.sqrt(self.s_half) * cl_dy)
        quadratic = self.quadratic_integral / (self.s_half * sup) if self.s_half > 0 and sup > 0 else 0.0
        return {"mu_linear_consistency": linear, "mu_quadratic_consistency": quadratic}

    def _record(self, t: float):
        super()._record(t)
        self.ratio_rows.append((t, self.lhs(), self.data_norm, self.ratio()))


class SnapshotWriter(Observer):
    def __init__(self, directory: Path, every: int):
        self.directory = Path(directory)
        self.every = every
        self.steps = 0
        self.written = 0

    def _write(self, state: SolveState):
        index = state.step_index
        write_snapshot(self.directory / f"u_{index:06d}.bin", state.u)
        write_snapshot(self.directory / f"theta_{index:06d}.bin", state.theta)
        self.written += 1

    def on_start(self, state: SolveState, phase: PhaseState):
        if self.every > 0:
            self._write(state)

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        self.steps += 1
        if self.every > 0 and self.steps % self.every == 0:
            self._write(curr)


class RadiusAudit(Observer):
    """Compares the measured spectral decay rate with the predicted radius delta - lambda mu."""

    def __init__(self, every: int = 1):
        self.every = every
        self.steps = 0
        self.rows: List[Tuple[float, float, float, float, float]] = []
        self.spectra: List[Tuple[float, str, float, float]] = []
        self.skipped = 0
        self._last = None

    def _sample(self, state: SolveState, phase: PhaseState):
        U, TH = forward_transform(state.u), forward_transform(state.theta)
        try:
            rho_u, rho_th = measured_radius(U), measured_radius(TH)
        except SpectrumUnderresolvedError as e:
            self.skipped += 1
            logger.warning(f"Radius sample at t={state.t:.6g} skipped: {e}.")
            return
        self.rows.append((state.t, phase.radius, rho_u, rho_th, min(rho_u, rho_th)))
        self._last = (state.t, U, TH)
        if len(self.rows) == 1:
            self._add_spectrum(state.t, U, TH)

    def _add_spectrum(self, t, U, TH):
        for name, F in (("u", U), ("theta", TH)):
            xi, amplitude = spectrum_profile(F)
            self.spectra.extend((t, name, float(x), float(a)) for x, a in zip(xi, amplitude))

    def on_start(self, state: SolveState, phase: PhaseState):
        self._sample(state, phase)

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        self.steps += 1
        if self.steps % self.every == 0:
            self._sample(curr, phase)

    def on_finish(self, state: SolveState, phase: PhaseState, status: str):
        if not self.rows or self.rows[-1][0] != state.t:
            self._sample(state, phase)
        if self._last is not None and len(self.rows) > 1:
            self._add_spectrum(*self._last)

    def worst_margin(self) -> float:
        """min over samples of measured - predicted."""
        if not self.rows:
            return float("nan")
        return float(min(measured - predicted for _, predicted, _, _, measured in self.rows))


class StateRecorder(Observer):
    """Keeps (t, u, theta, mu, mu_dot) of every accepted state."""

    def __init__(self):
        self.times: List[float] = []
        self.u: List[np.ndarray] = []
        self.theta: List[np.ndarray] = []
        self.mu: List[float] = []

    def _keep(self, state: SolveState, phase: PhaseState):
        self.times.append(state.t)
        self.u.append(state.u.values)
        self.theta.append(state.theta.values)
        self.mu.append(phase.mu)

    def on_start(self, state: SolveState, phase: PhaseState):
        self._keep(state, phase)

    def on_step(self, prev: SolveState, curr: SolveState, phase: PhaseState, forcing: Optional[Forcing]):
        self._keep(curr, phase)
