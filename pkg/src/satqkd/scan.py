"""Parameter optimisation and scenario sweeps.

Every grid point is an independent (link report, key rate) evaluation, so
sweeps can be farmed out to a process pool; rows always come back in grid
order.  Failures at single points are recorded on the row instead of
aborting the sweep.
"""

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import HETERODYNE, HOMODYNE, AtmosphereParams, DetectorModel, LinkGeometry, link_report
from .errors import AllInsecureError, ConfigError, PhysicsDomainError, SolverError
from .protocol import ProtocolConfig, keyrate
from .solver import SolverOptions

log = logging.getLogger(__name__)

ALTITUDE = "altitude"
ZENITH = "zenith"
ALPHA = "alpha"
DELTA_C = "delta_c"
DELTA_AP = "delta_a_delta_p"
XI_CH = "xi_ch"
VARIABLES = (ALTITUDE, ZENITH, ALPHA, DELTA_C, DELTA_AP, XI_CH)
PHYSICAL = (ALTITUDE, ZENITH, XI_CH)

ERROR = "error"
ALPHA_RANGE = (0.1, 2.0)

FAST_CUTOFF = 6
FULL_CUTOFF = 10


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate a single key rate."""

    geometry: LinkGeometry
    atmosphere: AtmosphereParams = AtmosphereParams()
    detector: DetectorModel = DetectorModel()
    xi_ch: float = 0.01
    protocol: ProtocolConfig = ProtocolConfig()
    solver: SolverOptions = field(default_factory=SolverOptions)

    def with_value(self, variable, value):
        if variable == ALTITUDE:
            return replace(self, geometry=replace(self.geometry, altitude=float(value)))
        if variable == ZENITH:
            return replace(self, geometry=replace(self.geometry, zenith=float(value)))
        if variable == XI_CH:
            return replace(self, xi_ch=float(value))
        if variable == ALPHA:
            return replace(self, protocol=replace(self.protocol, alpha=float(value)))
        if variable == DELTA_C:
            return replace(self, protocol=replace(self.protocol, delta_c=float(value)))
        if variable == DELTA_AP:
            da, dp = value
            return replace(self, protocol=replace(self.protocol, delta_a=float(da), delta_p=float(dp)))
        raise ConfigError(f"unknown sweep variable {variable!r}")


@dataclass(frozen=True)
class SweepSpec:
    scenario: Scenario
    variable: str
    grid: tuple

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"sweep variable must be one of {', '.join(VARIABLES)}, got {self.variable!r}")
        grid = tuple(tuple(map(float, g)) if self.variable == DELTA_AP else float(g) for g in self.grid)
        if not grid:
            raise ConfigError("sweep grid is empty")
        if self.variable in PHYSICAL and len(grid) > 1:
            steps = np.diff(grid)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ConfigError(f"{self.variable} grid must be strictly monotone")
        if self.variable == DELTA_AP and self.scenario.protocol.detection != HETERODYNE:
            raise ConfigError("delta_a/delta_p sweeps need heterodyne detection")
        if self.variable == DELTA_C and self.scenario.protocol.detection != HOMODYNE:
            raise ConfigError("delta_c sweeps need homodyne detection")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SweepRow:
    value: object
    eta_total: float
    xi_effective: float
    rate: float
    secure: bool
    gap: float
    seconds: float
    lower_bound: float = math.nan
    p_pass: float = math.nan
    delta_ec: float = math.nan
    iterations: int = 0
    status: str = ERROR
    message: str = ""

    @property
    def ok(self):
        return self.status != ERROR


def evaluate(scenario):
    """Channel report and key-rate report for one scenario."""
    chan = link_report(
        scenario.geometry, scenario.atmosphere, scenario.detector, scenario.xi_ch, scenario.protocol.detection
    )
    return chan, keyrate(scenario.protocol, chan.eta_total, chan.xi_effective, scenario.solver)


def evaluate_row(scenario, value):
    start = time.perf_counter()
    chan = None
    try:
        chan, kr = evaluate(scenario)
    except (ConfigError, PhysicsDomainError, SolverError) as err:
        log.warning("sweep point %s failed: %s", value, err)
        return SweepRow(
            value=value,
            eta_total=chan.eta_total if chan else math.nan,
            xi_effective=chan.xi_effective if chan else math.nan,
            rate=math.nan,
            secure=False,
            gap=math.nan,
            seconds=time.perf_counter() - start,
            message=f"{type(err).__name__}: {err}",
        )
    return SweepRow(
        value=value,
        eta_total=chan.eta_total,
        xi_effective=chan.xi_effective,
        rate=kr.rate,
        secure=kr.secure,
        gap=kr.gap,
        seconds=time.perf_counter() - start,
        lower_bound=kr.lower_bound,
        p_pass=kr.p_pass,
        delta_ec=kr.delta_ec,
        iterations=kr.iterations,
        status=kr.status,
    )


def _limit_threads(deterministic):
    if deterministic:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)


def _run(tasks, jobs=1, deterministic=False):
    # tasks: list of (scenario, value)
    if jobs <= 1 or len(tasks) <= 1:
        return [evaluate_row(s, v) for s, v in tasks]
    with ProcessPoolExecutor(
        max_workers=min(jobs, len(tasks)), initializer=_limit_threads, initargs=(deterministic,)
    ) as pool:
        return list(pool.map(evaluate_row, *zip(*tasks)))


def sweep(spec, jobs=1, deterministic=False):
    """Evaluate ``spec`` at every grid point; rows follow grid order."""
    tasks = [(spec.scenario.with_value(spec.variable, v), v) for v in spec.grid]
    return _run(tasks, jobs, deterministic)


def argmax(rows):
    """Index of the largest finite rate; ties go to the earliest row."""
    best = None
    for i, row in enumerate(rows):
        if row.ok and not math.isnan(row.rate) and (best is None or row.rate > rows[best].rate):
            best = i
    return best


def _optimum(rows, what):
    i = argmax(rows)
    if i is None or rows[i].rate < 0:
        raise AllInsecureError(f"no positive key rate anywhere on the {what} grid", rows)
    return rows[i].value, rows


def optimize_amplitude(scenario, grid, jobs=1, deterministic=False):
    """Grid search over the coherent amplitude; returns ``(alpha*, rows)``."""
    grid = sorted(float(a) for a in grid)
    lo, hi = ALPHA_RANGE
    if not grid or grid[0] < lo or grid[-1] > hi:
        raise ConfigError(f"amplitude grid must be non-empty and inside [{lo}, {hi}]")
    rows = sweep(SweepSpec(scenario, ALPHA, tuple(grid)), jobs, deterministic)
    return _optimum(rows, "amplitude")


def optimize_postselection(scenario, grids, jobs=1, deterministic=False):
    """Grid search over post-selection thresholds.

    Homodyne: ``grids`` is the list of ``delta_c`` values.  Heterodyne:
    ``grids`` is ``(delta_a values, delta_p values)``, searched on their
    Cartesian product in lexicographic order.  Returns ``(optimum, rows)``.
    """
    if scenario.protocol.detection == HOMODYNE:
        values = sorted(float(d) for d in grids)
        if not values or values[0] < 0:
            raise ConfigError("delta_c grid must be non-empty and non-negative")
        spec = SweepSpec(scenario, DELTA_C, tuple(values))
    else:
        da, dp = grids
        da, dp = sorted(map(float, da)), sorted(map(float, dp))
        if not da or not dp or da[0] < 0 or dp[0] < 0 or dp[-1] >= math.pi / 4:
            raise ConfigError("need non-empty grids with delta_a >= 0 and 0 <= delta_p < pi/4")
        spec = SweepSpec(scenario, DELTA_AP, tuple(itertools.product(da, dp)))
    rows = sweep(spec, jobs, deterministic)
    return _optimum(rows, "post-selection")


def linear_grid(start, stop, step):
    """Inclusive arithmetic grid, rounded to suppress float drift."""
    n = int(round((stop - start) / step))
    return tuple(round(start + k * step, 10) for k in range(n + 1))


def alpha_grid(fidelity="fast"):
    return linear_grid(0.5, 1.2, 0.1) if fidelity == "fast" else linear_grid(0.1, 1.4, 0.02)


def delta_c_grid(fidelity="fast"):
    return linear_grid(0.0, 0.8, 0.1) if fidelity == "fast" else linear_grid(0.0, 0.8, 0.02)


def delta_het_grids(fidelity="fast"):
    if fidelity == "fast":
        return linear_grid(0.1, 0.8, 0.1), linear_grid(0.0, 0.4, 0.1)
    return linear_grid(0.1, 0.8, 0.02), linear_grid(0.0, 0.4, 0.02)
