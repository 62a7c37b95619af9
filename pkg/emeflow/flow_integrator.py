"""
EME flow lines: integral curves of dr/ds = S / (c U).

A bundle of lines is advanced as one system in the arc length s with scipy's
DOP853 stepper, so every field evaluation covers all active lines at once.
The solver's error control sets the step. The nominal step
clip(step_fraction * y, min_step, max_step) caps it, and after a step that
turned the flow by more than ``max_turn_angle`` the cap is halved for the
next one. Lines leave the system when they reach the screen, stagnate or
run out of steps.

The fields do not depend on z, so only (x, y) is handed to the solver; z is
accumulated per step by Gauss-Legendre quadrature of v_z along the solver's
dense output.
"""

import concurrent.futures
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.integrate import DOP853, cumulative_trapezoid
from scipy.optimize import brentq
from tqdm import tqdm

from .constants import (
    DEFAULT_TRAJECTORIES_PER_SLIT,
    FLOW_ATOL,
    FLOW_RTOL,
    LAUNCH_OFFSET_WAVELENGTHS,
    MAX_HALVINGS,
    MAX_SCREEN_DISTANCE,
    MAX_STEP,
    MAX_STEPS,
    MAX_TURN_ANGLE,
    MIN_STEP_WAVELENGTHS,
    STAGNATION_RATIO,
    STEP_FRACTION,
    TRAJECTORY_CHUNK,
)
from .em_assembly import (
    INCIDENT_DENSITY,
    PolarizationState,
    PolarizerConfig,
    assemble_fields,
    eme_density,
    poynting,
)
from .errors import IntegrationError, ProfileError, StagnationError
from .scalar_propagation import PLANE_WAVE, GratingGeometry, IncidentProfile, WaveParameters, total_wave

logger = logging.getLogger(__name__)

# lines closer than this to the screen are snapped onto it
SCREEN_TOLERANCE = 1e-12  # m
LAUNCH_DENSITY_NODES = 4097
# tightening factor of rtol and atol in TrajectoryControls.refined
TOLERANCE_REFINEMENT = 16.0

_Z_NODES, _Z_WEIGHTS = np.polynomial.legendre.leggauss(6)


class TerminationStatus(Enum):
    REACHED_SCREEN = "reached_screen"
    MAX_STEPS = "max_steps"
    STAGNATION = "stagnation"


class LaunchDistribution(Enum):
    UNIFORM = "uniform"
    DENSITY_WEIGHTED = "density_weighted"

    @classmethod
    def from_str(cls, value: str) -> "LaunchDistribution":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown launch distribution {value!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One flow line.

    ``samples`` has one row (s, x, y, z) per accepted step, or only the launch
    and final rows when the path was not recorded.
    """

    launch: tuple[float, float, float]
    samples: np.ndarray
    terminated: TerminationStatus
    steps: int = 0

    @property
    def s(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def y(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def z(self) -> np.ndarray:
        return self.samples[:, 3]

    @property
    def endpoint(self) -> np.ndarray:
        return self.samples[-1, 1:]

    @property
    def reached_screen(self) -> bool:
        return self.terminated is TerminationStatus.REACHED_SCREEN


@dataclass(frozen=True)
class LaunchPlan:
    """Where flow lines start: ``count_per_slit`` points per open slit at height ``y0``."""

    count_per_slit: int = DEFAULT_TRAJECTORIES_PER_SLIT
    y0: float | None = None
    distribution: LaunchDistribution = LaunchDistribution.UNIFORM

    def __post_init__(self):
        if self.count_per_slit < 1:
            raise ValueError(f"count per slit must be at least 1, got {self.count_per_slit}")
        if self.y0 is not None and not self.y0 > 0:
            raise ValueError(f"launch height must be positive, got {self.y0}")

    def launch_height(self, wp: WaveParameters) -> float:
        """``y0``, defaulting to ten wavelengths behind the grating."""
        return LAUNCH_OFFSET_WAVELENGTHS * wp.wavelength if self.y0 is None else self.y0


@dataclass(frozen=True)
class TrajectoryControls:
    """
    Step control of the integrator.

    ``rtol`` and ``atol`` (metres) drive the DOP853 error control; the step
    bounds cap the step it picks. ``min_step`` defaults to a tenth of a
    wavelength.
    """

    step_fraction: float = STEP_FRACTION
    max_step: float = MAX_STEP
    min_step: float | None = None
    max_turn_angle: float = MAX_TURN_ANGLE
    max_halvings: int = MAX_HALVINGS
    rtol: float = FLOW_RTOL
    atol: float = FLOW_ATOL
    max_steps: int = MAX_STEPS
    record_path: bool = True

    def __post_init__(self):
        if not 0 < self.step_fraction < 1:
            raise ValueError(f"step fraction must lie in (0, 1), got {self.step_fraction}")
        if not self.max_step > 0:
            raise ValueError(f"max step must be positive, got {self.max_step}")
        if self.min_step is not None and not 0 < self.min_step <= self.max_step:
            raise ValueError(f"min step must lie in (0, max_step], got {self.min_step}")
        if self.max_steps < 1 or self.max_halvings < 0:
            raise ValueError("max_steps must be positive and max_halvings non-negative")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError(f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")

    def resolved_min_step(self, wp: WaveParameters) -> float:
        return MIN_STEP_WAVELENGTHS * wp.wavelength if self.min_step is None else self.min_step

    def refined(self, wp: WaveParameters) -> "TrajectoryControls":
        """Same controls with every step bound halved and the tolerances tightened."""
        return replace(
            self,
            step_fraction=0.5 * self.step_fraction,
            max_step=0.5 * self.max_step,
            min_step=0.5 * self.resolved_min_step(wp),
            rtol=self.rtol / TOLERANCE_REFINEMENT,
            atol=self.atol / TOLERANCE_REFINEMENT,
        )


@dataclass(frozen=True)
class FlowSetup:
    """Everything the velocity field depends on."""

    wp: WaveParameters
    g: GratingGeometry
    pol: PolarizationState
    pcfg: PolarizerConfig = PolarizerConfig.NONE
    profile: IncidentProfile = PLANE_WAVE
    screen: float | None = None
    controls: TrajectoryControls = field(default_factory=TrajectoryControls)

    @property
    def screen_distance(self) -> float:
        return self.wp.screen_distance if self.screen is None else self.screen

    @property
    def moves_out_of_plane(self) -> bool:
        """Whether v_z can be non-zero anywhere."""
        drive = self.pol.alpha * self.pol.beta
        if self.pcfg is PolarizerConfig.NONE:
            drive *= self.pol.phase_factor.imag
        return drive != 0


def _flow_field(x, y, wp, g, pol, pcfg, profile):
    """
    Velocity S / (c U), shape (3, ...), and U / U_0 at (x, y).

    Stagnant points get a zero velocity. Without polarizers the field is
    built from Psi alone,

        v_x + i v_y -> 2k Im(Psi* grad Psi) / (|grad Psi|^2 + k^2 |Psi|^2)
        v_z = -4 alpha beta sin(phi) Im(dPsi/dy dPsi/dx*) / (same)

    so (v_x, v_y) carries no trace of the polarization.
    """
    if pcfg is PolarizerConfig.NONE:
        psi = total_wave(x, y, wp, g, profile)
        k = wp.wavenumber
        weight = np.abs(psi.grad_x) ** 2 + np.abs(psi.grad_y) ** 2 + k**2 * np.abs(psi.value) ** 2
        density = weight / (2.0 * k**2)
        stagnant = density < STAGNATION_RATIO
        safe = np.where(stagnant, 1.0, weight)
        conj = np.conj(psi.value)
        drive = 4.0 * pol.alpha * pol.beta * pol.phase_factor.imag
        v = np.stack(
            [
                2.0 * k * np.imag(conj * psi.grad_x) / safe,
                2.0 * k * np.imag(conj * psi.grad_y) / safe,
                -drive * np.imag(psi.grad_y * np.conj(psi.grad_x)) / safe,
            ]
        )
    else:
        f = assemble_fields(x, y, wp, g, pol, pcfg, profile)
        u = eme_density(f)
        density = u / INCIDENT_DENSITY
        stagnant = density < STAGNATION_RATIO
        v = poynting(f) / np.where(stagnant, 1.0, u)
    return np.where(stagnant, 0.0, v), density


def flow_velocity(
    x,
    y,
    z,
    wp: WaveParameters,
    g: GratingGeometry,
    pol: PolarizationState,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
) -> np.ndarray:
    """
    Flow velocity S / (c U) at (x, y, z); shape (3,) for scalar input, else (3, ...).

    The fields are z-independent, so ``z`` only fixes the output shape.

    Raises:
        StagnationError: where U < 1e-12 U_0
        DomainError: outside the evaluation domain
    """
    x, y, _ = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    )
    v, density = _flow_field(x, y, wp, g, pol, pcfg, profile)
    if (density < STAGNATION_RATIO).any():
        raise StagnationError()
    return v


def _turn_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between the (x, y) projections of two velocity sets of shape (2, n)."""
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a[0] * b[0] + a[1] * b[1]
    return np.abs(np.arctan2(cross, dot))


def _step_cap(y: np.ndarray, controls: TrajectoryControls, min_step: float) -> float:
    nominal = np.clip(controls.step_fraction * y, min_step, max(controls.max_step, min_step))
    return float(np.minimum(nominal, MAX_SCREEN_DISTANCE - y).min())


def _turn_halvings(turn: float, controls: TrajectoryControls) -> int:
    """Halvings that bring a step which turned by ``turn`` back under the turn limit."""
    if turn <= controls.max_turn_angle:
        return 0
    return min(controls.max_halvings, math.ceil(math.log2(turn / controls.max_turn_angle)))


def _screen_crossing(dense, lane: int, m: int, screen: float, s0: float, s1: float) -> float:
    """Arc length in [s0, s1] at which line ``lane`` of the last step meets y = screen."""

    def height(s):
        return dense(s)[m + lane] - screen

    if height(s1) <= 0:
        return s1
    if height(s0) >= 0:
        return s0
    return brentq(height, s0, s1, xtol=1e-15)


def _z_increments(dense, field_at, s0: float, s1: float, s_end: np.ndarray, m: int) -> np.ndarray:
    """Integral of v_z over [s0, s_end[j]] along every line j of the last step."""
    increments = np.empty(m)
    full = s_end == s1
    if full.any():
        half = 0.5 * (s1 - s0)
        states = dense(s0 + half * (1.0 + _Z_NODES))
        lanes = np.flatnonzero(full)
        v, _ = field_at(states[lanes], states[m + lanes])
        increments[lanes] = half * (v[2] @ _Z_WEIGHTS)
    for j in np.flatnonzero(~full):
        half = 0.5 * (s_end[j] - s0)
        states = dense(s0 + half * (1.0 + _Z_NODES))
        v, _ = field_at(states[j], states[m + j])
        increments[j] = half * (v[2] @ _Z_WEIGHTS)
    return increments


def integrate_bundle(launches, setup: FlowSetup) -> list[Trajectory]:
    """
    Integrate flow lines from every launch point until they reach the screen.

    Lines stop early on stagnation or when their step budget runs out; the
    status is recorded on each Trajectory instead of raised. Lines of one
    bundle share their steps, so a line's samples depend on its companions
    only to within the tolerances.

    Args:
        launches: array-like of shape (n, 3)
        setup: field configuration, screen distance and step controls

    Returns:
        one Trajectory per launch, in launch order
    """
    controls = setup.controls
    screen = setup.screen_distance
    if not 0 < screen <= MAX_SCREEN_DISTANCE:
        raise ValueError(f"screen distance must lie in (0, {MAX_SCREEN_DISTANCE}] m, got {screen}")
    min_step = controls.resolved_min_step(setup.wp)

    start = np.array(launches, dtype=float).reshape(-1, 3)
    if (start[:, 1] <= 0).any() or (start[:, 1] >= screen).any():
        raise ValueError("launch heights must lie strictly between the grating and the screen")

    def field_at(x, y):
        return _flow_field(x, y, setup.wp, setup.g, setup.pol, setup.pcfg, setup.profile)

    n = len(start)
    pos = start[:, :2].copy()
    z = start[:, 2].copy()
    steps = np.zeros(n, dtype=int)
    status: list[TerminationStatus | None] = [None] * n
    paths = [[(0.0, *p)] for p in start]
    moves_z = setup.moves_out_of_plane

    v_now, density = field_at(pos[:, 0], pos[:, 1])
    v_xy = v_now[:2].copy()
    for i in np.flatnonzero(density < STAGNATION_RATIO):
        status[i] = TerminationStatus.STAGNATION
    lanes = np.flatnonzero(density >= STAGNATION_RATIO)

    s = 0.0
    last_step = None
    halvings = 0
    restarts = 0
    while lanes.size:
        m = lanes.size

        def rhs(_, state, m=m):
            v, _ = field_at(state[:m], state[m:])
            return np.concatenate([v[0], v[1]])

        cap = _step_cap(pos[lanes, 1], controls, min_step)
        if last_step is not None:
            cap = min(cap, last_step * 0.5**halvings)
        solver = DOP853(
            rhs,
            s,
            np.concatenate([pos[lanes, 0], pos[lanes, 1]]),
            np.inf,
            max_step=cap,
            rtol=controls.rtol,
            atol=controls.atol,
            first_step=None if last_step is None else cap,
        )
        restarts += 1

        while True:
            solver.max_step = cap
            message = solver.step()
            if solver.status == "failed":
                logger.warning(f"{m} flow lines abandoned at s = {s:.6g} m: {message}")
                for lane in lanes:
                    status[lane] = TerminationStatus.MAX_STEPS
                    if not controls.record_path and steps[lane]:
                        paths[lane].append((s, *pos[lane], z[lane]))
                lanes = lanes[:0]
                break

            s_old, s = solver.t_old, solver.t
            steps[lanes] += 1
            x_new, y_new = solver.y[:m], solver.y[m:]
            v_new, density = field_at(x_new, y_new)

            arrived = (y_new >= screen) | (screen - y_new < SCREEN_TOLERANCE)
            s_end = np.full(m, s)
            x_end = x_new.copy()
            dense = solver.dense_output() if moves_z or arrived.any() else None
            for j in np.flatnonzero(arrived):
                s_end[j] = _screen_crossing(dense, j, m, screen, s_old, s)
                if s_end[j] != s:
                    x_end[j] = dense(s_end[j])[j]
            if moves_z:
                z[lanes] += _z_increments(dense, field_at, s_old, s, s_end, m)

            stagnant = ~arrived & (density < STAGNATION_RATIO)
            exhausted = ~arrived & ~stagnant & (steps[lanes] >= controls.max_steps)
            done = arrived | stagnant | exhausted

            pos[lanes, 0] = x_end
            pos[lanes, 1] = np.where(arrived, screen, y_new)
            for j, lane in enumerate(lanes):
                if arrived[j]:
                    status[lane] = TerminationStatus.REACHED_SCREEN
                elif stagnant[j]:
                    status[lane] = TerminationStatus.STAGNATION
                elif exhausted[j]:
                    status[lane] = TerminationStatus.MAX_STEPS
                if controls.record_path or done[j]:
                    paths[lane].append((s_end[j], *pos[lane], z[lane]))

            going = ~done
            turn = _turn_angle(v_xy[:, lanes], v_new[:2])
            halvings = _turn_halvings(float(turn[going].max()) if going.any() else 0.0, controls)
            v_xy[:, lanes] = v_new[:2]
            last_step = solver.step_size
            if done.any():
                lanes = lanes[going]
                break
            cap = min(_step_cap(y_new, controls, min_step), last_step * 0.5**halvings)

    logger.debug(f"Integrated {n} flow lines: {steps.max(initial=0)} steps, {restarts} solver starts")
    return [Trajectory(tuple(start[i]), np.array(paths[i]), status[i], int(steps[i])) for i in range(n)]


def integrate_trajectory(launch, setup: FlowSetup) -> Trajectory:
    """
    Integrate a single flow line.

    Raises:
        StagnationError: the line entered a near-zero density region
        IntegrationError: the step budget ran out before the screen
    """
    (trajectory,) = integrate_bundle([launch], setup)
    if trajectory.terminated is TerminationStatus.STAGNATION:
        raise StagnationError(trajectory=trajectory)
    if trajectory.terminated is TerminationStatus.MAX_STEPS:
        raise IntegrationError(
            f"flow line from {launch} exceeded {setup.controls.max_steps} steps", trajectory=trajectory
        )
    return trajectory


def run_trajectories(
    launches,
    setup: FlowSetup,
    workers: int | None = None,
    chunk_size: int = TRAJECTORY_CHUNK,
    progress: bool = True,
) -> list[Trajectory]:
    """
    Integrate a large bundle on a thread pool.

    Launches are cut into fixed chunks of ``chunk_size``, so the result does
    not depend on ``workers`` or on completion order.
    """
    launches = np.array(launches, dtype=float).reshape(-1, 3)
    chunks = [launches[i : i + chunk_size] for i in range(0, len(launches), chunk_size)]
    results: list[list[Trajectory]] = [[] for _ in chunks]
    logger.info(f"Integrating {len(launches)} flow lines in {len(chunks)} chunks")

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(integrate_bundle, chunk, setup): i for i, chunk in enumerate(chunks)}
        for future in tqdm(
            concurrent.futures.as_completed(futures),
            total=len(futures),
            desc="Integrating flow lines",
            disable=not progress,
        ):
            results[futures[future]] = future.result()

    trajectories = [t for chunk in results for t in chunk]
    failed = sum(not t.reached_screen for t in trajectories)
    if failed:
        logger.warning(f"{failed} of {len(trajectories)} flow lines did not reach the screen")
    return trajectories


def _launch_density(i, g, wp, pol, pcfg, profile, y0):
    """Energy flux S_y across slit ``i`` at the launch height and its running integral."""
    a, b = g.interval(i)
    grid = np.linspace(a, b, LAUNCH_DENSITY_NODES)
    f = assemble_fields(grid, np.full_like(grid, y0), wp, g, pol, pcfg, profile)
    flux = np.maximum(poynting(f)[1], 0.0)
    return grid, cumulative_trapezoid(flux, grid, initial=0.0)


def launch_points(
    plan: LaunchPlan,
    g: GratingGeometry,
    wp: WaveParameters,
    pol: PolarizationState | None = None,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
    seed: int = 0,
) -> np.ndarray:
    """
    Launch points (x0, y0, 0) inside the open slits, shape (n, 3), sorted by x.

    uniform: centres of ``count_per_slit`` equal sub-intervals of every open slit.
    density_weighted: ``count_per_slit`` times the number of open slits points
    drawn by jittered stratified inverse-CDF sampling of the energy flux that
    crosses the launch height inside the slits, so that each line carries an
    equal share of the transmitted energy.
    """
    y0 = plan.launch_height(wp)
    if plan.distribution is LaunchDistribution.UNIFORM:
        xs = []
        for i in g.open_slits:
            a, _ = g.interval(i)
            offsets = (np.arange(plan.count_per_slit) + 0.5) / plan.count_per_slit
            xs.append(a + g.slit_width * offsets)
        x0 = np.concatenate(xs)
    else:
        if pol is None:
            pol = PolarizationState.linear(0.0)
        slits = [(i, *_launch_density(i, g, wp, pol, pcfg, profile, y0)) for i in g.open_slits]
        masses = np.array([cdf[-1] for _, _, cdf in slits])
        if not masses.sum() > 0:
            raise ProfileError("no energy crosses the launch height inside the open slits")
        total = plan.count_per_slit * len(slits)
        rng = np.random.default_rng(seed)
        u = (np.arange(total) + rng.random(total)) / total * masses.sum()
        before = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
        which = np.clip(np.searchsorted(np.cumsum(masses), u, side="right"), 0, len(slits) - 1)
        x0 = np.empty(total)
        for k, (i, grid, cdf) in enumerate(slits):
            sel = which == k
            a, b = g.interval(i)
            picked = np.interp(u[sel] - before[k], cdf, grid)
            x0[sel] = np.clip(picked, np.nextafter(a, b), np.nextafter(b, a))
    x0 = np.sort(x0)
    return np.column_stack([x0, np.full_like(x0, y0), np.zeros_like(x0)])


@dataclass(frozen=True, eq=False)
class EndpointHistogram:
    """Counts of flow-line endpoints per x bin."""

    edges: np.ndarray
    counts: np.ndarray
    out_of_range: int = 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def probabilities(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            raise ProfileError("no endpoints fall inside the histogram bins")
        return self.counts / total

    def density(self) -> np.ndarray:
        """Counts normalised to unit integral over the binned window."""
        return self.probabilities() / self.widths


def endpoint_histogram(trajectories: list[Trajectory], bins) -> EndpointHistogram:
    """
    Histogram of screen endpoints over the bin edges ``bins``.

    Raises:
        ProfileError: empty input, or lines that did not reach the screen
    """
    if not trajectories:
        raise ProfileError("no trajectories to histogram")
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bins must be at least two strictly increasing edges")
    unfinished = sum(not t.reached_screen for t in trajectories)
    if unfinished:
        raise ProfileError(f"{unfinished} trajectories did not reach the screen")

    x_end = np.array([t.endpoint[0] for t in trajectories])
    counts, _ = np.histogram(x_end, bins=edges)
    out_of_range = int(len(x_end) - counts.sum())
    if out_of_range:
        logger.debug(f"{out_of_range} endpoints fall outside [{edges[0]:g}, {edges[-1]:g}]")
    return EndpointHistogram(edges=edges, counts=counts, out_of_range=out_of_range)


def profile_bin_masses(edges, x, u) -> np.ndarray:
    """
    Share of a sampled profile falling in each bin, normalised over the binned window.

    Bins are integrated trapezoidally on the profile's own grid.
    """
    x = np.asarray(x, dtype=float)
    running = cumulative_trapezoid(np.asarray(u, dtype=float), x, initial=0.0)
    mass = np.diff(np.interp(np.asarray(edges, dtype=float), x, running))
    if not mass.sum() > 0:
        raise ProfileError("degenerate profile")
    return mass / mass.sum()


def histogram_l1_distance(hist: EndpointHistogram, x, u) -> float:
    """L1 distance between the endpoint histogram and a profile, both as probabilities per bin."""
    return float(np.abs(hist.probabilities() - profile_bin_masses(hist.edges, x, u)).sum())
