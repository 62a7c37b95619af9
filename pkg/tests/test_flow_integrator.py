import math
from dataclasses import replace

import numpy as np
import pytest

from emeflow.em_assembly import (
    PolarizationState,
    PolarizerConfig,
    assemble_fields,
    eme_density,
    poynting,
    screen_profile,
)
from emeflow.errors import IntegrationError, ProfileError, StagnationError
from emeflow.experiment import sample_detections
from emeflow.flow_integrator import (
    FlowSetup,
    LaunchDistribution,
    LaunchPlan,
    TerminationStatus,
    Trajectory,
    TrajectoryControls,
    endpoint_histogram,
    flow_velocity,
    histogram_l1_distance,
    integrate_bundle,
    integrate_trajectory,
    launch_points,
    profile_bin_masses,
    run_trajectories,
)
from emeflow.fringe_analysis import fringe_spacing, fringe_visibility, spectral_component
from emeflow.scalar_propagation import IncidentProfile

from .conftest import SCREEN, WAVELENGTH


@pytest.fixture(scope="module")
def trajectories(standard_launches, standard_setup):
    return integrate_bundle(standard_launches, standard_setup)


@pytest.fixture(scope="module")
def subset(standard_launches):
    return standard_launches[::5]


def _xy(bundle):
    return [t.samples[:, 1:3] for t in bundle]


def test_all_lines_reach_screen(trajectories):
    assert len(trajectories) == 30
    for t in trajectories:
        assert t.terminated is TerminationStatus.REACHED_SCREEN
        assert t.reached_screen
        assert t.steps == len(t.samples) - 1
        assert t.y[-1] == SCREEN


def test_lines_never_cross_the_axis(trajectories):
    for t in trajectories:
        assert np.all(np.sign(t.x) == np.sign(t.launch[0]))


def test_lines_stay_on_their_side(trajectories):
    left = [t.endpoint[0] for t in trajectories if t.launch[0] < 0]
    right = [t.endpoint[0] for t in trajectories if t.launch[0] > 0]
    assert len(left) == len(right) == 15
    assert max(left) < 0 < min(right)


def test_paths_are_monotone(trajectories):
    for t in trajectories:
        assert np.all(np.diff(t.s) > 0)
        assert np.all(np.diff(t.y) >= 0)


def test_launch_row_is_first_sample(trajectories, standard_launches):
    for t, launch in zip(trajectories, standard_launches):
        np.testing.assert_array_equal(t.samples[0, 1:], launch)
        assert t.s[0] == 0


def test_speed_never_exceeds_light(trajectories, wp, grating, circular):
    for t in trajectories[::3]:
        v = flow_velocity(t.x, t.y, t.z, wp, grating, circular)
        assert np.all(np.linalg.norm(v, axis=0) <= 1 + 1e-9)


def test_velocity_inside_slit_points_forward(wp, grating, circular):
    v = flow_velocity(grating.center(1), 1e-3, 0.0, wp, grating, circular)
    assert v.shape == (3,)
    np.testing.assert_allclose(v, [0.0, 1.0, 0.0], atol=1e-2)


def test_axis_velocity_is_longitudinal(wp, grating, circular):
    y = np.linspace(1e-3, 1.0, 10)
    v = flow_velocity(0.0, y, 0.0, wp, grating, circular)
    assert np.all(np.abs(v[0]) <= 1e-15)


def test_horizontal_state_keeps_lines_in_plane(subset, wp, grating):
    setup = FlowSetup(wp=wp, g=grating, pol=PolarizationState.linear(0.0))
    for t in integrate_bundle(subset, setup):
        assert not t.z.any()


def test_diagonal_state_keeps_lines_in_plane(subset, wp, grating):
    setup = FlowSetup(wp=wp, g=grating, pol=PolarizationState.linear(math.radians(45)))
    for t in integrate_bundle(subset, setup):
        assert np.all(np.abs(t.z) < 1e-12)


@pytest.mark.parametrize(
    "state",
    [
        PolarizationState.circular("left"),
        PolarizationState.linear(0.0),
        PolarizationState.elliptic(0.8, 0.6, -0.5 * math.pi),
    ],
    ids=lambda s: s.label,
)
def test_transverse_paths_do_not_depend_on_polarization(subset, standard_setup, state):
    reference = integrate_bundle(subset, standard_setup)
    other = integrate_bundle(subset, replace(standard_setup, pol=state))
    for a, b in zip(_xy(reference), _xy(other)):
        np.testing.assert_array_equal(a, b)


def test_halving_the_step_does_not_move_endpoints(trajectories, standard_launches, standard_setup, wp):
    coarse = trajectories
    fine = integrate_bundle(standard_launches, replace(standard_setup, controls=standard_setup.controls.refined(wp)))
    for a, b in zip(coarse, fine):
        assert abs(a.endpoint[0] - b.endpoint[0]) < 1e-8


def test_tight_turn_limit_does_not_move_endpoints(subset, standard_setup):
    coarse = integrate_bundle(subset, standard_setup)
    controls = TrajectoryControls(max_turn_angle=math.radians(0.5))
    fine = integrate_bundle(subset, replace(standard_setup, controls=controls))
    for a, b in zip(coarse, fine):
        assert b.reached_screen
        assert abs(a.endpoint[0] - b.endpoint[0]) < 1e-8


def test_mirrored_launches_give_mirrored_endpoints(subset, standard_setup):
    mirrored = subset * np.array([-1.0, 1.0, 1.0])
    bundle = integrate_bundle(np.concatenate([subset, mirrored]), standard_setup)
    n = len(subset)
    for a, b in zip(bundle[:n], bundle[n:]):
        assert abs(a.endpoint[0] + b.endpoint[0]) < 1e-10
        assert a.endpoint[1] == b.endpoint[1] == SCREEN


@pytest.mark.parametrize(
    "state",
    [PolarizationState.circular("right"), PolarizationState.elliptic(0.8, 0.6, 1.0), PolarizationState.linear(0.3)],
    ids=lambda s: s.label,
)
def test_velocity_matches_assembled_flux(wp, grating, state):
    x = np.linspace(-0.3e-3, 0.3e-3, 13)
    y = np.full_like(x, 2e-3)
    f = assemble_fields(x, y, wp, grating, state)
    expected = poynting(f) / eme_density(f)
    np.testing.assert_allclose(flow_velocity(x, y, 0.0, wp, grating, state), expected, rtol=1e-10, atol=1e-12)


def test_gaussian_beam_lines_reach_screen(subset, standard_setup):
    setup = replace(standard_setup, profile=IncidentProfile.gaussian(), screen=0.05)
    for t in integrate_bundle(subset[:2], setup):
        assert t.reached_screen
        assert t.y[-1] == 0.05


def test_refined_controls_halve_bounds_and_tighten_tolerances(wp):
    controls = TrajectoryControls()
    refined = controls.refined(wp)
    assert refined.step_fraction == 0.5 * controls.step_fraction
    assert refined.max_step == 0.5 * controls.max_step
    assert refined.min_step == pytest.approx(0.05 * WAVELENGTH)
    assert refined.rtol == controls.rtol / 16
    assert refined.atol == controls.atol / 16


def test_step_budget_raises(standard_setup, standard_launches):
    setup = replace(standard_setup, controls=TrajectoryControls(max_steps=5))
    with pytest.raises(IntegrationError) as excinfo:
        integrate_trajectory(standard_launches[0], setup)
    trajectory = excinfo.value.trajectory
    assert trajectory.terminated is TerminationStatus.MAX_STEPS
    assert trajectory.steps == 5


def _dark_setup(wp, grating):
    # horizontal light only feeds slit 1 behind the polarizers, and slit 1 is blocked
    return FlowSetup(
        wp=wp,
        g=grating.with_open_slits(2),
        pol=PolarizationState.linear(0.0),
        pcfg=PolarizerConfig.ORTHOGONAL,
    )


def test_stagnation_raises(wp, grating):
    setup = _dark_setup(wp, grating)
    with pytest.raises(StagnationError) as excinfo:
        integrate_trajectory((grating.center(2), 10 * WAVELENGTH, 0.0), setup)
    assert excinfo.value.trajectory.terminated is TerminationStatus.STAGNATION
    with pytest.raises(StagnationError):
        flow_velocity(grating.center(2), 1e-3, 0.0, setup.wp, setup.g, setup.pol, setup.pcfg)


def test_bundle_records_stagnation(wp, grating):
    (t,) = integrate_bundle([(grating.center(2), 10 * WAVELENGTH, 0.0)], _dark_setup(wp, grating))
    assert t.terminated is TerminationStatus.STAGNATION
    assert not t.reached_screen
    assert t.steps == 0


@pytest.mark.parametrize("launch", [(0.0, 0.0, 0.0), (0.0, SCREEN, 0.0), (0.0, -1e-6, 0.0)])
def test_bundle_rejects_launch_heights(standard_setup, launch):
    with pytest.raises(ValueError):
        integrate_bundle([launch], standard_setup)


def test_unrecorded_paths_keep_launch_and_end(subset, standard_setup):
    setup = replace(standard_setup, controls=TrajectoryControls(record_path=False))
    short = integrate_bundle(subset, setup)
    for t, full in zip(short, integrate_bundle(subset, standard_setup)):
        assert t.samples.shape == (2, 4)
        np.testing.assert_array_equal(t.endpoint, full.endpoint)
        assert t.steps == full.steps


def test_results_do_not_depend_on_worker_count(standard_launches, standard_setup):
    setup = replace(standard_setup, screen=0.05)
    launches = standard_launches[::3]
    serial = run_trajectories(launches, setup, workers=1, chunk_size=3, progress=False)
    threaded = run_trajectories(launches, setup, workers=4, chunk_size=3, progress=False)
    assert len(serial) == len(threaded) == len(launches)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.endpoint[1] == 0.05


def test_uniform_launch_points(wp, grating):
    points = launch_points(LaunchPlan(15), grating, wp)
    assert points.shape == (30, 3)
    assert np.all(np.diff(points[:, 0]) > 0)
    assert np.all(grating.contains(points[:, 0]))
    np.testing.assert_allclose(points[:, 1], 10 * WAVELENGTH)
    assert not points[:, 2].any()
    a, _ = grating.interval(1)
    assert points[0, 0] == pytest.approx(a + grating.slit_width / 30)


def test_uniform_launch_points_single_slit(wp, grating):
    points = launch_points(LaunchPlan(4, y0=1e-4), grating.with_open_slits(2), wp)
    assert points.shape == (4, 3)
    assert np.all(points[:, 0] > 0)
    assert np.all(points[:, 1] == 1e-4)


def test_density_weighted_launch_points(wp, grating, circular):
    plan = LaunchPlan(100, distribution=LaunchDistribution.DENSITY_WEIGHTED)
    points = launch_points(plan, grating, wp, circular, seed=3)
    assert points.shape == (200, 3)
    assert np.all(grating.contains(points[:, 0]))
    assert np.all(np.diff(points[:, 0]) >= 0)
    assert abs(np.count_nonzero(points[:, 0] < 0) - 100) <= 1
    np.testing.assert_array_equal(points, launch_points(plan, grating, wp, circular, seed=3))
    assert not np.array_equal(points, launch_points(plan, grating, wp, circular, seed=4))


def test_density_weighted_launch_needs_light(wp, grating):
    plan = LaunchPlan(5, distribution=LaunchDistribution.DENSITY_WEIGHTED)
    setup = _dark_setup(wp, grating)
    with pytest.raises(ProfileError):
        launch_points(plan, setup.g, wp, setup.pol, setup.pcfg)


def test_plan_and_controls_validate():
    with pytest.raises(ValueError):
        LaunchPlan(0)
    with pytest.raises(ValueError):
        LaunchPlan(5, y0=0.0)
    with pytest.raises(ValueError):
        TrajectoryControls(step_fraction=1.5)
    with pytest.raises(ValueError):
        TrajectoryControls(max_step=1e-6, min_step=1e-3)
    with pytest.raises(ValueError):
        TrajectoryControls(rtol=0.0)
    with pytest.raises(ValueError):
        TrajectoryControls(atol=-1e-12)
    with pytest.raises(ValueError):
        LaunchDistribution.from_str("random")
    assert LaunchDistribution.from_str("density_weighted") is LaunchDistribution.DENSITY_WEIGHTED


def test_endpoint_histogram(trajectories):
    edges = np.linspace(-4e-3, 4e-3, 81)
    hist = endpoint_histogram(trajectories, edges)
    assert hist.counts.sum() + hist.out_of_range == 30
    assert hist.probabilities().sum() == pytest.approx(1.0)
    assert np.sum(hist.density() * hist.widths) == pytest.approx(1.0)

    left = endpoint_histogram([t for t in trajectories if t.launch[0] < 0], edges)
    assert not left.counts[left.centers > 0].any()


def test_endpoint_histogram_rejects(trajectories, wp, grating):
    with pytest.raises(ProfileError, match="no trajectories"):
        endpoint_histogram([], np.linspace(-1e-3, 1e-3, 5))
    with pytest.raises(ValueError):
        endpoint_histogram(trajectories, [1e-3, 0.0])
    (stuck,) = integrate_bundle([(grating.center(2), 10 * WAVELENGTH, 0.0)], _dark_setup(wp, grating))
    with pytest.raises(ProfileError, match="did not reach the screen"):
        endpoint_histogram([stuck], np.linspace(-1e-3, 1e-3, 5))


def _fake_endpoints(xs):
    return [
        Trajectory(
            launch=(0.0, 1e-6, 0.0),
            samples=np.array([[0.0, 0.0, 1e-6, 0.0], [SCREEN, x, SCREEN, 0.0]]),
            terminated=TerminationStatus.REACHED_SCREEN,
            steps=1,
        )
        for x in xs
    ]


def test_histogram_l1_distance_of_sampled_endpoints(none_profile):
    x, u = none_profile
    endpoints = _fake_endpoints(sample_detections(x, u, 50_000, seed=1))
    hist = endpoint_histogram(endpoints, np.linspace(-4e-3, 4e-3, 41))
    assert profile_bin_masses(hist.edges, x, u).sum() == pytest.approx(1.0)
    assert histogram_l1_distance(hist, x, u) < 0.05


def _histogram_run(wp, grating, circular, pcfg):
    plan = LaunchPlan(5000, distribution=LaunchDistribution.DENSITY_WEIGHTED)
    launches = launch_points(plan, grating, wp, circular, pcfg)
    setup = FlowSetup(wp=wp, g=grating, pol=circular, pcfg=pcfg, controls=TrajectoryControls(record_path=False))
    bundle = run_trajectories(launches, setup, progress=False)
    return endpoint_histogram(bundle, np.linspace(-4e-3, 4e-3, 81))


@pytest.mark.slow
def test_endpoint_histogram_follows_density(wp, grating, circular, xgrid):
    hist = _histogram_run(wp, grating, circular, PolarizerConfig.NONE)
    _, u = screen_profile(SCREEN, xgrid, wp, grating, circular)
    assert histogram_l1_distance(hist, xgrid, u) < 0.05


@pytest.mark.slow
def test_orthogonal_histogram_has_no_fringes(wp, grating, circular):
    hist = _histogram_run(wp, grating, circular, PolarizerConfig.ORTHOGONAL)
    spacing = fringe_spacing(grating, wp)
    assert fringe_visibility(hist.centers, hist.density(), spacing) < 0.05
    assert spectral_component(hist.centers, hist.density(), 1.0 / spacing) < 0.01
