"""
Scenario runs: profiles, flow lines and detection events written as
CSV/JSON into one directory per scenario, with a manifest of digests.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image
from scipy.integrate import cumulative_trapezoid

from . import __version__
from .constants import DEFAULT_BEAM_WAIST
from .em_assembly import PolarizerConfig, natural_light_profile, screen_profile
from .errors import ProfileError
from .flow_integrator import (
    FlowSetup,
    Trajectory,
    TrajectoryControls,
    endpoint_histogram,
    histogram_l1_distance,
    launch_points,
    profile_bin_masses,
    run_trajectories,
)
from .fringe_analysis import (
    analyze_profile,
    fringe_centers,
    fringe_spacing,
    fringe_visibility,
    spectral_component,
)
from .scenario import Scenario
from .utils import (
    OutputFile,
    RunManifestDict,
    describe_output,
    file_sha256,
    load_json,
    read_csv,
    save_json,
    write_csv,
)

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"
PROFILE_HEADER = ("x_mm", "U_norm")


@dataclass
class RunManifest:
    scenario: dict
    version: str
    outputs: list[OutputFile]
    duration_seconds: float
    run_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> RunManifestDict:
        return RunManifestDict(
            scenario=self.scenario,
            version=self.version,
            outputs=list(self.outputs),
            duration_seconds=self.duration_seconds,
        )

    def output_path(self, name: str) -> Path:
        return self.run_dir / name

    def has_output(self, name: str) -> bool:
        return any(entry["path"] == name for entry in self.outputs)

    def verify(self) -> list[str]:
        """Paths whose current digest no longer matches the manifest."""
        return [
            entry["path"]
            for entry in self.outputs
            if not self.output_path(entry["path"]).exists()
            or file_sha256(self.output_path(entry["path"])) != entry["sha256"]
        ]


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILENAME
    data = load_json(path)
    return RunManifest(
        scenario=data["scenario"],
        version=data["version"],
        outputs=data["outputs"],
        duration_seconds=data["duration_seconds"],
        run_dir=path.parent,
    )


def write_profile(path: Path, x, u) -> Path:
    frame = pd.DataFrame({"x_mm": np.asarray(x, dtype=float) * 1e3, "U_norm": np.asarray(u, dtype=float)})
    return write_csv(frame, path)


def read_profile(path: str | Path):
    """Profile CSV back as (x in m, U/U_0)."""
    frame = read_csv(path)
    missing = [name for name in PROFILE_HEADER if name not in frame.columns]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    return frame["x_mm"].to_numpy(dtype=float) * 1e-3, frame["U_norm"].to_numpy(dtype=float)


def sample_detections(x, u, n: int, seed: int = 0) -> np.ndarray:
    """
    Draw ``n`` detection positions from a profile by inverse-CDF sampling.

    The profile is read as a piecewise-linear density; positions come from a
    seeded numpy Generator, so equal inputs give equal draws.

    Raises:
        ProfileError: negative, non-finite or all-zero profile
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim != 1 or x.shape != u.shape or x.size < 2 or not np.all(np.diff(x) > 0):
        raise ValueError("profile needs at least two strictly increasing x samples")
    if not np.all(np.isfinite(u)) or (u < 0).any():
        raise ProfileError("degenerate profile: values must be finite and non-negative")
    cdf = cumulative_trapezoid(u, x, initial=0.0)
    if not cdf[-1] > 0:
        raise ProfileError("degenerate profile")
    rng = np.random.default_rng(seed)
    return np.interp(rng.random(n) * cdf[-1], cdf, x)


def _analyze(x, u, spacing) -> dict:
    try:
        return analyze_profile(x, u, expected_spacing=spacing).to_dict()
    except ProfileError as e:
        logger.warning(f"Fringe analysis skipped: {e}")
        return {"error": str(e)}


def _profile_for(state, pcfg, x, wp, g, profile):
    if state is None:
        return natural_light_profile(wp.screen_distance, x, wp, g, pcfg, profile)[1]
    return screen_profile(wp.screen_distance, x, wp, g, state, pcfg, profile)[1]


def scenario_profile(scenario: Scenario):
    """Primary screen profile (x, U/U_0) of a scenario without running the rest of it."""
    _, state = scenario.polarization_states()[0]
    wp = scenario.wave_parameters()
    x = scenario.x_grid()
    u = _profile_for(state, scenario.polarizer_config(), x, wp, scenario.grating(), scenario.incident_profile())
    return x, u


def run_scenario(
    scenario: Scenario,
    output_dir: str | Path,
    workers: int | None = None,
    progress: bool = True,
) -> RunManifest:
    """
    Run one scenario and write its data files into ``output_dir / scenario.name``.

    Files: profile.csv (or profile_NN.csv per sweep state), profile_orthogonal.csv
    for polarizer comparisons, trajectories.csv/endpoints.csv for flow lines,
    histogram.csv, detections.csv, fringe_report.json and manifest.json.

    Returns:
        the manifest, also saved as manifest.json

    Raises:
        OSError: the output directory cannot be written
    """
    started = time.perf_counter()
    run_dir = Path(output_dir) / scenario.name
    run_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running scenario {scenario.name!r} into {run_dir}")

    wp = scenario.wave_parameters()
    g = scenario.grating()
    profile = scenario.incident_profile()
    pcfg = scenario.polarizer_config()
    x = scenario.x_grid()
    spacing = fringe_spacing(g, wp)
    written: list[Path] = []

    states = scenario.polarization_states()
    profiles = []
    for index, (token, state) in enumerate(states, start=1):
        u = _profile_for(state, pcfg, x, wp, g, profile)
        name = "profile.csv" if len(states) == 1 else f"profile_{index:02d}.csv"
        written.append(write_profile(run_dir / name, x, u))
        profiles.append((token, name, u))
    primary = profiles[0][2]
    analytic = fringe_centers(g, wp, n_max=2)
    report = _analyze(x, primary, spacing)
    if "error" not in report:
        report["coincidence_order"] = analytic.coincidence_order
    report["analytic"] = analytic.to_dict()
    report["polarizers"] = pcfg.value
    report["profiles"] = [{"polarization": token, "file": name} for token, name, _ in profiles]
    if len(profiles) > 1:
        report["sweep_max_difference"] = max(
            float(np.max(np.abs(u - primary))) for _, _, u in profiles[1:]
        )

    if scenario.polarizer_comparison:
        token, state = states[0]
        other = PolarizerConfig.ORTHOGONAL if pcfg is PolarizerConfig.NONE else PolarizerConfig.NONE
        u_other = _profile_for(state, other, x, wp, g, profile)
        written.append(write_profile(run_dir / f"profile_{other.value}.csv", x, u_other))
        none_profile, orth_profile = (primary, u_other) if other is PolarizerConfig.ORTHOGONAL else (u_other, primary)
        report["peak_ratio"] = float(np.interp(0.0, x, none_profile) / np.interp(0.0, x, orth_profile))
        report[f"fringes_{other.value}"] = _analyze(x, u_other, spacing)
        logger.info(f"Central peak ratio none/orthogonal: {report['peak_ratio']:.4f}")

    plan = scenario.launch_plan()
    if plan is not None:
        token, state = states[0]
        launches = launch_points(plan, g, wp, state, pcfg, profile, seed=scenario.seed)
        setup = FlowSetup(
            wp=wp,
            g=g,
            pol=state,
            pcfg=pcfg,
            profile=profile,
            controls=TrajectoryControls(record_path=scenario.record_paths),
        )
        trajectories = run_trajectories(launches, setup, workers=workers, progress=progress)
        if scenario.record_paths:
            written.append(write_csv(trajectory_table(trajectories), run_dir / "trajectories.csv"))
        written.append(write_csv(endpoint_table(trajectories), run_dir / "endpoints.csv"))
        reached = [t for t in trajectories if t.reached_screen]
        report["trajectories"] = {
            "launched": len(trajectories),
            "reached_screen": len(reached),
            "launch": plan.distribution.value,
        }

        if scenario.histogram_bins and reached:
            hist = endpoint_histogram(reached, scenario.histogram_edges())
            table = pd.DataFrame(
                {
                    "x_left_mm": hist.edges[:-1] * 1e3,
                    "x_right_mm": hist.edges[1:] * 1e3,
                    "count": hist.counts,
                    "probability": hist.probabilities(),
                    "profile_probability": profile_bin_masses(hist.edges, x, primary),
                }
            )
            written.append(write_csv(table, run_dir / "histogram.csv"))
            density = hist.density()
            report["histogram"] = {
                "bins": int(hist.counts.size),
                "out_of_range": hist.out_of_range,
                "l1_distance": histogram_l1_distance(hist, x, primary),
                "visibility": fringe_visibility(hist.centers, density, spacing),
                "spectral_component": spectral_component(hist.centers, density, 1.0 / spacing),
            }

    if scenario.samples:
        events = sample_detections(x, primary, scenario.samples, seed=scenario.seed)
        written.append(write_detections(run_dir / "detections.csv", events))

    written.append(save_json(report, run_dir / "fringe_report.json"))

    manifest = RunManifest(
        scenario=scenario.to_dict(),
        version=__version__,
        outputs=[describe_output(path, run_dir) for path in written],
        duration_seconds=round(time.perf_counter() - started, 3),
        run_dir=run_dir,
    )
    save_json(manifest.to_dict(), run_dir / MANIFEST_FILENAME)
    logger.info(f"Scenario {scenario.name!r} finished in {manifest.duration_seconds:.1f} s")
    return manifest


def write_detections(path: Path, events) -> Path:
    events = np.asarray(events, dtype=float)
    return write_csv(pd.DataFrame({"event": np.arange(events.size), "x_mm": events * 1e3}), path)


def trajectory_table(trajectories: list[Trajectory]) -> pd.DataFrame:
    """One row per recorded sample, lengths in mm."""
    ids = np.concatenate([np.full(len(t.samples), tid) for tid, t in enumerate(trajectories)])
    samples = np.concatenate([t.samples for t in trajectories]) * 1e3
    frame = pd.DataFrame(samples, columns=["s_mm", "x_mm", "y_mm", "z_mm"])
    frame.insert(0, "traj_id", ids)
    return frame


def endpoint_table(trajectories: list[Trajectory]) -> pd.DataFrame:
    ends = np.array([t.endpoint for t in trajectories]) * 1e3
    return pd.DataFrame(
        {
            "traj_id": np.arange(len(trajectories)),
            "x0_mm": [t.launch[0] * 1e3 for t in trajectories],
            "x_mm": ends[:, 0],
            "y_mm": ends[:, 1],
            "z_mm": ends[:, 2],
            "status": [t.terminated.value for t in trajectories],
        }
    )


def render_screen_image(x, u, path: str | Path, height_px: int = 240, waist: float = DEFAULT_BEAM_WAIST) -> Path:
    """
    8-bit grayscale picture of the screen.

    Columns follow U(x); rows are weighted by the beam envelope e^{-2z^2/w^2}
    over |z| <= 1.5 w.
    """
    u = np.asarray(u, dtype=float)
    if not u.max() > 0:
        raise ProfileError("degenerate profile")
    z = np.linspace(-1.5 * waist, 1.5 * waist, height_px)
    image = np.exp(-2.0 * (z / waist) ** 2)[:, None] * (u / u.max())[None, :]
    pixels = np.round(255.0 * image).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PNG")
    return Path(path)


_PROFILE_SCRIPT = """set datafile separator ","
set key autotitle columnhead
set xlabel "x (mm)"
set ylabel "U / U0"
set terminal pngcairo size 1200,600
set output "{stem}.png"
plot {plots}
"""

_TRAJECTORY_SCRIPT = """set datafile separator ","
set xlabel "y (mm)"
set ylabel "x (mm)"
set key off
{extra}set terminal pngcairo size 1200,800
set output "{stem}.png"
plot for [i=0:{last}] "trajectories.csv" using 4:($1 == i ? $3 : 1/0) every ::1 with lines lc rgb "#1f4e9e"
"""


def emit_plot_data(manifest: RunManifest) -> list[Path]:
    """
    Write gnuplot scripts for the profiles and flow lines of a finished run,
    and a screen picture of the primary profile.

    Raises:
        FileNotFoundError: a data file named in the manifest is missing
    """
    run_dir = manifest.run_dir
    for entry in manifest.outputs:
        if not manifest.output_path(entry["path"]).exists():
            raise FileNotFoundError(f"missing run output {entry['path']}")

    profile_files = sorted(
        entry["path"] for entry in manifest.outputs if entry["path"].startswith("profile")
    )
    if not profile_files:
        raise FileNotFoundError(f"no profile CSV in {run_dir}")
    written = []

    plots = ", ".join(f'"{name}" using 1:2 with lines title "{Path(name).stem}"' for name in profile_files)
    script = run_dir / "profile.gp"
    script.write_text(_PROFILE_SCRIPT.format(stem="profile", plots=plots))
    written.append(script)

    if manifest.has_output("trajectories.csv"):
        ids = read_csv(manifest.output_path("trajectories.csv"))["traj_id"]
        last = int(ids.iloc[-1]) if len(ids) else 0
        for stem, extra in (("trajectories", ""), ("nearfield", "set xrange [0:5]\n")):
            script = run_dir / f"{stem}.gp"
            script.write_text(_TRAJECTORY_SCRIPT.format(stem=stem, extra=extra, last=last))
            written.append(script)

    x, u = read_profile(manifest.output_path(profile_files[0]))
    written.append(render_screen_image(x, u, run_dir / "screen.png"))
    logger.info(f"Wrote {len(written)} plot files into {run_dir}")
    return written
