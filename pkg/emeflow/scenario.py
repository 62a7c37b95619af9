"""
Scenario configuration: flat ``key = value`` files validated by pydantic,
plus the built-in scenarios reproducing the reference measurements.
"""

import logging
import math
import re
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .constants import (
    DEFAULT_BEAM_WAIST,
    DEFAULT_HISTOGRAM_TRAJECTORIES,
    DEFAULT_N_POINTS,
    DEFAULT_SCREEN_DISTANCE,
    DEFAULT_SLIT_SEPARATION,
    DEFAULT_SLIT_WIDTH,
    DEFAULT_TRAJECTORIES_PER_SLIT,
    DEFAULT_WAVELENGTH,
    DEFAULT_X_MAX,
    DEFAULT_X_MIN,
    MAX_ABS_X,
    MAX_SCREEN_DISTANCE,
)
from .em_assembly import PolarizationState, PolarizerConfig
from .errors import ScenarioValidationError
from .flow_integrator import LaunchDistribution, LaunchPlan
from .scalar_propagation import GratingGeometry, IncidentProfile, WaveParameters

logger = logging.getLogger(__name__)

NATURAL = "natural"
_NAME_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def parse_polarization(token: str) -> PolarizationState | None:
    """
    Parse a polarization token; ``natural`` gives None.

    linear:<deg> | circular:<r|l> | elliptic:<alpha>,<beta>,<phi_rad> | natural
    """
    token = token.strip().lower()
    if token == NATURAL:
        return None
    kind, _, arg = token.partition(":")
    if kind == "linear":
        angle = float(arg)
        state = PolarizationState.linear(math.radians(angle))
        return PolarizationState(state.alpha, state.beta, state.phi, f"linear {angle:g} deg")
    if kind == "circular":
        hand = {"r": "right", "right": "right", "l": "left", "left": "left"}.get(arg)
        if hand is None:
            raise ValueError(f"circular handedness must be r or l, got {arg!r}")
        return PolarizationState.circular(hand)
    if kind == "elliptic":
        parts = arg.split(",")
        if len(parts) != 3:
            raise ValueError(f"elliptic needs alpha,beta,phi, got {arg!r}")
        alpha, beta, phi = (float(p) for p in parts)
        return PolarizationState.elliptic(alpha, beta, phi)
    raise ValueError(f"unknown polarization {token!r}")


def parse_profile(token: str) -> IncidentProfile:
    """plane | gaussian[:<waist_mm>]"""
    token = token.strip().lower()
    if token == "plane":
        return IncidentProfile.plane()
    kind, _, arg = token.partition(":")
    if kind == "gaussian":
        return IncidentProfile.gaussian(float(arg) * 1e-3 if arg else DEFAULT_BEAM_WAIST)
    raise ValueError(f"unknown incident profile {token!r}")


class Scenario(BaseModel):
    """One simulation run. Lengths are given in mm and the wavelength in nm."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "custom"
    description: str = ""
    wavelength_nm: float = Field(DEFAULT_WAVELENGTH * 1e9, gt=0)
    slit_separation_mm: float = Field(DEFAULT_SLIT_SEPARATION * 1e3, gt=0)
    slit_width_mm: float = Field(DEFAULT_SLIT_WIDTH * 1e3, gt=0)
    screen_distance_mm: float = Field(DEFAULT_SCREEN_DISTANCE * 1e3, gt=0, le=MAX_SCREEN_DISTANCE * 1e3)
    open_slits: tuple[int, ...] = (1, 2)
    polarization: str = "circular:r"
    polarizers: Literal["none", "orthogonal"] = "none"
    polarizer_comparison: bool = False
    profile: str = "plane"
    x_min_mm: float = Field(DEFAULT_X_MIN * 1e3, ge=-MAX_ABS_X * 1e3)
    x_max_mm: float = Field(DEFAULT_X_MAX * 1e3, le=MAX_ABS_X * 1e3)
    n_points: int = Field(DEFAULT_N_POINTS, ge=2)
    trajectories: int = Field(0, ge=0)
    launch: Literal["uniform", "density_weighted"] = "uniform"
    record_paths: bool = True
    histogram_bins: int = Field(0, ge=0)
    samples: int = Field(0, ge=0)
    seed: int = Field(0, ge=0)
    sweep: tuple[str, ...] = ()

    @field_validator("name")
    @classmethod
    def _check_name(cls, value: str) -> str:
        if not _NAME_PATTERN.match(value):
            raise ValueError("name may only contain letters, digits, '.', '_' and '-'")
        return value

    @field_validator("polarization")
    @classmethod
    def _check_polarization(cls, value: str) -> str:
        parse_polarization(value)
        return value.strip().lower()

    @field_validator("profile")
    @classmethod
    def _check_profile(cls, value: str) -> str:
        parse_profile(value)
        return value.strip().lower()

    @field_validator("open_slits", mode="before")
    @classmethod
    def _split_slits(cls, value):
        if isinstance(value, str):
            return tuple(int(v) for v in value.split(",") if v.strip())
        return value

    @field_validator("sweep", mode="before")
    @classmethod
    def _split_sweep(cls, value):
        if isinstance(value, str):
            value = tuple(v.strip() for v in value.split(";") if v.strip())
        for token in value:
            parse_polarization(token)
        return tuple(token.strip().lower() for token in value)

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        if self.slit_width_mm >= self.slit_separation_mm:
            raise ValueError("slit_width_mm must be smaller than slit_separation_mm")
        if self.x_min_mm >= self.x_max_mm:
            raise ValueError("x_min_mm must be smaller than x_max_mm")
        GratingGeometry(self.slit_separation_mm * 1e-3, self.slit_width_mm * 1e-3, self.open_slits)
        primary = self.sweep[0] if self.sweep else self.polarization
        if self.trajectories and primary == NATURAL:
            raise ValueError("flow lines need a polarized state, not natural light")
        if self.histogram_bins and not self.trajectories:
            raise ValueError("histogram_bins needs trajectories > 0")
        return self

    def wave_parameters(self) -> WaveParameters:
        return WaveParameters(self.wavelength_nm * 1e-9, self.screen_distance_mm * 1e-3)

    def grating(self) -> GratingGeometry:
        return GratingGeometry(self.slit_separation_mm * 1e-3, self.slit_width_mm * 1e-3, self.open_slits)

    def incident_profile(self) -> IncidentProfile:
        return parse_profile(self.profile)

    def polarizer_config(self) -> PolarizerConfig:
        return PolarizerConfig(self.polarizers)

    def polarization_states(self) -> list[tuple[str, PolarizationState | None]]:
        """(token, state) for every profile the scenario produces; the first is primary."""
        tokens = self.sweep or (self.polarization,)
        return [(token, parse_polarization(token)) for token in tokens]

    def x_grid(self) -> np.ndarray:
        return np.linspace(self.x_min_mm * 1e-3, self.x_max_mm * 1e-3, self.n_points)

    def histogram_edges(self) -> np.ndarray:
        return np.linspace(self.x_min_mm * 1e-3, self.x_max_mm * 1e-3, self.histogram_bins + 1)

    def launch_plan(self) -> LaunchPlan | None:
        if not self.trajectories:
            return None
        return LaunchPlan(self.trajectories, distribution=LaunchDistribution.from_str(self.launch))

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


def _field_name(loc) -> str:
    return ".".join(str(part) for part in loc) or "scenario"


def build_scenario(values: dict) -> Scenario:
    """
    Validate raw values into a Scenario.

    Raises:
        ScenarioValidationError: with one (field, message) pair per problem
    """
    try:
        return Scenario.model_validate(values)
    except ValidationError as e:
        raise ScenarioValidationError(
            [(_field_name(err["loc"]), err["msg"]) for err in e.errors()]
        ) from e


def parse_scenario_text(text: str) -> dict[str, str]:
    """Split ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    problems = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            problems.append((f"line {number}", "expected 'key = value'"))
            continue
        if key in values:
            problems.append((key, f"duplicate key on line {number}"))
            continue
        values[key] = value.strip()
    if problems:
        raise ScenarioValidationError(problems)
    return values


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file; the name defaults to the file stem."""
    path = Path(path)
    with open(path, "r") as file:
        values = parse_scenario_text(file.read())
    values.setdefault("name", path.stem)
    scenario = build_scenario(values)
    logger.info(f"Loaded scenario {scenario.name!r} from {path}")
    return scenario


_ELLIPTIC_RIGHT = f"elliptic:0.8,0.6,{math.pi / 2!r}"
_ELLIPTIC_LEFT = f"elliptic:0.8,0.6,{-math.pi / 2!r}"

BUILTIN_SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario(
            name="polarization-sweep",
            description="screen profiles for eight polarization states, no polarizers",
            sweep=(
                "linear:0",
                "linear:45",
                "linear:90",
                "linear:135",
                "circular:r",
                "circular:l",
                _ELLIPTIC_RIGHT,
                _ELLIPTIC_LEFT,
            ),
        ),
        Scenario(
            name="polarizer-comparison",
            description="circular light with and without orthogonal polarizers, central peak ratio",
            polarization="circular:r",
            polarizer_comparison=True,
        ),
        Scenario(
            name="flow-lines",
            description="circular light, no polarizers, 30 flow lines",
            polarization="circular:r",
            trajectories=DEFAULT_TRAJECTORIES_PER_SLIT,
        ),
        Scenario(
            name="flow-lines-orthogonal",
            description="circular light, orthogonal polarizers, 30 flow lines",
            polarization="circular:r",
            polarizers="orthogonal",
            trajectories=DEFAULT_TRAJECTORIES_PER_SLIT,
        ),
        Scenario(
            name="histogram",
            description="endpoint histogram of 10^4 flux-weighted flow lines, no polarizers",
            polarization="circular:r",
            trajectories=DEFAULT_HISTOGRAM_TRAJECTORIES // 2,
            launch="density_weighted",
            record_paths=False,
            histogram_bins=80,
        ),
        Scenario(
            name="histogram-orthogonal",
            description="endpoint histogram of 10^4 flux-weighted flow lines, orthogonal polarizers",
            polarization="circular:r",
            polarizers="orthogonal",
            trajectories=DEFAULT_HISTOGRAM_TRAJECTORIES // 2,
            launch="density_weighted",
            record_paths=False,
            histogram_bins=80,
        ),
    ]
}


# Short names used by the command-line reference runs
BUILTIN_ALIASES = {
    "fig3-sweep": "polarization-sweep",
    "fig4": "polarizer-comparison",
    "fig5": "flow-lines",
    "fig6": "flow-lines-orthogonal",
}


def get_builtin(name: str) -> Scenario:
    """Built-in scenario by name or alias."""
    try:
        return BUILTIN_SCENARIOS[BUILTIN_ALIASES.get(name, name)]
    except KeyError:
        raise ScenarioValidationError(
            [("scenario", f"unknown built-in {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}")]
        ) from None
