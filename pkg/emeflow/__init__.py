__version__ = "0.1.0"

from .em_assembly import (
    PolarizationState,
    PolarizerConfig,
    assemble_fields,
    eme_density,
    natural_light_profile,
    poynting,
    screen_profile,
)
from .errors import (
    DomainError,
    IntegrationError,
    ProfileError,
    ScenarioValidationError,
    SimulationError,
    StagnationError,
)
from .scalar_propagation import (
    GratingGeometry,
    IncidentProfile,
    WaveParameters,
    slit_wave,
    total_wave,
)
