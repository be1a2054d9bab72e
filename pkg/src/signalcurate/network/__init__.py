from .conflicts import conflicts_from_geometry, default_conflicts
from .grid import GridBuilder, build_four_leg, grid_scenario
from .model import (
    ConflictRelation,
    Intersection,
    Lane,
    Movement,
    Phase,
    Road,
    RoadNetwork,
    TimingAction,
    Turn,
    ValidationError,
    validate_network,
)
from .phases import enumerate_phases
from .scenario import ScenarioParseError, load_scenario, parse_scenario, scenario_to_dict
