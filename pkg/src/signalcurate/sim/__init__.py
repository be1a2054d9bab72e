from .config import DemandProfile, Flow, SimConfig, VehicleRecord
from .engine import ArrivalStreams, SimState, Simulator
from .metrics import CSV_FIELDS, MetricsReport, compute_metrics, write_csv, write_json
from .runner import ConservationError, RunResult, run_episode
