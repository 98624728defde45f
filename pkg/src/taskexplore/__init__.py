"""Task-driven multi-robot exploration with compressed map sharing."""

from taskexplore.grid import CellIndex, Footprint, GridMap, footprint, load_map, save_map
from taskexplore.codec import (
    AbstractionMessage,
    CommModel,
    InstantiatedAbstraction,
    Template,
    bit_cost,
    compress,
    default_codebook,
    instantiate,
    load_codebook,
)
from taskexplore.estimation import ConstraintStore, Estimate, decode, uncertainty
from taskexplore.planner import Path, PlannerParams, cell_cost, path_weights, shortest_path
from taskexplore.selector import SelectorParams, greedy_select, select_actions, value_iteration
from taskexplore.encoder import EncoderParams, SensorBelief, select_abstraction

__version__ = "0.1.0"
