"""Sequential learning of principal curves from data streams.

A polygonal line with vertices on a lattice is fitted online: an exact
follow-the-perturbed-leader mode over enumerated curve classes (desk
scale, used as a test oracle) and a locally greedy sleeping-experts mode
that scales by only re-wiring the curve near each new observation.
"""

from .datagen import gen_cubic, gen_param6, read_points_csv
from .estimator import SequentialPrincipalCurve
from .geometry import (CellId, NeighborhoodInfo, PolygonalLine, chain_losses,
                       local_grid, loss, observation_neighborhood,
                       project_to_segment, projection_index, voronoi_assign)
from .greedy import (GreedyLearner, GreedyParams, RoundRecord,
                     build_neighborhood, init_first_pc, run_stream)
from .lattice import (GridSizeError, LatticeGrid, ModelConfig, constants,
                      enumerate_classes, enumerate_lines, penalty,
                      sleeping_bandit_params, unit_ball_volume)
from .metrics import (EvalReport, baseline_first_pc, best_in_hindsight,
                      cumulative_loss, ground_truth_loss, principal_segment,
                      r_squared)
from .perturbed import (ExactLearner, draw_perturbations, eta_schedule,
                        win_probabilities, win_probability)

__version__ = "0.1.0"

__all__ = [
    "CellId",
    "EvalReport",
    "ExactLearner",
    "GreedyLearner",
    "GreedyParams",
    "GridSizeError",
    "LatticeGrid",
    "ModelConfig",
    "NeighborhoodInfo",
    "PolygonalLine",
    "RoundRecord",
    "SequentialPrincipalCurve",
    "baseline_first_pc",
    "best_in_hindsight",
    "build_neighborhood",
    "chain_losses",
    "constants",
    "cumulative_loss",
    "draw_perturbations",
    "enumerate_classes",
    "enumerate_lines",
    "eta_schedule",
    "gen_cubic",
    "gen_param6",
    "ground_truth_loss",
    "init_first_pc",
    "local_grid",
    "loss",
    "observation_neighborhood",
    "penalty",
    "principal_segment",
    "project_to_segment",
    "projection_index",
    "r_squared",
    "read_points_csv",
    "run_stream",
    "sleeping_bandit_params",
    "unit_ball_volume",
    "voronoi_assign",
    "win_probabilities",
    "win_probability",
]
