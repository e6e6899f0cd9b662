"""Feigenbaum fixed point, its invariant ray, Markov partition and dimension estimates."""

from .core import FeigenbaumMap, alpha_oracle, eval_g, find_x0, load_map, save_map, solve_feigenbaum
from .curves import CurveApprox, SymbolWord, hausdorff
from .dimension import (
    ConformalMeasure,
    DimensionEstimate,
    PressureTable,
    QuasicircleReport,
    bowen_root,
    box_counting_oracle,
    conformal_measure,
    frostman_ratios,
    m_condition_estimate,
    partition_sum,
)
from .errors import (
    Ambiguous,
    BadCriticality,
    BranchLoss,
    FeigError,
    InsufficientData,
    InsufficientDepth,
    InsufficientResolution,
    NoBracket,
    NonConvergence,
    NotCovered,
    OutOfDomain,
)
from .ifs import CompactX, build_X, curve_L, limit_curve, phi_apply, psi_apply
from .inverse import SingularPoint, chi_eval, find_c, omega_boundary, u_eval, u_star_eval
from .partition import (
    MachineDomain,
    PairClass,
    Piece,
    RayPath,
    Vein,
    census,
    classify_pair,
    compute_vein,
    depth0_sectors,
    diameter_decay,
    external_ray,
    machine_tile,
    pullback_piece,
    rescale_piece,
    tiling_coverage,
    vein_path_to_zero,
)
from .verify import VerificationReport, run_suite

__version__ = "0.1.0"
