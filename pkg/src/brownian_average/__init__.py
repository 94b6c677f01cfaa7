"""Time-average densities and conditional laws for the Brownian meander and excursion."""

from __future__ import annotations

__version__ = "0.1.0"

from .conditioning import (
    ConditioningSpec,
    CovarianceKernel,
    FiniteSignedMeasure,
    Piece,
    bridge_kernel,
    brownian_kernel,
    excursion_spec,
    meander_spec,
    pair_path,
    q_apply,
    q_pair,
    rho_weight,
    transform_Y,
    transform_Z,
)
from .excursion import (
    build_v,
    build_Vc,
    density_excursion_avg,
    density_table_excursion,
    sample_conditional_excursion,
)
from .meander import (
    build_u,
    build_Uc,
    density_meander_avg,
    density_table_meander,
    sample_conditional_meander,
)
from .montecarlo import AreaEstimate, DensityTable, WeightedEnsemble
from .oracle import ComparisonReport
from .paths import (
    Path,
    RngStream,
    TimeGrid,
    make_grid,
    min_value,
    sample_bm,
    sample_bridge,
    sample_excursion,
    sample_meander,
    time_average,
)

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
