"""Mobius-monotonicity analysis and strong stationary duals on finite posets."""

from .availability import (
    AvailabilityReport,
    Generator,
    RateFunctions,
    UniformizedChain,
    availability_generator,
    availability_pipeline,
    pernode_family,
    power_family,
    rates_from_tables,
    uniformize,
)
from .chain import (
    Chain,
    StationaryLaw,
    diff_down,
    diff_up,
    reverse,
    stationary,
    sum_down,
    sum_up,
    validate_chain,
)
from .convergence import (
    AbsorptionLaw,
    EmpiricalTail,
    SeparationCurve,
    absorption_tail,
    cube_eigenvalues,
    cube_separation_formula,
    separation_curve,
    simulate_absorption,
    sst_bound_check,
)
from .cube import (
    CubeWalkParams,
    GPlusMove,
    axis_moves,
    axis_transformed_walk,
    cube_stationary_product,
    gplus_transform,
    nearest_neighbor_walk,
    power_chain,
    supermodular_order_witness,
)
from .duality import (
    DualChain,
    DualityResiduals,
    Link,
    build_link,
    build_ssd,
    build_ssd_linear,
    g_ratio,
    verify_duality,
)
from .monotonicity import (
    MonotonicityReport,
    function_mobius_monotone,
    mobius_monotone_down,
    mobius_monotone_up,
    strong_stochastic_monotone,
    weak_monotone,
)
from .poset import (
    Poset,
    ZetaMobius,
    build_poset,
    cube_poset,
    down_set,
    is_lattice,
    meet_join,
    up_set,
    zeta_mobius,
)
from .specfile import load_model, parse_spec, serialize_chain, serialize_poset

__version__ = "0.1.0"
