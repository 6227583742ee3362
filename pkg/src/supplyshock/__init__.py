"""Agent-based simulation of production losses spreading through supply chains
under regional restrictions."""

__version__ = "0.1.0"

from .calibration import (
    CalibratedNetwork,
    CalibrationError,
    IoTable,
    calibrate,
    from_calibrated,
    load_io_table,
    random_io_table,
    save_io_table,
)
from .dynamics import SimParams, SimState, SimulationError, init_state, iter_days, simulate, step_day
from .experiment import (
    LossSummary,
    PairComparison,
    derive_seed,
    loss_matrix,
    nationwide_report,
    pair_report,
    run_batch,
    value_added,
)
from .network import (
    NetworkError,
    SupplyNetwork,
    SyntheticConfig,
    diagnostics,
    generate_synthetic,
    load_edge_list,
    load_network,
    save_network,
)
from .rationing import ration, waterfill
from .scenarios import ScenarioSpec, nationwide_set, pair_region_set, single_region_set
from .shock import (
    CoverageLevel,
    LockdownSchedule,
    RestrictionWindow,
    SectorTable,
    bundled_sector_table,
    delta_at,
    load_schedule,
    load_sector_table,
)
from .stats import wilcoxon_rank_sum
from .synthetic import synthetic_economy
