"""Multi-cell downlink URLLC simulator and analytic calculator."""

from .analytics import (
    AnalyticPoint,
    IidModel,
    analytic_pf,
    link_outage,
    marcum_q1,
    pf_comp,
    pf_occupy_bound,
    pf_orth,
    required_bandwidth,
)
from .channel import (
    ChannelRealization,
    average_link_snr_db,
    draw_channels,
    draw_iid_channels,
    draw_small_scale,
    los_probability,
    path_loss_db,
)
from .config import ConfigurationError, ScenarioConfig, load_scenario
from .geometry import Layout, build_dense_grid, build_wraparound_grid, build_layout
from .montecarlo import (
    SweepResult,
    TrialPlan,
    estimate_pf,
    required_bandwidth_mc,
    sweep,
)
from .protocols import (
    ProtocolOutcome,
    ProtocolParams,
    run_comp_occupy_cow,
    run_ic_ia,
    run_ic_ic,
    run_occupy_cow,
    run_occupy_cow_interference_as_noise,
    run_orth_occupy_cows,
    run_protocol,
)

__version__ = "0.1.0"
