//! Correctness regions, the mass radius `r_p`, the three correctness-set
//! bounds and Monte-Carlo experiments around them.

mod bounds;
mod experiments;
mod region;

pub use bounds::{
    ball_mass_uniform_box, radius_rp_empirical, radius_rp_uniform_box, thm1_constants,
    thm1_correct_set_indicator, thm2_bound, thm3_bound, Thm1Indicator, Thm1Params, Thm2Params,
    Thm3Params,
};
pub use experiments::{
    beta_monotonicity_experiment, beta_sweep_csv_string, beta_sweep_summary, estimate_lipschitz,
    thm1_predicted_measure, verify_knn_bound, BetaSweepConfig, BetaSweepReport, TrialOutcome,
    VerifyConfig, VerifyReport,
};
pub use region::{
    correctness_on_grid, correctness_region, Grid, RegionReport, DEFAULT_GRID_RESOLUTION,
    MAX_GRID_DIM,
};
