//! Post-processing of run artifacts: the expected-return check, token and
//! accuracy series, award/slash counts, survival, cost, and export.

pub mod export;
pub mod stats;
pub mod theorem;

pub use export::{export, file_name, ExportFormat, RunTag};
pub use stats::{
    accuracy_timeseries, aggregate_series, award_slash_counts, cost_report, final_accuracy, mean_removal_round,
    mean_std, survival_stats, token_timeseries, AwardSlash, CostReport, Group, SeriesPoint, SurvivalRecord,
    TimeSeries,
};
pub use theorem::{closed_form_return, dishonest_payoff, mc_expected_return, ReturnEstimate, TheoremParams};
