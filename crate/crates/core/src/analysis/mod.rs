//! Method rankings, cross-company bias, jury-composition robustness and
//! metric-divergence cases.

mod bias;
mod divergence;
pub mod fixtures;
mod ranking;
mod subsets;
mod summary;

pub use bias::{bias_report, rank_excluding_same_company, BiasRow, CompanyMap};
pub use divergence::{
    select_divergent_cases, Divergence, DivergenceCase, Unanimity, UnanimityCensus,
};
pub use ranking::{rank_methods, BestVsBest, RankedMethod, Ranking, RankingKey};
pub use subsets::{default_subsets, jury_subset_rankings, JurySubset, SubsetRanking, SubsetRankings};
pub use summary::{
    acceptance_summary, method_summaries, AcceptanceSummary, DistanceMean, MethodSummary,
    ResampleUnit, SummarySettings,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("statistics error: {0}")]
    Stat(String),
}
