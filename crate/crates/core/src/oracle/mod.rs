//! Baselines that anchor normalized returns, pure Nash equilibrium
//! enumeration and the coordination difficulty score.

mod bounds;
mod nash;
mod search;

pub use bounds::{
    normalize_return, play_episodes, random_policy_return, robustness_ablation, sig_sl_oracle_return, topology_bounds,
    AblationReport, BoundsSettings, MeanEstimate, NormalizationBounds, OracleMode, OraclePolicy,
};
pub use nash::{
    cds_report, coordination_difficulty_score, enumerate_pure_nash, CdsReport, Equilibrium, EquilibriumSet, PayoffTensor,
};
pub use search::{
    check_guard, exhaustive_best_joint_action, exhaustive_search, for_each_joint, greedy_iterative_assignment, greedy_search,
    GreedyResult, JointEvaluator, Objective, ENUMERATION_GUARD,
};
