//! Cross-validation, metrics, preprocessing and the experiment runners.

pub mod cv;
pub mod metrics;
pub mod preprocess;
pub mod report;
pub mod runner;

pub use cv::{cross_validate, cv_fit, default_b_levels, kfold_split, lambda_path, CvGrid, CvOutcome, CvPlan, CvPoint};
pub use metrics::{
    best_case_extension, estimation_mse, prediction_mse, roc_points, roc_points_partial, selection_point, tpr_at_fpr,
    RocPoint,
};
pub use preprocess::{log2_shift, orthonormalize_features, transform_response};
pub use report::{CoefficientRecord, ExperimentReport, ReplicationRecord, RocCurve, SummaryRow};
pub use runner::{
    count_grid, run_real_data, run_simulation_suite, train_test_splits, RealDataProtocol, SuiteOptions, ARM_AIMER, ARM_AIMER_B0,
    ARM_LASSO, ARM_ORACLE, ARM_RIDGE, ARM_SPC, ARM_SPC_LASSO, DEFAULT_ELL_GRID,
};
