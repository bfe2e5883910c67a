//! Image-quality scoring: SSIM against the pseudo ground truth, Global
//! Contrast Factor and its differences, the composite score and
//! per-method reports.

mod gcf;
mod report;
mod score;
mod ssim;
mod stats;

pub use gcf::{default_weight, delta_gcf, gcf, gcf_detail, perceptual_luminance, GcfDetail, GcfParams, DEFAULT_FACTORS};
pub use report::{aggregate, evaluate, AggregateRow, EvalParams, ImageRow, ImageSet, MethodScores, MetricsReport, IMAGE_COLUMNS, LR_METHOD};
pub use score::{ssim_l1_score, tot_cs, CompositeInput, DEFAULT_SSIM_L1_ALPHA};
pub use ssim::{ssim, ssim_values, SsimParams};
pub use stats::{paired_t_test, MeanStd, PairedTTest};
