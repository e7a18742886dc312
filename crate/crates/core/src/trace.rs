//! Per-step / per-epoch iterate statistics shared by the solvers.

use std::fmt::Write as _;

/// One logged point of an optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Step (or epoch) index.
    pub t: usize,
    pub suboptimality: f64,
    pub grad_norm: f64,
    pub dist_to_opt: f64,
    /// Full data passes consumed so far.
    pub wall_epochs: f64,
    /// Dual-only: suboptimality carried by kernel directions.
    pub kernel_part: Option<f64>,
    /// Dual-only: suboptimality carried by image directions.
    pub image_part: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TraceMeta {
    pub step_size: String,
    pub init_label: String,
    pub seed: u64,
    /// Set when the caller asked for a step size outside the guaranteed
    /// convergence range.
    pub step_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizerTrace {
    pub steps: Vec<TraceStep>,
    pub meta: TraceMeta,
}

/// Step-logging rule: every step up to 1000, then every 10th, and always
/// the final step.
pub fn should_log(t: usize, last: usize) -> bool {
    t <= 1000 || t % 10 == 0 || t == last
}

impl OptimizerTrace {
    pub fn final_suboptimality(&self) -> f64 {
        self.steps.last().map(|s| s.suboptimality).unwrap_or(f64::NAN)
    }

    /// First logged index whose suboptimality is at or below `threshold`,
    /// if any.
    pub fn first_at_or_below(&self, threshold: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.suboptimality <= threshold).map(|s| s.t)
    }

    /// CSV with header `t,subopt,grad_norm,dist,epochs`; `with_log10` adds a
    /// `log10_subopt` column, `with_split` the dual kernel/image columns.
    pub fn to_csv(&self, with_log10: bool, with_split: bool) -> String {
        let mut out = String::new();
        out.push_str("t,subopt,grad_norm,dist,epochs");
        if with_log10 {
            out.push_str(",log10_subopt");
        }
        if with_split {
            out.push_str(",kernel_part,image_part");
        }
        out.push('\n');
        for s in &self.steps {
            let _ = write!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.6}",
                s.t, s.suboptimality, s.grad_norm, s.dist_to_opt, s.wall_epochs
            );
            if with_log10 {
                let v = s.suboptimality.max(f64::MIN_POSITIVE).log10();
                let _ = write!(out, ",{v:.8}");
            }
            if with_split {
                let _ = write!(
                    out,
                    ",{:.12e},{:.12e}",
                    s.kernel_part.unwrap_or(f64::NAN),
                    s.image_part.unwrap_or(f64::NAN)
                );
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_schedule_dense_then_sparse() {
        assert!(should_log(0, 5000));
        assert!(should_log(1000, 5000));
        assert!(!should_log(1001, 5000));
        assert!(should_log(1010, 5000));
        assert!(should_log(4999, 4999));
    }

    #[test]
    fn csv_includes_requested_columns() {
        let trace = OptimizerTrace {
            steps: vec![TraceStep {
                t: 0,
                suboptimality: 1.0,
                grad_norm: 0.5,
                dist_to_opt: 2.0,
                wall_epochs: 0.0,
                kernel_part: Some(0.75),
                image_part: Some(0.25),
            }],
            meta: TraceMeta::default(),
        };
        let plain = trace.to_csv(false, false);
        assert!(plain.starts_with("t,subopt,grad_norm,dist,epochs\n"));
        let full = trace.to_csv(true, true);
        assert!(full.contains("log10_subopt"));
        assert!(full.contains("kernel_part"));
    }
}
