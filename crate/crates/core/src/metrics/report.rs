//! Flat `key=value` evaluation reports.

use std::fmt::Write as _;

/// Metrics for one (task, method) evaluation. Only the metrics that apply to
/// the task are set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub task: String,
    pub method: String,
    pub log_densities: Vec<f64>,
    pub spearman: Option<f64>,
    pub mean_log_likelihood: Option<f64>,
    pub precision_at_k: Option<f64>,
    /// Settings that produced the numbers (σ, sample count, seeds, …), in
    /// insertion order.
    pub config: Vec<(String, String)>,
}

impl EvalReport {
    pub fn new(task: impl Into<String>, method: impl Into<String>, log_densities: Vec<f64>) -> Self {
        Self {
            task: task.into(),
            method: method.into(),
            log_densities,
            ..Self::default()
        }
    }

    pub fn with_config(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.config.push((key.into(), value.to_string()));
        self
    }

    /// One `key=value` per line; per-point values are summarized by count.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "task={}", self.task).unwrap();
        writeln!(out, "method={}", self.method).unwrap();
        writeln!(out, "num_points={}", self.log_densities.len()).unwrap();
        for (key, value) in [
            ("spearman", self.spearman),
            ("mean_log_likelihood", self.mean_log_likelihood),
            ("precision_at_k", self.precision_at_k),
        ] {
            if let Some(v) = value {
                writeln!(out, "{key}={v}").unwrap();
            }
        }
        for (k, v) in &self.config {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_lists_only_present_metrics() {
        let mut r = EvalReport::new("octagon", "kde", vec![-1.0, -2.0]).with_config("seed", 3);
        r.spearman = Some(0.5);
        let text = r.to_text();
        assert_eq!(text, "task=octagon\nmethod=kde\nnum_points=2\nspearman=0.5\nseed=3\n");
    }
}
