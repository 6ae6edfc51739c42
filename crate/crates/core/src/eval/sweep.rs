//! Region-budget study: recall, accuracy and proposal time as the number of
//! proposed regions varies.

use std::io::Write;

use super::dataset::Dataset;
use super::run::{mean, run_dataset, EvalReport, PipelineConfig};
use super::EvalError;
use crate::rng::derive_seed;

pub const CSV_HEADER: &str = "budget,trial,recall,accuracy,proposal_ms,total_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub trial: usize,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    /// Mean per-image milliseconds.
    pub proposal_ms: f64,
    pub total_ms: f64,
}

/// Per-budget aggregate over trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub budget: usize,
    pub trials: usize,
    pub mean_recall: f64,
    /// Standard error of the mean recall.
    pub recall_stderr: f64,
    pub mean_accuracy: f64,
    pub mean_proposal_ms: f64,
}

/// Runs the pipeline once per `(budget, trial)` with independent seeds
/// derived from `config.seed`.
pub fn budget_sweep(
    dataset: &Dataset,
    config: &PipelineConfig,
    budgets: &[usize],
    trials: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::InvalidConfig("budgets must be non-empty and ascending".into()));
    }
    if trials == 0 {
        return Err(EvalError::InvalidConfig("trials must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(budgets.len() * trials);
    for (b, &budget) in budgets.iter().enumerate() {
        let proposer = config.proposer.with_budget(budget)?;
        for trial in 0..trials {
            let run = PipelineConfig {
                proposer: proposer.clone(),
                seed: derive_seed(config.seed, &[b as u64, trial as u64]),
                ..config.clone()
            };
            let report = EvalReport::from_outcomes(&run_dataset(dataset, &run)?);
            rows.push(SweepRow {
                budget,
                trial,
                recall: report.proposal_recall,
                accuracy: report.accuracy,
                proposal_ms: report.timing.mean.proposal * 1e3,
                total_ms: report.timing.mean_total * 1e3,
            });
        }
    }
    Ok(rows)
}

/// Groups rows by budget, in first-seen order. Undefined recall or accuracy
/// values are left out of the means.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut budgets: Vec<usize> = Vec::new();
    for r in rows {
        if !budgets.contains(&r.budget) {
            budgets.push(r.budget);
        }
    }
    budgets
        .into_iter()
        .map(|budget| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.budget == budget).collect();
            let recalls: Vec<f64> = group.iter().filter_map(|r| r.recall).collect();
            let accs: Vec<f64> = group.iter().filter_map(|r| r.accuracy).collect();
            let times: Vec<f64> = group.iter().map(|r| r.proposal_ms).collect();
            SweepSummary {
                budget,
                trials: group.len(),
                mean_recall: mean(&recalls),
                recall_stderr: std_error(&recalls),
                mean_accuracy: mean(&accs),
                mean_proposal_ms: mean(&times),
            }
        })
        .collect()
}

/// Sample standard deviation over `sqrt(n)`; zero for fewer than two values.
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with [`CSV_HEADER`]; undefined values are empty fields.
pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.3},{:.3}",
            r.budget,
            r.trial,
            opt(r.recall),
            opt(r.accuracy),
            r.proposal_ms,
            r.total_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(budget: usize, trial: usize, recall: f64) -> SweepRow {
        SweepRow {
            budget,
            trial,
            recall: Some(recall),
            accuracy: None,
            proposal_ms: 1.0,
            total_ms: 2.0,
        }
    }

    #[test]
    fn summary_groups_by_budget() {
        let rows = [row(10, 0, 0.2), row(10, 1, 0.4), row(20, 0, 0.9)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert!((s[0].mean_recall - 0.3).abs() < 1e-12);
        // sd = 0.1414..., / sqrt(2) = 0.1
        assert!((s[0].recall_stderr - 0.1).abs() < 1e-12);
        assert_eq!(s[1].recall_stderr, 0.0);
        assert_eq!(s[0].mean_accuracy, 0.0);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&[row(500, 3, 0.25)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "budget,trial,recall,accuracy,proposal_ms,total_ms\n500,3,0.25,,1.000,2.000\n"
        );
    }

    #[test]
    fn rejects_bad_budgets() {
        let ds = Dataset { samples: vec![], num_classes: 1 };
        let cfg = PipelineConfig::default();
        assert!(budget_sweep(&ds, &cfg, &[], 1).is_err());
        assert!(budget_sweep(&ds, &cfg, &[10, 5], 1).is_err());
        assert!(budget_sweep(&ds, &cfg, &[10], 0).is_err());
    }
}
