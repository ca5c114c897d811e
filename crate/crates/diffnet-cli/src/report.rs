//! Per-run report files and the comparison table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use diffnet::checkpoint::write_atomic;
use diffnet::data::DatasetId;
use diffnet::train::ExperimentReport;
use diffnet::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RepetitionRow {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub notation: String,
    pub dataset: DatasetId,
    pub repetitions: Vec<RepetitionRow>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
}

impl RunReport {
    pub fn new(dataset: DatasetId, report: &ExperimentReport) -> Self {
        Self {
            notation: report.notation.clone(),
            dataset,
            repetitions: report
                .repetitions
                .iter()
                .map(|r| RepetitionRow {
                    seed: r.seed,
                    best_epoch: r.best_epoch,
                    val_accuracy: r.best_val_accuracy,
                    test_accuracy: r.test_accuracy,
                })
                .collect(),
            mean_test_accuracy: report.mean_test_accuracy,
            std_test_accuracy: report.std_test_accuracy,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialize: {e}")))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("report parse: {e}")))
    }

    /// Design family, in table order: plain single/class-specific designs
    /// first, then same-plane differential, then split-plane differential.
    pub fn type_rank(&self) -> u8 {
        if !self.notation.contains("][") {
            if self.notation.contains(",0]") {
                0 // non-differential
            } else {
                1 // same-plane differential
            }
        } else {
            2 // split-plane differential
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self.type_rank() {
            0 => "non-differential",
            1 => "differential",
            _ => "split differential",
        }
    }

    pub fn dataset_name(&self) -> &'static str {
        match self.dataset {
            DatasetId::Mnist => "mnist",
            DatasetId::Fashion => "fashion",
            DatasetId::Cifar10 => "cifar10",
        }
    }
}

/// Human-readable table plus its comma-separated companion.
pub fn format_table(reports: &[RunReport]) -> (String, String) {
    let mut ordered: Vec<&RunReport> = reports.iter().collect();
    ordered.sort_by(|a, b| {
        a.type_rank()
            .cmp(&b.type_rank())
            .then_with(|| a.notation.cmp(&b.notation))
            .then_with(|| a.dataset_name().cmp(b.dataset_name()))
    });
    let mut table = String::new();
    table.push_str(&format!(
        "{:<20} {:<28} {:<9} {}\n",
        "type", "architecture", "dataset", "test accuracy (%)"
    ));
    let mut csv = String::from("type,architecture,dataset,mean,std,n\n");
    for r in ordered {
        let n = r.repetitions.len();
        let spread = if n == 1 {
            "(n=1, std undefined)".to_string()
        } else {
            format!("± {:.2}", 100.0 * r.std_test_accuracy)
        };
        table.push_str(&format!(
            "{:<20} {:<28} {:<9} {:.2} {}\n",
            r.type_name(),
            r.notation,
            r.dataset_name(),
            100.0 * r.mean_test_accuracy,
            spread
        ));
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.type_name(),
            r.notation,
            r.dataset_name(),
            r.mean_test_accuracy,
            r.std_test_accuracy,
            n
        ));
    }
    (table, csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(notation: &str, accs: &[f64]) -> RunReport {
        let n = accs.len();
        let mean = accs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        RunReport {
            notation: notation.into(),
            dataset: DatasetId::Mnist,
            repetitions: accs
                .iter()
                .enumerate()
                .map(|(i, &a)| RepetitionRow {
                    seed: i as u64,
                    best_epoch: 0,
                    val_accuracy: a,
                    test_accuracy: a,
                })
                .collect(),
            mean_test_accuracy: mean,
            std_test_accuracy: std,
        }
    }

    #[test]
    fn rows_group_by_design_family() {
        let reports = vec![
            report("D([1][1],[20,5,40k])", &[0.9]),
            report("D([10,10],[1,5,40k])", &[0.9]),
            report("D([10,0],[1,5,40k])", &[0.9]),
        ];
        let (table, csv) = format_table(&reports);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[1].starts_with("non-differential"));
        assert!(lines[2].starts_with("differential"));
        assert!(lines[3].starts_with("split differential"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn single_repetition_is_flagged() {
        let (table, _) = format_table(&[report("D([10,0],[1,5,40k])", &[0.95])]);
        assert!(table.contains("n=1"), "{table}");
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        // hand-computed: accs 0.9, 0.92, 0.94 → std = 0.02
        let r = report("D([10,0],[1,5,40k])", &[0.9, 0.92, 0.94]);
        assert!((r.std_test_accuracy - 0.02).abs() < 1e-12);
    }
}
