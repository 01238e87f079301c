//! Human-readable sweep summary: a median-seconds table and a parallel
//! speedup-ratio table, rows indexed by N, columns ordered fastest to
//! slowest at the largest N.

use std::collections::BTreeSet;

use crate::benchspec::BenchRecord;
use crate::error::{HarnessError, Result};

pub fn speedup_table(records: &[BenchRecord], baseline_label: &str) -> Result<String> {
    if records.is_empty() {
        return Err(HarnessError::Csv("no records to tabulate".into()));
    }
    let ns: Vec<usize> = records
        .iter()
        .map(|r| r.n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let cell = |label: &str, n: usize| -> Option<&BenchRecord> {
        records.iter().find(|r| r.label == label && r.n == n)
    };

    for &n in &ns {
        if cell(baseline_label, n).is_none() {
            return Err(HarnessError::MissingBaseline(format!(
                "baseline '{baseline_label}' has no cell at N={n}"
            )));
        }
    }

    // Column order: ascending median at the largest N; variants absent
    // there trail in name order.
    let largest = *ns.last().expect("non-empty");
    let mut labels: Vec<String> = records
        .iter()
        .map(|r| r.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    labels.sort_by(|a, b| {
        let ka = cell(a, largest).map(|r| r.median_s);
        let kb = cell(b, largest).map(|r| r.median_s);
        match (ka, kb) {
            (Some(x), Some(y)) => x.partial_cmp(&y).expect("finite medians"),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(b),
        }
    });

    let width = labels.iter().map(|l| l.len()).max().unwrap_or(6).max(10);
    let mut out = String::new();

    out.push_str("median seconds per forward pass\n");
    out.push_str(&format!("{:>8}", "N"));
    for label in &labels {
        out.push_str(&format!("  {label:>width$}"));
    }
    out.push('\n');
    for &n in &ns {
        out.push_str(&format!("{n:>8}"));
        for label in &labels {
            match cell(label, n) {
                Some(r) => out.push_str(&format!("  {:>width$.6}", r.median_s)),
                None => out.push_str(&format!("  {:>width$}", "-")),
            }
        }
        out.push('\n');
    }

    out.push_str(&format!("\nspeedup vs {baseline_label} (baseline median / cell median)\n"));
    out.push_str(&format!("{:>8}", "N"));
    for label in &labels {
        out.push_str(&format!("  {label:>width$}"));
    }
    out.push('\n');
    for &n in &ns {
        let base = cell(baseline_label, n).expect("checked above").median_s;
        out.push_str(&format!("{n:>8}"));
        for label in &labels {
            match cell(label, n) {
                Some(r) => out.push_str(&format!("  {:>width$.3}", base / r.median_s)),
                None => out.push_str(&format!("  {:>width$}", "-")),
            }
        }
        out.push('\n');
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqa_core::{AttentionConfig, VariantTag};

    fn rec(label: &str, n: usize, median: f64) -> BenchRecord {
        BenchRecord {
            label: label.into(),
            tag: VariantTag::Mha,
            config: AttentionConfig::new(64, 4, 4, 4).unwrap(),
            n,
            median_s: median,
            mean_s: median,
            stddev_s: 0.0,
            min_s: median,
            modeled_flops: 1,
            speedup: 1.0,
        }
    }

    #[test]
    fn single_cell_table_has_unit_ratio() {
        let records = vec![rec("MHA", 64, 0.5)];
        let table = speedup_table(&records, "MHA").unwrap();
        assert!(table.contains("MHA"));
        assert!(table.contains("1.000"));
    }

    #[test]
    fn columns_ordered_fastest_first_at_largest_n() {
        let records = vec![
            rec("MHA", 64, 0.2),
            rec("xSQA", 64, 0.05),
            rec("SQA", 64, 0.1),
            rec("MHA", 128, 0.8),
            rec("xSQA", 128, 0.2),
            rec("SQA", 128, 0.4),
        ];
        let table = speedup_table(&records, "MHA").unwrap();
        let header = table.lines().nth(1).unwrap();
        let x = header.find("xSQA").unwrap();
        let s = header.find(" SQA").unwrap();
        let m = header.find(" MHA").unwrap();
        assert!(x < s && s < m, "got header {header:?}");
    }

    #[test]
    fn missing_baseline_cell_is_named() {
        let records = vec![rec("MHA", 64, 0.2), rec("SQA", 128, 0.1)];
        match speedup_table(&records, "MHA") {
            Err(HarnessError::MissingBaseline(msg)) => assert!(msg.contains("N=128")),
            other => panic!("expected missing baseline, got {other:?}"),
        }
    }
}
