//! CSV output: schema `variant,N,median_s,mean_s,stddev_s,min_s,flops,speedup`,
//! one row per cell, `.` decimal separator, no locale formatting. Run
//! metadata (thread count, precision, seed, skipped cells) travels in `#`
//! comment lines above the header.

use crate::benchspec::BenchRecord;
use crate::error::{HarnessError, Result};
use crate::runner::BenchOutput;

pub const CSV_HEADER: &str = "variant,N,median_s,mean_s,stddev_s,min_s,flops,speedup";

/// The content of one CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub variant: String,
    pub n: usize,
    pub median_s: f64,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub min_s: f64,
    pub flops: u64,
    pub speedup: f64,
}

impl BenchRecord {
    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            variant: self.label.clone(),
            n: self.n,
            median_s: self.median_s,
            mean_s: self.mean_s,
            stddev_s: self.stddev_s,
            min_s: self.min_s,
            flops: self.modeled_flops,
            speedup: self.speedup,
        }
    }
}

pub fn emit(output: &BenchOutput) -> String {
    let mut out = String::new();
    out.push_str(&format!("# threads={}\n", output.meta.threads));
    out.push_str(&format!("# precision={}\n", output.meta.precision));
    out.push_str(&format!("# seed={}\n", output.meta.seed));
    out.push_str(&format!(
        "# d_model={} H={}\n",
        output.meta.d_model, output.meta.h_total
    ));
    for skip in &output.skipped {
        out.push_str(&format!(
            "# skipped {}@{}: {}\n",
            skip.label, skip.n, skip.reason
        ));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in &output.records {
        let row = rec.csv_row();
        // `{}` on f64 prints the shortest representation that parses back
        // to the same value, so emit/parse round-trips exactly.
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.variant,
            row.n,
            row.median_s,
            row.mean_s,
            row.stddev_s,
            row.min_s,
            row.flops,
            row.speedup
        ));
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => {
            return Err(HarnessError::Csv(format!(
                "unexpected header {h:?}, want {CSV_HEADER:?}"
            )))
        }
        None => return Err(HarnessError::Csv("empty input".into())),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(HarnessError::Csv(format!(
                "line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let err = |what: &str| HarnessError::Csv(format!("line {}: bad {what}", lineno + 2));
        rows.push(CsvRow {
            variant: fields[0].to_string(),
            n: fields[1].parse().map_err(|_| err("N"))?,
            median_s: fields[2].parse().map_err(|_| err("median_s"))?,
            mean_s: fields[3].parse().map_err(|_| err("mean_s"))?,
            stddev_s: fields[4].parse().map_err(|_| err("stddev_s"))?,
            min_s: fields[5].parse().map_err(|_| err("min_s"))?,
            flops: fields[6].parse().map_err(|_| err("flops"))?,
            speedup: fields[7].parse().map_err(|_| err("speedup"))?,
        });
    }
    Ok(rows)
}
