use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConfusionCounts, MetricsReport};
use crate::classifier::MurmurLabel;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "w_acc,uar,recall_present,recall_unknown,recall_absent,\
cm_present_present,cm_present_unknown,cm_present_absent,\
cm_unknown_present,cm_unknown_unknown,cm_unknown_absent,\
cm_absent_present,cm_absent_unknown,cm_absent_absent,split_fingerprint";

/// One header row and one value row; undefined recalls are empty fields.
/// Values use the shortest representation that round-trips exactly.
pub fn write_metrics_csv<W: Write>(
    report: &MetricsReport,
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{METRICS_HEADER}")?;
    let recall = report
        .recall
        .map(|r| r.map_or_else(String::new, |v| v.to_string()));
    write!(out, "{},{},{}", report.w_acc, report.uar, recall.join(","))?;
    for row in &report.counts.matrix {
        for v in row {
            write!(out, ",{v}")?;
        }
    }
    writeln!(out, ",{}", report.split_fingerprint)
}

pub fn read_metrics_csv<R: BufRead>(input: R, source: &Path) -> Result<MetricsReport> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: source.to_path_buf(),
        line,
        message,
    };
    let mut header_seen = false;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim() != METRICS_HEADER {
                return Err(parse_err(line_no, "unexpected metrics header".into()));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(parse_err(
                line_no,
                format!("expected 15 fields, got {}", f.len()),
            ));
        }
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number '{s}'")))
        };
        let mut recall = [None; 3];
        for k in 0..3 {
            if !f[2 + k].is_empty() {
                recall[k] = Some(real(f[2 + k])?);
            }
        }
        let mut counts = ConfusionCounts::default();
        for i in 0..3 {
            for j in 0..3 {
                let s = f[5 + 3 * i + j];
                counts.matrix[i][j] = s
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad count '{s}'")))?;
            }
        }
        return Ok(MetricsReport {
            w_acc: real(f[0])?,
            uar: real(f[1])?,
            recall,
            counts,
            split_fingerprint: f[14].to_string(),
        });
    }
    Err(parse_err(1, "no metrics row".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub baseline: f64,
    pub full: f64,
    pub absolute: f64,
    /// `(full - baseline) / baseline`; `None` when the baseline is zero.
    pub relative: Option<f64>,
}

impl MetricDelta {
    pub fn new(metric: impl Into<String>, baseline: f64, full: f64) -> Self {
        Self {
            metric: metric.into(),
            baseline,
            full,
            absolute: full - baseline,
            relative: (baseline != 0.0).then(|| (full - baseline) / baseline),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationComparison {
    pub split_fingerprint: String,
    /// W.acc, UAR, then per-class recalls defined in both reports.
    pub rows: Vec<MetricDelta>,
}

impl AblationComparison {
    pub fn get(&self, metric: &str) -> Option<&MetricDelta> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>9} {:>9} {:>9} {:>9}\n",
            "metric", "baseline", "full", "abs", "rel"
        );
        for r in &self.rows {
            let rel = r
                .relative
                .map_or_else(|| "n/a".to_string(), |v| format!("{:+.1}%", 100.0 * v));
            s += &format!(
                "{:<16} {:>9.3} {:>9.3} {:>+9.3} {:>9}\n",
                r.metric, r.baseline, r.full, r.absolute, rel
            );
        }
        s += &format!("split {}\n", self.split_fingerprint);
        s
    }
}

/// Deltas of `full` over `baseline`; both must come from the same test split.
pub fn ablation_compare(
    full: &MetricsReport,
    baseline: &MetricsReport,
) -> Result<AblationComparison> {
    if full.split_fingerprint != baseline.split_fingerprint {
        return Err(Error::Comparison(format!(
            "reports use different test splits ({} vs {})",
            full.split_fingerprint, baseline.split_fingerprint
        )));
    }
    let mut rows = vec![
        MetricDelta::new("w_acc", baseline.w_acc, full.w_acc),
        MetricDelta::new("uar", baseline.uar, full.uar),
    ];
    for (k, label) in MurmurLabel::ALL.iter().enumerate() {
        if let (Some(b), Some(f)) = (baseline.recall[k], full.recall[k]) {
            rows.push(MetricDelta::new(
                format!("recall_{}", label.as_str().to_lowercase()),
                b,
                f,
            ));
        }
    }
    Ok(AblationComparison {
        split_fingerprint: full.split_fingerprint.clone(),
        rows,
    })
}

/// `metric,baseline,full,abs_delta,rel_delta`, one row per metric.
pub fn write_ablation_csv<W: Write>(
    cmp: &AblationComparison,
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "# split_fingerprint={}", cmp.split_fingerprint)?;
    writeln!(out, "metric,baseline,full,abs_delta,rel_delta")?;
    for r in &cmp.rows {
        let rel = r.relative.map_or_else(String::new, |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{}",
            r.metric, r.baseline, r.full, r.absolute, rel
        )?;
    }
    Ok(())
}
