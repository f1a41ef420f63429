//! Patient-level aggregation and challenge metrics.
//!
//! A patient's label is the argmax of its segment scores averaged over every
//! recording. Scores are raw SVM margins, so "averaging" here is margin
//! averaging rather than probability averaging.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{predict_label, ClassScores, MurmurLabel};
use crate::error::{Error, Result};

pub use report::{
    ablation_compare, read_metrics_csv, write_ablation_csv, write_metrics_csv, AblationComparison,
    MetricDelta, METRICS_HEADER,
};

/// Class weights of the weighted accuracy, in score order.
pub const CLASS_WEIGHTS: [f64; 3] = [5.0, 3.0, 1.0];

/// 3x3 confusion matrix, `matrix[truth][predicted]` in score order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub matrix: [[u64; 3]; 3],
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: MurmurLabel, predicted: MurmurLabel) {
        self.matrix[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(mut self, other: &ConfusionCounts) -> Self {
        for (row, o) in self.matrix.iter_mut().zip(&other.matrix) {
            for (v, w) in row.iter_mut().zip(o) {
                *v += w;
            }
        }
        self
    }

    /// `c_i`: patients whose true label is class `i`.
    pub fn totals(&self) -> [u64; 3] {
        self.matrix.map(|row| row.iter().sum())
    }

    /// `t_i`: correct predictions for class `i`.
    pub fn correct(&self) -> [u64; 3] {
        [self.matrix[0][0], self.matrix[1][1], self.matrix[2][2]]
    }

    pub fn total(&self) -> u64 {
        self.totals().iter().sum()
    }

    /// Builds counts with the given totals and diagonal; misses are put in the
    /// next class (cyclically), which no metric here depends on.
    pub fn from_totals(c: [u64; 3], t: [u64; 3]) -> Result<Self> {
        let mut counts = Self::default();
        for k in 0..3 {
            if t[k] > c[k] {
                return Err(Error::InvalidArgument(format!(
                    "correct count {} exceeds total {} for class {}",
                    t[k],
                    c[k],
                    MurmurLabel::ALL[k]
                )));
            }
            counts.matrix[k][k] = t[k];
            counts.matrix[k][(k + 1) % 3] = c[k] - t[k];
        }
        Ok(counts)
    }
}

/// `(5 t_p + 3 t_u + t_a) / (5 c_p + 3 c_u + c_a)`.
pub fn weighted_accuracy(counts: &ConfusionCounts) -> Result<f64> {
    let c = counts.totals();
    let t = counts.correct();
    let den: f64 = (0..3).map(|k| CLASS_WEIGHTS[k] * c[k] as f64).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "weighted accuracy of an empty confusion matrix".into(),
        ));
    }
    let num: f64 = (0..3).map(|k| CLASS_WEIGHTS[k] * t[k] as f64).sum();
    Ok(num / den)
}

/// Per-class recall, `None` for a class with no true examples.
pub fn recalls(counts: &ConfusionCounts) -> [Option<f64>; 3] {
    let c = counts.totals();
    let t = counts.correct();
    [0, 1, 2].map(|k| (c[k] > 0).then(|| t[k] as f64 / c[k] as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Uar {
    pub value: f64,
    /// Classes left out of the average because they have no true examples.
    pub undefined: Vec<MurmurLabel>,
}

/// Mean of the per-class recalls over classes present in `counts`.
pub fn unweighted_average_recall(counts: &ConfusionCounts) -> Result<Uar> {
    let r = recalls(counts);
    let defined: Vec<f64> = r.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric(
            "recall of an empty confusion matrix".into(),
        ));
    }
    let undefined: Vec<MurmurLabel> = MurmurLabel::ALL
        .iter()
        .zip(&r)
        .filter(|(_, v)| v.is_none())
        .map(|(&l, _)| l)
        .collect();
    if !undefined.is_empty() {
        log::warn!("recall undefined for {undefined:?}; UAR averaged over the remaining classes");
    }
    Ok(Uar {
        value: defined.iter().sum::<f64>() / defined.len() as f64,
        undefined,
    })
}

/// UAR from an explicit list of recalls.
pub fn uar_from_recalls(recalls: &[f64]) -> Result<f64> {
    if recalls.is_empty() {
        return Err(Error::UndefinedMetric("no recalls to average".into()));
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// Per-class mean (or median) of a patient's segment scores.
pub fn aggregate_scores(scores: &[ClassScores], how: Aggregation) -> Result<ClassScores> {
    if scores.is_empty() {
        return Err(Error::Data("cannot aggregate an empty score list".into()));
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut col: Vec<f64> = scores.iter().map(|s| s.0[k]).collect();
        *o = match how {
            Aggregation::Mean => col.iter().sum::<f64>() / col.len() as f64,
            Aggregation::Median => {
                col.sort_by(f64::total_cmp);
                let m = col.len() / 2;
                if col.len() % 2 == 1 {
                    col[m]
                } else {
                    (col[m - 1] + col[m]) / 2.0
                }
            }
        };
    }
    ClassScores::new(out)
}

pub fn aggregate_patient(scores: &[ClassScores], how: Aggregation) -> Result<MurmurLabel> {
    aggregate_scores(scores, how).map(|s| predict_label(&s))
}

/// SHA-256 over the sorted, newline-joined test patient ids, as hex.
pub fn split_fingerprint(test_ids: &[String]) -> String {
    let mut ids: Vec<&str> = test_ids.iter().map(String::as_str).collect();
    ids.sort_unstable();
    let digest = Sha256::digest(ids.join("\n").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub w_acc: f64,
    pub uar: f64,
    /// Present, Unknown, Absent; `None` when the class has no test patients.
    pub recall: [Option<f64>; 3],
    pub counts: ConfusionCounts,
    pub split_fingerprint: String,
}

impl MetricsReport {
    pub fn from_counts(
        counts: ConfusionCounts,
        split_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        let uar = unweighted_average_recall(&counts)?;
        Ok(Self {
            w_acc: weighted_accuracy(&counts)?,
            uar: uar.value,
            recall: recalls(&counts),
            counts,
            split_fingerprint: split_fingerprint.into(),
        })
    }

    pub fn undefined_recall(&self) -> Vec<MurmurLabel> {
        MurmurLabel::ALL
            .iter()
            .zip(&self.recall)
            .filter(|(_, r)| r.is_none())
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn render_text(&self) -> String {
        let fmt = |r: Option<f64>| r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"));
        let mut s = String::new();
        s += &format!("patients        {}\n", self.counts.total());
        s += &format!("W.acc           {:.3}\n", self.w_acc);
        s += &format!("UAR             {:.3}\n", self.uar);
        for (l, r) in MurmurLabel::ALL.iter().zip(&self.recall) {
            s += &format!("recall {:<8} {}\n", l.as_str(), fmt(*r));
        }
        let undefined = self.undefined_recall();
        if !undefined.is_empty() {
            s += &format!("warning: UAR averaged without {undefined:?} (no test patients)\n");
        }
        s += "confusion (rows truth, cols predicted: Present Unknown Absent)\n";
        for (l, row) in MurmurLabel::ALL.iter().zip(&self.counts.matrix) {
            s += &format!(
                "  {:<8} {:>6} {:>6} {:>6}\n",
                l.as_str(),
                row[0],
                row[1],
                row[2]
            );
        }
        s += &format!("split {}\n", self.split_fingerprint);
        s
    }
}

/// Final decision for one patient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientPrediction {
    pub patient_id: String,
    pub truth: MurmurLabel,
    pub predicted: MurmurLabel,
    pub scores: ClassScores,
}

/// A test patient and whatever the scoring function needs to score it.
pub struct TestPatient<S> {
    pub patient_id: String,
    pub label: MurmurLabel,
    pub input: S,
}

/// Scores every patient in parallel, aggregates, and tallies the metrics.
/// Output order follows `patients`, so results do not depend on scheduling.
pub fn evaluate<S, F>(
    patients: &[TestPatient<S>],
    score_fn: F,
    how: Aggregation,
) -> Result<(MetricsReport, Vec<PatientPrediction>)>
where
    S: Sync,
    F: Fn(&S) -> Result<Vec<ClassScores>> + Sync,
{
    if patients.is_empty() {
        return Err(Error::Data("no test patients to evaluate".into()));
    }
    let predictions = patients
        .par_iter()
        .map(|p| {
            let scores = score_fn(&p.input).and_then(|s| aggregate_scores(&s, how));
            let scores = scores.map_err(|e| e.context(format!("patient {}", p.patient_id)))?;
            Ok(PatientPrediction {
                patient_id: p.patient_id.clone(),
                truth: p.label,
                predicted: predict_label(&scores),
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = ConfusionCounts::default();
    for p in &predictions {
        counts.record(p.truth, p.predicted);
    }
    let ids: Vec<String> = patients.iter().map(|p| p.patient_id.clone()).collect();
    let report = MetricsReport::from_counts(counts, split_fingerprint(&ids))?;
    Ok((report, predictions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: [f64; 3]) -> ClassScores {
        ClassScores::new(v).unwrap()
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(
            aggregate_patient(&[s([0.1, 0.3, 0.2])], Aggregation::Mean).unwrap(),
            MurmurLabel::Unknown
        );
        assert_eq!(
            aggregate_patient(&[s([1.0, 0.0, 0.0]), s([0.0, 1.0, 0.0])], Aggregation::Mean)
                .unwrap(),
            MurmurLabel::Present
        );
        let three = [s([2.0, 0.0, 0.0]), s([0.0, 3.0, 0.0]), s([0.0, 0.0, 3.5])];
        let mean = aggregate_scores(&three, Aggregation::Mean).unwrap();
        assert!(
            (mean.0[0] - 2.0 / 3.0).abs() < 1e-15
                && mean.0[1] == 1.0
                && (mean.0[2] - 3.5 / 3.0).abs() < 1e-15
        );
        assert_eq!(
            aggregate_patient(&three, Aggregation::Mean).unwrap(),
            MurmurLabel::Absent
        );
        assert!(matches!(
            aggregate_patient(&[], Aggregation::Mean),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn median_aggregation() {
        let v = [s([0.0, 5.0, 0.0]), s([1.0, 0.0, 0.0]), s([1.0, 0.0, 0.0])];
        assert_eq!(
            aggregate_patient(&v, Aggregation::Median).unwrap(),
            MurmurLabel::Present
        );
        assert_eq!(
            aggregate_patient(&v, Aggregation::Mean).unwrap(),
            MurmurLabel::Unknown
        );
        let even = aggregate_scores(
            &[s([1.0, 0.0, 0.0]), s([3.0, 0.0, 0.0])],
            Aggregation::Median,
        )
        .unwrap();
        assert_eq!(even.0[0], 2.0);
    }

    #[test]
    fn weighted_accuracy_examples() {
        let perfect = ConfusionCounts::from_totals([4, 2, 9], [4, 2, 9]).unwrap();
        assert_eq!(weighted_accuracy(&perfect).unwrap(), 1.0);
        let partial = ConfusionCounts::from_totals([10, 10, 10], [10, 0, 0]).unwrap();
        assert_eq!(weighted_accuracy(&partial).unwrap(), 50.0 / 90.0);
        let wrong = ConfusionCounts::from_totals([3, 3, 3], [0, 0, 0]).unwrap();
        assert_eq!(weighted_accuracy(&wrong).unwrap(), 0.0);
        assert!(matches!(
            weighted_accuracy(&ConfusionCounts::default()),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn uar_examples() {
        let partial = ConfusionCounts::from_totals([10, 10, 10], [10, 0, 0]).unwrap();
        assert!((unweighted_average_recall(&partial).unwrap().value - 1.0 / 3.0).abs() < 1e-15);
        let missing = ConfusionCounts::from_totals([4, 0, 6], [2, 0, 6]).unwrap();
        let u = unweighted_average_recall(&missing).unwrap();
        assert_eq!(u.value, 0.75);
        assert_eq!(u.undefined, vec![MurmurLabel::Unknown]);
    }

    #[test]
    fn from_totals_rejects_impossible_counts() {
        assert!(ConfusionCounts::from_totals([1, 1, 1], [2, 0, 0]).is_err());
    }

    #[test]
    fn fingerprint_is_order_free() {
        let a = split_fingerprint(&["b".into(), "a".into()]);
        assert_eq!(a, split_fingerprint(&["a".into(), "b".into()]));
        assert_ne!(a, split_fingerprint(&["a".into()]));
        assert_eq!(a.len(), 64);
        // sha256("") is a well-known constant.
        assert_eq!(
            split_fingerprint(&[]),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn text_report_flags_undefined_recall() {
        let counts = ConfusionCounts::from_totals([2, 0, 2], [1, 0, 2]).unwrap();
        let r = MetricsReport::from_counts(counts, "fp").unwrap();
        let text = r.render_text();
        assert!(text.contains("recall Unknown  undefined"));
        assert!(text.contains("warning"));
    }
}
