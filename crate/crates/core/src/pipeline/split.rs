use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PatientRecord;
use crate::classifier::MurmurLabel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PatientRecord>,
    pub test: Vec<PatientRecord>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn test_ids(&self) -> Vec<String> {
        self.test.iter().map(|r| r.patient_id.clone()).collect()
    }
}

/// Fails if any patient id appears on both sides.
pub fn check_leakage(train_ids: &[String], test_ids: &[String]) -> Result<()> {
    let train: HashSet<&str> = train_ids.iter().map(String::as_str).collect();
    let mut shared: Vec<&str> = test_ids
        .iter()
        .map(String::as_str)
        .filter(|id| train.contains(id))
        .collect();
    if shared.is_empty() {
        return Ok(());
    }
    shared.sort_unstable();
    shared.dedup();
    Err(Error::Leakage(shared.join(", ")))
}

/// Integer allocation of `total` items proportional to `quotas`, each entry
/// within one of its real quota (largest remainder, ties to the lower index).
pub fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        alloc[k] += 1;
    }
    alloc
}

/// Seeded, label-stratified patient split. Records are ordered by patient id
/// first, so the result depends only on the set of patients and the seed.
pub fn patient_split(
    records: &[PatientRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if records.is_empty() {
        return Err(Error::DegenerateData("no patients to split".into()));
    }
    let mut sorted: Vec<&PatientRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    if let Some(w) = sorted
        .windows(2)
        .find(|w| w[0].patient_id == w[1].patient_id)
    {
        return Err(Error::Data(format!(
            "duplicate patient id {}",
            w[0].patient_id
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<&PatientRecord>> = MurmurLabel::ALL
        .iter()
        .map(|&l| sorted.iter().copied().filter(|r| r.label == l).collect())
        .collect();
    for g in &mut groups {
        g.shuffle(&mut rng);
    }

    let small: Vec<bool> = groups
        .iter()
        .map(|g| !g.is_empty() && g.len() < 2)
        .collect();
    for (label, _) in MurmurLabel::ALL.iter().zip(&small).filter(|(_, &s)| s) {
        log::warn!("class {label} has fewer than 2 patients; kept whole in the training split");
    }
    let quotas: Vec<f64> = groups
        .iter()
        .zip(&small)
        .map(|(g, &s)| {
            if s {
                0.0
            } else {
                g.len() as f64 * train_fraction
            }
        })
        .collect();
    let stratifiable: usize = groups
        .iter()
        .zip(&small)
        .filter(|(_, &s)| !s)
        .map(|(g, _)| g.len())
        .sum();
    let total = (stratifiable as f64 * train_fraction).round() as usize;
    let alloc = largest_remainder(&quotas, total);

    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((g, &n_train), &s) in groups.iter().zip(&alloc).zip(&small) {
        let n_train = if s { g.len() } else { n_train };
        train.extend(g[..n_train].iter().map(|&r| r.clone()));
        test.extend(g[n_train..].iter().map(|&r| r.clone()));
    }
    train.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    test.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));

    let split = DatasetSplit { train, test, seed };
    let train_ids: Vec<String> = split.train.iter().map(|r| r.patient_id.clone()).collect();
    check_leakage(&train_ids, &split.test_ids())?;
    Ok(split)
}

/// Duplicates minority-class items (drawn with replacement) until every class
/// matches the largest. Originals keep their order; copies follow, grouped by
/// class in score order.
pub fn oversample<T: Clone>(
    items: &[T],
    label_of: impl Fn(&T) -> MurmurLabel,
    seed: u64,
) -> Result<Vec<T>> {
    let mut by_class: [Vec<usize>; 3] = Default::default();
    for (i, item) in items.iter().enumerate() {
        by_class[label_of(item).index()].push(i);
    }
    if let Some(k) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::DegenerateData(format!(
            "cannot oversample: class {} has no examples",
            MurmurLabel::ALL[k]
        )));
    }
    let majority = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = items.to_vec();
    for members in &by_class {
        for _ in members.len()..majority {
            let pick = members[rng.random_range(0..members.len())];
            out.push(items[pick].clone());
        }
    }
    Ok(out)
}
