use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sctf_core::classifier::{
    hyperparameter_grid, predict_label, train_with_report, write_model, MachineReport, MurmurLabel,
    SvmConfig, SvmModel,
};
use sctf_core::contextualizer::{read_embeddings_csv, Embedding, EmbeddingKind, EmbeddingSet};
use sctf_core::evaluation::{
    aggregate_scores, split_fingerprint, weighted_accuracy, ConfusionCounts,
};
use sctf_core::pipeline::{oversample, ManifestRow, SplitSide};
use sctf_core::{Error, Result};

use super::embed::{patient_of, read_manifest_checked};
use super::prepare::split_ids;
use crate::artifacts::{open_read, write_json, write_with, Layout, ModelInfo};
use crate::config::RunConfig;

/// Embeddings joined with their patient's label and split side.
#[derive(Clone, Debug)]
pub struct LabelledSet {
    pub kind: EmbeddingKind,
    pub train: Vec<(Embedding, MurmurLabel)>,
    pub test: Vec<(Embedding, MurmurLabel)>,
}

pub fn label_embeddings(set: EmbeddingSet, rows: &[ManifestRow]) -> Result<LabelledSet> {
    let patients: HashMap<&str, (MurmurLabel, SplitSide)> = rows
        .iter()
        .map(|r| (r.patient_id.as_str(), (r.label, r.split)))
        .collect();
    let mut out = LabelledSet {
        kind: set.kind,
        train: Vec::new(),
        test: Vec::new(),
    };
    for e in set.embeddings {
        let (label, side) = *patients.get(patient_of(&e.provenance)).ok_or_else(|| {
            Error::Data(format!(
                "embedding '{}' has no patient in the manifest",
                e.provenance
            ))
        })?;
        match side {
            SplitSide::Train => out.train.push((e, label)),
            SplitSide::Test => out.test.push((e, label)),
        }
    }
    if out.train.is_empty() {
        return Err(Error::DegenerateData("no training embeddings".into()));
    }
    Ok(out)
}

pub fn load_labelled(
    layout: &Layout,
    kind: EmbeddingKind,
) -> Result<(LabelledSet, Vec<ManifestRow>)> {
    let rows = read_manifest_checked(layout)?;
    let path = layout.embeddings_csv(kind);
    let set = read_embeddings_csv(open_read(&path)?, &path)?;
    if set.kind != kind {
        return Err(Error::Data(format!(
            "{} holds {} embeddings, expected {}",
            path.display(),
            set.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok((label_embeddings(set, &rows)?, rows))
}

/// Patient-level stratified folds: each class is shuffled and dealt round-robin.
pub fn patient_folds(
    patients: &BTreeMap<String, MurmurLabel>,
    k: usize,
    seed: u64,
) -> HashMap<String, usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = HashMap::new();
    let mut next = 0;
    for label in MurmurLabel::ALL {
        let mut ids: Vec<&String> = patients
            .iter()
            .filter(|(_, &l)| l == label)
            .map(|(id, _)| id)
            .collect();
        ids.shuffle(&mut rng);
        for id in ids {
            folds.insert(id.clone(), next % k);
            next += 1;
        }
    }
    folds
}

fn fit(
    items: &[(Embedding, MurmurLabel)],
    cfg: &SvmConfig,
    seed: u64,
) -> Result<(SvmModel, Vec<MachineReport>)> {
    let balanced = oversample(items, |x| x.1, seed)?;
    let (x, y): (Vec<Embedding>, Vec<MurmurLabel>) = balanced.into_iter().unzip();
    train_with_report(&x, &y, cfg)
}

/// Patient-level weighted accuracy of `model` on `items`.
fn patient_w_acc(
    model: &SvmModel,
    items: &[&(Embedding, MurmurLabel)],
    cfg: &RunConfig,
) -> Result<f64> {
    let mut per_patient: BTreeMap<&str, (MurmurLabel, Vec<_>)> = BTreeMap::new();
    for (e, label) in items {
        per_patient
            .entry(patient_of(&e.provenance))
            .or_insert_with(|| (*label, Vec::new()))
            .1
            .push(model.predict_scores(e)?);
    }
    let mut counts = ConfusionCounts::default();
    for (truth, scores) in per_patient.values() {
        counts.record(
            *truth,
            predict_label(&aggregate_scores(scores, cfg.aggregation)?),
        );
    }
    weighted_accuracy(&counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub c: f64,
    pub gamma: f64,
    /// `None` where the fold could not be trained.
    pub folds: Vec<Option<f64>>,
}

impl CvRow {
    pub fn mean(&self) -> Option<f64> {
        let vals: Option<Vec<f64>> = self.folds.iter().copied().collect();
        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Scores every grid point by patient-level cross-validation on the training side.
pub fn cross_validate(data: &LabelledSet, cfg: &RunConfig) -> Result<Vec<CvRow>> {
    let dim = data.train[0].0.dim();
    let patients: BTreeMap<String, MurmurLabel> = data
        .train
        .iter()
        .map(|(e, l)| (patient_of(&e.provenance).to_string(), *l))
        .collect();
    let k = cfg.train.cv_folds;
    let folds = patient_folds(&patients, k, cfg.seeds.split);
    let grid = hyperparameter_grid(&cfg.svm, dim);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(g, f)| {
            let fold_of = |e: &Embedding| folds[patient_of(&e.provenance)];
            let fit_items: Vec<(Embedding, MurmurLabel)> = data
                .train
                .iter()
                .filter(|(e, _)| fold_of(e) != f)
                .cloned()
                .collect();
            let held: Vec<&(Embedding, MurmurLabel)> =
                data.train.iter().filter(|(e, _)| fold_of(e) == f).collect();
            if held.is_empty() {
                return Ok(None);
            }
            match fit(&fit_items, &grid[g], cfg.seeds.oversample) {
                Ok((model, _)) => patient_w_acc(&model, &held, cfg).map(Some),
                Err(e @ (Error::DegenerateData(_) | Error::Data(_))) => {
                    log::warn!("fold {} for c={} skipped: {e}", f + 1, grid[g].c);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, svm)| CvRow {
            c: svm.c,
            gamma: svm.gamma_for(dim),
            folds: scores[g * k..(g + 1) * k].to_vec(),
        })
        .collect())
}

pub fn write_cv_csv<W: Write>(
    rows: &[CvRow],
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let k = rows.first().map_or(0, |r| r.folds.len());
    let fold_cols: Vec<String> = (1..=k).map(|i| format!("fold_{i}")).collect();
    writeln!(out, "c,gamma,{},mean_w_acc", fold_cols.join(","))?;
    let field = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in rows {
        let folds: Vec<String> = r.folds.iter().map(|&v| field(v)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            r.c,
            r.gamma,
            folds.join(","),
            field(r.mean())
        )?;
    }
    Ok(())
}

/// First grid point with the highest mean score.
pub fn select(rows: &[CvRow]) -> Option<&CvRow> {
    let mut best: Option<(&CvRow, f64)> = None;
    for r in rows {
        if let Some(m) = r.mean() {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((r, m));
            }
        }
    }
    best.map(|(r, _)| r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub kind: EmbeddingKind,
    pub cv: Vec<CvRow>,
    pub c: f64,
    pub gamma: f64,
    pub training_accuracy: f64,
    pub training_examples: usize,
    pub machines: Vec<MachineReport>,
}

impl TrainSummary {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for r in &self.cv {
            let mean = r
                .mean()
                .map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
            s += &format!(
                "cv c={:<5} gamma={:<12.6e} mean_w_acc={mean}\n",
                r.c, r.gamma
            );
        }
        s += &format!("selected c={} gamma={:.6e}\n", self.c, self.gamma);
        for m in &self.machines {
            s += &format!(
                "machine {:<8} support={:<6} iterations={:<8} kkt_gap={:.2e}{}\n",
                m.label.as_str(),
                m.n_support,
                m.iterations,
                m.kkt_gap,
                if m.converged { "" } else { " (not converged)" }
            );
        }
        s += &format!(
            "training accuracy {:.4} over {} examples\n",
            self.training_accuracy, self.training_examples
        );
        s
    }
}

/// Picks hyperparameters, trains on the oversampled training side and writes the model.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let kind = cfg.embedding_kind();
    let (data, rows) = load_labelled(&layout, kind)?;
    let dim = data.train[0].0.dim();

    let cv = if cfg.train.grid_search {
        cross_validate(&data, cfg)?
    } else {
        Vec::new()
    };
    for r in &cv {
        log::info!(
            "cv c={} gamma={} folds={:?} mean={:?}",
            r.c,
            r.gamma,
            r.folds,
            r.mean()
        );
    }
    let svm = match select(&cv) {
        Some(best) => SvmConfig {
            c: best.c,
            gamma: Some(best.gamma),
            ..cfg.svm.clone()
        },
        None => {
            if cfg.train.grid_search {
                log::warn!(
                    "cross-validation produced no usable score; keeping the configured c and gamma"
                );
            }
            cfg.svm.clone()
        }
    };
    if !cv.is_empty() {
        write_with(&layout.cv(kind), |out| {
            write_cv_csv(&cv, &cfg.preamble(), out)
        })?;
    }

    let (model, machines) = fit(&data.train, &svm, cfg.seeds.oversample)?;
    let correct = data
        .train
        .iter()
        .map(|(e, l)| model.predict_scores(e).map(|s| predict_label(&s) == *l))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let training_accuracy = correct as f64 / data.train.len() as f64;

    let (_, test_ids) = split_ids(&rows);
    let info = ModelInfo {
        kind,
        split_fingerprint: split_fingerprint(&test_ids),
        c: svm.c,
        gamma: svm.gamma_for(dim),
        training_accuracy,
        training_examples: data.train.len(),
        config: cfg.clone(),
    };
    write_with(&layout.model(kind), |out| write_model(&model, out))?;
    write_json(&layout.model_info(kind), &info)?;
    Ok(TrainSummary {
        kind,
        cv,
        c: info.c,
        gamma: info.gamma,
        training_accuracy,
        training_examples: info.training_examples,
        machines,
    })
}
