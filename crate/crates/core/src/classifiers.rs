//! OCON and ACON training tasks and decision rules.
//!
//! An OCON subnet for class `c` sees the samples of `c` as positives (target
//! 1.0) and every other sample as a negative (target 0.0). The ACON network
//! sees every sample with a one-hot target over all classes.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigenspace::FeatureVector;
use crate::mlp::{self, Example, Topology, TrainingConfig, TrainingTrace, Weights};
use crate::parallel::{self, PoolConfig, TrainingJob};
use crate::{ClassId, Error, Result};

pub const DEFAULT_OCON_HIDDEN: usize = 20;
pub const DEFAULT_ACON_HIDDEN: usize = 60;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A projected image with its class label.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub features: FeatureVector,
    pub class_id: ClassId,
}

impl Labeled {
    pub fn new(features: impl Into<FeatureVector>, class_id: ClassId) -> Self {
        Labeled {
            features: features.into(),
            class_id,
        }
    }
}

/// Sorted distinct class ids.
pub fn class_set(samples: &[Labeled]) -> Vec<ClassId> {
    samples
        .iter()
        .map(|s| s.class_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Relabels `samples` for the binary subnet of `class_id`, preserving order.
pub fn build_ocon_task(class_id: ClassId, samples: &[Labeled]) -> Result<Vec<Example>> {
    build_ocon_task_capped(class_id, samples, None, 0)
}

/// Like [`build_ocon_task`], optionally keeping at most `max_negatives`
/// negatives chosen by a seeded draw. Kept samples retain their order.
pub fn build_ocon_task_capped(
    class_id: ClassId,
    samples: &[Labeled],
    max_negatives: Option<usize>,
    seed: u64,
) -> Result<Vec<Example>> {
    let positives = samples.iter().filter(|s| s.class_id == class_id).count();
    if positives == 0 {
        return Err(Error::EmptyClass(class_id));
    }
    let negatives = samples.len() - positives;
    if negatives == 0 || max_negatives == Some(0) {
        return Err(Error::NoCounterexamples(class_id));
    }

    let keep_negative: Vec<bool> = match max_negatives {
        Some(cap) if cap < negatives => {
            let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, class_id));
            let mut keep = vec![false; negatives];
            for i in index::sample(&mut rng, negatives, cap) {
                keep[i] = true;
            }
            keep
        }
        _ => vec![true; negatives],
    };

    let mut neg_idx = 0;
    let mut task = Vec::with_capacity(positives + negatives);
    for s in samples {
        if s.class_id == class_id {
            task.push(Example::new(s.features.clone(), vec![1.0]));
        } else {
            if keep_negative[neg_idx] {
                task.push(Example::new(s.features.clone(), vec![0.0]));
            }
            neg_idx += 1;
        }
    }
    Ok(task)
}

/// One-hot targets over the sorted class set. Returns the class order too.
pub fn build_acon_task(samples: &[Labeled]) -> Result<(Vec<ClassId>, Vec<Example>)> {
    let ids = class_set(samples);
    if ids.len() < 2 {
        return Err(Error::InsufficientClasses(ids.len()));
    }
    let task = samples
        .iter()
        .map(|s| {
            let mut target = vec![0.0; ids.len()];
            let pos = ids.binary_search(&s.class_id).expect("id from the same set");
            target[pos] = 1.0;
            Example::new(s.features.clone(), target)
        })
        .collect();
    Ok((ids, task))
}

/// Decorrelates per-class seeds derived from one run seed.
pub fn class_seed(seed: u64, class_id: ClassId) -> u64 {
    seed ^ u64::from(class_id).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// A trained single-output subnet for one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassModel {
    pub class_id: ClassId,
    pub weights: Weights,
    /// Absent for models loaded from a weight store.
    pub trace: Option<TrainingTrace>,
}

impl ClassModel {
    pub fn new(class_id: ClassId, weights: Weights, trace: Option<TrainingTrace>) -> Result<Self> {
        let out = weights.topology().output_size();
        if out != 1 {
            return Err(Error::dims(1, out));
        }
        Ok(ClassModel {
            class_id,
            weights,
            trace,
        })
    }

    pub fn topology(&self) -> Topology {
        self.weights.topology()
    }

    /// Subnet output in (0, 1); higher means "more like this class".
    pub fn score(&self, f: &[f64]) -> Result<f64> {
        Ok(mlp::forward(&self.weights, f)?.output()[0])
    }

    /// Same class, topology and weights; traces are not compared.
    pub fn same_parameters(&self, other: &ClassModel) -> bool {
        self.class_id == other.class_id && self.weights == other.weights
    }
}

/// Anything that scores a feature vector for one class.
pub trait BinaryScorer {
    fn class_id(&self) -> ClassId;
    fn score(&self, f: &[f64]) -> Result<f64>;
}

impl BinaryScorer for ClassModel {
    fn class_id(&self) -> ClassId {
        self.class_id
    }

    fn score(&self, f: &[f64]) -> Result<f64> {
        ClassModel::score(self, f)
    }
}

/// Winning class and every per-class score, in class order.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub class_id: ClassId,
    pub scores: Vec<(ClassId, f64)>,
}

/// Highest score wins; ties go to the lowest class id.
pub fn argmax(scores: &[(ClassId, f64)]) -> Option<ClassId> {
    let mut best: Option<(ClassId, f64)> = None;
    for &(id, s) in scores {
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    best.map(|b| b.0)
}

/// Applies every scorer in turn, without stopping early, and takes the argmax.
pub fn classify_with<S: BinaryScorer>(scorers: &[S], f: &[f64]) -> Result<Decision> {
    let scores = scorers
        .iter()
        .map(|s| Ok((s.class_id(), s.score(f)?)))
        .collect::<Result<Vec<_>>>()?;
    let class_id = argmax(&scores).ok_or(Error::InsufficientClasses(0))?;
    Ok(Decision { class_id, scores })
}

/// `true` (accept) when `score >= threshold`.
pub fn verify(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// One subnet per class, all sharing the same topology.
#[derive(Clone, Debug, PartialEq)]
pub struct OconEnsemble {
    models: Vec<ClassModel>,
    feature_dim: usize,
}

impl OconEnsemble {
    pub fn new(mut models: Vec<ClassModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InsufficientClasses(0));
        }
        models.sort_by_key(|m| m.class_id);
        if let Some(w) = models.windows(2).find(|w| w[0].class_id == w[1].class_id) {
            return Err(Error::InvalidConfig(format!(
                "duplicate model for class {}",
                w[0].class_id
            )));
        }
        let feature_dim = models[0].topology().input_size();
        if let Some(bad) = models.iter().find(|m| m.topology().input_size() != feature_dim) {
            return Err(Error::dims(feature_dim, bad.topology().input_size()));
        }
        Ok(OconEnsemble {
            models,
            feature_dim,
        })
    }

    pub fn models(&self) -> &[ClassModel] {
        &self.models
    }

    pub fn model(&self, class_id: ClassId) -> Option<&ClassModel> {
        self.models
            .binary_search_by_key(&class_id, |m| m.class_id)
            .ok()
            .map(|i| &self.models[i])
    }

    pub fn class_ids(&self) -> Vec<ClassId> {
        self.models.iter().map(|m| m.class_id).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classify(&self, f: &FeatureVector) -> Result<Decision> {
        classify_ocon(self, f)
    }
}

pub fn classify_ocon(ensemble: &OconEnsemble, f: &FeatureVector) -> Result<Decision> {
    if f.len() != ensemble.feature_dim {
        return Err(Error::dims(ensemble.feature_dim, f.len()));
    }
    classify_with(&ensemble.models, f.as_slice())
}

/// One network with an output per class.
#[derive(Clone, Debug, PartialEq)]
pub struct AconModel {
    pub class_ids: Vec<ClassId>,
    pub weights: Weights,
    pub trace: Option<TrainingTrace>,
}

impl AconModel {
    pub fn new(class_ids: Vec<ClassId>, weights: Weights, trace: Option<TrainingTrace>) -> Result<Self> {
        if class_ids.len() < 2 {
            return Err(Error::InsufficientClasses(class_ids.len()));
        }
        let out = weights.topology().output_size();
        if out != class_ids.len() {
            return Err(Error::dims(class_ids.len(), out));
        }
        Ok(AconModel {
            class_ids,
            weights,
            trace,
        })
    }

    pub fn topology(&self) -> Topology {
        self.weights.topology()
    }

    pub fn classify(&self, f: &FeatureVector) -> Result<Decision> {
        classify_acon(self, f)
    }
}

pub fn classify_acon(model: &AconModel, f: &FeatureVector) -> Result<Decision> {
    let out = mlp::forward(&model.weights, f.as_slice())?.into_output();
    let scores: Vec<(ClassId, f64)> = model.class_ids.iter().copied().zip(out).collect();
    let class_id = argmax(&scores).expect("at least two outputs");
    Ok(Decision { class_id, scores })
}

/// Options shared by OCON training entry points.
#[derive(Clone, Debug, PartialEq)]
pub struct OconOptions {
    /// Hidden layer sizes shared by every subnet.
    pub hidden: Vec<usize>,
    /// Optional cap on negatives per subnet.
    pub max_negatives: Option<usize>,
}

impl Default for OconOptions {
    fn default() -> Self {
        OconOptions {
            hidden: vec![DEFAULT_OCON_HIDDEN],
            max_negatives: None,
        }
    }
}

/// One training job per class. Each job's seed is derived from
/// `config.seed` and its class id.
pub fn ocon_jobs(
    samples: &[Labeled],
    options: &OconOptions,
    config: &TrainingConfig,
) -> Result<Vec<TrainingJob>> {
    let ids = class_set(samples);
    if ids.len() < 2 {
        return Err(match ids.first() {
            Some(&only) => Error::NoCounterexamples(only),
            None => Error::InsufficientClasses(0),
        });
    }
    let dim = samples[0].features.len();
    let topology = Topology::with_hidden(dim, &options.hidden, 1)?;
    ids.iter()
        .map(|&class_id| {
            let task = build_ocon_task_capped(class_id, samples, options.max_negatives, config.seed)?;
            Ok(TrainingJob {
                class_id,
                task,
                topology: topology.clone(),
                config: TrainingConfig {
                    seed: class_seed(config.seed, class_id),
                    ..config.clone()
                },
            })
        })
        .collect()
}

/// Trains one subnet per class on the worker pool. Fails with the first
/// per-class error (in class order) if any job fails.
pub fn train_ocon(
    samples: &[Labeled],
    options: &OconOptions,
    config: &TrainingConfig,
    pool: &PoolConfig,
) -> Result<OconEnsemble> {
    let jobs = ocon_jobs(samples, options, config)?;
    let outcome = parallel::run_pool(jobs, pool)?;
    let mut models = Vec::with_capacity(outcome.results.len());
    for r in outcome.results {
        models.push(r.result?);
    }
    OconEnsemble::new(models)
}

pub fn train_acon(samples: &[Labeled], hidden: &[usize], config: &TrainingConfig) -> Result<AconModel> {
    let (ids, task) = build_acon_task(samples)?;
    let topology = Topology::with_hidden(samples[0].features.len(), hidden, ids.len())?;
    let (weights, trace) = mlp::train(&topology, &task, config)?;
    AconModel::new(ids, weights, Some(trace))
}
