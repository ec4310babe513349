use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::frontend::{AugmentationPolicy, FeatureMap, MfccExtractor};

/// Shape of one episodic batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeShape {
    /// `classes` groups of `support` + `query` clips.
    Prototypical {
        classes: usize,
        support: usize,
        query: usize,
    },
    /// `classes` groups of `per_class` clips, no support/query split.
    Pooled { classes: usize, per_class: usize },
}

impl EpisodeShape {
    pub fn classes(&self) -> usize {
        match *self {
            EpisodeShape::Prototypical { classes, .. } | EpisodeShape::Pooled { classes, .. } => {
                classes
            }
        }
    }

    pub fn per_class(&self) -> usize {
        match *self {
            EpisodeShape::Prototypical { support, query, .. } => support + query,
            EpisodeShape::Pooled { per_class, .. } => per_class,
        }
    }

    pub fn support(&self) -> usize {
        match *self {
            EpisodeShape::Prototypical { support, .. } => support,
            EpisodeShape::Pooled { .. } => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.classes() * self.per_class()
    }
}

/// Episode sizes for both batch layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub proto_classes: usize,
    pub support: usize,
    pub query: usize,
    pub triplet_classes: usize,
    pub triplet_per_class: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            proto_classes: 40,
            support: 10,
            query: 30,
            triplet_classes: 80,
            triplet_per_class: 20,
        }
    }
}

impl EpisodeConfig {
    pub fn prototypical(&self) -> EpisodeShape {
        EpisodeShape::Prototypical {
            classes: self.proto_classes,
            support: self.support,
            query: self.query,
        }
    }

    pub fn pooled(&self) -> EpisodeShape {
        EpisodeShape::Pooled {
            classes: self.triplet_classes,
            per_class: self.triplet_per_class,
        }
    }
}

/// Clip indices of one episode, grouped by class. Within a prototypical
/// group the first `support` entries are the support set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodicBatch {
    pub shape: EpisodeShape,
    /// Dataset class ids, in episode order.
    pub classes: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

impl EpisodicBatch {
    /// All clip indices, class-major.
    pub fn flat(&self) -> Vec<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    /// Episode-local label (0-based group index) of every flat position.
    pub fn flat_labels(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, v)| std::iter::repeat_n(g, v.len()))
            .collect()
    }
}

/// Draws classes, then clips within each class, all without replacement.
pub fn build_episode<R: Rng + ?Sized>(
    by_class: &[Vec<usize>],
    shape: EpisodeShape,
    rng: &mut R,
) -> Result<EpisodicBatch> {
    let m = shape.classes();
    let need = shape.per_class();
    if m == 0 || need == 0 {
        return Err(Error::InvalidArgument("episode shape has zero size".into()));
    }
    let eligible: Vec<usize> = (0..by_class.len())
        .filter(|&c| by_class[c].len() >= need)
        .collect();
    if eligible.len() < m {
        return Err(Error::Dataset(format!(
            "episode needs {m} classes with at least {need} clips, dataset has {}",
            eligible.len()
        )));
    }
    let classes: Vec<usize> = sample(rng, eligible.len(), m)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    let groups = classes
        .iter()
        .map(|&c| {
            let pool = &by_class[c];
            sample(rng, pool.len(), need)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        })
        .collect();
    Ok(EpisodicBatch {
        shape,
        classes,
        groups,
    })
}

/// Loads, augments and featurizes clips in order.
pub fn extract_features<R: Rng + ?Sized>(
    dataset: &Dataset,
    indices: &[usize],
    mfcc: &MfccExtractor,
    augment: &AugmentationPolicy,
    rng: &mut R,
) -> Result<Vec<FeatureMap>> {
    let len = mfcc.config().clip_len();
    indices
        .iter()
        .map(|&i| {
            let w = dataset.load_audio(i, len)?;
            mfcc.compute(&augment.apply(&w, rng))
        })
        .collect()
}
