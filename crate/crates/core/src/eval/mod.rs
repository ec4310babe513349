//! K-shot N-way open-set evaluation.

mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{auroc, compute_metrics, false_acceptance, gamma_candidates, tune_gamma, Rates};

use crate::dataset::Dataset;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::frontend::{FrontendConfig, MfccExtractor};
use crate::linalg::Matrix;
use crate::openset::{decide, enroll, ClassifierKind, EnrollOptions, ScoreVector};
use crate::trainer::TrainedModel;

pub const DEFAULT_POSITIVE: [&str; 10] = [
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go",
];
pub const DEFAULT_FILLER: [&str; 5] = ["backward", "forward", "visual", "follow", "learn"];

const EMBED_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub n_way: usize,
    pub k_shot: usize,
    pub repetitions: usize,
    pub far_target: f64,
    pub seed: u64,
    pub positive: Vec<String>,
    /// Empty means every test class that is neither positive nor filler.
    pub negative: Vec<String>,
    pub filler: Vec<String>,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            n_way: 10,
            k_shot: 10,
            repetitions: 10,
            far_target: 0.05,
            seed: 0,
            positive: DEFAULT_POSITIVE.iter().map(|s| s.to_string()).collect(),
            negative: Vec::new(),
            filler: DEFAULT_FILLER.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_way == 0 || self.k_shot == 0 || self.repetitions == 0 {
            return bad("ways, shots and repetitions must be positive".into());
        }
        if self.positive.len() < self.n_way {
            return bad(format!(
                "{} positive classes for a {}-way protocol",
                self.positive.len(),
                self.n_way
            ));
        }
        if !(self.far_target > 0.0 && self.far_target < 1.0) {
            return bad(format!("FAR target {} outside (0, 1)", self.far_target));
        }
        for (a, an, b, bn) in [
            (&self.positive, "positive", &self.negative, "negative"),
            (&self.positive, "positive", &self.filler, "filler"),
            (&self.negative, "negative", &self.filler, "filler"),
        ] {
            if let Some(c) = a.iter().find(|c| b.contains(c)) {
                return bad(format!("class {c:?} is both {an} and {bn}"));
            }
        }
        Ok(())
    }

    fn negatives_for(&self, test: &Dataset) -> Vec<String> {
        if !self.negative.is_empty() {
            return self.negative.clone();
        }
        test.class_names()
            .iter()
            .filter(|c| !self.positive.contains(c) && !self.filler.contains(c))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionResult {
    pub gamma: f64,
    pub rates: Rates,
    pub auroc: f64,
    pub classes: Vec<String>,
    /// Rows: true class (0 = unknown), columns: decision.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classifier: ClassifierKind,
    pub n_way: usize,
    pub k_shot: usize,
    pub far_target: f64,
    pub seed: u64,
    pub repetitions: Vec<RepetitionResult>,
}

impl EvalReport {
    fn collect(&self, f: impl Fn(&RepetitionResult) -> f64) -> Vec<f64> {
        self.repetitions.iter().map(f).collect()
    }

    pub fn metric_values(&self, metric: &str) -> Option<Vec<f64>> {
        Some(match metric {
            "acc_at_far" => self.collect(|r| r.rates.acc),
            "frr_at_far" => self.collect(|r| r.rates.frr),
            "far" => self.collect(|r| r.rates.far),
            "wrong_class" => self.collect(|r| r.rates.wrong),
            "auroc" => self.collect(|r| r.auroc),
            "gamma" => self.collect(|r| r.gamma),
            _ => return None,
        })
    }

    pub fn summary(&self, metric: &str) -> Option<Summary> {
        self.metric_values(metric).map(|v| Summary::of(&v))
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.collect(|r| r.gamma)
    }

    const METRICS: [&'static str; 6] = [
        "acc_at_far",
        "frr_at_far",
        "far",
        "wrong_class",
        "auroc",
        "gamma",
    ];

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "open-set keyword evaluation");
        let _ = writeln!(s, "classifier   {}", self.classifier);
        let _ = writeln!(s, "ways         {}", self.n_way);
        let _ = writeln!(s, "shots        {}", self.k_shot);
        let _ = writeln!(s, "repetitions  {}", self.repetitions.len());
        let _ = writeln!(s, "far_target   {}", self.far_target);
        let _ = writeln!(s, "seed         {}", self.seed);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>8} {:>8}", "metric", "mean", "std");
        for m in Self::METRICS {
            let v = self.summary(m).expect("known metric");
            let _ = writeln!(s, "{m:<12} {:>8.4} {:>8.4}", v.mean, v.std);
        }
        for (i, r) in self.repetitions.iter().enumerate() {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "repetition {i}: gamma={:.6} acc={:.4} frr={:.4} far={:.4} auroc={:.4}",
                r.gamma, r.rates.acc, r.rates.frr, r.rates.far, r.auroc
            );
            let _ = writeln!(s, "classes: {}", r.classes.join(" "));
            let _ = writeln!(s, "confusion (rows true, cols decided; 0 = unknown):");
            for row in &r.confusion {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>4}")).collect();
                let _ = writeln!(s, "{}", cells.join(""));
            }
        }
        s
    }

    /// `metric,repetition,value` records.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,repetition,value\n");
        for m in Self::METRICS {
            for (i, v) in self.metric_values(m).expect("known metric").iter().enumerate() {
                let _ = writeln!(s, "{m},{i},{v}");
            }
        }
        s
    }

    /// Writes `report.txt` and `metrics.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.txt", self.to_text()), ("metrics.csv", self.to_csv())] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Eval-mode embeddings of the given clips, one row per clip.
pub fn embed_clips(
    encoder: &Encoder,
    mfcc: &MfccExtractor,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Matrix> {
    let dim = encoder.embedding_dim();
    let mut out = Vec::with_capacity(indices.len() * dim);
    let len = mfcc.config().clip_len();
    for chunk in indices.chunks(EMBED_CHUNK) {
        let feats = chunk
            .iter()
            .map(|&i| mfcc.compute(&dataset.load_audio(i, len)?))
            .collect::<Result<Vec<_>>>()?;
        out.extend_from_slice(encoder.embed(&feats)?.as_slice());
    }
    Matrix::from_vec(indices.len(), dim, out)
}

/// Clip indices of `classes` in `ds`, erroring on a missing class.
fn class_clips(ds: &Dataset, classes: &[String], what: &str) -> Result<Vec<Vec<usize>>> {
    let by = ds.by_class();
    classes
        .iter()
        .map(|c| {
            ds.class_id(c)
                .map(|id| by[id].clone())
                .ok_or_else(|| Error::Dataset(format!("{what} class {c:?} has no clips")))
        })
        .collect()
}

/// Embeds each distinct clip once and hands out rows by clip index.
struct EmbeddingCache {
    rows: BTreeMap<usize, usize>,
    emb: Matrix,
}

impl EmbeddingCache {
    fn build(
        encoder: &Encoder,
        mfcc: &MfccExtractor,
        ds: &Dataset,
        clips: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut idx: Vec<usize> = clips.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        let emb = embed_clips(encoder, mfcc, ds, &idx)?;
        Ok(Self {
            rows: idx.iter().enumerate().map(|(r, &i)| (i, r)).collect(),
            emb,
        })
    }

    fn get(&self, clips: &[usize]) -> Matrix {
        self.emb.select_rows(&clips.iter().map(|c| self.rows[c]).collect::<Vec<_>>())
    }
}

/// Runs every repetition: draw shots (and filler clips) from `enroll_pool`,
/// enroll, score all test clips of the drawn keywords and of the negative
/// classes, tune the threshold on the negatives and compute the rates.
pub fn run_eval(
    model: &TrainedModel,
    kind: ClassifierKind,
    protocol: &EvalProtocol,
    enroll_pool: &Dataset,
    test: &Dataset,
    frontend: &FrontendConfig,
) -> Result<EvalReport> {
    protocol.validate()?;
    let mfcc = MfccExtractor::new(frontend)?;
    let negatives = protocol.negatives_for(test);
    if negatives.is_empty() {
        return Err(Error::Dataset("no negative classes in the test set".into()));
    }
    let pos_enroll = class_clips(enroll_pool, &protocol.positive, "positive")?;
    for (c, clips) in protocol.positive.iter().zip(&pos_enroll) {
        if clips.len() < protocol.k_shot {
            return Err(Error::Dataset(format!(
                "class {c:?} has {} enrollment clips, {} needed",
                clips.len(),
                protocol.k_shot
            )));
        }
    }
    let filler_pool: Vec<usize> = if kind == ClassifierKind::OpenNcm {
        let f: Vec<usize> = class_clips(enroll_pool, &protocol.filler, "filler")?
            .into_iter()
            .flatten()
            .collect();
        if f.len() < protocol.k_shot {
            return Err(Error::Dataset(format!(
                "{} filler clips, {} needed",
                f.len(),
                protocol.k_shot
            )));
        }
        f
    } else {
        Vec::new()
    };
    let pos_test = class_clips(test, &protocol.positive, "positive")?;
    let neg_test: Vec<usize> = class_clips(test, &negatives, "negative")?
        .into_iter()
        .flatten()
        .collect();

    let enc = &model.encoder;
    let enroll_cache = EmbeddingCache::build(
        enc,
        &mfcc,
        enroll_pool,
        pos_enroll.iter().flatten().chain(&filler_pool).copied(),
    )?;
    let test_cache = EmbeddingCache::build(
        enc,
        &mfcc,
        test,
        pos_test.iter().flatten().chain(&neg_test).copied(),
    )?;
    let opts = EnrollOptions {
        normalize: model.wants_normalization(),
        ..Default::default()
    };
    let neg_emb = test_cache.get(&neg_test);

    let mut reps = Vec::with_capacity(protocol.repetitions);
    for rep in 0..protocol.repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
        rng.set_stream(rep as u64);
        let chosen: Vec<usize> = if protocol.positive.len() == protocol.n_way {
            (0..protocol.n_way).collect()
        } else {
            sample(&mut rng, protocol.positive.len(), protocol.n_way).into_vec()
        };
        let names: Vec<String> = chosen.iter().map(|&c| protocol.positive[c].clone()).collect();
        let groups: Vec<Matrix> = chosen
            .iter()
            .map(|&c| {
                let pool = &pos_enroll[c];
                let shots: Vec<usize> = sample(&mut rng, pool.len(), protocol.k_shot)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
                enroll_cache.get(&shots)
            })
            .collect();
        let filler = (!filler_pool.is_empty()).then(|| {
            let pick: Vec<usize> = sample(&mut rng, filler_pool.len(), protocol.k_shot)
                .into_iter()
                .map(|i| filler_pool[i])
                .collect();
            enroll_cache.get(&pick)
        });
        let enrollment = enroll(
            kind,
            &names,
            &groups,
            filler.as_ref(),
            model.generator.as_ref(),
            opts,
        )?;

        let mut positives = Vec::new();
        for (label, &c) in chosen.iter().enumerate() {
            let emb = test_cache.get(&pos_test[c]);
            for row in emb.iter_rows() {
                positives.push((label + 1, enrollment.score(row)?));
            }
        }
        let negs = neg_emb
            .iter_rows()
            .map(|r| enrollment.score(r))
            .collect::<Result<Vec<ScoreVector>>>()?;
        let gamma = tune_gamma(&negs, protocol.far_target)?;
        let rates = compute_metrics(&positives, &negs, gamma)?;
        let pos_scores: Vec<f64> = positives.iter().map(|(_, p)| p.max_known()).collect();
        let neg_scores: Vec<f64> = negs.iter().map(|p| p.max_known()).collect();
        let area = auroc(&pos_scores, &neg_scores)?;
        let n = protocol.n_way;
        let mut confusion = vec![vec![0usize; n + 1]; n + 1];
        for (label, p) in &positives {
            confusion[*label][decide(p.probs(), gamma)] += 1;
        }
        for p in &negs {
            confusion[0][decide(p.probs(), gamma)] += 1;
        }
        log::info!(
            "repetition {rep}: gamma {gamma:.4} acc {:.4} frr {:.4} far {:.4} auroc {area:.4}",
            rates.acc,
            rates.frr,
            rates.far
        );
        reps.push(RepetitionResult {
            gamma,
            rates,
            auroc: area,
            classes: names,
            confusion,
        });
    }
    Ok(EvalReport {
        classifier: kind,
        n_way: protocol.n_way,
        k_shot: protocol.k_shot,
        far_target: protocol.far_target,
        seed: protocol.seed,
        repetitions: reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_protocol_lists() {
        let p = EvalProtocol::default();
        assert_eq!(p.positive.len(), 10);
        assert_eq!(p.filler.len(), 5);
        assert_eq!(p.repetitions, 10);
        p.validate().unwrap();
    }

    #[test]
    fn overlapping_lists_rejected() {
        let mut p = EvalProtocol::default();
        p.filler.push("yes".into());
        assert!(p.validate().is_err());
    }

    #[test]
    fn sample_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of(&[0.3]).std, 0.0);
    }
}
