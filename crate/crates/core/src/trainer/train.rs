use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dproto::{DummyProtoGenerator, DEFAULT_DUMMIES};
use super::episode::{build_episode, extract_features, EpisodeConfig, EpisodeShape, EpisodicBatch};
use super::losses::{ap_loss, open_proto_loss, pn_loss, sample_triplets, tl_loss};
use super::optim::{Adam, LrSchedule};
use crate::container::{Container, Precision};
use crate::dataset::Dataset;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::frontend::{AugmentationPolicy, FeatureMap, FrontendConfig, MfccExtractor};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "PN")]
    Pn,
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "TL")]
    Tl,
    #[serde(rename = "DPROTO")]
    Dproto,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Pn => "PN",
            LossKind::Ap => "AP",
            LossKind::Tl => "TL",
            LossKind::Dproto => "DPROTO",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PN" => Ok(LossKind::Pn),
            "AP" => Ok(LossKind::Ap),
            "TL" => Ok(LossKind::Tl),
            "DPROTO" => Ok(LossKind::Dproto),
            _ => Err(Error::InvalidArgument(format!("unknown loss kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    pub margin: f64,
    pub ap_scale_init: f64,
    pub ap_bias_init: f64,
    /// Episode classes relabelled as unknown for the open-set loss.
    pub unknown_classes: usize,
    pub dummies: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Tl,
            margin: 0.5,
            ap_scale_init: 10.0,
            ap_bias_init: -5.0,
            unknown_classes: 16,
            dummies: DEFAULT_DUMMIES,
        }
    }
}

pub const AP_MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub lr: LrSchedule,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 40,
            episodes_per_epoch: 400,
            lr: LrSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn total_episodes(&self) -> usize {
        self.epochs * self.episodes_per_epoch
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub schedule: TrainSchedule,
    pub episode: EpisodeConfig,
}

impl TrainConfig {
    pub fn episode_shape(&self) -> EpisodeShape {
        match self.loss.kind {
            LossKind::Tl => self.episode.pooled(),
            _ => self.episode.prototypical(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.loss.margin >= 0.0) {
            return bad(format!("margin {} must be non-negative", self.loss.margin));
        }
        if self.schedule.epochs == 0 || self.schedule.episodes_per_epoch == 0 {
            return bad("schedule needs at least one episode".into());
        }
        self.schedule.lr.validate()?;
        let shape = self.episode_shape();
        match self.loss.kind {
            LossKind::Tl => {
                if shape.classes() < 2 || shape.per_class() < 2 {
                    return bad("triplet episodes need 2 classes with 2 clips each".into());
                }
            }
            LossKind::Pn | LossKind::Ap => {
                if shape.classes() < 2 || self.episode.support == 0 || self.episode.query == 0 {
                    return bad("prototypical episodes need 2 classes, support and query".into());
                }
            }
            LossKind::Dproto => {
                if self.loss.unknown_classes >= shape.classes()
                    || shape.classes() - self.loss.unknown_classes < 2
                {
                    return bad(format!(
                        "{} unknown classes leave fewer than 2 known classes out of {}",
                        self.loss.unknown_classes,
                        shape.classes()
                    ));
                }
                if self.loss.dummies == 0 || self.episode.support == 0 || self.episode.query == 0 {
                    return bad("open-set episodes need dummies, support and query".into());
                }
            }
        }
        if self.loss.kind == LossKind::Ap && !(self.loss.ap_scale_init >= AP_MIN_SCALE) {
            return bad("angular scale must start positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub epoch: usize,
    pub episode: usize,
    pub loss: f64,
    pub lr: f64,
}

impl EpisodeRecord {
    /// `epoch,episode,loss,lr`
    pub fn log_line(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.episode, self.loss, self.lr)
    }
}

/// Hooks for logging and checkpointing.
pub trait TrainObserver {
    fn on_episode(&mut self, _rec: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn on_epoch_end(&mut self, _epoch: usize, _trainer: &Trainer) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Collects records in memory.
#[derive(Debug, Default)]
pub struct RecordingObserver {
    pub records: Vec<EpisodeRecord>,
}

impl TrainObserver for RecordingObserver {
    fn on_episode(&mut self, rec: &EpisodeRecord) -> Result<()> {
        self.records.push(*rec);
        Ok(())
    }
}

pub const TRAINING_KIND: &str = "training";

pub struct Trainer {
    config: TrainConfig,
    encoder: Encoder,
    generator: Option<DummyProtoGenerator>,
    ap_scale: f64,
    ap_bias: f64,
    adam: Adam,
    next_epoch: usize,
    mfcc: MfccExtractor,
    augment: AugmentationPolicy,
}

struct StepGrads {
    loss: f64,
    d_emb: Matrix,
    d_scale: f64,
    d_bias: f64,
    generator: Option<Vec<Vec<f64>>>,
}

impl Trainer {
    pub fn new(
        encoder: Encoder,
        config: TrainConfig,
        frontend: &FrontendConfig,
        augment: AugmentationPolicy,
    ) -> Result<Self> {
        config.validate()?;
        augment.validate()?;
        let generator = match config.loss.kind {
            LossKind::Dproto => Some(DummyProtoGenerator::new(
                encoder.embedding_dim(),
                config.loss.dummies,
                config.schedule.seed ^ 0x9e37_79b9_7f4a_7c15,
            )?),
            _ => None,
        };
        Ok(Self {
            ap_scale: config.loss.ap_scale_init,
            ap_bias: config.loss.ap_bias_init,
            config,
            encoder,
            generator,
            adam: Adam::default(),
            next_epoch: 0,
            mfcc: MfccExtractor::new(frontend)?,
            augment,
        })
    }

    /// Restores a trainer from a container written by [`Trainer::to_container`].
    /// The configuration must match the one the state was trained with.
    pub fn resume(
        state: &Container,
        config: TrainConfig,
        frontend: &FrontendConfig,
        augment: AugmentationPolicy,
    ) -> Result<Self> {
        let encoder = Encoder::from_container(state)?;
        let mut t = Self::new(encoder, config, frontend, augment)?;
        let kind: LossKind = state.meta_parse("train.loss")?;
        let seed: u64 = state.meta_parse("train.seed")?;
        if kind != config.loss.kind || seed != config.schedule.seed {
            return Err(Error::InvalidArgument(format!(
                "checkpoint was trained with {kind} seed {seed}, config asks for {} seed {}",
                config.loss.kind, config.schedule.seed
            )));
        }
        t.next_epoch = state.meta_parse("train.next_epoch")?;
        t.ap_scale = state.meta_parse("train.ap_scale")?;
        t.ap_bias = state.meta_parse("train.ap_bias")?;
        t.adam = Adam::read_from(state)?;
        if t.generator.is_some() {
            t.generator = Some(DummyProtoGenerator::read_from(state, "generator")?);
        }
        Ok(t)
    }

    pub fn to_container(&self, precision: Precision) -> Container {
        let mut c = Container::new(precision);
        c.set_meta("kind", TRAINING_KIND);
        self.encoder.write_into(&mut c);
        c.set_meta("train.loss", self.config.loss.kind);
        c.set_meta("train.seed", self.config.schedule.seed);
        c.set_meta("train.next_epoch", self.next_epoch);
        c.set_meta("train.ap_scale", self.ap_scale);
        c.set_meta("train.ap_bias", self.ap_bias);
        self.adam.write_into(&mut c);
        if let Some(g) = &self.generator {
            g.write_into(&mut c, "generator");
        }
        c
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn generator(&self) -> Option<&DummyProtoGenerator> {
        self.generator.as_ref()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn next_epoch(&self) -> usize {
        self.next_epoch
    }

    pub fn ap_params(&self) -> (f64, f64) {
        (self.ap_scale, self.ap_bias)
    }

    pub fn is_finished(&self) -> bool {
        self.next_epoch >= self.config.schedule.epochs
    }

    pub fn into_model(self) -> TrainedModel {
        TrainedModel {
            encoder: self.encoder,
            generator: self.generator,
            loss: Some(self.config.loss.kind),
        }
    }

    /// RNG that owns every random draw of one episode.
    pub fn episode_rng(&self, epoch: usize, episode: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.schedule.seed);
        let global = epoch * self.config.schedule.episodes_per_epoch + episode;
        rng.set_stream(global as u64);
        rng
    }

    /// Runs the remaining epochs. On a non-finite loss the step is not
    /// applied and an error is returned; the last completed epoch is whatever
    /// the observer persisted.
    pub fn run(&mut self, dataset: &Dataset, observer: &mut dyn TrainObserver) -> Result<()> {
        let by_class = dataset.by_class();
        while !self.is_finished() {
            let epoch = self.next_epoch;
            let mut sum = 0.0;
            for episode in 0..self.config.schedule.episodes_per_epoch {
                let rec = self.step(dataset, &by_class, epoch, episode)?;
                sum += rec.loss;
                observer.on_episode(&rec)?;
            }
            self.next_epoch += 1;
            log::info!(
                "epoch {epoch}: mean loss {:.5}",
                sum / self.config.schedule.episodes_per_epoch as f64
            );
            observer.on_epoch_end(epoch, self)?;
        }
        Ok(())
    }

    pub fn step(
        &mut self,
        dataset: &Dataset,
        by_class: &[Vec<usize>],
        epoch: usize,
        episode: usize,
    ) -> Result<EpisodeRecord> {
        let mut rng = self.episode_rng(epoch, episode);
        let batch = build_episode(by_class, self.config.episode_shape(), &mut rng)?;
        let feats = extract_features(dataset, &batch.flat(), &self.mfcc, &self.augment, &mut rng)?;
        let lr = self.config.schedule.lr.rate(epoch);
        let loss = self.step_on(&batch, &feats, lr, &mut rng)?;
        Ok(EpisodeRecord {
            epoch,
            episode,
            loss,
            lr,
        })
    }

    /// One optimizer step on precomputed features (ordered as `batch.flat()`).
    pub fn step_on(
        &mut self,
        batch: &EpisodicBatch,
        feats: &[FeatureMap],
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let (emb, trace) = self.encoder.forward_train(feats)?;
        let g = self.loss_grads(batch, &emb, rng)?;
        if !g.loss.is_finite() || g.d_emb.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training loss became {}", g.loss)));
        }
        let enc_grads = self.encoder.backward(&trace, &g.d_emb)?;
        if enc_grads.0.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder gradient is not finite".into()));
        }
        self.adam.begin_step();
        let adam = &mut self.adam;
        let n_enc = enc_grads.0.len();
        self.encoder
            .for_each_param_mut(&enc_grads, &mut |i, p, d| adam.update(i, lr, p, d));
        if self.config.loss.kind == LossKind::Ap {
            let mut s = [self.ap_scale];
            let mut b = [self.ap_bias];
            adam.update(n_enc, lr, &mut s, &[g.d_scale]);
            adam.update(n_enc + 1, lr, &mut b, &[g.d_bias]);
            self.ap_scale = s[0].max(AP_MIN_SCALE);
            self.ap_bias = b[0];
        }
        if let (Some(gen), Some(gg)) = (self.generator.as_mut(), g.generator.as_ref()) {
            gen.for_each_param_mut(gg, &mut |i, p, d| adam.update(n_enc + 2 + i, lr, p, d));
        }
        Ok(g.loss)
    }

    fn loss_grads(
        &self,
        batch: &EpisodicBatch,
        emb: &Matrix,
        rng: &mut ChaCha8Rng,
    ) -> Result<StepGrads> {
        let kind = self.config.loss.kind;
        let margin = self.config.loss.margin;
        let mut out = StepGrads {
            loss: 0.0,
            d_emb: Matrix::zeros(emb.rows(), emb.cols()),
            d_scale: 0.0,
            d_bias: 0.0,
            generator: None,
        };
        if kind == LossKind::Tl {
            let labels = batch.flat_labels();
            let triplets = sample_triplets(&labels, rng)?;
            let (loss, d) = tl_loss(emb, &triplets, margin)?;
            out.loss = loss;
            out.d_emb = d;
            return Ok(out);
        }
        let split = ProtoSplit::new(batch, emb, self.unknown_groups())?;
        let d_protos = match kind {
            LossKind::Pn => {
                let r = pn_loss(&split.queries, &split.labels, &split.prototypes)?;
                out.loss = r.loss;
                split.scatter_queries(&r.d_queries, &mut out.d_emb);
                r.d_prototypes
            }
            LossKind::Ap => {
                let r = ap_loss(
                    &split.queries,
                    &split.labels,
                    &split.prototypes,
                    self.ap_scale,
                    self.ap_bias,
                    margin,
                )?;
                out.loss = r.loss;
                out.d_scale = r.d_scale;
                out.d_bias = r.d_bias;
                split.scatter_queries(&r.d_queries, &mut out.d_emb);
                r.d_prototypes
            }
            LossKind::Dproto => {
                let gen = self
                    .generator
                    .as_ref()
                    .expect("generator exists for DPROTO");
                let (dummies, trace) = gen.forward(&split.prototypes)?;
                let r =
                    open_proto_loss(&split.queries, &split.labels, &split.prototypes, &dummies)?;
                out.loss = r.loss;
                split.scatter_queries(&r.d_queries, &mut out.d_emb);
                let (gg, d_from_gen) = gen.backward(&trace, &r.d_dummies);
                out.generator = Some(gg);
                let mut d = r.d_prototypes;
                for (a, b) in d.as_mut_slice().iter_mut().zip(d_from_gen.as_slice()) {
                    *a += b;
                }
                d
            }
            LossKind::Tl => unreachable!(),
        };
        split.scatter_prototypes(&d_protos, &mut out.d_emb);
        Ok(out)
    }

    fn unknown_groups(&self) -> usize {
        match self.config.loss.kind {
            LossKind::Dproto => self.config.loss.unknown_classes,
            _ => 0,
        }
    }
}

/// Support/query bookkeeping for prototype-based losses. The first
/// `unknown` groups are treated as unknown: their queries get label 0 and
/// their supports are not used; known group `k` gets label `k + 1`. Without
/// unknown groups labels are plain group indices.
struct ProtoSplit {
    prototypes: Matrix,
    queries: Matrix,
    labels: Vec<usize>,
    query_rows: Vec<usize>,
    /// Flat support rows for each prototype.
    support_rows: Vec<Vec<usize>>,
}

impl ProtoSplit {
    fn new(batch: &EpisodicBatch, emb: &Matrix, unknown: usize) -> Result<Self> {
        let s = batch.shape.support();
        let per = batch.shape.per_class();
        let groups = batch.groups.len();
        let dim = emb.cols();
        let mut prototypes = Matrix::zeros(groups - unknown, dim);
        let mut support_rows = Vec::new();
        let mut query_rows = Vec::new();
        let mut labels = Vec::new();
        for g in 0..groups {
            let base = g * per;
            if g >= unknown {
                let k = g - unknown;
                let rows: Vec<usize> = (base..base + s).collect();
                let p = prototypes.row_mut(k);
                for &r in &rows {
                    for (pi, e) in p.iter_mut().zip(emb.row(r)) {
                        *pi += e / s as f64;
                    }
                }
                support_rows.push(rows);
            }
            let label = if unknown == 0 {
                g
            } else if g < unknown {
                0
            } else {
                g - unknown + 1
            };
            for r in base + s..base + per {
                query_rows.push(r);
                labels.push(label);
            }
        }
        if prototypes.rows() == 0 {
            return Err(Error::InvalidArgument(
                "episode has no known classes".into(),
            ));
        }
        Ok(Self {
            prototypes,
            queries: emb.select_rows(&query_rows),
            labels,
            query_rows,
            support_rows,
        })
    }

    fn scatter_queries(&self, d_q: &Matrix, d_emb: &mut Matrix) {
        for (i, &r) in self.query_rows.iter().enumerate() {
            d_emb.row_mut(r).copy_from_slice(d_q.row(i));
        }
    }

    fn scatter_prototypes(&self, d_p: &Matrix, d_emb: &mut Matrix) {
        for (k, rows) in self.support_rows.iter().enumerate() {
            let w = 1.0 / rows.len() as f64;
            for &r in rows {
                for (d, g) in d_emb.row_mut(r).iter_mut().zip(d_p.row(k)) {
                    *d += g * w;
                }
            }
        }
    }
}

/// What downstream stages need from a training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: Encoder,
    pub generator: Option<DummyProtoGenerator>,
    /// Loss the encoder was trained with, when known.
    pub loss: Option<LossKind>,
}

impl TrainedModel {
    /// Reads a training state or a bare encoder checkpoint.
    pub fn from_container(c: &Container) -> Result<Self> {
        let encoder = Encoder::from_container(c)?;
        let loss = match c.meta.get("train.loss") {
            Some(s) => Some(s.parse()?),
            None => None,
        };
        let generator = if c.meta.contains_key("generator.dim") {
            let g = DummyProtoGenerator::read_from(c, "generator")?;
            if g.dim() != encoder.embedding_dim() {
                return Err(Error::Shape(format!(
                    "generator dim {} does not match embedding dim {}",
                    g.dim(),
                    encoder.embedding_dim()
                )));
            }
            Some(g)
        } else {
            None
        };
        Ok(Self {
            encoder,
            generator,
            loss,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }

    /// Whether the classifier should L2-normalize before distances.
    pub fn wants_normalization(&self) -> bool {
        self.loss == Some(LossKind::Ap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, Head};
    use crate::synthetic::{SyntheticCorpus, SyntheticSpec};

    fn tiny_corpus() -> Dataset {
        let spec = SyntheticSpec {
            num_classes: 6,
            source_classes: 5,
            filler_classes: 1,
            train_per_class: 6,
            test_per_class: 1,
            ..Default::default()
        };
        SyntheticCorpus::generate(&spec).unwrap().train
    }

    fn tiny_config(kind: LossKind) -> TrainConfig {
        TrainConfig {
            loss: LossConfig {
                kind,
                unknown_classes: 1,
                ..Default::default()
            },
            schedule: TrainSchedule {
                epochs: 2,
                episodes_per_epoch: 2,
                seed: 5,
                ..Default::default()
            },
            episode: EpisodeConfig {
                proto_classes: 3,
                support: 2,
                query: 2,
                triplet_classes: 3,
                triplet_per_class: 3,
            },
        }
    }

    fn tiny_encoder() -> Encoder {
        Encoder::new(EncoderConfig::custom(Head::Norm, 8, 1), 1).unwrap()
    }

    #[test]
    fn default_schedule_totals() {
        let s = TrainSchedule::default();
        assert_eq!(s.total_episodes(), 16000);
        assert!((s.lr.rate(25) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn every_loss_kind_runs_and_counts_episodes() {
        let ds = tiny_corpus();
        for kind in [LossKind::Pn, LossKind::Ap, LossKind::Tl, LossKind::Dproto] {
            let mut t = Trainer::new(
                tiny_encoder(),
                tiny_config(kind),
                &FrontendConfig::default(),
                AugmentationPolicy::disabled(),
            )
            .unwrap();
            let mut obs = RecordingObserver::default();
            t.run(&ds, &mut obs).unwrap();
            assert_eq!(obs.records.len(), 4, "{kind}");
            assert!(obs
                .records
                .iter()
                .all(|r| r.loss.is_finite() && r.loss >= 0.0));
            assert_eq!(t.generator().is_some(), kind == LossKind::Dproto);
        }
    }

    #[test]
    fn resume_reproduces_remaining_trace() {
        let ds = tiny_corpus();
        let cfg = tiny_config(LossKind::Ap);
        let fe = FrontendConfig::default();
        let mut full =
            Trainer::new(tiny_encoder(), cfg, &fe, AugmentationPolicy::disabled()).unwrap();
        let mut all = RecordingObserver::default();
        full.run(&ds, &mut all).unwrap();

        struct StopAfterFirst(Option<Container>);
        impl TrainObserver for StopAfterFirst {
            fn on_epoch_end(&mut self, _e: usize, t: &Trainer) -> Result<()> {
                self.0 = Some(t.to_container(Precision::F64));
                Err(Error::InvalidArgument("interrupted".into()))
            }
        }
        let mut part =
            Trainer::new(tiny_encoder(), cfg, &fe, AugmentationPolicy::disabled()).unwrap();
        let mut stop = StopAfterFirst(None);
        assert!(part.run(&ds, &mut stop).is_err());
        let state = Container::from_bytes(&stop.0.unwrap().to_bytes().unwrap()).unwrap();
        let mut resumed =
            Trainer::resume(&state, cfg, &fe, AugmentationPolicy::disabled()).unwrap();
        assert_eq!(resumed.next_epoch(), 1);
        let mut rest = RecordingObserver::default();
        resumed.run(&ds, &mut rest).unwrap();
        assert_eq!(rest.records, all.records[2..]);
        assert_eq!(
            resumed.encoder().param_values(),
            full.encoder().param_values()
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_config(LossKind::Dproto);
        cfg.loss.unknown_classes = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config(LossKind::Pn);
        cfg.loss.margin = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_labels_and_scatter() {
        let batch = EpisodicBatch {
            shape: EpisodeShape::Prototypical {
                classes: 3,
                support: 1,
                query: 2,
            },
            classes: vec![4, 5, 6],
            groups: vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]],
        };
        let emb = Matrix::from_vec(9, 1, (0..9).map(|v| v as f64).collect()).unwrap();
        let s = ProtoSplit::new(&batch, &emb, 1).unwrap();
        assert_eq!(s.labels, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(s.prototypes.as_slice(), &[3.0, 6.0]);
        let plain = ProtoSplit::new(&batch, &emb, 0).unwrap();
        assert_eq!(plain.labels, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(plain.prototypes.as_slice(), &[0.0, 3.0, 6.0]);
    }
}
