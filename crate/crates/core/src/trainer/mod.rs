//! Episodic metric-learning trainer.

pub mod dproto;
pub mod episode;
pub mod losses;
pub mod optim;
mod train;

pub use dproto::{DummyProtoGenerator, DEFAULT_DUMMIES};
pub use episode::{build_episode, extract_features, EpisodeConfig, EpisodeShape, EpisodicBatch};
pub use losses::{
    ap_loss, compute_prototypes, open_proto_loss, pn_loss, sample_triplets, tl_loss, Triplet,
};
pub use optim::{Adam, LrSchedule};
pub use train::{
    EpisodeRecord, LossConfig, LossKind, RecordingObserver, TrainConfig, TrainObserver,
    TrainSchedule, TrainedModel, Trainer, AP_MIN_SCALE, TRAINING_KIND,
};
