use kws_fewshot::container::{Container, Precision};
use kws_fewshot::encoder::{Encoder, EncoderConfig, Head};
use kws_fewshot::eval::{run_eval, EvalProtocol};
use kws_fewshot::frontend::{AugmentationPolicy, FeatureMap, FrontendConfig};
use kws_fewshot::openset::ClassifierKind;
use kws_fewshot::synthetic::{desk_train_config, SyntheticCorpus, SyntheticSpec};
use kws_fewshot::trainer::{LossKind, TrainedModel, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn train(
    corpus: &SyntheticCorpus,
    encoder: EncoderConfig,
    kind: LossKind,
    epochs: usize,
    episodes: usize,
) -> Trainer {
    let mut config = desk_train_config(kind, 4);
    config.schedule.epochs = epochs;
    config.schedule.episodes_per_epoch = episodes;
    config.schedule.lr.decay_epoch = epochs;
    let augment = AugmentationPolicy {
        noise_pool: corpus.noise_pool.clone(),
        ..Default::default()
    };
    let mut t = Trainer::new(
        Encoder::new(encoder, 4).unwrap(),
        config,
        &FrontendConfig::default(),
        augment,
    )
    .unwrap();
    let source = corpus.train.restrict(&corpus.source_classes()).unwrap();
    t.run(&source, &mut ()).unwrap();
    t
}

fn random_maps(n: usize, seed: u64) -> Vec<FeatureMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = (0..490).map(|_| StandardNormal.sample(&mut rng)).collect();
            FeatureMap::new(49, 10, v).unwrap()
        })
        .collect()
}

#[test]
fn more_shots_do_not_hurt_on_the_synthetic_corpus() {
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::default()).unwrap();
    let trainer = train(&corpus, EncoderConfig::custom(Head::Norm, 32, 2), LossKind::Tl, 2, 25);
    let model = trainer.into_model();
    let acc = |k_shot| {
        let protocol = EvalProtocol {
            positive: corpus.positive.clone(),
            negative: corpus.negative.clone(),
            filler: corpus.filler.clone(),
            k_shot,
            seed: 9,
            ..Default::default()
        };
        let r = run_eval(
            &model,
            ClassifierKind::OpenNcm,
            &protocol,
            &corpus.train,
            &corpus.test,
            &FrontendConfig::default(),
        )
        .unwrap();
        assert_eq!(r.gammas().len(), 10);
        let counts = corpus.test.class_counts();
        let negatives: usize = corpus.negative.iter().map(|c| counts[c]).sum();
        for rep in &r.repetitions {
            assert!(rep.rates.far <= 0.05);
            assert_eq!(rep.confusion[0].iter().sum::<usize>(), negatives);
            for (row, class) in rep.confusion[1..].iter().zip(&rep.classes) {
                assert_eq!(row.iter().sum::<usize>(), counts[class]);
            }
        }
        r.summary("acc_at_far").unwrap().mean
    };
    let (five, ten) = (acc(5), acc(10));
    assert!(ten >= five, "ACC@FAR5%: 5-shot {five}, 10-shot {ten}");
}

#[test]
fn trained_checkpoint_reproduces_embeddings_exactly() {
    let spec = SyntheticSpec::default();
    let corpus = SyntheticCorpus::generate(&spec).unwrap();
    let trainer = train(&corpus, EncoderConfig::custom(Head::Norm, 16, 2), LossKind::Tl, 1, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    trainer.to_container(Precision::F64).save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    let maps = random_maps(100, 1);
    let before = trainer.encoder().embed(&maps).unwrap();
    let after = loaded.encoder.embed(&maps).unwrap();
    assert!(before
        .as_slice()
        .iter()
        .zip(after.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(loaded.loss, Some(LossKind::Tl));
}

#[test]
fn dproto_state_carries_the_generator() {
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::default()).unwrap();
    let trainer = train(&corpus, EncoderConfig::custom(Head::Norm, 8, 1), LossKind::Dproto, 1, 2);
    let c: Container = trainer.to_container(Precision::F64);
    let model = TrainedModel::from_container(&c).unwrap();
    let g = model.generator.expect("generator stored");
    assert_eq!(g.dim(), model.encoder.embedding_dim());
    assert_eq!(
        g.param_values(),
        trainer.generator().unwrap().param_values()
    );
}

#[test]
fn large_norm_encoder_after_a_step_has_unit_embeddings() {
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::default()).unwrap();
    let mut config = desk_train_config(LossKind::Tl, 2);
    config.schedule.epochs = 1;
    config.schedule.episodes_per_epoch = 1;
    config.episode.triplet_classes = 3;
    config.episode.triplet_per_class = 2;
    let mut t = Trainer::new(
        Encoder::new(EncoderConfig::large(Head::Norm), 2).unwrap(),
        config,
        &FrontendConfig::default(),
        AugmentationPolicy::disabled(),
    )
    .unwrap();
    t.run(&corpus.train.restrict(&corpus.source_classes()).unwrap(), &mut ())
        .unwrap();
    let emb = t.encoder().embed(&random_maps(4, 3)).unwrap();
    assert_eq!(emb.cols(), 256);
    for row in emb.iter_rows() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }
}
