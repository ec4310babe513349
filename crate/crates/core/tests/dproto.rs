use kws_fewshot::linalg::Matrix;
use kws_fewshot::trainer::{open_proto_loss, Adam, DummyProtoGenerator};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const INPUT: usize = 6;
const DIM: usize = 8;
const CLASSES: usize = 12;
const KNOWN: usize = 5;
const UNKNOWN: usize = 2;
const SHOTS: usize = 3;

/// Well separated Gaussian clusters.
struct Toy {
    centers: Vec<Vec<f64>>,
}

impl Toy {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let centers = (0..CLASSES)
            .map(|_| (0..INPUT).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Self { centers }
    }

    fn draw(&self, class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.centers[class]
            .iter()
            .map(|c| c + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

fn embed(x: &[Vec<f64>], w: &[f64]) -> Matrix {
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            (0..DIM)
                .map(|j| (0..INPUT).map(|i| r[i] * w[i * DIM + j]).sum())
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

/// One joint step of the linear embedding `w` and the generator.
fn step(
    toy: &Toy,
    w: &mut [f64],
    generator: &mut DummyProtoGenerator,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let picked = sample(rng, CLASSES, KNOWN + UNKNOWN).into_vec();
    let (known, unknown) = picked.split_at(KNOWN);
    let mut support = Vec::new();
    let mut queries = Vec::new();
    let mut labels = Vec::new();
    for (k, &c) in known.iter().enumerate() {
        for _ in 0..SHOTS {
            support.push(toy.draw(c, rng));
            queries.push(toy.draw(c, rng));
            labels.push(k + 1);
        }
    }
    for &c in unknown {
        for _ in 0..SHOTS {
            queries.push(toy.draw(c, rng));
            labels.push(0);
        }
    }

    let s_emb = embed(&support, w);
    let q_emb = embed(&queries, w);
    let groups: Vec<Matrix> = (0..KNOWN)
        .map(|k| s_emb.select_rows(&(k * SHOTS..(k + 1) * SHOTS).collect::<Vec<_>>()))
        .collect();
    let protos = kws_fewshot::trainer::compute_prototypes(&groups).unwrap();
    let (dummies, trace) = generator.forward(&protos).unwrap();
    let r = open_proto_loss(&q_emb, &labels, &protos, &dummies).unwrap();
    let (g_grads, d_from_gen) = generator.backward(&trace, &r.d_dummies);

    let mut dw = vec![0.0; INPUT * DIM];
    let mut accumulate = |x: &[f64], d: &[f64]| {
        for i in 0..INPUT {
            for j in 0..DIM {
                dw[i * DIM + j] += x[i] * d[j];
            }
        }
    };
    for (x, d) in queries.iter().zip(r.d_queries.iter_rows()) {
        accumulate(x, d);
    }
    for (n, x) in support.iter().enumerate() {
        let k = n / SHOTS;
        let d: Vec<f64> = r
            .d_prototypes
            .row(k)
            .iter()
            .zip(d_from_gen.row(k))
            .map(|(a, b)| (a + b) / SHOTS as f64)
            .collect();
        accumulate(x, &d);
    }

    let lr = 0.01;
    adam.begin_step();
    adam.update(0, lr, w, &dw);
    generator.for_each_param_mut(&g_grads, &mut |i, p, d| adam.update(1 + i, lr, p, d));
    r.loss
}

#[test]
fn joint_training_on_separable_toy_lowers_epoch_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let toy = Toy::new(&mut rng);
    let mut w: Vec<f64> = (0..INPUT * DIM).map(|_| rng.random_range(-0.4..0.4)).collect();
    let mut generator = DummyProtoGenerator::new(DIM, 3, 8).unwrap();
    let mut adam = Adam::default();
    let losses: Vec<f64> = (0..200)
        .map(|_| step(&toy, &mut w, &mut generator, &mut adam, &mut rng))
        .collect();
    let epochs: Vec<f64> = losses.chunks(50).map(|c| c.iter().sum::<f64>() / 50.0).collect();
    assert!(
        epochs.windows(2).all(|p| p[1] < p[0]),
        "epoch mean losses {epochs:?}"
    );
}
