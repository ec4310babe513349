//! Few-shot enrollment and open-set scoring.
//!
//! Class `0` is always "unknown"; enrolled keywords are `1..=N`.

mod weibull;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use weibull::{fit_weibull_tail, weibull_mle, WeibullTail, SHIFT_FRACTION};

use crate::container::{Container, Precision};
use crate::encoder::layers::Tensor;
use crate::error::{Error, Result};
use crate::linalg::{euclidean, l2_normalized, softmax, Matrix};
use crate::trainer::DummyProtoGenerator;

/// Number of largest enrollment distances fed to each tail fit.
pub const TAIL_SIZE: usize = 5;
pub const ENROLLMENT_KIND: &str = "enrollment";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "openNCM")]
    OpenNcm,
    #[serde(rename = "OpenMAX")]
    OpenMax,
    #[serde(rename = "DProto")]
    DProto,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::OpenNcm => "openNCM",
            ClassifierKind::OpenMax => "OpenMAX",
            ClassifierKind::DProto => "DProto",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "openncm" | "ncm" => Ok(ClassifierKind::OpenNcm),
            "openmax" => Ok(ClassifierKind::OpenMax),
            "dproto" => Ok(ClassifierKind::DProto),
            _ => Err(Error::InvalidArgument(format!("unknown classifier {s:?}"))),
        }
    }
}

/// Probabilities over `unknown, class 1, ..., class N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Largest known-class probability.
    pub fn max_known(&self) -> f64 {
        self.0[1..].iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Open-set decision: the top class if it is a keyword whose probability
/// reaches `gamma`, otherwise 0.
pub fn decide(p: &[f64], gamma: f64) -> usize {
    let best = argmax(p);
    if best != 0 && p[best] >= gamma {
        best
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrollOptions {
    /// L2-normalize embeddings and prototypes before distances.
    pub normalize: bool,
    pub tail_size: usize,
}

impl Default for EnrollOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            tail_size: TAIL_SIZE,
        }
    }
}

/// Immutable classifier state produced by [`enroll`].
#[derive(Debug, Clone, PartialEq)]
pub struct Enrollment {
    pub kind: ClassifierKind,
    pub class_names: Vec<String>,
    pub shots: usize,
    pub normalize: bool,
    /// `N x D`.
    pub prototypes: Matrix,
    /// openNCM: one row; DProto: one row per generated dummy; else empty.
    pub unknown: Matrix,
    /// OpenMAX only, one per class.
    pub tails: Vec<WeibullTail>,
    /// Set when OpenMAX had fewer than `tail_size` shots to fit on.
    pub short_tail: bool,
}

fn prepare(e: &[f64], normalize: bool) -> Result<Vec<f64>> {
    if !normalize {
        return Ok(e.to_vec());
    }
    l2_normalized(e).ok_or_else(|| {
        Error::InvalidArgument("cannot normalize a zero or non-finite embedding".into())
    })
}

fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Builds a classifier from per-keyword embeddings (`groups[i]` is `K x D`).
/// `filler` supplies the unknown prototype for openNCM and `generator` the
/// dummy prototypes for DProto.
pub fn enroll(
    kind: ClassifierKind,
    class_names: &[String],
    groups: &[Matrix],
    filler: Option<&Matrix>,
    generator: Option<&DummyProtoGenerator>,
    opts: EnrollOptions,
) -> Result<Enrollment> {
    if groups.is_empty() || groups.len() != class_names.len() {
        return Err(Error::InvalidArgument(
            "need one embedding group per class name".into(),
        ));
    }
    let dim = groups[0].cols();
    let shots = groups[0].rows();
    if shots == 0 {
        return Err(Error::InvalidArgument(
            "enrollment needs at least one shot".into(),
        ));
    }
    let mut protos = Vec::with_capacity(groups.len());
    let mut tails = Vec::new();
    let mut short_tail = false;
    for (g, name) in groups.iter().zip(class_names) {
        if g.cols() != dim {
            return Err(Error::Shape(format!(
                "class {name}: embedding dim {} != {dim}",
                g.cols()
            )));
        }
        if g.rows() == 0 {
            return Err(Error::InvalidArgument(format!("class {name} has no shots")));
        }
        let rows = g
            .iter_rows()
            .map(|r| prepare(r, opts.normalize))
            .collect::<Result<Vec<_>>>()?;
        let c = prepare(&mean_row(&rows), opts.normalize)?;
        if kind == ClassifierKind::OpenMax {
            let mut d: Vec<f64> = rows.iter().map(|r| euclidean(r, &c)).collect();
            d.sort_by(|a, b| b.total_cmp(a));
            if d.len() < opts.tail_size {
                short_tail = true;
                log::warn!(
                    "class {name}: {} shots, fitting the tail on all of them",
                    d.len()
                );
            }
            d.truncate(opts.tail_size);
            tails.push(fit_weibull_tail(&d)?);
        }
        protos.push(c);
    }
    let prototypes = Matrix::from_rows(&protos)?;
    let unknown = match kind {
        ClassifierKind::OpenNcm => {
            let f = filler
                .ok_or_else(|| Error::InvalidArgument("openNCM needs filler embeddings".into()))?;
            if f.rows() == 0 || f.cols() != dim {
                return Err(Error::Shape(
                    "filler embeddings missing or mis-sized".into(),
                ));
            }
            let rows = f
                .iter_rows()
                .map(|r| prepare(r, opts.normalize))
                .collect::<Result<Vec<_>>>()?;
            Matrix::from_rows(&[prepare(&mean_row(&rows), opts.normalize)?])?
        }
        ClassifierKind::DProto => {
            let g = generator
                .ok_or_else(|| Error::InvalidArgument("DProto needs a trained generator".into()))?;
            if g.dim() != dim {
                return Err(Error::Shape(format!(
                    "generator dim {} does not match embedding dim {dim}",
                    g.dim()
                )));
            }
            g.generate(&prototypes)?
        }
        ClassifierKind::OpenMax => Matrix::zeros(0, dim),
    };
    Ok(Enrollment {
        kind,
        class_names: class_names.to_vec(),
        shots,
        normalize: opts.normalize,
        prototypes,
        unknown,
        tails,
        short_tail,
    })
}

impl Enrollment {
    pub fn num_classes(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.cols()
    }

    pub fn score(&self, embedding: &[f64]) -> Result<ScoreVector> {
        if embedding.len() != self.dim() {
            return Err(Error::Shape(format!(
                "embedding has {} dims, enrollment expects {}",
                embedding.len(),
                self.dim()
            )));
        }
        let e = prepare(embedding, self.normalize)?;
        let d: Vec<f64> = self
            .prototypes
            .iter_rows()
            .map(|c| euclidean(&e, c))
            .collect();
        let mut logits = Vec::with_capacity(d.len() + 1);
        match self.kind {
            ClassifierKind::OpenNcm | ClassifierKind::DProto => {
                let d0 = self
                    .unknown
                    .iter_rows()
                    .map(|c| euclidean(&e, c))
                    .fold(f64::INFINITY, f64::min);
                logits.push(-d0);
                logits.extend(d.iter().map(|v| -v));
            }
            ClassifierKind::OpenMax => {
                let w: Vec<f64> = self
                    .tails
                    .iter()
                    .zip(&d)
                    .map(|(t, &di)| t.cdf(di))
                    .collect();
                logits.push(
                    -w.iter()
                        .zip(&d)
                        .map(|(wi, di)| (1.0 - wi) * di)
                        .sum::<f64>(),
                );
                logits.extend(w.iter().zip(&d).map(|(wi, di)| -wi * di));
            }
        }
        let p = softmax(&logits);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score vector is not finite".into()));
        }
        Ok(ScoreVector(p))
    }

    pub fn label(&self, class: usize) -> &str {
        if class == 0 {
            "unknown"
        } else {
            &self.class_names[class - 1]
        }
    }

    pub fn to_container(&self, precision: Precision) -> Container {
        let mut c = Container::new(precision);
        c.set_meta("kind", ENROLLMENT_KIND);
        c.set_meta("enroll.classifier", self.kind);
        c.set_meta("enroll.classes", self.num_classes());
        c.set_meta("enroll.dim", self.dim());
        c.set_meta("enroll.shots", self.shots);
        c.set_meta("enroll.normalize", self.normalize);
        c.set_meta("enroll.short_tail", self.short_tail);
        for (i, n) in self.class_names.iter().enumerate() {
            c.set_meta(&format!("enroll.class.{i}"), n);
        }
        let mat = |m: &Matrix| Tensor {
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        };
        c.insert("prototypes", mat(&self.prototypes));
        c.insert("unknown", mat(&self.unknown));
        if !self.tails.is_empty() {
            let data = self
                .tails
                .iter()
                .flat_map(|t| [t.shape, t.scale, t.shift, t.degenerate as u8 as f64])
                .collect();
            c.insert(
                "weibull",
                Tensor {
                    shape: vec![self.tails.len(), 4],
                    data,
                },
            );
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.meta_str("kind")? != ENROLLMENT_KIND {
            return Err(Error::Format("not an enrollment file".into()));
        }
        let n: usize = c.meta_parse("enroll.classes")?;
        let dim: usize = c.meta_parse("enroll.dim")?;
        let mat = |name: &str| -> Result<Matrix> {
            let t = c.tensor(name)?;
            if t.shape.len() != 2 || t.shape[1] != dim {
                return Err(Error::Shape(format!(
                    "{name} has shape {:?}, expected [_, {dim}]",
                    t.shape
                )));
            }
            Matrix::from_vec(t.shape[0], dim, t.data.clone())
        };
        let prototypes = mat("prototypes")?;
        if prototypes.rows() != n {
            return Err(Error::Shape("prototype count disagrees with header".into()));
        }
        let tails = match c.tensors.get("weibull") {
            Some(t) if t.shape == [n, 4] => t
                .data
                .chunks(4)
                .map(|v| WeibullTail {
                    shape: v[0],
                    scale: v[1],
                    shift: v[2],
                    degenerate: v[3] != 0.0,
                })
                .collect(),
            Some(t) => {
                return Err(Error::Shape(format!(
                    "weibull table has shape {:?}",
                    t.shape
                )))
            }
            None => Vec::new(),
        };
        let kind = c.meta_parse("enroll.classifier")?;
        if kind == ClassifierKind::OpenMax && tails.len() != n {
            return Err(Error::Format(
                "OpenMAX enrollment without tail models".into(),
            ));
        }
        Ok(Self {
            kind,
            class_names: (0..n)
                .map(|i| c.meta_str(&format!("enroll.class.{i}")).map(String::from))
                .collect::<Result<_>>()?,
            shots: c.meta_parse("enroll.shots")?,
            normalize: c.meta_parse("enroll.normalize")?,
            prototypes,
            unknown: mat("unknown")?,
            tails,
            short_tail: c.meta_parse("enroll.short_tail")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container(Precision::F64).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("k{i}")).collect()
    }

    fn groups_around(centres: &[[f64; 2]], spread: f64) -> Vec<Matrix> {
        centres
            .iter()
            .map(|c| {
                let rows: Vec<Vec<f64>> = (0..6)
                    .map(|i| {
                        let a = i as f64;
                        vec![
                            c[0] + spread * a.cos() * (1.0 + 0.1 * a),
                            c[1] + spread * a.sin(),
                        ]
                    })
                    .collect();
                Matrix::from_rows(&rows).unwrap()
            })
            .collect()
    }

    #[test]
    fn decide_rule() {
        assert_eq!(decide(&[0.1, 0.6, 0.3], 0.5), 1);
        assert_eq!(decide(&[0.1, 0.6, 0.3], 0.7), 0);
        assert_eq!(decide(&[0.8, 0.1, 0.1], 0.0), 0);
        assert_eq!(decide(&[0.2, 0.4, 0.4], 0.0), 1);
        assert_eq!(decide(&[0.5, 0.5], 0.0), 0);
    }

    #[test]
    fn ncm_single_shot_prototype_is_the_shot() {
        let g = vec![
            Matrix::from_rows(&[[1.0, 2.0]]).unwrap(),
            Matrix::from_rows(&[[5.0, 5.0]]).unwrap(),
        ];
        let filler = Matrix::from_rows(&[[9.0, 9.0], [11.0, 9.0]]).unwrap();
        let e = enroll(
            ClassifierKind::OpenNcm,
            &names(2),
            &g,
            Some(&filler),
            None,
            EnrollOptions::default(),
        )
        .unwrap();
        assert_eq!(e.prototypes.row(0), &[1.0, 2.0]);
        assert_eq!(e.unknown.row(0), &[10.0, 9.0]);
        let p = e.score(&[5.0, 5.0]).unwrap();
        assert_eq!(p.argmax(), 2);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn openmax_uses_five_largest_distances() {
        let g = groups_around(&[[0.0, 0.0], [10.0, 0.0]], 1.0);
        let e = enroll(
            ClassifierKind::OpenMax,
            &names(2),
            &g,
            None,
            None,
            EnrollOptions::default(),
        )
        .unwrap();
        assert_eq!(e.tails.len(), 2);
        assert!(!e.short_tail);
        // The shift sits just below the 5th largest of the 6 distances.
        let c = e.prototypes.row(0).to_vec();
        let mut d: Vec<f64> = g[0].iter_rows().map(|r| euclidean(r, &c)).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        assert!((e.tails[0].shift - d[4] * (1.0 - SHIFT_FRACTION)).abs() < 1e-12);
    }

    #[test]
    fn openmax_with_few_shots_flags_the_fit() {
        let g = vec![Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap()];
        let e = enroll(
            ClassifierKind::OpenMax,
            &names(1),
            &g,
            None,
            None,
            EnrollOptions::default(),
        )
        .unwrap();
        assert!(e.short_tail);
    }

    #[test]
    fn normalized_scoring_ignores_embedding_scale() {
        let g = groups_around(&[[1.0, 0.2], [0.1, 1.0]], 0.1);
        let filler = Matrix::from_rows(&[[-1.0, -1.0]]).unwrap();
        let opts = EnrollOptions {
            normalize: true,
            ..Default::default()
        };
        let e = enroll(
            ClassifierKind::OpenNcm,
            &names(2),
            &g,
            Some(&filler),
            None,
            opts,
        )
        .unwrap();
        let a = e.score(&[0.3, 0.5]).unwrap();
        let b = e.score(&[3.0, 5.0]).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dproto_stores_generated_dummies() {
        let gen = DummyProtoGenerator::new(2, 3, 1).unwrap();
        let g = groups_around(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 0.5);
        let e = enroll(
            ClassifierKind::DProto,
            &names(3),
            &g,
            None,
            Some(&gen),
            EnrollOptions::default(),
        )
        .unwrap();
        assert_eq!((e.unknown.rows(), e.unknown.cols()), (3, 2));
    }

    #[test]
    fn container_round_trip_and_dimension_check() {
        let g = groups_around(&[[0.0, 0.0], [4.0, 1.0]], 0.7);
        let e = enroll(
            ClassifierKind::OpenMax,
            &names(2),
            &g,
            None,
            None,
            EnrollOptions::default(),
        )
        .unwrap();
        let c = Container::from_bytes(&e.to_container(Precision::F64).to_bytes().unwrap()).unwrap();
        let back = Enrollment::from_container(&c).unwrap();
        assert_eq!(back, e);
        assert!(matches!(back.score(&[1.0, 2.0, 3.0]), Err(Error::Shape(_))));
    }
}
