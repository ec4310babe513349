//! Episode losses with analytic gradients.
//!
//! Every loss takes embeddings as rows of a [`Matrix`] and returns the mean
//! loss together with gradients for each differentiable input, so callers
//! can chain them into the encoder's backward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean, log_sum_exp, norm, softmax, Matrix};

/// Loss value plus gradients w.r.t. the query rows and the prototypes.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub d_queries: Matrix,
    pub d_prototypes: Matrix,
}

/// Angular loss output; adds gradients for the scale and bias scalars.
#[derive(Debug, Clone)]
pub struct AngularLossGrad {
    pub loss: f64,
    pub d_queries: Matrix,
    pub d_prototypes: Matrix,
    pub d_scale: f64,
    pub d_bias: f64,
}

/// Class prototypes as arithmetic means of each group's rows.
pub fn compute_prototypes(groups: &[Matrix]) -> Result<Matrix> {
    let dim = groups.first().map_or(0, Matrix::cols);
    let mut protos = Matrix::zeros(groups.len(), dim);
    for (j, g) in groups.iter().enumerate() {
        if g.rows() == 0 {
            return Err(Error::InvalidArgument(format!("class group {j} is empty")));
        }
        if g.cols() != dim {
            return Err(Error::Shape(format!(
                "group {j} has dimension {}, expected {dim}",
                g.cols()
            )));
        }
        let out = protos.row_mut(j);
        for row in g.iter_rows() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let inv = 1.0 / g.rows() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(protos)
}

fn check_episode(queries: &Matrix, labels: &[usize], prototypes: &Matrix) -> Result<()> {
    if queries.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} queries but {} labels",
            queries.rows(),
            labels.len()
        )));
    }
    if queries.rows() == 0 {
        return Err(Error::InvalidArgument("no queries".into()));
    }
    if queries.cols() != prototypes.cols() {
        return Err(Error::Shape(format!(
            "query dimension {} vs prototype dimension {}",
            queries.cols(),
            prototypes.cols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= prototypes.rows()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside the {} episode classes",
            prototypes.rows()
        )));
    }
    Ok(())
}

/// Unit direction from `b` to `a`; zero when the points coincide.
fn unit_diff(a: &[f64], b: &[f64], dist: f64) -> Vec<f64> {
    if dist > 0.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) / dist).collect()
    } else {
        vec![0.0; a.len()]
    }
}

/// Prototypical cross-entropy with logits `-||q - c_k||` (plain Euclidean
/// distance, not squared).
pub fn pn_loss(queries: &Matrix, labels: &[usize], prototypes: &Matrix) -> Result<LossGrad> {
    check_episode(queries, labels, prototypes)?;
    if prototypes.rows() < 2 {
        return Err(Error::InvalidArgument(
            "prototypical loss needs at least two classes".into(),
        ));
    }
    let n = queries.rows() as f64;
    let mut loss = 0.0;
    let mut d_q = Matrix::zeros(queries.rows(), queries.cols());
    let mut d_c = Matrix::zeros(prototypes.rows(), prototypes.cols());
    for (i, (q, &y)) in queries.iter_rows().zip(labels).enumerate() {
        let dists: Vec<f64> = prototypes.iter_rows().map(|c| euclidean(q, c)).collect();
        let logits: Vec<f64> = dists.iter().map(|d| -d).collect();
        loss += log_sum_exp(&logits) - logits[y];
        let p = softmax(&logits);
        for (k, c) in prototypes.iter_rows().enumerate() {
            // dL/ds_k = p_k - [k == y];  ds_k/dq = -(q - c)/d
            let g = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
            let u = unit_diff(q, c, dists[k]);
            for (dq, ui) in d_q.row_mut(i).iter_mut().zip(&u) {
                *dq -= g * ui;
            }
            for (dc, ui) in d_c.row_mut(k).iter_mut().zip(&u) {
                *dc += g * ui;
            }
        }
    }
    Ok(LossGrad {
        loss: loss / n,
        d_queries: d_q,
        d_prototypes: d_c,
    })
}

/// Angular prototypical loss: logits `w * (cos(q, c_k) - m [k == y]) + b`.
pub fn ap_loss(
    queries: &Matrix,
    labels: &[usize],
    prototypes: &Matrix,
    scale: f64,
    bias: f64,
    margin: f64,
) -> Result<AngularLossGrad> {
    check_episode(queries, labels, prototypes)?;
    let q_norms: Vec<f64> = queries.iter_rows().map(norm).collect();
    let c_norms: Vec<f64> = prototypes.iter_rows().map(norm).collect();
    if let Some(i) = q_norms.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "query {i} has zero norm, cosine similarity is undefined"
        )));
    }
    if let Some(k) = c_norms.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "prototype {k} has zero norm, cosine similarity is undefined"
        )));
    }
    let n = queries.rows() as f64;
    let mut out = AngularLossGrad {
        loss: 0.0,
        d_queries: Matrix::zeros(queries.rows(), queries.cols()),
        d_prototypes: Matrix::zeros(prototypes.rows(), prototypes.cols()),
        d_scale: 0.0,
        d_bias: 0.0,
    };
    for (i, (q, &y)) in queries.iter_rows().zip(labels).enumerate() {
        let cos: Vec<f64> = prototypes
            .iter_rows()
            .zip(&c_norms)
            .map(|(c, cn)| dot(q, c) / (q_norms[i] * cn))
            .collect();
        let logits: Vec<f64> = cos
            .iter()
            .enumerate()
            .map(|(k, c)| scale * (c - if k == y { margin } else { 0.0 }) + bias)
            .collect();
        out.loss += log_sum_exp(&logits) - logits[y];
        let p = softmax(&logits);
        for (k, c) in prototypes.iter_rows().enumerate() {
            let g = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
            out.d_scale += g * (cos[k] - if k == y { margin } else { 0.0 });
            out.d_bias += g;
            // d cos / dq = c/(|q||c|) - cos q/|q|^2, symmetric for c.
            let gs = g * scale;
            let (qn, cn) = (q_norms[i], c_norms[k]);
            for ((dq, &qv), &cv) in out.d_queries.row_mut(i).iter_mut().zip(q).zip(c) {
                *dq += gs * (cv / (qn * cn) - cos[k] * qv / (qn * qn));
            }
            for ((dc, &qv), &cv) in out.d_prototypes.row_mut(k).iter_mut().zip(q).zip(c) {
                *dc += gs * (qv / (qn * cn) - cos[k] * cv / (cn * cn));
            }
        }
    }
    out.loss /= n;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// One triplet per row: a random same-class positive other than the anchor
/// and a random negative from any other class.
pub fn sample_triplets<R: Rng + ?Sized>(labels: &[usize], rng: &mut R) -> Result<Vec<Triplet>> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let populated = members.iter().filter(|m| !m.is_empty()).count();
    if populated < 2 {
        return Err(Error::InvalidArgument(
            "triplets need at least two classes".into(),
        ));
    }
    if let Some(l) = members.iter().position(|m| m.len() == 1) {
        return Err(Error::InvalidArgument(format!(
            "class {l} has a single sample, no positive can be formed"
        )));
    }
    let mut out = Vec::with_capacity(labels.len());
    for (anchor, &l) in labels.iter().enumerate() {
        let same = &members[l];
        let mut positive = same[rng.random_range(0..same.len() - 1)];
        if positive == anchor {
            positive = same[same.len() - 1];
        }
        let others = labels.len() - same.len();
        let mut pick = rng.random_range(0..others);
        let mut negative = 0;
        for (c, m) in members.iter().enumerate() {
            if c == l {
                continue;
            }
            if pick < m.len() {
                negative = m[pick];
                break;
            }
            pick -= m.len();
        }
        out.push(Triplet {
            anchor,
            positive,
            negative,
        });
    }
    Ok(out)
}

/// Mean hinge `max(0, d(a, p) - d(a, n) + m)` over the given triplets.
/// Returns the loss and the gradient for every embedding row.
pub fn tl_loss(embeddings: &Matrix, triplets: &[Triplet], margin: f64) -> Result<(f64, Matrix)> {
    if triplets.is_empty() {
        return Err(Error::InvalidArgument("no triplets".into()));
    }
    let rows = embeddings.rows();
    if let Some(t) = triplets
        .iter()
        .find(|t| t.anchor >= rows || t.positive >= rows || t.negative >= rows)
    {
        return Err(Error::Shape(format!(
            "triplet {t:?} indexes past {rows} rows"
        )));
    }
    let nt = triplets.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(rows, embeddings.cols());
    for t in triplets {
        let (a, p, ng) = (
            embeddings.row(t.anchor),
            embeddings.row(t.positive),
            embeddings.row(t.negative),
        );
        let d_ap = euclidean(a, p);
        let d_an = euclidean(a, ng);
        let term = d_ap - d_an + margin;
        if term <= 0.0 {
            continue;
        }
        loss += term;
        let u_ap = unit_diff(a, p, d_ap);
        let u_an = unit_diff(a, ng, d_an);
        for (k, (x, y)) in u_ap.iter().zip(&u_an).enumerate() {
            grad.row_mut(t.anchor)[k] += (x - y) / nt;
            grad.row_mut(t.positive)[k] -= x / nt;
            grad.row_mut(t.negative)[k] += y / nt;
        }
    }
    Ok((loss / nt, grad))
}

/// Output of [`open_proto_loss`].
#[derive(Debug, Clone)]
pub struct OpenLossGrad {
    pub loss: f64,
    pub d_queries: Matrix,
    pub d_prototypes: Matrix,
    pub d_dummies: Matrix,
}

/// Open-set prototypical loss over `1 + K` classes. Label 0 is the unknown
/// class, whose logit is the best (closest) dummy score; labels `1..=K`
/// address `prototypes` rows `0..K`.
pub fn open_proto_loss(
    queries: &Matrix,
    labels: &[usize],
    prototypes: &Matrix,
    dummies: &Matrix,
) -> Result<OpenLossGrad> {
    if prototypes.rows() < 2 {
        return Err(Error::InvalidArgument(
            "open-set loss needs at least two known classes".into(),
        ));
    }
    if dummies.rows() == 0 || dummies.cols() != prototypes.cols() {
        return Err(Error::Shape("dummy prototypes missing or mis-sized".into()));
    }
    if queries.rows() != labels.len() || queries.cols() != prototypes.cols() {
        return Err(Error::Shape("query/label/prototype shapes disagree".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > prototypes.rows()) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }
    let n = queries.rows() as f64;
    let mut out = OpenLossGrad {
        loss: 0.0,
        d_queries: Matrix::zeros(queries.rows(), queries.cols()),
        d_prototypes: Matrix::zeros(prototypes.rows(), prototypes.cols()),
        d_dummies: Matrix::zeros(dummies.rows(), dummies.cols()),
    };
    for (i, (q, &y)) in queries.iter_rows().zip(labels).enumerate() {
        let dummy_d: Vec<f64> = dummies.iter_rows().map(|u| euclidean(q, u)).collect();
        let closest = (0..dummy_d.len())
            .min_by(|&a, &b| dummy_d[a].total_cmp(&dummy_d[b]))
            .unwrap();
        let known_d: Vec<f64> = prototypes.iter_rows().map(|c| euclidean(q, c)).collect();
        let logits: Vec<f64> = std::iter::once(-dummy_d[closest])
            .chain(known_d.iter().map(|d| -d))
            .collect();
        out.loss += log_sum_exp(&logits) - logits[y];
        let p = softmax(&logits);
        for k in 0..logits.len() {
            let g = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
            let (target, dist, sink) = if k == 0 {
                (dummies.row(closest), dummy_d[closest], &mut out.d_dummies)
            } else {
                (prototypes.row(k - 1), known_d[k - 1], &mut out.d_prototypes)
            };
            let u = unit_diff(q, target, dist);
            let row = if k == 0 { closest } else { k - 1 };
            for (d, ui) in sink.row_mut(row).iter_mut().zip(&u) {
                *d += g * ui;
            }
            for (dq, ui) in out.d_queries.row_mut(i).iter_mut().zip(&u) {
                *dq -= g * ui;
            }
        }
    }
    out.loss /= n;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn prototype_means() {
        let p = compute_prototypes(&[m(&[&[3.0, -1.0]])]).unwrap();
        assert_eq!(p.row(0), &[3.0, -1.0]);
        let p = compute_prototypes(&[m(&[&[0.0, 2.0], &[2.0, 0.0]])]).unwrap();
        assert_eq!(p.row(0), &[1.0, 1.0]);
        assert!(compute_prototypes(&[Matrix::zeros(0, 2)]).is_err());
    }

    #[test]
    fn pn_equidistant_is_ln2() {
        let protos = m(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let r = pn_loss(&m(&[&[0.0, 3.0]]), &[0], &protos).unwrap();
        assert!((r.loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pn_at_own_prototype() {
        // Logits (0, -2): loss = ln(1 + e^-2) = 0.126928...
        let protos = m(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let r = pn_loss(&m(&[&[0.0, 0.0]]), &[0], &protos).unwrap();
        assert!(
            (r.loss - 0.126_928_011_042_972_6).abs() < 1e-12,
            "{}",
            r.loss
        );
    }

    #[test]
    fn pn_needs_two_classes() {
        let r = pn_loss(&m(&[&[0.0]]), &[0], &m(&[&[0.0]]));
        assert!(r.is_err());
    }

    #[test]
    fn ap_reference_values() {
        // w=1, b=0, m=0, query parallel to its prototype, orthogonal to the
        // other: logits (1, 0), loss = ln(1 + e^-1) = 0.313261...
        let protos = m(&[&[2.0, 0.0], &[0.0, 5.0]]);
        let r = ap_loss(&m(&[&[0.5, 0.0]]), &[0], &protos, 1.0, 0.0, 0.0).unwrap();
        assert!(
            (r.loss - 0.313_261_687_518_222_8).abs() < 1e-12,
            "{}",
            r.loss
        );

        let same = m(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let r = ap_loss(&m(&[&[-3.0, 0.5]]), &[2], &same, 10.0, -5.0, 0.0).unwrap();
        assert!((r.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ap_rejects_zero_vectors() {
        let protos = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let err = ap_loss(&m(&[&[0.0, 0.0]]), &[0], &protos, 1.0, 0.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("zero norm"));
    }

    #[test]
    fn triplet_hinge_values() {
        let emb = m(&[&[0.0], &[0.0], &[1.0]]);
        let t = Triplet {
            anchor: 0,
            positive: 1,
            negative: 2,
        };
        assert_eq!(tl_loss(&emb, &[t], 0.5).unwrap().0, 0.0);
        let emb = m(&[&[0.0], &[1.0], &[-0.2]]);
        assert!((tl_loss(&emb, &[t], 0.5).unwrap().0 - 1.3).abs() < 1e-12);
    }

    #[test]
    fn triplet_sampling_respects_classes() {
        let labels = [0, 0, 1, 1, 1, 2, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let ts = sample_triplets(&labels, &mut rng).unwrap();
            assert_eq!(ts.len(), labels.len());
            for (i, t) in ts.iter().enumerate() {
                assert_eq!(t.anchor, i);
                assert_ne!(t.positive, i);
                assert_eq!(labels[t.positive], labels[i]);
                assert_ne!(labels[t.negative], labels[i]);
            }
        }
        assert!(sample_triplets(&[0, 0, 1], &mut rng).is_err());
        assert!(sample_triplets(&[0, 0, 0], &mut rng).is_err());
    }

    #[test]
    fn open_loss_unknown_uses_closest_dummy() {
        let protos = m(&[&[5.0, 0.0], &[0.0, 5.0]]);
        let dummies = m(&[&[-5.0, 0.0], &[0.0, -1.0], &[9.0, 9.0]]);
        let q = m(&[&[0.0, -1.0]]);
        let r = open_proto_loss(&q, &[0], &protos, &dummies).unwrap();
        let logits = [0.0, -(26f64).sqrt(), -6.0];
        let expected = log_sum_exp(&logits) - logits[0];
        assert!((r.loss - expected).abs() < 1e-12);
        // Only the closest dummy receives gradient.
        assert!(r.d_dummies.row(0).iter().all(|&v| v == 0.0));
        assert!(r.d_dummies.row(2).iter().all(|&v| v == 0.0));
    }
}
