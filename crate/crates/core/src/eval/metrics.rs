use crate::error::{Error, Result};
use crate::openset::{decide, ScoreVector};

/// Fraction of negatives that `decide` accepts at `gamma`.
pub fn false_acceptance(negatives: &[ScoreVector], gamma: f64) -> f64 {
    if negatives.is_empty() {
        return 0.0;
    }
    let accepted = negatives
        .iter()
        .filter(|p| decide(p.probs(), gamma) != 0)
        .count();
    accepted as f64 / negatives.len() as f64
}

/// Candidate thresholds: 0, the top known probability of every negative the
/// argmax would accept, and 1. Sorted and deduplicated.
pub fn gamma_candidates(negatives: &[ScoreVector]) -> Vec<f64> {
    let mut c = vec![0.0, 1.0];
    c.extend(
        negatives
            .iter()
            .filter(|p| p.argmax() != 0)
            .map(|p| p.max_known()),
    );
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Smallest candidate threshold whose false-acceptance rate on `negatives`
/// is at most `far_target`. If even 1 is too permissive (negatives scored
/// with probability exactly 1), 1 is returned.
pub fn tune_gamma(negatives: &[ScoreVector], far_target: f64) -> Result<f64> {
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "FAR target {far_target} outside (0, 1)"
        )));
    }
    if negatives.is_empty() {
        return Err(Error::InvalidArgument("no negatives to tune on".into()));
    }
    let candidates = gamma_candidates(negatives);
    for &g in &candidates {
        if false_acceptance(negatives, g) <= far_target {
            return Ok(g);
        }
    }
    log::warn!("no threshold reaches FAR {far_target}; using 1");
    Ok(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub acc: f64,
    pub frr: f64,
    pub far: f64,
    /// Positives accepted as the wrong keyword.
    pub wrong: f64,
}

/// `positives` pairs a true label (1..=N) with its scores.
pub fn compute_metrics(
    positives: &[(usize, ScoreVector)],
    negatives: &[ScoreVector],
    gamma: f64,
) -> Result<Rates> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "metrics need positives and negatives".into(),
        ));
    }
    let (mut correct, mut rejected, mut wrong) = (0usize, 0usize, 0usize);
    for (label, p) in positives {
        match decide(p.probs(), gamma) {
            0 => rejected += 1,
            y if y == *label => correct += 1,
            _ => wrong += 1,
        }
    }
    let n = positives.len() as f64;
    Ok(Rates {
        acc: correct as f64 / n,
        frr: rejected as f64 / n,
        far: false_acceptance(negatives, gamma),
        wrong: wrong as f64 / n,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U over the pooled ranking).
pub fn auroc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidArgument("AUROC needs both classes".into()));
    }
    if positives.iter().chain(negatives).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN detection score".into()));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of mid-ranks of positives (1-based).
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}
