use crate::error::{Error, Result};

/// Relative shift applied below the smallest tail distance.
pub const SHIFT_FRACTION: f64 = 1e-6;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;

/// Weibull CDF on shifted distances, or a step when the fit is degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullTail {
    pub shape: f64,
    pub scale: f64,
    pub shift: f64,
    /// Step model at `shift`: 0 at or below, 1 above.
    pub degenerate: bool,
}

impl WeibullTail {
    pub fn step(at: f64) -> Self {
        Self {
            shape: 1.0,
            scale: 1.0,
            shift: at,
            degenerate: true,
        }
    }

    pub fn cdf(&self, d: f64) -> f64 {
        if d <= self.shift {
            return 0.0;
        }
        if self.degenerate {
            return 1.0;
        }
        let z = (d - self.shift) / self.scale;
        -(-z.powf(self.shape)).exp_m1()
    }
}

/// Maximum-likelihood two-parameter Weibull fit, returning `(shape, scale)`.
///
/// The shape solves the profile-likelihood equation
/// `sum(x^k ln x) / sum(x^k) - 1/k - mean(ln x) = 0`, which is increasing in
/// `k`; it is bracketed and then refined by Newton steps that fall back to
/// bisection whenever they leave the bracket.
pub fn weibull_mle(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "Weibull fit needs at least 2 samples".into(),
        ));
    }
    if samples.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument(
            "Weibull samples must be positive and finite".into(),
        ));
    }
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mean_log = logs.iter().sum::<f64>() / n;
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if logs.iter().all(|&l| (l - logs[0]).abs() < 1e-15) {
        return Err(Error::InvalidArgument(
            "Weibull samples are all equal".into(),
        ));
    }
    // Returns (g, g') at k, with x^k scaled by exp(-k max_log) for stability.
    let eval = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * (l - max_log)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let a = s1 / s0;
        (a - 1.0 / k - mean_log, s2 / s0 - a * a + 1.0 / (k * k))
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while eval(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NonFinite("Weibull shape diverged".into()));
        }
    }
    while eval(lo).0 > 0.0 {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::NonFinite("Weibull shape collapsed to zero".into()));
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (g, dg) = eval(k);
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        let next = if newton > lo && newton < hi && dg > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - k).abs() <= TOL * k.max(1.0) || hi - lo <= TOL * k.max(1.0);
        k = next;
        if done {
            break;
        }
    }
    let mean_pow = logs.iter().map(|&l| (k * (l - max_log)).exp()).sum::<f64>() / n;
    let scale = (max_log + mean_pow.ln() / k).exp();
    Ok((k, scale))
}

/// Fits a tail model to distances: shift just below the minimum, then an
/// MLE Weibull on the shifted values. Fewer than two distinct values give
/// the step model at the largest distance.
pub fn fit_weibull_tail(distances: &[f64]) -> Result<WeibullTail> {
    if distances.is_empty() {
        return Err(Error::InvalidArgument("no distances to fit".into()));
    }
    if distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidArgument(
            "distances must be finite and >= 0".into(),
        ));
    }
    let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = distances.iter().cloned().fold(0.0, f64::max);
    if distances.len() < 2 || max - min <= 1e-12 * max.max(1e-300) {
        return Ok(WeibullTail::step(max));
    }
    let shift = min * (1.0 - SHIFT_FRACTION);
    // A zero minimum leaves a zero sample; floor it far below the others.
    let floor = (max - shift) * 1e-12;
    let shifted: Vec<f64> = distances.iter().map(|d| (d - shift).max(floor)).collect();
    let (shape, scale) = weibull_mle(&shifted)?;
    Ok(WeibullTail {
        shape,
        scale,
        shift,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_distances_give_step() {
        let t = fit_weibull_tail(&[1.0; 5]).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.cdf(1.0), 0.0);
        assert_eq!(t.cdf(1.0 + 1e-9), 1.0);
        assert_eq!(t.cdf(0.5), 0.0);
    }

    #[test]
    fn scale_satisfies_profile_identity() {
        let xs = [0.3, 1.1, 0.7, 2.5, 0.05, 1.9];
        let (k, lam) = weibull_mle(&xs).unwrap();
        let lhs = lam.powf(k);
        let rhs = xs.iter().map(|x: &f64| x.powf(k)).sum::<f64>() / xs.len() as f64;
        assert!((lhs - rhs).abs() < 1e-9 * rhs);
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let t = fit_weibull_tail(&[0.8, 0.9, 1.3, 1.0, 1.7]).unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let v = t.cdf(i as f64 * 0.01);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(t.cdf(t.shift), 0.0);
    }

    #[test]
    fn single_distance_is_a_step() {
        assert!(fit_weibull_tail(&[0.4]).unwrap().degenerate);
    }
}
