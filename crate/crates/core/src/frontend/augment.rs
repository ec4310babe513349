use rand::Rng;

use super::{mean_power, Waveform};
use crate::error::{Error, Result};

/// Attempts at finding a non-silent noise segment before giving up.
pub const NOISE_RETRIES: usize = 5;

/// Returns `signal + g * noise` with `g` chosen so that the power ratio of
/// signal to scaled noise is exactly `snr_db`.
pub fn mix_noise(signal: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if signal.len() != noise.len() {
        return Err(Error::Shape(format!(
            "signal has {} samples, noise has {}",
            signal.len(),
            noise.len()
        )));
    }
    let ps = signal.power();
    let pn = noise.power();
    if !(ps > 0.0) {
        return Err(Error::InvalidArgument("signal is silent".into()));
    }
    if !(pn > 0.0) {
        return Err(Error::InvalidArgument("noise segment is silent".into()));
    }
    let gain = noise_gain(ps, pn, snr_db);
    let samples = signal
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, n)| s + gain * n)
        .collect();
    Ok(Waveform::new(samples, signal.sample_rate))
}

pub(crate) fn noise_gain(signal_power: f64, noise_power: f64, snr_db: f64) -> f64 {
    (signal_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Random additive-noise augmentation.
#[derive(Debug, Clone)]
pub struct AugmentationPolicy {
    pub apply_probability: f64,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    pub noise_pool: Vec<Vec<f64>>,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self {
            apply_probability: 0.95,
            snr_low_db: 0.0,
            snr_high_db: 5.0,
            noise_pool: Vec::new(),
        }
    }
}

impl AugmentationPolicy {
    pub fn disabled() -> Self {
        Self {
            apply_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::InvalidArgument(format!(
                "apply_probability {} outside [0, 1]",
                self.apply_probability
            )));
        }
        if !(self.snr_low_db <= self.snr_high_db) {
            return Err(Error::InvalidArgument(format!(
                "snr range [{}, {}] is empty",
                self.snr_low_db, self.snr_high_db
            )));
        }
        if self.noise_pool.iter().any(|n| n.is_empty()) {
            return Err(Error::InvalidArgument(
                "empty noise waveform in pool".into(),
            ));
        }
        Ok(())
    }

    /// Applies the policy. The Bernoulli draw always happens first, so the
    /// number of RNG draws for a skipped clip does not depend on the pool.
    pub fn apply<R: Rng + ?Sized>(&self, w: &Waveform, rng: &mut R) -> Waveform {
        let coin: f64 = rng.random();
        if coin >= self.apply_probability || self.noise_pool.is_empty() {
            return w.clone();
        }
        let noise = &self.noise_pool[rng.random_range(0..self.noise_pool.len())];
        let snr_db = if self.snr_high_db > self.snr_low_db {
            rng.random_range(self.snr_low_db..self.snr_high_db)
        } else {
            self.snr_low_db
        };
        let ps = w.power();
        if !(ps > 0.0) {
            return w.clone();
        }
        for _ in 0..NOISE_RETRIES {
            let segment = noise_segment(noise, w.len(), rng);
            let pn = mean_power(&segment);
            if pn > 0.0 {
                let g = noise_gain(ps, pn, snr_db);
                let samples = w
                    .samples
                    .iter()
                    .zip(&segment)
                    .map(|(s, n)| s + g * n)
                    .collect();
                return Waveform::new(samples, w.sample_rate);
            }
        }
        log::debug!("no audible noise segment after {NOISE_RETRIES} tries, skipping");
        w.clone()
    }
}

/// Crops `len` samples at a uniform random offset; short noise is wrapped.
fn noise_segment<R: Rng + ?Sized>(noise: &[f64], len: usize, rng: &mut R) -> Vec<f64> {
    if noise.len() >= len {
        let start = rng.random_range(0..=noise.len() - len);
        noise[start..start + len].to_vec()
    } else {
        let start = rng.random_range(0..noise.len());
        (0..len).map(|i| noise[(start + i) % noise.len()]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_wave(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Waveform {
        Waveform::new((0..n).map(|_| rng.random_range(-amp..amp)).collect(), 16000)
    }

    fn measured_snr(signal: &Waveform, mixed: &Waveform) -> f64 {
        let residual: Vec<f64> = mixed
            .samples
            .iter()
            .zip(&signal.samples)
            .map(|(m, s)| m - s)
            .collect();
        10.0 * (signal.power() / mean_power(&residual)).log10()
    }

    #[test]
    fn equal_power_gains() {
        assert!((noise_gain(0.3, 0.3, 0.0) - 1.0).abs() < 1e-15);
        assert!((noise_gain(0.3, 0.3, 20.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn measured_snr_matches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_wave(&mut rng, 16000, 0.5);
        let n = random_wave(&mut rng, 16000, 0.2);
        let mixed = mix_noise(&s, &n, 3.7).unwrap();
        assert!((measured_snr(&s, &mixed) - 3.7).abs() < 1e-9);
    }

    #[test]
    fn doubling_gain_costs_six_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_wave(&mut rng, 4000, 0.5);
        let n = random_wave(&mut rng, 4000, 0.2);
        let g = noise_gain(s.power(), n.power(), 5.0);
        let scaled = |gain: f64| {
            Waveform::new(
                s.samples
                    .iter()
                    .zip(&n.samples)
                    .map(|(a, b)| a + gain * b)
                    .collect(),
                16000,
            )
        };
        let d = measured_snr(&s, &scaled(g)) - measured_snr(&s, &scaled(2.0 * g));
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn mix_errors() {
        let s = Waveform::new(vec![0.1; 10], 16000);
        assert!(mix_noise(&s, &Waveform::new(vec![0.1; 9], 16000), 0.0).is_err());
        assert!(mix_noise(&s, &Waveform::new(vec![0.0; 10], 16000), 0.0).is_err());
        assert!(mix_noise(&Waveform::new(vec![0.0; 10], 16000), &s, 0.0).is_err());
    }

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_wave(&mut rng, 1000, 0.5);
        let policy = AugmentationPolicy {
            apply_probability: 0.0,
            noise_pool: vec![vec![0.3; 5000]],
            ..Default::default()
        };
        for _ in 0..20 {
            assert_eq!(policy.apply(&w, &mut rng), w);
        }
    }

    #[test]
    fn silent_noise_skips_after_retries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_wave(&mut rng, 1000, 0.5);
        let policy = AugmentationPolicy {
            apply_probability: 1.0,
            noise_pool: vec![vec![0.0; 3000]],
            ..Default::default()
        };
        assert_eq!(policy.apply(&w, &mut rng), w);
    }

    #[test]
    fn applied_noise_lands_in_snr_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_wave(&mut rng, 2000, 0.5);
        let noise = random_wave(&mut rng, 700, 0.1).samples;
        let policy = AugmentationPolicy {
            apply_probability: 1.0,
            noise_pool: vec![noise],
            ..Default::default()
        };
        for _ in 0..10 {
            let out = policy.apply(&w, &mut rng);
            let snr = measured_snr(&w, &out);
            assert!((-1e-9..=5.0 + 1e-9).contains(&snr), "{snr}");
        }
    }

    #[test]
    fn policy_validation() {
        let mut p = AugmentationPolicy::default();
        assert!(p.validate().is_ok());
        p.snr_low_db = 6.0;
        assert!(p.validate().is_err());
        p = AugmentationPolicy {
            apply_probability: 1.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
