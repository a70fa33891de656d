//! Weak and strong spectral augmentation families.
//!
//! Weak augmentation makes small local changes (optional Gaussian smoothing,
//! multiplicative scaling, additive noise) that leave the overall shape
//! intact. Strong augmentation additionally manipulates the global context:
//! a circular channel shift and, with some probability, a channel-axis
//! reversal. Both are pure given an explicit random stream.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{split, Stream};
use crate::spectra::Spectrum;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WeakAugConfig {
    /// Noise standard deviation as a fraction of the per-spectrum
    /// intensity range.
    pub noise_sigma: f64,
    /// Multiplicative scale bounds (low, high).
    pub scale_range: (f64, f64),
    /// Probability of applying Gaussian smoothing.
    pub smooth_prob: f64,
    /// Smoothing kernel length (odd).
    pub smooth_kernel: usize,
}

impl Default for WeakAugConfig {
    fn default() -> Self {
        WeakAugConfig {
            noise_sigma: 0.01,
            scale_range: (0.9, 1.1),
            smooth_prob: 0.5,
            smooth_kernel: 5,
        }
    }
}

impl WeakAugConfig {
    /// Configuration with every perturbation disabled (identity transform).
    pub fn disabled() -> Self {
        WeakAugConfig {
            noise_sigma: 0.0,
            scale_range: (1.0, 1.0),
            smooth_prob: 0.0,
            smooth_kernel: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::config(format!("scale_range must satisfy 0 < low <= high, got ({lo}, {hi})")));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::config("noise_sigma must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.smooth_prob) {
            return Err(Error::config("smooth_prob must be in [0, 1]"));
        }
        if self.smooth_kernel % 2 == 0 || self.smooth_kernel == 0 {
            return Err(Error::config("smooth_kernel must be odd"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StrongAugConfig {
    pub weak: WeakAugConfig,
    /// Maximum circular shift in channels (either direction).
    pub max_shift: usize,
    /// Probability of reversing the intensity sequence.
    pub flip_prob: f64,
}

impl Default for StrongAugConfig {
    fn default() -> Self {
        StrongAugConfig { weak: WeakAugConfig::default(), max_shift: 30, flip_prob: 0.5 }
    }
}

impl StrongAugConfig {
    pub fn disabled() -> Self {
        StrongAugConfig { weak: WeakAugConfig::disabled(), max_shift: 0, flip_prob: 0.0 }
    }

    pub fn validate(&self, spectrum_len: usize) -> Result<()> {
        self.weak.validate()?;
        if self.max_shift >= spectrum_len {
            return Err(Error::config(format!(
                "max_shift {} must be < spectrum length {spectrum_len}",
                self.max_shift
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::config("flip_prob must be in [0, 1]"));
        }
        Ok(())
    }
}

/// The two contrastive views of one source spectrum.
#[derive(Debug, Clone)]
pub struct AugmentedPair {
    pub weak_view: Spectrum,
    pub strong_view: Spectrum,
    pub source_id: String,
}

/// Normalized Gaussian kernel of odd length `k` with sigma = k / 5.
fn gaussian_kernel(k: usize) -> Vec<f64> {
    let sigma = k as f64 / 5.0;
    let half = (k / 2) as isize;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|i| {
            let d = i as f64 / sigma;
            (-0.5 * d * d).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in kernel.iter_mut() {
        *v /= sum;
    }
    kernel
}

/// Convolves with reflection at the boundaries; length preserved.
fn smooth(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len() as isize;
    let half = (kernel.len() / 2) as isize;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, &w)| {
                    let mut ix = i + j as isize - half;
                    if ix < 0 {
                        ix = -ix;
                    }
                    if ix >= n {
                        ix = 2 * (n - 1) - ix;
                    }
                    w * values[ix as usize]
                })
                .sum()
        })
        .collect()
}

/// Weak augmentation: optional smoothing, then scaling, then additive noise
/// proportional to the source intensity range.
pub fn weak_augment(s: &Spectrum, cfg: &WeakAugConfig, rng: &mut Stream) -> Spectrum {
    let range = s.intensity_range();
    let mut values = s.intensities.clone();
    if cfg.smooth_prob > 0.0 && rng.gen::<f64>() < cfg.smooth_prob {
        values = smooth(&values, &gaussian_kernel(cfg.smooth_kernel));
    }
    let (lo, hi) = cfg.scale_range;
    let scale = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let sigma = cfg.noise_sigma * range;
    for v in values.iter_mut() {
        *v *= scale;
        if sigma > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            *v += sigma * n;
        }
    }
    Spectrum { id: s.id.clone(), axis: s.axis.clone(), intensities: values }
}

/// Strong augmentation: weak augmentation, then a circular channel shift,
/// then a possible channel-axis reversal.
pub fn strong_augment(s: &Spectrum, cfg: &StrongAugConfig, rng: &mut Stream) -> Spectrum {
    let mut out = weak_augment(s, &cfg.weak, rng);
    let shift = if cfg.max_shift > 0 {
        rng.gen_range(-(cfg.max_shift as i64)..=cfg.max_shift as i64)
    } else {
        0
    };
    if shift != 0 {
        let n = out.intensities.len() as i64;
        let k = shift.rem_euclid(n) as usize;
        out.intensities.rotate_right(k);
    }
    if cfg.flip_prob > 0.0 && rng.gen::<f64>() < cfg.flip_prob {
        out.intensities.reverse();
    }
    out
}

/// Builds the weak/strong view pair with independent substreams, so the
/// strong view's draws never depend on how many draws the weak view made.
pub fn make_pair(
    s: &Spectrum,
    weak_cfg: &WeakAugConfig,
    strong_cfg: &StrongAugConfig,
    rng: &mut Stream,
) -> AugmentedPair {
    let mut weak_rng = split(rng);
    let mut strong_rng = split(rng);
    AugmentedPair {
        weak_view: weak_augment(s, weak_cfg, &mut weak_rng),
        strong_view: strong_augment(s, strong_cfg, &mut strong_rng),
        source_id: s.id.clone(),
    }
}
