use serde::{Deserialize, Serialize};

use crate::dsp::{stft, StftParams};
use crate::error::{Error, Result};

/// SI-SDR values are clamped to `[-SI_SDR_CAP_DB, SI_SDR_CAP_DB]`.
pub const SI_SDR_CAP_DB: f64 = 60.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_length(reference: &[f64], estimate: &[f64]) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::arg(format!(
            "reference and estimate differ in length ({} vs {})",
            reference.len(),
            estimate.len()
        )));
    }
    Ok(())
}

/// Scale-invariant SDR in dB.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    same_length(reference, estimate)?;
    let rr = dot(reference, reference);
    if rr == 0.0 {
        return Err(Error::arg("SI-SDR reference is all zeros"));
    }
    let scale = dot(estimate, reference) / rr;
    let target: f64 = rr * scale * scale;
    let residual: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| {
            let d = e - scale * r;
            d * d
        })
        .sum();
    let db = 10.0 * (target / residual).log10();
    Ok(if db.is_nan() { -SI_SDR_CAP_DB } else { db.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub l1: f64,
    pub stft_l1: f64,
    pub si_sdr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { l1: 1.0, stft_l1: 1.0, si_sdr: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub l1: f64,
    pub stft_l1: f64,
    pub neg_si_sdr: f64,
    pub combined: f64,
}

/// Waveform L1, spectral-magnitude L1 and negated SI-SDR between a
/// reference and an estimate, plus their weighted sum.
pub fn loss_terms(reference: &[f64], estimate: &[f64], params: StftParams, weights: LossWeights) -> Result<LossTerms> {
    same_length(reference, estimate)?;
    let neg_si_sdr = -si_sdr(reference, estimate)?;
    let l1 = reference.iter().zip(estimate).map(|(r, e)| (e - r).abs()).sum::<f64>() / reference.len() as f64;
    let sr = stft(reference, params)?;
    let se = stft(estimate, params)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for (fr, fe) in sr.frames.iter().zip(&se.frames) {
        for (r, e) in fr.iter().zip(fe) {
            acc += (e.norm() - r.norm()).abs();
            count += 1;
        }
    }
    let stft_l1 = acc / count as f64;
    Ok(LossTerms {
        l1,
        stft_l1,
        neg_si_sdr,
        combined: weights.l1 * l1 + weights.stft_l1 * stft_l1 + weights.si_sdr * neg_si_sdr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn caps_and_scale() {
        let r = random(1000, 1);
        assert_eq!(si_sdr(&r, &r).unwrap(), 60.0);
        let scaled: Vec<f64> = r.iter().map(|x| 0.3 * x).collect();
        assert_eq!(si_sdr(&r, &scaled).unwrap(), 60.0);
        assert_eq!(si_sdr(&r, &vec![0.0; 1000]).unwrap(), -60.0);
        assert!(si_sdr(&[0.0; 4], &[1.0; 4]).is_err());
        assert!(si_sdr(&[1.0; 4], &[1.0; 3]).is_err());
    }

    #[test]
    fn orthogonal_noise_ten_db() {
        // sin and cos over whole periods are orthogonal
        let n = 1600;
        let r: Vec<f64> = (0..n).map(|i| (2.0 * PI * 5.0 * i as f64 / n as f64).sin()).collect();
        let c: Vec<f64> = (0..n).map(|i| (2.0 * PI * 5.0 * i as f64 / n as f64).cos() / 10f64.sqrt()).collect();
        let est: Vec<f64> = r.iter().zip(&c).map(|(a, b)| a + b).collect();
        assert!((si_sdr(&r, &est).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn loss_identity_and_offset() {
        let r = random(4000, 2);
        let t = loss_terms(&r, &r, StftParams::default(), LossWeights::default()).unwrap();
        assert_eq!((t.l1, t.stft_l1, t.neg_si_sdr), (0.0, 0.0, -60.0));
        let off: Vec<f64> = r.iter().map(|x| x + 0.1).collect();
        let t = loss_terms(&r, &off, StftParams::default(), LossWeights::default()).unwrap();
        assert!((t.l1 - 0.1).abs() < 1e-12);
        assert!((t.combined - (t.l1 + t.stft_l1 + t.neg_si_sdr)).abs() < 1e-12);
    }
}
