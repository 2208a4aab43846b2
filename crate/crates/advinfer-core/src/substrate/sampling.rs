//! Seeded sampling utilities: temperature reshaping, categorical draws and
//! deterministic seed derivation for independent sub-streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SubstrateError;

/// Reshape a probability vector with a temperature exponent:
/// `p_τ(i) = p(i)^{1/τ} / Σ_j p(j)^{1/τ}`.
///
/// `τ = 1` returns the input bit-identically (sampling with it is exactly
/// unmodified sampling). Computed in log space so sharp temperatures do not
/// underflow; zero entries stay exactly zero.
pub fn softmax_with_temperature(p: &[f64], tau: f64) -> Result<Vec<f64>, SubstrateError> {
    if !(tau > 0.0) {
        return Err(SubstrateError::InvalidTemperature { tau });
    }
    if p.is_empty() || p.iter().all(|v| *v == 0.0) {
        return Err(SubstrateError::EmptyInput { context: "softmax_with_temperature" });
    }
    if tau == 1.0 {
        return Ok(p.to_vec());
    }
    let logs: Vec<f64> = p.iter().map(|v| v.ln() / tau).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Inverse-CDF draw from a probability vector.
pub fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut cum = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    // Rounding may leave cum slightly below 1; fall back to the last
    // positive-mass entry.
    last_nonzero
}

/// Derive an independent stream seed from a base seed and a tag path
/// (splitmix64-style mixing; stable across platforms).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = base;
    for &t in tags {
        s = mix(s.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(t));
    }
    mix(s)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable 64-bit hash of a byte string, for seed tags derived from ids.
pub fn tag(bytes: &[u8]) -> u64 {
    // FNV-1a.
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_one_is_bit_identical() {
        let p = vec![0.25, 0.5, 0.125, 0.125];
        let q = softmax_with_temperature(&p, 1.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn tau_half_matches_direct_evaluation() {
        // (0.8, 0.2) at τ = 0.5 → (0.64, 0.04) / 0.68 = (16/17, 1/17).
        let q = softmax_with_temperature(&[0.8, 0.2], 0.5).unwrap();
        assert!((q[0] - 16.0 / 17.0).abs() < 1e-12);
        assert!((q[1] - 1.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn tau_to_zero_concentrates_on_argmax() {
        let q = softmax_with_temperature(&[0.8, 0.2], 0.01).unwrap();
        assert!(q[0] > 0.999);
    }

    #[test]
    fn invalid_temperature_and_zero_vector_fail() {
        assert!(softmax_with_temperature(&[0.5, 0.5], 0.0).is_err());
        assert!(softmax_with_temperature(&[0.5, 0.5], -1.0).is_err());
        assert!(softmax_with_temperature(&[0.0, 0.0], 0.5).is_err());
        assert!(softmax_with_temperature(&[], 0.5).is_err());
    }

    #[test]
    fn zero_entries_stay_zero() {
        let q = softmax_with_temperature(&[0.0, 0.7, 0.3], 0.2).unwrap();
        assert_eq!(q[0], 0.0);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(7, &[1]);
        let b = derive_seed(7, &[2]);
        let c = derive_seed(8, &[1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[1]));
    }

    #[test]
    fn categorical_hits_every_bucket() {
        let mut rng = rng_from(3);
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[categorical(&mut rng, &probs)] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
        assert!((counts[1] as f64 / 3000.0 - 0.5).abs() < 0.05);
    }
}
