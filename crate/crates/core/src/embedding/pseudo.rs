use rand::Rng;

use crate::corpus::clean_text;
use crate::seed::{keyed_rng, stable_hash};

/// Weight of the per-text noise component; the rest is the trigram bias.
const NOISE_WEIGHT: f64 = 0.1;
/// Stream key for trigram vectors. Trigram vectors ignore the caller's seed
/// so that the lexical geometry is shared across seeds.
const TRIGRAM_STREAM: u64 = 0x7472_6967_7261_6d73;

/// Deterministic stand-in embedding with entries in `[-1, 1]`.
///
/// A noise vector keyed by `hash(clean_text(text))` and `seed` is blended
/// with the max-normalized sum of fixed per-trigram vectors, so texts that
/// share character trigrams land close together.
pub fn pseudo_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let normalized = clean_text(text);
    let mut rng = keyed_rng(seed, stable_hash(normalized.as_bytes()), 0);
    let noise: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();

    let mut bias = vec![0.0f64; dim];
    let padded: Vec<char> = format!(" {normalized} ").chars().collect();
    for window in padded.windows(3) {
        let trigram: String = window.iter().collect();
        let mut trng = keyed_rng(TRIGRAM_STREAM, stable_hash(trigram.as_bytes()), 0);
        for b in bias.iter_mut() {
            *b += trng.gen_range(-1.0..=1.0);
        }
    }
    let peak = bias.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        bias.iter_mut().for_each(|b| *b /= peak);
    }

    noise
        .iter()
        .zip(&bias)
        .map(|(n, b)| (NOISE_WEIGHT * n + (1.0 - NOISE_WEIGHT) * b).clamp(-1.0, 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn deterministic() {
        assert_eq!(pseudo_embed("great drug", 32, 5), pseudo_embed("great drug", 32, 5));
        assert!((cosine(&pseudo_embed("x y", 32, 5), &pseudo_embed("x y", 32, 5)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_changes_vector() {
        assert_ne!(pseudo_embed("great drug", 32, 5), pseudo_embed("great drug", 32, 6));
    }

    #[test]
    fn single_char_shape() {
        let v = pseudo_embed("a", 4, 0);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn normalization_is_applied_first() {
        assert_eq!(pseudo_embed("  Good DRUG ", 16, 1), pseudo_embed("good drug", 16, 1));
    }

    #[test]
    fn lexical_neighbours_are_closer() {
        let a = pseudo_embed("terrible nausea and dizziness", 64, 0);
        let b = pseudo_embed("terrible nausea and headaches", 64, 0);
        let c = pseudo_embed("wonderful relief, highly recommend", 64, 0);
        assert!(cosine(&a, &b) > cosine(&a, &c));
    }
}
