//! Random pairs of similar inputs.
//!
//! All generated reals lie on the sampling grid, so that differences
//! between samples and centers are exact multiples of the granularity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::interp::run_rng;
use crate::sampler::DEFAULT_GRANULARITY;

/// Adjacency relation between two inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Relation {
    /// Same length, `sum |x1_i - x2_i| <= bound`.
    L1(f64),
    /// Same length, `|x1_i - x2_i| < bound` for every `i`.
    CoordinateWise(f64),
    /// Multisets differing by at most `bound` insertions or deletions.
    DatabaseDistance(usize),
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Relation::L1(k) => write!(f, "l1 <= {k}"),
            Relation::CoordinateWise(k) => write!(f, "each |dx| < {k}"),
            Relation::DatabaseDistance(k) => write!(f, "database distance <= {k}"),
        }
    }
}

/// Two inputs related by `relation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub relation: Relation,
    pub seed: u64,
}

/// Value range and grid for generated reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub low: f64,
    /// Exclusive upper end.
    pub high: f64,
    pub granularity: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            low: -2.0,
            high: 2.0,
            granularity: DEFAULT_GRANULARITY,
        }
    }
}

impl GenConfig {
    pub fn with_range(low: f64, high: f64) -> Self {
        GenConfig {
            low,
            high,
            ..GenConfig::default()
        }
    }

    fn value<G: Rng>(&self, rng: &mut G) -> f64 {
        let steps = ((self.high - self.low) / self.granularity).floor() as u64;
        self.low + rng.gen_range(0..steps.max(1)) as f64 * self.granularity
    }

    /// Rounds toward zero onto the grid.
    fn quantize_toward_zero(&self, x: f64) -> f64 {
        (x / self.granularity).trunc() * self.granularity
    }
}

/// Generates a related pair with `size` elements in `x1`.
pub fn generate(relation: Relation, size: usize, seed: u64, cfg: &GenConfig) -> SimilarPair {
    let mut rng = run_rng(seed, u64::MAX);
    let x1: Vec<f64> = (0..size).map(|_| cfg.value(&mut rng)).collect();
    let x2 = match relation {
        Relation::CoordinateWise(bound) => x1
            .iter()
            .map(|&x| {
                let d = cfg.quantize_toward_zero(rng.gen_range(-bound..bound));
                // stay strictly inside the bound after rounding
                let d = if d.abs() >= bound { 0.0 } else { d };
                x + d
            })
            .collect(),
        Relation::L1(bound) => {
            let total = rng.gen_range(0.0..=bound);
            let weights: Vec<f64> = (0..size).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let sum: f64 = weights.iter().sum();
            x1.iter()
                .zip(&weights)
                .map(|(&x, &w)| {
                    let mag = if sum > 0.0 { total * w / sum } else { 0.0 };
                    let d = cfg.quantize_toward_zero(mag);
                    if rng.gen::<bool>() {
                        x + d
                    } else {
                        x - d
                    }
                })
                .collect()
        }
        Relation::DatabaseDistance(k) => {
            let mut x2 = x1.clone();
            let edits = rng.gen_range(0..=k);
            for _ in 0..edits {
                if !x2.is_empty() && rng.gen::<bool>() {
                    let i = rng.gen_range(0..x2.len());
                    x2.remove(i);
                } else {
                    let i = rng.gen_range(0..=x2.len());
                    x2.insert(i, cfg.value(&mut rng));
                }
            }
            x2
        }
    };
    SimilarPair {
        x1,
        x2,
        relation,
        seed,
    }
}

/// Makes sure the pair really is related, for use as a test oracle.
pub fn verify(pair: &SimilarPair) -> bool {
    related(&pair.x1, &pair.x2, pair.relation)
}

pub fn related(x1: &[f64], x2: &[f64], relation: Relation) -> bool {
    match relation {
        Relation::CoordinateWise(bound) => {
            x1.len() == x2.len() && x1.iter().zip(x2).all(|(a, b)| (a - b).abs() < bound)
        }
        Relation::L1(bound) => {
            x1.len() == x2.len() && x1.iter().zip(x2).map(|(a, b)| (a - b).abs()).sum::<f64>() <= bound
        }
        Relation::DatabaseDistance(k) => multiset_distance(x1, x2) <= k,
    }
}

/// Size of the symmetric difference of two multisets.
pub fn multiset_distance(a: &[f64], b: &[f64]) -> usize {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].total_cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    a.len() + b.len() - 2 * common
}

/// Input size as a function of the test iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRamp {
    pub start: usize,
    pub max: usize,
    /// Iterations per size increment.
    pub every: usize,
}

impl SizeRamp {
    pub fn fixed(n: usize) -> Self {
        SizeRamp {
            start: n,
            max: n,
            every: 1,
        }
    }

    pub fn size_at(&self, iteration: usize) -> usize {
        (self.start + iteration / self.every.max(1)).min(self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_distance_counts_edits() {
        assert_eq!(multiset_distance(&[1.0, 2.0, 2.0], &[2.0, 1.0]), 1);
        assert_eq!(multiset_distance(&[], &[3.0, 4.0]), 2);
    }

    #[test]
    fn ramp_grows_then_saturates() {
        let r = SizeRamp {
            start: 1,
            max: 3,
            every: 2,
        };
        let sizes: Vec<usize> = (0..8).map(|i| r.size_at(i)).collect();
        assert_eq!(sizes, vec![1, 1, 2, 2, 3, 3, 3, 3]);
    }
}
