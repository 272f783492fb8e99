//! Exactly uniform sampling of perfect matchings through self-reducibility,
//! and sample-size bounds for estimating outcome frequencies.
//!
//! A draw repeatedly takes the first unmatched node `u` and pairs it with
//! neighbor `v` with probability `N(G - u - v) / N(G)`, where `N` counts
//! perfect matchings of the current residual graph. The step probabilities
//! telescope to `1 / N(G)` for every matching, and the random choice is made
//! with an exact big-integer draw, so the procedure is uniform with no
//! floating-point bias.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fkt::{FktError, PlanarCounter};
use crate::graph::{BigCount, DualGraph, Matching};
use crate::nodeset::NodeSet;

/// Name recorded in run manifests for the generator behind every seed.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng (rand_chacha 0.9, seed_from_u64)";

/// Residual counts kept before the cache is reset.
const CACHE_LIMIT: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("graph has no perfect matching to sample")]
    NoMatchings,
    #[error("{0}; sampling is only supported for planar drawings")]
    Counting(#[from] FktError),
    #[error("internal error: neighbor counts {got} do not sum to residual count {want}")]
    Inconsistent { got: BigCount, want: BigCount },
}

/// One sampled matching with the exact probability of every step taken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Draw {
    pub matching: Matching,
    /// `(numerator, denominator)` of each step's selection probability.
    pub steps: Vec<(BigCount, BigCount)>,
}

impl Draw {
    /// Product of the step probabilities, as an unreduced fraction.
    pub fn probability(&self) -> (BigCount, BigCount) {
        self.steps
            .iter()
            .fold((BigCount::one(), BigCount::one()), |(num, den), (a, b)| {
                (num * a, den * b)
            })
    }

    /// The step probabilities multiply to exactly `1 / total`.
    pub fn has_probability_inverse_of(&self, total: &BigCount) -> bool {
        let (num, den) = self.probability();
        num * total == den
    }
}

/// Uniform sampler over the perfect matchings of one planar graph.
pub struct Sampler {
    graph: DualGraph,
    counter: PlanarCounter,
    total: BigCount,
    cache: HashMap<NodeSet, BigCount>,
    rng: ChaCha20Rng,
}

impl Sampler {
    pub fn new(g: &DualGraph, seed: u64) -> Result<Self, SampleError> {
        let counter = PlanarCounter::new(g)?;
        let total = counter.count(g)?;
        if total.is_zero() {
            return Err(SampleError::NoMatchings);
        }
        Ok(Sampler {
            graph: g.clone(),
            counter,
            total,
            cache: HashMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    /// Number of perfect matchings of the sampled graph.
    pub fn total(&self) -> &BigCount {
        &self.total
    }

    pub fn graph(&self) -> &DualGraph {
        &self.graph
    }

    fn count(&mut self, g: &DualGraph) -> Result<BigCount, SampleError> {
        if let Some(c) = self.cache.get(g.node_set()) {
            return Ok(c.clone());
        }
        let c = self.counter.count(g)?;
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(g.node_set().clone(), c.clone());
        Ok(c)
    }

    /// Draws one matching together with its step probabilities.
    pub fn draw(&mut self) -> Result<Draw, SampleError> {
        let mut residual = self.graph.clone();
        let mut current = self.total.clone();
        let mut pairs = Vec::with_capacity(residual.node_count() / 2);
        let mut steps = Vec::with_capacity(residual.node_count() / 2);
        loop {
            let Some(u) = residual.nodes().next() else {
                break;
            };
            let options: Vec<_> = residual.neighbors(u).collect();
            let mut weighted = Vec::with_capacity(options.len());
            if options.len() == 1 {
                let rest = residual.delete_pair(u, options[0]).expect("live nodes");
                weighted.push((options[0], current.clone(), rest));
            } else {
                for &v in &options {
                    let rest = residual.delete_pair(u, v).expect("live nodes");
                    let c = self.count(&rest)?;
                    if !c.is_zero() {
                        weighted.push((v, c, rest));
                    }
                }
            }
            let sum: BigCount = weighted.iter().map(|(_, c, _)| c).sum();
            if sum != current {
                return Err(SampleError::Inconsistent {
                    got: sum,
                    want: current,
                });
            }
            let r = uniform_below(&mut self.rng, &current);
            let mut acc = BigCount::zero();
            let mut pick = None;
            for (v, c, rest) in weighted {
                acc += &c;
                if r < acc {
                    pick = Some((v, c, rest));
                    break;
                }
            }
            let (v, c, rest) = pick.expect("r < sum of weights");
            pairs.push((u, v));
            steps.push((c.clone(), current));
            current = c;
            residual = rest;
        }
        Ok(Draw {
            matching: Matching::new(pairs),
            steps,
        })
    }

    pub fn sample(&mut self) -> Result<Matching, SampleError> {
        Ok(self.draw()?.matching)
    }
}

/// Uniform integer in `[0, bound)` by rejection on the bit length of `bound`.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let spare = (bytes as u64 * 8 - bits) as u32;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        // little-endian: the last byte holds the high bits
        if let Some(top) = buf.last_mut() {
            *top &= 0xffu8 >> spare;
        }
        let r = BigUint::from_bytes_le(&buf);
        if &r < bound {
            return r;
        }
    }
}

/// One uniformly random perfect matching of planar `g`.
pub fn sample_matching(g: &DualGraph, seed: u64) -> Result<Matching, SampleError> {
    Sampler::new(g, seed)?.sample()
}

/// Distribution of a real-valued metric over `k` independent samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub samples: u64,
    /// `(value, occurrences)` in ascending value order.
    pub histogram: Vec<(f64, u64)>,
    pub mean: f64,
    pub variance: f64,
    /// `|mean - reference|` when a reference mean was supplied.
    pub abs_error: Option<f64>,
}

impl SampleSummary {
    pub fn from_values(values: &[f64], reference: Option<f64>) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut histogram: Vec<(f64, u64)> = Vec::new();
        for x in sorted {
            match histogram.last_mut() {
                Some((v, c)) if *v == x => *c += 1,
                _ => histogram.push((x, 1)),
            }
        }
        let n = values.len() as f64;
        let (mean, variance) = if values.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var)
        };
        SampleSummary {
            samples: values.len() as u64,
            histogram,
            mean,
            variance,
            abs_error: reference.map(|r| (mean - r).abs()),
        }
    }
}

/// Samples `k` matchings and summarizes `metric` over them.
pub fn sample_statistics(
    g: &DualGraph,
    k: u64,
    seed: u64,
    mut metric: impl FnMut(&Matching) -> f64,
    reference_mean: Option<f64>,
) -> Result<SampleSummary, SampleError> {
    let mut sampler = Sampler::new(g, seed)?;
    let mut values = Vec::with_capacity(k as usize);
    for _ in 0..k {
        values.push(metric(&sampler.sample()?));
    }
    Ok(SampleSummary::from_values(&values, reference_mean))
}

/// Error norm for frequency estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    /// Every outcome's frequency within epsilon.
    LInfinity,
    /// Total absolute error over `n` outcomes within epsilon.
    L1 { n: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSpec {
    pub epsilon: f64,
    pub delta: f64,
    pub norm: Norm,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleSizeError {
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("the L1 bound needs n >= 1 outcomes")]
    Outcomes,
}

/// Samples sufficient to estimate outcome frequencies to within `epsilon`
/// with failure probability at most `delta`.
///
/// L-infinity: `max(4 / e^2, 4 ln(1/d) / e^2)`.
/// L1 over `n` outcomes: `max(4 n / e^2, 8 ln(1/d) / e^2)`.
pub fn required_sample_size(spec: &SampleSizeSpec) -> Result<u64, SampleSizeError> {
    let SampleSizeSpec {
        epsilon,
        delta,
        norm,
    } = *spec;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SampleSizeError::Epsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SampleSizeError::Delta(delta));
    }
    let e2 = epsilon * epsilon;
    let log = (1.0 / delta).ln();
    let bound = match norm {
        Norm::LInfinity => (4.0 / e2).max(4.0 * log / e2),
        Norm::L1 { n } => {
            if n == 0 {
                return Err(SampleSizeError::Outcomes);
            }
            (4.0 * n as f64 / e2).max(8.0 * log / e2)
        }
    };
    // Values that are integers up to rounding noise (400.00000000000006)
    // must not be bumped to the next integer.
    let nearest = bound.round();
    let n = if (bound - nearest).abs() <= 1e-9 * bound.max(1.0) {
        nearest
    } else {
        bound.ceil()
    };
    Ok(n as u64)
}
