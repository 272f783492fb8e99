//! Vote tallies and the per-district partisan and demographic metrics.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DualGraph, Matching, NodeId};

/// Relative tolerance for sums of prorated real-valued tallies.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Default competitiveness band for the Democratic two-party share,
/// inclusive at both ends.
pub const COMPETITIVE_LO: f64 = 0.40;
pub const COMPETITIVE_HI: f64 = 0.60;

/// Two-party vote totals. Reals, since proration splits votes fractionally.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct VoteTally {
    pub d: f64,
    pub r: f64,
}

impl VoteTally {
    pub fn new(d: f64, r: f64) -> Self {
        VoteTally { d, r }
    }

    pub fn total(&self) -> f64 {
        self.d + self.r
    }

    /// Democratic share of the two-party vote, `None` with no votes.
    pub fn d_share(&self) -> Option<f64> {
        let t = self.total();
        (t > 0.0).then(|| self.d / t)
    }

    /// Strict majority; an exact tie is not a Democratic seat.
    pub fn is_d_seat(&self) -> bool {
        self.d > self.r
    }

    pub fn is_valid(&self) -> bool {
        self.d.is_finite() && self.r.is_finite() && self.d >= 0.0 && self.r >= 0.0
    }
}

impl Add for VoteTally {
    type Output = VoteTally;
    fn add(self, rhs: VoteTally) -> VoteTally {
        VoteTally::new(self.d + rhs.d, self.r + rhs.r)
    }
}

impl AddAssign for VoteTally {
    fn add_assign(&mut self, rhs: VoteTally) {
        self.d += rhs.d;
        self.r += rhs.r;
    }
}

/// A named election dataset. `include_absentee` records whether absentee
/// ballots were prorated into the unit tallies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionTreatment {
    pub name: String,
    pub include_absentee: bool,
}

/// Which node attribute must exceed half of which base attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeMajoritySpec {
    pub attribute: String,
    pub base: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectionError {
    #[error("cannot prorate over units whose populations are all zero")]
    ZeroPopulation,
    #[error("node {node:?} has no tally for election {election:?}")]
    MissingTally { node: String, election: String },
    #[error("district has no votes, so its share is undefined")]
    ZeroVotes,
    #[error("competitiveness bounds must satisfy 0 <= lo <= hi <= 1, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("node {node:?} has no attribute {attribute:?}")]
    MissingAttribute { node: String, attribute: String },
    #[error("node {node:?}: attribute {attribute:?} exceeds base {base:?}")]
    AttributeExceedsBase {
        node: String,
        attribute: String,
        base: String,
    },
}

/// Splits a district-level tally across units in proportion to population.
pub fn prorate_absentee(
    district: VoteTally,
    unit_populations: &[u64],
) -> Result<Vec<VoteTally>, ElectionError> {
    let total: u128 = unit_populations.iter().map(|&p| p as u128).sum();
    if total == 0 {
        return Err(ElectionError::ZeroPopulation);
    }
    let total = total as f64;
    Ok(unit_populations
        .iter()
        .map(|&p| {
            let f = p as f64 / total;
            VoteTally::new(district.d * f, district.r * f)
        })
        .collect())
}

/// Tally of node `v` under `election`.
pub fn node_tally(g: &DualGraph, v: NodeId, election: &str) -> Result<VoteTally, ElectionError> {
    g.node(v)
        .tallies
        .get(election)
        .copied()
        .ok_or_else(|| ElectionError::MissingTally {
            node: g.label(v).to_string(),
            election: election.to_string(),
        })
}

/// Tally of the two-member district formed by pairing `u` and `v`.
pub fn merged_tally(
    g: &DualGraph,
    u: NodeId,
    v: NodeId,
    election: &str,
) -> Result<VoteTally, ElectionError> {
    Ok(node_tally(g, u, election)? + node_tally(g, v, election)?)
}

/// Merged tallies of every pair in `m`, in pair order.
pub fn paired_tallies(
    g: &DualGraph,
    m: &Matching,
    election: &str,
) -> Result<Vec<VoteTally>, ElectionError> {
    m.pairs()
        .iter()
        .map(|&(u, v)| merged_tally(g, u, v, election))
        .collect()
}

/// Number of pairs whose merged tally has strictly more D than R votes.
pub fn seats_for_matching(
    g: &DualGraph,
    m: &Matching,
    election: &str,
) -> Result<usize, ElectionError> {
    Ok(paired_tallies(g, m, election)?
        .iter()
        .filter(|t| t.is_d_seat())
        .count())
}

/// Districts whose D share lies in `[lo, hi]`, bounds inclusive.
pub fn competitive_count(
    districts: &[VoteTally],
    lo: f64,
    hi: f64,
) -> Result<usize, ElectionError> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(ElectionError::BadBounds(lo, hi));
    }
    let mut count = 0;
    for t in districts {
        let share = t.d_share().ok_or(ElectionError::ZeroVotes)?;
        if share >= lo && share <= hi {
            count += 1;
        }
    }
    Ok(count)
}

/// Merged D shares of the pairs in `m`, sorted ascending.
pub fn sorted_shares(
    g: &DualGraph,
    m: &Matching,
    election: &str,
) -> Result<Vec<f64>, ElectionError> {
    let mut shares = paired_tallies(g, m, election)?
        .iter()
        .map(|t| t.d_share().ok_or(ElectionError::ZeroVotes))
        .collect::<Result<Vec<f64>, _>>()?;
    shares.sort_by(f64::total_cmp);
    Ok(shares)
}

/// Districts (given as per-district `(attribute, base)` sums) in which the
/// attribute is a strict majority of the base.
pub fn majority_count(districts: &[(u64, u64)]) -> usize {
    districts
        .iter()
        .filter(|&&(attr, base)| 2 * attr as u128 > base as u128)
        .count()
}

/// Reads `(attribute, base)` for one node, checking `attribute <= base`.
pub fn node_attribute_pair(
    g: &DualGraph,
    v: NodeId,
    spec: &AttributeMajoritySpec,
) -> Result<(u64, u64), ElectionError> {
    let node = g.node(v);
    let get = |name: &str| {
        if name == "population" && !node.attributes.contains_key(name) {
            return Ok(node.population);
        }
        node.attributes
            .get(name)
            .copied()
            .ok_or_else(|| ElectionError::MissingAttribute {
                node: node.label.clone(),
                attribute: name.to_string(),
            })
    };
    let (a, b) = (get(&spec.attribute)?, get(&spec.base)?);
    if a > b {
        return Err(ElectionError::AttributeExceedsBase {
            node: node.label.clone(),
            attribute: spec.attribute.clone(),
            base: spec.base.clone(),
        });
    }
    Ok((a, b))
}
