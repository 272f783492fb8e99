//! Seat and competitiveness distributions over the matchings of a graph,
//! by full enumeration or by uniform sampling.

use std::collections::BTreeMap;
use std::convert::Infallible;

use serde::Serialize;
use thiserror::Error;

use crate::election::{
    competitive_count, paired_tallies, ElectionError, VoteTally, COMPETITIVE_HI, COMPETITIVE_LO,
};
use crate::enumerate::stream_matchings;
use crate::graph::{DualGraph, Matching};
use crate::sample::{SampleError, Sampler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("enacted matching is not a perfect matching of the graph")]
    BadEnacted,
    #[error("graph has no perfect matching")]
    NoMatchings,
}

/// Where the matchings come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingSource {
    Enumerate,
    Sample { k: u64, seed: u64 },
}

/// Five-number summary of one rank across matchings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankSummary {
    /// 1 is the district with the lowest D share.
    pub rank: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Percentile with linear interpolation between closest ranks
/// (`h = (n - 1) p`) over an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Collects sorted per-matching share vectors, rank by rank.
#[derive(Clone, Debug, Default)]
pub struct RankedShares {
    by_rank: Vec<Vec<f64>>,
}

impl RankedShares {
    pub fn push(&mut self, sorted_shares: &[f64]) {
        if self.by_rank.is_empty() {
            self.by_rank = vec![Vec::new(); sorted_shares.len()];
        }
        for (slot, &s) in self.by_rank.iter_mut().zip(sorted_shares) {
            slot.push(s);
        }
    }

    pub fn summarize(&self) -> Vec<RankSummary> {
        self.by_rank
            .iter()
            .enumerate()
            .map(|(i, values)| {
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                RankSummary {
                    rank: i + 1,
                    min: v[0],
                    q25: percentile(&v, 0.25),
                    median: percentile(&v, 0.5),
                    q75: percentile(&v, 0.75),
                    max: v[v.len() - 1],
                }
            })
            .collect()
    }
}

/// How an enacted matching compares with the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnactedComparison {
    pub seats: usize,
    pub competitive: usize,
    pub shares: Vec<f64>,
    /// Fraction of ensemble matchings with fewer seats than the enacted one.
    pub fraction_fewer_seats: f64,
    /// Fraction with exactly as many seats.
    pub fraction_equal_seats: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreatmentReport {
    pub election: String,
    pub matchings: u64,
    pub seat_histogram: BTreeMap<usize, u64>,
    pub mean_seats: f64,
    pub competitive_histogram: BTreeMap<usize, u64>,
    pub mean_competitive: f64,
    pub ranked_shares: Vec<RankSummary>,
    pub enacted: Option<EnactedComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchingReport {
    pub source: MatchingSource,
    /// Inclusive D-share band counted as competitive.
    pub competitive_band: (f64, f64),
    pub treatments: Vec<TreatmentReport>,
}

struct Metrics {
    seats: usize,
    competitive: usize,
    shares: Vec<f64>,
}

fn metrics(g: &DualGraph, m: &Matching, election: &str) -> Result<Metrics, ElectionError> {
    let tallies: Vec<VoteTally> = paired_tallies(g, m, election)?;
    let seats = tallies.iter().filter(|t| t.is_d_seat()).count();
    let competitive = competitive_count(&tallies, COMPETITIVE_LO, COMPETITIVE_HI)?;
    let mut shares = tallies
        .iter()
        .map(|t| t.d_share().ok_or(ElectionError::ZeroVotes))
        .collect::<Result<Vec<f64>, _>>()?;
    shares.sort_by(f64::total_cmp);
    Ok(Metrics {
        seats,
        competitive,
        shares,
    })
}

#[derive(Default)]
struct Accumulator {
    n: u64,
    seats: BTreeMap<usize, u64>,
    competitive: BTreeMap<usize, u64>,
    ranked: RankedShares,
}

impl Accumulator {
    fn add(&mut self, m: Metrics) {
        self.n += 1;
        *self.seats.entry(m.seats).or_default() += 1;
        *self.competitive.entry(m.competitive).or_default() += 1;
        self.ranked.push(&m.shares);
    }
}

fn histogram_mean(h: &BTreeMap<usize, u64>, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let total: u128 = h.iter().map(|(&k, &c)| k as u128 * c as u128).sum();
    total as f64 / n as f64
}

/// Seat and competitiveness distributions for each election over the
/// matchings of `g`, optionally compared with an enacted matching.
pub fn matching_ensemble_report(
    g: &DualGraph,
    elections: &[String],
    source: MatchingSource,
    enacted: Option<&Matching>,
) -> Result<MatchingReport, ReportError> {
    if let Some(m) = enacted {
        if !m.is_perfect_for(g) {
            return Err(ReportError::BadEnacted);
        }
    }
    let mut acc: Vec<Accumulator> = elections.iter().map(|_| Accumulator::default()).collect();
    let mut visit = |m: &Matching| -> Result<(), ElectionError> {
        for (e, a) in elections.iter().zip(acc.iter_mut()) {
            a.add(metrics(g, m, e)?);
        }
        Ok(())
    };
    match source {
        MatchingSource::Enumerate => {
            stream_matchings(g, &mut visit).map_err(|e| e.source)?;
        }
        MatchingSource::Sample { k, seed } => {
            let mut sampler = Sampler::new(g, seed)?;
            for _ in 0..k {
                visit(&sampler.sample()?)?;
            }
        }
    }
    if acc.first().is_some_and(|a| a.n == 0) && matches!(source, MatchingSource::Enumerate) {
        return Err(ReportError::NoMatchings);
    }

    let mut treatments = Vec::with_capacity(elections.len());
    for (election, a) in elections.iter().zip(acc) {
        let enacted = match enacted {
            None => None,
            Some(m) => {
                let em = metrics(g, m, election)?;
                let fewer: u64 = a.seats.range(..em.seats).map(|(_, &c)| c).sum();
                let equal = a.seats.get(&em.seats).copied().unwrap_or(0);
                let n = a.n.max(1) as f64;
                Some(EnactedComparison {
                    seats: em.seats,
                    competitive: em.competitive,
                    shares: em.shares,
                    fraction_fewer_seats: fewer as f64 / n,
                    fraction_equal_seats: equal as f64 / n,
                })
            }
        };
        treatments.push(TreatmentReport {
            election: election.clone(),
            matchings: a.n,
            mean_seats: histogram_mean(&a.seats, a.n),
            mean_competitive: histogram_mean(&a.competitive, a.n),
            seat_histogram: a.seats,
            competitive_histogram: a.competitive,
            ranked_shares: a.ranked.summarize(),
            enacted,
        });
    }
    Ok(MatchingReport {
        source,
        competitive_band: (COMPETITIVE_LO, COMPETITIVE_HI),
        treatments,
    })
}

/// Per-rank percentile table of merged D shares for one election.
pub fn ranked_district_shares(
    g: &DualGraph,
    source: MatchingSource,
    election: &str,
) -> Result<Vec<RankSummary>, ReportError> {
    let report = matching_ensemble_report(g, &[election.to_string()], source, None)?;
    Ok(report
        .treatments
        .into_iter()
        .next()
        .map(|t| t.ranked_shares)
        .unwrap_or_default())
}

/// Folds a metric over every matching; a convenience over
/// [`stream_matchings`] for infallible metrics.
pub fn enumerate_histogram(
    g: &DualGraph,
    mut metric: impl FnMut(&Matching) -> usize,
) -> BTreeMap<usize, u64> {
    let mut h = BTreeMap::new();
    let _ = stream_matchings(g, |m| {
        *h.entry(metric(m)).or_default() += 1;
        Ok::<_, Infallible>(())
    });
    h
}
