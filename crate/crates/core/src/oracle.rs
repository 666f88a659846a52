//! Destination-selection oracles over a reward map: greedy max-coverage
//! (within a factor 1 - 1/e of optimal), exact brute force, and a
//! safe-restricted greedy.

use crate::error::{Error, Result};
use crate::graph::{k_hop, CoverageModel, GridGraph};

/// Guard on `|V|^N` for the exact enumeration.
pub const EXACT_ENUMERATION_LIMIT: f64 = 1e7;

/// Per-agent destinations with the coverage value they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationSet {
    pub destinations: Vec<usize>,
    pub value: f64,
}

/// Precomputed coverage sets: `sets[agent][vertex]` is the sorted k-hop ball.
pub fn coverage_sets(g: &GridGraph, cov: &CoverageModel) -> Result<Vec<Vec<Vec<usize>>>> {
    cov.hop_radii
        .iter()
        .map(|&k| {
            (0..g.vertex_count())
                .map(|v| k_hop(g, v, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn union_value(w: &[f64], sets: &[&[usize]]) -> f64 {
    let mut covered = vec![false; w.len()];
    let mut total = 0.0;
    for set in sets {
        for &v in *set {
            if !covered[v] {
                covered[v] = true;
                total += w[v];
            }
        }
    }
    total
}

/// Greedy oracle: agent `i` (in index order) picks the vertex maximizing the
/// marginal covered mass over what earlier agents already cover. Ties go to
/// the lowest vertex index.
pub fn greedy_oracle(w: &[f64], g: &GridGraph, cov: &CoverageModel) -> Result<DestinationSet> {
    greedy_restricted(w, g, cov, None)
}

/// Greedy oracle with destinations restricted to a safe set. Coverage mass is
/// still counted over the full coverage set of each candidate vertex.
pub fn safe_greedy_oracle(
    w: &[f64],
    g: &GridGraph,
    cov: &CoverageModel,
    safe_set: &[bool],
) -> Result<DestinationSet> {
    if !safe_set.iter().any(|&s| s) {
        return Err(Error::NoSafeDestination);
    }
    greedy_restricted(w, g, cov, Some(safe_set))
}

fn greedy_restricted(
    w: &[f64],
    g: &GridGraph,
    cov: &CoverageModel,
    safe_set: Option<&[bool]>,
) -> Result<DestinationSet> {
    let n = g.vertex_count();
    if w.len() != n {
        return Err(Error::InvalidArgument(format!(
            "reward map has {} entries, graph has {} vertices",
            w.len(),
            n
        )));
    }
    let sets = coverage_sets(g, cov)?;
    let mut covered = vec![false; n];
    let mut destinations = Vec::with_capacity(cov.agent_count());
    let mut value = 0.0;
    for agent_sets in &sets {
        let mut best_v = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for v in 0..n {
            if let Some(safe) = safe_set {
                if !safe[v] {
                    continue;
                }
            }
            let gain: f64 = agent_sets[v]
                .iter()
                .filter(|&&u| !covered[u])
                .map(|&u| w[u])
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best_v = v;
            }
        }
        destinations.push(best_v);
        for &u in &sets[destinations.len() - 1][best_v] {
            if !covered[u] {
                covered[u] = true;
                value += w[u];
            }
        }
    }
    Ok(DestinationSet { destinations, value })
}

/// Exact oracle by full enumeration of destination tuples. Returns the
/// lexicographically smallest optimal tuple.
pub fn exact_oracle(w: &[f64], g: &GridGraph, cov: &CoverageModel) -> Result<DestinationSet> {
    let n = g.vertex_count();
    let agents = cov.agent_count();
    let size = (n as f64).powi(agents as i32);
    if size > EXACT_ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            size,
            limit: EXACT_ENUMERATION_LIMIT,
        });
    }
    let sets = coverage_sets(g, cov)?;
    let mut tuple = vec![0usize; agents];
    let mut best_tuple = tuple.clone();
    let mut best_value = f64::NEG_INFINITY;
    loop {
        let refs: Vec<&[usize]> = (0..agents).map(|i| sets[i][tuple[i]].as_slice()).collect();
        let value = union_value(w, &refs);
        // Strict improvement only: lex order of enumeration makes the first
        // optimal tuple the lexicographically smallest.
        if value > best_value {
            best_value = value;
            best_tuple.copy_from_slice(&tuple);
        }
        // Advance the tuple odometer.
        let mut i = agents;
        loop {
            if i == 0 {
                return Ok(DestinationSet {
                    destinations: best_tuple,
                    value: best_value,
                });
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < n {
                break;
            }
            tuple[i] = 0;
        }
    }
}
