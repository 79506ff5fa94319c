//! Brute-force check of the primary election.
//!
//! Recomputes every node's density straight from the initial geometry and
//! compares the per-component argmax with what the nodes elected.

use std::collections::VecDeque;

use crate::netsim::World;
use crate::protocol::{DensityParams, Location, NodeId, SubjectId};

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub subject: String,
    pub component: usize,
    pub node: NodeId,
    pub expected: NodeId,
    pub actual: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub components: usize,
    pub nodes_checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn hop_distances(adj: &[Vec<usize>], from: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    dist[from] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Density every node should have computed at the end of discovery.
///
/// A node hears a one-hop reply from every same-subject neighbour that was
/// itself reached by some other same-subject node's request, and requests
/// travel at most `ttl + 1` hops.
pub fn expected_densities(
    positions: &[Location],
    subjects: &[SubjectId],
    expertise: &[f64],
    range: f64,
    ttl: u32,
    params: &DensityParams,
) -> Vec<f64> {
    let n = positions.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| v != u && positions[u].distance(positions[v]) <= range)
                .collect()
        })
        .collect();

    let mut replies = vec![false; n];
    for w in 0..n {
        let hops = hop_distances(&adj, w);
        for u in 0..n {
            if u != w && subjects[u] == subjects[w] && hops[u] <= ttl + 1 {
                replies[u] = true;
            }
        }
    }

    (0..n)
        .map(|v| {
            let mut heard: Vec<f64> = vec![expertise[v]];
            heard.extend(
                adj[v]
                    .iter()
                    .filter(|&&u| subjects[u] == subjects[v] && replies[u])
                    .map(|&u| expertise[u]),
            );
            heard.sort_by(f64::total_cmp);
            let count = heard.len() as f64;
            let mean = heard.iter().sum::<f64>() / count;
            params.alpha * count / f64::from(params.population) + params.beta * mean
        })
        .collect()
}

/// Compares each node's elected cluster point with the brute-force argmax
/// of its component (ties to the smaller id).
pub fn verify_election(world: &World) -> VerifyReport {
    let config = world.config();
    let election = world
        .election()
        .expect("verify_election needs a world that has reached Converge");
    let positions = world.initial_positions();
    let subjects = world.subjects();
    let expertise: Vec<f64> = world.nodes().iter().map(|n| n.state.expertise).collect();
    let densities = expected_densities(
        positions,
        &subjects,
        &expertise,
        config.radio_range,
        config.ttl,
        &world.protocol_config().params,
    );

    let mut report = VerifyReport::default();
    let names = &world.metrics().subjects;
    for (si, name) in names.iter().enumerate() {
        let subject = SubjectId(si as u16);
        let components = crate::netsim::reachability_components(
            positions,
            &subjects,
            subject,
            config.radio_range,
        );
        for (ci, members) in components.iter().enumerate() {
            report.components += 1;
            let eligible = members.iter().copied().filter(|&m| {
                config
                    .quorum_threshold
                    .is_none_or(|t| densities[m as usize] >= t)
            });
            // max density; on equal density the smaller id wins
            let winner = eligible.fold(None::<NodeId>, |best, m| match best {
                Some(b) if densities[b as usize] >= densities[m as usize] => Some(b),
                _ => Some(m),
            });
            for &m in members {
                report.nodes_checked += 1;
                let expected = winner.unwrap_or(m);
                let actual = election[m as usize].elected;
                if actual != expected {
                    report.mismatches.push(Mismatch {
                        subject: name.clone(),
                        component: ci,
                        node: m,
                        expected,
                        actual,
                    });
                }
            }
        }
    }
    report
}
