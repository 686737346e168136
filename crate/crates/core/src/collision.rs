//! Collision rates between nodes, Poisson jump sampling and colliding-pair
//! selection.
//!
//! Rates are expected collisions per day. Lengths are km, speeds km/s and
//! cross-sections km², so `n_i n_j Δv σ / V` comes out per second before
//! the single conversion to days.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{NodeId, SpaceObject, SECONDS_PER_DAY};
use crate::error::{Error, Result};

const M2_TO_KM2: f64 = 1e-6;

/// Per-node sufficient statistics for rates and cross-sections.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeSummary {
    pub n: usize,
    pub mean_a_km: f64,
    pub mean_inc_deg: f64,
    /// Σ d, metres
    pub sum_d: f64,
    /// Σ d², m²
    pub sum_d2: f64,
}

impl NodeSummary {
    pub fn of<'a>(objects: impl IntoIterator<Item = &'a SpaceObject>) -> Self {
        let mut s = NodeSummary::default();
        let (mut sum_a, mut sum_i) = (0.0, 0.0);
        for o in objects {
            let d = o.diameter_m();
            s.n += 1;
            s.sum_d += d;
            s.sum_d2 += d * d;
            sum_a += o.a_km;
            sum_i += o.i_deg;
        }
        if s.n > 0 {
            s.mean_a_km = sum_a / s.n as f64;
            s.mean_inc_deg = sum_i / s.n as f64;
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRate {
    /// expected collisions per day
    pub tau: f64,
    pub pair: (NodeId, NodeId),
}

/// Speed of a node's representative orbit at the shell's mean radius.
pub fn representative_velocity(mean_a_km: f64, shell_radius_km: f64, mu: f64) -> f64 {
    (mu * (2.0 / shell_radius_km - 1.0 / mean_a_km)).max(0.0).sqrt()
}

/// Node-averaged collision speed from the mean inclinations of two nodes,
/// with ascending nodes taken as uniformly distributed.
pub fn relative_velocity(
    node_i: &NodeSummary,
    r_shell_i: f64,
    node_j: &NodeSummary,
    r_shell_j: f64,
    mu: f64,
) -> Option<f64> {
    if node_i.is_empty() || node_j.is_empty() {
        return None;
    }
    let vi = representative_velocity(node_i.mean_a_km, r_shell_i, mu);
    let vj = representative_velocity(node_j.mean_a_km, r_shell_j, mu);
    let cos_theta = node_i.mean_inc_deg.to_radians().cos() * node_j.mean_inc_deg.to_radians().cos();
    Some((vi * vi + vj * vj - 2.0 * vi * vj * cos_theta).max(0.0).sqrt())
}

/// [`relative_velocity`] over object slices; both nodes share `r_shell_km`.
pub fn mean_relative_velocity(node_i: &[SpaceObject], node_j: &[SpaceObject], r_shell_km: f64, mu: f64) -> Result<f64> {
    let (si, sj) = (NodeSummary::of(node_i), NodeSummary::of(node_j));
    relative_velocity(&si, r_shell_km, &sj, r_shell_km, mu).ok_or(Error::ZeroPairs { needed: 1, found: 0 })
}

/// Mean of π/4 (d_q + d_p)² over unordered pairs inside one group, km².
pub fn self_cross_section_from_sums(n: usize, sum_d: f64, sum_d2: f64) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let n = n as f64;
    let sigma = std::f64::consts::PI / (4.0 * (n * n - n)) * (2.0 * (n - 2.0) * sum_d2 + 2.0 * sum_d * sum_d);
    Some(sigma * M2_TO_KM2)
}

/// Mean of π/4 (d_q + d_p)² over all pairs across two groups, km².
pub fn cross_cross_section_from_sums(
    n_i: usize,
    sum_d_i: f64,
    sum_d2_i: f64,
    n_j: usize,
    sum_d_j: f64,
    sum_d2_j: f64,
) -> Option<f64> {
    if n_i == 0 || n_j == 0 {
        return None;
    }
    let (ni, nj) = (n_i as f64, n_j as f64);
    let sigma = std::f64::consts::PI / (4.0 * ni * nj) * (nj * sum_d2_i + ni * sum_d2_j + 2.0 * sum_d_i * sum_d_j);
    Some(sigma * M2_TO_KM2)
}

pub fn avg_cross_section_self(node: &[SpaceObject]) -> Result<f64> {
    let s = NodeSummary::of(node);
    self_cross_section_from_sums(s.n, s.sum_d, s.sum_d2).ok_or(Error::ZeroPairs { needed: 2, found: s.n })
}

pub fn avg_cross_section_cross(node_i: &[SpaceObject], node_j: &[SpaceObject]) -> Result<f64> {
    let (a, b) = (NodeSummary::of(node_i), NodeSummary::of(node_j));
    cross_cross_section_from_sums(a.n, a.sum_d, a.sum_d2, b.n, b.sum_d, b.sum_d2).ok_or(Error::ZeroPairs {
        needed: 1,
        found: a.n.min(b.n),
    })
}

/// Expected collisions per day for a node pair with known summaries.
///
/// For a self-pair the partner count is `(n - 1) / 2`, kept fractional.
pub fn pair_rate(node_i: &NodeSummary, node_j: &NodeSummary, self_pair: bool, dv_kms: f64, volume_km3: f64) -> f64 {
    let (ni, nj, sigma) = if self_pair {
        match self_cross_section_from_sums(node_i.n, node_i.sum_d, node_i.sum_d2) {
            Some(s) => (node_i.n as f64, (node_i.n as f64 - 1.0) / 2.0, s),
            None => return 0.0,
        }
    } else {
        match cross_cross_section_from_sums(
            node_i.n,
            node_i.sum_d,
            node_i.sum_d2,
            node_j.n,
            node_j.sum_d,
            node_j.sum_d2,
        ) {
            Some(s) => (node_i.n as f64, node_j.n as f64, s),
            None => return 0.0,
        }
    };
    ni * nj * dv_kms * sigma / volume_km3 * SECONDS_PER_DAY
}

/// Collision rate between two object groups sharing a shell.
///
/// `volumes` are the two site volumes; the collision is placed in the larger
/// denominator, i.e. the smaller region of overlap. Empty nodes (or a
/// singleton self-pair) give τ = 0.
pub fn mean_collision_rate(
    pair: (NodeId, NodeId),
    node_i: &[SpaceObject],
    node_j: &[SpaceObject],
    r_shell_km: f64,
    volumes: (f64, f64),
    mu: f64,
) -> CollisionRate {
    let self_pair = pair.0 == pair.1;
    let si = NodeSummary::of(node_i);
    let sj = if self_pair { si } else { NodeSummary::of(node_j) };
    let tau = match relative_velocity(&si, r_shell_km, &sj, r_shell_km, mu) {
        Some(dv) => pair_rate(&si, &sj, self_pair, dv, volumes.0.max(volumes.1)),
        None => 0.0,
    };
    CollisionRate { tau, pair }
}

/// Rate scaling applied before a Poisson draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpModifier {
    Plain,
    /// one manoeuvrable participant
    Cam(f64),
    /// two manoeuvrable participants
    Cam2(f64),
    /// lethal non-trackable impacts, `kappa` times the trackable rate
    Small(f64),
}

impl JumpModifier {
    pub fn factor(self) -> f64 {
        match self {
            JumpModifier::Plain => 1.0,
            JumpModifier::Cam(s) => 1.0 - s,
            JumpModifier::Cam2(s) => (1.0 - s) * (1.0 - s),
            JumpModifier::Small(kappa) => kappa,
        }
    }
}

/// Draws the number of events in `dt_days` for a per-day `rate`.
pub fn sample_jump<R: Rng + ?Sized>(rate: f64, dt_days: f64, modifier: JumpModifier, rng: &mut R) -> Result<u64> {
    if !(rate >= 0.0) {
        return Err(Error::NegativeRate(rate));
    }
    let mean = modifier.factor() * rate * dt_days;
    if !(mean > 0.0) {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|_| Error::NegativeRate(mean))?;
    let draw: f64 = dist.sample(rng);
    Ok(draw as u64)
}

/// Size-binned pair selection for the collisions of one node pair.
///
/// Holds `P(k, l)` over radius bins of both nodes and the candidate objects
/// per bin. Drawn objects leave the pool so nothing collides twice.
#[derive(Debug, Clone)]
pub struct PairSelectionMatrix {
    n_bins: usize,
    self_pair: bool,
    probs: Vec<f64>,
    pub edges_i: Vec<f64>,
    pub edges_j: Vec<f64>,
    bins_i: Vec<Vec<usize>>,
    bins_j: Vec<Vec<usize>>,
}

struct BinStats {
    members: Vec<Vec<usize>>,
    edges: Vec<f64>,
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
}

fn bin_by_radius(objects: &[SpaceObject], candidates: &[usize], n_bins: usize) -> BinStats {
    let (lo, hi) = candidates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
            let r = objects[k].radius_m;
            (lo.min(r), hi.max(r))
        });
    let (lo, hi) = if candidates.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let width = (hi - lo) / n_bins as f64;
    let edges = (0..=n_bins).map(|b| lo + width * b as f64).collect();
    let mut stats = BinStats {
        members: vec![Vec::new(); n_bins],
        edges,
        sum_d: vec![0.0; n_bins],
        sum_d2: vec![0.0; n_bins],
    };
    for &k in candidates {
        let r = objects[k].radius_m;
        let b = if width > 0.0 {
            (((r - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            0
        };
        let d = 2.0 * r;
        stats.members[b].push(k);
        stats.sum_d[b] += d;
        stats.sum_d2[b] += d * d;
    }
    stats
}

impl PairSelectionMatrix {
    /// Builds the matrix over all objects of the two nodes. Pass the same
    /// slice twice with `self_pair = true` for collisions inside one node.
    pub fn build(
        node_i: &[SpaceObject],
        node_j: &[SpaceObject],
        self_pair: bool,
        n_bins: usize,
        dv_kms: f64,
        volume_km3: f64,
        dt_days: f64,
    ) -> Self {
        let all_i: Vec<usize> = (0..node_i.len()).collect();
        let all_j: Vec<usize> = (0..node_j.len()).collect();
        Self::build_with_candidates(
            node_i, &all_i, node_j, &all_j, self_pair, n_bins, dv_kms, volume_km3, dt_days,
        )
    }

    /// As [`build`](Self::build) but restricted to candidate object indices.
    #[allow(clippy::too_many_arguments)]
    pub fn build_with_candidates(
        node_i: &[SpaceObject],
        cand_i: &[usize],
        node_j: &[SpaceObject],
        cand_j: &[usize],
        self_pair: bool,
        n_bins: usize,
        dv_kms: f64,
        volume_km3: f64,
        dt_days: f64,
    ) -> Self {
        let n_bins = n_bins.max(1);
        let bi = bin_by_radius(node_i, cand_i, n_bins);
        let bj = if self_pair {
            None
        } else {
            Some(bin_by_radius(node_j, cand_j, n_bins))
        };
        let bj_ref = bj.as_ref().unwrap_or(&bi);
        let scale = dv_kms / volume_km3 * SECONDS_PER_DAY * dt_days;
        let mut probs = vec![0.0; n_bins * n_bins];
        for k in 0..n_bins {
            let nk = bi.members[k].len();
            if nk == 0 {
                continue;
            }
            for l in 0..n_bins {
                let nl = bj_ref.members[l].len();
                if nl == 0 || (self_pair && l < k) {
                    continue;
                }
                let rate = if self_pair && k == l {
                    self_cross_section_from_sums(nk, bi.sum_d[k], bi.sum_d2[k])
                        .map(|s| nk as f64 * (nk as f64 - 1.0) / 2.0 * s)
                } else {
                    cross_cross_section_from_sums(nk, bi.sum_d[k], bi.sum_d2[k], nl, bj_ref.sum_d[l], bj_ref.sum_d2[l])
                        .map(|s| nk as f64 * nl as f64 * s)
                };
                if let Some(r) = rate {
                    probs[k * n_bins + l] = -(-r * scale).exp_m1();
                }
            }
        }
        let edges_j = bj_ref.edges.clone();
        let bins_j = match bj {
            Some(b) => b.members,
            None => Vec::new(),
        };
        PairSelectionMatrix {
            n_bins,
            self_pair,
            probs,
            edges_i: bi.edges,
            edges_j,
            bins_i: bi.members,
            bins_j,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.probs[k * self.n_bins + l]
    }

    pub fn entries(&self) -> &[f64] {
        &self.probs
    }

    pub fn bin_count_i(&self, k: usize) -> usize {
        self.bins_i[k].len()
    }

    pub fn bin_count_j(&self, l: usize) -> usize {
        if self.self_pair {
            self.bins_i[l].len()
        } else {
            self.bins_j[l].len()
        }
    }

    fn usable(&self, k: usize, l: usize) -> bool {
        if self.self_pair {
            let need = if k == l { 2 } else { 1 };
            self.bins_i[k].len() >= need && !self.bins_i[l].is_empty()
        } else {
            !self.bins_i[k].is_empty() && !self.bins_j[l].is_empty()
        }
    }

    /// Draws a bin pair proportional to `P`, then uniform objects inside the
    /// bins. Returns indices into the two node object lists and removes them
    /// from the pool.
    pub fn select_colliding_pair<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, usize)> {
        let total: f64 = (0..self.probs.len())
            .filter(|&idx| self.usable(idx / self.n_bins, idx % self.n_bins))
            .map(|idx| self.probs[idx])
            .sum();
        if !(total > 0.0) {
            return Err(Error::NoPair);
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = None;
        for idx in 0..self.probs.len() {
            let (k, l) = (idx / self.n_bins, idx % self.n_bins);
            if self.probs[idx] <= 0.0 || !self.usable(k, l) {
                continue;
            }
            chosen = Some((k, l));
            target -= self.probs[idx];
            if target < 0.0 {
                break;
            }
        }
        let (k, l) = chosen.ok_or(Error::NoPair)?;
        let first = {
            let bin = &mut self.bins_i[k];
            bin.swap_remove(rng.gen_range(0..bin.len()))
        };
        let second = {
            let bin = if self.self_pair {
                &mut self.bins_i[l]
            } else {
                &mut self.bins_j[l]
            };
            bin.swap_remove(rng.gen_range(0..bin.len()))
        };
        Ok((first, second))
    }
}
