use serde::{Deserialize, Serialize};

use crate::domain::{NodeId, Species};

/// Index of an unordered species pair in a 10-slot table.
pub fn species_pair_index(a: Species, b: Species) -> usize {
    let (x, y) = if a.index() <= b.index() {
        (a.index(), b.index())
    } else {
        (b.index(), a.index())
    };
    x * 4 + y - x * (x + 1) / 2
}

/// All unordered species pairs in index order.
pub fn species_pairs() -> [(Species, Species); 10] {
    let mut out = [(Species::Payload, Species::Payload); 10];
    for a in Species::ALL {
        for b in Species::ALL {
            if a.index() <= b.index() {
                out[species_pair_index(a, b)] = (a, b);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub nodes: (NodeId, NodeId),
    pub parent_ids: (u64, u64),
    pub catastrophic: bool,
    pub dv_kms: f64,
    pub fragments: u64,
    pub fragments_in_domain: u64,
}

/// Signed per-node population changes of one step, split by cause.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    /// years since start, end of step
    pub epoch: f64,
    pub collision_loss: Vec<i64>,
    pub small_collision: Vec<i64>,
    pub fragment_inflow: Vec<i64>,
    pub pmd_removed: Vec<i64>,
    pub pmd_failed: Vec<i64>,
    pub adr: Vec<i64>,
    pub decay_in: Vec<i64>,
    pub decay_out: Vec<i64>,
    pub reentered: Vec<i64>,
    pub escaped: Vec<i64>,
    pub launch: Vec<i64>,
    pub events: Vec<EventRecord>,
    pub small_events: u64,
    /// per species pair: signed change of each species caused by collisions
    /// (parents lost, fragments added, small-impact conversions)
    pub pair_deltas: [[i64; 4]; 10],
}

impl StepReport {
    pub fn new(n_nodes: usize) -> Self {
        let z = vec![0i64; n_nodes];
        StepReport {
            epoch: 0.0,
            collision_loss: z.clone(),
            small_collision: z.clone(),
            fragment_inflow: z.clone(),
            pmd_removed: z.clone(),
            pmd_failed: z.clone(),
            adr: z.clone(),
            decay_in: z.clone(),
            decay_out: z.clone(),
            reentered: z.clone(),
            escaped: z.clone(),
            launch: z,
            events: Vec::new(),
            small_events: 0,
            pair_deltas: [[0; 4]; 10],
        }
    }

    pub fn causes(&self) -> [(&'static str, &[i64]); 11] {
        [
            ("collision_loss", &self.collision_loss),
            ("small_collision", &self.small_collision),
            ("fragment_inflow", &self.fragment_inflow),
            ("pmd_removed", &self.pmd_removed),
            ("pmd_failed", &self.pmd_failed),
            ("adr", &self.adr),
            ("decay_in", &self.decay_in),
            ("decay_out", &self.decay_out),
            ("reentered", &self.reentered),
            ("escaped", &self.escaped),
            ("launch", &self.launch),
        ]
    }

    /// Net change per node summed over causes.
    pub fn net(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.collision_loss.len()];
        for (_, v) in self.causes() {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        out
    }

    /// Checks that counts moved from `before` to `after` exactly as reported.
    pub fn check_identity(&self, before: &[usize], after: &[usize]) -> Result<(), String> {
        for (k, ((b, a), d)) in before.iter().zip(after).zip(self.net()).enumerate() {
            if *a as i64 - *b as i64 != d {
                return Err(format!("node {}: {} -> {} but causes sum to {d}", NodeId(k), b, a));
            }
        }
        Ok(())
    }

    /// Per-species total of one cause vector.
    pub fn by_species(v: &[i64]) -> [i64; 4] {
        let mut out = [0; 4];
        for (k, x) in v.iter().enumerate() {
            out[k % 4] += x;
        }
        out
    }

    pub fn catastrophic_count(&self) -> u64 {
        self.events.iter().filter(|e| e.catastrophic).count() as u64
    }
}

/// Species-level digest of one step, kept for every step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepSummary {
    pub counts_before: [usize; 4],
    pub decay_removed: [i64; 4],
    pub pmd_removed: [i64; 4],
    pub pmd_failed: [i64; 4],
    pub launch: [i64; 4],
    pub adr: [i64; 4],
    pub pair_deltas: [[i64; 4]; 10],
    pub catastrophic: u64,
    pub non_catastrophic: u64,
    pub small: u64,
}

impl StepSummary {
    pub fn from_report(counts_before: [usize; 4], r: &StepReport) -> Self {
        let sum2 = |a: &[i64], b: &[i64]| {
            let (x, y) = (StepReport::by_species(a), StepReport::by_species(b));
            [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]
        };
        let cat = r.catastrophic_count();
        StepSummary {
            counts_before,
            decay_removed: sum2(&r.reentered, &r.escaped),
            pmd_removed: StepReport::by_species(&r.pmd_removed),
            pmd_failed: StepReport::by_species(&r.pmd_failed),
            launch: StepReport::by_species(&r.launch),
            adr: StepReport::by_species(&r.adr),
            pair_deltas: r.pair_deltas,
            catastrophic: cat,
            non_catastrophic: r.events.len() as u64 - cat,
            small: r.small_events,
        }
    }

    /// Collision-caused change of species `s` from pairs of `a` and `b`.
    pub fn pair_delta(&self, a: Species, b: Species, s: Species) -> i64 {
        self.pair_deltas[species_pair_index(a, b)][s.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_a_bijection() {
        let mut seen = [false; 10];
        for a in Species::ALL {
            for b in Species::ALL {
                let k = species_pair_index(a, b);
                assert_eq!(k, species_pair_index(b, a));
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
        for (k, (a, b)) in species_pairs().iter().enumerate() {
            assert_eq!(species_pair_index(*a, *b), k);
        }
    }

    #[test]
    fn identity_check() {
        let mut r = StepReport::new(4);
        r.launch[0] = 2;
        r.pmd_removed[0] = -1;
        assert!(r.check_identity(&[1, 0, 0, 0], &[2, 0, 0, 0]).is_ok());
        assert!(r.check_identity(&[1, 0, 0, 0], &[3, 0, 0, 0]).is_err());
    }
}
