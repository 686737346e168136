use serde::{Deserialize, Serialize};

use super::StepSummary;
use crate::domain::NetworkState;

/// Everything a single run records, indexed by epoch (`steps` by step).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub counts: Vec<[usize; 4]>,
    pub cum_catastrophic: Vec<u64>,
    /// catastrophic plus non-catastrophic trackable collisions
    pub cum_collisions: Vec<u64>,
    pub cum_small: Vec<u64>,
    pub steps: Vec<StepSummary>,
    pub snapshots: Vec<(f64, NetworkState)>,
    pub final_state: Option<NetworkState>,
}

impl RunTrace {
    pub fn start(state: &NetworkState, n_steps: usize) -> Self {
        let mut t = RunTrace {
            counts: Vec::with_capacity(n_steps + 1),
            cum_catastrophic: Vec::with_capacity(n_steps + 1),
            cum_collisions: Vec::with_capacity(n_steps + 1),
            cum_small: Vec::with_capacity(n_steps + 1),
            steps: Vec::with_capacity(n_steps),
            snapshots: Vec::new(),
            final_state: None,
        };
        t.counts.push(state.counts_by_species());
        t.cum_catastrophic.push(0);
        t.cum_collisions.push(0);
        t.cum_small.push(0);
        t
    }

    pub fn push(&mut self, summary: StepSummary, after: &NetworkState) {
        let last = |v: &Vec<u64>| *v.last().unwrap();
        self.cum_catastrophic
            .push(last(&self.cum_catastrophic) + summary.catastrophic);
        self.cum_collisions
            .push(last(&self.cum_collisions) + summary.catastrophic + summary.non_catastrophic);
        self.cum_small.push(last(&self.cum_small) + summary.small);
        self.counts.push(after.counts_by_species());
        self.steps.push(summary);
    }

    pub fn total(&self, epoch: usize) -> usize {
        self.counts[epoch].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation, so a single run gives 0.
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        MeanStd { mean, std: var.sqrt() }
    }
}

/// Per-epoch ensemble means and 1-σ spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_runs: usize,
    /// years since start
    pub epochs: Vec<f64>,
    /// `[epoch][species]`
    pub species: Vec<[MeanStd; 4]>,
    pub total: Vec<MeanStd>,
    pub catastrophic: Vec<MeanStd>,
    pub collisions: Vec<MeanStd>,
    pub small: Vec<MeanStd>,
}

impl EnsembleStats {
    pub fn from_traces(traces: &[RunTrace], dt_years: f64) -> Self {
        let n_epochs = traces.iter().map(|t| t.counts.len()).min().unwrap_or(0);
        let col = |f: &dyn Fn(&RunTrace, usize) -> f64, e: usize| MeanStd::of(traces.iter().map(move |t| f(t, e)));
        let mut out = EnsembleStats {
            n_runs: traces.len(),
            epochs: (0..n_epochs).map(|e| e as f64 * dt_years).collect(),
            species: Vec::with_capacity(n_epochs),
            total: Vec::with_capacity(n_epochs),
            catastrophic: Vec::with_capacity(n_epochs),
            collisions: Vec::with_capacity(n_epochs),
            small: Vec::with_capacity(n_epochs),
        };
        for e in 0..n_epochs {
            let mut row = [MeanStd::default(); 4];
            for (s, cell) in row.iter_mut().enumerate() {
                *cell = col(&|t, e| t.counts[e][s] as f64, e);
            }
            out.species.push(row);
            out.total.push(col(&|t, e| t.total(e) as f64, e));
            out.catastrophic.push(col(&|t, e| t.cum_catastrophic[e] as f64, e));
            out.collisions.push(col(&|t, e| t.cum_collisions[e] as f64, e));
            out.small.push(col(&|t, e| t.cum_small[e] as f64, e));
        }
        out
    }

    pub fn last_total(&self) -> MeanStd {
        self.total.last().copied().unwrap_or_default()
    }

    pub fn last_catastrophic(&self) -> MeanStd {
        self.catastrophic.last().copied().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_spread() {
        let m = MeanStd::of([3.0].into_iter());
        assert_eq!(m, MeanStd { mean: 3.0, std: 0.0 });
        let m = MeanStd::of([1.0, 3.0].into_iter());
        assert_eq!(m, MeanStd { mean: 2.0, std: 1.0 });
    }
}
