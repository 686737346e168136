use rand::Rng;

use crate::orbit::{eccentric_anomaly, mean_anomaly, true_anomaly_at_radius};

/// Fraction of an orbit period spent in each shell, plus the parts below the
/// domain floor and above its ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidenceWeights {
    pub below: f64,
    pub above: f64,
    /// (shell index, weight) for shells with positive weight, ascending
    pub shells: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellDraw {
    Shell(usize),
    Below,
    Above,
}

impl ResidenceWeights {
    pub fn total(&self) -> f64 {
        self.below + self.above + self.shells.iter().map(|s| s.1).sum::<f64>()
    }

    pub fn weight(&self, shell: usize) -> f64 {
        self.shells.iter().find(|s| s.0 == shell).map_or(0.0, |s| s.1)
    }

    /// One categorical draw over below, shells and above.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ShellDraw {
        if self.below == 0.0 && self.above == 0.0 && self.shells.len() == 1 {
            return ShellDraw::Shell(self.shells[0].0);
        }
        let mut u = rng.gen::<f64>() * self.total();
        if u < self.below {
            return ShellDraw::Below;
        }
        u -= self.below;
        for &(k, w) in &self.shells {
            if u < w {
                return ShellDraw::Shell(k);
            }
            u -= w;
        }
        if self.above > 0.0 {
            ShellDraw::Above
        } else {
            self.shells.last().map_or(ShellDraw::Below, |s| ShellDraw::Shell(s.0))
        }
    }
}

/// Time fraction spent below radius `r`.
fn fraction_below(a: f64, e: f64, r: f64) -> f64 {
    let (rp, ra) = (a * (1.0 - e), a * (1.0 + e));
    if r <= rp {
        0.0
    } else if r >= ra {
        1.0
    } else {
        mean_anomaly(true_anomaly_at_radius(a, e, r), e) / std::f64::consts::PI
    }
}

/// Residence weights for an orbit over shells bounded by ascending `edges`
/// (radii, km). The top edge counts as inside the last shell.
pub fn residence_weights(a_km: f64, e: f64, edges: &[f64]) -> ResidenceWeights {
    let n = edges.len() - 1;
    let (r_lo, r_hi) = (edges[0], edges[n]);
    if e <= 0.0 {
        let mut w = ResidenceWeights {
            below: 0.0,
            above: 0.0,
            shells: Vec::new(),
        };
        if a_km < r_lo {
            w.below = 1.0;
        } else if a_km > r_hi {
            w.above = 1.0;
        } else {
            let k = (edges.partition_point(|&x| x <= a_km) - 1).min(n - 1);
            w.shells.push((k, 1.0));
        }
        return w;
    }
    let (rp, ra) = (a_km * (1.0 - e), a_km * (1.0 + e));
    let below = fraction_below(a_km, e, r_lo);
    let above = 1.0 - fraction_below(a_km, e, r_hi);
    let mut shells = Vec::new();
    if rp < r_hi && ra > r_lo {
        let first = edges.partition_point(|&x| x <= rp).saturating_sub(1).min(n - 1);
        let mut f_lo = fraction_below(a_km, e, edges[first]);
        for k in first..n {
            if edges[k] >= ra {
                break;
            }
            let f_hi = fraction_below(a_km, e, edges[k + 1]);
            if f_hi > f_lo {
                shells.push((k, f_hi - f_lo));
            }
            f_lo = f_hi;
        }
    }
    ResidenceWeights { below, above, shells }
}

fn locate(r: f64, edges: &[f64]) -> ShellDraw {
    let n = edges.len() - 1;
    if r < edges[0] {
        ShellDraw::Below
    } else if r > edges[n] {
        ShellDraw::Above
    } else {
        ShellDraw::Shell((edges.partition_point(|&x| x <= r) - 1).min(n - 1))
    }
}

/// Draws the shell holding the object at a uniformly random time, the same
/// law as `residence_weights(..).sample` without building the weights.
pub fn sample_shell<R: Rng + ?Sized>(a_km: f64, e: f64, edges: &[f64], rng: &mut R) -> ShellDraw {
    if e <= 0.0 {
        return locate(a_km, edges);
    }
    let lo = locate(a_km * (1.0 - e), edges);
    if lo == locate(a_km * (1.0 + e), edges) {
        return lo;
    }
    let m = rng.gen::<f64>() * std::f64::consts::PI;
    locate(a_km * (1.0 - e * eccentric_anomaly(m, e).cos()), edges)
}
