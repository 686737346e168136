//! Mean-field carrying-capacity models fitted to simulation ensembles.
//!
//! One dimension (fragments only): ẋ = −a·x + b·x².
//! Two dimensions (fragments x, payloads y):
//! ẋ = b·x² − a·x + c·y² + d·x·y, ẏ = −e·y² − f·x·y + λ − γ·y.

use serde::{Deserialize, Serialize};

use crate::domain::Species;
use crate::engine::{RunTrace, StepSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityModel1D {
    pub a: f64,
    pub b: f64,
}

impl CapacityModel1D {
    /// K = a/b, or `None` when nothing is produced.
    pub fn capacity(&self) -> Option<f64> {
        (self.b > 0.0).then(|| self.a / self.b)
    }

    pub fn rate(&self, x: f64) -> f64 {
        -self.a * x + self.b * x * x
    }
}

/// Closed-form solution of ẋ = −a·x + b·x²; infinite at and after blow-up.
pub fn bernoulli_solution(a: f64, b: f64, x0: f64, t: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::Domain(format!("initial population {x0} must be positive")));
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Domain(format!(
            "coefficients a = {a}, b = {b} must be non-negative"
        )));
    }
    if blow_up_time(a, b, x0).is_some_and(|ts| t >= ts) {
        return Ok(f64::INFINITY);
    }
    if a == 0.0 {
        return Ok(x0 / (1.0 - b * x0 * t));
    }
    let decay = (-a * t).exp();
    let c0 = 1.0 / x0 - b / a;
    Ok(decay / (b * decay / a + c0))
}

/// Time at which the solution diverges; `None` when x0 ≤ a/b.
pub fn blow_up_time(a: f64, b: f64, x0: f64) -> Option<f64> {
    if !(b > 0.0) || x0 <= 0.0 {
        return None;
    }
    if a == 0.0 {
        return Some(1.0 / (b * x0));
    }
    let ratio = a / (b * x0);
    (ratio < 1.0).then(|| -(-ratio).ln_1p() / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityModel2D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    /// payloads per year
    pub lambda: f64,
    /// disposals per payload per year
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Saddle,
    Unstable,
    /// a zero or purely imaginary eigenvalue
    Degenerate,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stability::Stable => "stable",
            Stability::Saddle => "saddle",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x: f64,
    pub y: f64,
    pub stability: Stability,
    /// (re, im) of the Jacobian eigenvalues
    pub eigenvalues: [(f64, f64); 2],
}

impl CapacityModel2D {
    pub fn rates(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.b * x * x - self.a * x + self.c * y * y + self.d * x * y,
            -self.e * y * y - self.f * x * y + self.lambda - self.gamma * y,
        )
    }

    /// Magnitude of the terms of each equation, for relative residuals.
    fn scales(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (self.b * x * x).abs() + (self.a * x).abs() + (self.c * y * y).abs() + (self.d * x * y).abs(),
            (self.e * y * y).abs() + (self.f * x * y).abs() + self.lambda.abs() + (self.gamma * y).abs(),
        )
    }

    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [
            [2.0 * self.b * x - self.a + self.d * y, 2.0 * self.c * y + self.d * x],
            [-self.f * y, -2.0 * self.e * y - self.f * x - self.gamma],
        ]
    }

    pub fn classify(&self, x: f64, y: f64) -> (Stability, [(f64, f64); 2]) {
        let j = self.jacobian(x, y);
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = tr * tr - 4.0 * det;
        let eig = if disc >= 0.0 {
            let s = disc.sqrt();
            [(0.5 * (tr - s), 0.0), (0.5 * (tr + s), 0.0)]
        } else {
            let s = (-disc).sqrt();
            [(0.5 * tr, -0.5 * s), (0.5 * tr, 0.5 * s)]
        };
        let tol = 1e-12 * (j[0][0].abs() + j[1][1].abs() + j[0][1].abs() + j[1][0].abs()).max(1e-300);
        let stability = if det < -tol * tol {
            Stability::Saddle
        } else if eig.iter().all(|e| e.0 < -tol) {
            Stability::Stable
        } else if eig.iter().all(|e| e.0 > tol) {
            Stability::Unstable
        } else {
            Stability::Degenerate
        };
        (stability, eig)
    }

    /// Non-negative payload levels with ẏ = 0 at fragment level `x`.
    pub fn payload_nullcline(&self, x: f64) -> Vec<f64> {
        // e·y² + (f·x + γ)·y − λ = 0
        let (qa, qb, qc) = (self.e, self.f * x + self.gamma, -self.lambda);
        let mut roots = Vec::new();
        if qa == 0.0 {
            if qb != 0.0 {
                roots.push(-qc / qb);
            } else if qc == 0.0 {
                roots.push(0.0);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                // cancellation-free pair
                let sgn = if qb >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (qb + sgn * s);
                if q != 0.0 {
                    roots.push(q / qa);
                    roots.push(qc / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
        roots.retain(|y| y.is_finite() && *y >= 0.0);
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        roots
    }

    /// Equilibria with x, y ≥ 0, found by substituting the payload
    /// nullcline into the fragment equation, bracketing sign changes along
    /// x, and polishing with damped Newton. Empty when none exist.
    pub fn find_equilibria(&self) -> Vec<Equilibrium> {
        let scale = if self.b > 0.0 {
            (self.a.abs() / self.b).max(1.0)
        } else {
            1e9
        };
        let mut xs = vec![0.0];
        let n = 6000;
        let (lo, hi) = ((scale * 1e-12).ln(), (scale * 1e3).ln());
        xs.extend((0..=n).map(|k| (lo + (hi - lo) * k as f64 / n as f64).exp()));

        let n_branches = xs.iter().map(|&x| self.payload_nullcline(x).len()).max().unwrap_or(0);
        let mut found: Vec<(f64, f64)> = Vec::new();
        for branch in 0..n_branches {
            let h = |x: f64| -> Option<(f64, f64)> {
                let y = *self.payload_nullcline(x).get(branch)?;
                Some((self.rates(x, y).0, y))
            };
            let mut prev: Option<(f64, f64, f64)> = None;
            for &x in &xs {
                let Some((v, y)) = h(x) else {
                    prev = None;
                    continue;
                };
                if v == 0.0 {
                    found.push((x, y));
                } else if let Some((px, pv, _)) = prev {
                    if pv != 0.0 && pv.signum() != v.signum() {
                        if let Some(r) = bisect(&h, px, x) {
                            found.push(r);
                        }
                    }
                }
                prev = Some((x, v, y));
            }
        }

        let mut out: Vec<Equilibrium> = Vec::new();
        for (x0, y0) in found {
            let (x, y) = self.newton(x0, y0);
            if !(x >= 0.0 && y >= 0.0) || !self.is_equilibrium(x, y) {
                continue;
            }
            let dup = out
                .iter()
                .any(|e| (e.x - x).abs() <= 1e-6 * x.abs().max(1e-9) && (e.y - y).abs() <= 1e-6 * y.abs().max(1e-9));
            if !dup {
                let (stability, eigenvalues) = self.classify(x, y);
                out.push(Equilibrium {
                    x,
                    y,
                    stability,
                    eigenvalues,
                });
            }
        }
        out.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        out
    }

    pub fn is_equilibrium(&self, x: f64, y: f64) -> bool {
        let (fx, fy) = self.rates(x, y);
        let (sx, sy) = self.scales(x, y);
        fx.abs() <= 1e-6 * sx.max(f64::MIN_POSITIVE) && fy.abs() <= 1e-6 * sy.max(f64::MIN_POSITIVE)
    }

    fn newton(&self, mut x: f64, mut y: f64) -> (f64, f64) {
        for _ in 0..50 {
            let (fx, fy) = self.rates(x, y);
            let j = self.jacobian(x, y);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dx = (fx * j[1][1] - fy * j[0][1]) / det;
            let dy = (fy * j[0][0] - fx * j[1][0]) / det;
            let norm0 = fx.hypot(fy);
            let mut step = 1.0;
            loop {
                let (nx, ny) = (x - step * dx, y - step * dy);
                let (gx, gy) = self.rates(nx, ny);
                if gx.hypot(gy) < norm0 || step < 1e-6 {
                    x = nx;
                    y = ny;
                    break;
                }
                step *= 0.5;
            }
            if dx.abs() <= 1e-14 * x.abs().max(1.0) && dy.abs() <= 1e-14 * y.abs().max(1.0) {
                break;
            }
        }
        (x, y)
    }

    /// Fourth-order Runge-Kutta trajectory sampled every `dt` years.
    /// Stops early once the state leaves the finite range.
    pub fn integrate(&self, x0: f64, y0: f64, dt: f64, n_steps: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n_steps + 1);
        let (mut x, mut y) = (x0, y0);
        out.push((x, y));
        for _ in 0..n_steps {
            let k1 = self.rates(x, y);
            let k2 = self.rates(x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1);
            let k3 = self.rates(x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1);
            let k4 = self.rates(x + dt * k3.0, y + dt * k3.1);
            x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            if !(x.is_finite() && y.is_finite()) {
                break;
            }
            out.push((x, y));
        }
        out
    }

    pub fn phase_grid(&self, x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Vec<PhasePoint> {
        let lin = |r: (f64, f64), n: usize, k: usize| {
            if n <= 1 {
                r.0
            } else {
                r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (lin(x_range, nx, i), lin(y_range, ny, j));
                let (xdot, ydot) = self.rates(x, y);
                out.push(PhasePoint { x, y, xdot, ydot });
            }
        }
        out
    }
}

fn bisect(h: &impl Fn(f64) -> Option<(f64, f64)>, mut lo: f64, mut hi: f64) -> Option<(f64, f64)> {
    let (mut vlo, _) = h(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (v, _) = h(mid)?;
        if v == 0.0 || hi - lo <= 1e-15 * hi.abs() {
            lo = mid;
            hi = mid;
            break;
        }
        if v.signum() == vlo.signum() {
            lo = mid;
            vlo = v;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    h(x).map(|(_, y)| (x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

/// Coefficients averaged over runs and steps, with sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedCoefficients {
    pub mode: Mode,
    pub model_1d: CapacityModel1D,
    pub model_2d: Option<CapacityModel2D>,
    /// steps contributing to the fragment-only coefficients
    pub samples_x: usize,
    /// steps contributing to the payload coefficients
    pub samples_y: usize,
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self, name: &str) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let v = self.sum / self.n as f64;
        if v < 0.0 {
            log::warn!("coefficient {name} = {v:e} is negative; floored at 0");
            0.0
        } else {
            v
        }
    }
}

/// Per-step coefficient estimates averaged over every step of every trace
/// whose population denominators are nonzero. Rates are per year.
pub fn extract_coefficients(traces: &[&RunTrace], dt_years: f64, mode: Mode) -> ExtractedCoefficients {
    use Species::{Fragment as F, Payload as P};
    let (f, p) = (F.index(), P.index());
    let mut m: [Mean; 8] = Default::default();
    let (mut nx, mut ny) = (0, 0);
    for step in traces.iter().flat_map(|t| t.steps.iter()) {
        let x = step.counts_before[f] as f64;
        let y = step.counts_before[p] as f64;
        let pd = |a, b, s| step.pair_delta(a, b, s) as f64;
        if x > 0.0 {
            nx += 1;
            m[0].add(-step.decay_removed[f] as f64 / (x * dt_years));
            m[1].add(pd(F, F, F) / (x * x * dt_years));
        }
        if mode == Mode::TwoD && y > 0.0 {
            ny += 1;
            m[2].add(pd(P, P, F) / (y * y * dt_years));
            m[4].add(-pd(P, P, P) / (y * y * dt_years));
            m[6].add(payload_disposals(step) / (y * dt_years));
            m[7].add(step.launch[p] as f64 / dt_years);
            if x > 0.0 {
                m[3].add(pd(P, F, F) / (x * y * dt_years));
                m[5].add(-pd(P, F, P) / (x * y * dt_years));
            }
        }
    }
    let model_1d = CapacityModel1D {
        a: m[0].get("a"),
        b: m[1].get("b"),
    };
    let model_2d = (mode == Mode::TwoD).then(|| CapacityModel2D {
        a: model_1d.a,
        b: model_1d.b,
        c: m[2].get("c"),
        d: m[3].get("d"),
        e: m[4].get("e"),
        f: m[5].get("f"),
        lambda: m[7].get("lambda"),
        gamma: m[6].get("gamma"),
    });
    ExtractedCoefficients {
        mode,
        model_1d,
        model_2d,
        samples_x: nx,
        samples_y: ny,
    }
}

/// Payloads that left the P class through disposal in one step.
pub fn payload_disposals(step: &StepSummary) -> f64 {
    let p = Species::Payload.index();
    -(step.pmd_removed[p] + step.pmd_failed[p]) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::species_pair_index;

    const BASELINE: CapacityModel2D = CapacityModel2D {
        a: 0.004728332083372,
        b: 8.662467642990248e-08,
        c: 1.175401267752297e-14,
        d: 9.428437648428035e-10,
        gamma: 0.368578793358788,
        lambda: 0.0,
        e: 2.003922397999517e-17,
        f: 2.316928055993169e-13,
    };

    #[test]
    fn bernoulli_fixed_point_and_limits() {
        let (a, b) = (0.005, 1e-7);
        let k = a / b;
        for t in [0.0, 10.0, 100.0] {
            assert!((bernoulli_solution(a, b, k, t).unwrap() - k).abs() < 1e-9 * k);
        }
        let mut prev = f64::INFINITY;
        for t in 0..200 {
            let x = bernoulli_solution(a, b, 0.5 * k, t as f64 * 10.0).unwrap();
            assert!(x < prev);
            prev = x;
        }
        assert!(prev < 1e-3 * k);
        let ts = blow_up_time(a, b, 2.0 * k).unwrap();
        assert!((ts - std::f64::consts::LN_2 / a).abs() < 1e-9);
        assert!(bernoulli_solution(a, b, 2.0 * k, ts * 0.999).unwrap() > 100.0 * k);
        assert_eq!(bernoulli_solution(a, b, 2.0 * k, ts).unwrap(), f64::INFINITY);
        assert!(bernoulli_solution(a, b, 0.0, 1.0).is_err());
    }

    #[test]
    fn bernoulli_satisfies_the_ode() {
        let (a, b, x0) = (0.005, 1e-7, 3.0e4);
        for t in [1.0, 20.0, 80.0] {
            let h = 1e-3;
            let deriv = (bernoulli_solution(a, b, x0, t + h).unwrap() - bernoulli_solution(a, b, x0, t - h).unwrap())
                / (2.0 * h);
            let x = bernoulli_solution(a, b, x0, t).unwrap();
            assert!((deriv - (-a * x + b * x * x)).abs() < 1e-8 * x.max(1.0));
        }
    }

    #[test]
    fn zero_launch_equilibria() {
        let eq = BASELINE.find_equilibria();
        assert_eq!(eq.len(), 2, "{eq:?}");
        assert_eq!((eq[0].x, eq[0].y), (0.0, 0.0));
        assert_eq!(eq[0].stability, Stability::Stable);
        let k = BASELINE.a / BASELINE.b;
        assert!((eq[1].x - k).abs() < 1e-9 * k);
        assert_eq!(eq[1].y, 0.0);
        assert_eq!(eq[1].stability, Stability::Saddle);
    }

    #[test]
    fn classification_agrees_with_forward_integration() {
        let m = CapacityModel2D {
            lambda: 3000.0,
            gamma: 0.166677662732838,
            ..BASELINE
        };
        for eq in m.find_equilibria() {
            let (dx, dy) = (1e-3 * eq.x.max(1.0), 1e-3 * eq.y.max(1.0));
            let traj = m.integrate(eq.x + dx, eq.y + dy, 0.5, 4000);
            let (xe, ye) = *traj.last().unwrap();
            let back = (xe - eq.x).abs() < 2.0 * dx && (ye - eq.y).abs() < 2.0 * dy;
            assert_eq!(back, eq.stability == Stability::Stable, "{eq:?} ended at {xe}, {ye}");
        }
    }

    #[test]
    fn phase_grid_shape() {
        let g = BASELINE.phase_grid((0.0, 1e5), (0.0, 2e4), 5, 3);
        assert_eq!(g.len(), 15);
        assert_eq!((g[14].x, g[14].y), (1e5, 2e4));
    }

    fn summary(x: usize, y: usize) -> StepSummary {
        let mut s = StepSummary::default();
        s.counts_before[Species::Fragment.index()] = x;
        s.counts_before[Species::Payload.index()] = y;
        s
    }

    fn trace(steps: Vec<StepSummary>) -> RunTrace {
        RunTrace {
            counts: Vec::new(),
            cum_catastrophic: Vec::new(),
            cum_collisions: Vec::new(),
            cum_small: Vec::new(),
            steps,
            snapshots: Vec::new(),
            final_state: None,
        }
    }

    #[test]
    fn pure_decay_recovers_the_rate() {
        let (r, dt): (f64, f64) = (0.05, 30.0 / 365.25);
        let mut x: f64 = 1.0e6;
        let mut steps = Vec::new();
        for _ in 0..240 {
            let next = x * (-r * dt).exp();
            let mut s = summary(x.round() as usize, 0);
            s.decay_removed[Species::Fragment.index()] = -(x.round() - next.round()) as i64;
            steps.push(s);
            x = next;
        }
        let t = trace(steps);
        let c = extract_coefficients(&[&t], dt, Mode::OneD);
        assert!((c.model_1d.a - r).abs() < 0.01 * r, "{}", c.model_1d.a);
        assert_eq!(c.model_1d.b, 0.0);
    }

    #[test]
    fn two_d_coefficients_from_known_deltas() {
        let mut s = summary(100, 10);
        let ff = species_pair_index(Species::Fragment, Species::Fragment);
        let pf = species_pair_index(Species::Payload, Species::Fragment);
        let pp = species_pair_index(Species::Payload, Species::Payload);
        s.pair_deltas[ff][Species::Fragment.index()] = 50;
        s.pair_deltas[pf][Species::Fragment.index()] = 20;
        s.pair_deltas[pf][Species::Payload.index()] = -1;
        s.pair_deltas[pp][Species::Payload.index()] = -2;
        s.pair_deltas[pp][Species::Fragment.index()] = 30;
        s.pmd_removed[Species::Payload.index()] = -3;
        s.pmd_failed[Species::Payload.index()] = -1;
        s.launch[Species::Payload.index()] = 4;
        let empty = summary(0, 0);
        let t = trace(vec![s, empty]);
        let m = extract_coefficients(&[&t], 0.5, Mode::TwoD).model_2d.unwrap();
        assert!((m.b - 50.0 / (1e4 * 0.5)).abs() < 1e-15);
        assert!((m.c - 30.0 / (100.0 * 0.5)).abs() < 1e-12);
        assert!((m.d - 20.0 / (1000.0 * 0.5)).abs() < 1e-12);
        assert!((m.e - 2.0 / 50.0).abs() < 1e-12);
        assert!((m.f - 1.0 / 500.0).abs() < 1e-12);
        assert!((m.gamma - 4.0 / 5.0).abs() < 1e-12);
        assert!((m.lambda - 8.0).abs() < 1e-12);
    }
}
