//! Built-in oracle suites, run by `leonet validate` and the test suite.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::breakup::{BreakupConstants, BreakupModel, CollisionEvent};
use crate::collision::{avg_cross_section_cross, avg_cross_section_self, sample_jump, JumpModifier};
use crate::decay::{drag_step, residence_weights};
use crate::domain::{
    CircularDrag, NetworkState, SiteGrid, SpaceObject, Species, MU_EARTH_KM3_S2, R_EARTH_KM, SECONDS_PER_DAY,
};
use crate::engine::{run_rng, Engine, EnsembleStats};
use crate::io::export::{collisions_table, timeseries_table};
use crate::netanalysis::{compute_link_rates, precompute_flow_tensor, weighted_degrees};
use crate::orbit::eccentric_anomaly;
use crate::population::synthetic_catalog;
use crate::SimConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub type Suite = fn() -> Check;

pub const SUITES: [(&str, Suite); 8] = [
    ("cross-section", cross_section_brute_force),
    ("poisson", poisson_means),
    ("drag", drag_oracles),
    ("residence", residence_vs_kepler),
    ("bookkeeping", step_bookkeeping),
    ("mass", breakup_mass_conservation),
    ("handshake", degree_handshake),
    ("determinism", export_determinism),
];

pub fn run_all() -> Vec<Check> {
    SUITES.iter().map(|(_, f)| f()).collect()
}

fn random_objects(n: usize, rng: &mut ChaCha8Rng) -> Vec<SpaceObject> {
    (0..n)
        .map(|k| SpaceObject {
            id: k as u64,
            species: Species::Fragment,
            a_km: R_EARTH_KM + 800.0,
            e: 0.0,
            i_deg: 98.0,
            mass_kg: 1.0,
            radius_m: 10f64.powf(rng.gen_range(-1.3..0.7)),
            area_m2: 1.0,
            cd: 2.2,
            mission_elapsed: 0.0,
        })
        .collect()
}

/// Closed-form average cross-sections against explicit pair loops.
pub fn cross_section_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let sigma = |p: &SpaceObject, q: &SpaceObject| {
        std::f64::consts::PI / 4.0 * (p.diameter_m() + q.diameter_m()).powi(2) * 1e-6
    };
    for n in [2usize, 3, 17, 200] {
        let a = random_objects(n, &mut rng);
        let b = random_objects(n / 2 + 1, &mut rng);
        let (mut s, mut pairs) = (0.0, 0.0);
        for p in 0..n {
            for q in p + 1..n {
                s += sigma(&a[p], &a[q]);
                pairs += 1.0;
            }
        }
        let self_err = (avg_cross_section_self(&a).unwrap() / (s / pairs) - 1.0).abs();
        let cross_brute: f64 =
            a.iter().flat_map(|p| b.iter().map(move |q| sigma(p, q))).sum::<f64>() / (a.len() * b.len()) as f64;
        let cross_err = (avg_cross_section_cross(&a, &b).unwrap() / cross_brute - 1.0).abs();
        worst = worst.max(self_err).max(cross_err);
    }
    check(
        "cross-section brute force",
        worst < 1e-12,
        format!("max relative error {worst:.2e} (limit 1e-12)"),
    )
}

/// Sample means of 10⁶ jump draws within 3σ of rate·dt·factor.
pub fn poisson_means() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut worst_z = 0.0f64;
    for (rate, modifier) in [
        (0.002, JumpModifier::Plain),
        (0.05, JumpModifier::Cam(0.5)),
        (0.3, JumpModifier::Small(5.3)),
        (1.5, JumpModifier::Cam2(0.9)),
    ] {
        let mean = rate * 30.0 * modifier.factor();
        let sum: u64 = (0..n)
            .map(|_| sample_jump(rate, 30.0, modifier, &mut rng).unwrap())
            .sum();
        let z = (sum as f64 / n as f64 - mean).abs() / (mean / n as f64).sqrt();
        worst_z = worst_z.max(z);
    }
    check(
        "poisson sample means",
        worst_z < 3.0,
        format!("max |z| {worst_z:.2} over 4 rates (limit 3)"),
    )
}

/// Zero-density identity and the closed form against a fine RK4 integration
/// of da/dt = -Cd (A/m) ρ sqrt(μ a).
pub fn drag_oracles() -> Check {
    let dt = 30.0 * SECONDS_PER_DAY;
    let mut identity = true;
    for e in [0.0, 0.01, 0.2] {
        let out = drag_step(7000.0, e, 2.2, 0.02, 0.0, dt, MU_EARTH_KM3_S2, CircularDrag::Limit);
        identity &= out.a_km == 7000.0 && (out.e - e).abs() < 1e-15 && !out.decayed;
    }
    let mu = MU_EARTH_KM3_S2 * 1e9;
    let mut worst = 0.0f64;
    for (alt, rho) in [(400.0, 3e-12), (550.0, 5e-13), (800.0, 2e-14)] {
        let bc = 2.2 * 0.02;
        let f = |a: f64| -bc * rho * (mu * a).sqrt();
        let mut a = (R_EARTH_KM + alt) * 1e3;
        let steps = 10_000;
        let h = dt / steps as f64;
        for _ in 0..steps {
            let k1 = f(a);
            let k2 = f(a + 0.5 * h * k1);
            let k3 = f(a + 0.5 * h * k2);
            let k4 = f(a + h * k3);
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let a0 = R_EARTH_KM + alt;
        let drop_ode = a0 - a * 1e-3;
        for e in [0.0, 1e-3] {
            let out = drag_step(a0, e, 2.2, 0.02, rho, dt, MU_EARTH_KM3_S2, CircularDrag::Limit);
            worst = worst.max(((a0 - out.a_km) / drop_ode - 1.0).abs());
        }
    }
    check(
        "drag identity and ODE oracle",
        identity && worst <= 0.01,
        format!("rho=0 identity {identity}; max relative error in Δa {worst:.2e} (limit 1e-2)"),
    )
}

/// Residence weights against shell occupancy over a uniform mean-anomaly grid.
pub fn residence_vs_kepler() -> Check {
    let edges: Vec<f64> = (0..=40).map(|k| R_EARTH_KM + 200.0 + 50.0 * k as f64).collect();
    let n = 400_000;
    let mut worst = 0.0f64;
    for (a, e) in [
        (R_EARTH_KM + 800.0, 0.01),
        (R_EARTH_KM + 1200.0, 0.08),
        (R_EARTH_KM + 700.0, 0.002),
    ] {
        let w = residence_weights(a, e, &edges);
        let mut hist = vec![0usize; edges.len() - 1];
        for k in 0..n {
            let m = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            let r = a * (1.0 - e * eccentric_anomaly(m, e).cos());
            if let Some(s) = edges.windows(2).position(|p| r >= p[0] && r < p[1]) {
                hist[s] += 1;
            }
        }
        for (s, &count) in hist.iter().enumerate() {
            worst = worst.max((count as f64 / n as f64 - w.weight(s)).abs());
        }
    }
    check(
        "residence weights vs Kepler",
        worst <= 1e-3,
        format!("max weight difference {worst:.2e} (limit 1e-3)"),
    )
}

fn sample_state(n: usize, grid: SiteGrid) -> NetworkState {
    let objs = synthetic_catalog(crate::population::BASELINE_SEED, 5.0);
    let stride = (objs.len() / n).max(1);
    NetworkState::from_objects(grid, objs.into_iter().step_by(stride)).0
}

/// Every step's per-node change equals the sum of its causes, with collision
/// probability inflated so events happen.
pub fn step_bookkeeping() -> Check {
    let mut cfg = SimConfig::default();
    cfg.policy.s_cam = 0.0;
    cfg.policy.kappa = 50.0;
    cfg.launch.enabled = true;
    let grid = SiteGrid::from_config(&cfg).expect("default grid");
    let engine = Engine::new(cfg.clone()).expect("default config");
    let mut state = sample_state(usize::MAX, grid);
    let mut rng = run_rng(cfg.seed, 0);
    let (mut failures, mut events) = (Vec::new(), 0);
    for step in 0..60 {
        let before = state.node_counts();
        match engine.step(&mut state, &mut rng) {
            Ok(r) => {
                events += r.events.len() as u64 + r.small_events;
                if let Err(m) = r.check_identity(&before, &state.node_counts()) {
                    failures.push(format!("step {step}: {m}"));
                }
            }
            Err(e) => failures.push(format!("step {step}: {e}")),
        }
        if let Err(e) = state.check_consistency() {
            failures.push(format!("step {step}: {e}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("60 steps, {events} collision events, identity exact")
    } else {
        failures.join("; ")
    };
    check("per-step bookkeeping identity", failures.is_empty(), detail)
}

/// Catastrophic fragment batches carry the parents' total mass.
pub fn breakup_mass_conservation() -> Check {
    let grid = SiteGrid::from_config(&SimConfig::default()).expect("default grid");
    let model = BreakupModel::new(BreakupConstants::builtin(), 0.1, MU_EARTH_KM3_S2, R_EARTH_KM);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for (m1, m2, dv) in [
        (1000.0, 1000.0, 10.0),
        (260.0, 5.0, 12.0),
        (8900.0, 1500.0, 14.0),
        (20.0, 0.5, 9.0),
    ] {
        let mk = |m: f64| SpaceObject {
            id: 1,
            species: Species::NonManoeuvrable,
            a_km: R_EARTH_KM + 775.0,
            e: 0.0,
            i_deg: 98.0,
            mass_kg: m,
            radius_m: 0.5 * m.cbrt(),
            area_m2: 1.0,
            cd: 2.2,
            mission_elapsed: 0.0,
        };
        let site = *grid.site(grid.site_id(11, 1));
        let ev = CollisionEvent::new(mk(m1), mk(m2), dv, site);
        if !ev.catastrophic {
            continue;
        }
        let batch = model.synthesize(&ev, &mut rng);
        worst = worst.max((batch.total_mass() / (m1 + m2) - 1.0).abs());
    }
    check(
        "breakup mass conservation",
        worst <= 1e-9,
        format!("max relative mass error {worst:.2e} (limit 1e-9)"),
    )
}

/// Σ in-degree equals Σ out-degree on a baseline network.
pub fn degree_handshake() -> Check {
    let mut cfg = SimConfig::default();
    cfg.grid = crate::domain::GridConfig {
        alt_min_km: 200.0,
        alt_max_km: 2200.0,
        shell_km: 200.0,
        inc_deg: 60.0,
    };
    let grid = SiteGrid::from_config(&cfg).expect("coarse grid");
    let engine = Engine::new(cfg.clone()).expect("config");
    let state = sample_state(4000, grid.clone());
    let tensor = precompute_flow_tensor(&grid, &engine.breakup, 1, cfg.seed);
    let profile = engine.density.profile(0.0, 0.0, cfg.grid.alt_max_km + 500.0);
    let links = compute_link_rates(&state, &cfg, &tensor, &profile);
    let d = weighted_degrees(&links);
    let (din, dout): (f64, f64) = d.iter().fold((0.0, 0.0), |(a, b), x| (a + x.d_in, b + x.d_out));
    let sum_p: f64 = links.links.iter().map(|l| l.p).sum();
    let err = ((din - dout).abs() + (din - sum_p).abs()) / sum_p.max(f64::MIN_POSITIVE);
    check(
        "degree handshake",
        err < 1e-12 && !links.is_empty(),
        format!(
            "{} edges, Σd_in={din:.6} Σd_out={dout:.6} relative gap {err:.1e}",
            links.len()
        ),
    )
}

/// Two ensembles from one seed export byte-identical tables.
pub fn export_determinism() -> Check {
    let mut cfg = SimConfig::default();
    cfg.time.horizon_years = 3.0;
    cfg.launch.enabled = true;
    let grid = SiteGrid::from_config(&cfg).expect("default grid");
    let state = sample_state(3000, grid);
    let render = || -> crate::Result<Vec<u8>> {
        let engine = Engine::new(cfg.clone())?;
        let traces = engine.run_monte_carlo(&state, 3, &[])?;
        let stats = EnsembleStats::from_traces(&traces, cfg.dt_years());
        let mut buf = Vec::new();
        timeseries_table(&stats, &cfg.hash()).write(&mut buf)?;
        collisions_table(&stats, &cfg.hash()).write(&mut buf)?;
        Ok(buf)
    };
    match (render(), render()) {
        (Ok(a), Ok(b)) => check(
            "seed determinism of exports",
            a == b,
            format!("{} bytes, identical: {}", a.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => check("seed determinism of exports", false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for c in [
            cross_section_brute_force(),
            drag_oracles(),
            residence_vs_kepler(),
            breakup_mass_conservation(),
        ] {
            assert!(c.passed, "{c}");
        }
    }
}
