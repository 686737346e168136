//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 2 5`.

#![allow(clippy::field_reassign_with_default)]

use std::process::ExitCode;
use std::time::Instant;

use leonet_core::capacity::{bernoulli_solution, extract_coefficients, CapacityModel2D, Mode};
use leonet_core::collision::{relative_velocity, NodeSummary};
use leonet_core::domain::{GridConfig, MU_EARTH_KM3_S2, R_EARTH_KM};
use leonet_core::engine::{Engine, EnsembleStats, RunTrace};
use leonet_core::launch::{ClassProportions, LaunchModel, TrafficParams};
use leonet_core::netanalysis::{
    compute_link_rates, precompute_flow_tensor, top_nodes, weighted_degrees, TENSOR_REPETITIONS,
};
use leonet_core::population::{baseline_catalog, synthetic_catalog, BASELINE_SEED};
use leonet_core::{validation, NetworkState, SimConfig, SiteGrid, SpaceObject, Species};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
type BinPair = ((f64, f64), (f64, f64), f64);

const DV_TABLE: [BinPair; 3] = [
    ((0.0, 10.0), (0.0, 10.0), 0.8390),
    ((0.0, 10.0), (170.0, 180.0), 14.8850),
    ((60.0, 70.0), (110.0, 120.0), 11.4403),
];
const DV_VS_TABLE: f64 = 0.05;
const DV_VS_EXACT: f64 = 0.10;

// criterion 2
const EQ_TOL: f64 = 0.02;

// criterion 3
const BASELINE_RUNS: usize = 30;
const CATASTROPHIC_RANGE: (f64, f64) = (25.0, 55.0);
const FINAL_TOTAL: f64 = 23_800.0;
const FINAL_TOTAL_TOL: f64 = 0.25;

// criterion 4
const CAPACITY_POPULATIONS: [usize; 4] = [9804, 39020, 68628, 98040];
const CAPACITY_YEARS: f64 = 60.0;
const CAPACITY_RUNS: usize = 30;
const BERNOULLI_TOL: f64 = 0.15;

// criterion 6
const LAUNCH_RATE: f64 = 3000.0;
const PAYLOAD_YEARS: f64 = 30.0;
const PAYLOAD_RUNS: usize = 30;

// criterion 7
const CENTRAL_SPECIES: [Species; 2] = [Species::Fragment, Species::NonManoeuvrable];
const CENTRAL_ALT_KM: (f64, f64) = (400.0, 1000.0);
const CENTRAL_INC_DEG: (f64, f64) = (60.0, 120.0);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sample_bin(n: usize, inc: (f64, f64), rng: &mut ChaCha8Rng) -> Vec<SpaceObject> {
    (0..n)
        .map(|k| SpaceObject {
            id: k as u64,
            species: Species::Fragment,
            a_km: R_EARTH_KM + rng.gen_range(800.0..810.0),
            e: rng.gen_range(0.0..0.1),
            i_deg: rng.gen_range(inc.0..inc.1),
            mass_kg: 1.0,
            radius_m: 0.1,
            area_m2: 0.03,
            cd: 2.2,
            mission_elapsed: 0.0,
        })
        .collect()
}

/// Mean pairwise speed difference with each object's own vis-viva speed at
/// radius `r`, the angle between velocities taken as the angle between orbit
/// normals, and node separations on a uniform grid.
fn exact_mean_dv(a: &[SpaceObject], b: &[SpaceObject], r: f64) -> f64 {
    const N_RAAN: usize = 360;
    let speed = |o: &SpaceObject| (MU_EARTH_KM3_S2 * (2.0 / r - 1.0 / o.a_km)).sqrt();
    let mut sum = 0.0;
    for p in a {
        let (vp, (sp, cp)) = (speed(p), p.i_deg.to_radians().sin_cos());
        for q in b {
            let (vq, (sq, cq)) = (speed(q), q.i_deg.to_radians().sin_cos());
            for k in 0..N_RAAN {
                let d_raan = std::f64::consts::TAU * (k as f64 + 0.5) / N_RAAN as f64;
                let cos_theta = sp * sq * d_raan.cos() + cp * cq;
                sum += (vp * vp + vq * vq - 2.0 * vp * vq * cos_theta).max(0.0).sqrt();
            }
        }
    }
    sum / (a.len() * b.len() * N_RAAN) as f64
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r_shell = R_EARTH_KM + 805.0;
    let mut ok = true;
    let mut rows = Vec::new();
    for (bin_i, bin_j, table) in DV_TABLE {
        let (a, b) = (sample_bin(200, bin_i, &mut rng), sample_bin(200, bin_j, &mut rng));
        let approx = relative_velocity(
            &NodeSummary::of(&a),
            r_shell,
            &NodeSummary::of(&b),
            r_shell,
            MU_EARTH_KM3_S2,
        )
        .expect("non-empty nodes");
        let exact = exact_mean_dv(&a, &b, r_shell);
        let (e_table, e_exact) = ((approx / table - 1.0).abs(), (approx / exact - 1.0).abs());
        ok &= e_table <= DV_VS_TABLE && e_exact <= DV_VS_EXACT;
        rows.push(format!(
            "{bin_i:?}x{bin_j:?}: approx {approx:.4} (ref {table:.4}, {:.1}%) exact {exact:.4} ({:.1}%)",
            100.0 * e_table,
            100.0 * e_exact
        ));
    }
    outcome(ok, rows.join("; "))
}

fn criterion_2() -> Outcome {
    let baseline = CapacityModel2D {
        a: 0.004728332083372,
        b: 8.662467642990248e-08,
        c: 1.175401267752297e-14,
        d: 9.428437648428035e-10,
        gamma: 0.368578793358788,
        lambda: 0.0,
        e: 2.003922397999517e-17,
        f: 2.316928055993169e-13,
    };
    let cam = CapacityModel2D {
        a: 0.004226706317436,
        b: 8.676619156862889e-08,
        c: 1.224456162356393e-15,
        d: 9.606253682748494e-11,
        gamma: 0.166677662732838,
        lambda: 3000.0,
        e: 1.647891773627737e-17,
        f: 1.957039536003774e-13,
    };
    let no_cam = CapacityModel2D {
        a: 0.022592560002365,
        b: 6.214276689402071e-08,
        c: 1.224460289412396e-07,
        d: 8.664860267617623e-07,
        gamma: 0.166621505691604,
        lambda: 3000.0,
        e: 1.647986448760241e-09,
        f: 1.790973469946202e-09,
    };
    let near = |v: f64, target: f64| (v / target - 1.0).abs() <= EQ_TOL;
    let fmt = |eq: &[leonet_core::capacity::Equilibrium]| {
        eq.iter()
            .map(|e| format!("({:.4e}, {:.4e}) {}", e.x, e.y, e.stability))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let eb = baseline.find_equilibria();
    let ok_b = eb.len() == 2 && eb[0].x == 0.0 && eb[0].y == 0.0 && near(eb[1].x, 5.4584e4) && eb[1].y.abs() < 1e-6;

    let ec = cam.find_equilibria();
    let xs: Vec<f64> = ec.iter().map(|e| e.x).collect();
    let ok_c = ec.len() == 2
        && ec.iter().all(|e| near(e.y, 1.8e4))
        && xs.iter().any(|&x| x < EQ_TOL * 4.90e4)
        && xs.iter().any(|&x| near(x, 4.90e4));

    let en = no_cam.find_equilibria();
    let ok_n = en.is_empty();
    outcome(
        ok_b && ok_c && ok_n,
        format!(
            "baseline {} [{}]; 99.99% {} [{}]; 0% expects none, got {} [{}]",
            ok_b,
            fmt(&eb),
            ok_c,
            fmt(&ec),
            en.len(),
            fmt(&en)
        ),
    )
}

fn baseline_state(cfg: &SimConfig) -> NetworkState {
    let pop = baseline_catalog().expect("shipped catalog parses");
    NetworkState::from_objects(SiteGrid::from_config(cfg).expect("grid"), pop.objects).0
}

fn criterion_3() -> Outcome {
    let mut cfg = SimConfig::default();
    cfg.runs = BASELINE_RUNS;
    let state = baseline_state(&cfg);
    let engine = Engine::new(cfg.clone()).expect("default config");
    let traces = engine.run_monte_carlo(&state, cfg.runs, &[]).expect("runs");
    let stats = EnsembleStats::from_traces(&traces, cfg.dt_years());
    let cat = stats.last_catastrophic();
    let total = stats.last_total();
    let ok_cat = (CATASTROPHIC_RANGE.0..=CATASTROPHIC_RANGE.1).contains(&cat.mean);
    let ok_total = (total.mean / FINAL_TOTAL - 1.0).abs() <= FINAL_TOTAL_TOL;
    let last = stats.species.last().expect("epochs");
    outcome(
        ok_cat && ok_total,
        format!(
            "{} runs x 100 y: catastrophic {:.1} ± {:.1} (want {:?}); final total {:.0} ± {:.0} (want {} ± {}%); final P/U/N/F {:.0}/{:.0}/{:.0}/{:.0}",
            cfg.runs,
            cat.mean,
            cat.std,
            CATASTROPHIC_RANGE,
            total.mean,
            total.std,
            FINAL_TOTAL,
            100.0 * FINAL_TOTAL_TOL,
            last[0].mean,
            last[1].mean,
            last[2].mean,
            last[3].mean
        ),
    )
}

fn fragment_population(n: usize) -> Vec<SpaceObject> {
    let mut out = Vec::with_capacity(n);
    let mut seed = BASELINE_SEED;
    while out.len() < n {
        out.extend(
            synthetic_catalog(seed, 5.0)
                .into_iter()
                .filter(|o| o.species == Species::Fragment),
        );
        seed += 1;
    }
    out.truncate(n);
    for (k, o) in out.iter_mut().enumerate() {
        o.id = k as u64 + 1;
    }
    out
}

fn single_node_config() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.grid = GridConfig {
        alt_min_km: 200.0,
        alt_max_km: 2200.0,
        shell_km: 2000.0,
        inc_deg: 180.0,
    };
    cfg
}

fn mean_fragments(traces: &[RunTrace]) -> Vec<f64> {
    let f = Species::Fragment.index();
    (0..traces[0].counts.len())
        .map(|k| traces.iter().map(|t| t.counts[k][f] as f64).sum::<f64>() / traces.len() as f64)
        .collect()
}

fn criterion_4() -> Outcome {
    let mut cfg = single_node_config();
    cfg.time.dt_days = 365.25;
    cfg.time.horizon_years = CAPACITY_YEARS;
    let grid = SiteGrid::from_config(&cfg).expect("single node");
    let engine = Engine::new(cfg.clone()).expect("config");
    let mut runs = Vec::new();
    for &n in &CAPACITY_POPULATIONS {
        let state = NetworkState::from_objects(grid.clone(), fragment_population(n)).0;
        runs.push(engine.run_monte_carlo(&state, CAPACITY_RUNS, &[]).expect("runs"));
    }
    let refs: Vec<&RunTrace> = runs[0].iter().collect();
    let model = extract_coefficients(&refs, cfg.dt_years(), Mode::OneD).model_1d;
    let Some(k) = model.capacity() else {
        return outcome(
            false,
            format!("no fragment collisions in the baseline runs (a={:.4e}/y, b=0)", model.a),
        );
    };
    let mut ok = true;
    let mut rows = vec![format!("a={:.4e}/y b={:.4e}/y K=a/b={:.4e}", model.a, model.b, k)];
    for (traces, &n0) in runs.iter().zip(&CAPACITY_POPULATIONS) {
        let mean = mean_fragments(traces);
        let x0 = mean[0];
        let x_end = *mean.last().expect("epochs");
        let shape_ok = if x0 > k {
            mean.windows(2).all(|w| w[1] >= w[0])
        } else {
            x_end < x0 && mean.windows(2).all(|w| w[1] <= w[0] * 1.01)
        };
        let mut worst = 0.0f64;
        for (step, &m) in mean.iter().enumerate() {
            let t = step as f64 * cfg.dt_years();
            match bernoulli_solution(model.a, model.b, x0, t) {
                Ok(xb) if xb.is_finite() => worst = worst.max((m / xb - 1.0).abs()),
                _ => {}
            }
        }
        let case_ok = shape_ok && worst <= BERNOULLI_TOL;
        ok &= case_ok;
        rows.push(format!(
            "x0={n0} ({}) {x0:.0}->{x_end:.0} {} max dev from Bernoulli {:.1}%",
            if x0 > k { "above K" } else { "below K" },
            if shape_ok { "shape ok" } else { "shape wrong" },
            100.0 * worst
        ));
    }
    outcome(ok, rows.join("; "))
}

fn criterion_5() -> Outcome {
    let checks = validation::run_all();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let detail = if failed.is_empty() {
        format!("{} oracle suites pass", checks.len())
    } else {
        failed.join("; ")
    };
    outcome(failed.is_empty(), detail)
}

fn criterion_6() -> Outcome {
    let mut cfg = single_node_config();
    cfg.time.horizon_years = PAYLOAD_YEARS;
    cfg.launch.enabled = true;
    // the analytic curve assumes payloads do not decay
    cfg.physics.decay_enabled = false;
    let mut model = LaunchModel::with_traffic(TrafficParams::constant(LAUNCH_RATE), R_EARTH_KM);
    model.class_proportions = ClassProportions {
        payload: 1.0,
        upper_stage: 0.0,
        mission_related: 0.0,
    };
    let engine = Engine::new(cfg.clone()).expect("config").with_launch_model(model);
    let state = NetworkState::empty(SiteGrid::from_config(&cfg).expect("grid"));
    let traces = engine.run_monte_carlo(&state, PAYLOAD_RUNS, &[]).expect("runs");

    let p = Species::Payload.index();
    let dt = cfg.dt_years();
    let life = cfg.policy.mission_lifetime_years;
    let settle = ((life + 1.0) / dt).ceil() as usize;
    let tail = ((PAYLOAD_YEARS - 10.0) / dt).round() as usize;
    // per-run removal rate per payload in steady state, and mean count over the last decade
    let per_run: Vec<(f64, f64)> = traces
        .iter()
        .map(|t| {
            let rates: Vec<f64> = t.steps[settle..]
                .iter()
                .filter(|s| s.counts_before[p] > 0)
                .map(|s| {
                    let collisions: i64 = s.pair_deltas.iter().map(|d| d[p]).sum();
                    -(s.pmd_removed[p] + s.pmd_failed[p] + collisions) as f64 / (s.counts_before[p] as f64 * dt)
                })
                .collect();
            let gamma = rates.iter().sum::<f64>() / rates.len() as f64;
            let y = t.counts[tail..].iter().map(|c| c[p] as f64).sum::<f64>() / (t.counts.len() - tail) as f64;
            (gamma, y)
        })
        .collect();
    let n = per_run.len() as f64;
    let mean = |v: &dyn Fn(&(f64, f64)) -> f64| per_run.iter().map(v).sum::<f64>() / n;
    let se = |v: &dyn Fn(&(f64, f64)) -> f64| {
        let m = mean(v);
        (per_run.iter().map(|r| (v(r) - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    let gamma_hat = mean(&|r| r.0);
    let y_mean = mean(&|r| r.1);
    let target = LAUNCH_RATE / gamma_hat;
    let band = 3.0 * (se(&|r| r.1).powi(2) + se(&|r| LAUNCH_RATE / r.0).powi(2)).sqrt();
    let ok = (y_mean - target).abs() <= band;
    let y_end = traces.iter().map(|t| t.counts.last().unwrap()[p] as f64).sum::<f64>() / n;
    outcome(
        ok,
        format!(
            "gamma_hat {gamma_hat:.4}/y, λ/gamma_hat {target:.0}; late mean {y_mean:.0}, |diff| {:.0} vs 3σ band {band:.0}; final {y_end:.0}",
            (y_mean - target).abs()
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = SimConfig::default();
    let state = baseline_state(&cfg);
    let grid = state.grid.clone();
    let engine = Engine::new(cfg.clone()).expect("default config");
    let tensor = precompute_flow_tensor(&grid, &engine.breakup, TENSOR_REPETITIONS, cfg.seed);
    let profile = engine.density.profile(0.0, 0.0, cfg.grid.alt_max_km + 500.0);
    let links = compute_link_rates(&state, &cfg, &tensor, &profile).aggregate();
    let degrees = weighted_degrees(&links);
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, incoming) in [("in", true), ("out", false)] {
        let mut names = Vec::new();
        for id in top_nodes(&degrees, 5, incoming) {
            let s = grid.site(id.site());
            let inside = CENTRAL_SPECIES.contains(&id.species())
                && s.alt_lo >= CENTRAL_ALT_KM.0
                && s.alt_hi <= CENTRAL_ALT_KM.1
                && s.inc_lo <= CENTRAL_INC_DEG.0
                && s.inc_hi >= CENTRAL_INC_DEG.1;
            ok &= inside;
            let d = if incoming {
                degrees[id.0].d_in
            } else {
                degrees[id.0].d_out
            };
            names.push(format!(
                "{}[{}-{}km {}-{}deg]={d:.2}{}",
                id.species(),
                s.alt_lo,
                s.alt_hi,
                s.inc_lo,
                s.inc_hi,
                if inside { "" } else { "!" }
            ));
        }
        parts.push(format!("top {label}: {}", names.join(" ")));
    }
    outcome(ok, parts.join("; "))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (1, "relative velocity table", criterion_1),
        (2, "equilibria reproduction", criterion_2),
        (3, "baseline evolution", criterion_3),
        (4, "carrying-capacity divergence", criterion_4),
        (5, "property suites", criterion_5),
        (6, "payload steady state", criterion_6),
        (7, "centrality snapshot", criterion_7),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} [{tag}] {name} ({:.1}s): {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        failures += usize::from(!o.passed);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
