use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use leonet_core::capacity::{extract_coefficients, Mode};
use leonet_core::engine::{Engine, EnsembleStats, RunTrace};
use leonet_core::io::export;
use leonet_core::io::{load_population, save_population};
use leonet_core::launch::{fit_launch_model, load_launch_records, FitOptions, LaunchModel, TrafficParams};
use leonet_core::netanalysis::{compute_link_rates, precompute_flow_tensor, top_nodes, weighted_degrees, FlowTensor};
use leonet_core::population::{baseline_catalog, synthetic_catalog, BASELINE_SEED};
use leonet_core::{validation, NetworkState, SimConfig, SiteGrid, SpaceObject};

const CONFIG_FILE: &str = "config.toml";
const TENSOR_FILE: &str = "tensor.csv";
const LAUNCH_FILE: &str = "launch.toml";

#[derive(Parser)]
#[command(
    name = "leonet",
    version,
    about = "Stochastic network simulator for the LEO object population"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo evolution of a catalog
    Simulate(SimulateArgs),
    /// Link rates and weighted degrees of one snapshot
    Network(NetworkArgs),
    /// Capacity coefficients of a simulation output directory
    Capacity(CapacityArgs),
    /// Fragment flow tensor of the configured grid
    FlowTensor(TensorArgs),
    /// Launch model from historical launch records
    FitLaunch(FitLaunchArgs),
    /// Run the built-in oracle suites
    Validate,
    /// Write the synthetic baseline catalog
    SynthCatalog(SynthArgs),
}

/// Overrides applied on top of the config file.
#[derive(Args, Default)]
struct Common {
    /// TOML configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    dt_days: Option<f64>,
    #[arg(long)]
    horizon_years: Option<f64>,
    #[arg(long)]
    shell_km: Option<f64>,
    #[arg(long)]
    inc_deg: Option<f64>,
    #[arg(long)]
    scam: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lifetime_years: Option<f64>,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field {
                    cfg.$($target)+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(runs => runs);
        set!(dt_days => time.dt_days);
        set!(horizon_years => time.horizon_years);
        set!(shell_km => grid.shell_km);
        set!(inc_deg => grid.inc_deg);
        set!(scam => policy.s_cam);
        set!(gamma => policy.gamma);
        set!(kappa => policy.kappa);
        set!(lifetime_years => policy.mission_lifetime_years);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// catalog CSV; the shipped 2023 snapshot when omitted
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// years at which run 0 writes a catalog snapshot
    #[arg(long, value_delimiter = ',')]
    snapshot_years: Vec<f64>,
}

#[derive(Args)]
struct NetworkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// keep links with event probability at least this
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// years to propagate the catalog (run 0) before the snapshot
    #[arg(long, default_value_t = 0.0)]
    epoch: f64,
    /// precomputed flow tensor; computed on the fly when omitted
    #[arg(long)]
    tensor: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Args)]
struct CapacityArgs {
    /// directory written by `simulate`
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "1d")]
    mode: ModeArg,
    /// output directory; the input directory when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    grid_points: usize,
}

#[derive(Args)]
struct TensorArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
}

#[derive(Args)]
struct FitLaunchArgs {
    /// CSV with epoch,class,a_km,i_deg,mass_kg,area_m2,length_m
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// traffic forecast attached to the fitted mixtures
    #[arg(long, default_value = "lm1")]
    traffic: String,
    #[arg(long, default_value_t = 2023)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = BASELINE_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    lifetime_years: f64,
    #[arg(long, default_value = "catalog.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(a) => simulate(a)?,
        Command::Network(a) => network(a)?,
        Command::Capacity(a) => capacity(a)?,
        Command::FlowTensor(a) => flow_tensor(a)?,
        Command::FitLaunch(a) => fit_launch(a)?,
        Command::Validate => return Ok(validate()),
        Command::SynthCatalog(a) => synth_catalog(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn load_objects(catalog: Option<&Path>, cfg: &SimConfig) -> Result<Vec<SpaceObject>> {
    let pop = match catalog {
        Some(p) => load_population(p, cfg.physics.r_earth_km)?,
        None => baseline_catalog()?,
    };
    for r in &pop.rejected {
        log::warn!("catalog line {}: {}", r.line, r.reason);
    }
    let [p, u, n, f] = pop.counts();
    log::info!("catalog: {p} P, {u} U, {n} N, {f} F");
    Ok(pop.objects)
}

fn initial_state(catalog: Option<&Path>, cfg: &SimConfig) -> Result<NetworkState> {
    let objects = load_objects(catalog, cfg)?;
    let (state, outside) = NetworkState::from_objects(SiteGrid::from_config(cfg)?, objects);
    if outside > 0 {
        log::warn!("{outside} objects lie outside the grid and were dropped");
    }
    Ok(state)
}

fn write_config(cfg: &SimConfig, dir: &Path) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, cfg.to_toml_string()).with_context(|| format!("writing {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = export::prepare_out_dir(&a.common.out)?;
    let state = initial_state(a.catalog.as_deref(), &cfg)?;
    let hash = cfg.hash();
    let engine = Engine::new(cfg.clone())?;
    log::info!("{} runs of {} steps", cfg.runs, cfg.n_steps());
    let mut traces = engine.run_monte_carlo(&state, cfg.runs, &a.snapshot_years)?;
    let stats = EnsembleStats::from_traces(&traces, cfg.dt_years());
    write_config(&cfg, &dir)?;
    export::export_stats(&stats, &dir, &hash)?;
    export::steps_table(&traces, &hash).save(&dir.join(export::STEPS_FILE))?;
    for (t, snap) in std::mem::take(&mut traces[0].snapshots) {
        let objects: Vec<SpaceObject> = snap.objects().cloned().collect();
        let path = dir.join(format!("snapshot_{t}y.csv"));
        save_population(&path, &objects, Some(&format!("config {hash}, run 0, t = {t} y")))?;
    }
    let total = stats.last_total();
    let cat = stats.last_catastrophic();
    println!(
        "final total {:.0} ± {:.0}, catastrophic collisions {:.2} ± {:.2}; written to {}",
        total.mean,
        total.std,
        cat.mean,
        cat.std,
        dir.display()
    );
    Ok(())
}

fn load_tensor(path: &Path, grid: &SiteGrid) -> Result<FlowTensor> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(FlowTensor::read_csv(file, path, grid.len())?)
}

fn network(a: NetworkArgs) -> Result<()> {
    let mut cfg = a.common.config()?;
    if !(0.0..=1.0).contains(&a.rho) {
        bail!("--rho must lie in [0, 1]");
    }
    let dir = export::prepare_out_dir(&a.common.out)?;
    let mut state = initial_state(a.catalog.as_deref(), &cfg)?;
    let engine = if a.epoch > 0.0 {
        cfg.time.horizon_years = a.epoch;
        let engine = Engine::new(cfg.clone())?;
        state = engine
            .run(&state, 0, &[])?
            .final_state
            .expect("run keeps its final state");
        engine
    } else {
        Engine::new(cfg.clone())?
    };
    let tensor = match &a.tensor {
        Some(p) => load_tensor(p, &state.grid)?,
        None => precompute_flow_tensor(&state.grid, &engine.breakup, a.repetitions, cfg.seed),
    };
    let profile = engine.density.profile(state.epoch, 0.0, cfg.grid.alt_max_km + 500.0);
    let links = compute_link_rates(&state, &cfg, &tensor, &profile)
        .aggregate()
        .subnetwork(a.rho);
    let degrees = weighted_degrees(&links);
    let hash = cfg.hash();
    export::save_edges(&links, &dir.join(export::EDGES_FILE), &hash)?;
    export::degrees_table(&state.grid, &degrees, &hash).save(&dir.join(export::DEGREES_FILE))?;
    println!("{} links at t = {:.2} y", links.len(), state.epoch);
    for (label, incoming) in [("in", true), ("out", false)] {
        println!("top {label}-degree:");
        for id in top_nodes(&degrees, a.top, incoming) {
            let s = state.grid.site(id.site());
            let d = &degrees[id.0];
            println!(
                "  {} [{}-{} km, {}-{} deg]  in {:.3}  out {:.3}",
                id.species(),
                s.alt_lo,
                s.alt_hi,
                s.inc_lo,
                s.inc_hi,
                d.d_in,
                d.d_out
            );
        }
    }
    Ok(())
}

fn capacity(a: CapacityArgs) -> Result<()> {
    let cfg = SimConfig::load(&a.input.join(CONFIG_FILE))?;
    let runs = export::read_steps(&a.input.join(export::STEPS_FILE))?;
    if runs.is_empty() {
        bail!("{} holds no steps", a.input.display());
    }
    let traces: Vec<RunTrace> = runs
        .into_iter()
        .map(|steps| RunTrace {
            counts: Vec::new(),
            cum_catastrophic: Vec::new(),
            cum_collisions: Vec::new(),
            cum_small: Vec::new(),
            steps,
            snapshots: Vec::new(),
            final_state: None,
        })
        .collect();
    let refs: Vec<&RunTrace> = traces.iter().collect();
    let mode = match a.mode {
        ModeArg::OneD => Mode::OneD,
        ModeArg::TwoD => Mode::TwoD,
    };
    let coeffs = extract_coefficients(&refs, cfg.dt_years(), mode);
    let dir = export::prepare_out_dir(a.out.as_deref().unwrap_or(&a.input))?;
    let hash = cfg.hash();
    export::capacity_table(&coeffs, &hash).save(&dir.join(export::CAPACITY_FILE))?;
    let m = &coeffs.model_1d;
    println!("a = {:.6e} /yr, b = {:.6e} /yr", m.a, m.b);
    match m.capacity() {
        Some(k) => println!("capacity a/b = {k:.1}"),
        None => println!("capacity undefined (b = 0)"),
    }
    if let Some(m2) = &coeffs.model_2d {
        let eq = m2.find_equilibria();
        export::equilibria_table(&eq, &hash).save(&dir.join(export::EQUILIBRIA_FILE))?;
        let x_hi = eq.iter().map(|e| e.x).fold(m.capacity().unwrap_or(1e5), f64::max) * 1.5;
        let y_hi = eq.iter().map(|e| e.y).fold(m2.lambda / m2.gamma.max(1e-12), f64::max) * 1.5;
        let grid = m2.phase_grid((0.0, x_hi), (0.0, y_hi.max(1.0)), a.grid_points, a.grid_points);
        export::phase_grid_table(&grid, &hash).save(&dir.join(export::PHASE_GRID_FILE))?;
        println!(
            "c = {:.3e}, d = {:.3e}, e = {:.3e}, f = {:.3e}, lambda = {:.1}, gamma = {:.4}",
            m2.c, m2.d, m2.e, m2.f, m2.lambda, m2.gamma
        );
        for e in &eq {
            println!("equilibrium ({:.1}, {:.1}): {}", e.x, e.y, e.stability);
        }
    }
    Ok(())
}

fn flow_tensor(a: TensorArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let dir = export::prepare_out_dir(&a.common.out)?;
    let grid = SiteGrid::from_config(&cfg)?;
    let engine = Engine::new(cfg.clone())?;
    let tensor = precompute_flow_tensor(&grid, &engine.breakup, a.repetitions, cfg.seed);
    let path = dir.join(TENSOR_FILE);
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    tensor.write_csv(std::io::BufWriter::new(file), Some(&format!("config {}", cfg.hash())))?;
    write_config(&cfg, &dir)?;
    println!(
        "{} sites, {} repetitions; written to {}",
        grid.len(),
        a.repetitions,
        path.display()
    );
    Ok(())
}

fn fit_launch(a: FitLaunchArgs) -> Result<()> {
    let Some(traffic) = TrafficParams::preset(&a.traffic) else {
        bail!("unknown traffic forecast '{}'", a.traffic);
    };
    let records = load_launch_records(&a.records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let r_earth = SimConfig::default().physics.r_earth_km;
    let model: LaunchModel = fit_launch_model(
        &records,
        a.components,
        traffic,
        r_earth,
        FitOptions::default(),
        &mut rng,
    )?;
    let dir = export::prepare_out_dir(&a.out)?;
    let path = dir.join(LAUNCH_FILE);
    std::fs::write(&path, model.to_toml_string()).with_context(|| format!("writing {}", path.display()))?;
    let p = &model.class_proportions;
    println!(
        "{} records; proportions P {:.3} U {:.3} N {:.3}; written to {}",
        records.len(),
        p.payload,
        p.upper_stage,
        p.mission_related,
        path.display()
    );
    Ok(())
}

fn validate() -> ExitCode {
    let mut failed = 0;
    for (_, suite) in validation::SUITES {
        let check = suite();
        println!("{check}");
        failed += usize::from(!check.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} suite(s) failed");
        ExitCode::FAILURE
    }
}

fn synth_catalog(a: SynthArgs) -> Result<()> {
    let objects = synthetic_catalog(a.seed, a.lifetime_years);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let header = format!("synthetic LEO catalog, seed {}", a.seed);
    save_population(&a.out, &objects, Some(&header))?;
    println!("{} objects written to {}", objects.len(), a.out.display());
    Ok(())
}
