//! The stochastic stepper and the Monte Carlo ensemble runner.
//!
//! One step applies, in order: trackable collisions, small-debris impacts on
//! payloads, breakup and fragment routing, post-mission disposal, active
//! removal, drag decay, payload aging and launches.

mod report;
mod stats;

pub use report::{species_pair_index, species_pairs, EventRecord, StepReport, StepSummary};
pub use stats::{EnsembleStats, MeanStd, RunTrace};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::breakup::{assign_fragment_flows, BreakupConstants, BreakupModel, CollisionEvent};
use crate::collision::{pair_rate, relative_velocity, sample_jump, JumpModifier, NodeSummary, PairSelectionMatrix};
use crate::decay::{compute_shell_flows, DecayContext, DensityModel};
use crate::domain::{NetworkState, NodeId, SimConfig, SpaceObject, Species};
use crate::error::{Error, Result};
use crate::launch::{inject_launches, LaunchModel};

/// Profile span for drag lookups above the grid ceiling.
const PROFILE_MARGIN_KM: f64 = 500.0;

/// The RNG of run `run` under master seed `seed`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Configuration plus the physical models it resolves to.
#[derive(Debug, Clone)]
pub struct Engine {
    pub config: SimConfig,
    pub breakup: BreakupModel,
    pub density: DensityModel,
    pub launch: Option<LaunchModel>,
}

/// Per-node pair rate bookkeeping for the collision phase.
struct PairDraw {
    i: usize,
    j: usize,
    dv: f64,
    volume: f64,
    count: u64,
}

impl Engine {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let constants = match &config.breakup.constants_file {
            Some(p) => BreakupConstants::load(p)?,
            None => BreakupConstants::builtin(),
        };
        let breakup = BreakupModel::new(
            constants,
            config.breakup.lc_min_m,
            config.physics.mu_km3_s2,
            config.physics.r_earth_km,
        );
        let density = DensityModel::from_config(&config.atmosphere)?;
        let launch = if config.launch.enabled {
            Some(LaunchModel::resolve(
                &config.launch.preset,
                config.launch.model_file.as_deref(),
                config.physics.r_earth_km,
            )?)
        } else {
            None
        };
        Ok(Engine {
            config,
            breakup,
            density,
            launch,
        })
    }

    pub fn with_launch_model(mut self, model: LaunchModel) -> Self {
        self.launch = Some(model);
        self
    }

    /// Advances `state` by one time step.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut NetworkState, rng: &mut R) -> Result<StepReport> {
        let cfg = &self.config;
        let dt_days = cfg.time.dt_days;
        let dt_years = cfg.dt_years();
        let n_nodes = state.nodes.len();
        if n_nodes != 4 * state.grid.len() {
            return Err(Error::Domain("state does not match its grid".into()));
        }
        let mut report = StepReport::new(n_nodes);
        let summaries: Vec<NodeSummary> = state.nodes.iter().map(|n| NodeSummary::of(&n.objects)).collect();
        let shell_nodes = self.shell_nodes(state);

        // (1) trackable collisions
        let mut destroyed: Vec<Vec<bool>> = state.nodes.iter().map(|n| vec![false; n.len()]).collect();
        let mut events: Vec<(usize, usize, CollisionEvent)> = Vec::new();
        if cfg.breakup.collisions_enabled {
            for draw in self.collision_draws(state, &summaries, &shell_nodes, rng)? {
                self.select_pairs(state, &draw, &mut destroyed, &mut events, rng);
            }
        }
        for (idx, node) in state.nodes.iter_mut().enumerate() {
            let flags = &destroyed[idx];
            if flags.iter().any(|d| *d) {
                let before = node.objects.len();
                let mut k = 0;
                node.objects.retain(|_| {
                    k += 1;
                    !flags[k - 1]
                });
                report.collision_loss[idx] -= (before - node.objects.len()) as i64;
            }
        }
        for (i, j, ev) in &events {
            let pair = species_pair_index(NodeId(*i).species(), NodeId(*j).species());
            let (small, _) = ev.by_mass();
            if ev.catastrophic {
                report.pair_deltas[pair][NodeId(*i).species().index()] -= 1;
                report.pair_deltas[pair][NodeId(*j).species().index()] -= 1;
            } else {
                report.pair_deltas[pair][small.species.index()] -= 1;
            }
        }

        // (2) small-debris impacts convert payloads to derelicts
        if cfg.policy.kappa > 0.0 && cfg.breakup.collisions_enabled {
            self.small_collisions(state, &summaries, &shell_nodes, &mut report, rng)?;
        }

        // (3) breakups
        for (i, j, ev) in events {
            let batch = self.breakup.synthesize(&ev, rng);
            let n_frag = batch.len() as u64;
            let routing = assign_fragment_flows(batch, &state.grid, rng);
            let placed = routing.placed.len() as u64;
            for (site, mut frag) in routing.placed {
                frag.id = state.allocate_id();
                let node = NodeId::new(Species::Fragment, site);
                report.fragment_inflow[node.0] += 1;
                state.nodes[node.0].objects.push(frag);
            }
            let pair = species_pair_index(NodeId(i).species(), NodeId(j).species());
            report.pair_deltas[pair][Species::Fragment.index()] += placed as i64;
            if ev.catastrophic {
                state.counters.catastrophic += 1;
            } else {
                state.counters.non_catastrophic += 1;
            }
            report.events.push(EventRecord {
                nodes: (NodeId(i), NodeId(j)),
                parent_ids: (ev.parents.0.id, ev.parents.1.id),
                catastrophic: ev.catastrophic,
                dv_kms: ev.dv_kms,
                fragments: n_frag,
                fragments_in_domain: placed,
            });
        }

        // (4) post-mission disposal
        self.post_mission_disposal(state, &mut report, rng);

        // (5) active removal
        self.active_removal(state, &mut report, dt_years);

        // (6) decay
        if cfg.physics.decay_enabled {
            let profile = self
                .density
                .profile(state.epoch, 0.0, state.grid.alt_max + PROFILE_MARGIN_KM);
            let ctx = DecayContext {
                profile: &profile,
                mu: cfg.physics.mu_km3_s2,
                circular: cfg.physics.circular_drag,
                dt_days,
            };
            let (flows, _) = compute_shell_flows(state, &ctx, rng);
            for k in 0..n_nodes {
                report.decay_in[k] += flows.inflow[k] as i64;
                report.decay_out[k] -= flows.outflow[k] as i64;
                report.reentered[k] -= flows.reentered[k] as i64;
                report.escaped[k] -= flows.escaped[k] as i64;
            }
        }

        // (7) aging, then launches
        for node in state.nodes.iter_mut().filter(|n| n.species == Species::Payload) {
            for o in &mut node.objects {
                o.mission_elapsed += dt_years;
            }
        }
        if let Some(model) = &self.launch {
            let year = cfg.time.start_year + state.epoch;
            let added = inject_launches(state, year, dt_days, model, rng)?;
            for (k, a) in added.added.iter().enumerate() {
                report.launch[k] += *a as i64;
            }
        }

        state.epoch += dt_years;
        report.epoch = state.epoch;
        Ok(report)
    }

    fn shell_nodes(&self, state: &NetworkState) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); state.grid.n_shells()];
        for (idx, node) in state.nodes.iter().enumerate() {
            out[state.grid.site(node.site).shell].push(idx);
        }
        out
    }

    fn collision_draws<R: Rng + ?Sized>(
        &self,
        state: &NetworkState,
        summaries: &[NodeSummary],
        shell_nodes: &[Vec<usize>],
        rng: &mut R,
    ) -> Result<Vec<PairDraw>> {
        let cfg = &self.config;
        let mu = cfg.physics.mu_km3_s2;
        let mut draws = Vec::new();
        for (shell, ids) in shell_nodes.iter().enumerate() {
            let r_mid = state.grid.shell_mid_radius(shell);
            let live: Vec<usize> = ids.iter().copied().filter(|&k| summaries[k].n > 0).collect();
            for (x, &i) in live.iter().enumerate() {
                for &j in &live[x..] {
                    let (si, sj) = (&summaries[i], &summaries[j]);
                    let Some(dv) = relative_velocity(si, r_mid, sj, r_mid, mu) else {
                        continue;
                    };
                    let volume = state
                        .grid
                        .volume(NodeId(i).site())
                        .max(state.grid.volume(NodeId(j).site()));
                    let tau = pair_rate(si, sj, i == j, dv, volume);
                    let payloads = [NodeId(i), NodeId(j)]
                        .iter()
                        .filter(|n| n.species() == Species::Payload)
                        .count();
                    let modifier = match payloads {
                        0 => JumpModifier::Plain,
                        1 => JumpModifier::Cam(cfg.policy.s_cam),
                        _ => JumpModifier::Cam2(cfg.policy.s_cam),
                    };
                    let count = sample_jump(tau, cfg.time.dt_days, modifier, rng)?;
                    if count > 0 {
                        draws.push(PairDraw {
                            i,
                            j,
                            dv,
                            volume,
                            count,
                        });
                    }
                }
            }
        }
        Ok(draws)
    }

    fn select_pairs<R: Rng + ?Sized>(
        &self,
        state: &NetworkState,
        draw: &PairDraw,
        destroyed: &mut [Vec<bool>],
        events: &mut Vec<(usize, usize, CollisionEvent)>,
        rng: &mut R,
    ) {
        let (i, j) = (draw.i, draw.j);
        let cand = |k: usize| -> Vec<usize> { (0..destroyed[k].len()).filter(|&q| !destroyed[k][q]).collect() };
        let (ci, cj) = (cand(i), cand(j));
        let (oi, oj) = (&state.nodes[i].objects, &state.nodes[j].objects);
        let mut matrix = PairSelectionMatrix::build_with_candidates(
            oi,
            &ci,
            oj,
            &cj,
            i == j,
            self.config.breakup.n_size_bins,
            draw.dv,
            draw.volume,
            self.config.time.dt_days,
        );
        let site = *state.grid.site(NodeId(i).site());
        for _ in 0..draw.count {
            let Ok((p, q)) = matrix.select_colliding_pair(rng) else {
                break;
            };
            let ev = CollisionEvent::new(oi[p].clone(), oj[q].clone(), draw.dv, site);
            if ev.catastrophic {
                destroyed[i][p] = true;
                destroyed[j][q] = true;
            } else if oj[q].mass_kg < oi[p].mass_kg {
                destroyed[j][q] = true;
            } else {
                destroyed[i][p] = true;
            }
            events.push((i, j, ev));
        }
    }

    fn small_collisions<R: Rng + ?Sized>(
        &self,
        state: &mut NetworkState,
        summaries: &[NodeSummary],
        shell_nodes: &[Vec<usize>],
        report: &mut StepReport,
        rng: &mut R,
    ) -> Result<()> {
        let cfg = &self.config;
        let mu = cfg.physics.mu_km3_s2;
        let pair = species_pair_index(Species::Payload, Species::Fragment);
        for (shell, ids) in shell_nodes.iter().enumerate() {
            let r_mid = state.grid.shell_mid_radius(shell);
            for &p in ids.iter().filter(|&&k| NodeId(k).species() == Species::Payload) {
                for &f in ids.iter().filter(|&&k| NodeId(k).species() == Species::Fragment) {
                    let (sp, sf) = (&summaries[p], &summaries[f]);
                    let Some(dv) = relative_velocity(sp, r_mid, sf, r_mid, mu) else {
                        continue;
                    };
                    let volume = state
                        .grid
                        .volume(NodeId(p).site())
                        .max(state.grid.volume(NodeId(f).site()));
                    let tau = pair_rate(sp, sf, false, dv, volume);
                    let hits = sample_jump(tau, cfg.time.dt_days, JumpModifier::Small(cfg.policy.kappa), rng)?;
                    let available = state.nodes[p].objects.len();
                    let hits = (hits as usize).min(available);
                    if hits == 0 {
                        continue;
                    }
                    let mut picked: Vec<usize> = sample_indices(rng, available, hits).into_vec();
                    picked.sort_unstable_by(|a, b| b.cmp(a));
                    let site = NodeId(p).site();
                    let n_node = NodeId::new(Species::NonManoeuvrable, site).0;
                    for k in picked {
                        let mut obj = state.nodes[p].objects.swap_remove(k);
                        obj.species = Species::NonManoeuvrable;
                        state.nodes[n_node].objects.push(obj);
                    }
                    report.small_collision[p] -= hits as i64;
                    report.small_collision[n_node] += hits as i64;
                    report.small_events += hits as u64;
                    report.pair_deltas[pair][Species::Payload.index()] -= hits as i64;
                    report.pair_deltas[pair][Species::NonManoeuvrable.index()] += hits as i64;
                    state.counters.small += hits as u64;
                }
            }
        }
        Ok(())
    }

    fn post_mission_disposal<R: Rng + ?Sized>(&self, state: &mut NetworkState, report: &mut StepReport, rng: &mut R) {
        let (life, gamma) = (self.config.policy.mission_lifetime_years, self.config.policy.gamma);
        for site in 0..state.grid.len() {
            let p = NodeId::new(Species::Payload, site).0;
            let n = NodeId::new(Species::NonManoeuvrable, site).0;
            let objects = std::mem::take(&mut state.nodes[p].objects);
            let mut kept = Vec::with_capacity(objects.len());
            for mut obj in objects {
                if obj.mission_elapsed < life {
                    kept.push(obj);
                } else if rng.gen::<f64>() < gamma {
                    obj.species = Species::NonManoeuvrable;
                    state.nodes[n].objects.push(obj);
                    report.pmd_failed[p] -= 1;
                    report.pmd_failed[n] += 1;
                } else {
                    report.pmd_removed[p] -= 1;
                }
            }
            state.nodes[p].objects = kept;
        }
    }

    fn active_removal(&self, state: &mut NetworkState, report: &mut StepReport, dt_years: f64) {
        let adr = &self.config.adr;
        for species in Species::ALL {
            let rate = adr.removals_per_year.get(species);
            if !(rate > 0.0) {
                continue;
            }
            let credit = &mut state.adr_credit[species.index()];
            *credit += rate * dt_years;
            let mut n = credit.floor() as usize;
            *credit -= n as f64;
            while n > 0 {
                let heaviest = state
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, node)| {
                        node.species == species && (adr.sites.is_empty() || adr.sites.contains(&node.site))
                    })
                    .flat_map(|(k, node)| node.objects.iter().enumerate().map(move |(q, o)| (k, q, o.mass_kg)))
                    .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)).then(b.1.cmp(&a.1)));
                let Some((k, q, _)) = heaviest else {
                    break;
                };
                state.nodes[k].objects.swap_remove(q);
                report.adr[k] -= 1;
                n -= 1;
            }
        }
    }

    /// One full run from `initial`, keeping species counts, collision
    /// counters and per-step summaries; states at `snapshot_years` are kept.
    pub fn run(&self, initial: &NetworkState, run: usize, snapshot_years: &[f64]) -> Result<RunTrace> {
        let mut rng = run_rng(self.config.seed, run);
        let mut state = initial.clone();
        let n_steps = self.config.n_steps();
        let mut trace = RunTrace::start(&state, n_steps);
        let dt_years = self.config.dt_years();
        let mut pending: Vec<f64> = snapshot_years.to_vec();
        pending.sort_by(f64::total_cmp);
        let take_snapshots = |state: &NetworkState, trace: &mut RunTrace, pending: &mut Vec<f64>| {
            while let Some(&t) = pending.first() {
                if state.epoch + 0.5 * dt_years >= t {
                    trace.snapshots.push((t, state.clone()));
                    pending.remove(0);
                } else {
                    break;
                }
            }
        };
        take_snapshots(&state, &mut trace, &mut pending);
        for _ in 0..n_steps {
            let before = state.counts_by_species();
            let report = self.step(&mut state, &mut rng)?;
            trace.push(StepSummary::from_report(before, &report), &state);
            take_snapshots(&state, &mut trace, &mut pending);
        }
        trace.final_state = Some(state);
        Ok(trace)
    }

    /// Independent runs in parallel; results do not depend on thread count.
    pub fn run_monte_carlo(
        &self,
        initial: &NetworkState,
        n_runs: usize,
        snapshot_years: &[f64],
    ) -> Result<Vec<RunTrace>> {
        if n_runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        (0..n_runs)
            .into_par_iter()
            .map(|run| self.run(initial, run, snapshot_years))
            .collect()
    }
}

/// Ensemble statistics of a batch of runs.
pub fn run_monte_carlo(config: &SimConfig, initial: &NetworkState, n_runs: usize) -> Result<EnsembleStats> {
    let engine = Engine::new(config.clone())?;
    let traces = engine.run_monte_carlo(initial, n_runs, &[])?;
    Ok(EnsembleStats::from_traces(&traces, config.dt_years()))
}

/// Payloads created at a given age, e.g. for seeding test states.
pub fn payload(id: u64, a_km: f64, i_deg: f64, age_years: f64) -> SpaceObject {
    SpaceObject {
        id,
        species: Species::Payload,
        a_km,
        e: 0.0,
        i_deg,
        mass_kg: 260.0,
        radius_m: 1.5,
        area_m2: 10.0,
        cd: 2.2,
        mission_elapsed: age_years,
    }
}
