//! Atmospheric drag: density model, closed-form decay of (a, e), residence
//! weights over shells and the resulting inter-shell flows.

mod density;
mod residence;

pub use density::{DensityModel, DensityProfile, DensityTable};
pub use residence::{residence_weights, sample_shell, ResidenceWeights, ShellDraw};

use rand::Rng;

use crate::domain::{CircularDrag, NetworkState, NodeId, SpaceObject, SECONDS_PER_DAY};

/// Eccentricities below this use the circular branch.
pub const E_CIRCULAR: f64 = 1e-10;

const NOMINAL_SCALE_HEIGHT_KM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragOutcome {
    pub a_km: f64,
    pub e: f64,
    /// the orbit collapsed within the step
    pub decayed: bool,
}

/// Closed-form drag update of semi-major axis and eccentricity under a
/// constant density `rho` (kg/m³) over `dt_s` seconds.
#[allow(clippy::too_many_arguments)]
pub fn drag_step(
    a_km: f64,
    e: f64,
    cd: f64,
    area_per_mass: f64,
    rho: f64,
    dt_s: f64,
    mu_km3_s2: f64,
    circular: CircularDrag,
) -> DragOutcome {
    let a = a_km * 1e3;
    let n = (mu_km3_s2 * 1e9 / (a * a * a)).sqrt();
    let c = 0.5 * cd * area_per_mass * rho;
    let x = n * a * c * dt_s;
    if e < E_CIRCULAR {
        let (factor, decayed) = match circular {
            CircularDrag::Limit => {
                let f = 1.0 - x;
                (f * f, f <= 0.0)
            }
            CircularDrag::UnitBeta => {
                let theta = std::f64::consts::FRAC_PI_4 - x;
                (theta.tan().powi(2), theta <= 0.0)
            }
        };
        return DragOutcome {
            a_km: if decayed { 0.0 } else { a_km * factor },
            e: 0.0,
            decayed,
        };
    }
    let beta = 0.75f64.sqrt() * e;
    let theta = beta.atan() - beta * x;
    if theta <= 0.0 {
        return DragOutcome {
            a_km: 0.0,
            e: 0.0,
            decayed: true,
        };
    }
    let t = theta.tan();
    DragOutcome {
        a_km: a_km * (t / beta).powi(2),
        e: t / 0.75f64.sqrt(),
        decayed: false,
    }
}

/// Time-averaged density along an orbit, by the trapezoid rule in eccentric
/// anomaly (periodic integrand). `rho_at` takes altitude in km.
pub fn orbit_averaged_density(a_km: f64, e: f64, r_earth_km: f64, rho_at: impl Fn(f64) -> f64) -> f64 {
    let ae = a_km * e;
    if ae < 1.0 {
        return rho_at(a_km - r_earth_km);
    }
    // resolve the perigee peak, whose width in E is about sqrt(H / ae)
    let width = (NOMINAL_SCALE_HEIGHT_KM / ae).sqrt();
    let n = ((2.0 * std::f64::consts::PI / (0.5 * width)).ceil() as usize).clamp(8, 512);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    // cos(kh) by the Chebyshev recurrence
    let c1 = h.cos();
    let (mut prev, mut ce) = (c1, 1.0);
    let mut sum = 0.0;
    for _ in 0..n {
        let f = 1.0 - e * ce;
        sum += rho_at(a_km * f - r_earth_km) * f;
        let next = 2.0 * c1 * ce - prev;
        prev = ce;
        ce = next;
    }
    sum / n as f64
}

/// Static inputs for one decay pass.
pub struct DecayContext<'a> {
    pub profile: &'a DensityProfile,
    pub mu: f64,
    pub circular: CircularDrag,
    pub dt_days: f64,
}

/// Object counts moved by decay in one step, indexed by node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecayFlows {
    /// ε⁻: left the node for another in-domain node
    pub outflow: Vec<u64>,
    /// ε⁺: arrived from another node
    pub inflow: Vec<u64>,
    /// dropped below the domain floor
    pub reentered: Vec<u64>,
    /// left through the domain ceiling
    pub escaped: Vec<u64>,
}

impl DecayFlows {
    pub fn zeros(n_nodes: usize) -> Self {
        DecayFlows {
            outflow: vec![0; n_nodes],
            inflow: vec![0; n_nodes],
            reentered: vec![0; n_nodes],
            escaped: vec![0; n_nodes],
        }
    }
}

/// Where an object ends up after one drag step plus a residence draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Site(usize),
    Reentered,
    Escaped,
}

/// Drag-steps one object in place and draws its residence site.
pub fn propagate_object<R: Rng + ?Sized>(
    obj: &mut SpaceObject,
    state_grid: &crate::domain::SiteGrid,
    edges: &[f64],
    ctx: &DecayContext<'_>,
    rng: &mut R,
) -> Destination {
    let r_earth = state_grid.r_earth_km;
    let rho = orbit_averaged_density(obj.a_km, obj.e, r_earth, |h| ctx.profile.rho(h));
    let out = drag_step(
        obj.a_km,
        obj.e,
        obj.cd,
        obj.area_to_mass(),
        rho,
        ctx.dt_days * SECONDS_PER_DAY,
        ctx.mu,
        ctx.circular,
    );
    if out.decayed || out.a_km * (1.0 - out.e) <= r_earth {
        return Destination::Reentered;
    }
    obj.a_km = out.a_km;
    obj.e = out.e;
    match sample_shell(obj.a_km, obj.e, edges, rng) {
        ShellDraw::Shell(k) => Destination::Site(state_grid.site_id(k, state_grid.inc_bin(obj.i_deg))),
        ShellDraw::Below => Destination::Reentered,
        ShellDraw::Above => Destination::Escaped,
    }
}

/// Applies one step of drag to every object and moves objects between
/// nodes of the same species. Removed objects are returned with their node.
pub fn compute_shell_flows<R: Rng + ?Sized>(
    state: &mut NetworkState,
    ctx: &DecayContext<'_>,
    rng: &mut R,
) -> (DecayFlows, Vec<(NodeId, SpaceObject)>) {
    let n_nodes = state.nodes.len();
    let mut flows = DecayFlows::zeros(n_nodes);
    let mut removed = Vec::new();
    let mut movers: Vec<(usize, SpaceObject)> = Vec::new();
    let edges = state.grid.shell_edge_radii();
    for idx in 0..n_nodes {
        let objects = std::mem::take(&mut state.nodes[idx].objects);
        let mut kept = Vec::with_capacity(objects.len());
        let species = state.nodes[idx].species;
        for mut obj in objects {
            match propagate_object(&mut obj, &state.grid, &edges, ctx, rng) {
                Destination::Site(site) => {
                    let dest = NodeId::new(species, site).0;
                    if dest == idx {
                        kept.push(obj);
                    } else {
                        flows.outflow[idx] += 1;
                        flows.inflow[dest] += 1;
                        movers.push((dest, obj));
                    }
                }
                Destination::Reentered => {
                    flows.reentered[idx] += 1;
                    removed.push((NodeId(idx), obj));
                }
                Destination::Escaped => {
                    flows.escaped[idx] += 1;
                    removed.push((NodeId(idx), obj));
                }
            }
        }
        state.nodes[idx].objects = kept;
    }
    for (dest, obj) in movers {
        state.nodes[dest].objects.push(obj);
    }
    (flows, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{SiteGrid, Species, MU_EARTH_KM3_S2 as MU, R_EARTH_KM};
    use rand::SeedableRng;

    const DAY: f64 = SECONDS_PER_DAY;

    #[test]
    fn zero_density_is_identity() {
        for e in [0.0, 0.1] {
            for mode in [CircularDrag::Limit, CircularDrag::UnitBeta] {
                let out = drag_step(7000.0, e, 2.2, 0.01, 0.0, 30.0 * DAY, MU, mode);
                assert!((out.a_km - 7000.0).abs() < 1e-9);
                assert!((out.e - e).abs() < 1e-14);
                assert!(!out.decayed);
            }
        }
    }

    #[test]
    fn circular_limit_matches_small_e_branch() {
        let a = drag_step(6778.0, 0.0, 2.2, 0.01, 1e-13, 30.0 * DAY, MU, CircularDrag::Limit);
        let b = drag_step(6778.0, 1e-7, 2.2, 0.01, 1e-13, 30.0 * DAY, MU, CircularDrag::Limit);
        assert!((a.a_km - b.a_km).abs() < 1e-6);
    }

    #[test]
    fn unit_beta_doubles_the_circular_drop() {
        let f = |m| 6778.0 - drag_step(6778.0, 0.0, 2.2, 0.01, 1e-13, 30.0 * DAY, MU, m).a_km;
        let (limit, unit) = (f(CircularDrag::Limit), f(CircularDrag::UnitBeta));
        assert!((unit / limit - 2.0).abs() < 1e-3);
        assert!((unit - 0.593).abs() < 0.01);
    }

    #[test]
    fn drag_never_raises_a_and_can_decay() {
        for e in [0.0, 0.001, 0.05, 0.3] {
            let out = drag_step(6700.0, e, 2.2, 0.05, 1e-11, 30.0 * DAY, MU, CircularDrag::Limit);
            assert!(out.decayed || out.a_km < 6700.0);
        }
        let out = drag_step(6600.0, 0.0, 2.2, 1.0, 1e-8, 30.0 * DAY, MU, CircularDrag::Limit);
        assert!(out.decayed);
    }

    #[test]
    fn averaged_density_of_constant_is_constant() {
        let r = orbit_averaged_density(7378.0, 0.05, R_EARTH_KM, |_| 3e-14);
        assert!((r / 3e-14 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaged_density_matches_fine_quadrature() {
        let rho = |h: f64| 1e-11 * (-(h - 300.0) / 60.0).exp();
        let (a, e) = (7378.0, 0.1);
        let fine = {
            let n = 200_000;
            let mut s = 0.0;
            for k in 0..n {
                let m = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                let mut ea = m;
                for _ in 0..30 {
                    ea -= (ea - e * ea.sin() - m) / (1.0 - e * ea.cos());
                }
                s += rho(a * (1.0 - e * ea.cos()) - R_EARTH_KM);
            }
            s / n as f64
        };
        let quick = orbit_averaged_density(a, e, R_EARTH_KM, rho);
        assert!((quick / fine - 1.0).abs() < 1e-3, "{quick} vs {fine}");
    }

    fn fragment(a: f64, e: f64) -> SpaceObject {
        SpaceObject {
            id: 0,
            species: Species::Fragment,
            a_km: a,
            e,
            i_deg: 70.0,
            mass_kg: 1.0,
            radius_m: 0.1,
            area_m2: 0.05,
            cd: 2.2,
            mission_elapsed: 0.0,
        }
    }

    #[test]
    fn flows_conserve_objects() {
        let grid = SiteGrid::new(200.0, 2200.0, 50.0, 60.0, R_EARTH_KM).unwrap();
        let objs = (0..400).map(|k| fragment(R_EARTH_KM + 210.0 + k as f64 * 3.0, 0.002 * (k % 7) as f64));
        let (mut state, outside) = NetworkState::from_objects(grid, objs);
        assert_eq!(outside, 0);
        let model = DensityModel::from_config(&Default::default()).unwrap();
        let profile = model.profile(1.5, 100.0, 2500.0);
        let ctx = DecayContext {
            profile: &profile,
            mu: MU,
            circular: CircularDrag::Limit,
            dt_days: 300.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (flows, removed) = compute_shell_flows(&mut state, &ctx, &mut rng);
        let gone: u64 = flows.reentered.iter().sum::<u64>() + flows.escaped.iter().sum::<u64>();
        assert_eq!(state.total() as u64 + gone, 400);
        assert_eq!(removed.len() as u64, gone);
        assert!(gone > 0);
        assert_eq!(flows.inflow.iter().sum::<u64>(), flows.outflow.iter().sum::<u64>());
        state.check_consistency().unwrap();
    }

    #[test]
    fn no_flow_without_air_for_circular_orbits() {
        let grid = SiteGrid::new(200.0, 2200.0, 50.0, 60.0, R_EARTH_KM).unwrap();
        let objs = (0..50).map(|k| fragment(R_EARTH_KM + 225.0 + k as f64 * 37.0, 0.0));
        let (mut state, _) = NetworkState::from_objects(grid, objs);
        let before = state.node_counts();
        let model = DensityModel::Exponential {
            rho0: 0.0,
            h0_km: 200.0,
            scale_height_km: 60.0,
        };
        let profile = model.profile(0.0, 100.0, 2500.0);
        let ctx = DecayContext {
            profile: &profile,
            mu: MU,
            circular: CircularDrag::Limit,
            dt_days: 30.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (flows, _) = compute_shell_flows(&mut state, &ctx, &mut rng);
        assert_eq!(flows, DecayFlows::zeros(state.nodes.len()));
        assert_eq!(state.node_counts(), before);
    }
}
