//! Collision breakups: catastrophic classification, the fragment count law,
//! fragment property synthesis and routing of fragments to F nodes.

use std::path::Path;

use nalgebra::Vector3;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::decay::{residence_weights, ShellDraw};
use crate::domain::{OrbitSite, SiteGrid, SpaceObject, Species};
use crate::error::{Error, Result};
use crate::orbit::{elements_from_state, state_at, true_anomaly_at_radius};

pub const CATASTROPHIC_EMR_J_PER_G: f64 = 40.0;
pub const SIZE_EXPONENT: f64 = 1.71;
pub const FRAGMENT_CD: f64 = 2.2;

const BUILTIN_CONSTANTS: &str = include_str!("../data/breakup_sbm.toml");

/// Linear in λ between two points, flat outside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Ramp {
    pub fn at(&self, x: f64) -> f64 {
        if x <= self.x0 {
            self.y0
        } else if x >= self.x1 {
            self.y1
        } else {
            self.y0 + (self.y1 - self.y0) * (x - self.x0) / (self.x1 - self.x0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodal {
    pub alpha: Ramp,
    pub mu1: Ramp,
    pub sigma1: Ramp,
    pub mu2: Ramp,
    pub sigma2: Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallObject {
    pub mu: Ramp,
    pub sigma: Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBridge {
    pub small_below_m: f64,
    pub large_above_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaLaw {
    pub coefficient: f64,
    pub exponent: f64,
    pub small_length_m: f64,
    pub small_coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EjectionLaw {
    pub slope: f64,
    pub intercept: f64,
    pub sigma: f64,
}

/// Per-parent-class distribution parameters of the fragment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakupConstants {
    pub size_bridge: SizeBridge,
    pub area: AreaLaw,
    pub ejection: EjectionLaw,
    pub small: SmallObject,
    pub spacecraft: Bimodal,
    pub rocket_body: Bimodal,
}

impl BreakupConstants {
    pub fn builtin() -> Self {
        toml::from_str(BUILTIN_CONSTANTS).expect("shipped breakup constants are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    /// Cross-sectional area in m² for characteristic length `l` in m.
    pub fn area(&self, l: f64) -> f64 {
        if l < self.area.small_length_m {
            self.area.small_coefficient * l * l
        } else {
            self.area.coefficient * l.powf(self.area.exponent)
        }
    }

    /// Draws χ = log10(A/m).
    pub fn sample_log_am<R: Rng + ?Sized>(&self, l: f64, rocket_body: bool, rng: &mut R) -> f64 {
        let lam = l.log10();
        let SizeBridge {
            small_below_m: lo,
            large_above_m: hi,
        } = self.size_bridge;
        let use_large = if l >= hi {
            true
        } else if l <= lo {
            false
        } else {
            rng.gen::<f64>() < (l - lo) / (hi - lo)
        };
        if use_large {
            let p = if rocket_body {
                &self.rocket_body
            } else {
                &self.spacecraft
            };
            let (mu, sigma) = if rng.gen::<f64>() < p.alpha.at(lam) {
                (p.mu1.at(lam), p.sigma1.at(lam))
            } else {
                (p.mu2.at(lam), p.sigma2.at(lam))
            };
            gauss(mu, sigma, rng)
        } else {
            gauss(self.small.mu.at(lam), self.small.sigma.at(lam), rng)
        }
    }

    /// Draws an ejection speed in km/s for a fragment with log10(A/m) = `chi`.
    pub fn sample_ejection_kms<R: Rng + ?Sized>(&self, chi: f64, rng: &mut R) -> f64 {
        let e = &self.ejection;
        10f64.powf(gauss(e.slope * chi + e.intercept, e.sigma, rng)) * 1e-3
    }
}

fn gauss<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    Normal::new(mu, sigma.max(0.0)).expect("finite sigma").sample(rng)
}

/// Energy-to-target-mass ratio in J/g; the target is the heavier object.
pub fn energy_to_mass_ratio(m_a: f64, m_b: f64, dv_kms: f64) -> f64 {
    let (small, large) = if m_a <= m_b { (m_a, m_b) } else { (m_b, m_a) };
    let v = dv_kms * 1e3;
    0.5 * small * v * v / large * 1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub catastrophic: bool,
    /// mass entering the fragment count law, kg
    pub mass_kg: f64,
    pub emr_j_per_g: f64,
}

/// Catastrophic at or above 40 J/g. The count mass is the sum of both
/// masses when catastrophic, else the smaller mass times dv² (dv in km/s).
pub fn classify_collision(a: &SpaceObject, b: &SpaceObject, dv_kms: f64) -> Classification {
    let emr = energy_to_mass_ratio(a.mass_kg, b.mass_kg, dv_kms);
    let catastrophic = emr >= CATASTROPHIC_EMR_J_PER_G;
    let mass_kg = if catastrophic {
        a.mass_kg + b.mass_kg
    } else {
        a.mass_kg.min(b.mass_kg) * dv_kms * dv_kms
    };
    Classification {
        catastrophic,
        mass_kg,
        emr_j_per_g: emr,
    }
}

/// Number of fragments at least `lc_m` in size.
pub fn fragment_count(mass_kg: f64, lc_m: f64) -> u64 {
    if !(mass_kg > 0.0) || !(lc_m > 0.0) {
        return 0;
    }
    (0.1 * mass_kg.powf(0.75) * lc_m.powf(-SIZE_EXPONENT)).floor() as u64
}

/// Inverse CDF of the count law truncated to `[lc, l_max]`.
pub fn sample_length<R: Rng + ?Sized>(lc: f64, l_max: f64, rng: &mut R) -> f64 {
    if l_max <= lc {
        return lc;
    }
    let u: f64 = rng.gen();
    let tail = (lc / l_max).powf(SIZE_EXPONENT);
    (lc * (1.0 - u * (1.0 - tail)).powf(-1.0 / SIZE_EXPONENT)).min(l_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub parents: (SpaceObject, SpaceObject),
    pub dv_kms: f64,
    pub site: OrbitSite,
    pub catastrophic: bool,
    pub mass_kg: f64,
}

impl CollisionEvent {
    pub fn new(a: SpaceObject, b: SpaceObject, dv_kms: f64, site: OrbitSite) -> Self {
        let c = classify_collision(&a, &b, dv_kms);
        CollisionEvent {
            parents: (a, b),
            dv_kms,
            site,
            catastrophic: c.catastrophic,
            mass_kg: c.mass_kg,
        }
    }

    /// (smaller, larger) by mass; ties keep the given order.
    pub fn by_mass(&self) -> (&SpaceObject, &SpaceObject) {
        let (a, b) = (&self.parents.0, &self.parents.1);
        if b.mass_kg < a.mass_kg {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Mass destroyed by the event, kg.
    pub fn destroyed_mass(&self) -> f64 {
        if self.catastrophic {
            self.parents.0.mass_kg + self.parents.1.mass_kg
        } else {
            self.by_mass().0.mass_kg
        }
    }
}

/// Fragments of one event. Unbound fragments left Earth orbit at birth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FragmentBatch {
    pub fragments: Vec<SpaceObject>,
    pub unbound: Vec<SpaceObject>,
}

impl FragmentBatch {
    pub fn len(&self) -> usize {
        self.fragments.len() + self.unbound.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_mass(&self) -> f64 {
        self.fragments.iter().chain(&self.unbound).map(|f| f.mass_kg).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakupModel {
    pub constants: BreakupConstants,
    pub lc_m: f64,
    pub mu: f64,
    pub r_earth_km: f64,
}

impl BreakupModel {
    pub fn new(constants: BreakupConstants, lc_m: f64, mu: f64, r_earth_km: f64) -> Self {
        BreakupModel {
            constants,
            lc_m,
            mu,
            r_earth_km,
        }
    }

    pub fn fragment_count(&self, event: &CollisionEvent) -> u64 {
        if !(event.dv_kms > 0.0) {
            return 0;
        }
        fragment_count(event.mass_kg, self.lc_m)
    }

    /// Draws the fragments of an event with sizes, area-to-mass ratios,
    /// ejection velocities and post-breakup orbits, conserving mass.
    pub fn synthesize<R: Rng + ?Sized>(&self, event: &CollisionEvent, rng: &mut R) -> FragmentBatch {
        let n = self.fragment_count(event) as usize;
        let mut batch = FragmentBatch::default();
        if n == 0 {
            return batch;
        }
        let (small, large) = event.by_mass();
        let sources: Vec<&SpaceObject> = if event.catastrophic {
            vec![small, large]
        } else {
            vec![small]
        };
        let l_max = sources.iter().map(|o| o.diameter_m()).fold(0.0, f64::max);
        let rocket_body = large.species == Species::UpperStage;
        let r_c = self.r_earth_km + event.site.mid_altitude();

        let mut drawn = Vec::with_capacity(n);
        for _ in 0..n {
            let l = sample_length(self.lc_m, l_max, rng);
            let chi = self.constants.sample_log_am(l, rocket_body, rng);
            let area = self.constants.area(l);
            let mass = area / 10f64.powf(chi);
            let dv = self.constants.sample_ejection_kms(chi, rng);
            drawn.push((l, area, mass, dv));
        }

        let budget = event.destroyed_mass();
        let sum: f64 = drawn.iter().map(|d| d.2).sum();
        if sum > budget {
            let scale = budget / sum;
            for d in &mut drawn {
                d.2 *= scale;
            }
        } else if event.catastrophic && sum < budget {
            let k = rng.gen_range(2..=8usize).min(n);
            let share = (budget - sum) / k as f64;
            for idx in sample_indices(rng, n, k) {
                drawn[idx].2 += share;
            }
        }

        let total_source: f64 = sources.iter().map(|o| o.mass_kg).sum();
        for (l, area, mass, dv) in drawn {
            let parent = if sources.len() == 1 || rng.gen::<f64>() * total_source < sources[0].mass_kg {
                sources[0]
            } else {
                sources[1]
            };
            let mut frag = SpaceObject {
                id: 0,
                species: Species::Fragment,
                a_km: parent.a_km,
                e: parent.e,
                i_deg: parent.i_deg,
                mass_kg: mass,
                radius_m: 0.5 * l,
                area_m2: area,
                cd: FRAGMENT_CD,
                mission_elapsed: 0.0,
            };
            match self.eject(parent, r_c, dv, rng) {
                Some((a, e, i)) => {
                    frag.a_km = a;
                    frag.e = e;
                    frag.i_deg = i;
                    batch.fragments.push(frag);
                }
                None => batch.unbound.push(frag),
            }
        }
        batch
    }

    /// New (a, e, i) after adding an isotropic kick of `dv_kms` to the parent
    /// at radius `r_c`; `None` if unbound.
    fn eject<R: Rng + ?Sized>(
        &self,
        parent: &SpaceObject,
        r_c: f64,
        dv_kms: f64,
        rng: &mut R,
    ) -> Option<(f64, f64, f64)> {
        let (a, e) = (parent.a_km, parent.e);
        let r = r_c.clamp(a * (1.0 - e), a * (1.0 + e));
        let mut nu = true_anomaly_at_radius(a, e, r);
        if rng.gen::<bool>() {
            nu = -nu;
        }
        let argp = rng.gen::<f64>() * std::f64::consts::TAU;
        let (pos, vel) = state_at(a, e, parent.i_deg.to_radians(), 0.0, argp, nu, self.mu);
        let dir: [f64; 3] = UnitSphere.sample(rng);
        let v = vel + Vector3::from(dir) * dv_kms;
        elements_from_state(&pos, &v, self.mu).map(|el| (el.a_km, el.e, el.i_deg))
    }
}

/// Where the fragments of one batch settle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FragmentRouting {
    /// (site id, fragment) for each in-domain fragment
    pub placed: Vec<(usize, SpaceObject)>,
    /// ζ per site
    pub per_site: Vec<u64>,
    pub reentered: u64,
    pub escaped: u64,
}

/// Routes each fragment to the F node of its sampled residence shell.
pub fn assign_fragment_flows<R: Rng + ?Sized>(batch: FragmentBatch, grid: &SiteGrid, rng: &mut R) -> FragmentRouting {
    let edges = grid.shell_edge_radii();
    let mut out = FragmentRouting {
        per_site: vec![0; grid.len()],
        escaped: batch.unbound.len() as u64,
        ..Default::default()
    };
    for frag in batch.fragments {
        if frag.a_km * (1.0 - frag.e) <= grid.r_earth_km {
            out.reentered += 1;
            continue;
        }
        match residence_weights(frag.a_km, frag.e, &edges).sample(rng) {
            ShellDraw::Shell(k) => {
                let site = grid.site_id(k, grid.inc_bin(frag.i_deg));
                out.per_site[site] += 1;
                out.placed.push((site, frag));
            }
            ShellDraw::Below => out.reentered += 1,
            ShellDraw::Above => out.escaped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MU_EARTH_KM3_S2 as MU, R_EARTH_KM};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obj(species: Species, mass: f64, radius: f64, alt: f64) -> SpaceObject {
        SpaceObject {
            id: 1,
            species,
            a_km: R_EARTH_KM + alt,
            e: 0.0,
            i_deg: 98.0,
            mass_kg: mass,
            radius_m: radius,
            area_m2: 1.0,
            cd: 2.2,
            mission_elapsed: 0.0,
        }
    }

    fn grid() -> SiteGrid {
        SiteGrid::new(200.0, 2200.0, 50.0, 60.0, R_EARTH_KM).unwrap()
    }

    fn model() -> BreakupModel {
        BreakupModel::new(BreakupConstants::builtin(), 0.1, MU, R_EARTH_KM)
    }

    #[test]
    fn classification_examples() {
        let t = obj(Species::Payload, 1000.0, 1.0, 800.0);
        let c = classify_collision(&t, &obj(Species::Fragment, 10.0, 0.1, 800.0), 10.0);
        assert!((c.emr_j_per_g - 500.0).abs() < 1e-9);
        assert!(c.catastrophic);
        assert_eq!(c.mass_kg, 1010.0);
        let c = classify_collision(&t, &obj(Species::Fragment, 0.01, 0.1, 800.0), 1.0);
        assert!((c.emr_j_per_g - 0.005).abs() < 1e-12);
        assert!(!c.catastrophic);
        assert!((c.mass_kg - 0.01).abs() < 1e-15);
        // equal masses: ½ dv² = 40 kJ/kg at dv = sqrt(80) m/s · 10
        let dv = (80_000.0f64).sqrt() * 1e-3;
        let c = classify_collision(&t, &t, dv);
        assert!((c.emr_j_per_g - 40.0).abs() < 1e-9);
        let c = classify_collision(&t, &t, dv * (1.0 + 1e-12));
        assert!(c.catastrophic);
    }

    #[test]
    fn count_law() {
        assert_eq!(fragment_count(1000.0, 0.1), 912);
        assert_eq!(fragment_count(1000.0, 1.0), 17);
        assert_eq!(fragment_count(1000.0, 1e6), 0);
        assert!(fragment_count(2000.0, 0.1) > fragment_count(1000.0, 0.1));
        assert!(fragment_count(2000.0, 0.2) < fragment_count(2000.0, 0.1));
    }

    #[test]
    fn ramps_clamp() {
        let r = Ramp {
            x0: -1.0,
            y0: 0.0,
            x1: 1.0,
            y1: 2.0,
        };
        assert_eq!(r.at(-5.0), 0.0);
        assert_eq!(r.at(0.0), 1.0);
        assert_eq!(r.at(5.0), 2.0);
    }

    #[test]
    fn lengths_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let l = sample_length(0.1, 3.0, &mut rng);
            assert!((0.1..=3.0).contains(&l));
        }
        assert_eq!(sample_length(0.1, 0.05, &mut rng), 0.1);
    }

    #[test]
    fn catastrophic_batch_conserves_mass() {
        let a = obj(Species::Payload, 1000.0, 1.0, 775.0);
        let b = obj(Species::UpperStage, 1000.0, 1.5, 775.0);
        let ev = CollisionEvent::new(a, b, 10.0, *grid().site(22));
        assert!(ev.catastrophic);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = model().synthesize(&ev, &mut rng);
        assert_eq!(batch.len() as u64, fragment_count(2000.0, 0.1));
        assert!((batch.total_mass() / 2000.0 - 1.0).abs() < 1e-9);
        for f in batch.fragments.iter().chain(&batch.unbound) {
            assert!(f.diameter_m() >= 0.1 - 1e-12);
            assert_eq!(f.species, Species::Fragment);
        }
    }

    #[test]
    fn non_catastrophic_batch_stays_within_small_parent() {
        let a = obj(Species::Payload, 5000.0, 2.0, 775.0);
        let b = obj(Species::Fragment, 1.0, 0.2, 775.0);
        let ev = CollisionEvent::new(a, b, 10.0, *grid().site(22));
        assert!(!ev.catastrophic);
        let batch = model().synthesize(&ev, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(batch.len() as u64, fragment_count(100.0, 0.1));
        assert!(batch.total_mass() <= 1.0 * (1.0 + 1e-12));
    }

    #[test]
    fn synthesis_is_seed_reproducible() {
        let a = obj(Species::Payload, 800.0, 1.0, 775.0);
        let b = obj(Species::NonManoeuvrable, 300.0, 0.5, 775.0);
        let ev = CollisionEvent::new(a, b, 11.0, *grid().site(22));
        let m = model();
        let x = m.synthesize(&ev, &mut ChaCha8Rng::seed_from_u64(3));
        let y = m.synthesize(&ev, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(x, y);
    }

    #[test]
    fn routing_partitions_and_spreads() {
        let a = obj(Species::Payload, 1000.0, 1.0, 775.0);
        let b = obj(Species::NonManoeuvrable, 1000.0, 1.0, 775.0);
        let g = grid();
        let ev = CollisionEvent::new(a, b, 10.0, *g.site(22));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = model().synthesize(&ev, &mut rng);
        let n = batch.len() as u64;
        let r = assign_fragment_flows(batch, &g, &mut rng);
        assert_eq!(r.per_site.iter().sum::<u64>() + r.reentered + r.escaped, n);
        assert_eq!(r.placed.len() as u64, r.per_site.iter().sum::<u64>());
        let shells: Vec<usize> = r.placed.iter().map(|p| g.site(p.0).shell).collect();
        assert!(shells.iter().any(|&s| s < 11) && shells.iter().any(|&s| s > 11));
    }

    #[test]
    fn zero_count_event_is_empty() {
        let m = BreakupModel::new(BreakupConstants::builtin(), 1e3, MU, R_EARTH_KM);
        let a = obj(Species::Payload, 1000.0, 1.0, 775.0);
        let ev = CollisionEvent::new(a.clone(), a, 10.0, *grid().site(22));
        assert!(m.synthesize(&ev, &mut ChaCha8Rng::seed_from_u64(1)).is_empty());
    }
}
