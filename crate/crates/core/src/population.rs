//! Deterministic synthetic stand-in for the March 2023 LEO catalog.
//!
//! Class totals match the published composition; the orbital structure is a
//! hand-built mixture of the well-known constellations, sun-synchronous band
//! and historical breakup clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};

use crate::breakup::BreakupConstants;
use crate::domain::{SpaceObject, Species, R_EARTH_KM};
use crate::error::Result;
use crate::io::{read_population, Population};
use std::path::Path;

pub const BASELINE_COUNTS: [usize; 4] = [5471, 1111, 2440, 9804];
pub const BASELINE_SEED: u64 = 20230301;

/// `synthetic_catalog(BASELINE_SEED, 5.0)` in catalog CSV form.
pub const BASELINE_CATALOG_CSV: &str = include_str!("../data/catalog_2023.csv");

/// Parses the shipped baseline snapshot.
pub fn baseline_catalog() -> Result<Population> {
    read_population(
        BASELINE_CATALOG_CSV.as_bytes(),
        Path::new("catalog_2023.csv"),
        R_EARTH_KM,
    )
}

#[derive(Debug, Clone, Copy)]
struct Cluster {
    count: usize,
    alt_km: (f64, f64),
    inc_deg: (f64, f64),
    /// eccentricity is exponential with mean e_max / 4, truncated at e_max
    e_max: f64,
    mass_kg: (f64, f64),
    radius_m: f64,
}

/// (mean, sd) pairs; a negative sd means uniform on [mean - |sd|, mean + |sd|].
const fn c(count: usize, alt: (f64, f64), inc: (f64, f64), e_max: f64, mass: (f64, f64), radius_m: f64) -> Cluster {
    Cluster {
        count,
        alt_km: alt,
        inc_deg: inc,
        e_max,
        mass_kg: mass,
        radius_m,
    }
}

const PAYLOADS: [Cluster; 6] = [
    c(3300, (550.0, 5.0), (53.0, 0.1), 0.0005, (260.0, 0.0), 1.5),
    c(500, (560.0, 12.0), (70.0, -27.6), 0.0005, (260.0, 0.0), 1.5),
    c(580, (1200.0, 3.0), (87.9, 0.05), 0.0005, (150.0, 0.0), 1.0),
    c(600, (560.0, 60.0), (97.6, 0.3), 0.002, (150.0, 1.0), 0.8),
    c(75, (780.0, 2.0), (86.4, 0.05), 0.0005, (860.0, 0.0), 2.0),
    c(416, (700.0, -300.0), (60.0, -40.0), 0.01, (400.0, 1.0), 1.2),
];

const UPPER_STAGES: [Cluster; 4] = [
    c(400, (870.0, -130.0), (78.5, -4.5), 0.01, (1400.0, 0.0), 1.2),
    c(20, (840.0, 5.0), (71.0, 0.1), 0.003, (8900.0, 0.0), 2.0),
    c(300, (700.0, -200.0), (98.0, 0.5), 0.02, (2000.0, 0.5), 1.7),
    c(391, (900.0, -600.0), (60.0, -40.0), 0.05, (1500.0, 0.6), 1.5),
];

const DERELICTS: [Cluster; 3] = [
    c(1500, (850.0, -150.0), (90.5, -8.5), 0.01, (900.0, 0.8), 1.3),
    c(500, (900.0, -100.0), (70.0, -5.0), 0.01, (800.0, 0.6), 1.3),
    c(440, (900.0, -600.0), (60.0, -40.0), 0.03, (500.0, 1.0), 1.0),
];

const FRAGMENTS: [Cluster; 6] = [
    c(2800, (860.0, 60.0), (98.6, 0.3), 0.04, (0.0, 0.0), 0.0),
    c(1000, (790.0, 40.0), (74.0, 0.2), 0.02, (0.0, 0.0), 0.0),
    c(300, (780.0, 40.0), (86.4, 0.2), 0.02, (0.0, 0.0), 0.0),
    c(50, (480.0, 20.0), (82.6, 0.3), 0.01, (0.0, 0.0), 0.0),
    c(2500, (830.0, 70.0), (98.7, 0.5), 0.03, (0.0, 0.0), 0.0),
    c(3154, (900.0, -300.0), (85.0, -25.0), 0.05, (0.0, 0.0), 0.0),
];

fn draw<R: Rng + ?Sized>((mean, sd): (f64, f64), rng: &mut R) -> f64 {
    if sd < 0.0 {
        rng.gen_range(mean + sd..=mean - sd)
    } else if sd == 0.0 {
        mean
    } else {
        Normal::new(mean, sd).expect("positive sd").sample(rng)
    }
}

fn clusters(species: Species) -> &'static [Cluster] {
    match species {
        Species::Payload => &PAYLOADS,
        Species::UpperStage => &UPPER_STAGES,
        Species::NonManoeuvrable => &DERELICTS,
        Species::Fragment => &FRAGMENTS,
    }
}

/// Builds the baseline population. Every object has its perigee above
/// 200 km and its semi-major axis below 2200 km altitude.
pub fn synthetic_catalog(seed: u64, mission_lifetime_years: f64) -> Vec<SpaceObject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let constants = BreakupConstants::builtin();
    let mut out = Vec::with_capacity(BASELINE_COUNTS.iter().sum());
    for species in Species::ALL {
        for cl in clusters(species) {
            for _ in 0..cl.count {
                let id = out.len() as u64 + 1;
                out.push(sample_object(
                    id,
                    species,
                    cl,
                    &constants,
                    mission_lifetime_years,
                    &mut rng,
                ));
            }
        }
    }
    out
}

fn sample_object<R: Rng + ?Sized>(
    id: u64,
    species: Species,
    cl: &Cluster,
    constants: &BreakupConstants,
    lifetime: f64,
    rng: &mut R,
) -> SpaceObject {
    let (a_km, e) = loop {
        let h = draw(cl.alt_km, rng);
        let e = Exp::new(4.0 / cl.e_max).expect("positive rate").sample(rng);
        let a = R_EARTH_KM + h;
        if e <= cl.e_max && a * (1.0 - e) - R_EARTH_KM >= 200.0 && h <= 2150.0 {
            break (a, e);
        }
    };
    let i_deg = draw(cl.inc_deg, rng).clamp(0.0, 180.0);
    if species == Species::Fragment {
        let l = 0.1 * rng.gen::<f64>().powf(-1.0 / 1.71).min(100.0);
        let area = constants.area(l);
        let log_am = constants.sample_log_am(l, false, rng);
        return SpaceObject {
            id,
            species,
            a_km,
            e,
            i_deg,
            mass_kg: area / 10f64.powf(log_am),
            radius_m: l / 2.0,
            area_m2: area,
            cd: 2.2,
            mission_elapsed: 0.0,
        };
    }
    let mass_kg = if cl.mass_kg.1 > 0.0 {
        let ln = LogNormal::new(cl.mass_kg.0.ln(), cl.mass_kg.1).expect("valid lognormal");
        ln.sample(rng).clamp(1.0, 20_000.0)
    } else {
        cl.mass_kg.0
    };
    let radius_m = cl.radius_m * (mass_kg / cl.mass_kg.0).cbrt();
    let age = if species == Species::Payload {
        rng.gen_range(0.0..lifetime)
    } else {
        0.0
    };
    SpaceObject {
        id,
        species,
        a_km,
        e,
        i_deg,
        mass_kg,
        radius_m,
        area_m2: std::f64::consts::PI * radius_m * radius_m,
        cd: 2.2,
        mission_elapsed: age,
    }
}
