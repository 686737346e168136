//! Launch traffic forecasts and injection of new objects.

mod gmm;

pub use gmm::{fit_gmm, Component, FitOptions, FitReport, Gmm};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::collision::sample_jump;
use crate::collision::JumpModifier;
use crate::domain::{NetworkState, NodeId, SiteLookup, SpaceObject, Species, DAYS_PER_YEAR};
use crate::error::{Error, Result};

const MAX_RESAMPLES: usize = 100;
const LAUNCH_CD: f64 = 2.2;

/// One logistic growth term; `t_i` is a calendar year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub n0: f64,
    #[serde(default)]
    pub terms: Vec<TrafficTerm>,
}

impl TrafficParams {
    pub fn constant(n0: f64) -> Self {
        TrafficParams { n0, terms: Vec::new() }
    }

    /// Named forecasts. Shapes follow the three published scenarios; the
    /// numbers are chosen by eye, not recovered values.
    pub fn preset(name: &str) -> Option<Self> {
        let term = |a, c, d, t_i| TrafficTerm { a, b: 1.0, c, d, t_i };
        let terms = match name.to_ascii_lowercase().as_str() {
            "lm1" | "lm-1" => vec![term(2500.0, 0.5, 0.03, 2023.0)],
            "lm2" | "lm-2" => vec![term(4000.0, 0.6, 0.0, 2026.0)],
            "lm3" | "lm-3" => vec![term(9000.0, 0.25, 0.0, 2035.0)],
            "none" => return Some(Self::constant(0.0)),
            _ => return None,
        };
        Some(TrafficParams { n0: 200.0, terms })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n0 >= 0.0) || self.terms.iter().any(|t| !(t.b > 0.0)) {
            return Err(Error::Config("traffic needs n0 >= 0 and every b > 0".into()));
        }
        Ok(())
    }
}

/// Objects per year at calendar year `t`.
pub fn traffic_curve(t: f64, params: &TrafficParams) -> f64 {
    params.n0
        + params
            .terms
            .iter()
            .map(|p| p.a * (p.d * (t - p.t_i)).exp() / (p.b + (-p.c * (t - p.t_i)).exp()))
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProportions {
    pub payload: f64,
    pub upper_stage: f64,
    pub mission_related: f64,
}

impl ClassProportions {
    fn species<R: Rng + ?Sized>(&self, rng: &mut R) -> Species {
        let total = self.payload + self.upper_stage + self.mission_related;
        let u = rng.gen::<f64>() * total;
        if u < self.payload {
            Species::Payload
        } else if u < self.payload + self.upper_stage {
            Species::UpperStage
        } else {
            Species::NonManoeuvrable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMixtures {
    pub payload: Gmm,
    pub upper_stage: Gmm,
    pub mission_related: Gmm,
}

impl ClassMixtures {
    pub fn get(&self, species: Species) -> &Gmm {
        match species {
            Species::Payload => &self.payload,
            Species::UpperStage => &self.upper_stage,
            _ => &self.mission_related,
        }
    }
}

/// Traffic curve plus per-class orbital (a km, i deg) and physical
/// (mass kg, area m², length m) mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchModel {
    pub traffic: TrafficParams,
    pub class_proportions: ClassProportions,
    pub orbital: ClassMixtures,
    pub physical: ClassMixtures,
}

fn diag(weight: f64, mean: &[f64], sd: &[f64]) -> Component {
    let d = mean.len();
    Component {
        weight,
        mean: mean.to_vec(),
        cov: (0..d)
            .map(|r| (0..d).map(|k| if r == k { sd[r] * sd[r] } else { 0.0 }).collect())
            .collect(),
    }
}

impl LaunchModel {
    /// Built-in mixtures resembling recent traffic, with the given curve.
    pub fn with_traffic(traffic: TrafficParams, r_earth_km: f64) -> Self {
        let orb = |alt: f64, i: f64, sa: f64, si: f64, w: f64| diag(w, &[r_earth_km + alt, i], &[sa, si]);
        LaunchModel {
            traffic,
            class_proportions: ClassProportions {
                payload: 0.85,
                upper_stage: 0.05,
                mission_related: 0.10,
            },
            orbital: ClassMixtures {
                payload: Gmm {
                    components: vec![
                        orb(550.0, 53.0, 15.0, 1.0, 0.55),
                        orb(530.0, 97.5, 20.0, 0.5, 0.15),
                        orb(1200.0, 87.9, 10.0, 0.3, 0.10),
                        orb(500.0, 43.0, 60.0, 5.0, 0.10),
                        orb(600.0, 97.8, 80.0, 0.8, 0.10),
                    ],
                },
                upper_stage: Gmm {
                    components: vec![orb(600.0, 98.0, 150.0, 1.5, 0.5), orb(400.0, 45.0, 120.0, 10.0, 0.5)],
                },
                mission_related: Gmm {
                    components: vec![orb(500.0, 53.0, 100.0, 10.0, 0.6), orb(600.0, 97.0, 100.0, 2.0, 0.4)],
                },
            },
            physical: ClassMixtures {
                payload: Gmm {
                    components: vec![
                        diag(0.7, &[300.0, 10.0, 3.0], &[30.0, 2.0, 0.5]),
                        diag(0.3, &[5.0, 0.05, 0.3], &[2.0, 0.02, 0.1]),
                    ],
                },
                upper_stage: Gmm {
                    components: vec![diag(1.0, &[1500.0, 8.0, 4.0], &[500.0, 3.0, 1.0])],
                },
                mission_related: Gmm {
                    components: vec![diag(1.0, &[5.0, 0.1, 0.3], &[3.0, 0.05, 0.1])],
                },
            },
        }
    }

    /// Loads a TOML model file, or resolves a preset name with built-in
    /// mixtures.
    pub fn resolve(preset: &str, file: Option<&Path>, r_earth_km: f64) -> Result<Self> {
        match file {
            Some(p) => Self::load(p),
            None => {
                let traffic = TrafficParams::preset(preset)
                    .ok_or_else(|| Error::Config(format!("unknown launch preset '{preset}'")))?;
                Ok(Self::with_traffic(traffic, r_earth_km))
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LaunchModel = toml::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("launch model is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        let p = &self.class_proportions;
        if [p.payload, p.upper_stage, p.mission_related]
            .iter()
            .any(|v| !(*v >= 0.0))
            || !(p.payload + p.upper_stage + p.mission_related > 0.0)
        {
            return Err(Error::Config(
                "class proportions must be >= 0 with a positive sum".into(),
            ));
        }
        for (mix, dim) in [(&self.orbital, 2), (&self.physical, 3)] {
            for g in [&mix.payload, &mix.upper_stage, &mix.mission_related] {
                g.validate()?;
                if g.dim() != dim {
                    return Err(Error::Fit(format!(
                        "mixture dimension {} where {dim} expected",
                        g.dim()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draws one new object of the given class; resamples out-of-domain or
    /// non-physical draws, then clamps.
    pub fn sample_object<R: Rng + ?Sized>(
        &self,
        species: Species,
        state: &NetworkState,
        rng: &mut R,
    ) -> (usize, SpaceObject) {
        let grid = &state.grid;
        let orbital = self.orbital.get(species);
        let mut placed = None;
        for _ in 0..MAX_RESAMPLES {
            let x = orbital.sample(rng);
            if let SiteLookup::Site(site) = grid.site_of(x[0], x[1]) {
                placed = Some((site, x[0], x[1]));
                break;
            }
        }
        let (site, a_km, i_deg) = placed.unwrap_or_else(|| {
            let x = orbital.sample(rng);
            let a = x[0].clamp(grid.r_earth_km + grid.alt_min, grid.r_earth_km + grid.alt_max);
            let i = x[1].clamp(0.0, 180.0);
            let site = grid.site_of(a, i).site().expect("clamped into the domain");
            (site, a, i)
        });
        let physical = self.physical.get(species);
        let mut phys = None;
        for _ in 0..MAX_RESAMPLES {
            let p = physical.sample(rng);
            if p.iter().all(|v| *v > 0.0) {
                phys = Some(p);
                break;
            }
        }
        let p = phys.unwrap_or_else(|| physical.sample(rng).iter().map(|v| v.abs().max(1e-3)).collect());
        let obj = SpaceObject {
            id: 0,
            species,
            a_km,
            e: 0.0,
            i_deg,
            mass_kg: p[0],
            radius_m: 0.5 * p[2],
            area_m2: p[1],
            cd: LAUNCH_CD,
            mission_elapsed: 0.0,
        };
        (site, obj)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaunchReport {
    /// objects added per node
    pub added: Vec<u64>,
    pub total: u64,
}

/// Draws `Poisson(Λ(year) · dt)` launches and inserts them into their nodes.
pub fn inject_launches<R: Rng + ?Sized>(
    state: &mut NetworkState,
    year: f64,
    dt_days: f64,
    model: &LaunchModel,
    rng: &mut R,
) -> Result<LaunchReport> {
    let per_day = traffic_curve(year, &model.traffic) / DAYS_PER_YEAR;
    let n = sample_jump(per_day.max(0.0), dt_days, JumpModifier::Plain, rng)?;
    let mut report = LaunchReport {
        added: vec![0; state.nodes.len()],
        total: n,
    };
    for _ in 0..n {
        let species = model.class_proportions.species(rng);
        let (site, mut obj) = model.sample_object(species, state, rng);
        obj.id = state.allocate_id();
        let node = NodeId::new(species, site);
        report.added[node.0] += 1;
        state.nodes[node.0].objects.push(obj);
    }
    Ok(report)
}

/// One row of a historical launch record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchRecord {
    pub epoch: f64,
    pub class: String,
    pub a_km: f64,
    pub i_deg: f64,
    pub mass_kg: f64,
    pub area_m2: f64,
    pub length_m: f64,
}

pub fn load_launch_records(path: &Path) -> Result<Vec<LaunchRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (k, rec) in rdr.deserialize::<LaunchRecord>().enumerate() {
        out.push(rec.map_err(|e| Error::Parse {
            path: path.into(),
            line: k + 2,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Fits class proportions and per-class mixtures from historical records.
/// Classes other than P and U count as mission-related. A class with fewer
/// records than `k` keeps the built-in mixtures.
pub fn fit_launch_model<R: Rng + ?Sized>(
    records: &[LaunchRecord],
    k: usize,
    traffic: TrafficParams,
    r_earth_km: f64,
    opts: FitOptions,
    rng: &mut R,
) -> Result<LaunchModel> {
    let mut model = LaunchModel::with_traffic(traffic, r_earth_km);
    let class_of = |c: &str| match c {
        "P" => Species::Payload,
        "U" => Species::UpperStage,
        _ => Species::NonManoeuvrable,
    };
    let mut counts = [0usize; 3];
    for sp in [Species::Payload, Species::UpperStage, Species::NonManoeuvrable] {
        let rows: Vec<&LaunchRecord> = records.iter().filter(|r| class_of(&r.class) == sp).collect();
        let slot = match sp {
            Species::Payload => 0,
            Species::UpperStage => 1,
            _ => 2,
        };
        counts[slot] = rows.len();
        if rows.len() < k.max(2) {
            continue;
        }
        let orb: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.a_km, r.i_deg]).collect();
        let phys: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.mass_kg, r.area_m2, r.length_m]).collect();
        let o = fit_gmm(&orb, k, opts, rng)?.gmm;
        let p = fit_gmm(&phys, k, opts, rng)?.gmm;
        match slot {
            0 => (model.orbital.payload, model.physical.payload) = (o, p),
            1 => (model.orbital.upper_stage, model.physical.upper_stage) = (o, p),
            _ => (model.orbital.mission_related, model.physical.mission_related) = (o, p),
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Fit("no launch records".into()));
    }
    model.class_proportions = ClassProportions {
        payload: counts[0] as f64 / total as f64,
        upper_stage: counts[1] as f64 / total as f64,
        mission_related: counts[2] as f64 / total as f64,
    };
    Ok(model)
}
