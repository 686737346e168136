//! Core data model: species, orbit sites, objects, nodes and the network state.
//!
//! Nodes are semi-Lagrangian: each one keeps its member objects individually,
//! because collision cross-sections, pair selection and breakup masses all
//! need per-object radius and mass.

mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{
    AdrConfig, AtmosphereConfig, BreakupConfig, CircularDrag, DensityMode, GridConfig, LaunchConfig, PhysicsConfig,
    PolicyConfig, SimConfig, SpeciesRates, TimeConfig,
};

pub const R_EARTH_KM: f64 = 6378.137;
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "P")]
    Payload,
    #[serde(rename = "U")]
    UpperStage,
    #[serde(rename = "N")]
    NonManoeuvrable,
    #[serde(rename = "F")]
    Fragment,
}

impl Species {
    pub const ALL: [Species; 4] = [
        Species::Payload,
        Species::UpperStage,
        Species::NonManoeuvrable,
        Species::Fragment,
    ];

    pub const fn index(self) -> usize {
        match self {
            Species::Payload => 0,
            Species::UpperStage => 1,
            Species::NonManoeuvrable => 2,
            Species::Fragment => 3,
        }
    }

    pub const fn code(self) -> char {
        match self {
            Species::Payload => 'P',
            Species::UpperStage => 'U',
            Species::NonManoeuvrable => 'N',
            Species::Fragment => 'F',
        }
    }

    pub fn from_code(code: &str) -> Option<Species> {
        match code.trim() {
            "P" | "p" => Some(Species::Payload),
            "U" | "u" => Some(Species::UpperStage),
            "N" | "n" => Some(Species::NonManoeuvrable),
            "F" | "f" => Some(Species::Fragment),
            _ => None,
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One altitude shell by inclination bin cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSite {
    pub id: usize,
    pub shell: usize,
    pub inc_bin: usize,
    /// km above the Earth's surface
    pub alt_lo: f64,
    pub alt_hi: f64,
    /// degrees
    pub inc_lo: f64,
    pub inc_hi: f64,
}

impl OrbitSite {
    pub fn mid_altitude(&self) -> f64 {
        0.5 * (self.alt_lo + self.alt_hi)
    }

    pub fn mid_inclination(&self) -> f64 {
        0.5 * (self.inc_lo + self.inc_hi)
    }

    /// Effective upper inclination entering the volume factor, in radians.
    pub fn effective_inclination(&self) -> f64 {
        let (lo, hi) = (self.inc_lo.to_radians(), self.inc_hi.to_radians());
        let half_pi = std::f64::consts::FRAC_PI_2;
        if lo <= half_pi && half_pi <= hi {
            half_pi
        } else if lo > half_pi {
            std::f64::consts::PI - lo
        } else {
            hi
        }
    }
}

/// Volume of a node's site in km³.
pub fn node_volume(site: &OrbitSite, r_earth_km: f64) -> f64 {
    let r = r_earth_km + site.alt_lo;
    let dr = site.alt_hi - site.alt_lo;
    4.0 * std::f64::consts::PI * site.effective_inclination().sin() * ((r + dr).powi(3) - r.powi(3)) / 3.0
}

/// Result of binning a position into the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteLookup {
    Site(usize),
    /// below the domain floor
    Reentered,
    /// above the domain ceiling, or unbound
    Escaped,
}

impl SiteLookup {
    pub fn site(self) -> Option<usize> {
        match self {
            SiteLookup::Site(id) => Some(id),
            _ => None,
        }
    }
}

/// Regular altitude × inclination tiling of `[alt_min, alt_max] × [0°, 180°]`.
///
/// Bins are half-open `[lo, hi)` except the topmost shell and the last
/// inclination bin, which are closed so the domain edges have a home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteGrid {
    pub alt_min: f64,
    pub alt_max: f64,
    pub shell_km: f64,
    pub inc_deg: f64,
    pub r_earth_km: f64,
    n_shells: usize,
    n_inc: usize,
    sites: Vec<OrbitSite>,
}

impl SiteGrid {
    pub fn new(alt_min: f64, alt_max: f64, shell_km: f64, inc_deg: f64, r_earth_km: f64) -> Result<Self> {
        if !(alt_min >= 0.0 && alt_min < alt_max) {
            return Err(Error::Grid(format!(
                "need 0 <= alt_min < alt_max, got [{alt_min}, {alt_max}]"
            )));
        }
        if !(shell_km > 0.0) || !(inc_deg > 0.0 && inc_deg <= 180.0) {
            return Err(Error::Grid(format!(
                "bad bin sizes: shell {shell_km} km, inclination {inc_deg} deg"
            )));
        }
        let n_shells = (((alt_max - alt_min) / shell_km) - 1e-9).ceil().max(1.0) as usize;
        let n_inc = ((180.0 / inc_deg) - 1e-9).ceil().max(1.0) as usize;
        let mut sites = Vec::with_capacity(n_shells * n_inc);
        for shell in 0..n_shells {
            let alt_lo = alt_min + shell as f64 * shell_km;
            let alt_hi = if shell + 1 == n_shells {
                alt_max
            } else {
                alt_lo + shell_km
            };
            for inc_bin in 0..n_inc {
                let inc_lo = inc_bin as f64 * inc_deg;
                let inc_hi = if inc_bin + 1 == n_inc { 180.0 } else { inc_lo + inc_deg };
                sites.push(OrbitSite {
                    id: shell * n_inc + inc_bin,
                    shell,
                    inc_bin,
                    alt_lo,
                    alt_hi,
                    inc_lo,
                    inc_hi,
                });
            }
        }
        Ok(SiteGrid {
            alt_min,
            alt_max,
            shell_km,
            inc_deg,
            r_earth_km,
            n_shells,
            n_inc,
            sites,
        })
    }

    /// A grid with a single site spanning the whole domain.
    pub fn single(alt_min: f64, alt_max: f64, r_earth_km: f64) -> Result<Self> {
        Self::new(alt_min, alt_max, alt_max - alt_min, 180.0, r_earth_km)
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Self::new(
            cfg.grid.alt_min_km,
            cfg.grid.alt_max_km,
            cfg.grid.shell_km,
            cfg.grid.inc_deg,
            cfg.physics.r_earth_km,
        )
    }

    pub fn sites(&self) -> &[OrbitSite] {
        &self.sites
    }

    pub fn site(&self, id: usize) -> &OrbitSite {
        &self.sites[id]
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn n_shells(&self) -> usize {
        self.n_shells
    }

    pub fn n_inc_bins(&self) -> usize {
        self.n_inc
    }

    pub fn site_id(&self, shell: usize, inc_bin: usize) -> usize {
        shell * self.n_inc + inc_bin
    }

    pub fn shell_index(&self, alt_km: f64) -> Option<usize> {
        if !(alt_km >= self.alt_min) || alt_km > self.alt_max {
            return None;
        }
        let idx = ((alt_km - self.alt_min) / self.shell_km).floor() as usize;
        Some(idx.min(self.n_shells - 1))
    }

    pub fn inc_bin(&self, inc_deg: f64) -> usize {
        let idx = (inc_deg.clamp(0.0, 180.0) / self.inc_deg).floor() as usize;
        idx.min(self.n_inc - 1)
    }

    /// Bin by altitude above the surface and inclination.
    pub fn locate_altitude(&self, alt_km: f64, inc_deg: f64) -> SiteLookup {
        if alt_km < self.alt_min || alt_km.is_nan() {
            return SiteLookup::Reentered;
        }
        match self.shell_index(alt_km) {
            Some(shell) => SiteLookup::Site(self.site_id(shell, self.inc_bin(inc_deg))),
            None => SiteLookup::Escaped,
        }
    }

    /// Bin by semi-major axis (km from the Earth's centre) and inclination.
    pub fn site_of(&self, a_km: f64, inc_deg: f64) -> SiteLookup {
        self.locate_altitude(a_km - self.r_earth_km, inc_deg)
    }

    /// Shell boundary radii from the Earth's centre, `n_shells + 1` entries.
    pub fn shell_edge_radii(&self) -> Vec<f64> {
        let mut edges: Vec<f64> = (0..self.n_shells)
            .map(|s| self.r_earth_km + self.sites[s * self.n_inc].alt_lo)
            .collect();
        edges.push(self.r_earth_km + self.alt_max);
        edges
    }

    pub fn shell_mid_radius(&self, shell: usize) -> f64 {
        self.r_earth_km + self.sites[shell * self.n_inc].mid_altitude()
    }

    pub fn volume(&self, site: usize) -> f64 {
        node_volume(&self.sites[site], self.r_earth_km)
    }
}

/// A single resident object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceObject {
    pub id: u64,
    pub species: Species,
    /// semi-major axis, km
    pub a_km: f64,
    pub e: f64,
    /// inclination, degrees
    pub i_deg: f64,
    pub mass_kg: f64,
    pub radius_m: f64,
    /// drag cross-section, m²
    pub area_m2: f64,
    pub cd: f64,
    /// years since launch; only meaningful for payloads
    pub mission_elapsed: f64,
}

impl SpaceObject {
    pub fn diameter_m(&self) -> f64 {
        2.0 * self.radius_m
    }

    pub fn area_to_mass(&self) -> f64 {
        self.area_m2 / self.mass_kg
    }

    pub fn perigee_km(&self) -> f64 {
        self.a_km * (1.0 - self.e)
    }

    pub fn apogee_km(&self) -> f64 {
        self.a_km * (1.0 + self.e)
    }

    pub fn validate(&self, r_earth_km: f64) -> std::result::Result<(), String> {
        if !(self.a_km > r_earth_km) {
            return Err(format!(
                "semi-major axis {} km is not above the Earth radius",
                self.a_km
            ));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(format!("eccentricity {} outside [0, 1)", self.e));
        }
        if !(0.0..=180.0).contains(&self.i_deg) {
            return Err(format!("inclination {} outside [0, 180]", self.i_deg));
        }
        if !(self.mass_kg > 0.0) {
            return Err(format!("mass {} must be positive", self.mass_kg));
        }
        if !(self.radius_m > 0.0) {
            return Err(format!("radius {} must be positive", self.radius_m));
        }
        if !(self.area_m2 > 0.0) {
            return Err(format!("area {} must be positive", self.area_m2));
        }
        if !(self.cd.is_finite() && self.cd >= 0.0) {
            return Err(format!("drag coefficient {} must be finite and non-negative", self.cd));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub species: Species,
    pub site: usize,
    pub objects: Vec<SpaceObject>,
}

impl Node {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Stable index of a node in [`NetworkState::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn new(species: Species, site: usize) -> Self {
        NodeId(site * 4 + species.index())
    }

    pub fn site(self) -> usize {
        self.0 / 4
    }

    pub fn species(self) -> Species {
        Species::ALL[self.0 % 4]
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.species(), self.site())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionCounters {
    pub catastrophic: u64,
    pub non_catastrophic: u64,
    pub small: u64,
}

impl CollisionCounters {
    pub fn total(&self) -> u64 {
        self.catastrophic + self.non_catastrophic + self.small
    }
}

/// Species-per-site object collections plus the simulation clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// years since simulation start
    pub epoch: f64,
    pub grid: SiteGrid,
    pub nodes: Vec<Node>,
    pub counters: CollisionCounters,
    pub next_id: u64,
    /// fractional active-removal budget carried between steps, per species
    pub adr_credit: [f64; 4],
}

impl NetworkState {
    pub fn empty(grid: SiteGrid) -> Self {
        let nodes = (0..grid.len())
            .flat_map(|site| {
                Species::ALL.into_iter().map(move |species| Node {
                    species,
                    site,
                    objects: Vec::new(),
                })
            })
            .collect();
        NetworkState {
            epoch: 0.0,
            grid,
            nodes,
            counters: CollisionCounters::default(),
            next_id: 0,
            adr_credit: [0.0; 4],
        }
    }

    /// Builds a state by binning each object by its mean altitude.
    /// Returns the state and the number of objects left outside the domain.
    pub fn from_objects(grid: SiteGrid, objects: impl IntoIterator<Item = SpaceObject>) -> (Self, usize) {
        let mut state = Self::empty(grid);
        let mut outside = 0;
        for obj in objects {
            state.next_id = state.next_id.max(obj.id + 1);
            match state.grid.site_of(obj.a_km, obj.i_deg) {
                SiteLookup::Site(site) => state.node_mut(obj.species, site).objects.push(obj),
                _ => outside += 1,
            }
        }
        (state, outside)
    }

    pub fn node(&self, species: Species, site: usize) -> &Node {
        &self.nodes[NodeId::new(species, site).0]
    }

    pub fn node_mut(&mut self, species: Species, site: usize) -> &mut Node {
        &mut self.nodes[NodeId::new(species, site).0]
    }

    pub fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn total(&self) -> usize {
        self.nodes.iter().map(Node::len).sum()
    }

    pub fn count(&self, species: Species) -> usize {
        self.nodes.iter().filter(|n| n.species == species).map(Node::len).sum()
    }

    pub fn counts_by_species(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for node in &self.nodes {
            out[node.species.index()] += node.len();
        }
        out
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.nodes.iter().map(Node::len).collect()
    }

    pub fn objects(&self) -> impl Iterator<Item = &SpaceObject> {
        self.nodes.iter().flat_map(|n| n.objects.iter())
    }

    /// Checks that every object sits in the node matching its species.
    pub fn check_consistency(&self) -> Result<()> {
        if self.nodes.len() != 4 * self.grid.len() {
            return Err(Error::Domain(format!(
                "{} nodes for {} sites",
                self.nodes.len(),
                self.grid.len()
            )));
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            let id = NodeId(idx);
            if node.species != id.species() || node.site != id.site() {
                return Err(Error::Domain(format!("node {idx} is mislabelled")));
            }
            if let Some(obj) = node.objects.iter().find(|o| o.species != node.species) {
                return Err(Error::Domain(format!(
                    "object {} of species {} stored in node {}",
                    obj.id, obj.species, id
                )));
            }
        }
        Ok(())
    }
}
