//! Weighted directed network view of a population snapshot: link rates,
//! event probabilities, thresholded subnetworks, weighted degrees and the
//! precomputed fragment-flow tensor.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::breakup::{assign_fragment_flows, BreakupModel, CollisionEvent};
use crate::collision::{pair_rate, relative_velocity, NodeSummary};
use crate::decay::{drag_step, orbit_averaged_density, residence_weights, DensityProfile};
use crate::domain::{NetworkState, NodeId, SimConfig, SiteGrid, SpaceObject, Species, SECONDS_PER_DAY};
use crate::error::{Error, Result};

/// Probability of at least one event of a Poisson stream in `dt_days`.
pub fn link_probability(chi_per_day: f64, dt_days: f64) -> f64 {
    -(-chi_per_day * dt_days).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    Collision,
    FragmentFlow,
    Decay,
    SmallCollision,
    Pmd,
}

impl LinkKind {
    pub const ALL: [LinkKind; 5] = [
        LinkKind::Collision,
        LinkKind::FragmentFlow,
        LinkKind::Decay,
        LinkKind::SmallCollision,
        LinkKind::Pmd,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LinkKind::Collision => "C",
            LinkKind::FragmentFlow => "F",
            LinkKind::Decay => "D",
            LinkKind::SmallCollision => "SC",
            LinkKind::Pmd => "PMD",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        LinkKind::ALL.into_iter().find(|k| k.code() == s)
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: LinkKind,
    pub chi_per_day: f64,
    pub p: f64,
}

/// Directed edges over the 4 × sites node set. Self-loops are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub n_nodes: usize,
    pub dt_days: f64,
    pub links: Vec<Link>,
}

impl LinkSet {
    pub fn new(n_nodes: usize, dt_days: f64) -> Self {
        LinkSet {
            n_nodes,
            dt_days,
            links: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Adds an edge unless it is a self-loop or has zero rate.
    pub fn push(&mut self, src: NodeId, dst: NodeId, kind: LinkKind, chi_per_day: f64) {
        if src == dst || !(chi_per_day > 0.0) {
            return;
        }
        self.links.push(Link {
            src,
            dst,
            kind,
            chi_per_day,
            p: link_probability(chi_per_day, self.dt_days),
        });
    }

    /// One edge per ordered node pair carrying the largest event probability
    /// among the parallel edges; its kind is that of the winning event.
    pub fn aggregate(&self) -> LinkSet {
        let mut best: BTreeMap<(usize, usize), Link> = BTreeMap::new();
        for l in &self.links {
            best.entry((l.src.0, l.dst.0))
                .and_modify(|b| {
                    if l.p > b.p {
                        *b = *l;
                    }
                })
                .or_insert(*l);
        }
        LinkSet {
            n_nodes: self.n_nodes,
            dt_days: self.dt_days,
            links: best.into_values().collect(),
        }
    }

    /// Edges with p̃ ≥ `rho`; at `rho = 0` every stored (nonzero) edge.
    pub fn subnetwork(&self, rho: f64) -> LinkSet {
        LinkSet {
            n_nodes: self.n_nodes,
            dt_days: self.dt_days,
            links: self.links.iter().filter(|l| l.p >= rho && l.p > 0.0).copied().collect(),
        }
    }

    pub fn count_kind(&self, kind: LinkKind) -> usize {
        self.links.iter().filter(|l| l.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W, header: Option<&str>) -> Result<()> {
        let mut w = writer;
        if let Some(h) = header {
            writeln!(w, "# {h}").map_err(|e| Error::io("<edges>", e))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(EDGE_COLUMNS)?;
        for l in &self.links {
            csv.write_record([
                l.src.species().code().to_string(),
                l.src.site().to_string(),
                l.dst.species().code().to_string(),
                l.dst.site().to_string(),
                l.kind.code().to_string(),
                format!("{:e}", l.chi_per_day),
                format!("{:e}", l.p),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("<edges>", e))?;
        Ok(())
    }

    /// Reads an edge list written by [`LinkSet::write_csv`].
    pub fn read_csv<R: Read>(reader: R, path: &Path, n_nodes: usize, dt_days: f64) -> Result<LinkSet> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(EDGE_COLUMNS) {
            return Err(Error::Header {
                path: path.into(),
                msg: format!("expected columns {}", EDGE_COLUMNS.join(",")),
            });
        }
        let mut set = LinkSet::new(n_nodes, dt_days);
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let bad = |msg: &str| Error::Parse {
                path: path.into(),
                line,
                msg: msg.to_string(),
            };
            let node = |s: &str, k: &str| -> Result<NodeId> {
                let sp = Species::from_code(s).ok_or_else(|| bad("bad species"))?;
                let site: usize = k.parse().map_err(|_| bad("bad site"))?;
                Ok(NodeId::new(sp, site))
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            set.links.push(Link {
                src: node(&rec[0], &rec[1])?,
                dst: node(&rec[2], &rec[3])?,
                kind: LinkKind::from_code(&rec[4]).ok_or_else(|| bad("bad kind"))?,
                chi_per_day: num(&rec[5])?,
                p: num(&rec[6])?,
            });
        }
        Ok(set)
    }
}

pub const EDGE_COLUMNS: [&str; 7] = [
    "src_species",
    "src_site",
    "dst_species",
    "dst_site",
    "kind",
    "chi_per_day",
    "p",
];

/// Weighted in/out degree of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Degree {
    pub d_in: f64,
    pub d_out: f64,
}

/// Σ p̃ over entering and leaving edges, per node.
pub fn weighted_degrees(links: &LinkSet) -> Vec<Degree> {
    let mut out = vec![Degree::default(); links.n_nodes];
    for l in &links.links {
        out[l.src.0].d_out += l.p;
        out[l.dst.0].d_in += l.p;
    }
    out
}

/// Node ids sorted by decreasing degree (ties by id), first `k`.
pub fn top_nodes(degrees: &[Degree], k: usize, incoming: bool) -> Vec<NodeId> {
    let key = |d: &Degree| if incoming { d.d_in } else { d.d_out };
    let mut ids: Vec<usize> = (0..degrees.len()).collect();
    ids.sort_by(|&a, &b| key(&degrees[b]).total_cmp(&key(&degrees[a])).then(a.cmp(&b)));
    ids.into_iter().take(k).map(NodeId).collect()
}

/// Destination fractions of the fragments of one site-pair breakup.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRow {
    /// per destination site
    pub to_site: Vec<f64>,
    pub reentered: f64,
    pub escaped: f64,
}

impl FlowRow {
    pub fn total(&self) -> f64 {
        self.to_site.iter().sum::<f64>() + self.reentered + self.escaped
    }
}

/// Fragment destination fractions keyed by unordered same-shell site pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTensor {
    pub n_sites: usize,
    pub rows: BTreeMap<(usize, usize), FlowRow>,
}

/// Mass of each reference parent, kg.
pub const TENSOR_PARENT_MASS_KG: f64 = 20_000.0;
/// Radius of each reference parent, m.
pub const TENSOR_PARENT_RADIUS_M: f64 = 2.5;
pub const TENSOR_REPETITIONS: usize = 10;

impl FlowTensor {
    pub fn row(&self, site_a: usize, site_b: usize) -> Option<&FlowRow> {
        self.rows.get(&(site_a.min(site_b), site_a.max(site_b)))
    }

    pub fn write_csv<W: Write>(&self, writer: W, header: Option<&str>) -> Result<()> {
        let mut w = writer;
        if let Some(h) = header {
            writeln!(w, "# {h}").map_err(|e| Error::io("<tensor>", e))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["site_a", "site_b", "destination", "fraction"])?;
        for (&(a, b), row) in &self.rows {
            let mut put = |dest: String, f: f64| -> Result<()> {
                if f > 0.0 {
                    csv.write_record([a.to_string(), b.to_string(), dest, f.to_string()])?;
                }
                Ok(())
            };
            for (s, &f) in row.to_site.iter().enumerate() {
                put(s.to_string(), f)?;
            }
            put("reentered".into(), row.reentered)?;
            put("escaped".into(), row.escaped)?;
        }
        csv.flush().map_err(|e| Error::io("<tensor>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, path: &Path, n_sites: usize) -> Result<FlowTensor> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut rows: BTreeMap<(usize, usize), FlowRow> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let bad = || Error::Parse {
                path: path.into(),
                line,
                msg: "malformed tensor row".into(),
            };
            let a: usize = rec[0].parse().map_err(|_| bad())?;
            let b: usize = rec[1].parse().map_err(|_| bad())?;
            let f: f64 = rec[3].parse().map_err(|_| bad())?;
            let row = rows.entry((a, b)).or_insert_with(|| FlowRow {
                to_site: vec![0.0; n_sites],
                reentered: 0.0,
                escaped: 0.0,
            });
            match &rec[2] {
                "reentered" => row.reentered = f,
                "escaped" => row.escaped = f,
                s => {
                    let k: usize = s.parse().map_err(|_| bad())?;
                    *row.to_site.get_mut(k).ok_or_else(bad)? = f;
                }
            }
        }
        Ok(FlowTensor { n_sites, rows })
    }
}

fn reference_parent(grid: &SiteGrid, site: usize, id: u64) -> SpaceObject {
    let s = grid.site(site);
    SpaceObject {
        id,
        species: Species::NonManoeuvrable,
        a_km: grid.r_earth_km + s.mid_altitude(),
        e: 0.0,
        i_deg: s.mid_inclination(),
        mass_kg: TENSOR_PARENT_MASS_KG,
        radius_m: TENSOR_PARENT_RADIUS_M,
        area_m2: std::f64::consts::PI * TENSOR_PARENT_RADIUS_M * TENSOR_PARENT_RADIUS_M,
        cd: 2.2,
        mission_elapsed: 0.0,
    }
}

/// Breaks up two reference parents for every same-shell site pair and
/// averages where the fragments land. Each pair has its own random stream
/// derived from `seed`, so the result does not depend on thread count.
pub fn precompute_flow_tensor(grid: &SiteGrid, model: &BreakupModel, repetitions: usize, seed: u64) -> FlowTensor {
    let mut pairs = Vec::new();
    for shell in 0..grid.n_shells() {
        for a in 0..grid.n_inc_bins() {
            for b in a..grid.n_inc_bins() {
                pairs.push((grid.site_id(shell, a), grid.site_id(shell, b)));
            }
        }
    }
    let rows: Vec<((usize, usize), FlowRow)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            ((a, b), flow_row(grid, model, a, b, repetitions, &mut rng))
        })
        .collect();
    FlowTensor {
        n_sites: grid.len(),
        rows: rows.into_iter().collect(),
    }
}

fn flow_row(grid: &SiteGrid, model: &BreakupModel, a: usize, b: usize, reps: usize, rng: &mut ChaCha8Rng) -> FlowRow {
    let (pa, pb) = (reference_parent(grid, a, 1), reference_parent(grid, b, 2));
    let r = grid.r_earth_km + grid.site(a).mid_altitude();
    let (sa, sb) = (NodeSummary::of([&pa]), NodeSummary::of([&pb]));
    let dv = relative_velocity(&sa, r, &sb, r, model.mu).unwrap_or(0.0);
    let mut per_site = vec![0u64; grid.len()];
    let (mut reentered, mut escaped, mut total) = (0u64, 0u64, 0u64);
    for _ in 0..reps.max(1) {
        let event = CollisionEvent::new(pa.clone(), pb.clone(), dv, *grid.site(a));
        let batch = model.synthesize(&event, rng);
        total += batch.len() as u64;
        let routing = assign_fragment_flows(batch, grid, rng);
        for (s, n) in routing.per_site.iter().enumerate() {
            per_site[s] += n;
        }
        reentered += routing.reentered;
        escaped += routing.escaped;
    }
    let norm = if total > 0 { 1.0 / total as f64 } else { 0.0 };
    FlowRow {
        to_site: per_site.iter().map(|&n| n as f64 * norm).collect(),
        reentered: reentered as f64 * norm,
        escaped: escaped as f64 * norm,
    }
}

/// Drag-induced gain of one object's residence weight in `shell` over a step.
fn drag_transfer(
    obj: &SpaceObject,
    shell: usize,
    grid: &SiteGrid,
    edges: &[f64],
    profile: &DensityProfile,
    cfg: &SimConfig,
) -> f64 {
    let r_earth = grid.r_earth_km;
    let rho = orbit_averaged_density(obj.a_km, obj.e, r_earth, |h| profile.rho(h));
    let out = drag_step(
        obj.a_km,
        obj.e,
        obj.cd,
        obj.area_to_mass(),
        rho,
        cfg.time.dt_days * SECONDS_PER_DAY,
        cfg.physics.mu_km3_s2,
        cfg.physics.circular_drag,
    );
    if out.decayed || out.a_km * (1.0 - out.e) <= r_earth {
        return 0.0;
    }
    let before = residence_weights(obj.a_km, obj.e, edges).weight(shell);
    let after = residence_weights(out.a_km, out.e, edges).weight(shell);
    (after - before).max(0.0)
}

/// Event rates of every link of the snapshot `state`.
pub fn compute_link_rates(
    state: &NetworkState,
    cfg: &SimConfig,
    tensor: &FlowTensor,
    profile: &DensityProfile,
) -> LinkSet {
    let grid = &state.grid;
    let n_nodes = state.nodes.len();
    let dt_days = cfg.time.dt_days;
    let mu = cfg.physics.mu_km3_s2;
    let (s_cam, kappa) = (cfg.policy.s_cam, cfg.policy.kappa);
    let mut links = LinkSet::new(n_nodes, dt_days);
    let summaries: Vec<NodeSummary> = state.nodes.iter().map(|n| NodeSummary::of(&n.objects)).collect();

    // collision, fragment-flow and small-collision edges, shell by shell
    let mut f_flow: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut sc_rate = vec![0.0; grid.len()];
    for shell in 0..grid.n_shells() {
        let r_mid = grid.shell_mid_radius(shell);
        let nodes: Vec<usize> = (0..grid.n_inc_bins())
            .flat_map(|b| Species::ALL.map(|s| NodeId::new(s, grid.site_id(shell, b)).0))
            .filter(|&k| summaries[k].n > 0)
            .collect();
        for (x, &i) in nodes.iter().enumerate() {
            for &j in &nodes[x..] {
                let (ni, nj) = (NodeId(i), NodeId(j));
                let Some(dv) = relative_velocity(&summaries[i], r_mid, &summaries[j], r_mid, mu) else {
                    continue;
                };
                let volume = grid.volume(ni.site()).max(grid.volume(nj.site()));
                let tau = pair_rate(&summaries[i], &summaries[j], i == j, dv, volume);
                if !(tau > 0.0) {
                    continue;
                }
                let payloads = [ni, nj].iter().filter(|n| n.species() == Species::Payload).count() as i32;
                let tau_star = tau * (1.0 - s_cam).powi(payloads);
                let pf = matches!(
                    (ni.species(), nj.species()),
                    (Species::Payload, Species::Fragment) | (Species::Fragment, Species::Payload)
                );
                let small = if pf { kappa * tau } else { 0.0 };
                if i != j {
                    links.push(ni, nj, LinkKind::Collision, tau_star + small);
                    links.push(nj, ni, LinkKind::Collision, tau_star + small);
                }
                if pf {
                    let p_site = if ni.species() == Species::Payload {
                        ni.site()
                    } else {
                        nj.site()
                    };
                    sc_rate[p_site] += small;
                }
                if let Some(row) = tensor.row(ni.site(), nj.site()) {
                    for (dst_site, &xi) in row.to_site.iter().enumerate() {
                        if xi > 0.0 {
                            *f_flow.entry((i, dst_site)).or_default() += tau_star * xi;
                            if i != j {
                                *f_flow.entry((j, dst_site)).or_default() += tau_star * xi;
                            }
                        }
                    }
                }
            }
        }
    }
    for ((src, dst_site), chi) in f_flow {
        links.push(
            NodeId(src),
            NodeId::new(Species::Fragment, dst_site),
            LinkKind::FragmentFlow,
            chi,
        );
    }
    for (site, chi) in sc_rate.into_iter().enumerate() {
        links.push(
            NodeId::new(Species::Payload, site),
            NodeId::new(Species::NonManoeuvrable, site),
            LinkKind::SmallCollision,
            chi,
        );
    }

    // decay edges: drag-driven movers per day into the shell below
    let edges = grid.shell_edge_radii();
    for (idx, node) in state.nodes.iter().enumerate() {
        let here = grid.site(node.site);
        let Some(below) = here.shell.checked_sub(1) else {
            continue;
        };
        let moved: f64 = node
            .objects
            .iter()
            .map(|o| drag_transfer(o, below, grid, &edges, profile, cfg))
            .sum();
        let dst = NodeId::new(node.species, grid.site_id(below, here.inc_bin));
        links.push(NodeId(idx), dst, LinkKind::Decay, moved / dt_days);
    }

    // disposal failures over the next step
    let life = cfg.policy.mission_lifetime_years;
    let dt_years = cfg.dt_years();
    for site in 0..grid.len() {
        let expiring = state
            .node(Species::Payload, site)
            .objects
            .iter()
            .filter(|o| o.mission_elapsed + dt_years >= life)
            .count();
        links.push(
            NodeId::new(Species::Payload, site),
            NodeId::new(Species::NonManoeuvrable, site),
            LinkKind::Pmd,
            cfg.policy.gamma * expiring as f64 / dt_days,
        );
    }
    links
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breakup::BreakupConstants;
    use crate::decay::DensityModel;
    use crate::domain::{MU_EARTH_KM3_S2 as MU, R_EARTH_KM};
    use crate::engine::payload;

    fn node(k: usize) -> NodeId {
        NodeId(k)
    }

    fn model() -> BreakupModel {
        BreakupModel::new(BreakupConstants::builtin(), 0.1, MU, R_EARTH_KM)
    }

    #[test]
    fn probability_closed_forms() {
        assert_eq!(link_probability(0.0, 30.0), 0.0);
        assert!((link_probability(std::f64::consts::LN_2, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(link_probability(1e6, 30.0), 1.0);
    }

    #[test]
    fn star_degrees_and_handshake() {
        let mut s = LinkSet::new(8, 1.0);
        let chi = std::f64::consts::LN_2;
        for k in 1..4 {
            s.push(node(k), node(0), LinkKind::Decay, chi);
        }
        let d = weighted_degrees(&s);
        assert!((d[0].d_in - 1.5).abs() < 1e-12);
        assert_eq!(d[0].d_out, 0.0);
        assert_eq!(d[7], Degree::default());
        let (i, o): (f64, f64) = d.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.d_in, acc.1 + x.d_out));
        assert!((i - o).abs() < 1e-12);
    }

    #[test]
    fn aggregation_keeps_the_largest_probability() {
        let mut s = LinkSet::new(4, 1.0);
        s.push(node(0), node(3), LinkKind::Collision, 0.1);
        s.push(node(0), node(3), LinkKind::FragmentFlow, 0.5);
        s.push(node(0), node(0), LinkKind::Collision, 9.0);
        let a = s.aggregate();
        assert_eq!(a.len(), 1);
        assert_eq!(a.links[0].kind, LinkKind::FragmentFlow);
    }

    #[test]
    fn subnetworks_are_nested() {
        let mut s = LinkSet::new(16, 1.0);
        for k in 1..16 {
            s.push(node(0), node(k), LinkKind::Decay, 0.1 * k as f64);
        }
        assert_eq!(s.subnetwork(0.0).len(), 15);
        assert!(s.subnetwork(1.0 + 1e-12).is_empty());
        let mut prev = usize::MAX;
        for r in 0..=20 {
            let n = s.subnetwork(r as f64 / 20.0).len();
            assert!(n <= prev);
            prev = n;
        }
    }

    fn small_grid() -> SiteGrid {
        SiteGrid::new(200.0, 1200.0, 100.0, 60.0, R_EARTH_KM).unwrap()
    }

    #[test]
    fn tensor_rows_are_normalized_with_reentry_at_the_bottom() {
        let g = small_grid();
        let t = precompute_flow_tensor(&g, &model(), 2, 5);
        assert_eq!(t.rows.len(), g.n_shells() * 6);
        for row in t.rows.values() {
            assert!((row.total() - 1.0).abs() < 1e-12);
        }
        assert!(t.row(g.site_id(0, 1), g.site_id(0, 1)).unwrap().reentered > 0.0);
    }

    #[test]
    fn tensor_round_trip() {
        let g = SiteGrid::new(700.0, 900.0, 100.0, 90.0, R_EARTH_KM).unwrap();
        let t = precompute_flow_tensor(&g, &model(), 1, 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, Some("h")).unwrap();
        let back = FlowTensor::read_csv(buf.as_slice(), Path::new("t"), g.len()).unwrap();
        assert_eq!(back, t);
    }

    fn profile() -> DensityProfile {
        DensityModel::from_config(&SimConfig::default().atmosphere)
            .unwrap()
            .profile(0.0, 0.0, 2700.0)
    }

    #[test]
    fn empty_state_has_no_links() {
        let g = small_grid();
        let state = NetworkState::empty(g.clone());
        let t = FlowTensor {
            n_sites: g.len(),
            rows: BTreeMap::new(),
        };
        assert!(compute_link_rates(&state, &SimConfig::default(), &t, &profile()).is_empty());
    }

    fn pf_state(g: &SiteGrid) -> NetworkState {
        let mut objs = Vec::new();
        for k in 0..40 {
            objs.push(payload(k, R_EARTH_KM + 850.0, 98.0, 0.0));
            let mut f = payload(100 + k, R_EARTH_KM + 850.0, 98.0, 0.0);
            f.species = Species::Fragment;
            f.mass_kg = 1.0;
            f.radius_m = 0.1;
            objs.push(f);
        }
        NetworkState::from_objects(g.clone(), objs).0
    }

    #[test]
    fn payload_fragment_edges() {
        let g = small_grid();
        let model = model();
        let t = precompute_flow_tensor(&g, &model, 1, 3);
        let mut cfg = SimConfig::default();
        cfg.policy.s_cam = 0.5;
        let state = pf_state(&g);
        let links = compute_link_rates(&state, &cfg, &t, &profile());
        let site = g.site_id(6, 1);
        let (p, f, n) = (
            NodeId::new(Species::Payload, site),
            NodeId::new(Species::Fragment, site),
            NodeId::new(Species::NonManoeuvrable, site),
        );
        let get = |a: NodeId, b: NodeId, k: LinkKind| {
            links
                .links
                .iter()
                .find(|l| l.src == a && l.dst == b && l.kind == k)
                .map(|l| l.chi_per_day)
        };
        let c_pf = get(p, f, LinkKind::Collision).unwrap();
        assert_eq!(Some(c_pf), get(f, p, LinkKind::Collision));
        let sc = get(p, n, LinkKind::SmallCollision).unwrap();
        // χ^C = (1 − s)τ + κτ and χ^SC = κτ
        let tau = sc / cfg.policy.kappa;
        assert!((c_pf - (0.5 * tau + sc)).abs() < 1e-12 * c_pf);
        assert!(links.count_kind(LinkKind::FragmentFlow) > 0);

        cfg.policy.s_cam = 1.0;
        let links = compute_link_rates(&state, &cfg, &t, &profile());
        let c = links
            .links
            .iter()
            .find(|l| l.src == p && l.dst == f && l.kind == LinkKind::Collision)
            .unwrap();
        assert!((c.chi_per_day - sc).abs() < 1e-12 * sc);
        assert!(links
            .links
            .iter()
            .all(|l| l.kind != LinkKind::FragmentFlow || l.src != p));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = small_grid();
        let t = precompute_flow_tensor(&g, &model(), 1, 3);
        let links = compute_link_rates(&pf_state(&g), &SimConfig::default(), &t, &profile());
        let mut buf = Vec::new();
        links.write_csv(&mut buf, Some("config_hash=x")).unwrap();
        let back = LinkSet::read_csv(buf.as_slice(), Path::new("e"), links.n_nodes, links.dt_days).unwrap();
        assert_eq!(back, links);
    }

    #[test]
    fn decay_edges_point_down_and_follow_drag() {
        let g = small_grid();
        let t = FlowTensor {
            n_sites: g.len(),
            rows: BTreeMap::new(),
        };
        let mut low = payload(1, R_EARTH_KM + 501.0, 98.0, 0.0);
        low.species = Species::Fragment;
        low.area_m2 = 50.0;
        let mut high = low.clone();
        high.id = 2;
        high.a_km = R_EARTH_KM + 890.0;
        let state = NetworkState::from_objects(g.clone(), [low, high]).0;
        let links = compute_link_rates(&state, &SimConfig::default(), &t, &profile());
        let decay: Vec<&Link> = links.links.iter().filter(|l| l.kind == LinkKind::Decay).collect();
        assert_eq!(decay.len(), 1, "{decay:?}");
        let (src, dst) = (g.site(decay[0].src.site()), g.site(decay[0].dst.site()));
        assert_eq!(dst.shell + 1, src.shell);
        assert_eq!(src.alt_lo, 500.0);
        assert!(decay[0].p > 0.0 && decay[0].p <= 1.0);
    }
}
