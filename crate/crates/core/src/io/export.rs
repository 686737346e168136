use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::capacity::{Equilibrium, ExtractedCoefficients, PhasePoint, Stability};
use crate::domain::{NodeId, SiteGrid, Species};
use crate::engine::{species_pairs, EnsembleStats, MeanStd, RunTrace, StepSummary};
use crate::error::{Error, Result};
use crate::netanalysis::{Degree, LinkSet};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const COLLISIONS_FILE: &str = "collisions.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const DEGREES_FILE: &str = "degrees.csv";
pub const CAPACITY_FILE: &str = "capacity.csv";
pub const EQUILIBRIA_FILE: &str = "equilibria.csv";
pub const PHASE_GRID_FILE: &str = "phase_grid.csv";
pub const STEPS_FILE: &str = "steps.csv";

/// A CSV table with an optional `# config_hash=` provenance line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config_hash: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(config_hash: &str, columns: &[&str]) -> Self {
        Table {
            config_hash: Some(config_hash.to_string()),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn f64_column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let k = self.column(name).ok_or_else(|| Error::Header {
            path: path.into(),
            msg: format!("missing column {name}"),
        })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(line, r)| {
                r[k].parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: line + 2 + usize::from(self.config_hash.is_some()),
                    msg: format!("{name} = '{}' is not a number", r[k]),
                })
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(h) = &self.config_hash {
            writeln!(w, "# config_hash={h}").map_err(|e| Error::io("<table>", e))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Table> {
        let config_hash = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# config_hash="))
            .map(|h| h.trim().to_string());
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Header {
                path: path.into(),
                msg: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table {
            config_hash,
            columns,
            rows,
        })
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn timeseries_table(stats: &EnsembleStats, hash: &str) -> Table {
    let mut cols = vec!["epoch_years".to_string()];
    for s in Species::ALL {
        cols.push(format!("{}_mean", s.code()));
        cols.push(format!("{}_std", s.code()));
    }
    cols.extend(["total_mean".into(), "total_std".into()]);
    let names: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(hash, &names);
    for (k, &epoch) in stats.epochs.iter().enumerate() {
        let mut row = vec![num(epoch)];
        for ms in stats.species[k].iter().chain([&stats.total[k]]) {
            row.push(num(ms.mean));
            row.push(num(ms.std));
        }
        t.push(row);
    }
    t
}

pub fn collisions_table(stats: &EnsembleStats, hash: &str) -> Table {
    let mut t = Table::new(
        hash,
        &[
            "epoch_years",
            "catastrophic_mean",
            "catastrophic_std",
            "collisions_mean",
            "collisions_std",
            "small_mean",
            "small_std",
        ],
    );
    for (k, &epoch) in stats.epochs.iter().enumerate() {
        t.push(vec![
            num(epoch),
            num(stats.catastrophic[k].mean),
            num(stats.catastrophic[k].std),
            num(stats.collisions[k].mean),
            num(stats.collisions[k].std),
            num(stats.small[k].mean),
            num(stats.small[k].std),
        ]);
    }
    t
}

/// Rebuilds ensemble statistics from the time-series and collision tables.
pub fn read_ensemble_stats(timeseries: &Path, collisions: &Path, n_runs: usize) -> Result<EnsembleStats> {
    let ts = Table::load(timeseries)?;
    let col = Table::load(collisions)?;
    let pair = |t: &Table, name: &str, path: &Path| -> Result<Vec<MeanStd>> {
        let m = t.f64_column(&format!("{name}_mean"), path)?;
        let s = t.f64_column(&format!("{name}_std"), path)?;
        Ok(m.into_iter().zip(s).map(|(mean, std)| MeanStd { mean, std }).collect())
    };
    let per_species: Vec<Vec<MeanStd>> = Species::ALL
        .iter()
        .map(|s| pair(&ts, &s.code().to_string(), timeseries))
        .collect::<Result<_>>()?;
    let epochs = ts.f64_column("epoch_years", timeseries)?;
    let species = (0..epochs.len())
        .map(|k| {
            [
                per_species[0][k],
                per_species[1][k],
                per_species[2][k],
                per_species[3][k],
            ]
        })
        .collect();
    Ok(EnsembleStats {
        n_runs,
        epochs,
        species,
        total: pair(&ts, "total", timeseries)?,
        catastrophic: pair(&col, "catastrophic", collisions)?,
        collisions: pair(&col, "collisions", collisions)?,
        small: pair(&col, "small", collisions)?,
    })
}

/// Lattice layout of nodes with their weighted degrees.
pub fn degrees_table(grid: &SiteGrid, degrees: &[Degree], hash: &str) -> Table {
    let mut t = Table::new(
        hash,
        &[
            "node",
            "species",
            "site",
            "shell",
            "inc_bin",
            "alt_lo_km",
            "alt_hi_km",
            "inc_lo_deg",
            "inc_hi_deg",
            "d_in",
            "d_out",
        ],
    );
    for (k, d) in degrees.iter().enumerate() {
        let id = NodeId(k);
        let s = grid.site(id.site());
        t.push(vec![
            k.to_string(),
            id.species().code().to_string(),
            id.site().to_string(),
            s.shell.to_string(),
            s.inc_bin.to_string(),
            num(s.alt_lo),
            num(s.alt_hi),
            num(s.inc_lo),
            num(s.inc_hi),
            num(d.d_in),
            num(d.d_out),
        ]);
    }
    t
}

pub fn read_degrees(path: &Path) -> Result<Vec<Degree>> {
    let t = Table::load(path)?;
    let d_in = t.f64_column("d_in", path)?;
    let d_out = t.f64_column("d_out", path)?;
    Ok(d_in
        .into_iter()
        .zip(d_out)
        .map(|(d_in, d_out)| Degree { d_in, d_out })
        .collect())
}

pub fn capacity_table(c: &ExtractedCoefficients, hash: &str) -> Table {
    let mut t = Table::new(hash, &["name", "value"]);
    let mut put = |k: &str, v: f64| t.push(vec![k.to_string(), num(v)]);
    put("a", c.model_1d.a);
    put("b", c.model_1d.b);
    put("capacity", c.model_1d.capacity().unwrap_or(f64::INFINITY));
    if let Some(m) = &c.model_2d {
        put("c", m.c);
        put("d", m.d);
        put("e", m.e);
        put("f", m.f);
        put("lambda", m.lambda);
        put("gamma", m.gamma);
    }
    put("samples_x", c.samples_x as f64);
    put("samples_y", c.samples_y as f64);
    t
}

/// (name, value) pairs of a capacity table.
pub fn read_capacity(path: &Path) -> Result<Vec<(String, f64)>> {
    let t = Table::load(path)?;
    let values = t.f64_column("value", path)?;
    let k = t.column("name").ok_or_else(|| Error::Header {
        path: path.into(),
        msg: "missing column name".into(),
    })?;
    Ok(t.rows.iter().map(|r| r[k].clone()).zip(values).collect())
}

pub fn equilibria_table(eq: &[Equilibrium], hash: &str) -> Table {
    let mut t = Table::new(
        hash,
        &["x", "y", "stability", "eig1_re", "eig1_im", "eig2_re", "eig2_im"],
    );
    for e in eq {
        t.push(vec![
            num(e.x),
            num(e.y),
            e.stability.to_string(),
            num(e.eigenvalues[0].0),
            num(e.eigenvalues[0].1),
            num(e.eigenvalues[1].0),
            num(e.eigenvalues[1].1),
        ]);
    }
    t
}

pub fn read_equilibria(path: &Path) -> Result<Vec<Equilibrium>> {
    let t = Table::load(path)?;
    let col = |n: &str| t.f64_column(n, path);
    let (x, y) = (col("x")?, col("y")?);
    let (r1, i1, r2, i2) = (col("eig1_re")?, col("eig1_im")?, col("eig2_re")?, col("eig2_im")?);
    let k = t.column("stability").ok_or_else(|| Error::Header {
        path: path.into(),
        msg: "missing column stability".into(),
    })?;
    t.rows
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let stability = match r[k].as_str() {
                "stable" => Stability::Stable,
                "saddle" => Stability::Saddle,
                "unstable" => Stability::Unstable,
                "degenerate" => Stability::Degenerate,
                other => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: n + 3,
                        msg: format!("unknown stability '{other}'"),
                    })
                }
            };
            Ok(Equilibrium {
                x: x[n],
                y: y[n],
                stability,
                eigenvalues: [(r1[n], i1[n]), (r2[n], i2[n])],
            })
        })
        .collect()
}

pub fn phase_grid_table(grid: &[PhasePoint], hash: &str) -> Table {
    let mut t = Table::new(hash, &["x", "y", "xdot", "ydot", "speed"]);
    for p in grid {
        t.push(vec![
            num(p.x),
            num(p.y),
            num(p.xdot),
            num(p.ydot),
            num(p.xdot.hypot(p.ydot)),
        ]);
    }
    t
}

pub fn read_phase_grid(path: &Path) -> Result<Vec<PhasePoint>> {
    let t = Table::load(path)?;
    let col = |n: &str| t.f64_column(n, path);
    let (x, y, xd, yd) = (col("x")?, col("y")?, col("xdot")?, col("ydot")?);
    Ok((0..x.len())
        .map(|k| PhasePoint {
            x: x[k],
            y: y[k],
            xdot: xd[k],
            ydot: yd[k],
        })
        .collect())
}

fn step_columns() -> Vec<String> {
    let mut cols = vec!["run".to_string(), "step".to_string()];
    for group in ["count", "decay_removed", "pmd_removed", "pmd_failed", "launch", "adr"] {
        cols.extend(Species::ALL.iter().map(|s| format!("{group}_{}", s.code())));
    }
    for (a, b) in species_pairs() {
        cols.extend(
            Species::ALL
                .iter()
                .map(|s| format!("pair_{}{}_{}", a.code(), b.code(), s.code())),
        );
    }
    cols.extend(["catastrophic", "non_catastrophic", "small"].map(String::from));
    cols
}

/// Every step summary of every run, one row per (run, step).
pub fn steps_table(traces: &[RunTrace], hash: &str) -> Table {
    let cols = step_columns();
    let names: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(hash, &names);
    for (run, trace) in traces.iter().enumerate() {
        for (k, s) in trace.steps.iter().enumerate() {
            let mut row = vec![run.to_string(), k.to_string()];
            row.extend(s.counts_before.iter().map(usize::to_string));
            for v in [&s.decay_removed, &s.pmd_removed, &s.pmd_failed, &s.launch, &s.adr] {
                row.extend(v.iter().map(i64::to_string));
            }
            for d in &s.pair_deltas {
                row.extend(d.iter().map(i64::to_string));
            }
            row.extend([s.catastrophic, s.non_catastrophic, s.small].map(|v| v.to_string()));
            t.push(row);
        }
    }
    t
}

/// Step summaries grouped by run, in run order.
pub fn read_steps(path: &Path) -> Result<Vec<Vec<StepSummary>>> {
    let t = Table::load(path)?;
    if t.columns != step_columns() {
        return Err(Error::Header {
            path: path.into(),
            msg: "not a step summary table".into(),
        });
    }
    let mut runs: Vec<Vec<StepSummary>> = Vec::new();
    for (n, row) in t.rows.iter().enumerate() {
        let bad = |k: usize| Error::Parse {
            path: path.into(),
            line: n + 3,
            msg: format!("{} = '{}' is not an integer", t.columns[k], row[k]),
        };
        let int = |k: usize| row[k].parse::<i64>().map_err(|_| bad(k));
        let run = row[0].parse::<usize>().map_err(|_| bad(0))?;
        let mut s = StepSummary::default();
        let four =
            |start: usize| -> Result<[i64; 4]> { Ok([int(start)?, int(start + 1)?, int(start + 2)?, int(start + 3)?]) };
        let counts = four(2)?;
        s.counts_before = counts.map(|c| c.max(0) as usize);
        s.decay_removed = four(6)?;
        s.pmd_removed = four(10)?;
        s.pmd_failed = four(14)?;
        s.launch = four(18)?;
        s.adr = four(22)?;
        for (p, d) in s.pair_deltas.iter_mut().enumerate() {
            *d = four(26 + 4 * p)?;
        }
        let tail = 26 + 40;
        s.catastrophic = int(tail)? as u64;
        s.non_catastrophic = int(tail + 1)? as u64;
        s.small = int(tail + 2)? as u64;
        if run == runs.len() {
            runs.push(Vec::new());
        }
        runs.get_mut(run).ok_or_else(|| bad(0))?.push(s);
    }
    Ok(runs)
}

pub fn save_edges(links: &LinkSet, path: &Path, hash: &str) -> Result<()> {
    let mut buf = Vec::new();
    links.write_csv(&mut buf, Some(&format!("config_hash={hash}")))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Creates `dir` if needed and fails early when it cannot be written.
pub fn prepare_out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    let _ = fs::remove_file(&probe);
    Ok(dir.to_path_buf())
}

/// Simulation outputs: time series and cumulative collisions.
pub fn export_stats(stats: &EnsembleStats, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    prepare_out_dir(dir)?;
    let files = [
        (TIMESERIES_FILE, timeseries_table(stats, hash)),
        (COLLISIONS_FILE, collisions_table(stats, hash)),
    ];
    files
        .into_iter()
        .map(|(name, t)| {
            let p = dir.join(name);
            t.save(&p).map(|_| p)
        })
        .collect()
}
