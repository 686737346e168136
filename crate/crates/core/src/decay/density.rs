use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::domain::{AtmosphereConfig, DensityMode};
use crate::error::{Error, Result};

const BUILTIN_TABLE: &str = include_str!("../../data/density_table.csv");

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Altitude × solar-activity grid of densities, interpolated in log space.
///
/// Phase index `p` of `n` phases sits at activity `p / (n - 1)`; 0 is solar
/// minimum and 1 solar maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    altitudes: Vec<f64>,
    n_phases: usize,
    /// `[alt * n_phases + phase]`
    log_rho: Vec<f64>,
}

#[derive(Debug, serde::Deserialize)]
struct Row {
    altitude_km: f64,
    phase_index: usize,
    rho_kg_m3: f64,
}

impl DensityTable {
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_TABLE.as_bytes(), Path::new("<builtin density table>"))
            .expect("shipped density table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for need in ["altitude_km", "phase_index", "rho_kg_m3"] {
            if !headers.iter().any(|h| h == need) {
                return Err(Error::Header {
                    path: path.into(),
                    msg: format!("missing column {need}"),
                });
            }
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::Parse {
                path: path.into(),
                line: k + 2,
                msg: e.to_string(),
            })?;
            if !(row.rho_kg_m3 > 0.0) {
                return Err(Error::Parse {
                    path: path.into(),
                    line: k + 2,
                    msg: format!("density {} must be > 0", row.rho_kg_m3),
                });
            }
            rows.push(row);
        }
        let mut altitudes: Vec<f64> = rows.iter().map(|r| r.altitude_km).collect();
        altitudes.sort_by(f64::total_cmp);
        altitudes.dedup();
        let n_phases = rows.iter().map(|r| r.phase_index + 1).max().unwrap_or(0);
        if altitudes.len() < 2 || n_phases < 1 {
            return Err(Error::Domain(format!(
                "{}: density table needs at least two altitudes",
                path.display()
            )));
        }
        let mut log_rho = vec![f64::NAN; altitudes.len() * n_phases];
        for r in &rows {
            let k = altitudes.partition_point(|&h| h < r.altitude_km);
            log_rho[k * n_phases + r.phase_index] = r.rho_kg_m3.ln();
        }
        if log_rho.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain(format!(
                "{}: density table grid is incomplete",
                path.display()
            )));
        }
        for p in 0..n_phases {
            for k in 1..altitudes.len() {
                if log_rho[k * n_phases + p] > log_rho[(k - 1) * n_phases + p] {
                    return Err(Error::Domain(format!(
                        "{}: density increases with altitude at {} km, phase {p}",
                        path.display(),
                        altitudes[k]
                    )));
                }
            }
        }
        Ok(DensityTable {
            altitudes,
            n_phases,
            log_rho,
        })
    }

    pub fn altitude_range(&self) -> (f64, f64) {
        (self.altitudes[0], *self.altitudes.last().unwrap())
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    /// ln ρ at `altitude_km` and activity `s` in [0, 1]; altitude clamped.
    pub fn log_density(&self, altitude_km: f64, s: f64) -> f64 {
        let (lo, hi) = self.altitude_range();
        let h = altitude_km.clamp(lo, hi);
        let k = (self.altitudes.partition_point(|&x| x <= h).max(1) - 1).min(self.altitudes.len() - 2);
        let t = (h - self.altitudes[k]) / (self.altitudes[k + 1] - self.altitudes[k]);
        let (p, u) = if self.n_phases == 1 {
            (0, 0.0)
        } else {
            let x = s.clamp(0.0, 1.0) * (self.n_phases - 1) as f64;
            let p = (x.floor() as usize).min(self.n_phases - 2);
            (p, x - p as f64)
        };
        let at = |k: usize, p: usize| self.log_rho[k * self.n_phases + p];
        let col = |p: usize| at(k, p) + t * (at(k + 1, p) - at(k, p));
        if self.n_phases == 1 {
            col(0)
        } else {
            col(p) + u * (col(p + 1) - col(p))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Table {
        table: DensityTable,
        cycle_years: f64,
        max_offset_years: f64,
    },
    Exponential {
        rho0: f64,
        h0_km: f64,
        scale_height_km: f64,
    },
}

impl DensityModel {
    pub fn from_config(cfg: &AtmosphereConfig) -> Result<Self> {
        Ok(match cfg.mode {
            DensityMode::Table => DensityModel::Table {
                table: match &cfg.density_file {
                    Some(p) => DensityTable::load(p)?,
                    None => DensityTable::builtin(),
                },
                cycle_years: cfg.solar_cycle_years,
                max_offset_years: cfg.solar_max_offset_years,
            },
            DensityMode::Exponential => DensityModel::Exponential {
                rho0: cfg.exp_rho0_kg_m3,
                h0_km: cfg.exp_h0_km,
                scale_height_km: cfg.exp_scale_height_km,
            },
        })
    }

    /// Solar activity in [0, 1]; 1 at each solar maximum.
    pub fn solar_activity(&self, epoch_years: f64) -> f64 {
        match self {
            DensityModel::Table {
                cycle_years,
                max_offset_years,
                ..
            } => {
                let phase = 2.0 * std::f64::consts::PI * (epoch_years - max_offset_years) / cycle_years;
                0.5 * (1.0 + phase.cos())
            }
            DensityModel::Exponential { .. } => 0.5,
        }
    }

    fn log_density(&self, altitude_km: f64, s: f64) -> f64 {
        match self {
            DensityModel::Table { table, .. } => table.log_density(altitude_km, s),
            DensityModel::Exponential {
                rho0,
                h0_km,
                scale_height_km,
            } => rho0.ln() - (altitude_km - h0_km) / scale_height_km,
        }
    }

    /// kg/m³ at `altitude_km` and `epoch_years` since simulation start.
    pub fn density(&self, altitude_km: f64, epoch_years: f64) -> f64 {
        if let DensityModel::Table { table, .. } = self {
            let (lo, hi) = table.altitude_range();
            if (altitude_km < lo || altitude_km > hi) && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                log::warn!("altitude {altitude_km} km outside density table [{lo}, {hi}], clamping");
            }
        }
        self.log_density(altitude_km, self.solar_activity(epoch_years)).exp()
    }

    /// Tabulates ρ on a 1 km grid for fast per-object lookups at one epoch.
    pub fn profile(&self, epoch_years: f64, alt_lo_km: f64, alt_hi_km: f64) -> DensityProfile {
        let s = self.solar_activity(epoch_years);
        let lo = alt_lo_km.floor();
        let n = (alt_hi_km.ceil() - lo) as usize + 1;
        DensityProfile {
            h0: lo,
            rho: (0..n).map(|k| self.log_density(lo + k as f64, s).exp()).collect(),
        }
    }
}

/// ρ sampled every kilometre, linear in between; lookups outside the range clamp.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    h0: f64,
    rho: Vec<f64>,
}

impl DensityProfile {
    pub fn rho(&self, altitude_km: f64) -> f64 {
        let last = self.rho.len() - 1;
        let x = (altitude_km - self.h0).clamp(0.0, last as f64);
        let k = (x as usize).min(last.saturating_sub(1));
        let t = x - k as f64;
        let (a, b) = (self.rho[k], self.rho[(k + 1).min(last)]);
        a + t * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_loads_and_is_monotone() {
        let t = DensityTable::builtin();
        assert_eq!(t.n_phases(), 3);
        assert_eq!(t.altitude_range(), (100.0, 2200.0));
        for s in [0.0, 0.3, 0.5, 1.0] {
            let mut prev = f64::INFINITY;
            for h in (100..=2200).step_by(7) {
                let r = t.log_density(h as f64, s);
                assert!(r <= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn grid_points_are_exact() {
        let t = DensityTable::builtin();
        assert!((t.log_density(400.0, 0.0).exp() / 7.3e-13 - 1.0).abs() < 1e-12);
        assert!((t.log_density(400.0, 1.0).exp() / 7.4e-12 - 1.0).abs() < 1e-12);
        assert!((t.log_density(2200.0, 1.0).exp() / 2.0e-17 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_mode_scale_height() {
        let m = DensityModel::Exponential {
            rho0: 1e-11,
            h0_km: 200.0,
            scale_height_km: 60.0,
        };
        assert!((m.density(260.0, 0.0) - 1e-11 / std::f64::consts::E).abs() < 1e-24);
    }

    #[test]
    fn activity_cycle() {
        let m = DensityModel::from_config(&AtmosphereConfig::default()).unwrap();
        assert!((m.solar_activity(1.5) - 1.0).abs() < 1e-15);
        assert!(m.solar_activity(7.0).abs() < 1e-15);
        assert!((m.solar_activity(12.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_model() {
        let m = DensityModel::from_config(&AtmosphereConfig::default()).unwrap();
        let p = m.profile(3.0, 100.0, 2500.0);
        for h in [150.0, 432.0, 999.0, 2100.0] {
            assert!((p.rho(h) / m.density(h, 3.0) - 1.0).abs() < 1e-12);
        }
        assert!((p.rho(50.0) / m.density(100.0, 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tables() {
        let p = Path::new("t.csv");
        assert!(matches!(
            DensityTable::from_reader("alt,phase_index,rho_kg_m3\n".as_bytes(), p),
            Err(Error::Header { .. })
        ));
        let rising = "altitude_km,phase_index,rho_kg_m3\n100,0,1e-10\n200,0,1e-9\n";
        assert!(DensityTable::from_reader(rising.as_bytes(), p).is_err());
        let neg = "altitude_km,phase_index,rho_kg_m3\n100,0,-1\n200,0,1e-9\n";
        assert!(matches!(
            DensityTable::from_reader(neg.as_bytes(), p),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
