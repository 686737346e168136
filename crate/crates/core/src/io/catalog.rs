use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{SpaceObject, Species};
use crate::error::{Error, Result};

pub const CATALOG_COLUMNS: [&str; 10] = [
    "object_id",
    "class",
    "a_km",
    "e",
    "i_deg",
    "mass_kg",
    "radius_m",
    "area_m2",
    "cd",
    "age_years",
];
const REQUIRED: usize = 9;

/// A row that failed to parse or violated an object invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub objects: Vec<SpaceObject>,
    pub rejected: Vec<Rejected>,
}

impl Population {
    pub fn counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for o in &self.objects {
            out[o.species.index()] += 1;
        }
        out
    }
}

pub fn load_population(path: &Path, r_earth_km: f64) -> Result<Population> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_population(file, path, r_earth_km)
}

/// Reads catalog rows; bad rows are skipped and listed with line numbers.
pub fn read_population<R: Read>(reader: R, path: &Path, r_earth_km: f64) -> Result<Population> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Header {
        path: path.into(),
        msg: e.to_string(),
    })?;
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(k, h)| (h, k)).collect();
    let missing: Vec<&str> = CATALOG_COLUMNS[..REQUIRED]
        .iter()
        .copied()
        .filter(|c| !index.contains_key(c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Header {
            path: path.into(),
            msg: format!("missing column(s) {}", missing.join(", ")),
        });
    }
    for extra in headers.iter().filter(|h| !CATALOG_COLUMNS.contains(h)) {
        log::warn!("{}: ignoring unknown column '{extra}'", path.display());
    }
    let cols: Vec<Option<usize>> = CATALOG_COLUMNS.iter().map(|c| index.get(c).copied()).collect();

    let mut pop = Population::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        match parse_row(&rec, &cols).and_then(|o| o.validate(r_earth_km).map(|_| o)) {
            Ok(o) => pop.objects.push(o),
            Err(reason) => {
                log::warn!("{}:{line}: row rejected: {reason}", path.display());
                pop.rejected.push(Rejected { line, reason });
            }
        }
    }
    Ok(pop)
}

fn parse_row(rec: &csv::StringRecord, cols: &[Option<usize>]) -> std::result::Result<SpaceObject, String> {
    let field = |k: usize| -> std::result::Result<&str, String> {
        cols[k]
            .and_then(|c| rec.get(c))
            .ok_or_else(|| format!("missing {}", CATALOG_COLUMNS[k]))
    };
    let num = |k: usize| -> std::result::Result<f64, String> {
        let s = field(k)?;
        s.parse::<f64>()
            .map_err(|_| format!("{} = '{s}' is not a number", CATALOG_COLUMNS[k]))
    };
    let id_text = field(0)?;
    let id = id_text
        .parse::<u64>()
        .map_err(|_| format!("object_id = '{id_text}' is not an unsigned integer"))?;
    let class = field(1)?;
    let species = Species::from_code(class).ok_or_else(|| format!("class '{class}' is not one of P, U, N, F"))?;
    let age = match cols[9].and_then(|c| rec.get(c)) {
        None | Some("") => 0.0,
        Some(_) => num(9)?,
    };
    Ok(SpaceObject {
        id,
        species,
        a_km: num(2)?,
        e: num(3)?,
        i_deg: num(4)?,
        mass_kg: num(5)?,
        radius_m: num(6)?,
        area_m2: num(7)?,
        cd: num(8)?,
        mission_elapsed: age,
    })
}

/// Writes objects in catalog format, optionally after a `#` header line.
pub fn write_population<W: Write>(writer: W, objects: &[SpaceObject], header: Option<&str>) -> Result<()> {
    let mut w = writer;
    if let Some(h) = header {
        writeln!(w, "# {h}").map_err(|e| Error::io("<catalog>", e))?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CATALOG_COLUMNS)?;
    for o in objects {
        csv.write_record([
            o.id.to_string(),
            o.species.code().to_string(),
            o.a_km.to_string(),
            o.e.to_string(),
            o.i_deg.to_string(),
            o.mass_kg.to_string(),
            o.radius_m.to_string(),
            o.area_m2.to_string(),
            o.cd.to_string(),
            o.mission_elapsed.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<catalog>", e))?;
    Ok(())
}

pub fn save_population(path: &Path, objects: &[SpaceObject], header: Option<&str>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_population(std::io::BufWriter::new(file), objects, header)
}
