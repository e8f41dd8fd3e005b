use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::nn::SequenceTensor;

/// Cross-section samples per profile frame.
pub const PROFILE_COLUMNS: usize = 70;

/// Erosion depths in µm, `[frames x 70]`, nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct ErosionProfileSet {
    depths: SequenceTensor<f64>,
}

impl ErosionProfileSet {
    pub fn new(depths: SequenceTensor<f64>) -> Result<Self> {
        if depths.channels() != PROFILE_COLUMNS {
            return Err(Error::Shape(format!(
                "profiles need {PROFILE_COLUMNS} columns, got {}",
                depths.channels()
            )));
        }
        if depths.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("profile depths must be finite and nonnegative");
        }
        Ok(Self { depths })
    }

    pub fn frames(&self) -> usize {
        self.depths.frames()
    }

    pub fn depths(&self) -> &SequenceTensor<f64> {
        &self.depths
    }

    pub fn into_depths(self) -> SequenceTensor<f64> {
        self.depths
    }
}

/// Parses profile CSV. Returns the set and how many negative cells were clamped to 0.
pub fn parse_profiles_csv(reader: impl Read) -> Result<(ErosionProfileSet, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut clamped = 0;
    let mut frames = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        // A first row that does not start with a number is a header.
        if i == 0 && rec.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != PROFILE_COLUMNS {
            return Err(Error::Parse(format!(
                "row {line}: expected {PROFILE_COLUMNS} columns, found {}",
                rec.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Parse(format!("row {line}, column {}: not a number: {cell:?}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "row {line}, column {}: non-finite value",
                    j + 1
                )));
            }
            if v < 0.0 {
                clamped += 1;
            }
            data.push(v.max(0.0));
        }
        frames += 1;
    }
    if frames == 0 {
        return Err(Error::Parse("no rows".into()));
    }
    let set = ErosionProfileSet::new(SequenceTensor::new(data, frames, PROFILE_COLUMNS)?)?;
    Ok((set, clamped))
}

/// Loads a profile CSV, logging a warning when negative depths were clamped.
pub fn load_profiles_csv(path: impl AsRef<Path>) -> Result<ErosionProfileSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (set, clamped) = parse_profiles_csv(std::io::BufReader::new(file))
        .map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} negative depth values to 0", path.display());
    }
    Ok(set)
}

/// Headerless CSV, one row per frame; values use shortest round-trip formatting.
pub fn write_profiles_csv(mut sink: impl Write, set: &ErosionProfileSet) -> std::io::Result<()> {
    let mut line = String::new();
    for t in 0..set.frames() {
        line.clear();
        for (j, v) in set.depths().row(t).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()
}
