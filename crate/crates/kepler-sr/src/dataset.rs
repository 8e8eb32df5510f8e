//! Ingestion of Rudolphine-style orbit tables, synthetic orbit generation,
//! and the observational-bias feature expansion.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::fit::EllipseParams;
use crate::BiasConfig;

/// One table row: true anomaly and Sun-Mars distance, plus the auxiliary
/// columns the historical table carries alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSample {
    /// True anomaly in radians, reduced to (-pi, pi].
    pub theta: f64,
    /// Distance in table units, scaled to ~1.5 magnitude.
    pub r: f64,
    pub eccentric_anomaly: Option<f64>,
    pub interpolating_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RudolphineCsv,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<OrbitSample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.r).collect()
    }

    /// (min, max) of theta in degrees, for the report's span record.
    pub fn theta_span_degrees(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.samples {
            lo = lo.min(s.theta.to_degrees());
            hi = hi.max(s.theta.to_degrees());
        }
        (lo, hi)
    }
}

/// Feature columns handed to the search, aligned row-for-row with the
/// source dataset. Column-major to match expression evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl FeatureMatrix {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing required columns: {}", missing.join(", "))]
    Schema { missing: Vec<String> },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid parameters: {0}")]
    Domain(String),
}

/// Sexagesimal angle text ("deg min sec", seconds optional) to decimal
/// degrees. Unit marks after each part are tolerated.
pub fn parse_dms(text: &str) -> Result<f64, DataError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(DataError::Parse {
            row: 0,
            message: format!(
                "expected 'deg min' or 'deg min sec', got {:?}",
                text.trim()
            ),
        });
    }
    let mut values = [0.0f64; 3];
    for (i, part) in parts.iter().enumerate() {
        let cleaned = part.trim_end_matches(['\u{00b0}', '\'', '"']);
        values[i] = cleaned.parse::<f64>().map_err(|_| DataError::Parse {
            row: 0,
            message: format!("bad sexagesimal component {part:?}"),
        })?;
        if !values[i].is_finite() {
            return Err(DataError::Parse {
                row: 0,
                message: format!("non-finite sexagesimal component {part:?}"),
            });
        }
    }
    let [d, m, s] = values;
    if !(0.0..60.0).contains(&m) {
        return Err(DataError::Range(format!("minutes {m} outside [0, 60)")));
    }
    if !(0.0..60.0).contains(&s) {
        return Err(DataError::Range(format!("seconds {s} outside [0, 60)")));
    }
    Ok(d + m / 60.0 + s / 3600.0)
}

/// Reduction to (-pi, pi]; the orbit equation is 2pi-periodic, and this
/// range keeps the aphelion row at exactly +pi rather than -pi.
pub fn reduce_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let t = theta.rem_euclid(two_pi);
    if t > std::f64::consts::PI {
        t - two_pi
    } else {
        t
    }
}

const RUDOLPHINE_COLUMNS: [&str; 4] = [
    "anomalia_eccentri",
    "intercolumnium",
    "anomalia_coaequata",
    "intervallu",
];

/// Magnitude above which a distance column is taken to be in raw E+05
/// table units and divided by 1e5.
pub const RAW_SCALE_THRESHOLD: f64 = 1000.0;

const NORMALIZED_HEADER: [&str; 2] = ["theta_rad", "r"];

/// Loads either schema, dispatching on the header: the four-column
/// historical layout or the two-column normalized one this tool writes.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let raw = std::fs::read_to_string(path)?;
    load_dataset_str(&raw)
}

pub fn load_dataset_str(raw: &str) -> Result<Dataset, DataError> {
    let mut reader = csv_reader(raw);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if NORMALIZED_HEADER.iter().all(|c| headers.iter().any(|h| h == c)) {
        load_normalized(&mut reader, &headers)
    } else {
        load_rudolphine(&mut reader, &headers)
    }
}

/// Loads the historical four-column table. Angle columns may be
/// sexagesimal or decimal degrees (detected per column); the distance
/// column may be raw E+05 or pre-scaled (detected by magnitude).
pub fn load_rudolphine_csv(path: &Path) -> Result<Dataset, DataError> {
    let raw = std::fs::read_to_string(path)?;
    let mut reader = csv_reader(&raw);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    load_rudolphine(&mut reader, &headers)
}

fn csv_reader(raw: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes())
}

fn column_indices(headers: &[String], wanted: &[&str]) -> Result<Vec<usize>, DataError> {
    let mut missing = Vec::new();
    let mut indices = Vec::new();
    for name in wanted {
        match headers.iter().position(|h| h == name) {
            Some(i) => indices.push(i),
            None => missing.push(name.to_string()),
        }
    }
    if missing.is_empty() {
        Ok(indices)
    } else {
        Err(DataError::Schema { missing })
    }
}

fn read_rows(reader: &mut csv::Reader<&[u8]>) -> Result<Vec<Vec<String>>, DataError> {
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            row: idx + 1,
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(|f| f.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(DataError::Parse {
            row: 0,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn load_rudolphine(
    reader: &mut csv::Reader<&[u8]>,
    headers: &[String],
) -> Result<Dataset, DataError> {
    let idx = column_indices(headers, &RUDOLPHINE_COLUMNS)?;
    let rows = read_rows(reader)?;

    let field = |row: &[String], col: usize, row_no: usize| -> Result<String, DataError> {
        row.get(col).cloned().ok_or_else(|| DataError::Parse {
            row: row_no,
            message: format!("missing field {}", headers.get(col).cloned().unwrap_or_default()),
        })
    };

    let mut eccentri = Vec::with_capacity(rows.len());
    let mut intercol = Vec::with_capacity(rows.len());
    let mut coaequata = Vec::with_capacity(rows.len());
    let mut intervallu = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        eccentri.push(field(row, idx[0], row_no)?);
        intercol.push(field(row, idx[1], row_no)?);
        coaequata.push(field(row, idx[2], row_no)?);
        intervallu.push(field(row, idx[3], row_no)?);
    }

    let eccentri_deg = parse_angle_column(&eccentri)?;
    let intercol_val = parse_decimal_column(&intercol, "intercolumnium")?;
    let coaequata_deg = parse_angle_column(&coaequata)?;
    let mut r = parse_decimal_column(&intervallu, "intervallu")?;

    let max_r = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_r > RAW_SCALE_THRESHOLD {
        for v in &mut r {
            *v /= 1e5;
        }
    }

    let mut samples = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        if !(r[i] > 0.0) || !r[i].is_finite() {
            return Err(DataError::Parse {
                row: i + 1,
                message: format!("nonpositive distance {}", r[i]),
            });
        }
        samples.push(OrbitSample {
            theta: reduce_angle(coaequata_deg[i].to_radians()),
            r: r[i],
            eccentric_anomaly: Some(reduce_angle(eccentri_deg[i].to_radians())),
            interpolating_factor: Some(intercol_val[i]),
        });
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::RudolphineCsv,
    })
}

fn load_normalized(
    reader: &mut csv::Reader<&[u8]>,
    headers: &[String],
) -> Result<Dataset, DataError> {
    let idx = column_indices(headers, &NORMALIZED_HEADER)?;
    let rows = read_rows(reader)?;
    let mut samples = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        let get = |col: usize| -> Result<f64, DataError> {
            let text = row.get(col).ok_or_else(|| DataError::Parse {
                row: row_no,
                message: "short row".into(),
            })?;
            text.parse::<f64>().map_err(|_| DataError::Parse {
                row: row_no,
                message: format!("bad number {text:?}"),
            })
        };
        let theta = get(idx[0])?;
        let r = get(idx[1])?;
        if !theta.is_finite() {
            return Err(DataError::Parse {
                row: row_no,
                message: "non-finite angle".into(),
            });
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(DataError::Parse {
                row: row_no,
                message: format!("nonpositive distance {r}"),
            });
        }
        samples.push(OrbitSample {
            theta: reduce_angle(theta),
            r,
            eccentric_anomaly: None,
            interpolating_factor: None,
        });
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::RudolphineCsv,
    })
}

/// A column is sexagesimal if any entry has internal whitespace;
/// otherwise every entry is a plain decimal-degree number.
fn parse_angle_column(entries: &[String]) -> Result<Vec<f64>, DataError> {
    let dms = entries.iter().any(|e| e.split_whitespace().count() > 1);
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if dms {
                parse_dms(e).map_err(|err| at_row(err, i + 1))
            } else {
                e.parse::<f64>().map_err(|_| DataError::Parse {
                    row: i + 1,
                    message: format!("bad decimal angle {e:?}"),
                })
            }
        })
        .collect()
}

fn parse_decimal_column(entries: &[String], name: &str) -> Result<Vec<f64>, DataError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.parse::<f64>().map_err(|_| DataError::Parse {
                row: i + 1,
                message: format!("bad {name} value {e:?}"),
            })
        })
        .collect()
}

fn at_row(err: DataError, row: usize) -> DataError {
    match err {
        DataError::Parse { message, .. } => DataError::Parse { row, message },
        other => other,
    }
}

/// Serializes to the two-column normalized form. Writing, loading, and
/// writing again is byte-identical (floats print shortest round-trip and
/// the provenance line is constant).
pub fn write_normalized_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str("# normalized mars orbit data: theta_rad in (-pi, pi], r dimensionless\n");
    out.push_str("theta_rad,r\n");
    for s in &dataset.samples {
        let _ = writeln!(out, "{},{}", s.theta, s.r);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaGrid {
    UniformTrueAnomaly,
    UniformEccentricAnomaly,
}

/// r at one angle under the orbit equation r = a/(1 + eps*cos(theta)).
pub fn orbit_radius(params: EllipseParams, theta: f64) -> f64 {
    params.a / (1.0 + params.eccentricity * theta.cos())
}

/// Synthetic half-orbit table: n grid points over [0, pi), distances from
/// the orbit equation plus optional Gaussian noise. Deterministic for a
/// fixed seed.
pub fn generate_synthetic(
    params: EllipseParams,
    n: usize,
    grid: ThetaGrid,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if !(params.eccentricity < 1.0) {
        return Err(DataError::Domain(format!(
            "eccentricity {} must be < 1",
            params.eccentricity
        )));
    }
    if params.eccentricity < 0.0 {
        return Err(DataError::Domain("eccentricity must be >= 0".into()));
    }
    if !(params.a > 0.0) {
        return Err(DataError::Domain("semi-major axis must be > 0".into()));
    }
    if n < 2 {
        return Err(DataError::Domain("need at least 2 samples".into()));
    }
    if noise_sigma < 0.0 {
        return Err(DataError::Domain("noise sigma must be >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("sigma checked above"))
    } else {
        None
    };

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let step = (i as f64) * std::f64::consts::PI / (n as f64);
        let (theta, eccentric) = match grid {
            ThetaGrid::UniformTrueAnomaly => (step, None),
            ThetaGrid::UniformEccentricAnomaly => {
                (true_from_eccentric(step, params.eccentricity), Some(step))
            }
        };
        let mut r = orbit_radius(params, theta);
        if let Some(dist) = &noise {
            r += dist.sample(&mut rng);
        }
        if !(r > 0.0) {
            return Err(DataError::Domain(
                "noise sigma too large: nonpositive distance generated".into(),
            ));
        }
        samples.push(OrbitSample {
            theta,
            r,
            eccentric_anomaly: eccentric,
            interpolating_factor: None,
        });
    }
    Ok(Dataset {
        samples,
        provenance: Provenance::Synthetic,
    })
}

/// True anomaly from eccentric anomaly, perihelion at zero:
/// tan(theta/2) = sqrt((1+e)/(1-e)) * tan(E/2).
fn true_from_eccentric(e_anom: f64, ecc: f64) -> f64 {
    let ratio = ((1.0 + ecc) / (1.0 - ecc)).sqrt();
    2.0 * (ratio * (e_anom / 2.0).tan()).atan()
}

/// Feature expansion. Observational bias substitutes the known-angle
/// transforms cos(theta), sin(theta) for the raw angle.
pub fn featurize(dataset: &Dataset, bias: BiasConfig) -> FeatureMatrix {
    let thetas = dataset.thetas();
    let target = dataset.radii();
    if bias.observational {
        FeatureMatrix {
            names: vec!["cos_theta".into(), "sin_theta".into()],
            columns: vec![
                thetas.iter().map(|t| t.cos()).collect(),
                thetas.iter().map(|t| t.sin()).collect(),
            ],
            target,
        }
    } else {
        FeatureMatrix {
            names: vec!["theta".into()],
            columns: vec![thetas],
            target,
        }
    }
}
