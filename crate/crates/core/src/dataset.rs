//! Sample data: the built-in saturated-water table, CSV ingestion, the
//! train/validate split, dithering of the training targets and z-score
//! standardisation (including the exact polynomial coefficient map back to raw
//! coordinates).

use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Saturated liquid water between 273.15 K and 373.15 K:
/// `(T [K], density [kg/m^3], specific heat [kJ/kg K], conductivity [W/m K])`.
///
/// The second row is listed at 273 K in the source table and is kept verbatim.
const WATER_TABLE: [(f64, f64, f64, f64); 22] = [
    (273.15, 1000.0, 4.217, 0.569),
    (273.0, 1000.0, 4.211, 0.574),
    (280.0, 1000.0, 4.198, 0.582),
    (285.0, 1000.0, 4.189, 0.590),
    (290.0, 999.0, 4.184, 0.598),
    (295.0, 998.0, 4.181, 0.606),
    (300.0, 997.0, 4.179, 0.613),
    (305.0, 995.0, 4.178, 0.620),
    (310.0, 993.0, 4.178, 0.628),
    (315.0, 991.0, 4.179, 0.634),
    (320.0, 989.0, 4.180, 0.640),
    (325.0, 987.0, 4.182, 0.645),
    (330.0, 984.0, 4.184, 0.650),
    (335.0, 982.0, 4.186, 0.656),
    (340.0, 979.0, 4.188, 0.660),
    (345.0, 977.0, 4.191, 0.664),
    (350.0, 974.0, 4.195, 0.668),
    (355.0, 971.0, 4.199, 0.671),
    (360.0, 967.0, 4.203, 0.674),
    (365.0, 963.0, 4.209, 0.677),
    (370.0, 961.0, 4.214, 0.679),
    (373.15, 958.0, 4.217, 0.680),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaterProperty {
    Density,
    SpecificHeat,
    Conductivity,
}

impl WaterProperty {
    pub const ALL: [WaterProperty; 3] =
        [WaterProperty::Density, WaterProperty::SpecificHeat, WaterProperty::Conductivity];

    /// Short column / display name.
    pub fn symbol(self) -> &'static str {
        match self {
            WaterProperty::Density => "rho",
            WaterProperty::SpecificHeat => "cp",
            WaterProperty::Conductivity => "k",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "density" | "rho" => Some(WaterProperty::Density),
            "specific_heat" | "specific-heat" | "cp" => Some(WaterProperty::SpecificHeat),
            "conductivity" | "k" => Some(WaterProperty::Conductivity),
            _ => None,
        }
    }
}

impl fmt::Display for WaterProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Original,
    Train,
    Validate,
    Dithered,
}

/// Non-empty ordered collection of finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<SamplePair>,
    label: Label,
}

impl Dataset {
    pub fn new(samples: Vec<SamplePair>, label: Label) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(row) = samples.iter().position(|s| !s.x.is_finite() || !s.y.is_finite()) {
            return Err(Error::NonFinite { what: "dataset", row });
        }
        Ok(Dataset { samples, label })
    }

    pub fn from_xy(x: &[f64], y: &[f64], label: Label) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        Self::new(x.iter().zip(y).map(|(&x, &y)| SamplePair { x, y }).collect(), label)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn samples(&self) -> &[SamplePair] {
        &self.samples
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.x)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.y)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// Rows at the given indices, in index order (repeats allowed).
    pub fn select(&self, indices: &[usize], label: Label) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples.get(i).copied().ok_or_else(|| {
                    Error::InvalidSplit(format!("index {i} out of range for {} rows", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, label)
    }

    /// Write as a two-column CSV with a header row.
    pub fn write_csv(&self, path: &Path, x_column: &str, y_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([x_column, y_column]).map_err(|e| csv_error(path, e))?;
        for s in &self.samples {
            w.write_record([s.x.to_string(), s.y.to_string()]).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sample mean and unbiased variance; variance is 0 for a single value.
pub(crate) fn mean_var(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// The 22 liquid-water rows for one property, in table order.
pub fn load_builtin_water(property: WaterProperty) -> Dataset {
    let samples = WATER_TABLE
        .iter()
        .map(|&(t, rho, cp, k)| SamplePair {
            x: t,
            y: match property {
                WaterProperty::Density => rho,
                WaterProperty::SpecificHeat => cp,
                WaterProperty::Conductivity => k,
            },
        })
        .collect();
    Dataset { samples, label: Label::Original }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), message: e.to_string() }
}

/// Load two named columns from a headed, comma-separated file.
///
/// Row numbers in errors count data rows from 1 (the header is row 0).
pub fn load_csv(path: &Path, x_column: &str, y_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (xi, yi) = (column(x_column)?, column(y_column)?);

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::BadCell { row, column: name.to_string(), value: raw.to_string() }),
            }
        };
        samples.push(SamplePair { x: cell(xi, x_column)?, y: cell(yi, y_column)? });
    }
    Dataset::new(samples, Label::Original)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Train rows drawn without replacement; validation rows drawn with
    /// replacement from the rows left over.
    WithoutReplacement,
    /// Both sets bootstrapped from the full data.
    WithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub m1: usize,
    pub m2: usize,
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self, m0: usize) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 {
            return Err(Error::InvalidSplit("m1 and m2 must be positive".into()));
        }
        if self.mode == SplitMode::WithoutReplacement {
            if self.m1 > m0 {
                return Err(Error::InvalidSplit(format!(
                    "m1 = {} exceeds {m0} rows in without_replacement mode",
                    self.m1
                )));
            }
            if self.m1 == m0 {
                return Err(Error::InvalidSplit(
                    "no rows left for validation in without_replacement mode".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub validate: Dataset,
    pub train_indices: Vec<usize>,
    pub validate_indices: Vec<usize>,
}

/// Deterministic split of `data` into training and validation sets.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let m0 = data.len();
    spec.validate(m0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (train_indices, validate_indices) = match spec.mode {
        SplitMode::WithoutReplacement => {
            let train = index::sample(&mut rng, m0, spec.m1).into_vec();
            let mut rest: Vec<usize> = (0..m0).filter(|i| !train.contains(i)).collect();
            rest.sort_unstable();
            let validate: Vec<usize> = (0..spec.m2).map(|_| rest[rng.random_range(0..rest.len())]).collect();
            (train, validate)
        }
        SplitMode::WithReplacement => {
            let train: Vec<usize> = (0..spec.m1).map(|_| rng.random_range(0..m0)).collect();
            let validate: Vec<usize> = (0..spec.m2).map(|_| rng.random_range(0..m0)).collect();
            (train, validate)
        }
    };
    Ok(Split {
        train: data.select(&train_indices, Label::Train)?,
        validate: data.select(&validate_indices, Label::Validate)?,
        train_indices,
        validate_indices,
    })
}

/// How a noise level maps onto the Gaussian scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `sigma^2 = level * Var(y)`.
    #[default]
    Variance,
    /// `sigma = level * std(y)`.
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub scale: NoiseScale,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        NoiseSpec { level, seed, scale: NoiseScale::Variance }
    }

    /// Standard deviation of the injected noise for targets with sample variance `var_y`.
    pub fn sigma(&self, var_y: f64) -> f64 {
        match self.scale {
            NoiseScale::Variance => (self.level * var_y).sqrt(),
            NoiseScale::StdDev => self.level * var_y.sqrt(),
        }
    }
}

/// Dithered copy of the training set: same `x`, targets plus i.i.d. Gaussian
/// noise drawn in row order from a ChaCha8 stream seeded by `noise.seed`.
pub fn dither(train: &Dataset, noise: &NoiseSpec) -> Result<Dataset> {
    if !(noise.level >= 0.0 && noise.level.is_finite()) {
        return Err(Error::config("noise_level", format!("must be finite and >= 0, got {}", noise.level)));
    }
    if noise.level == 0.0 {
        return Ok(train.clone().with_label(Label::Dithered));
    }
    let (_, var_y) = mean_var(train.ys());
    let sigma = noise.sigma(var_y);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config("noise_level", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let samples = train
        .samples()
        .iter()
        .map(|s| SamplePair { x: s.x, y: s.y + normal.sample(&mut rng) })
        .collect();
    Dataset::new(samples, Label::Dithered)
}

/// Z-score transform of `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_y: f64,
    pub std_y: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::ZeroVariance("x (fewer than 2 samples)"));
        }
        let (mean_x, var_x) = mean_var(data.xs());
        let (mean_y, var_y) = mean_var(data.ys());
        if !(var_x > 0.0) {
            return Err(Error::ZeroVariance("x"));
        }
        if !(var_y > 0.0) {
            return Err(Error::ZeroVariance("y"));
        }
        Ok(Standardizer { mean_x, std_x: var_x.sqrt(), mean_y, std_y: var_y.sqrt() })
    }

    pub fn identity() -> Self {
        Standardizer { mean_x: 0.0, std_x: 1.0, mean_y: 0.0, std_y: 1.0 }
    }

    pub fn x_to_std(&self, x: f64) -> f64 {
        (x - self.mean_x) / self.std_x
    }

    pub fn y_to_std(&self, y: f64) -> f64 {
        (y - self.mean_y) / self.std_y
    }

    pub fn x_to_raw(&self, xs: f64) -> f64 {
        xs * self.std_x + self.mean_x
    }

    pub fn y_to_raw(&self, ys: f64) -> f64 {
        ys * self.std_y + self.mean_y
    }

    /// Factor turning a squared-error loss in standardised units into raw units.
    pub fn loss_scale(&self) -> f64 {
        self.std_y * self.std_y
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        self.map(data, |s| SamplePair { x: self.x_to_std(s.x), y: self.y_to_std(s.y) })
    }

    pub fn invert(&self, data: &Dataset) -> Dataset {
        self.map(data, |s| SamplePair { x: self.x_to_raw(s.x), y: self.y_to_raw(s.y) })
    }

    fn map(&self, data: &Dataset, f: impl Fn(&SamplePair) -> SamplePair) -> Dataset {
        Dataset { samples: data.samples().iter().map(f).collect(), label: data.label() }
    }

    /// Linear part of the standardised-to-raw coefficient map: the raw
    /// coefficients of `std_y * sum_j phi_j ((x - mean_x) / std_x)^j`.
    ///
    /// Use this for parameter differences (e.g. a first-order correction).
    pub fn direction_to_raw(&self, phi: &DVector<f64>) -> DVector<f64> {
        let p = phi.len();
        let mut raw = DVector::zeros(p);
        for (j, &phi_j) in phi.iter().enumerate() {
            let scale = self.std_y * phi_j / self.std_x.powi(j as i32);
            for i in 0..=j {
                raw[i] += scale * binomial(j, i) * (-self.mean_x).powi((j - i) as i32);
            }
        }
        raw
    }

    /// Full affine map from standardised to raw polynomial coefficients.
    pub fn params_to_raw(&self, phi: &DVector<f64>) -> DVector<f64> {
        let mut raw = self.direction_to_raw(phi);
        if !raw.is_empty() {
            raw[0] += self.mean_y;
        }
        raw
    }

    /// Inverse of [`Standardizer::params_to_raw`].
    pub fn params_from_raw(&self, raw: &DVector<f64>) -> DVector<f64> {
        let p = raw.len();
        let mut phi = DVector::zeros(p);
        for (i, &c) in raw.iter().enumerate() {
            // x^i = (mean_x + std_x * xs)^i
            for j in 0..=i {
                phi[j] += c * binomial(i, j) * self.mean_x.powi((i - j) as i32) * self.std_x.powi(j as i32);
            }
        }
        if p > 0 {
            phi[0] -= self.mean_y;
        }
        phi / self.std_y
    }
}
