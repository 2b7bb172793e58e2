//! Experiment configuration: JSON schema and resolution into a WalkSpec.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use qwalk_core::coin;
use qwalk_core::walk::{CoinOperator, ShiftSet, WalkSpec};
use qwalk_core::C64;

use crate::CliError;

fn default_label() -> String {
    "walk".to_string()
}

fn default_spectral_grid() -> usize {
    128
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub dimension: usize,
    pub topology: Topology,
    pub coin: CoinConfig,
    pub initial_state: InitialState,
    pub steps: usize,
    #[serde(default)]
    pub grid: GridSpec,
    /// Grid used for spectral analysis; even sizes keep the saddle lines of
    /// the built-in walks on grid points.
    #[serde(default = "default_spectral_grid")]
    pub spectral_grid: usize,
    #[serde(default)]
    pub engine: Engine,
    /// Allow momentum grids below the exactness bound.
    #[serde(default)]
    pub approximate: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub records: usize,
    /// 0 means automatic.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[serde(rename = "diagonal_2c_pow_d", alias = "diagonal")]
    Diagonal2cPowD,
    #[serde(rename = "axial_2d", alias = "axial")]
    Axial2d,
    Explicit(Vec<Vec<i64>>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinConfig {
    OneD { alpha: f64, beta: f64 },
    Tensor(Vec<CoinConfig>),
    Grover,
    Fourier,
    MatrixFile(PathBuf),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Basis(usize),
    GroverExceptional,
    FourierFamily { a: [f64; 2], b: [f64; 2] },
    Vector(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase", untagged)]
pub enum GridSpec {
    Named(GridAuto),
    Points(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAuto {
    Auto,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Named(GridAuto::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Direct,
    #[default]
    Fourier,
    Both,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let raw = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {}", path.display(), e)))?;
        let config: ExperimentConfig = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Config(format!("config {}: {}", path.display(), e)))?;
        config.validate()?;
        Ok((config, raw))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.dimension == 0 {
            return Err(CliError::Config("dimension: must be positive".into()));
        }
        if self.spectral_grid < 2 {
            return Err(CliError::Config("spectral_grid: must be at least 2".into()));
        }
        if let GridSpec::Points(0) = self.grid {
            return Err(CliError::Config(
                "grid: must be positive or \"auto\"".into(),
            ));
        }
        Ok(())
    }

    pub fn shift_set(&self) -> Result<ShiftSet, CliError> {
        match &self.topology {
            Topology::Diagonal2cPowD => Ok(ShiftSet::diagonal(self.dimension)),
            Topology::Axial2d => Ok(ShiftSet::axial(self.dimension)),
            Topology::Explicit(vectors) => ShiftSet::new(self.dimension, vectors.clone())
                .map_err(|e| CliError::Config(format!("topology: {}", e))),
        }
    }

    pub fn coin_operator(&self) -> Result<CoinOperator, CliError> {
        resolve_coin(&self.coin)
    }

    pub fn initial_state_vector(&self, coin_dim: usize) -> Result<DVector<C64>, CliError> {
        let state = match &self.initial_state {
            InitialState::Basis(i) => {
                if *i >= coin_dim {
                    return Err(CliError::Config(format!(
                        "initial_state: basis index {} out of range for c = {}",
                        i, coin_dim
                    )));
                }
                let mut v = DVector::zeros(coin_dim);
                v[*i] = C64::new(1.0, 0.0);
                v
            }
            InitialState::GroverExceptional => coin::state_grover_exceptional(),
            InitialState::FourierFamily { a, b } => {
                coin::state_fourier_family(C64::new(a[0], a[1]), C64::new(b[0], b[1]))
                    .map_err(CliError::Domain)?
            }
            InitialState::Vector(entries) => DVector::from_iterator(
                entries.len(),
                entries.iter().map(|[re, im]| C64::new(*re, *im)),
            ),
        };
        Ok(state)
    }

    pub fn walk_spec(&self) -> Result<WalkSpec, CliError> {
        let shifts = self.shift_set()?;
        let coin = self.coin_operator()?;
        let state = self.initial_state_vector(coin.size())?;
        WalkSpec::new(shifts, coin, state, self.label.clone()).map_err(CliError::Domain)
    }

    /// Momentum grid size for a series of the configured length.
    pub fn series_grid(&self, spec: &WalkSpec) -> usize {
        match self.grid {
            GridSpec::Named(GridAuto::Auto) => {
                qwalk_core::fourier::nyquist_points(spec, self.steps)
            }
            GridSpec::Points(n) => n,
        }
    }

    /// True when the initial state is the Fourier family, whose Polya values
    /// have no published reference.
    pub fn is_fourier_family_state(&self) -> bool {
        matches!(self.initial_state, InitialState::FourierFamily { .. })
    }
}

fn resolve_coin(config: &CoinConfig) -> Result<CoinOperator, CliError> {
    match config {
        CoinConfig::OneD { alpha, beta } => Ok(coin::coin_1d(*alpha, *beta)),
        CoinConfig::Tensor(factors) => {
            let resolved = factors
                .iter()
                .map(resolve_coin)
                .collect::<Result<Vec<_>, _>>()?;
            coin::coin_tensor(&resolved).map_err(CliError::Domain)
        }
        CoinConfig::Grover => Ok(coin::coin_grover_2d()),
        CoinConfig::Fourier => Ok(coin::coin_fourier_2d()),
        CoinConfig::MatrixFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Io(format!("cannot read coin matrix {}: {}", path.display(), e))
            })?;
            let matrix = parse_matrix(&text)
                .map_err(|e| CliError::Config(format!("coin matrix {}: {}", path.display(), e)))?;
            CoinOperator::new(matrix).map_err(CliError::Domain)
        }
    }
}

/// Plain-text complex matrix: one row per line, entries whitespace
/// separated, each either "re", "re+imj" / "re-imj", or "[re,im]".
pub fn parse_matrix(text: &str) -> Result<DMatrix<C64>, String> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            row.push(
                parse_complex(token)
                    .ok_or_else(|| format!("line {}: bad entry '{}'", line_no + 1, token))?,
            );
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no rows".into());
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(format!(
            "matrix must be square, got row lengths {:?}",
            rows.iter().map(|r| r.len()).collect::<Vec<_>>()
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_complex(token: &str) -> Option<C64> {
    if let Some(inner) = token.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        let (re, im) = inner.split_once(',')?;
        return Some(C64::new(re.trim().parse().ok()?, im.trim().parse().ok()?));
    }
    if let Some(body) = token.strip_suffix('j').or_else(|| token.strip_suffix('J')) {
        // Split re and im at the last +/- that is not an exponent sign and
        // not the leading sign.
        let bytes = body.as_bytes();
        for pos in (1..bytes.len()).rev() {
            let ch = bytes[pos] as char;
            if (ch == '+' || ch == '-') && !matches!(bytes[pos - 1] as char, 'e' | 'E') {
                let re: f64 = body[..pos].parse().ok()?;
                let im_str = &body[pos..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().ok()?
                };
                return Some(C64::new(re, im));
            }
        }
        // Pure imaginary.
        let im: f64 = if body.is_empty() || body == "+" {
            1.0
        } else if body == "-" {
            -1.0
        } else {
            body.parse().ok()?
        };
        return Some(C64::new(0.0, im));
    }
    token.parse().ok().map(|re| C64::new(re, 0.0))
}
