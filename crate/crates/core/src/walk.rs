//! Exact direct-lattice representation of a coined quantum walk.
//!
//! One step applies the coin to every occupied site and then moves coin
//! component `i` by the shift vector `e_i`. Amplitudes are kept in a sparse
//! map keyed by integer lattice coordinates and are never pruned, so this
//! module serves as the brute-force oracle for the momentum-space engine.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::{ReturnSeries, SeriesMethod};
use crate::C64;

pub type Position = Vec<i64>;

const UNITARITY_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;

/// The set of lattice displacements, one per coin basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet {
    dimension: usize,
    vectors: Vec<Position>,
}

impl ShiftSet {
    /// Builds a shift set from explicit integer vectors, enforcing the
    /// unbiasedness condition sum_i e_i = 0.
    pub fn new(dimension: usize, vectors: Vec<Position>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidShiftSet {
                context: "dimension must be positive".into(),
            });
        }
        if vectors.len() < 2 {
            return Err(Error::InvalidShiftSet {
                context: format!("need at least 2 shift vectors, got {}", vectors.len()),
            });
        }
        for v in &vectors {
            if v.len() != dimension {
                return Err(Error::InvalidShiftSet {
                    context: format!("vector {:?} does not have dimension {}", v, dimension),
                });
            }
        }
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                if vectors[i] == vectors[j] {
                    return Err(Error::InvalidShiftSet {
                        context: format!("duplicate shift vector {:?}", vectors[i]),
                    });
                }
            }
        }
        let mut total = vec![0i64; dimension];
        for v in &vectors {
            for (axis, x) in v.iter().enumerate() {
                total[axis] += x;
            }
        }
        if total.iter().any(|&x| x != 0) {
            return Err(Error::InvalidShiftSet {
                context: format!("shift vectors sum to {:?}, not zero", total),
            });
        }
        Ok(ShiftSet { dimension, vectors })
    }

    /// Diagonal topology: c = 2^d vectors with all entries +-1, enumerated in
    /// binary order with +1 first, the first coordinate being the most
    /// significant digit. In 2-D: (+1,+1), (+1,-1), (-1,+1), (-1,-1).
    pub fn diagonal(dimension: usize) -> Self {
        assert!((1..32).contains(&dimension));
        let c = 1usize << dimension;
        let vectors = (0..c)
            .map(|i| {
                (0..dimension)
                    .map(|axis| {
                        let bit = (i >> (dimension - 1 - axis)) & 1;
                        if bit == 0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            })
            .collect();
        ShiftSet { dimension, vectors }
    }

    /// Axial topology: c = 2d unit steps, ordered (+x1, -x1, +x2, -x2, ...).
    pub fn axial(dimension: usize) -> Self {
        assert!(dimension >= 1);
        let mut vectors = Vec::with_capacity(2 * dimension);
        for axis in 0..dimension {
            for sign in [1i64, -1] {
                let mut v = vec![0i64; dimension];
                v[axis] = sign;
                vectors.push(v);
            }
        }
        ShiftSet { dimension, vectors }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of shift vectors = coin dimension c.
    pub fn coin_dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Position] {
        &self.vectors
    }

    /// max_{j,axis} |e_{j,axis}|, the per-step support growth rate.
    pub fn max_step(&self) -> i64 {
        self.vectors
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// A c x c unitary coin.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinOperator {
    matrix: DMatrix<C64>,
}

impl CoinOperator {
    /// Validates unitarity (C†C = I entrywise to 1e-12).
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: format!("coin matrix is {}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARITY_TOL {
            return Err(Error::NonUnitaryCoin { deviation });
        }
        Ok(CoinOperator { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// True iff every |C_ij| equals 1/sqrt(c) to 1e-12.
    pub fn is_unbiased(&self) -> bool {
        let target = 1.0 / (self.size() as f64).sqrt();
        self.matrix
            .iter()
            .all(|z| (z.norm() - target).abs() < 1e-12)
    }
}

/// Max entrywise deviation of C†C from the identity.
pub fn unitarity_deviation(matrix: &DMatrix<C64>) -> f64 {
    let n = matrix.nrows();
    let gram = matrix.adjoint() * matrix;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            worst = worst.max((gram[(i, j)] - expected).norm());
        }
    }
    worst
}

/// The full definition of one walk: topology, coin, and the coin state the
/// walker starts with at the origin.
#[derive(Debug, Clone)]
pub struct WalkSpec {
    shifts: ShiftSet,
    coin: CoinOperator,
    initial_coin_state: DVector<C64>,
    label: String,
}

impl WalkSpec {
    pub fn new(
        shifts: ShiftSet,
        coin: CoinOperator,
        initial_coin_state: DVector<C64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if coin.size() != shifts.coin_dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "coin size {} != number of shift vectors {}",
                    coin.size(),
                    shifts.coin_dim()
                ),
            });
        }
        if initial_coin_state.len() != coin.size() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "initial coin state has {} components, coin size is {}",
                    initial_coin_state.len(),
                    coin.size()
                ),
            });
        }
        let norm = initial_coin_state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::UnnormalizedInitialState { norm });
        }
        Ok(WalkSpec {
            shifts,
            coin,
            initial_coin_state,
            label: label.into(),
        })
    }

    pub fn shifts(&self) -> &ShiftSet {
        &self.shifts
    }

    pub fn coin(&self) -> &CoinOperator {
        &self.coin
    }

    pub fn initial_coin_state(&self) -> &DVector<C64> {
        &self.initial_coin_state
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.shifts.dimension()
    }

    pub fn coin_dim(&self) -> usize {
        self.coin.size()
    }

    /// The state at t = 0: the initial coin state localized at the origin.
    pub fn initial_state(&self) -> WalkState {
        let origin = vec![0i64; self.dimension()];
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(origin, self.initial_coin_state.clone());
        WalkState {
            time: 0,
            amplitudes,
        }
    }

    /// States at t = 0..=t_max.
    pub fn evolve(&self, t_max: usize) -> Result<Vec<WalkState>> {
        let mut out = Vec::with_capacity(t_max + 1);
        self.evolve_visit(t_max, |s| out.push(s.clone()))?;
        Ok(out)
    }

    /// Streaming variant of [`WalkSpec::evolve`]; the visitor sees each state
    /// exactly once, in time order.
    pub fn evolve_visit<F: FnMut(&WalkState)>(&self, t_max: usize, mut visit: F) -> Result<()> {
        let mut state = self.initial_state();
        visit(&state);
        for _ in 0..t_max {
            state = state.step(self)?;
            visit(&state);
        }
        Ok(())
    }

    /// p_o(t) for t = 0..=t_max via direct evolution.
    pub fn return_series_direct(&self, t_max: usize) -> Result<ReturnSeries> {
        let mut p = Vec::with_capacity(t_max + 1);
        self.evolve_visit(t_max, |s| p.push(s.return_probability()))?;
        Ok(ReturnSeries {
            p,
            method: SeriesMethod::Direct,
            grid: None,
            label: self.label.clone(),
            exact: true,
        })
    }
}

/// Sparse snapshot of the walker at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    time: usize,
    amplitudes: BTreeMap<Position, DVector<C64>>,
}

impl WalkState {
    /// Builds a state from raw amplitudes (primarily for superposition tests).
    pub fn from_amplitudes(time: usize, amplitudes: BTreeMap<Position, DVector<C64>>) -> Self {
        WalkState { time, amplitudes }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn amplitudes(&self) -> &BTreeMap<Position, DVector<C64>> {
        &self.amplitudes
    }

    pub fn amplitude(&self, position: &[i64]) -> Option<&DVector<C64>> {
        self.amplitudes.get(position)
    }

    /// Applies U = S (I ⊗ C): coin first, then the conditional shift.
    pub fn step(&self, spec: &WalkSpec) -> Result<WalkState> {
        let c = spec.coin_dim();
        let d = spec.dimension();
        let coin = spec.coin().matrix();
        let shifts = spec.shifts().vectors();
        let mut next: BTreeMap<Position, DVector<C64>> = BTreeMap::new();
        for (pos, amp) in &self.amplitudes {
            if amp.len() != c || pos.len() != d {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "state entry at {:?} has {} components, spec wants c={} d={}",
                        pos,
                        amp.len(),
                        c,
                        d
                    ),
                });
            }
            let mixed = coin * amp;
            for (i, shift) in shifts.iter().enumerate() {
                let mut target = pos.clone();
                for (axis, e) in shift.iter().enumerate() {
                    target[axis] += e;
                }
                // Each (target, i) slot has a unique source, so this is an
                // assignment, never an accumulation.
                next.entry(target).or_insert_with(|| DVector::zeros(c))[i] = mixed[i];
            }
        }
        Ok(WalkState {
            time: self.time + 1,
            amplitudes: next,
        })
    }

    /// ||psi(0, t)||^2.
    pub fn return_probability(&self) -> f64 {
        let origin: Position = self
            .amplitudes
            .keys()
            .next()
            .map(|k| vec![0i64; k.len()])
            .unwrap_or_default();
        self.amplitudes
            .get(&origin)
            .map(|a| a.norm_squared())
            .unwrap_or(0.0)
    }

    /// Total probability, summed in deterministic key order.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_squared()).sum()
    }
}
