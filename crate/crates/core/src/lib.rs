//! Numerical engine for discrete-time coined quantum walks on Z^d:
//! direct-lattice evolution, exact momentum-space return amplitudes,
//! stationary-phase diagnostics, and Polya-number estimation.

pub mod coin;
pub mod eig;
pub mod error;
pub mod fourier;
pub mod recurrence;
pub mod series;
pub mod spectral;
pub mod walk;

pub type C64 = num_complex::Complex<f64>;

pub use error::{Error, Result};
pub use series::{ReturnSeries, SeriesMethod};
pub use walk::{CoinOperator, ShiftSet, WalkSpec, WalkState};
