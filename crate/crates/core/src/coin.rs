//! Constructors for the built-in coin families and their distinguished
//! initial states. All built-ins come from exact closed forms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::walk::CoinOperator;
use crate::C64;

/// A coin described by family and parameters rather than raw entries.
#[derive(Debug, Clone)]
pub enum CoinFamily {
    /// The general unbiased 1-D coin C(alpha, beta).
    OneD {
        alpha: f64,
        beta: f64,
    },
    /// Kronecker product of factor coins, first factor = first spatial axis.
    TensorProduct(Vec<CoinFamily>),
    /// The 4x4 Grover coin (2-D diagonal topology).
    Grover,
    /// The 4x4 Fourier coin (2-D diagonal topology).
    Fourier,
    Explicit(DMatrix<C64>),
}

impl CoinFamily {
    pub fn materialize(&self) -> Result<CoinOperator> {
        match self {
            CoinFamily::OneD { alpha, beta } => Ok(coin_1d(*alpha, *beta)),
            CoinFamily::TensorProduct(factors) => {
                let mats = factors
                    .iter()
                    .map(|f| f.materialize())
                    .collect::<Result<Vec<_>>>()?;
                coin_tensor(&mats)
            }
            CoinFamily::Grover => Ok(coin_grover_2d()),
            CoinFamily::Fourier => Ok(coin_fourier_2d()),
            CoinFamily::Explicit(m) => CoinOperator::new(m.clone()),
        }
    }
}

/// C(alpha, beta) = 1/sqrt(2) [[e^{ia}, e^{-ib}], [e^{ib}, -e^{-ia}]].
pub fn coin_1d(alpha: f64, beta: f64) -> CoinOperator {
    let f = 1.0 / 2.0_f64.sqrt();
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::from_polar(f, alpha),
            C64::from_polar(f, -beta),
            C64::from_polar(f, beta),
            -C64::from_polar(f, -alpha),
        ],
    );
    CoinOperator::new(m).expect("C(alpha,beta) is unitary by construction")
}

/// Kronecker product of coins; the first factor acts on the first spatial
/// dimension, matching the tensor factorization of the shift phases.
pub fn coin_tensor(factors: &[CoinOperator]) -> Result<CoinOperator> {
    if factors.len() < 2 {
        return Err(Error::DimensionMismatch {
            context: format!("tensor coin needs >= 2 factors, got {}", factors.len()),
        });
    }
    let mut m = factors[0].matrix().clone();
    for f in &factors[1..] {
        m = m.kronecker(f.matrix());
    }
    CoinOperator::new(m)
}

/// The Grover coin: G_mn = 1/2 - delta_mn.
pub fn coin_grover_2d() -> CoinOperator {
    let m = DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            C64::new(-0.5, 0.0)
        } else {
            C64::new(0.5, 0.0)
        }
    });
    CoinOperator::new(m).expect("Grover coin is unitary")
}

/// The Fourier coin: F_mn = 1/2 i^{(m-1)(n-1)}, m, n = 1..4.
pub fn coin_fourier_2d() -> CoinOperator {
    let m = DMatrix::from_fn(4, 4, |i, j| {
        // Exact quarter-turn powers, no trig roundoff.
        match (i * j) % 4 {
            0 => C64::new(0.5, 0.0),
            1 => C64::new(0.0, 0.5),
            2 => C64::new(-0.5, 0.0),
            _ => C64::new(0.0, -0.5),
        }
    });
    CoinOperator::new(m).expect("Fourier coin is unitary")
}

/// True iff every matrix element has modulus 1/sqrt(c) to 1e-12.
pub fn check_unbiased(coin: &CoinOperator) -> bool {
    coin.is_unbiased()
}

/// psi_G = (1, -1, -1, 1)^T / 2, the unique state for which the 2-D Grover
/// walk does not localise.
pub fn state_grover_exceptional() -> DVector<C64> {
    DVector::from_vec(vec![
        C64::new(0.5, 0.0),
        C64::new(-0.5, 0.0),
        C64::new(-0.5, 0.0),
        C64::new(0.5, 0.0),
    ])
}

/// psi_F(a, b) = (a, b, a, -b)^T with 2|a|^2 + 2|b|^2 = 1 enforced.
pub fn state_fourier_family(a: C64, b: C64) -> Result<DVector<C64>> {
    let got = 2.0 * a.norm_sqr() + 2.0 * b.norm_sqr();
    if (got - 1.0).abs() > 1e-12 {
        return Err(Error::UnnormalizedFamilyParameters { got });
    }
    Ok(DVector::from_vec(vec![a, b, a, -b]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_1d_at_zero_phases_is_hadamard() {
        let c = coin_1d(0.0, 0.0);
        let f = 1.0 / 2.0_f64.sqrt();
        let m = c.matrix();
        assert!((m[(0, 0)] - C64::new(f, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - C64::new(f, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - C64::new(f, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - C64::new(-f, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coin_1d_quarter_phase() {
        // Direct substitution at alpha = pi/2, beta = 0.
        let c = coin_1d(std::f64::consts::FRAC_PI_2, 0.0);
        let f = 1.0 / 2.0_f64.sqrt();
        let m = c.matrix();
        assert!((m[(0, 0)] - C64::new(0.0, f)).norm() < 1e-15);
        assert!((m[(0, 1)] - C64::new(f, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - C64::new(f, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - C64::new(0.0, f)).norm() < 1e-15);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert!((det.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coin_1d_is_unbiased_for_random_phases() {
        for i in 0..16 {
            let alpha = 0.37 * i as f64 - 2.0;
            let beta = -1.3 + 0.59 * i as f64;
            let c = coin_1d(alpha, beta);
            assert!(check_unbiased(&c));
            assert!(crate::walk::unitarity_deviation(c.matrix()) < 1e-12);
        }
    }

    #[test]
    fn tensor_hadamard_entries() {
        let h = coin_1d(0.0, 0.0);
        let hh = coin_tensor(&[h.clone(), h]).unwrap();
        assert_eq!(hh.size(), 4);
        // Kronecker expansion of H (x) H has entries +-1/2 with sign
        // (-1)^{popcount(i & j)} in binary index order.
        for i in 0..4usize {
            for j in 0..4usize {
                let sign = if (i & j).count_ones() % 2 == 0 {
                    0.5
                } else {
                    -0.5
                };
                assert!((hh.matrix()[(i, j)] - C64::new(sign, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let id = CoinOperator::new(DMatrix::identity(2, 2)).unwrap();
        let t = coin_tensor(&[id.clone(), id]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((t.matrix()[(i, j)] - C64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_preserves_unitarity() {
        let a = coin_1d(0.3, -1.1);
        let b = coin_1d(-0.9, 2.4);
        let t = coin_tensor(&[a, b]).unwrap();
        assert!(crate::walk::unitarity_deviation(t.matrix()) < 1e-12);
        assert!(t.is_unbiased());
    }

    #[test]
    fn grover_entries_and_unitarity() {
        let g = coin_grover_2d();
        assert_eq!(g.matrix()[(0, 0)], C64::new(-0.5, 0.0));
        assert_eq!(g.matrix()[(0, 1)], C64::new(0.5, 0.0));
        assert!(crate::walk::unitarity_deviation(g.matrix()) < 1e-15);
        assert!(g.is_unbiased());
    }

    #[test]
    fn fourier_entries_and_unitarity() {
        let f = coin_fourier_2d();
        for n in 0..4 {
            assert_eq!(f.matrix()[(0, n)], C64::new(0.5, 0.0));
        }
        assert_eq!(f.matrix()[(1, 1)], C64::new(0.0, 0.5));
        assert!(crate::walk::unitarity_deviation(f.matrix()) < 1e-15);
        assert!(f.is_unbiased());
    }

    #[test]
    fn identity_is_biased() {
        let id = CoinOperator::new(DMatrix::identity(2, 2)).unwrap();
        assert!(!check_unbiased(&id));
    }

    #[test]
    fn grover_exceptional_state_normalized() {
        let psi = state_grover_exceptional();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_family_constraint() {
        let psi = state_fourier_family(C64::new(0.5, 0.0), C64::new(0.5, 0.0)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        assert_eq!(psi[3], C64::new(-0.5, 0.0));
        let bad = state_fourier_family(C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        assert!(matches!(
            bad,
            Err(Error::UnnormalizedFamilyParameters { .. })
        ));
    }

    #[test]
    fn tensor_family_matches_direct_product() {
        let fam = CoinFamily::TensorProduct(vec![
            CoinFamily::OneD {
                alpha: 0.7,
                beta: -0.2,
            },
            CoinFamily::OneD {
                alpha: -1.9,
                beta: 0.4,
            },
        ]);
        let via_family = fam.materialize().unwrap();
        let direct = coin_tensor(&[coin_1d(0.7, -0.2), coin_1d(-1.9, 0.4)]).unwrap();
        assert_eq!(via_family.matrix(), direct.matrix());
    }
}
