//! Eigendecomposition of small dense unitary matrices.
//!
//! A unitary U is normal, so it is unitarily diagonalizable with eigenvalues
//! on the unit circle. We never run a general nonsymmetric eigensolver;
//! instead we diagonalize the Hermitian part A = (U + U†)/2, then resolve
//! clusters with the anti-Hermitian part B = (U - U†)/2i, and finally split
//! any remaining short arc of eigenphases with Im(e^{-i w0} U), which is
//! first-order in the phase along the arc. Every stage is a Hermitian
//! eigenproblem, so the returned basis is orthonormal by construction and
//! degenerate eigenspaces (flat bands) are handled without special cases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Gap below which two stage-1/stage-2 eigenvalues are treated as one
/// cluster and re-resolved by the next stage.
const CLUSTER_GAP: f64 = 1e-4;

/// Residual ||U v - lambda v|| above which the decomposition is rejected.
const RESIDUAL_TOL: f64 = 1e-8;

/// Spectral decomposition of a unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    /// Eigenphases w_j in (-pi, pi], ascending.
    pub phases: Vec<f64>,
    /// Eigenvalues lambda_j = e^{i w_j} (Rayleigh quotients, |lambda| = 1).
    pub values: Vec<C64>,
    /// Orthonormal eigenvectors, column j pairs with phases[j].
    pub vectors: DMatrix<C64>,
}

impl UnitaryEigen {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Largest ||U v_j - lambda_j v_j|| over all eigenpairs.
    pub fn residual(&self, u: &DMatrix<C64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let v = self.vectors.column(j);
            let r = u * v - v.scale_complex(self.values[j]);
            worst = worst.max(r.norm());
        }
        worst
    }
}

trait ScaleComplex {
    type Out;
    fn scale_complex(&self, z: C64) -> Self::Out;
}

impl<'a> ScaleComplex for nalgebra::DVectorView<'a, C64> {
    type Out = DVector<C64>;
    fn scale_complex(&self, z: C64) -> DVector<C64> {
        DVector::from_iterator(self.len(), self.iter().map(|x| x * z))
    }
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// Hermitian part (U + U†)/2.
fn real_part(u: &DMatrix<C64>) -> DMatrix<C64> {
    hermitize(u.clone())
}

/// (U - U†)/(2i), Hermitian for any U.
fn imag_part(u: &DMatrix<C64>) -> DMatrix<C64> {
    let half_i_inv = C64::new(0.0, -0.5);
    let m = (u - u.adjoint()) * half_i_inv;
    hermitize(m)
}

/// Eigendecompose a Hermitian matrix by cyclic complex Jacobi rotations,
/// eigenvalues ascending, orthonormal columns. Jacobi keeps residuals at
/// the machine level, which the downstream 1e-10 quadrature and spectral
/// invariants rely on; library QL iterations were measured around 1e-10.
fn eig_hermitian(mut a: DMatrix<C64>, max_sweeps: usize) -> Option<(Vec<f64>, DMatrix<C64>)> {
    let n = a.nrows();
    let mut v: DMatrix<C64> = DMatrix::identity(n, n);
    if n == 1 {
        return Some((vec![a[(0, 0)].re], v));
    }
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;

    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() * std::f64::consts::SQRT_2 <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-3 * tol / n as f64 {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_ph = phase * s; // s e^{i phi}
                let s_ph_conj = s_ph.conj();

                // A <- R† A R with R_pp = c, R_pq = s e^{i phi},
                // R_qp = -s e^{-i phi}, R_qq = c.
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c - aiq * s_ph_conj;
                    a[(i, q)] = aip * s_ph + aiq * c;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c - aqj * s_ph;
                    a[(q, j)] = apj * s_ph_conj + aqj * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * s_ph_conj;
                    v[(i, q)] = vip * s_ph + viq * c;
                }
            }
        }
    }
    if !converged {
        // One last check; a full sweep may have finished the job.
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() * std::f64::consts::SQRT_2 > tol * 10.0 {
            return None;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        a[(x, x)]
            .re
            .partial_cmp(&a[(y, y)].re)
            .unwrap()
            .then(x.cmp(&y))
    });
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &v.column(old));
    }
    Some((vals, vecs))
}

/// Cluster boundaries for a sorted value list: ranges of indices whose
/// consecutive gaps stay below CLUSTER_GAP.
fn clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..values.len() {
        if values[i] - values[i - 1] > CLUSTER_GAP {
            out.push((start, i));
            start = i;
        }
    }
    out.push((start, values.len()));
    out
}

/// Rotate the columns `range` of `basis` by the eigenvectors of the
/// restriction of the Hermitian matrix `h` to their span, and return the
/// restricted eigenvalues (ascending).
fn resolve_with(
    basis: &mut DMatrix<C64>,
    range: (usize, usize),
    h: &DMatrix<C64>,
) -> Option<Vec<f64>> {
    let (lo, hi) = range;
    let g = hi - lo;
    let sub = basis.columns(lo, g).into_owned();
    let restricted = hermitize(sub.adjoint() * h * &sub);
    let (vals, w) = eig_hermitian(restricted, 40)?;
    let rotated = &sub * &w;
    for j in 0..g {
        basis.set_column(lo + j, &rotated.column(j));
    }
    Some(vals)
}

/// Eigendecomposition of a unitary matrix, eigenpairs sorted by phase
/// ascending in (-pi, pi].
pub fn eig_unitary(u: &DMatrix<C64>) -> Result<UnitaryEigen> {
    let n = u.nrows();
    assert_eq!(n, u.ncols(), "matrix must be square");
    let fail = || Error::EigensolverFailure {
        k: Vec::new(),
        residual: f64::NAN,
    };
    let a = real_part(u);
    let b = imag_part(u);

    // Stage 1: diagonalize the Hermitian part; cos(w) clusters remain.
    let (avals, mut basis) = eig_hermitian(a, 40).ok_or_else(fail)?;

    for (lo, hi) in clusters(&avals) {
        if hi - lo < 2 {
            continue;
        }
        // Stage 2: split +-w arcs by the anti-Hermitian part.
        let bvals = resolve_with(&mut basis, (lo, hi), &b).ok_or_else(fail)?;
        let rel: Vec<(usize, usize)> = clusters(&bvals)
            .into_iter()
            .map(|(s, e)| (lo + s, lo + e))
            .collect();
        for (slo, shi) in rel {
            if shi - slo < 2 {
                continue;
            }
            // Stage 3: a short arc; sin(w - w0) separates phases to first
            // order around the arc center.
            let v0 = basis.column(slo);
            let lam0: C64 = (v0.adjoint() * u * v0)[(0, 0)];
            let w0 = lam0.arg();
            let rotated = u * C64::from_polar(1.0, -w0);
            let s_full = imag_part(&rotated);
            resolve_with(&mut basis, (slo, shi), &s_full).ok_or_else(fail)?;
        }
    }

    // Rayleigh quotients give the eigenvalues; sort by phase.
    let mut pairs: Vec<(f64, C64, usize)> = (0..n)
        .map(|j| {
            let v = basis.column(j);
            let lam: C64 = (v.adjoint() * u * v)[(0, 0)];
            let mut phase = lam.arg();
            if phase <= -std::f64::consts::PI + 1e-12 {
                phase += 2.0 * std::f64::consts::PI;
            }
            (phase, lam, j)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.2.cmp(&y.2)));

    let mut vectors = DMatrix::zeros(n, n);
    let mut phases = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (new, (phase, lam, old)) in pairs.into_iter().enumerate() {
        vectors.set_column(new, &basis.column(old));
        phases.push(phase);
        values.push(lam);
    }

    let out = UnitaryEigen {
        phases,
        values,
        vectors,
    };
    let residual = out.residual(u);
    if residual > RESIDUAL_TOL {
        return Err(Error::EigensolverFailure {
            k: Vec::new(),
            residual,
        });
    }
    Ok(out)
}
