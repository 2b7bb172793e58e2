//! Momentum-space evolution on a uniform grid over (-pi, pi]^d.
//!
//! The return amplitude is the Brillouin-zone integral of the spectral
//! expansion of U~(k)^t applied to the initial coin state. Because the
//! walker's position support after t steps is finite, the integrand is a
//! trigonometric polynomial of degree t * max|e| per axis, so the uniform
//! Riemann sum over N >= 2 t max|e| + 1 points per axis reproduces the
//! integral exactly; no other quadrature is needed.
//!
//! Per-point work is embarrassingly parallel. The reduction over k-points
//! runs over fixed 8192-point chunks combined in chunk order, so results are
//! bit-identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::eig::eig_unitary;
use crate::error::{Error, Result};
use crate::series::{ReturnSeries, SeriesMethod};
use crate::walk::WalkSpec;
use crate::C64;

const CHUNK: usize = 8192;
/// Incremental phase factors are renormalized to the unit circle this often.
const RENORM_EVERY: usize = 1024;

/// k value on axis position `i` of an N-point grid: -pi + 2 pi (i+1) / N.
pub fn axis_value(n: usize, i: usize) -> f64 {
    -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i + 1) as f64 / n as f64
}

/// Smallest per-axis grid size for which the return-amplitude quadrature is
/// exact up to time `t_max`.
pub fn nyquist_points(spec: &WalkSpec, t_max: usize) -> usize {
    2 * t_max * spec.shifts().max_step() as usize + 1
}

fn total_points(n: usize, d: usize) -> Result<usize> {
    let mut total = 1usize;
    for _ in 0..d {
        total = total.checked_mul(n).ok_or(Error::DimensionMismatch {
            context: format!("momentum grid {}^{} overflows", n, d),
        })?;
    }
    Ok(total)
}

/// Decodes a flat grid index into per-axis indices, axis 0 most significant.
fn decode(flat: usize, d: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0usize; d];
    let mut rest = flat;
    for axis in (0..d).rev() {
        idx[axis] = rest % n;
        rest /= n;
    }
    idx
}

fn k_of_indices(indices: &[usize], n: usize) -> Vec<f64> {
    indices.iter().map(|&i| axis_value(n, i)).collect()
}

/// U~(k) = D(k) C with D_jj = e^{-i e_j . k}.
pub fn build_u_tilde(spec: &WalkSpec, k: &[f64]) -> DMatrix<C64> {
    let c = spec.coin_dim();
    let coin = spec.coin().matrix();
    let shifts = spec.shifts().vectors();
    DMatrix::from_fn(c, c, |i, j| {
        let dot: f64 = shifts[i]
            .iter()
            .zip(k.iter())
            .map(|(&e, &kk)| e as f64 * kk)
            .sum();
        C64::from_polar(1.0, -dot) * coin[(i, j)]
    })
}

/// Eigendecomposition of U~ at every grid point. Bands are ordered by
/// eigenphase ascending in (-pi, pi] independently at each point; no global
/// band continuation is attempted here.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    dimension: usize,
    points_per_axis: usize,
    coin_dim: usize,
    /// Eigenphases, [flat * c + band].
    phases: Vec<f64>,
    /// Projected weights f_j(k) = <v_j, psi0> v_j, [flat * c * c + band * c + row].
    weights: Vec<C64>,
    /// Eigenvectors, retained on request, same layout as `weights`.
    vectors: Option<Vec<C64>>,
    initial_state: DVector<C64>,
    spec: WalkSpec,
}

impl MomentumGrid {
    /// Decomposes U~(k) on an N^d grid. `retain_vectors` keeps the full
    /// eigenvector matrix at every point (spectral analysis needs it); the
    /// return-amplitude path only needs phases and weights.
    pub fn build(spec: &WalkSpec, points_per_axis: usize, retain_vectors: bool) -> Result<Self> {
        assert!(points_per_axis >= 1);
        let d = spec.dimension();
        let c = spec.coin_dim();
        let n = points_per_axis;
        let total = total_points(n, d)?;

        struct Part {
            phases: Vec<f64>,
            weights: Vec<C64>,
            vectors: Option<Vec<C64>>,
        }

        let chunks: Vec<(usize, usize)> = (0..total)
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK).min(total)))
            .collect();

        let parts: Vec<Part> = chunks
            .par_iter()
            .map(|&(start, end)| {
                let span = end - start;
                let mut part = Part {
                    phases: Vec::with_capacity(span * c),
                    weights: Vec::with_capacity(span * c * c),
                    vectors: retain_vectors.then(|| Vec::with_capacity(span * c * c)),
                };
                for flat in start..end {
                    let k = k_of_indices(&decode(flat, d, n), n);
                    let u = build_u_tilde(spec, &k);
                    let eig = eig_unitary(&u).map_err(|e| match e {
                        Error::EigensolverFailure { residual, .. } => Error::EigensolverFailure {
                            k: k.clone(),
                            residual,
                        },
                        other => other,
                    })?;
                    part.phases.extend_from_slice(&eig.phases);
                    for j in 0..c {
                        let v = eig.vectors.column(j);
                        let a: C64 = v
                            .iter()
                            .zip(spec.initial_coin_state().iter())
                            .map(|(vi, pi)| vi.conj() * pi)
                            .sum();
                        for i in 0..c {
                            part.weights.push(a * v[i]);
                        }
                    }
                    if let Some(vecs) = part.vectors.as_mut() {
                        for j in 0..c {
                            for i in 0..c {
                                vecs.push(eig.vectors[(i, j)]);
                            }
                        }
                    }
                }
                Ok(part)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut grid = MomentumGrid {
            dimension: d,
            points_per_axis: n,
            coin_dim: c,
            phases: Vec::with_capacity(total * c),
            weights: Vec::with_capacity(total * c * c),
            vectors: retain_vectors.then(|| Vec::with_capacity(total * c * c)),
            initial_state: spec.initial_coin_state().clone(),
            spec: spec.clone(),
        };
        for part in parts {
            grid.phases.extend_from_slice(&part.phases);
            grid.weights.extend_from_slice(&part.weights);
            if let (Some(all), Some(p)) = (grid.vectors.as_mut(), part.vectors.as_ref()) {
                all.extend_from_slice(p);
            }
        }
        Ok(grid)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    pub fn len(&self) -> usize {
        self.phases.len() / self.coin_dim
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn initial_state(&self) -> &DVector<C64> {
        &self.initial_state
    }

    /// The walk this grid was built from.
    pub fn spec(&self) -> &WalkSpec {
        &self.spec
    }

    pub fn has_vectors(&self) -> bool {
        self.vectors.is_some()
    }

    /// Flat index of the grid point with the given per-axis indices.
    pub fn flat_index(&self, indices: &[usize]) -> usize {
        let mut flat = 0usize;
        for &i in indices {
            debug_assert!(i < self.points_per_axis);
            flat = flat * self.points_per_axis + i;
        }
        flat
    }

    pub fn axis_indices(&self, flat: usize) -> Vec<usize> {
        decode(flat, self.dimension, self.points_per_axis)
    }

    pub fn k_at(&self, flat: usize) -> Vec<f64> {
        k_of_indices(&self.axis_indices(flat), self.points_per_axis)
    }

    /// Eigenphases at a point, ascending.
    pub fn phases_at(&self, flat: usize) -> &[f64] {
        let c = self.coin_dim;
        &self.phases[flat * c..(flat + 1) * c]
    }

    /// f_j(k) for one band.
    pub fn weight_at(&self, flat: usize, band: usize) -> &[C64] {
        let c = self.coin_dim;
        let base = flat * c * c + band * c;
        &self.weights[base..base + c]
    }

    /// Eigenvector of one band; requires `retain_vectors`.
    pub fn vector_at(&self, flat: usize, band: usize) -> Result<&[C64]> {
        let c = self.coin_dim;
        let vecs = self.vectors.as_ref().ok_or(Error::MissingEigenvectors)?;
        let base = flat * c * c + band * c;
        Ok(&vecs[base..base + c])
    }
}

/// Return amplitudes psi(0, t) for t = 0..=t_max together with the
/// probability series.
#[derive(Debug, Clone)]
pub struct ReturnAmplitudes {
    pub amplitudes: Vec<DVector<C64>>,
    pub series: ReturnSeries,
}

/// Exact quadrature of the return amplitude: one pass over the grid with
/// incremental phase rotation, never materializing the full grid.
///
/// With `allow_approximate` the Nyquist bound is not enforced; the resulting
/// series is marked `exact: false`.
pub fn return_amplitude_series(
    spec: &WalkSpec,
    t_max: usize,
    points_per_axis: usize,
    allow_approximate: bool,
) -> Result<ReturnAmplitudes> {
    let required = nyquist_points(spec, t_max);
    let exact = points_per_axis >= required;
    if !exact && !allow_approximate {
        return Err(Error::GridTooSmall {
            n: points_per_axis,
            required,
            t: t_max,
        });
    }
    let d = spec.dimension();
    let c = spec.coin_dim();
    let n = points_per_axis;
    let total = total_points(n, d)?;
    let psi0 = spec.initial_coin_state();

    let chunks: Vec<(usize, usize)> = (0..total)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(total)))
        .collect();

    let partials: Vec<Vec<C64>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = vec![C64::new(0.0, 0.0); (t_max + 1) * c];
            let mut weights = vec![C64::new(0.0, 0.0); c * c];
            let mut z = vec![C64::new(0.0, 0.0); c];
            let mut rot = vec![C64::new(0.0, 0.0); c];
            for flat in start..end {
                let k = k_of_indices(&decode(flat, d, n), n);
                let u = build_u_tilde(spec, &k);
                let eig = eig_unitary(&u).map_err(|e| match e {
                    Error::EigensolverFailure { residual, .. } => Error::EigensolverFailure {
                        k: k.clone(),
                        residual,
                    },
                    other => other,
                })?;
                for j in 0..c {
                    let v = eig.vectors.column(j);
                    let a: C64 = v
                        .iter()
                        .zip(psi0.iter())
                        .map(|(vi, pi)| vi.conj() * pi)
                        .sum();
                    for i in 0..c {
                        weights[j * c + i] = a * v[i];
                    }
                    z[j] = C64::new(1.0, 0.0);
                    rot[j] = C64::from_polar(1.0, eig.phases[j]);
                }
                for t in 0..=t_max {
                    let row = &mut acc[t * c..(t + 1) * c];
                    for j in 0..c {
                        let zj = z[j];
                        let f = &weights[j * c..(j + 1) * c];
                        for i in 0..c {
                            row[i] += zj * f[i];
                        }
                    }
                    for zj in z.iter_mut().zip(rot.iter()) {
                        *zj.0 *= *zj.1;
                    }
                    if (t + 1) % RENORM_EVERY == 0 {
                        for zj in z.iter_mut() {
                            *zj /= zj.norm();
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / total as f64;
    let mut flat_sum = vec![C64::new(0.0, 0.0); (t_max + 1) * c];
    for part in &partials {
        for (dst, src) in flat_sum.iter_mut().zip(part.iter()) {
            *dst += src;
        }
    }
    let mut amplitudes = Vec::with_capacity(t_max + 1);
    let mut p = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let amp = DVector::from_iterator(c, flat_sum[t * c..(t + 1) * c].iter().map(|x| x * scale));
        p.push(amp.norm_squared());
        amplitudes.push(amp);
    }
    Ok(ReturnAmplitudes {
        amplitudes,
        series: ReturnSeries {
            p,
            method: SeriesMethod::Fourier,
            grid: Some(points_per_axis),
            label: spec.label().to_string(),
            exact,
        },
    })
}

/// Per-band contributions I_j(t) whose sum over j is psi(0, t).
///
/// Bands are grouped by eigenspace independently at each k-point (phase
/// ascending); across crossings the per-band split is basis-dependent but
/// the total never is.
#[derive(Debug, Clone)]
pub struct SummandDecomposition {
    /// per_band[j][t] is the c-component quadrature I_j(t).
    pub per_band: Vec<Vec<DVector<C64>>>,
    pub points_per_axis: usize,
}

impl SummandDecomposition {
    /// Sum over bands, which equals the exact return amplitude.
    pub fn total(&self, t: usize) -> DVector<C64> {
        let c = self.per_band[0][t].len();
        let mut out = DVector::zeros(c);
        for band in &self.per_band {
            out += &band[t];
        }
        out
    }
}

pub fn summand_decomposition(
    spec: &WalkSpec,
    t_max: usize,
    points_per_axis: usize,
) -> Result<SummandDecomposition> {
    let required = nyquist_points(spec, t_max);
    if points_per_axis < required {
        return Err(Error::GridTooSmall {
            n: points_per_axis,
            required,
            t: t_max,
        });
    }
    let d = spec.dimension();
    let c = spec.coin_dim();
    let n = points_per_axis;
    let total = total_points(n, d)?;
    let psi0 = spec.initial_coin_state();

    let chunks: Vec<(usize, usize)> = (0..total)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(total)))
        .collect();

    let partials: Vec<Vec<C64>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            // [band][t][component] flattened.
            let mut acc = vec![C64::new(0.0, 0.0); c * (t_max + 1) * c];
            for flat in start..end {
                let k = k_of_indices(&decode(flat, d, n), n);
                let u = build_u_tilde(spec, &k);
                let eig = eig_unitary(&u).map_err(|e| match e {
                    Error::EigensolverFailure { residual, .. } => Error::EigensolverFailure {
                        k: k.clone(),
                        residual,
                    },
                    other => other,
                })?;
                for j in 0..c {
                    let v = eig.vectors.column(j);
                    let a: C64 = v
                        .iter()
                        .zip(psi0.iter())
                        .map(|(vi, pi)| vi.conj() * pi)
                        .sum();
                    let rot = C64::from_polar(1.0, eig.phases[j]);
                    let mut zj = C64::new(1.0, 0.0);
                    let base = j * (t_max + 1) * c;
                    for t in 0..=t_max {
                        for i in 0..c {
                            acc[base + t * c + i] += zj * a * v[i];
                        }
                        zj *= rot;
                        if (t + 1) % RENORM_EVERY == 0 {
                            zj /= zj.norm();
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / total as f64;
    let mut flat_sum = vec![C64::new(0.0, 0.0); c * (t_max + 1) * c];
    for part in &partials {
        for (dst, src) in flat_sum.iter_mut().zip(part.iter()) {
            *dst += src;
        }
    }
    let mut per_band = Vec::with_capacity(c);
    for j in 0..c {
        let mut band = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            let base = j * (t_max + 1) * c + t * c;
            band.push(DVector::from_iterator(
                c,
                flat_sum[base..base + c].iter().map(|x| x * scale),
            ));
        }
        per_band.push(band);
    }
    Ok(SummandDecomposition {
        per_band,
        points_per_axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin;
    use crate::walk::{CoinOperator, ShiftSet};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn hadamard_1d() -> WalkSpec {
        WalkSpec::new(
            ShiftSet::diagonal(1),
            coin::coin_1d(0.0, 0.0),
            DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            "hadamard-1d",
        )
        .unwrap()
    }

    fn grover_2d(state: DVector<C64>) -> WalkSpec {
        WalkSpec::new(
            ShiftSet::diagonal(2),
            coin::coin_grover_2d(),
            state,
            "grover-2d",
        )
        .unwrap()
    }

    #[test]
    fn u_tilde_at_zero_is_coin() {
        let spec = hadamard_1d();
        let u = build_u_tilde(&spec, &[0.0]);
        assert!((u - spec.coin().matrix()).norm() < 1e-15);
    }

    #[test]
    fn u_tilde_diagonal_topology_factorizes() {
        // D(k) = D(k1) (x) D(k2) for the c = 2^d shift set.
        let spec = grover_2d(coin::state_grover_exceptional());
        let k = [0.73, -1.21];
        let u = build_u_tilde(&spec, &k);
        let d1 = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, -k[0]),
            C64::from_polar(1.0, k[0]),
        ]));
        let d2 = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, -k[1]),
            C64::from_polar(1.0, k[1]),
        ]));
        let expected = d1.kronecker(&d2) * spec.coin().matrix();
        assert!((u - expected).norm() < 1e-14);
    }

    #[test]
    fn u_tilde_hadamard_eigenphases_match_dispersion() {
        // sin(w) = -sin(k - alpha)/sqrt(2) for both bands of C(alpha, beta).
        let spec = hadamard_1d();
        let k = FRAC_PI_2;
        let u = build_u_tilde(&spec, &[k]);
        let eig = eig_unitary(&u).unwrap();
        for w in &eig.phases {
            assert!((w.sin() + (k - 0.0).sin() / 2.0_f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_invariants_hold() {
        let spec = grover_2d(coin::state_grover_exceptional());
        let grid = MomentumGrid::build(&spec, 9, true).unwrap();
        assert_eq!(grid.len(), 81);
        let c = grid.coin_dim();
        for flat in 0..grid.len() {
            // Unit-circle eigenvalues and orthonormal eigenvectors.
            let mut completeness = DVector::<C64>::zeros(c);
            for j in 0..c {
                let v = grid.vector_at(flat, j).unwrap();
                let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-10);
                for j2 in (j + 1)..c {
                    let v2 = grid.vector_at(flat, j2).unwrap();
                    let dot: C64 = v.iter().zip(v2.iter()).map(|(a, b)| a.conj() * b).sum();
                    assert!(dot.norm() < 1e-10);
                }
                for (i, w) in grid.weight_at(flat, j).iter().enumerate() {
                    completeness[i] += w;
                }
            }
            let diff = completeness - grid.initial_state();
            assert!(diff.norm() < 1e-10, "completeness at {}", flat);
        }
    }

    #[test]
    fn grover_flat_bands_and_dispersion_on_grid() {
        let spec = grover_2d(coin::state_grover_exceptional());
        let n = 17;
        let grid = MomentumGrid::build(&spec, n, false).unwrap();
        for flat in 0..grid.len() {
            let k = grid.k_at(flat);
            let phases = grid.phases_at(flat);
            // Expected multiset: {0, pi, +-w} with cos w = -cos k1 cos k2.
            let w = (-k[0].cos() * k[1].cos()).acos();
            let expected = [-w, 0.0, w, PI];
            // Circular multiset match; at band crossings -pi and pi alias.
            let mut remaining = phases.to_vec();
            for e in expected {
                let (best, dist) = remaining
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let mut diff = (g - e).rem_euclid(2.0 * PI);
                        if diff > PI {
                            diff -= 2.0 * PI;
                        }
                        (i, diff.abs())
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                assert!(dist < 1e-10, "k = {:?}: no phase near {}", k, e);
                remaining.swap_remove(best);
            }
        }
    }

    #[test]
    fn quadrature_matches_direct_oracle_1d() {
        let spec = hadamard_1d();
        let t_max = 12;
        let direct = spec.return_series_direct(t_max).unwrap();
        let n = nyquist_points(&spec, t_max);
        let fourier = return_amplitude_series(&spec, t_max, n, false).unwrap();
        assert!(fourier.series.exact);
        for t in 0..=t_max {
            assert!(
                (fourier.series.p[t] - direct.p[t]).abs() < 1e-12,
                "t = {}: {} vs {}",
                t,
                fourier.series.p[t],
                direct.p[t]
            );
        }
        assert!((fourier.series.p[0] - 1.0).abs() < 1e-12);
        assert!((fourier.series.p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_direct_oracle_2d_grover() {
        let mut state = DVector::zeros(4);
        state[0] = C64::new(1.0, 0.0);
        let spec = grover_2d(state);
        let t_max = 6;
        let direct = spec.return_series_direct(t_max).unwrap();
        let fourier =
            return_amplitude_series(&spec, t_max, nyquist_points(&spec, t_max), false).unwrap();
        for t in 0..=t_max {
            assert!((fourier.series.p[t] - direct.p[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_coin_never_returns_in_momentum_picture() {
        let ident = CoinOperator::new(DMatrix::identity(2, 2)).unwrap();
        let spec = WalkSpec::new(
            ShiftSet::diagonal(1),
            ident,
            DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            "identity",
        )
        .unwrap();
        let out = return_amplitude_series(&spec, 8, nyquist_points(&spec, 8), false).unwrap();
        assert!((out.series.p[0] - 1.0).abs() < 1e-12);
        for t in 1..=8 {
            assert!(out.series.p[t].abs() < 1e-12);
        }
    }

    #[test]
    fn grid_too_small_is_rejected_but_approximate_passes() {
        let spec = hadamard_1d();
        let err = return_amplitude_series(&spec, 10, 7, false);
        assert!(matches!(err, Err(Error::GridTooSmall { required: 21, .. })));
        let ok = return_amplitude_series(&spec, 10, 7, true).unwrap();
        assert!(!ok.series.exact);
    }

    #[test]
    fn grid_doubling_is_stable() {
        let spec = grover_2d(coin::state_grover_exceptional());
        let t_max = 5;
        let n = nyquist_points(&spec, t_max);
        let a = return_amplitude_series(&spec, t_max, n, false).unwrap();
        let b = return_amplitude_series(&spec, t_max, 2 * n, false).unwrap();
        for t in 0..=t_max {
            let diff = (&a.amplitudes[t] - &b.amplitudes[t]).norm();
            assert!(diff < 1e-12, "t = {}: {}", t, diff);
        }
    }

    #[test]
    fn grover_generic_state_localises() {
        let mut state = DVector::zeros(4);
        state[0] = C64::new(1.0, 0.0);
        let spec = grover_2d(state);
        let out = return_amplitude_series(&spec, 60, nyquist_points(&spec, 60), false).unwrap();
        let tail_mean: f64 = out.series.p[40..=60].iter().sum::<f64>() / 21.0;
        assert!(tail_mean > 0.01, "tail mean {}", tail_mean);
    }

    #[test]
    fn summands_sum_to_amplitude() {
        let spec = grover_2d(coin::state_grover_exceptional());
        let t_max = 6;
        let n = nyquist_points(&spec, t_max);
        let dec = summand_decomposition(&spec, t_max, n).unwrap();
        let amp = return_amplitude_series(&spec, t_max, n, false).unwrap();
        for t in 0..=t_max {
            let diff = (dec.total(t) - &amp.amplitudes[t]).norm();
            assert!(diff < 1e-10, "t = {}: {}", t, diff);
        }
    }

    #[test]
    fn axial_topology_matches_direct_oracle() {
        // c = 2d walk: one positive and one negative unit step per axis.
        let spec = WalkSpec::new(
            ShiftSet::axial(2),
            coin::coin_grover_2d(),
            DVector::from_vec(vec![
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.5),
                C64::new(-0.5, 0.0),
                C64::new(0.0, -0.5),
            ]),
            "axial-grover",
        )
        .unwrap();
        let t_max = 8;
        let direct = spec.return_series_direct(t_max).unwrap();
        let fourier =
            return_amplitude_series(&spec, t_max, nyquist_points(&spec, t_max), false).unwrap();
        for t in 0..=t_max {
            assert!((fourier.series.p[t] - direct.p[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_is_thread_count_independent() {
        let spec = grover_2d(coin::state_grover_exceptional());
        let t_max = 4;
        let n = nyquist_points(&spec, t_max);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| return_amplitude_series(&spec, t_max, n, false))
            .unwrap();
        let several = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| return_amplitude_series(&spec, t_max, n, false))
            .unwrap();
        for t in 0..=t_max {
            for i in 0..4 {
                assert_eq!(single.amplitudes[t][i], several.amplitudes[t][i]);
            }
        }
    }

    #[test]
    fn grover_exceptional_state_kills_flat_band_summands() {
        // psi_G is orthogonal to the flat-band eigenvectors pointwise, so
        // the flat-band summands carry only the O(1/N^2) leak from the
        // measure-zero crossing points of an odd grid.
        let spec = grover_2d(coin::state_grover_exceptional());
        let t_max = 6;
        let n = 65; // odd: only (pi, pi) merges bands
        let dec = summand_decomposition(&spec, t_max, n).unwrap();
        // Bands sorted by phase: (-w, 0, +w, pi); slots 1 and 3 are flat.
        let bound = 3.0 / (n as f64 * n as f64);
        for t in 0..=t_max {
            assert!(dec.per_band[1][t].norm() < bound);
            assert!(dec.per_band[3][t].norm() < bound);
        }
    }
}
