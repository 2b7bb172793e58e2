//! Numerical stationary-phase diagnostics over a momentum grid: flat bands,
//! isolated stationary points, saddle curves, and the decay exponent they
//! predict for the return probability.
//!
//! Bands are continued across the grid by maximal eigenvector overlap
//! between neighbouring points. Crossings make that matching ambiguous;
//! affected points are flagged and features near them carry the flag rather
//! than being dropped. Flat-band detection never relies on continuation: a
//! band is flat when some eigenphase sits at a fixed value at every grid
//! point, which is immune to index swaps at crossings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eig::eig_unitary;
use crate::error::{Error, Result};
use crate::fourier::{build_u_tilde, MomentumGrid};
use crate::walk::WalkSpec;
use crate::C64;

/// Gradient refinement target.
const TOL_GRAD: f64 = 1e-8;
/// Total phase variation below which a band counts as flat.
const TOL_FLAT: f64 = 1e-9;
/// Relative singular-value cutoff for the Hessian rank.
const HESSIAN_RANK_CUT: f64 = 1e-6;
/// Coarse gradient threshold seeding curve components.
const CURVE_COARSE: f64 = 1e-3;
/// Finite-difference step used inside Newton refinement.
const REFINE_STEP: f64 = 1e-3;
/// Locations closer than this (per axis, circular) merge into one feature.
const DEDUPE_TOL: f64 = 1e-6;
/// Weight below which a feature is filtered by the initial state.
const WEIGHT_TOL: f64 = 1e-8;
/// Phase gap below which a band is treated as degenerate at a point.
const DEGENERATE_GAP: f64 = 1e-6;
/// Neighbour overlap below which continuation is flagged ambiguous.
const OVERLAP_OK: f64 = 0.75;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn wrap(x: f64) -> f64 {
    let mut y = x % TWO_PI;
    if y > std::f64::consts::PI {
        y -= TWO_PI;
    } else if y <= -std::f64::consts::PI {
        y += TWO_PI;
    }
    y
}

fn circ_dist(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    IsolatedPoint,
    Curve,
    FlatBand,
}

/// A stationary feature of one band's dispersion relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryFeature {
    pub kind: FeatureKind,
    /// Continued band index (sorted order at the first grid point).
    pub band: usize,
    /// One entry for an isolated point, refined samples for a curve, empty
    /// for a flat band.
    pub locations: Vec<Vec<f64>>,
    pub hessian_rank: usize,
    /// Amplitude-decay contribution rank/2, i.e. I_j(t) ~ t^{-rank/2} when
    /// this feature dominates; None for saddle manifolds beyond d = 2 where
    /// no classification is attempted.
    pub amplitude_exponent: Option<f64>,
    /// The k-independent eigenphase of a flat band.
    pub eigenphase: Option<f64>,
    /// Measured phase variation for flat bands.
    pub variation: Option<f64>,
    /// True when band continuation was ambiguous near this feature.
    pub discontinuity: bool,
    /// Eigenvectors at the locations, for orthogonality filtering.
    #[serde(skip)]
    pub location_vectors: Vec<Vec<C64>>,
    /// Per location: true when the eigenvalue is degenerate there.
    #[serde(skip)]
    pub location_degenerate: Vec<bool>,
}

/// Predicted asymptotics of p_o(t) for a given initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentPrediction {
    /// A flat band survives the orthogonality filter: constant leading term.
    Localised { bands: Vec<usize> },
    /// p_o(t) ~ t^{-exponent} from the slowest surviving feature.
    PowerLaw { exponent: f64, bands: Vec<usize> },
    /// Only saddle manifolds with no known rate survive.
    Unclassified { bands: Vec<usize> },
}

/// Continued band assignment over the grid.
struct BandField<'g> {
    grid: &'g MomentumGrid,
    /// perm[flat * c + band] = eigen index of `band` at `flat`.
    perm: Vec<u8>,
    ambiguous: Vec<bool>,
}

impl<'g> BandField<'g> {
    fn build(grid: &'g MomentumGrid) -> Result<Self> {
        let c = grid.coin_dim();
        let d = grid.dimension();
        let n = grid.points_per_axis();
        let total = grid.len();
        let mut perm = vec![0u8; total * c];
        let mut ambiguous = vec![false; total];

        let mut strides = vec![1usize; d];
        for axis in (0..d.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * n;
        }

        for flat in 0..total {
            let idx = grid.axis_indices(flat);
            // Root point keeps the sorted order.
            let Some(axis) = (0..d).rev().find(|&a| idx[a] > 0) else {
                for b in 0..c {
                    perm[flat * c + b] = b as u8;
                }
                continue;
            };
            let prev = flat - strides[axis];
            // Greedy assignment by largest |<v_prev, v_here>|.
            let mut overlap = vec![0.0f64; c * c];
            for b in 0..c {
                let vp = grid.vector_at(prev, perm[prev * c + b] as usize)?;
                for e in 0..c {
                    let vh = grid.vector_at(flat, e)?;
                    let dot: C64 = vp.iter().zip(vh.iter()).map(|(a, x)| a.conj() * x).sum();
                    overlap[b * c + e] = dot.norm();
                }
            }
            let mut band_taken = vec![false; c];
            let mut eig_taken = vec![false; c];
            let mut worst = 1.0f64;
            for _ in 0..c {
                let mut best = (0usize, 0usize, -1.0f64);
                for b in 0..c {
                    if band_taken[b] {
                        continue;
                    }
                    for e in 0..c {
                        if eig_taken[e] {
                            continue;
                        }
                        if overlap[b * c + e] > best.2 {
                            best = (b, e, overlap[b * c + e]);
                        }
                    }
                }
                band_taken[best.0] = true;
                eig_taken[best.1] = true;
                perm[flat * c + best.0] = best.1 as u8;
                worst = worst.min(best.2);
            }
            if worst < OVERLAP_OK {
                ambiguous[flat] = true;
            }
        }

        let flagged = ambiguous.iter().filter(|&&a| a).count();
        if flagged * 4 > total {
            return Err(Error::BandDiscontinuity {
                index: vec![flagged, total],
            });
        }
        Ok(BandField {
            grid,
            perm,
            ambiguous,
        })
    }

    fn omega(&self, flat: usize, band: usize) -> f64 {
        let c = self.grid.coin_dim();
        self.grid.phases_at(flat)[self.perm[flat * c + band] as usize]
    }

    fn vector(&self, flat: usize, band: usize) -> Result<&[C64]> {
        let c = self.grid.coin_dim();
        self.grid
            .vector_at(flat, self.perm[flat * c + band] as usize)
    }

    /// Central circular difference of the band phase along each axis.
    fn gradient(&self, flat: usize, band: usize) -> Vec<f64> {
        let d = self.grid.dimension();
        let n = self.grid.points_per_axis();
        let h = TWO_PI / n as f64;
        let idx = self.grid.axis_indices(flat);
        (0..d)
            .map(|axis| {
                let mut up = idx.clone();
                up[axis] = (idx[axis] + 1) % n;
                let mut down = idx.clone();
                down[axis] = (idx[axis] + n - 1) % n;
                let wu = self.omega(self.grid.flat_index(&up), band);
                let wd = self.omega(self.grid.flat_index(&down), band);
                wrap(wu - wd) / (2.0 * h)
            })
            .collect()
    }
}

/// Band phase and eigenvector at an arbitrary k, tracked against a
/// reference eigenvector.
struct PointEval {
    omega: f64,
    vector: Vec<C64>,
    min_gap: f64,
    /// |<v, reference>| of the matched band; low values mean the tracking
    /// lost the band (crossing nearby).
    overlap: f64,
}

fn eval_band(spec: &WalkSpec, k: &[f64], reference: &[C64]) -> Result<PointEval> {
    let u = build_u_tilde(spec, k);
    let eig = eig_unitary(&u).map_err(|e| match e {
        Error::EigensolverFailure { residual, .. } => Error::EigensolverFailure {
            k: k.to_vec(),
            residual,
        },
        other => other,
    })?;
    let c = eig.dim();
    let mut best = (0usize, -1.0f64);
    for j in 0..c {
        let dot: C64 = eig
            .vectors
            .column(j)
            .iter()
            .zip(reference.iter())
            .map(|(v, r)| v.conj() * r)
            .sum();
        if dot.norm() > best.1 {
            best = (j, dot.norm());
        }
    }
    let omega = eig.phases[best.0];
    let mut min_gap = f64::INFINITY;
    for j in 0..c {
        if j != best.0 {
            min_gap = min_gap.min(circ_dist(eig.phases[j], omega));
        }
    }
    Ok(PointEval {
        omega,
        vector: eig.vectors.column(best.0).iter().cloned().collect(),
        min_gap,
        overlap: best.1,
    })
}

/// Finite-difference gradient of the tracked band at k.
fn fd_gradient(spec: &WalkSpec, k: &[f64], reference: &[C64], h: f64) -> Result<Vec<f64>> {
    let d = k.len();
    let mut g = Vec::with_capacity(d);
    for axis in 0..d {
        let mut kp = k.to_vec();
        kp[axis] += h;
        let mut km = k.to_vec();
        km[axis] -= h;
        let wp = eval_band(spec, &kp, reference)?.omega;
        let wm = eval_band(spec, &km, reference)?.omega;
        g.push(wrap(wp - wm) / (2.0 * h));
    }
    Ok(g)
}

/// Second-order central-difference Hessian with step `h`, phases wrapped
/// relative to the centre.
fn fd_hessian(spec: &WalkSpec, k: &[f64], reference: &[C64], h: f64) -> Result<DMatrix<f64>> {
    let d = k.len();
    let w0 = eval_band(spec, k, reference)?.omega;
    let sample = |offsets: &[(usize, f64)]| -> Result<f64> {
        let mut kk = k.to_vec();
        for &(axis, step) in offsets {
            kk[axis] += step;
        }
        Ok(wrap(eval_band(spec, &kk, reference)?.omega - w0))
    };
    let mut hess = DMatrix::zeros(d, d);
    for a in 0..d {
        let plus = sample(&[(a, h)])?;
        let minus = sample(&[(a, -h)])?;
        hess[(a, a)] = (plus + minus) / (h * h);
        for b in (a + 1)..d {
            let pp = sample(&[(a, h), (b, h)])?;
            let pm = sample(&[(a, h), (b, -h)])?;
            let mp = sample(&[(a, -h), (b, h)])?;
            let mm = sample(&[(a, -h), (b, -h)])?;
            let mixed = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(a, b)] = mixed;
            hess[(b, a)] = mixed;
        }
    }
    Ok(hess)
}

fn hessian_rank(hess: &DMatrix<f64>) -> usize {
    let svd = hess.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > HESSIAN_RANK_CUT * max)
        .count()
}

/// Damped Newton on the finite-difference gradient, moving only along
/// directions the Hessian resolves (pseudo-inverse step), so it also
/// converges onto saddle curves. The iterate is confined to a trust region
/// around the starting cell and every accepted step must keep a clean
/// overlap with the tracked band; both guards stop the tracking from
/// sliding onto a different (e.g. flat) band across a crossing.
/// Refined location, its eigenvector, and the local phase gap.
type Refined = (Vec<f64>, Vec<C64>, f64);

fn refine_stationary(
    spec: &WalkSpec,
    start: &[f64],
    reference: &[C64],
    max_displacement: f64,
) -> Result<Option<Refined>> {
    let d = start.len();
    let mut k = start.to_vec();
    let mut reference = reference.to_vec();
    let mut grad = fd_gradient(spec, &k, &reference, REFINE_STEP)?;
    let mut gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    for _ in 0..60 {
        if gnorm < TOL_GRAD {
            let eval = eval_band(spec, &k, &reference)?;
            for x in k.iter_mut() {
                *x = wrap(*x);
            }
            return Ok(Some((k, eval.vector, eval.min_gap)));
        }
        let hess = fd_hessian(spec, &k, &reference, REFINE_STEP)?;
        let svd = hess.svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        if max_sv == 0.0 {
            return Ok(None);
        }
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        // step = -V S^+ U^T grad, truncating unresolved directions.
        let mut step = vec![0.0f64; d];
        for m in 0..d {
            let s = svd.singular_values[m];
            if s <= HESSIAN_RANK_CUT * max_sv {
                continue;
            }
            let ug: f64 = (0..d).map(|i| u[(i, m)] * grad[i]).sum();
            for i in 0..d {
                step[i] -= vt[(m, i)] * ug / s;
            }
        }
        let mut lambda = 1.0f64;
        let mut advanced = false;
        for _ in 0..8 {
            let trial: Vec<f64> = k
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x + lambda * s)
                .collect();
            let drift = trial
                .iter()
                .zip(start.iter())
                .map(|(a, b)| circ_dist(*a, *b))
                .fold(0.0f64, f64::max);
            if drift > max_displacement {
                lambda *= 0.5;
                continue;
            }
            let trial_eval = eval_band(spec, &trial, &reference)?;
            let gtrial = fd_gradient(spec, &trial, &reference, REFINE_STEP)?;
            let gtn = gtrial.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gtn < gnorm && trial_eval.overlap > OVERLAP_OK {
                reference = trial_eval.vector;
                k = trial;
                grad = gtrial;
                gnorm = gtn;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Flat bands found without band continuation: a candidate phase from the
/// first grid point is flat when every grid point has an eigenphase within
/// TOL_FLAT of it.
pub fn detect_flat_bands(grid: &MomentumGrid) -> Vec<StationaryFeature> {
    let c = grid.coin_dim();
    let total = grid.len();
    let mut features: Vec<StationaryFeature> = Vec::new();
    'candidate: for band in 0..c {
        let omega0 = grid.phases_at(0)[band];
        if features
            .iter()
            .any(|f| circ_dist(f.eigenphase.unwrap(), omega0) < 2.0 * TOL_FLAT)
        {
            continue;
        }
        let mut variation = 0.0f64;
        for flat in 0..total {
            let nearest = grid
                .phases_at(flat)
                .iter()
                .map(|w| circ_dist(*w, omega0))
                .fold(f64::INFINITY, f64::min);
            if nearest >= TOL_FLAT {
                continue 'candidate;
            }
            variation = variation.max(nearest);
        }
        features.push(StationaryFeature {
            kind: FeatureKind::FlatBand,
            band,
            locations: Vec::new(),
            hessian_rank: 0,
            amplitude_exponent: Some(0.0),
            eigenphase: Some(omega0),
            variation: Some(variation),
            discontinuity: false,
            location_vectors: Vec::new(),
            location_degenerate: Vec::new(),
        });
    }
    features
}

/// Connected components (torus topology) of grid points whose band gradient
/// is below the coarse curve threshold.
fn low_gradient_components(field: &BandField, grad_norms: &[f64]) -> Vec<Vec<usize>> {
    let grid = field.grid;
    let d = grid.dimension();
    let n = grid.points_per_axis();
    let total = grid.len();
    let mut seen = vec![false; total];
    let mut components = Vec::new();
    for start in 0..total {
        if seen[start] || grad_norms[start] >= CURVE_COARSE {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = vec![start];
        seen[start] = true;
        while let Some(flat) = queue.pop() {
            comp.push(flat);
            let idx = grid.axis_indices(flat);
            for axis in 0..d {
                for delta in [1usize, n - 1] {
                    let mut nb = idx.clone();
                    nb[axis] = (idx[axis] + delta) % n;
                    let nb_flat = grid.flat_index(&nb);
                    if !seen[nb_flat] && grad_norms[nb_flat] < CURVE_COARSE {
                        seen[nb_flat] = true;
                        queue.push(nb_flat);
                    }
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Stationary features of one continued band: saddle curves from connected
/// low-gradient components, then isolated points from sign-change cells,
/// each refined by damped Newton to ||grad|| < 1e-8.
pub fn find_stationary_points(grid: &MomentumGrid, band: usize) -> Result<Vec<StationaryFeature>> {
    let spec = grid.spec();
    let d = grid.dimension();
    let n = grid.points_per_axis();
    let c = grid.coin_dim();
    assert!(band < c);
    let field = BandField::build(grid)?;
    let total = grid.len();

    // A flat band is stationary everywhere; report it as such and skip the
    // pointwise machinery. Flatness is checked continuation-free.
    let omega0 = field.omega(0, band);
    let mut flat_variation = 0.0f64;
    let mut is_flat = true;
    for flat in 0..total {
        let nearest = grid
            .phases_at(flat)
            .iter()
            .map(|w| circ_dist(*w, omega0))
            .fold(f64::INFINITY, f64::min);
        if nearest >= TOL_FLAT {
            is_flat = false;
            break;
        }
        flat_variation = flat_variation.max(nearest);
    }
    if is_flat {
        return Ok(vec![StationaryFeature {
            kind: FeatureKind::FlatBand,
            band,
            locations: Vec::new(),
            hessian_rank: 0,
            amplitude_exponent: Some(0.0),
            eigenphase: Some(omega0),
            variation: Some(flat_variation),
            discontinuity: false,
            location_vectors: Vec::new(),
            location_degenerate: Vec::new(),
        }]);
    }

    let gradients: Vec<Vec<f64>> = (0..total).map(|f| field.gradient(f, band)).collect();
    let grad_norms: Vec<f64> = gradients
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();

    let near_ambiguous = |flat: usize| -> bool {
        let idx = grid.axis_indices(flat);
        if field.ambiguous[flat] {
            return true;
        }
        for axis in 0..d {
            for delta in [1usize, n - 1] {
                let mut nb = idx.clone();
                nb[axis] = (idx[axis] + delta) % n;
                if field.ambiguous[grid.flat_index(&nb)] {
                    return true;
                }
            }
        }
        false
    };

    let mut features = Vec::new();
    let mut in_curve = vec![false; total];

    // Curves need at least one transverse axis.
    if d >= 2 {
        let min_cells = (n / 4).max(2);
        for comp in low_gradient_components(&field, &grad_norms) {
            if comp.len() < min_cells {
                continue;
            }
            for &f in &comp {
                in_curve[f] = true;
            }
            let stride = (comp.len() / 48).max(1);
            let mut locations = Vec::new();
            let mut vectors = Vec::new();
            let mut degenerate = Vec::new();
            let mut flagged = false;
            for &flat in comp.iter().step_by(stride) {
                flagged |= near_ambiguous(flat);
                let k = grid.k_at(flat);
                let reference = field.vector(flat, band)?.to_vec();
                let trust = 2.0 * TWO_PI / n as f64;
                if let Some((kk, vec, gap)) = refine_stationary(spec, &k, &reference, trust)? {
                    locations.push(kk);
                    degenerate.push(gap < DEGENERATE_GAP);
                    vectors.push(vec);
                }
            }
            if locations.is_empty() {
                continue;
            }
            let reference = field.vector(comp[0], band)?.to_vec();
            let hess = fd_hessian(spec, &locations[0], &reference, TWO_PI / n as f64)?;
            let rank = hessian_rank(&hess);
            let amplitude_exponent = if d == 2 {
                Some(rank as f64 / 2.0)
            } else {
                // Higher-dimensional saddle manifolds are reported but not
                // classified.
                None
            };
            features.push(StationaryFeature {
                kind: FeatureKind::Curve,
                band,
                locations,
                hessian_rank: rank,
                amplitude_exponent,
                eigenphase: None,
                variation: None,
                discontinuity: flagged,
                location_vectors: vectors,
                location_degenerate: degenerate,
            });
        }
    }

    // Isolated candidates: cells where every gradient component changes
    // sign among the 2^d corners.
    let mut isolated: Vec<(Vec<f64>, Vec<C64>, bool, bool)> = Vec::new();
    'cells: for flat in 0..total {
        if in_curve[flat] {
            continue;
        }
        let idx = grid.axis_indices(flat);
        let mut corners = Vec::with_capacity(1 << d);
        for corner in 0..(1usize << d) {
            let mut ci = idx.clone();
            for (axis, c) in ci.iter_mut().enumerate() {
                if corner & (1 << axis) != 0 {
                    *c = (*c + 1) % n;
                }
            }
            let cf = grid.flat_index(&ci);
            if in_curve[cf] {
                continue 'cells;
            }
            corners.push(cf);
        }
        let sign_change_all_axes = (0..d).all(|axis| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &cf in &corners {
                let g = gradients[cf][axis];
                lo = lo.min(g);
                hi = hi.max(g);
            }
            lo <= 0.0 && hi >= 0.0
        });
        if !sign_change_all_axes {
            continue 'cells;
        }
        let k = grid.k_at(flat);
        let reference = field.vector(flat, band)?.to_vec();
        let trust = 2.0 * TWO_PI / n as f64;
        if let Some((kk, vec, gap)) = refine_stationary(spec, &k, &reference, trust)? {
            let nearest_idx: Vec<usize> = kk
                .iter()
                .map(|&x| {
                    let pos = (x + std::f64::consts::PI) / TWO_PI * n as f64 - 1.0;
                    (pos.round().rem_euclid(n as f64)) as usize % n
                })
                .collect();
            if in_curve[grid.flat_index(&nearest_idx)] {
                continue;
            }
            let duplicate = isolated.iter().any(|(existing, _, _, _)| {
                existing
                    .iter()
                    .zip(kk.iter())
                    .all(|(a, b)| circ_dist(*a, *b) < DEDUPE_TOL)
            });
            if !duplicate {
                isolated.push((kk, vec, gap < DEGENERATE_GAP, near_ambiguous(flat)));
            }
        }
    }
    for (k, vec, degenerate, flagged) in isolated {
        let hess = fd_hessian(spec, &k, &vec, TWO_PI / n as f64)?;
        let rank = hessian_rank(&hess);
        features.push(StationaryFeature {
            kind: FeatureKind::IsolatedPoint,
            band,
            locations: vec![k],
            hessian_rank: rank,
            amplitude_exponent: Some(rank as f64 / 2.0),
            eigenphase: None,
            variation: None,
            discontinuity: flagged,
            location_vectors: vec![vec],
            location_degenerate: vec![degenerate],
        });
    }

    Ok(features)
}

/// All stationary features of every band.
pub fn analyze_spectrum(grid: &MomentumGrid) -> Result<Vec<StationaryFeature>> {
    let mut features = Vec::new();
    for band in 0..grid.coin_dim() {
        features.extend(find_stationary_points(grid, band)?);
    }
    Ok(features)
}

/// Largest |<v, psi0>| over the non-degenerate locations of a feature; flat
/// bands scan the whole grid for the eigenphase instead.
fn feature_weight(
    feature: &StationaryFeature,
    psi0: &nalgebra::DVector<C64>,
    grid: &MomentumGrid,
) -> Result<f64> {
    match feature.kind {
        FeatureKind::FlatBand => {
            let omega0 = feature.eigenphase.expect("flat band has an eigenphase");
            let mut weight = 0.0f64;
            for flat in 0..grid.len() {
                let phases = grid.phases_at(flat);
                let mut best = (0usize, f64::INFINITY);
                for (j, w) in phases.iter().enumerate() {
                    let dd = circ_dist(*w, omega0);
                    if dd < best.1 {
                        best = (j, dd);
                    }
                }
                // Skip points where the flat band crosses another band;
                // the eigenspace split is arbitrary there.
                let isolated_here = phases
                    .iter()
                    .enumerate()
                    .all(|(j, w)| j == best.0 || circ_dist(*w, phases[best.0]) > DEGENERATE_GAP);
                if !isolated_here {
                    continue;
                }
                let v = grid.vector_at(flat, best.0)?;
                let dot: C64 = v.iter().zip(psi0.iter()).map(|(a, b)| a.conj() * b).sum();
                weight = weight.max(dot.norm());
            }
            Ok(weight)
        }
        _ => {
            let mut weight = 0.0f64;
            for (vec, degenerate) in feature
                .location_vectors
                .iter()
                .zip(feature.location_degenerate.iter())
            {
                if *degenerate {
                    continue;
                }
                let dot: C64 = vec.iter().zip(psi0.iter()).map(|(a, b)| a.conj() * b).sum();
                weight = weight.max(dot.norm());
            }
            Ok(weight)
        }
    }
}

/// The slowest-decaying feature whose weight survives the orthogonality
/// filter determines the predicted p_o exponent (twice the amplitude
/// exponent); a surviving flat band means localisation.
pub fn predict_exponent(
    features: &[StationaryFeature],
    psi0: &nalgebra::DVector<C64>,
    grid: &MomentumGrid,
) -> Result<ExponentPrediction> {
    let mut surviving: Vec<(&StationaryFeature, f64)> = Vec::new();
    let mut fastest_filtered: Option<f64> = None;
    for feature in features {
        let weight = feature_weight(feature, psi0, grid)?;
        if weight > WEIGHT_TOL {
            surviving.push((feature, weight));
        } else if let Some(a) = feature.amplitude_exponent {
            let p_exp = 2.0 * a;
            fastest_filtered = Some(match fastest_filtered {
                Some(x) => x.max(p_exp),
                None => p_exp,
            });
        }
    }
    if surviving.is_empty() {
        return Err(Error::NoFeatureSurvives { fastest_filtered });
    }

    let flat_bands: Vec<usize> = surviving
        .iter()
        .filter(|(f, _)| f.kind == FeatureKind::FlatBand)
        .map(|(f, _)| f.band)
        .collect();
    if !flat_bands.is_empty() {
        return Ok(ExponentPrediction::Localised { bands: flat_bands });
    }

    let best = surviving
        .iter()
        .filter_map(|(f, _)| f.amplitude_exponent.map(|a| (f, a)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    match best {
        Some((_, amp)) => {
            let mut bands: Vec<usize> = surviving
                .iter()
                .filter(|(f, _)| f.amplitude_exponent == Some(amp))
                .map(|(f, _)| f.band)
                .collect();
            bands.sort_unstable();
            bands.dedup();
            Ok(ExponentPrediction::PowerLaw {
                exponent: 2.0 * amp,
                bands,
            })
        }
        None => {
            let mut bands: Vec<usize> = surviving.iter().map(|(f, _)| f.band).collect();
            bands.sort_unstable();
            bands.dedup();
            Ok(ExponentPrediction::Unclassified { bands })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin;
    use crate::walk::ShiftSet;
    use nalgebra::DVector;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spec_1d(alpha: f64, beta: f64) -> WalkSpec {
        WalkSpec::new(
            ShiftSet::diagonal(1),
            coin::coin_1d(alpha, beta),
            DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            "one-d",
        )
        .unwrap()
    }

    fn spec_grover(state: DVector<C64>) -> WalkSpec {
        WalkSpec::new(
            ShiftSet::diagonal(2),
            coin::coin_grover_2d(),
            state,
            "grover",
        )
        .unwrap()
    }

    #[test]
    fn one_d_saddles_at_alpha_plus_minus_half_pi() {
        for alpha in [0.0, 0.4, -1.1] {
            let spec = spec_1d(alpha, 0.0);
            let grid = MomentumGrid::build(&spec, 64, true).unwrap();
            for band in 0..2 {
                let features = find_stationary_points(&grid, band).unwrap();
                let points: Vec<f64> = features
                    .iter()
                    .filter(|f| f.kind == FeatureKind::IsolatedPoint)
                    .map(|f| f.locations[0][0])
                    .collect();
                assert_eq!(
                    points.len(),
                    2,
                    "alpha={} band={}: {:?}",
                    alpha,
                    band,
                    points
                );
                for expected in [alpha + FRAC_PI_2, alpha - FRAC_PI_2] {
                    let hit = points.iter().any(|p| circ_dist(*p, expected) < 1e-5);
                    assert!(hit, "alpha={} missing saddle at {}", alpha, expected);
                }
                for f in &features {
                    assert_eq!(f.hessian_rank, 1);
                    assert_eq!(f.amplitude_exponent, Some(0.5));
                }
            }
        }
    }

    #[test]
    fn grover_flat_bands_detected() {
        let grid =
            MomentumGrid::build(&spec_grover(coin::state_grover_exceptional()), 32, true).unwrap();
        let flats = detect_flat_bands(&grid);
        assert_eq!(flats.len(), 2);
        let phases: Vec<f64> = flats.iter().map(|f| f.eigenphase.unwrap()).collect();
        assert!(phases.iter().any(|w| w.abs() < 1e-12));
        assert!(phases.iter().any(|w| (w - PI).abs() < 1e-12));
        for f in &flats {
            assert!(f.variation.unwrap() < TOL_FLAT);
        }
    }

    #[test]
    fn hadamard_walks_have_no_flat_bands() {
        let spec = spec_1d(0.0, 0.0);
        let grid = MomentumGrid::build(&spec, 64, false).unwrap();
        assert!(detect_flat_bands(&grid).is_empty());

        let h2 = coin::coin_tensor(&[coin::coin_1d(0.0, 0.0), coin::coin_1d(0.0, 0.0)]).unwrap();
        let mut state = DVector::zeros(4);
        state[0] = C64::new(1.0, 0.0);
        let spec2 = WalkSpec::new(ShiftSet::diagonal(2), h2, state, "hxh").unwrap();
        let grid2 = MomentumGrid::build(&spec2, 64, false).unwrap();
        assert!(detect_flat_bands(&grid2).is_empty());
        // Eigenphases genuinely move: variation above 0.1 on every band.
        for band in 0..4 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for flat in 0..grid2.len() {
                let w = grid2.phases_at(flat)[band];
                lo = lo.min(w);
                hi = hi.max(w);
            }
            assert!(hi - lo > 0.1);
        }
    }

    #[test]
    fn grover_walking_bands_have_nondegenerate_saddles() {
        let grid =
            MomentumGrid::build(&spec_grover(coin::state_grover_exceptional()), 64, true).unwrap();
        // Bands sorted at the first point: (-w, 0, +w, pi); walking bands
        // are 0 and 2.
        for band in [0usize, 2] {
            let features = find_stationary_points(&grid, band).unwrap();
            let isolated: Vec<_> = features
                .iter()
                .filter(|f| f.kind == FeatureKind::IsolatedPoint && !f.discontinuity)
                .collect();
            assert!(!isolated.is_empty(), "band {band}");
            for f in &isolated {
                let k = &f.locations[0];
                assert!(
                    (k[0].abs() - FRAC_PI_2).abs() < 1e-5 && (k[1].abs() - FRAC_PI_2).abs() < 1e-5,
                    "band {band} unexpected saddle {:?}",
                    k
                );
                assert_eq!(f.hessian_rank, 2);
                assert_eq!(f.amplitude_exponent, Some(1.0));
            }
        }
    }

    #[test]
    fn grover_prediction_localised_vs_exceptional() {
        let mut generic = DVector::zeros(4);
        generic[0] = C64::new(1.0, 0.0);
        let grid = MomentumGrid::build(&spec_grover(generic.clone()), 64, true).unwrap();
        let features = analyze_spectrum(&grid).unwrap();

        let pred = predict_exponent(&features, &generic, &grid).unwrap();
        assert!(matches!(pred, ExponentPrediction::Localised { .. }));

        let psi_g = coin::state_grover_exceptional();
        let pred = predict_exponent(&features, &psi_g, &grid).unwrap();
        match pred {
            ExponentPrediction::PowerLaw { exponent, .. } => {
                assert!((exponent - 2.0).abs() < 1e-12)
            }
            other => panic!("expected power law, got {:?}", other),
        }
    }

    #[test]
    fn tensor_saddles_are_products_of_factor_saddles() {
        let (a1, a2) = (0.3, -0.7);
        let coin2 = coin::coin_tensor(&[coin::coin_1d(a1, 0.0), coin::coin_1d(a2, 0.0)]).unwrap();
        let mut state = DVector::zeros(4);
        state[0] = C64::new(1.0, 0.0);
        let spec = WalkSpec::new(ShiftSet::diagonal(2), coin2, state.clone(), "tensor").unwrap();
        let grid = MomentumGrid::build(&spec, 64, true).unwrap();
        let features = analyze_spectrum(&grid).unwrap();
        let isolated: Vec<_> = features
            .iter()
            .filter(|f| f.kind == FeatureKind::IsolatedPoint)
            .collect();
        assert!(!isolated.is_empty());
        for f in &isolated {
            let k = &f.locations[0];
            let k1_ok =
                circ_dist(k[0], a1 + FRAC_PI_2) < 1e-5 || circ_dist(k[0], a1 - FRAC_PI_2) < 1e-5;
            let k2_ok =
                circ_dist(k[1], a2 + FRAC_PI_2) < 1e-5 || circ_dist(k[1], a2 - FRAC_PI_2) < 1e-5;
            assert!(
                k1_ok && k2_ok,
                "saddle {:?} not a product of 1-D saddles",
                k
            );
            assert_eq!(f.hessian_rank, 2);
        }
        let pred = predict_exponent(&features, &state, &grid).unwrap();
        match pred {
            ExponentPrediction::PowerLaw { exponent, .. } => {
                assert!((exponent - 2.0).abs() < 1e-12)
            }
            other => panic!("expected exponent 2, got {:?}", other),
        }
    }

    #[test]
    fn fourier_walk_saddle_lines_and_points() {
        let mut generic = DVector::zeros(4);
        generic[0] = C64::new(1.0, 0.0);
        let spec = WalkSpec::new(
            ShiftSet::diagonal(2),
            coin::coin_fourier_2d(),
            generic.clone(),
            "fourier",
        )
        .unwrap();
        let grid = MomentumGrid::build(&spec, 64, true).unwrap();
        let features = analyze_spectrum(&grid).unwrap();

        // Two saddle lines, constant k1 in {0, pi}, spanning the k2 circle.
        let mut line_at_zero = false;
        let mut line_at_pi = false;
        for f in features.iter().filter(|f| f.kind == FeatureKind::Curve) {
            assert_eq!(f.hessian_rank, 1);
            assert_eq!(f.amplitude_exponent, Some(0.5));
            let k1 = f.locations[0][0];
            for loc in &f.locations {
                assert!(circ_dist(loc[0], k1) < 1e-3);
            }
            if circ_dist(k1, 0.0) < 1e-3 {
                line_at_zero = true;
            }
            if circ_dist(k1, PI) < 1e-3 {
                line_at_pi = true;
            }
        }
        assert!(line_at_zero && line_at_pi);

        // Four isolated rank-2 saddles per band at the quarter-angle points.
        let expected = [
            [FRAC_PI_2, std::f64::consts::FRAC_PI_4],
            [FRAC_PI_2, -3.0 * std::f64::consts::FRAC_PI_4],
            [-FRAC_PI_2, std::f64::consts::FRAC_PI_4],
            [-FRAC_PI_2, -3.0 * std::f64::consts::FRAC_PI_4],
        ];
        for band in 0..4 {
            let points: Vec<&StationaryFeature> = features
                .iter()
                .filter(|f| {
                    f.band == band && f.kind == FeatureKind::IsolatedPoint && f.hessian_rank == 2
                })
                .collect();
            for target in &expected {
                let hit = points.iter().any(|f| {
                    circ_dist(f.locations[0][0], target[0]) < 1e-4
                        && circ_dist(f.locations[0][1], target[1]) < 1e-4
                });
                assert!(hit, "band {} missing saddle near {:?}", band, target);
            }
        }

        // Generic states keep the lines (p ~ t^-1); the psi_F family is
        // orthogonal to the line eigenvectors and drops to t^-2.
        match predict_exponent(&features, &generic, &grid).unwrap() {
            ExponentPrediction::PowerLaw { exponent, .. } => {
                assert!(
                    (exponent - 1.0).abs() < 1e-12,
                    "generic exponent {}",
                    exponent
                )
            }
            other => panic!("generic state: expected exponent 1, got {:?}", other),
        }
        for (a, b) in [
            (C64::new(0.5, 0.0), C64::new(0.5, 0.0)),
            (C64::new(0.653, 0.0), C64::new(0.0, 0.2705)),
        ] {
            let norm = (2.0 * (a.norm_sqr() + b.norm_sqr())).sqrt();
            let psi = coin::state_fourier_family(a / norm, b / norm).unwrap();
            let pred = predict_exponent(&features, &psi, &grid).unwrap();
            match pred {
                ExponentPrediction::PowerLaw { exponent, .. } => {
                    assert!(
                        (exponent - 2.0).abs() < 1e-12,
                        "psi_F exponent {}",
                        exponent
                    )
                }
                other => panic!("psi_F: expected exponent 2, got {:?}", other),
            }
        }
    }

    #[test]
    fn one_d_prediction_is_exponent_one_for_random_states() {
        let spec = spec_1d(0.9, 0.3);
        let grid = MomentumGrid::build(&spec, 64, true).unwrap();
        let features = analyze_spectrum(&grid).unwrap();
        let mut s = 5u64;
        let mut next = move || {
            s = s.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            ((z >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for _ in 0..50 {
            let mut v = DVector::from_fn(2, |_, _| C64::new(next(), next()));
            let norm = v.norm();
            v /= C64::new(norm, 0.0);
            let pred = predict_exponent(&features, &v, &grid).unwrap();
            match pred {
                ExponentPrediction::PowerLaw { exponent, .. } => {
                    assert!((exponent - 1.0).abs() < 1e-12)
                }
                other => panic!("expected exponent 1, got {:?}", other),
            }
        }
    }
}
