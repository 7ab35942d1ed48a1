//! WMMSE building blocks shared by the continuous and discrete solvers.
//!
//! The digital precoder of every solver has the form
//! `w = (s I + A)^{-1} f` where `A = sum_i H_i^H Z_i G_i Z_i^H H_i` and the
//! shift `s` is the power multiplier, optionally offset by a penalty term. The
//! helpers below are written against that shift so that both solvers share
//! the same closed forms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_solve, hermitize, identity, trace_re, CMat, CVec};
use crate::metrics::{interference_covariance, masked, mse_matrix, StreamSelection};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-13;
/// Null-space projections below this fraction of `|f|^2` are dropped as
/// round-off from the eigen basis.
pub const NULL_PROJECTION_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone)]
pub struct WmmseState {
    pub combiners: Vec<CMat>,
    pub weights: Vec<CMat>,
    /// Per-user fully digital precoders (antennas x streams).
    pub fully_digital: Vec<CMat>,
    pub selection: StreamSelection,
    pub multiplier: f64,
}

impl WmmseState {
    /// Antennas x (users * streams) block matrix of all precoders.
    pub fn stacked(&self) -> CMat {
        stack(&self.fully_digital)
    }
}

pub fn stack(blocks: &[CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// MMSE combiner of user `k` for the current precoders.
pub fn update_combiner(
    channels: &[CMat],
    precoders: &[CMat],
    selection: &StreamSelection,
    k: usize,
    noise: f64,
) -> Result<CMat> {
    let q = interference_covariance(channels, precoders, selection, k, noise)?;
    let s = &channels[k] * masked(&precoders[k], selection.user(k));
    hermitian_solve(&(q + &s * s.adjoint()), &s)
}

pub fn update_weight(mse: &CMat, mu: f64) -> Result<CMat> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let eig = hermitian_eigen(mse)?;
    let max = eig.values.first().copied().unwrap_or(0.0).abs().max(1.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -1e-10 * max {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let inv = hermitian_solve(mse, &identity(mse.nrows()))?;
    Ok(hermitize(&inv).unscale(mu))
}

/// Eigendecomposition of the aggregate interference gram matrix, eigenvalues
/// sorted descending and clamped at zero.
#[derive(Debug, Clone)]
pub struct GramEvd {
    pub basis: CMat,
    pub eigenvalues: Vec<f64>,
}

impl GramEvd {
    pub fn matrix(&self) -> CMat {
        let d = CVec::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&j| Complex64::new(j, 0.0)),
        );
        &self.basis * CMat::from_diagonal(&d) * self.basis.adjoint()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

pub fn gram_matrix(channels: &[CMat], combiners: &[CMat], weights: &[CMat]) -> CMat {
    let mt = channels.first().map_or(0, |h| h.ncols());
    let mut a = CMat::zeros(mt, mt);
    for ((h, z), g) in channels.iter().zip(combiners).zip(weights) {
        let hz = h.adjoint() * z;
        a += &hz * g * hz.adjoint();
    }
    hermitize(&a)
}

pub fn interference_gram_evd(channels: &[CMat], combiners: &[CMat], weights: &[CMat]) -> Result<GramEvd> {
    let eig = hermitian_eigen(&gram_matrix(channels, combiners, weights))?;
    let jmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let eigenvalues = eig
        .values
        .iter()
        .map(|&j| if j <= EIGEN_FLOOR * jmax { 0.0 } else { j })
        .collect();
    Ok(GramEvd {
        basis: eig.vectors,
        eigenvalues,
    })
}

/// Per-user target matrices `H_k^H Z_k G_k` (one column per stream).
pub fn targets(channels: &[CMat], combiners: &[CMat], weights: &[CMat]) -> Vec<CMat> {
    channels
        .iter()
        .zip(combiners)
        .zip(weights)
        .map(|((h, z), g)| h.adjoint() * z * g)
        .collect()
}

/// Targets expressed in the eigen basis of the gram matrix.
#[derive(Debug, Clone)]
pub struct StreamMetrics {
    /// `coefficients[k][j] = G^H f_{j,k}`.
    pub coefficients: Vec<Vec<CVec>>,
    /// `projections[k][j][i] = |coefficients[k][j][i]|^2`.
    pub projections: Vec<Vec<Vec<f64>>>,
}

impl StreamMetrics {
    pub fn new(gram: &GramEvd, targets: &[CMat]) -> Self {
        let gh = gram.basis.adjoint();
        let mut coefficients = Vec::with_capacity(targets.len());
        let mut projections = Vec::with_capacity(targets.len());
        for f in targets {
            let mut ck = Vec::with_capacity(f.ncols());
            let mut xk = Vec::with_capacity(f.ncols());
            for j in 0..f.ncols() {
                let col = f.column(j);
                let norm = col.norm_squared();
                let mut cj = &gh * col;
                for (i, z) in cj.iter_mut().enumerate() {
                    if gram.eigenvalues[i] == 0.0 && z.norm_sqr() <= NULL_PROJECTION_FLOOR * norm {
                        *z = Complex64::new(0.0, 0.0);
                    }
                }
                xk.push(cj.iter().map(|z| z.norm_sqr()).collect());
                ck.push(cj);
            }
            coefficients.push(ck);
            projections.push(xk);
        }
        Self {
            coefficients,
            projections,
        }
    }

    pub fn num_users(&self) -> usize {
        self.projections.len()
    }
}

fn degenerate(i: usize) -> Error {
    Error::Singular(format!("zero shifted eigenvalue at index {i} with non-zero projection"))
}

/// `-sum_i x_i (J_i + 2s) / (J_i + s)^2`.
pub fn stream_contribution(projections: &[f64], eigenvalues: &[f64], shift: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (i, (&x, &j)) in projections.iter().zip(eigenvalues).enumerate() {
        if x == 0.0 {
            continue;
        }
        let d = j + shift;
        if d <= 0.0 {
            return Err(degenerate(i));
        }
        sum += x * (j + 2.0 * shift) / (d * d);
    }
    Ok(-sum)
}

/// `sum_i x_i / (J_i + s)^2`: squared norm of the shifted precoder column.
pub fn stream_power(projections: &[f64], eigenvalues: &[f64], shift: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (i, (&x, &j)) in projections.iter().zip(eigenvalues).enumerate() {
        if x == 0.0 {
            continue;
        }
        let d = j + shift;
        if d <= 0.0 {
            return Err(degenerate(i));
        }
        sum += x / (d * d);
    }
    Ok(sum)
}

/// `G (J + s)^{-1} c` where `c = G^H f`.
pub fn shifted_precoder(coefficients: &CVec, gram: &GramEvd, shift: f64) -> Result<CVec> {
    let mut scaled = coefficients.clone();
    for (i, z) in scaled.iter_mut().enumerate() {
        if *z == Complex64::new(0.0, 0.0) {
            continue;
        }
        let d = gram.eigenvalues[i] + shift;
        if d <= 0.0 {
            return Err(degenerate(i));
        }
        *z /= d;
    }
    Ok(&gram.basis * scaled)
}

/// Flags every stream whose score `beta mu C + (1 - beta) C_bar` is negative.
/// At most `cap` streams are kept, preferring the most negative scores.
pub fn select_streams(
    contributions: &[Vec<f64>],
    beta: f64,
    mu: f64,
    per_chain_watts: f64,
    cap: usize,
) -> StreamSelection {
    let mut scored = Vec::new();
    let mut flags: Vec<Vec<bool>> = contributions.iter().map(|c| vec![false; c.len()]).collect();
    for (k, ck) in contributions.iter().enumerate() {
        for (j, &c) in ck.iter().enumerate() {
            let score = beta * mu * c + (1.0 - beta) * per_chain_watts;
            if score < 0.0 {
                scored.push((score, k, j));
            }
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for &(_, k, j) in scored.iter().take(cap) {
        flags[k][j] = true;
    }
    StreamSelection::new(flags)
}

/// Per-user MSE matrices for the current state.
pub fn mse_matrices(channels: &[CMat], state: &WmmseState, noise: f64) -> Result<Vec<CMat>> {
    (0..channels.len())
        .map(|k| {
            let q = interference_covariance(channels, &state.fully_digital, &state.selection, k, noise)?;
            mse_matrix(
                &state.combiners[k],
                &channels[k],
                &state.fully_digital[k],
                state.selection.user(k),
                &q,
            )
        })
        .collect()
}

/// `beta sum_k [log2|G_k| + mu M_r - mu tr(G_k F_k)] - (1 - beta) hpc`.
pub fn surrogate_value(state: &WmmseState, channels: &[CMat], noise: f64, beta: f64, mu: f64, hpc: f64) -> Result<f64> {
    let mses = mse_matrices(channels, state, noise)?;
    let mut sum = 0.0;
    for (g, f) in state.weights.iter().zip(&mses) {
        let mr = g.nrows() as f64;
        let logdet = crate::linalg::ln_det_hpd(g)? / std::f64::consts::LN_2;
        sum += logdet + mu * mr - mu * trace_re(&(g * f));
    }
    Ok(beta * sum - (1.0 - beta) * hpc)
}
