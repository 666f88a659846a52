//! Gaussian-process machinery over graph vertices.
//!
//! The posterior is maintained over the full vertex set and recomputed from
//! the accumulated observation log. Repeated observations at a vertex are
//! collapsed into a single pseudo-observation (the mean of the readings with
//! noise variance `sigma^2 / n`), which is exact for i.i.d. Gaussian noise
//! and keeps the linear solves at `O(|V|^3)` regardless of how many samples
//! have been collected.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::GridGraph;

const JITTER: f64 = 1e-9;

/// Covariance function over grid vertices.
///
/// Grid coordinates are normalized to the unit square before distances are
/// taken, so a given length scale means the same thing on any grid size.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    SquaredExponential {
        length_scale: f64,
        signal_variance: f64,
    },
    /// Independent vertices: `kappa(u, v) = 0` for `u != v`.
    Diagonal { signal_variance: f64 },
}

impl Kernel {
    pub fn signal_variance(&self) -> f64 {
        match *self {
            Kernel::SquaredExponential {
                signal_variance, ..
            }
            | Kernel::Diagonal { signal_variance } => signal_variance,
        }
    }

    fn normalized_coords(g: &GridGraph) -> Vec<(f64, f64)> {
        let rs = if g.rows > 1 { (g.rows - 1) as f64 } else { 1.0 };
        let cs = if g.cols > 1 { (g.cols - 1) as f64 } else { 1.0 };
        (0..g.vertex_count())
            .map(|v| {
                let (r, c) = g.coord(v);
                (r as f64 / rs, c as f64 / cs)
            })
            .collect()
    }

    /// Full `|V| x |V|` covariance matrix.
    pub fn matrix(&self, g: &GridGraph) -> DMatrix<f64> {
        let n = g.vertex_count();
        match *self {
            Kernel::Diagonal { signal_variance } => {
                DMatrix::from_diagonal_element(n, n, signal_variance)
            }
            Kernel::SquaredExponential {
                length_scale,
                signal_variance,
            } => {
                let coords = Self::normalized_coords(g);
                let mut k = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let dx = coords[i].0 - coords[j].0;
                        let dy = coords[i].1 - coords[j].1;
                        let val = signal_variance
                            * (-(dx * dx + dy * dy) / (2.0 * length_scale * length_scale)).exp();
                        k[(i, j)] = val;
                        k[(j, i)] = val;
                    }
                }
                k
            }
        }
    }
}

/// True reward density (and optional safety field) over vertices.
#[derive(Debug, Clone)]
pub struct RewardField {
    pub values: Vec<f64>,
    pub safety: Option<Vec<f64>>,
}

impl RewardField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument(
                "reward values must be non-negative".into(),
            ));
        }
        Ok(RewardField {
            values,
            safety: None,
        })
    }
}

/// GP posterior over all vertices plus the observation log that produced it.
#[derive(Debug, Clone)]
pub struct GpState {
    prior_mean: DVector<f64>,
    prior_cov: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub noise_var: f64,
    observations: Vec<(usize, f64)>,
}

impl GpState {
    pub fn new(kernel: &Kernel, g: &GridGraph, prior_mean: f64, noise_var: f64) -> Self {
        let n = g.vertex_count();
        let prior_mean = DVector::from_element(n, prior_mean);
        let prior_cov = kernel.matrix(g);
        GpState {
            mean: prior_mean.clone(),
            cov: prior_cov.clone(),
            prior_mean,
            prior_cov,
            noise_var,
        observations: Vec::new(),
        }
    }

    pub fn from_observations(
        kernel: &Kernel,
        g: &GridGraph,
        prior_mean: f64,
        noise_var: f64,
        observations: &[(usize, f64)],
    ) -> Result<Self> {
        let state = Self::new(kernel, g, prior_mean, noise_var);
        state.posterior_update(observations)
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.len()
    }

    pub fn observations(&self) -> &[(usize, f64)] {
        &self.observations
    }

    pub fn std_dev(&self, v: usize) -> f64 {
        self.cov[(v, v)].max(0.0).sqrt()
    }

    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.vertex_count()).map(|v| self.std_dev(v)).collect()
    }

    /// Returns a new state conditioned on the full accumulated observation
    /// set (previous log plus `batch`).
    pub fn posterior_update(&self, batch: &[(usize, f64)]) -> Result<GpState> {
        let n = self.vertex_count();
        for &(v, _) in batch {
            if v >= n {
                return Err(Error::InvalidVertex {
                    vertex: v,
                    vertex_count: n,
                });
            }
        }
        let mut observations = self.observations.clone();
        observations.extend_from_slice(batch);
        if observations.is_empty() {
            return Ok(self.clone());
        }

        // Collapse repeated vertices: n_v observations with noise sigma^2 are
        // equivalent to one observation of their mean with noise sigma^2/n_v.
        let mut counts = vec![0usize; n];
        let mut sums = vec![0.0f64; n];
        for &(v, y) in &observations {
            counts[v] += 1;
            sums[v] += y;
        }
        let support: Vec<usize> = (0..n).filter(|&v| counts[v] > 0).collect();
        let m = support.len();

        let mut k_ss = DMatrix::zeros(m, m);
        for (a, &u) in support.iter().enumerate() {
            for (b, &v) in support.iter().enumerate() {
                k_ss[(a, b)] = self.prior_cov[(u, v)];
            }
            k_ss[(a, a)] += self.noise_var / counts[u] as f64;
        }
        // Jitter only on fallback: the closed-form identities checked against
        // this solve hold exactly for the unjittered system.
        let chol = match k_ss.clone().cholesky() {
            Some(c) => c,
            None => {
                for a in 0..m {
                    k_ss[(a, a)] += JITTER;
                }
                k_ss.cholesky()
                    .ok_or_else(|| Error::NumericalFailure("posterior system not PD".into()))?
            }
        };

        let mut k_vs = DMatrix::zeros(n, m);
        for (b, &v) in support.iter().enumerate() {
            for u in 0..n {
                k_vs[(u, b)] = self.prior_cov[(u, v)];
            }
        }
        let residual = DVector::from_iterator(
            m,
            support
                .iter()
                .map(|&v| sums[v] / counts[v] as f64 - self.prior_mean[v]),
        );

        let mean = &self.prior_mean + &k_vs * chol.solve(&residual);
        let cov = &self.prior_cov - &k_vs * chol.solve(&k_vs.transpose());

        Ok(GpState {
            prior_mean: self.prior_mean.clone(),
            prior_cov: self.prior_cov.clone(),
            mean,
            cov,
            noise_var: self.noise_var,
            observations,
        })
    }
}

/// One multivariate-normal draw from the prior, shifted so `min(w) = 0`.
pub fn sample_prior_field<R: Rng>(kernel: &Kernel, g: &GridGraph, rng: &mut R) -> Result<RewardField> {
    let n = g.vertex_count();
    let mut k = kernel.matrix(g);
    for i in 0..n {
        k[(i, i)] += JITTER;
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("prior covariance not PD".into()))?;
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
    let draw = chol.l() * z;
    let min = draw.iter().cloned().fold(f64::INFINITY, f64::min);
    RewardField::new(draw.iter().map(|&x| x - min).collect())
}

/// Mutual information `1/2 log det(I + sigma^-2 K(s, s))` of a noisy sample
/// multiset `s` (nats).
///
/// Computed over the distinct-vertex support: by Sylvester's determinant
/// identity, `det(I_n + c A K A^T) = det(I_m + c K A^T A)` with `A` the
/// sample-to-vertex incidence matrix, and `A^T A = diag(counts)`.
pub fn info_gain(kernel: &Kernel, g: &GridGraph, noise_var: f64, samples: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample list".into()));
    }
    if noise_var <= 0.0 {
        return Err(Error::InvalidArgument(
            "info gain requires positive noise variance".into(),
        ));
    }
    let full = kernel.matrix(g);
    info_gain_multiset(&full, g.vertex_count(), noise_var, samples)
}

/// Same as [`info_gain`] but against an arbitrary covariance matrix (e.g. a
/// posterior covariance) over all vertices.
pub fn info_gain_multiset(
    cov: &DMatrix<f64>,
    vertex_count: usize,
    noise_var: f64,
    samples: &[usize],
) -> Result<f64> {
    let mut counts = vec![0usize; vertex_count];
    for &v in samples {
        if v >= vertex_count {
            return Err(Error::InvalidVertex {
                vertex: v,
                vertex_count,
            });
        }
        counts[v] += 1;
    }
    let support: Vec<usize> = (0..vertex_count).filter(|&v| counts[v] > 0).collect();
    let m = support.len();
    // Symmetrized form D^{1/2} K D^{1/2} with D = diag(counts): same spectrum
    // as K diag(counts), so the same determinant.
    let mut a = DMatrix::zeros(m, m);
    for (i, &u) in support.iter().enumerate() {
        for (j, &v) in support.iter().enumerate() {
            let scale = (counts[u] as f64 * counts[v] as f64).sqrt();
            a[(i, j)] = scale * cov[(u, v)] / noise_var;
        }
        a[(i, i)] += 1.0;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("info-gain matrix not PD".into()))?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(0.5 * logdet)
}

/// Largest eigenvalue of the covariance restricted to a sample multiset,
/// using the same distinct-support reduction as [`info_gain_multiset`].
pub fn multiset_lambda_max(
    cov: &DMatrix<f64>,
    vertex_count: usize,
    samples: &[usize],
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut counts = vec![0usize; vertex_count];
    for &v in samples {
        counts[v] += 1;
    }
    let support: Vec<usize> = (0..vertex_count).filter(|&v| counts[v] > 0).collect();
    let m = support.len();
    let mut a = DMatrix::zeros(m, m);
    for (i, &u) in support.iter().enumerate() {
        for (j, &v) in support.iter().enumerate() {
            let scale = (counts[u] as f64 * counts[v] as f64).sqrt();
            a[(i, j)] = scale * cov[(u, v)];
        }
    }
    let eig = a.symmetric_eigenvalues();
    Ok(eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Closed-form posterior variance at a vertex under a diagonal kernel after
/// `n_u` observations there: `1 / (n_u / sigma^2 + 1 / prior_var)`.
pub fn diagonal_posterior_variance(prior_var: f64, n_u: usize, noise_var: f64) -> f64 {
    if n_u == 0 {
        return prior_var;
    }
    1.0 / (n_u as f64 / noise_var + 1.0 / prior_var)
}
