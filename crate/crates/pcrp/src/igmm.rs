//! Infinite Gaussian mixture model: Normal-Inverse-Wishart conjugate prior,
//! collapsed Gibbs sampling under any seating-process prior, and the joint
//! score used to pick the reported partition.
//!
//! Cluster parameters are integrated out analytically, so a sweep only
//! resamples assignments: each point is removed from its cluster and
//! re-seated with probability proportional to
//! `seating mass(cluster) x Student-t posterior predictive(point | cluster)`,
//! where the seating mass comes from the configured [`ProcessSpec`] applied
//! to the remaining points and a new cluster carries the new-table mass times
//! the prior predictive.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::process::{derive_run_seed, new_table_weight, ProcessKind, ProcessSpec};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Normal-Inverse-Wishart hyperparameters `(mu0, kappa0, Psi, nu0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams {
    mu0: DVector<f64>,
    kappa0: f64,
    psi: DMatrix<f64>,
    nu0: f64,
    ln_det_psi: f64,
}

impl NiwParams {
    pub fn new(mu0: DVector<f64>, kappa0: f64, psi: DMatrix<f64>, nu0: f64) -> Result<Self> {
        let d = mu0.len();
        if d == 0 {
            return Err(Error::Parameter("dimension must be >= 1".into()));
        }
        if !kappa0.is_finite() || kappa0 <= 0.0 {
            return Err(Error::Parameter(format!("kappa0 must be positive, got {kappa0}")));
        }
        if psi.nrows() != d || psi.ncols() != d {
            return Err(Error::Parameter(format!(
                "Psi must be {d}x{d}, got {}x{}",
                psi.nrows(),
                psi.ncols()
            )));
        }
        if mu0.iter().any(|x| !x.is_finite()) || psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("hyperparameters must be finite".into()));
        }
        let asym = (&psi - psi.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::Parameter(format!(
                "Psi must be symmetric (asymmetry {asym})"
            )));
        }
        if !nu0.is_finite() || nu0 <= d as f64 - 1.0 {
            return Err(Error::Parameter(format!(
                "nu0 must exceed D - 1 = {}, got {nu0}",
                d as f64 - 1.0
            )));
        }
        let chol = Cholesky::new(psi.clone())
            .ok_or_else(|| Error::Parameter("Psi is not positive definite".into()))?;
        let ln_det_psi = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(Self { mu0, kappa0, psi, nu0, ln_det_psi })
    }

    /// Weakly informative defaults from the data: `mu0` = mean,
    /// `kappa0 = 0.01`, `Psi` = diagonal of the per-axis variance,
    /// `nu0 = D + 2`.
    pub fn from_data(points: &[DVector<f64>]) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Input("cannot derive a prior from no data".into()));
        }
        let d = points[0].len();
        let mut mean = DVector::zeros(d);
        for p in points {
            mean += p;
        }
        mean /= n as f64;
        let mut var = DVector::from_element(d, 0.0);
        for p in points {
            let diff = p - &mean;
            for i in 0..d {
                var[i] += diff[i] * diff[i];
            }
        }
        var /= (n.max(2) - 1) as f64;
        // Degenerate axes still need a positive scale.
        let psi = DMatrix::from_diagonal(&var.map(|v| v.max(1e-6)));
        Self::new(mean, 0.01, psi, d as f64 + 2.0)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }
}

/// Count, coordinate sum, and outer-product sum of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    n: usize,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
}

impl ClusterStats {
    pub fn empty(dim: usize) -> Self {
        Self { n: 0, sum: DVector::zeros(dim), sum_outer: DMatrix::zeros(dim, dim) }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a DVector<f64>>>(dim: usize, points: I) -> Self {
        let mut stats = Self::empty(dim);
        for p in points {
            stats.add(p);
        }
        stats
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, x: &DVector<f64>) {
        self.n += 1;
        self.sum += x;
        self.sum_outer += x * x.transpose();
    }

    pub fn remove(&mut self, x: &DVector<f64>) {
        debug_assert!(self.n > 0);
        self.n -= 1;
        self.sum -= x;
        self.sum_outer -= x * x.transpose();
    }

    fn max_abs_diff(&self, other: &ClusterStats) -> f64 {
        let mut worst = (self.n as f64 - other.n as f64).abs();
        worst = worst.max((&self.sum - &other.sum).abs().max());
        worst.max((&self.sum_outer - &other.sum_outer).abs().max())
    }
}

/// Posterior NIW parameters after absorbing a cluster's statistics.
#[derive(Debug, Clone)]
pub struct NiwPosterior {
    pub mu: DVector<f64>,
    pub kappa: f64,
    pub psi: DMatrix<f64>,
    pub nu: f64,
}

/// Standard conjugate update `(mu_n, kappa_n, Psi_n, nu_n)`.
pub fn niw_posterior(stats: &ClusterStats, prior: &NiwParams) -> NiwPosterior {
    let n = stats.n as f64;
    if stats.n == 0 {
        return NiwPosterior {
            mu: prior.mu0.clone(),
            kappa: prior.kappa0,
            psi: prior.psi.clone(),
            nu: prior.nu0,
        };
    }
    let kappa = prior.kappa0 + n;
    let nu = prior.nu0 + n;
    let mean = &stats.sum / n;
    let mu = (&prior.mu0 * prior.kappa0 + &stats.sum) / kappa;
    let scatter = &stats.sum_outer - (&mean * mean.transpose()) * n;
    let dev = &mean - &prior.mu0;
    let psi = &prior.psi + scatter + (&dev * dev.transpose()) * (prior.kappa0 * n / kappa);
    NiwPosterior { mu, kappa, psi, nu }
}

/// Log density of a multivariate Student-t at `x`.
fn mvt_logpdf(x: &DVector<f64>, loc: &DVector<f64>, scale: &DMatrix<f64>, df: f64) -> Result<f64> {
    let d = x.len() as f64;
    let chol = Cholesky::new(scale.clone()).ok_or_else(|| {
        Error::Numerical("predictive scale matrix is not positive definite".into())
    })?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let diff = x - loc;
    let maha = diff.dot(&chol.solve(&diff));
    Ok(ln_gamma(0.5 * (df + d)) - ln_gamma(0.5 * df)
        - 0.5 * d * (df * std::f64::consts::PI).ln()
        - 0.5 * ln_det
        - 0.5 * (df + d) * (1.0 + maha / df).ln())
}

/// Posterior predictive log density of `x` for a cluster with statistics
/// `stats`: a Student-t with `nu_n - D + 1` degrees of freedom. An empty
/// cluster yields the prior predictive.
pub fn niw_posterior_predictive_logpdf(
    x: &DVector<f64>,
    stats: &ClusterStats,
    prior: &NiwParams,
) -> Result<f64> {
    if x.len() != prior.dim() {
        return Err(Error::Input(format!(
            "point dimension {} vs prior dimension {}",
            x.len(),
            prior.dim()
        )));
    }
    let post = niw_posterior(stats, prior);
    let d = prior.dim() as f64;
    let df = post.nu - d + 1.0;
    let scale = &post.psi * ((post.kappa + 1.0) / (post.kappa * df));
    mvt_logpdf(x, &post.mu, &scale, df)
}

fn ln_multigamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * LN_PI
        + (1..=d).map(|j| ln_gamma(a + (1.0 - j as f64) / 2.0)).sum::<f64>()
}

/// Log marginal likelihood of one cluster's points under the NIW prior.
pub fn niw_cluster_log_marginal(stats: &ClusterStats, prior: &NiwParams) -> Result<f64> {
    if stats.n == 0 {
        return Ok(0.0);
    }
    let d = prior.dim();
    let post = niw_posterior(stats, prior);
    let chol = Cholesky::new(post.psi.clone()).ok_or_else(|| {
        Error::Numerical("posterior scale matrix is not positive definite".into())
    })?;
    let ln_det_post = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let n = stats.n as f64;
    let df = d as f64;
    Ok(-(n * df / 2.0) * LN_PI + (df / 2.0) * (prior.kappa0 / post.kappa).ln()
        + (prior.nu0 / 2.0) * prior.ln_det_psi
        - (post.nu / 2.0) * ln_det_post
        + ln_multigamma(d, post.nu / 2.0)
        - ln_multigamma(d, prior.nu0 / 2.0))
}

/// Seating log-mass of an occupied cluster of size `m`; matches
/// [`crate::process::table_weight`] bit-for-bit at the reduction points.
fn seating_log_weight(spec: &ProcessSpec, m: usize) -> f64 {
    let m = m as f64;
    match spec.kind() {
        ProcessKind::Crp => m.ln(),
        ProcessKind::Uniform => 0.0,
        ProcessKind::PitmanYor => (m - spec.beta()).ln(),
        ProcessKind::Powered => {
            if spec.r() == 1.0 {
                m.ln()
            } else if spec.r() == 0.0 {
                0.0
            } else {
                spec.r() * m.ln()
            }
        }
    }
}

/// Assignments, per-cluster sufficient statistics, and the per-sweep joint
/// log-probability trace of one Gibbs chain.
#[derive(Debug, Clone)]
pub struct GibbsState {
    assignments: Vec<usize>,
    clusters: Vec<ClusterStats>,
    iteration: usize,
    log_likelihood_trace: Vec<f64>,
}

impl GibbsState {
    /// Starts with every point in a single cluster.
    pub fn init_single_cluster(data: &[DVector<f64>]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Input("data must be non-empty".into()));
        }
        let dim = data[0].len();
        let cluster = ClusterStats::from_points(dim, data.iter());
        Ok(Self {
            assignments: vec![0; data.len()],
            clusters: vec![cluster],
            iteration: 0,
            log_likelihood_trace: Vec::new(),
        })
    }

    /// Seats the points one at a time, each drawn from its reassignment
    /// weights given the points seated so far (a predictive draw of the
    /// model). Starting near the model's own guess avoids the slow singleton
    /// nucleation a one-cluster start suffers from.
    pub fn init_sequential<R: Rng + ?Sized>(
        data: &[DVector<f64>],
        prior: &NiwParams,
        spec: &ProcessSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Input("data must be non-empty".into()));
        }
        let mut state = Self {
            assignments: vec![0; data.len()],
            clusters: Vec::new(),
            iteration: 0,
            log_likelihood_trace: Vec::new(),
        };
        for (i, x) in data.iter().enumerate() {
            let weights = assignment_log_weights(x, &state, prior, spec)?;
            let chosen = sample_from_log_weights(&weights, rng)?;
            if chosen == state.clusters.len() {
                state.clusters.push(ClusterStats::empty(prior.dim()));
            }
            state.clusters[chosen].add(x);
            state.assignments[i] = chosen;
        }
        Ok(state)
    }

    /// Builds a state from an existing dense labeling.
    pub fn from_assignments(data: &[DVector<f64>], labels: &[usize]) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::Input("label count != point count".into()));
        }
        let partition = Partition::new(labels.to_vec())?;
        let dim = data.first().map(|p| p.len()).unwrap_or(0);
        let mut clusters = vec![ClusterStats::empty(dim); partition.n_clusters()];
        for (p, &l) in data.iter().zip(labels) {
            clusters[l].add(p);
        }
        Ok(Self {
            assignments: labels.to_vec(),
            clusters,
            iteration: 0,
            log_likelihood_trace: Vec::new(),
        })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster(&self, k: usize) -> &ClusterStats {
        &self.clusters[k]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_likelihood_trace
    }

    /// Recomputes every sufficient statistic from scratch and compares with
    /// the incrementally maintained ones.
    pub fn verify_stats(&self, data: &[DVector<f64>], tol: f64) -> Result<()> {
        let dim = data.first().map(|p| p.len()).unwrap_or(0);
        let mut fresh = vec![ClusterStats::empty(dim); self.clusters.len()];
        for (p, &l) in data.iter().zip(&self.assignments) {
            if l >= fresh.len() {
                return Err(Error::Numerical(format!("assignment {l} out of range")));
            }
            fresh[l].add(p);
        }
        for (k, (a, b)) in self.clusters.iter().zip(&fresh).enumerate() {
            let diff = a.max_abs_diff(b);
            if diff > tol {
                return Err(Error::Numerical(format!(
                    "cluster {k} statistics drifted by {diff}"
                )));
            }
        }
        Ok(())
    }

    fn remove_point(&mut self, i: usize, x: &DVector<f64>) {
        let label = self.assignments[i];
        self.clusters[label].remove(x);
        if self.clusters[label].n() == 0 {
            // Compact: move the last cluster into the hole.
            let last = self.clusters.len() - 1;
            self.clusters.swap_remove(label);
            if label != last {
                for l in self.assignments.iter_mut() {
                    if *l == last {
                        *l = label;
                    }
                }
            }
        }
    }
}

/// Unnormalized log reassignment weights of point `x` against the current
/// clusters; the last entry is the new-cluster weight.
pub fn assignment_log_weights(
    x: &DVector<f64>,
    state: &GibbsState,
    prior: &NiwParams,
    spec: &ProcessSpec,
) -> Result<Vec<f64>> {
    let k = state.clusters.len();
    let mut weights = Vec::with_capacity(k + 1);
    for cluster in &state.clusters {
        let lw = seating_log_weight(spec, cluster.n())
            + niw_posterior_predictive_logpdf(x, cluster, prior)?;
        weights.push(lw);
    }
    let empty = ClusterStats::empty(prior.dim());
    weights.push(
        new_table_weight(spec, k).ln() + niw_posterior_predictive_logpdf(x, &empty, prior)?,
    );
    Ok(weights)
}

fn sample_from_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Numerical("all reassignment weights vanished".into()));
    }
    let probs: Vec<f64> = log_weights.iter().map(|&lw| (lw - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(probs.len() - 1)
}

/// Removes point `i` from its cluster and re-seats it; returns the new label.
pub fn gibbs_resample_point<R: Rng + ?Sized>(
    state: &mut GibbsState,
    data: &[DVector<f64>],
    i: usize,
    prior: &NiwParams,
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<usize> {
    let x = &data[i];
    state.remove_point(i, x);
    let weights = assignment_log_weights(x, state, prior, spec)?;
    let chosen = sample_from_log_weights(&weights, rng)?;
    if chosen == state.clusters.len() {
        state.clusters.push(ClusterStats::empty(prior.dim()));
    }
    state.clusters[chosen].add(x);
    state.assignments[i] = chosen;
    Ok(chosen)
}

/// One full sweep: every point re-seated in a freshly shuffled order, then
/// the joint log-probability appended to the trace.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut GibbsState,
    data: &[DVector<f64>],
    prior: &NiwParams,
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<()> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    for &i in &order {
        gibbs_resample_point(state, data, i, prior, spec, rng)?;
    }
    state.iteration += 1;
    let lj = log_joint_of_labels(&state.assignments, data, prior, spec)?;
    state.log_likelihood_trace.push(lj);
    Ok(())
}

fn log_joint_of_labels(
    labels: &[usize],
    data: &[DVector<f64>],
    prior: &NiwParams,
    spec: &ProcessSpec,
) -> Result<f64> {
    let k_total = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    // Sequential seating mass in data order.
    let mut counts = vec![0usize; k_total];
    let mut weights = vec![0.0f64; k_total];
    let mut total_w = 0.0;
    let mut active = 0usize;
    let mut log_seating = 0.0;
    for &label in labels {
        let new_w = new_table_weight(spec, active);
        let denom = new_w + total_w;
        if counts[label] == 0 {
            log_seating += (new_w / denom).ln();
            active += 1;
        } else {
            log_seating += (weights[label] / denom).ln();
        }
        counts[label] += 1;
        let w = crate::process::table_weight(spec, counts[label] as u64)?;
        total_w += w - weights[label];
        weights[label] = w;
    }
    // Product of per-cluster marginal likelihoods.
    let dim = prior.dim();
    let mut clusters = vec![ClusterStats::empty(dim); k_total];
    for (p, &l) in data.iter().zip(labels) {
        clusters[l].add(p);
    }
    let mut log_lik = 0.0;
    for stats in &clusters {
        log_lik += niw_cluster_log_marginal(stats, prior)?;
    }
    Ok(log_seating + log_lik)
}

/// Joint log-probability of a partition: sequential seating mass of the
/// labels in data order times the product of per-cluster NIW marginal
/// likelihoods. Order-dependent whenever the seating rule is not
/// exchangeable (powered rule with `r != 1`).
pub fn log_joint(
    partition: &Partition,
    data: &[DVector<f64>],
    prior: &NiwParams,
    spec: &ProcessSpec,
) -> Result<f64> {
    if partition.len() != data.len() {
        return Err(Error::Input(format!(
            "partition has {} labels for {} points",
            partition.len(),
            data.len()
        )));
    }
    spec.validate()?;
    log_joint_of_labels(partition.labels(), data, prior, spec)
}

/// Sweep-count stability rule: stop once the mean of the last `window`
/// joint log-probabilities changes by less than `rel_tol` relative to the
/// mean of the window before it, or at `max_sweeps`.
#[derive(Debug, Clone, Copy)]
pub struct StoppingRule {
    pub window: usize,
    pub rel_tol: f64,
    pub max_sweeps: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { window: 20, rel_tol: 1e-4, max_sweeps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub n_clusters: usize,
}

/// Outcome of one chain: the best partition visited (by joint
/// log-probability), its score, the full trace, and whether the stability
/// rule fired before the sweep ceiling.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub partition: Partition,
    pub log_joint: f64,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

/// Runs one collapsed-Gibbs chain from the all-in-one-cluster start.
pub fn fit(
    data: &[DVector<f64>],
    prior: &NiwParams,
    spec: &ProcessSpec,
    stop: &StoppingRule,
    seed: u64,
) -> Result<FitResult> {
    spec.validate()?;
    if stop.window == 0 || stop.max_sweeps == 0 || !(stop.rel_tol > 0.0) {
        return Err(Error::Parameter("invalid stopping rule".into()));
    }
    if data.is_empty() {
        return Err(Error::Input("data must be non-empty".into()));
    }
    if data.iter().any(|p| p.len() != prior.dim() || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::Input(
            "data must be finite and match the prior dimension".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = GibbsState::init_sequential(data, prior, spec, &mut rng)?;
    let mut best_labels = state.assignments.clone();
    let mut best_lj = log_joint_of_labels(&best_labels, data, prior, spec)?;
    let mut trace = Vec::new();
    let mut converged = false;

    for sweep in 1..=stop.max_sweeps {
        gibbs_sweep(&mut state, data, prior, spec, &mut rng)?;
        let lj = *state.log_likelihood_trace.last().unwrap();
        trace.push(TracePoint {
            iteration: sweep,
            log_likelihood: lj,
            n_clusters: state.n_clusters(),
        });
        if lj > best_lj {
            best_lj = lj;
            best_labels = state.assignments.clone();
        }
        if sweep % 100 == 0 {
            state.verify_stats(data, 1e-8)?;
        }
        if sweep >= 2 * stop.window {
            let t = state.log_likelihood_trace.len();
            let recent: f64 =
                state.log_likelihood_trace[t - stop.window..].iter().sum::<f64>()
                    / stop.window as f64;
            let previous: f64 = state.log_likelihood_trace
                [t - 2 * stop.window..t - stop.window]
                .iter()
                .sum::<f64>()
                / stop.window as f64;
            if ((recent - previous) / previous).abs() < stop.rel_tol {
                converged = true;
                break;
            }
        }
    }

    Ok(FitResult {
        partition: Partition::new(best_labels)?,
        log_joint: best_lj,
        trace,
        converged,
    })
}

/// Independent chains in parallel, seeded from `(master_seed, chain index)`.
pub fn fit_many(
    data: &[DVector<f64>],
    prior: &NiwParams,
    spec: &ProcessSpec,
    stop: &StoppingRule,
    n_chains: usize,
    master_seed: u64,
) -> Result<Vec<FitResult>> {
    (0..n_chains)
        .into_par_iter()
        .map(|c| fit(data, prior, spec, stop, derive_run_seed(master_seed, c as u64)))
        .collect()
}

/// Converts row-major points to nalgebra vectors.
pub fn vectors_from_rows(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_row_slice(r)).collect()
}
