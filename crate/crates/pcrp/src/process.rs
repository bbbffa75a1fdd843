//! Sequential seating processes: CRP, Pitman-Yor, Uniform, and the powered
//! generalization that interpolates between them.
//!
//! A seating process assigns customer `n+1` to one of the `K` occupied tables
//! or to a fresh table. The four supported predictive rules differ only in the
//! mass they give an occupied table of population `N_k` and a new table:
//!
//! | kind       | occupied mass | new-table mass |
//! |------------|---------------|----------------|
//! | CRP        | `N_k`         | `alpha`        |
//! | Pitman-Yor | `N_k - beta`  | `alpha + beta*K` |
//! | Uniform    | `1`           | `alpha`        |
//! | Powered    | `N_k^r`       | `alpha`        |
//!
//! `Powered` with `r = 1` reduces to the CRP and with `r = 0` to the Uniform
//! process; both reductions are bit-exact because those exponents take a
//! dedicated branch instead of going through `exp(r ln N_k)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which predictive rule a [`ProcessSpec`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Crp,
    PitmanYor,
    Uniform,
    Powered,
}

/// A fully validated seating-process specification.
///
/// `beta` is only meaningful for [`ProcessKind::PitmanYor`], `r` only for
/// [`ProcessKind::Powered`]; both are stored (and serialized) regardless so a
/// spec round-trips through config files unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    kind: ProcessKind,
    alpha: f64,
    beta: f64,
    r: f64,
}

impl ProcessSpec {
    pub fn crp(alpha: f64) -> Result<Self> {
        let spec = Self { kind: ProcessKind::Crp, alpha, beta: 0.0, r: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pitman_yor(alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self { kind: ProcessKind::PitmanYor, alpha, beta, r: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(alpha: f64) -> Result<Self> {
        let spec = Self { kind: ProcessKind::Uniform, alpha, beta: 0.0, r: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn powered(alpha: f64, r: f64) -> Result<Self> {
        let spec = Self { kind: ProcessKind::Powered, alpha, beta: 0.0, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Checks every parameter-domain constraint.
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        match self.kind {
            ProcessKind::PitmanYor => {
                if !self.beta.is_finite() || !(0.0..1.0).contains(&self.beta) {
                    return Err(Error::Parameter(format!(
                        "Pitman-Yor discount beta must lie in [0, 1), got {}",
                        self.beta
                    )));
                }
            }
            ProcessKind::Powered => {
                if !self.r.is_finite() || self.r < 0.0 {
                    return Err(Error::Parameter(format!(
                        "power r must be non-negative and finite, got {}",
                        self.r
                    )));
                }
            }
            ProcessKind::Crp | ProcessKind::Uniform => {}
        }
        Ok(())
    }
}

/// Populations of the occupied tables plus the full arrival history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeatingState {
    populations: Vec<u64>,
    history: Vec<usize>,
}

impl SeatingState {
    /// An empty restaurant.
    pub fn new() -> Self {
        Self { populations: Vec::new(), history: Vec::new() }
    }

    /// Builds a state with the given table populations and a canonical
    /// arrival history (table 0 filled first, then table 1, ...).
    pub fn from_populations(populations: &[u64]) -> Result<Self> {
        let mut history = Vec::new();
        for (k, &n) in populations.iter().enumerate() {
            if n == 0 {
                return Err(Error::Input(format!("table {k} has population 0")));
            }
            history.extend(std::iter::repeat(k).take(n as usize));
        }
        Ok(Self { populations: populations.to_vec(), history })
    }

    pub fn populations(&self) -> &[u64] {
        &self.populations
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn n_customers(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn n_tables(&self) -> usize {
        self.populations.len()
    }

    /// Seats one customer at `table` (`table == n_tables()` opens a new one).
    pub(crate) fn seat(&mut self, table: usize) {
        debug_assert!(table <= self.populations.len());
        if table == self.populations.len() {
            self.populations.push(1);
        } else {
            self.populations[table] += 1;
        }
        self.history.push(table);
    }

    /// Verifies all structural invariants; intended for tests and debugging.
    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.populations.iter().sum();
        if total != self.history.len() as u64 {
            return Err(Error::Input(format!(
                "population sum {total} != history length {}",
                self.history.len()
            )));
        }
        if self.populations.iter().any(|&n| n == 0) {
            return Err(Error::Input("empty table present".into()));
        }
        let mut counts = vec![0u64; self.populations.len()];
        for &t in &self.history {
            if t >= counts.len() {
                return Err(Error::Input(format!("history references table {t}")));
            }
            counts[t] += 1;
        }
        if counts != self.populations {
            return Err(Error::Input("history inconsistent with populations".into()));
        }
        Ok(())
    }
}

impl Default for SeatingState {
    fn default() -> Self {
        Self::new()
    }
}

/// Mass of an occupied table with population `n` under `spec`.
///
/// `Powered` takes exact branches at `r = 0` and `r = 1` so the reductions to
/// the Uniform process and the CRP hold bit-for-bit.
pub(crate) fn table_weight(spec: &ProcessSpec, n: u64) -> Result<f64> {
    debug_assert!(n >= 1);
    let w = match spec.kind {
        ProcessKind::Crp => n as f64,
        ProcessKind::Uniform => 1.0,
        ProcessKind::PitmanYor => {
            let w = n as f64 - spec.beta;
            if w <= 0.0 {
                return Err(Error::Parameter(format!(
                    "discount {} leaves non-positive mass on a table of population {n}",
                    spec.beta
                )));
            }
            w
        }
        ProcessKind::Powered => {
            if spec.r == 1.0 {
                n as f64
            } else if spec.r == 0.0 {
                1.0
            } else {
                (spec.r * (n as f64).ln()).exp()
            }
        }
    };
    if !w.is_finite() {
        return Err(Error::Numerical(format!(
            "table mass overflowed for population {n} under {:?}",
            spec.kind
        )));
    }
    Ok(w)
}

/// Mass of opening a new table when `k` tables are occupied.
pub(crate) fn new_table_weight(spec: &ProcessSpec, k: usize) -> f64 {
    match spec.kind {
        ProcessKind::PitmanYor => spec.alpha + spec.beta * k as f64,
        _ => spec.alpha,
    }
}

/// Predictive probabilities for the next customer given table `populations`.
///
/// Entry `k < K` is the probability of joining table `k`; entry `K` is the
/// new-table probability. The powered rule with a generic exponent is
/// evaluated in log space with max-subtraction so huge `N_k^r` cannot
/// overflow.
pub fn predictive_probs_from_populations(
    populations: &[u64],
    spec: &ProcessSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if populations.iter().any(|&n| n == 0) {
        return Err(Error::Input("populations must all be >= 1".into()));
    }
    let k = populations.len();
    let general_powered =
        spec.kind == ProcessKind::Powered && spec.r != 0.0 && spec.r != 1.0;
    if general_powered {
        let mut log_w: Vec<f64> = Vec::with_capacity(k + 1);
        for &n in populations {
            log_w.push(spec.r * (n as f64).ln());
        }
        log_w.push(spec.alpha.ln());
        let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = log_w.iter().map(|&lw| (lw - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    } else {
        let mut w: Vec<f64> = Vec::with_capacity(k + 1);
        for &n in populations {
            w.push(table_weight(spec, n)?);
        }
        w.push(new_table_weight(spec, k));
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }
}

/// Predictive probabilities for the next customer of `state`.
pub fn predictive_probs(state: &SeatingState, spec: &ProcessSpec) -> Result<Vec<f64>> {
    predictive_probs_from_populations(state.populations(), spec)
}

/// Powered predictive rule with one exponent per table: table `k` carries
/// mass `N_k^{r_k}`, a new table carries mass `alpha`.
///
/// With `r_k = ln(N_k - beta) / ln(N_k)` and `alpha' = alpha + beta * K` this
/// reproduces the Pitman-Yor rule for tables of population >= 2; a table of
/// population 1 has `ln N_k = 0` and always carries mass 1 regardless of its
/// exponent, so that case is left to the caller.
pub fn powered_predictive_probs_with_exponents(
    populations: &[u64],
    alpha: f64,
    exponents: &[f64],
) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Parameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if populations.len() != exponents.len() {
        return Err(Error::Input(format!(
            "{} populations vs {} exponents",
            populations.len(),
            exponents.len()
        )));
    }
    if exponents.iter().any(|r| !r.is_finite()) {
        return Err(Error::Parameter("exponents must be finite".into()));
    }
    if populations.iter().any(|&n| n == 0) {
        return Err(Error::Input("populations must all be >= 1".into()));
    }
    let mut log_w: Vec<f64> = populations
        .iter()
        .zip(exponents)
        .map(|(&n, &r)| r * (n as f64).ln())
        .collect();
    log_w.push(alpha.ln());
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_w.iter().map(|&lw| (lw - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Seats one customer drawn from [`predictive_probs`]; returns the chosen
/// table index (`K` means a new table was opened).
pub fn step<R: Rng + ?Sized>(
    state: &mut SeatingState,
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<usize> {
    let probs = predictive_probs(state, spec)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = k;
            break;
        }
    }
    state.seat(chosen);
    Ok(chosen)
}

/// One full seating run with the quantities recorded at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(N, K)` at each checkpoint.
    pub k_over_n: Vec<(u64, usize)>,
    /// `(N, total occupied-table mass)` at each checkpoint; for the powered
    /// rule this is `sum_k N_k^r`.
    pub sum_nkr_over_n: Vec<(u64, f64)>,
    pub final_state: SeatingState,
    pub seed: u64,
}

/// Geometric checkpoint grid `{1, 2, 4, ..., n}`, always ending at `n`.
pub fn default_checkpoints(n: u64) -> Vec<u64> {
    let mut cps = Vec::new();
    let mut c = 1u64;
    while c < n {
        cps.push(c);
        c = c.saturating_mul(2);
    }
    cps.push(n);
    cps
}

/// Runs `n_customers` sequential seatings from an empty restaurant.
///
/// Deterministic given `(spec, n_customers, checkpoints, seed)`. Table masses
/// are maintained incrementally so a step costs `O(K)` additions and a single
/// power evaluation.
pub fn run_process(
    spec: &ProcessSpec,
    n_customers: u64,
    checkpoints: &[u64],
    seed: u64,
) -> Result<Trajectory> {
    spec.validate()?;
    if n_customers == 0 {
        return Err(Error::Input("n_customers must be >= 1".into()));
    }
    let mut cps: Vec<u64> = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if let (Some(&lo), Some(&hi)) = (cps.first(), cps.last()) {
        if lo < 1 || hi > n_customers {
            return Err(Error::Input(format!(
                "checkpoints must lie in [1, {n_customers}], got [{lo}, {hi}]"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut populations: Vec<u64> = Vec::new();
    let mut history: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut total_w = 0.0_f64;
    let mut k_over_n = Vec::with_capacity(cps.len());
    let mut sum_nkr_over_n = Vec::with_capacity(cps.len());
    let mut next_cp = 0usize;

    for m in 1..=n_customers {
        let new_w = new_table_weight(spec, populations.len());
        let u: f64 = rng.random::<f64>() * (new_w + total_w);
        let mut chosen = populations.len();
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = k;
                break;
            }
        }
        if chosen == populations.len() {
            populations.push(1);
            let w = table_weight(spec, 1)?;
            weights.push(w);
            total_w += w;
        } else {
            populations[chosen] += 1;
            let w = table_weight(spec, populations[chosen])?;
            total_w += w - weights[chosen];
            weights[chosen] = w;
        }
        history.push(chosen);

        if next_cp < cps.len() && cps[next_cp] == m {
            k_over_n.push((m, populations.len()));
            sum_nkr_over_n.push((m, total_w));
            next_cp += 1;
        }
    }

    Ok(Trajectory {
        k_over_n,
        sum_nkr_over_n,
        final_state: SeatingState { populations, history },
        seed,
    })
}

/// SplitMix64 finalizer; used to derive independent per-run seeds.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` in a batch keyed by `master_seed`.
pub fn derive_run_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Runs `n_runs` independent trajectories in parallel, one private RNG stream
/// per run.
pub fn run_many(
    spec: &ProcessSpec,
    n_customers: u64,
    checkpoints: &[u64],
    n_runs: usize,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            run_process(
                spec,
                n_customers,
                checkpoints,
                derive_run_seed(master_seed, i as u64),
            )
        })
        .collect()
}

/// Largest `n_customers` accepted by [`exact_expected_k`].
pub const MAX_EXACT_N: u32 = 8;

/// Exact `E[K]` after `n_customers` seatings, by exhaustive enumeration of
/// every assignment sequence weighted by its probability.
///
/// The sequence count grows factorially, so this refuses `n_customers > 8`.
pub fn exact_expected_k(spec: &ProcessSpec, n_customers: u32) -> Result<f64> {
    spec.validate()?;
    if n_customers == 0 {
        return Err(Error::Input("n_customers must be >= 1".into()));
    }
    if n_customers > MAX_EXACT_N {
        return Err(Error::Input(format!(
            "refusing exhaustive enumeration for N = {n_customers} > {MAX_EXACT_N}"
        )));
    }

    fn recurse(
        populations: &mut Vec<u64>,
        remaining: u32,
        prob: f64,
        spec: &ProcessSpec,
        acc: &mut f64,
    ) -> Result<()> {
        if remaining == 0 {
            *acc += prob * populations.len() as f64;
            return Ok(());
        }
        let probs = predictive_probs_from_populations(populations, spec)?;
        for (k, &p) in probs.iter().enumerate() {
            if k < populations.len() {
                populations[k] += 1;
                recurse(populations, remaining - 1, prob * p, spec, acc)?;
                populations[k] -= 1;
            } else {
                populations.push(1);
                recurse(populations, remaining - 1, prob * p, spec, acc)?;
                populations.pop();
            }
        }
        Ok(())
    }

    let mut acc = 0.0;
    let mut populations = Vec::new();
    recurse(&mut populations, n_customers, 1.0, spec, &mut acc)?;
    Ok(acc)
}

/// Closed-form `E[K]` for the CRP: `sum_{i=0}^{N-1} alpha / (alpha + i)`.
pub fn crp_expected_k(alpha: f64, n_customers: u64) -> f64 {
    (0..n_customers).map(|i| alpha / (alpha + i as f64)).sum()
}
