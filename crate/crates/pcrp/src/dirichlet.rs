//! Count-conditioned Dirichlet prior with a power-transformed history, its
//! posterior predictive, and the matching compound count distribution.
//!
//! The prior density on the simplex is `Dir(p | alpha + N^r)` where `N^r` is
//! the element-wise `r`-th power of the historical count vector. Integrating
//! a (gamma-generalized) multinomial over this prior yields the compound
//! mass function implemented by [`log_powered_dirichlet_multinomial`]. For
//! `r != 1` that mass function does not sum to one over integer count vectors
//! of fixed total; [`log_powered_dirichlet_multinomial_renormalized`] divides
//! out the deficit when a proper distribution over compositions is needed.
//!
//! Everything is computed and returned in log space.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `x^r` with exact branches at `r = 0` and `r = 1`.
pub(crate) fn powf_exact(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 0.0 {
        1.0
    } else {
        x.powf(r)
    }
}

/// `ln B(v) = sum_k ln Gamma(v_k) - ln Gamma(sum_k v_k)`.
pub(crate) fn ln_multivariate_beta(v: &[f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    v.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(sum)
}

/// Concentration vector, count vector, and power of the conditioned prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PoweredDirichletParams {
    alpha: Vec<f64>,
    counts: Vec<f64>,
    r: f64,
}

impl PoweredDirichletParams {
    /// Counts are real-valued (powers of counts need not be integral).
    pub fn new(alpha: Vec<f64>, counts: Vec<f64>, r: f64) -> Result<Self> {
        if alpha.len() != counts.len() {
            return Err(Error::Input(format!(
                "{} concentrations vs {} counts",
                alpha.len(),
                counts.len()
            )));
        }
        if alpha.is_empty() {
            return Err(Error::Input("dimension must be >= 1".into()));
        }
        if alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::Parameter("all alpha_k must be positive".into()));
        }
        if counts.iter().any(|&n| !n.is_finite() || n < 0.0) {
            return Err(Error::Parameter("all counts must be >= 0".into()));
        }
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Parameter(format!("power r must be >= 0, got {r}")));
        }
        Ok(Self { alpha, counts, r })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The shifted concentration `alpha + N^r`.
    pub fn shifted_alpha(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.counts)
            .map(|(&a, &n)| a + powf_exact(n, self.r))
            .collect()
    }
}

/// A strictly interior point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("simplex point must have dimension >= 1".into()));
        }
        if probs.iter().any(|&p| !p.is_finite() || p <= 0.0 || p >= 1.0) {
            return Err(Error::Parameter(
                "simplex coordinates must lie strictly inside (0, 1)".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "simplex coordinates must sum to 1, got {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Log density of the count-conditioned prior at `p`:
/// `sum_k (alpha_k + N_k^r - 1) ln p_k - ln B(alpha + N^r)`.
pub fn log_powered_dirichlet_density(
    p: &SimplexPoint,
    params: &PoweredDirichletParams,
) -> Result<f64> {
    if p.probs().len() != params.dim() {
        return Err(Error::Input(format!(
            "point dimension {} vs parameter dimension {}",
            p.probs().len(),
            params.dim()
        )));
    }
    let shifted = params.shifted_alpha();
    let log_kernel: f64 = shifted
        .iter()
        .zip(p.probs())
        .map(|(&a, &pk)| (a - 1.0) * pk.ln())
        .sum();
    Ok(log_kernel - ln_multivariate_beta(&shifted))
}

/// Probability that the next draw lands in cluster `c`:
/// `(N_c^r + alpha_c) / sum_k (N_k^r + alpha_k)`.
pub fn posterior_predictive(params: &PoweredDirichletParams, c: usize) -> Result<f64> {
    if c >= params.dim() {
        return Err(Error::Input(format!(
            "cluster index {c} out of range for dimension {}",
            params.dim()
        )));
    }
    let shifted = params.shifted_alpha();
    let total: f64 = shifted.iter().sum();
    Ok(shifted[c] / total)
}

/// Log mass of a count vector under the powered compound distribution:
/// `ln [ B(alpha + N^r) Gamma(sum N^r + 1) / (B(alpha) prod_k Gamma(N_k^r + 1)) ]`.
///
/// Gamma functions generalize the factorials, so non-integer `N_k^r` are
/// valid. For `r != 1` the total mass over integer count vectors of fixed sum
/// is not 1; see [`log_powered_dirichlet_multinomial_renormalized`].
pub fn log_powered_dirichlet_multinomial(counts: &[f64], alpha: &[f64], r: f64) -> Result<f64> {
    let params = PoweredDirichletParams::new(alpha.to_vec(), counts.to_vec(), r)?;
    let shifted = params.shifted_alpha();
    let powered: Vec<f64> = counts.iter().map(|&n| powf_exact(n, r)).collect();
    let total_powered: f64 = powered.iter().sum();
    let log_coeff =
        ln_gamma(total_powered + 1.0) - powered.iter().map(|&x| ln_gamma(x + 1.0)).sum::<f64>();
    Ok(ln_multivariate_beta(&shifted) - ln_multivariate_beta(alpha) + log_coeff)
}

/// Calls `f` with every vector of `parts` non-negative integers summing to
/// `total`, in lexicographic order.
pub fn for_each_composition<F: FnMut(&[u64])>(total: u64, parts: usize, mut f: F) {
    assert!(parts >= 1);
    let mut current = vec![0u64; parts];
    fn recurse<F: FnMut(&[u64])>(current: &mut [u64], idx: usize, left: u64, f: &mut F) {
        if idx == current.len() - 1 {
            current[idx] = left;
            f(current);
            return;
        }
        for v in 0..=left {
            current[idx] = v;
            recurse(current, idx + 1, left - v, f);
        }
    }
    recurse(&mut current, 0, total, &mut f);
}

fn n_compositions(total: u64, parts: usize) -> f64 {
    // C(total + parts - 1, parts - 1)
    let mut c = 1.0f64;
    for i in 1..parts as u64 {
        c *= (total + i) as f64 / i as f64;
    }
    c
}

/// Log mass renormalized to sum to one over all integer compositions of
/// `sum(counts)` into `counts.len()` parts.
///
/// Refuses inputs with more than 10^6 compositions.
pub fn log_powered_dirichlet_multinomial_renormalized(
    counts: &[u64],
    alpha: &[f64],
    r: f64,
) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    let parts = counts.len();
    if parts != alpha.len() {
        return Err(Error::Input(format!(
            "{} counts vs {} concentrations",
            parts,
            alpha.len()
        )));
    }
    if n_compositions(total, parts) > 1e6 {
        return Err(Error::Input(format!(
            "refusing to renormalize over > 1e6 compositions (N = {total}, K = {parts})"
        )));
    }
    let as_real = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let target = log_powered_dirichlet_multinomial(&as_real(counts), alpha, r)?;
    let mut log_masses = Vec::new();
    let mut err = None;
    for_each_composition(total, parts, |comp| {
        match log_powered_dirichlet_multinomial(&as_real(comp), alpha, r) {
            Ok(lm) => log_masses.push(lm),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let m = log_masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = m + log_masses.iter().map(|&lm| (lm - m).exp()).sum::<f64>().ln();
    Ok(target - log_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(alpha: &[f64], counts: &[f64], r: f64) -> PoweredDirichletParams {
        PoweredDirichletParams::new(alpha.to_vec(), counts.to_vec(), r).unwrap()
    }

    #[test]
    fn flat_prior_density_is_uniform() {
        let p = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let d = log_powered_dirichlet_density(&p, &params(&[1.0, 1.0], &[0.0, 0.0], 1.0)).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn density_matches_beta_3_1() {
        // alpha = (1,1), counts = (2,0), r = 1 is Beta(3,1): density 3t^2.
        let p = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let d = log_powered_dirichlet_density(&p, &params(&[1.0, 1.0], &[2.0, 0.0], 1.0)).unwrap();
        assert_abs_diff_eq!(d, 0.75f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn density_integrates_to_one_on_2_simplex() {
        // Midpoint rule over 10^4 cells for alpha = (1,1), counts = (1,2), r = 2.
        let prm = params(&[1.0, 1.0], &[1.0, 2.0], 2.0);
        let cells = 10_000usize;
        let h = 1.0 / cells as f64;
        let mut integral = 0.0;
        for i in 0..cells {
            let t = (i as f64 + 0.5) * h;
            let p = SimplexPoint::new(vec![t, 1.0 - t]).unwrap();
            integral += log_powered_dirichlet_density(&p, &prm).unwrap().exp() * h;
        }
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn boundary_point_rejected() {
        assert!(SimplexPoint::new(vec![0.0, 1.0]).is_err());
        assert!(SimplexPoint::new(vec![0.3, 0.3]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let prm = params(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0], 1.0);
        assert!(log_powered_dirichlet_density(&p, &prm).is_err());
    }

    #[test]
    fn predictive_examples() {
        let p = posterior_predictive(&params(&[1.0, 1.0], &[1.0, 2.0], 2.0), 1).unwrap();
        assert_abs_diff_eq!(p, 5.0 / 7.0, epsilon = 1e-15);

        let p = posterior_predictive(&params(&[1.0, 1.0], &[0.0, 0.0], 0.7), 0).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        let p = posterior_predictive(&params(&[1.0, 1.0], &[3.0, 1.0], 1.0), 0).unwrap();
        assert_abs_diff_eq!(p, 4.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn predictive_sums_to_one() {
        let prm = params(&[0.5, 1.5, 2.0], &[4.0, 0.0, 9.0], 1.7);
        let total: f64 = (0..3).map(|c| posterior_predictive(&prm, c).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(posterior_predictive(&prm, 3).is_err());
    }

    #[test]
    fn predictive_reduces_to_dirichlet_multinomial_at_r1() {
        let alpha = [0.7, 1.3, 2.0];
        let counts = [5.0, 0.0, 2.0];
        let n: f64 = counts.iter().sum();
        let a: f64 = alpha.iter().sum();
        let prm = params(&alpha, &counts, 1.0);
        for c in 0..3 {
            let expected = (alpha[c] + counts[c]) / (a + n);
            assert_abs_diff_eq!(
                posterior_predictive(&prm, c).unwrap(),
                expected,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn predictive_flattens_at_r0() {
        let prm = params(&[1.0, 1.0, 1.0], &[50.0, 3.0, 0.0], 0.0);
        for c in 0..3 {
            assert_abs_diff_eq!(
                posterior_predictive(&prm, c).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn pmf_standard_case() {
        let lp = log_powered_dirichlet_multinomial(&[1.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(lp, (1.0f64 / 3.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn pmf_normalizes_at_r1() {
        let alpha = [1.0, 1.0];
        let mut total = 0.0;
        for_each_composition(3, 2, |comp| {
            let counts: Vec<f64> = comp.iter().map(|&x| x as f64).collect();
            total += log_powered_dirichlet_multinomial(&counts, &alpha, 1.0)
                .unwrap()
                .exp();
        });
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pmf_matches_quadrature_at_fractional_r() {
        // K = 2, alpha = (1,1), counts = (4,1), r = 0.5. The integrand is
        // Gamma(s+1)/(Gamma(n1+1)Gamma(n2+1)) p^n1 (1-p)^n2 with n = counts^r,
        // integrated against a flat Dir(1,1) prior via composite Simpson.
        let counts = [4.0f64, 1.0];
        let r = 0.5;
        let n1 = counts[0].powf(r);
        let n2 = counts[1].powf(r);
        let log_coeff = ln_gamma(n1 + n2 + 1.0) - ln_gamma(n1 + 1.0) - ln_gamma(n2 + 1.0);
        let f = |p: f64| (log_coeff + n1 * p.ln() + n2 * (1.0 - p).ln()).exp();
        let intervals = 20_000usize; // even
        let h = 1.0 / intervals as f64;
        let mut acc = 0.0;
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        // f(0) = f(1) = 0 since n1, n2 > 0.
        let integral = acc * h / 3.0;
        let lp = log_powered_dirichlet_multinomial(&counts, &[1.0, 1.0], r).unwrap();
        assert_abs_diff_eq!(lp.exp(), integral, epsilon = 1e-6);
    }

    /// Product of predictive terms along an arrival order, starting from
    /// zero counts.
    fn ordered_log_predictive_product(order: &[usize], dim: usize, alpha: &[f64], r: f64) -> f64 {
        let mut counts = vec![0.0f64; dim];
        let mut log_prob = 0.0;
        for &c in order {
            let prm = PoweredDirichletParams::new(alpha.to_vec(), counts.clone(), r).unwrap();
            log_prob += posterior_predictive(&prm, c).unwrap().ln();
            counts[c] += 1.0;
        }
        log_prob
    }

    #[test]
    fn chain_rule_holds_at_r1_and_fails_otherwise() {
        let alpha = [1.0, 1.0];
        // counts (3,1): two arrival orders of the same multiset.
        let order_a = [0, 0, 0, 1];
        let order_b = [0, 1, 0, 0];

        let seq_a = ordered_log_predictive_product(&order_a, 2, &alpha, 1.0);
        let seq_b = ordered_log_predictive_product(&order_b, 2, &alpha, 1.0);
        assert_abs_diff_eq!(seq_a, seq_b, epsilon = 1e-12);
        // pmf = multinomial coefficient x ordered product at r = 1.
        let log_coeff = ln_gamma(5.0) - ln_gamma(4.0) - ln_gamma(2.0);
        let lp = log_powered_dirichlet_multinomial(&[3.0, 1.0], &alpha, 1.0).unwrap();
        assert_abs_diff_eq!(lp, log_coeff + seq_a, epsilon = 1e-10);

        // Non-exchangeability witness at r = 0.5.
        let seq_a = ordered_log_predictive_product(&order_a, 2, &alpha, 0.5);
        let seq_b = ordered_log_predictive_product(&order_b, 2, &alpha, 0.5);
        assert!(
            (seq_a - seq_b).abs() > 1e-6,
            "orders should disagree at r != 1: {seq_a} vs {seq_b}"
        );
    }

    #[test]
    fn renormalized_variant() {
        // At r = 1 the mass already sums to one, so renormalizing is a no-op.
        let plain = log_powered_dirichlet_multinomial(&[2.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        let renorm =
            log_powered_dirichlet_multinomial_renormalized(&[2, 1], &[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(plain, renorm, epsilon = 1e-10);

        // At r = 0.5 the renormalized masses sum to exactly one.
        let mut total = 0.0;
        for_each_composition(5, 3, |comp| {
            total += log_powered_dirichlet_multinomial_renormalized(comp, &[1.0, 1.0, 1.0], 0.5)
                .unwrap()
                .exp();
        });
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);

        // And the un-renormalized masses do not.
        let mut raw_total = 0.0;
        for_each_composition(5, 3, |comp| {
            let counts: Vec<f64> = comp.iter().map(|&x| x as f64).collect();
            raw_total += log_powered_dirichlet_multinomial(&counts, &[1.0, 1.0, 1.0], 0.5)
                .unwrap()
                .exp();
        });
        assert!((raw_total - 1.0).abs() > 1e-3, "deficit expected, got {raw_total}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(PoweredDirichletParams::new(vec![1.0], vec![1.0, 2.0], 1.0).is_err());
        assert!(PoweredDirichletParams::new(vec![0.0, 1.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(PoweredDirichletParams::new(vec![1.0, 1.0], vec![-1.0, 0.0], 1.0).is_err());
        assert!(PoweredDirichletParams::new(vec![1.0, 1.0], vec![0.0, 0.0], -0.2).is_err());
    }
}
