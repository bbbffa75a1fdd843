//! Agreement metrics between two partitions of the same points: adjusted
//! Rand index, adjusted mutual information, normalized variation of
//! information, Fowlkes-Mallows score, and the relative deviation of the
//! cluster count.
//!
//! Conventions (the literature varies): AMI is normalized by
//! `max(H(a), H(b))`, the variation of information by `ln n`, and the
//! Fowlkes-Mallows score of two all-singleton partitions (no positive pairs
//! on either side) is defined as 1.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Joint label counts with row/column marginals.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn from_partitions(a: &Partition, b: &Partition) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Input(format!(
                "partition lengths differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::Input("cannot compare empty partitions".into()));
        }
        let (ka, kb) = (a.n_clusters(), b.n_clusters());
        let mut counts = vec![vec![0u64; kb]; ka];
        for (&la, &lb) in a.labels().iter().zip(b.labels()) {
            counts[la][lb] += 1;
        }
        let row_marginals: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        let mut col_marginals = vec![0u64; kb];
        for row in &counts {
            for (c, &v) in col_marginals.iter_mut().zip(row) {
                *c += v;
            }
        }
        Ok(Self { counts, row_marginals, col_marginals, n: a.len() as u64 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    fn entropy_of(marginals: &[u64], n: u64) -> f64 {
        marginals
            .iter()
            .filter(|&&m| m > 0)
            .map(|&m| {
                let p = m as f64 / n as f64;
                -p * p.ln()
            })
            .sum()
    }

    pub fn entropy_rows(&self) -> f64 {
        Self::entropy_of(&self.row_marginals, self.n)
    }

    pub fn entropy_cols(&self) -> f64 {
        Self::entropy_of(&self.col_marginals, self.n)
    }

    pub fn joint_entropy(&self) -> f64 {
        let n = self.n as f64;
        self.counts
            .iter()
            .flatten()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    /// Mutual information in nats.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let pij = c as f64 / n;
                    mi += pij
                        * (n * c as f64
                            / (self.row_marginals[i] as f64 * self.col_marginals[j] as f64))
                            .ln();
                }
            }
        }
        mi
    }

    /// Expected mutual information under the permutation (hypergeometric)
    /// model with these marginals.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.n;
        let nf = n as f64;
        // ln k! table.
        let lf: Vec<f64> = (0..=n).map(|k| ln_gamma(k as f64 + 1.0)).collect();
        let mut emi = 0.0;
        for &ai in &self.row_marginals {
            for &bj in &self.col_marginals {
                let lo = 1.max((ai + bj).saturating_sub(n));
                let hi = ai.min(bj);
                for nij in lo..=hi {
                    let term = (nij as f64 / nf) * (nf * nij as f64 / (ai as f64 * bj as f64)).ln();
                    let log_weight = lf[ai as usize] + lf[bj as usize]
                        + lf[(n - ai) as usize]
                        + lf[(n - bj) as usize]
                        - lf[n as usize]
                        - lf[nij as usize]
                        - lf[(ai - nij) as usize]
                        - lf[(bj - nij) as usize]
                        - lf[(n + nij - ai - bj) as usize];
                    emi += term * log_weight.exp();
                }
            }
        }
        emi
    }
}

fn comb2(x: u64) -> f64 {
    x as f64 * (x as f64 - 1.0) / 2.0
}

/// Chance-adjusted Rand index in `[-1, 1]`; 1 for identical partitions.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let table = ContingencyTable::from_partitions(a, b)?;
    let index: f64 = table.counts().iter().flatten().map(|&c| comb2(c)).sum();
    let sum_a: f64 = table.row_marginals().iter().map(|&m| comb2(m)).sum();
    let sum_b: f64 = table.col_marginals().iter().map(|&m| comb2(m)).sum();
    let total_pairs = comb2(table.n());
    if total_pairs == 0.0 {
        return Ok(1.0); // single point: any two partitions coincide
    }
    let expected = sum_a * sum_b / total_pairs;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        // Both trivial in the same way (all singletons, or one block each).
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Mutual information adjusted for chance and normalized by
/// `max(H(a), H(b))`; 1 for identical partitions, ~0 for independent ones.
pub fn adjusted_mutual_info(a: &Partition, b: &Partition) -> Result<f64> {
    let table = ContingencyTable::from_partitions(a, b)?;
    let mi = table.mutual_information();
    let emi = table.expected_mutual_information();
    let h_max = table.entropy_rows().max(table.entropy_cols());
    let denom = h_max - emi;
    if denom.abs() < 1e-10 {
        return Ok(1.0); // both partitions trivial and identical in structure
    }
    Ok((mi - emi) / denom)
}

/// Variation of information divided by `ln n`, in `[0, 1]`;
/// 0 iff the partitions agree up to a label permutation.
pub fn normalized_variation_of_information(a: &Partition, b: &Partition) -> Result<f64> {
    let table = ContingencyTable::from_partitions(a, b)?;
    if table.n() == 1 {
        return Ok(0.0);
    }
    let vi = 2.0 * table.joint_entropy() - table.entropy_rows() - table.entropy_cols();
    Ok(vi.max(0.0) / (table.n() as f64).ln())
}

/// Fowlkes-Mallows score `TP / sqrt((TP+FP)(TP+FN))` over point pairs.
pub fn fowlkes_mallows(a: &Partition, b: &Partition) -> Result<f64> {
    let table = ContingencyTable::from_partitions(a, b)?;
    let tp: f64 = table.counts().iter().flatten().map(|&c| comb2(c)).sum();
    let pairs_a: f64 = table.row_marginals().iter().map(|&m| comb2(m)).sum();
    let pairs_b: f64 = table.col_marginals().iter().map(|&m| comb2(m)).sum();
    if pairs_a == 0.0 && pairs_b == 0.0 {
        return Ok(1.0); // both all-singletons: vacuously perfect
    }
    if pairs_a == 0.0 || pairs_b == 0.0 {
        return Ok(0.0);
    }
    Ok(tp / (pairs_a * pairs_b).sqrt())
}

/// `|inferred - truth| / truth`.
pub fn cluster_count_deviation(inferred_k: usize, true_k: usize) -> f64 {
    assert!(true_k > 0, "reference cluster count must be positive");
    (inferred_k as f64 - true_k as f64).abs() / true_k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_raw_labels(labels)
    }

    /// O(n^2) pair-counting Rand/Fowlkes-Mallows oracle.
    fn pair_counts(a: &Partition, b: &Partition) -> (f64, f64, f64, f64) {
        let (mut n11, mut n00, mut n10, mut n01) = (0.0, 0.0, 0.0, 0.0);
        let n = a.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = a.labels()[i] == a.labels()[j];
                let same_b = b.labels()[i] == b.labels()[j];
                match (same_a, same_b) {
                    (true, true) => n11 += 1.0,
                    (false, false) => n00 += 1.0,
                    (true, false) => n10 += 1.0,
                    (false, true) => n01 += 1.0,
                }
            }
        }
        (n11, n00, n10, n01)
    }

    fn brute_force_ari(a: &Partition, b: &Partition) -> f64 {
        let (n11, _, n10, n01) = pair_counts(a, b);
        let total = comb2(a.len() as u64);
        let sum_a = n11 + n10;
        let sum_b = n11 + n01;
        let expected = sum_a * sum_b / total;
        let max_index = 0.5 * (sum_a + sum_b);
        if (max_index - expected).abs() < 1e-12 {
            1.0
        } else {
            (n11 - expected) / (max_index - expected)
        }
    }

    fn brute_force_fm(a: &Partition, b: &Partition) -> f64 {
        let (n11, _, n10, n01) = pair_counts(a, b);
        if n11 + n10 == 0.0 && n11 + n01 == 0.0 {
            1.0
        } else if n11 + n10 == 0.0 || n11 + n01 == 0.0 {
            0.0
        } else {
            n11 / ((n11 + n10) * (n11 + n01)).sqrt()
        }
    }

    #[test]
    fn identical_partitions_are_perfect() {
        let a = part(&[0, 0, 1, 1, 2]);
        assert_abs_diff_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(adjusted_mutual_info(&a, &a).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            normalized_variation_of_information(&a, &a).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(fowlkes_mallows(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_chance_level_case() {
        let ones = part(&[0, 0, 0, 0]);
        let singles = part(&[0, 1, 2, 3]);
        assert_abs_diff_eq!(adjusted_rand_index(&ones, &singles).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            normalized_variation_of_information(&ones, &singles).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ari_witness_matches_pair_counting() {
        let a = part(&[0, 0, 1, 1]);
        let b = part(&[0, 0, 0, 1]);
        let ari = adjusted_rand_index(&a, &b).unwrap();
        assert_abs_diff_eq!(ari, brute_force_ari(&a, &b), epsilon = 1e-12);
    }

    #[test]
    fn fm_witness_and_singleton_convention() {
        let a = part(&[0, 0, 1, 2]);
        let b = part(&[0, 1, 1, 2]);
        assert_abs_diff_eq!(
            fowlkes_mallows(&a, &b).unwrap(),
            brute_force_fm(&a, &b),
            epsilon = 1e-12
        );
        let s = part(&[0, 1, 2, 3]);
        assert_abs_diff_eq!(fowlkes_mallows(&s, &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ami_matches_permutation_enumeration() {
        // Exact E[MI] by averaging over all 4! relabelings of b's points.
        let a = part(&[0, 0, 1, 1]);
        let b = part(&[0, 1, 0, 2]);
        let table = ContingencyTable::from_partitions(&a, &b).unwrap();
        let perms = [
            [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
            [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
            [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
            [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
        ];
        let mut emi = 0.0;
        for perm in perms {
            let shuffled: Vec<usize> = perm.iter().map(|&i| b.labels()[i]).collect();
            let bp = Partition::from_raw_labels(&shuffled);
            emi += ContingencyTable::from_partitions(&a, &bp)
                .unwrap()
                .mutual_information();
        }
        emi /= perms.len() as f64;
        assert_abs_diff_eq!(table.expected_mutual_information(), emi, epsilon = 1e-10);

        let expected_ami = (table.mutual_information() - emi)
            / (table.entropy_rows().max(table.entropy_cols()) - emi);
        assert_abs_diff_eq!(
            adjusted_mutual_info(&a, &b).unwrap(),
            expected_ami,
            epsilon = 1e-10
        );
    }

    #[test]
    fn ami_near_zero_for_independent_labelings() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let ami = adjusted_mutual_info(&part(&a), &part(&b)).unwrap();
        assert!(ami.abs() < 0.02, "AMI = {ami}");
    }

    #[test]
    fn nvi_witness_matches_entropy_table() {
        // 4-point witness; conditional entropies computed by hand:
        // a = (0,0,1,1), b = (0,1,1,1):
        //   H(a)     = ln 2
        //   H(b)     = -(1/4)ln(1/4) - (3/4)ln(3/4)
        //   H(a, b)  = -(1/4)ln(1/4)*2 - (2/4)ln(2/4)
        let a = part(&[0, 0, 1, 1]);
        let b = part(&[0, 1, 1, 1]);
        let h_a = 2.0f64.ln();
        let h_b = -(0.25f64.ln() * 0.25 + 0.75 * 0.75f64.ln());
        let h_ab = -(2.0 * 0.25 * 0.25f64.ln() + 0.5 * 0.5f64.ln());
        let vi = (h_ab - h_b) + (h_ab - h_a);
        assert_abs_diff_eq!(
            normalized_variation_of_information(&a, &b).unwrap(),
            vi / 4.0f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cluster_count_deviation_cases() {
        assert_abs_diff_eq!(cluster_count_deviation(3, 3), 0.0);
        assert_abs_diff_eq!(cluster_count_deviation(6, 3), 1.0);
        assert_abs_diff_eq!(cluster_count_deviation(2, 4), 0.5);
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = part(&[0, 1]);
        let b = part(&[0, 1, 1]);
        assert!(adjusted_rand_index(&a, &b).is_err());
        assert!(adjusted_mutual_info(&a, &b).is_err());
        assert!(normalized_variation_of_information(&a, &b).is_err());
        assert!(fowlkes_mallows(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn ari_fm_match_brute_force(
            labels_a in proptest::collection::vec(0usize..6, 2..50),
            seed in 0u64..1000,
        ) {
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels_b: Vec<usize> =
                (0..labels_a.len()).map(|_| rng.random_range(0..4)).collect();
            let a = part(&labels_a);
            let b = part(&labels_b);
            prop_assert!((adjusted_rand_index(&a, &b).unwrap() - brute_force_ari(&a, &b)).abs() < 1e-10);
            prop_assert!((fowlkes_mallows(&a, &b).unwrap() - brute_force_fm(&a, &b)).abs() < 1e-10);
        }

        #[test]
        fn metrics_are_symmetric_and_label_invariant(
            labels_a in proptest::collection::vec(0usize..5, 2..40),
            labels_b in proptest::collection::vec(0usize..5, 2..40),
            offset in 1usize..4,
        ) {
            let n = labels_a.len().min(labels_b.len());
            let a = part(&labels_a[..n]);
            let b = part(&labels_b[..n]);
            // Symmetry.
            prop_assert!((adjusted_rand_index(&a, &b).unwrap() - adjusted_rand_index(&b, &a).unwrap()).abs() < 1e-10);
            prop_assert!((adjusted_mutual_info(&a, &b).unwrap() - adjusted_mutual_info(&b, &a).unwrap()).abs() < 1e-10);
            prop_assert!((normalized_variation_of_information(&a, &b).unwrap() - normalized_variation_of_information(&b, &a).unwrap()).abs() < 1e-10);
            prop_assert!((fowlkes_mallows(&a, &b).unwrap() - fowlkes_mallows(&b, &a).unwrap()).abs() < 1e-10);
            // Invariance under a label permutation of `a` (cyclic shift).
            let k = a.n_clusters();
            let shifted: Vec<usize> = a.labels().iter().map(|&l| (l + offset) % k).collect();
            let ap = Partition::from_raw_labels(&shifted);
            prop_assert!((adjusted_rand_index(&ap, &b).unwrap() - adjusted_rand_index(&a, &b).unwrap()).abs() < 1e-10);
            prop_assert!((adjusted_mutual_info(&ap, &b).unwrap() - adjusted_mutual_info(&a, &b).unwrap()).abs() < 1e-10);
            prop_assert!((normalized_variation_of_information(&ap, &b).unwrap() - normalized_variation_of_information(&a, &b).unwrap()).abs() < 1e-10);
            prop_assert!((fowlkes_mallows(&ap, &b).unwrap() - fowlkes_mallows(&a, &b).unwrap()).abs() < 1e-10);
        }
    }
}
