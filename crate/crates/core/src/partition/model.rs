//! Marginal posterior for a partition given pairwise distances.
//!
//! Within-group and between-group distances are modelled as Gamma with
//! fixed shapes and Gamma-distributed rates; the rates integrate out in
//! closed form, so the likelihood depends on the partition only through
//! pair counts, log-sums and sums of the two groups. The partition prior
//! draws cluster sizes from a negative binomial shifted to start at 1 and
//! the cluster count from a zero-truncated Poisson, with a K! correction
//! for label order.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Distances at or below zero are floored here before taking logs.
pub(crate) const DISTANCE_FLOOR: f64 = 1e-9;

/// Hyperparameters and chain controls for partition sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Total sweeps, including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Gamma shape for within-group distances.
    pub alpha_w: f64,
    /// Gamma shape for between-group distances.
    pub alpha_b: f64,
    /// Gamma hyperprior (shape, rate) on the within-group rate.
    pub a_w: f64,
    pub b_w: f64,
    /// Gamma hyperprior (shape, rate) on the between-group rate.
    pub a_b: f64,
    pub b_b: f64,
    /// Negative-binomial cluster-size prior: size - 1 ~ NB(size_r, size_p).
    pub size_r: f64,
    pub size_p: f64,
    /// Zero-truncated Poisson prior on the number of clusters.
    pub lambda_k: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            seed: 0,
            alpha_w: 2.0,
            alpha_b: 2.0,
            a_w: 1.0,
            b_w: 1.0,
            a_b: 1.0,
            b_b: 1.0,
            size_r: 3.0,
            size_p: 0.5,
            lambda_k: 4.0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::validation("burn_in must be smaller than iterations"));
        }
        if self.thin == 0 {
            return Err(Error::validation("thin must be at least 1"));
        }
        for (name, v) in [
            ("alpha_w", self.alpha_w),
            ("alpha_b", self.alpha_b),
            ("a_w", self.a_w),
            ("b_w", self.b_w),
            ("a_b", self.a_b),
            ("b_b", self.b_b),
            ("size_r", self.size_r),
            ("lambda_k", self.lambda_k),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(format!("{name} must be finite and positive")));
            }
        }
        if !self.size_p.is_finite() || self.size_p <= 0.0 || self.size_p >= 1.0 {
            return Err(Error::validation("size_p must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}

/// Log marginal likelihood of one distance group: `n_pairs` Gamma
/// observations with shape `alpha` whose common rate carries a
/// Gamma(a, b) prior, integrated out. `sum_ln` and `sum_d` are the sums
/// of log-distances and distances.
fn group_term(n_pairs: usize, sum_ln: f64, sum_d: f64, alpha: f64, a: f64, b: f64) -> f64 {
    let na = n_pairs as f64 * alpha;
    (alpha - 1.0) * sum_ln - n_pairs as f64 * ln_gamma(alpha) + ln_gamma(a + na) - ln_gamma(a)
        + a * b.ln()
        - (a + na) * (b + sum_d).ln()
}

/// Distances, caches and hyperparameters shared by the posterior
/// evaluation and the sampler. Items are indexed as in `d`.
pub(crate) struct Model {
    pub n: usize,
    d: Vec<f64>,
    ln_d: Vec<f64>,
    pub cfg: McmcConfig,
    ln_size_pmf: Vec<f64>,
    ln_count_prior: Vec<f64>,
    n_pairs: usize,
    l_tot: f64,
    s_tot: f64,
    /// When false the likelihood is dropped and only the prior is
    /// sampled.
    pub use_likelihood: bool,
}

impl Model {
    pub fn new(d: &DissimilarityMatrix, cfg: &McmcConfig) -> Result<Model> {
        cfg.validate()?;
        if !d.is_complete() {
            return Err(Error::validation(
                "posterior needs a complete distance matrix; impute missing entries first",
            ));
        }
        let n = d.n();
        if n == 0 {
            return Err(Error::validation("empty distance matrix"));
        }
        let mut dist = vec![0.0; n * n];
        let mut ln_d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = d.get(i, j).unwrap().max(DISTANCE_FLOOR);
                dist[i * n + j] = v;
                ln_d[i * n + j] = v.ln();
            }
        }
        let mut l_tot = 0.0;
        let mut s_tot = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                l_tot += ln_d[i * n + j];
                s_tot += dist[i * n + j];
            }
        }

        let r = cfg.size_r;
        let p = cfg.size_p;
        let lambda = cfg.lambda_k;
        // ln P(size = s) for s - 1 ~ NB(r, p), cached for s in 1..=n.
        let mut ln_size_pmf = vec![f64::NEG_INFINITY; n + 1];
        for (s, slot) in ln_size_pmf.iter_mut().enumerate().skip(1) {
            let k = (s - 1) as f64;
            *slot = ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0)
                + k * p.ln()
                + r * (1.0 - p).ln();
        }
        // ln P(K = k) for zero-truncated Poisson plus the ln K! label
        // correction, cached for k in 1..=n.
        let ln_trunc = (-(-lambda).exp()).ln_1p();
        let mut ln_count_prior = vec![f64::NEG_INFINITY; n + 1];
        for (k, slot) in ln_count_prior.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let ln_pois = kf * lambda.ln() - lambda - ln_gamma(kf + 1.0) - ln_trunc;
            *slot = ln_pois + ln_gamma(kf + 1.0);
        }

        Ok(Model {
            n,
            d: dist,
            ln_d,
            cfg: cfg.clone(),
            ln_size_pmf,
            ln_count_prior,
            n_pairs: n * (n - 1) / 2,
            l_tot,
            s_tot,
            use_likelihood: true,
        })
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    #[inline]
    pub fn ln_dist(&self, i: usize, j: usize) -> f64 {
        self.ln_d[i * self.n + j]
    }

    #[inline]
    pub fn ln_size(&self, s: usize) -> f64 {
        self.ln_size_pmf[s]
    }

    #[inline]
    pub fn ln_count(&self, k: usize) -> f64 {
        self.ln_count_prior[k]
    }

    /// Joint likelihood of both groups given the within-group pair sums;
    /// the between-group sums are the complements of the totals.
    pub fn loglik(&self, n_w: usize, l_w: f64, s_w: f64) -> f64 {
        self.loglik_with_totals((self.n_pairs, self.l_tot, self.s_tot), (n_w, l_w, s_w))
    }

    /// Likelihood over a subset of items: `tot` holds (count, sum of
    /// logs, sum) over the subset's pairs and `within` the same sums for
    /// its within-group pairs.
    pub fn loglik_with_totals(&self, tot: (usize, f64, f64), within: (usize, f64, f64)) -> f64 {
        if !self.use_likelihood {
            return 0.0;
        }
        group_term(within.0, within.1, within.2, self.cfg.alpha_w, self.cfg.a_w, self.cfg.b_w)
            + group_term(
                tot.0 - within.0,
                tot.1 - within.1,
                tot.2 - within.2,
                self.cfg.alpha_b,
                self.cfg.a_b,
                self.cfg.b_b,
            )
    }

    /// Within-group pair sums (count, sum of logs, sum of distances) for
    /// a label vector, accumulated in fixed i < j order.
    pub fn within_sums(&self, labels: &[usize]) -> (usize, f64, f64) {
        let mut n_w = 0usize;
        let mut l_w = 0.0;
        let mut s_w = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if labels[i] == labels[j] {
                    n_w += 1;
                    l_w += self.ln_dist(i, j);
                    s_w += self.dist(i, j);
                }
            }
        }
        (n_w, l_w, s_w)
    }

    pub fn log_prior(&self, sizes: &[usize]) -> f64 {
        let mut lp = self.ln_count(sizes.len());
        for &s in sizes {
            lp += self.ln_size(s);
        }
        lp
    }

    pub fn log_posterior_labels(&self, labels: &[usize]) -> f64 {
        let (n_w, l_w, s_w) = self.within_sums(labels);
        let mut sizes = vec![0usize; labels.iter().copied().max().unwrap_or(0) + 1];
        for &l in labels {
            sizes[l] += 1;
        }
        self.loglik(n_w, l_w, s_w) + self.log_prior(&sizes)
    }
}

/// Unnormalised log posterior of a partition given a complete distance
/// matrix: marginal Gamma likelihood of within- and between-group
/// distances plus the cluster-size and cluster-count prior.
pub fn partition_log_posterior(
    d: &DissimilarityMatrix,
    partition: &Partition,
    cfg: &McmcConfig,
) -> Result<f64> {
    if partition.n() != d.n() {
        return Err(Error::validation(format!(
            "partition covers {} items but the matrix has {}",
            partition.n(),
            d.n()
        )));
    }
    let model = Model::new(d, cfg)?;
    Ok(model.log_posterior_labels(partition.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(n: usize, f: impl Fn(usize, usize) -> f64) -> DissimilarityMatrix {
        let mut d = DissimilarityMatrix::new(n);
        for i in 0..n {
            for j in i + 1..n {
                d.set(i, j, f(i, j));
            }
        }
        d
    }

    #[test]
    fn defaults_match_the_documented_values() {
        let cfg = McmcConfig::default();
        assert_eq!(cfg.iterations, 20_000);
        assert_eq!(cfg.burn_in, 5_000);
        assert_eq!(cfg.thin, 10);
        assert_eq!(cfg.alpha_w, 2.0);
        assert_eq!(cfg.alpha_b, 2.0);
        assert_eq!((cfg.a_w, cfg.b_w, cfg.a_b, cfg.b_b), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((cfg.size_r, cfg.size_p, cfg.lambda_k), (3.0, 0.5, 4.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_rejects_inconsistent_controls() {
        let mut cfg = McmcConfig { iterations: 100, burn_in: 100, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.burn_in = 50;
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
        cfg.thin = 1;
        cfg.size_p = 1.0;
        assert!(cfg.validate().is_err());
        cfg.size_p = 0.5;
        cfg.alpha_w = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_item_posterior_is_the_pure_prior() {
        let d = DissimilarityMatrix::new(1);
        let cfg = McmcConfig::default();
        let p = Partition::from_labels(&[0]).unwrap();
        let got = partition_log_posterior(&d, &p, &cfg).unwrap();
        // One cluster of size one: NB mass at zero is (1-p)^r, the
        // truncated Poisson term is lambda e^-lambda / (1 - e^-lambda),
        // and ln 1! vanishes. No pairs, so the likelihood is zero.
        let lam: f64 = 4.0;
        let expected = 3.0 * 0.5f64.ln() + lam.ln() - lam - (-(-lam).exp()).ln_1p();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn size_prior_normalises_and_has_the_designed_mean() {
        let d = matrix_from(2, |_, _| 1.0);
        let model = Model::new(&d, &McmcConfig::default()).unwrap();
        // Extend the cached pmf by hand to check the tail.
        let (r, p): (f64, f64) = (3.0, 0.5);
        let mut total = 0.0;
        let mut mean = 0.0;
        for s in 1..400 {
            let k = (s - 1) as f64;
            let lp = ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0)
                + k * p.ln()
                + r * (1.0 - p).ln();
            if s <= 2 {
                assert!((model.ln_size(s) - lp).abs() < 1e-12);
            }
            total += lp.exp();
            mean += s as f64 * lp.exp();
        }
        assert!((total - 1.0).abs() < 1e-9, "size prior should normalise, got {total}");
        assert!((mean - 4.0).abs() < 1e-6, "mean size should be 1 + r p/(1-p) = 4, got {mean}");
    }

    #[test]
    fn group_term_matches_numerical_integration() {
        // Independent check of the closed-form marginal: integrate the
        // Gamma likelihood against the Gamma rate prior with Simpson's
        // rule and compare logs.
        let (alpha, a, b): (f64, f64, f64) = (2.0, 1.5, 0.7);
        let dists: [f64; 3] = [0.4, 1.3, 2.2];
        let integrand = |beta: f64| -> f64 {
            if beta <= 0.0 {
                return 0.0;
            }
            let mut ln_f = a * b.ln() + (a - 1.0) * beta.ln() - b * beta - ln_gamma(a);
            for &x in &dists {
                ln_f += alpha * beta.ln() + (alpha - 1.0) * x.ln() - beta * x - ln_gamma(alpha);
            }
            ln_f.exp()
        };
        let (lo, hi, steps) = (0.0, 25.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let mut sum = integrand(lo) + integrand(hi);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * integrand(lo + k as f64 * h);
        }
        let numeric = (sum * h / 3.0).ln();

        let sum_ln: f64 = dists.iter().map(|x| x.ln()).sum();
        let sum_d: f64 = dists.iter().sum();
        let closed = group_term(dists.len(), sum_ln, sum_d, alpha, a, b);
        assert!(
            (numeric - closed).abs() < 1e-9,
            "numeric {numeric} vs closed form {closed}"
        );
    }

    #[test]
    fn small_distances_favour_merging_when_within_rates_run_tight() {
        // Within prior concentrates on rate 4 (mean distance 0.5), the
        // between prior on rate 0.5 (mean distance 4).
        let cfg = McmcConfig {
            a_w: 4.0,
            b_w: 1.0,
            a_b: 2.0,
            b_b: 4.0,
            ..Default::default()
        };
        let together = Partition::from_labels(&[0, 0]).unwrap();
        let apart = Partition::from_labels(&[0, 1]).unwrap();

        let close = matrix_from(2, |_, _| 0.3);
        let lp_together = partition_log_posterior(&close, &together, &cfg).unwrap();
        let lp_apart = partition_log_posterior(&close, &apart, &cfg).unwrap();
        assert!(lp_together > lp_apart, "{lp_together} vs {lp_apart}");

        let far = matrix_from(2, |_, _| 6.0);
        let lp_together = partition_log_posterior(&far, &together, &cfg).unwrap();
        let lp_apart = partition_log_posterior(&far, &apart, &cfg).unwrap();
        assert!(lp_apart > lp_together, "{lp_apart} vs {lp_together}");
    }

    #[test]
    fn planted_blocks_beat_degenerate_partitions() {
        // Items 0-2 and 3-5 form tight blocks far from each other.
        let d = matrix_from(6, |i, j| if (i < 3) == (j < 3) { 0.2 } else { 3.0 });
        let cfg = McmcConfig::default();
        let planted = Partition::from_labels(&[0, 0, 0, 1, 1, 1]).unwrap();
        let singletons = Partition::from_labels(&[0, 1, 2, 3, 4, 5]).unwrap();
        let lumped = Partition::from_labels(&[0, 0, 0, 0, 0, 0]).unwrap();
        let lp_planted = partition_log_posterior(&d, &planted, &cfg).unwrap();
        let lp_singletons = partition_log_posterior(&d, &singletons, &cfg).unwrap();
        let lp_lumped = partition_log_posterior(&d, &lumped, &cfg).unwrap();
        assert!(lp_planted > lp_singletons);
        assert!(lp_planted > lp_lumped);
    }

    #[test]
    fn incomplete_matrix_is_rejected() {
        let mut d = DissimilarityMatrix::new(3);
        d.set(0, 1, 1.0);
        let p = Partition::from_labels(&[0, 0, 1]).unwrap();
        assert!(partition_log_posterior(&d, &p, &McmcConfig::default()).is_err());
    }

    #[test]
    fn zero_distances_are_floored() {
        let zeroed = matrix_from(3, |i, j| if (i, j) == (0, 1) { 0.0 } else { 1.0 });
        let floored = matrix_from(3, |i, j| if (i, j) == (0, 1) { DISTANCE_FLOOR } else { 1.0 });
        let p = Partition::from_labels(&[0, 0, 1]).unwrap();
        let cfg = McmcConfig::default();
        let a = partition_log_posterior(&zeroed, &p, &cfg).unwrap();
        let b = partition_log_posterior(&floored, &p, &cfg).unwrap();
        assert!(a.is_finite());
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let d = matrix_from(3, |_, _| 1.0);
        let p = Partition::from_labels(&[0, 1]).unwrap();
        assert!(partition_log_posterior(&d, &p, &McmcConfig::default()).is_err());
    }
}
