//! Feature-matrix assembly, 2D embedding and set recovery.
//!
//! Descriptor rows from several images are stacked, standardised, pushed
//! through an exact t-SNE (no tree approximation; corpora here are a few
//! hundred rows) and clustered with k-means. Row provenance carries the
//! ground-truth set labels through to evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::keypoints::{KeypointDescriptorSet, DESCRIPTOR_WIDTH};
use crate::partition::Partition;

const TSNE_ITERATIONS: usize = 1000;
const EXAGGERATION_PHASE: usize = 250;
const EXAGGERATION: f64 = 12.0;
const LEARNING_RATE: f64 = 200.0;
const PROB_FLOOR: f64 = 1e-12;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

/// Where one feature row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowProvenance {
    pub image_id: String,
    pub sherd_id: usize,
    pub set_id: usize,
}

/// Standardised feature rows with their provenance.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_provenance: Vec<RowProvenance>,
}

impl FeatureMatrix {
    /// Wraps raw row-major data. Values must be finite and the
    /// provenance must cover every row.
    pub fn from_rows(
        data: Vec<f64>,
        rows: usize,
        cols: usize,
        row_provenance: Vec<RowProvenance>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation("feature matrix must be non-empty"));
        }
        if data.len() != rows * cols {
            return Err(Error::validation("data length does not match rows x cols"));
        }
        if row_provenance.len() != rows {
            return Err(Error::validation("provenance must cover every row"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature values must be finite"));
        }
        Ok(FeatureMatrix { rows, cols, data, row_provenance })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn provenance(&self) -> &[RowProvenance] {
        &self.row_provenance
    }

    /// Ground-truth partition of rows by their set ids.
    pub fn set_partition(&self) -> Result<Partition> {
        let labels: Vec<usize> = self.row_provenance.iter().map(|p| p.set_id).collect();
        Partition::from_labels(&labels)
    }
}

/// Stacks descriptor sets into one standardised matrix. Each input is a
/// descriptor set plus its (sherd id, set id); rows appear in input
/// order. Columns are shifted to zero mean and scaled to unit variance;
/// zero-variance columns are left at zero.
pub fn build_feature_matrix(
    sets: &[(KeypointDescriptorSet, usize, usize)],
) -> Result<FeatureMatrix> {
    let rows: usize = sets.iter().map(|(s, _, _)| s.len()).sum();
    if rows == 0 {
        return Err(Error::validation("no descriptor rows to stack"));
    }
    let cols = DESCRIPTOR_WIDTH;
    let mut data = Vec::with_capacity(rows * cols);
    let mut row_provenance = Vec::with_capacity(rows);
    for (set, sherd_id, set_id) in sets {
        for i in 0..set.len() {
            data.extend_from_slice(set.descriptor(i));
            row_provenance.push(RowProvenance {
                image_id: set.image_id.clone(),
                sherd_id: *sherd_id,
                set_id: *set_id,
            });
        }
    }
    for c in 0..cols {
        let mean = (0..rows).map(|r| data[r * cols + c]).sum::<f64>() / rows as f64;
        let var = (0..rows)
            .map(|r| {
                let d = data[r * cols + c] - mean;
                d * d
            })
            .sum::<f64>()
            / rows as f64;
        let sd = var.sqrt();
        for r in 0..rows {
            let v = &mut data[r * cols + c];
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
    FeatureMatrix::from_rows(data, rows, cols, row_provenance)
}

/// A 2D projection of the feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub points: Vec<(f64, f64)>,
    pub final_kl: f64,
}

/// Squared Euclidean distances between all rows.
fn pairwise_sq(m: &FeatureMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = m
                .row(i)
                .iter()
                .zip(m.row(j))
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum();
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }
    d2
}

/// Conditional affinities p(j|i): one Gaussian per point, its bandwidth
/// binary-searched so the row entropy matches ln(perplexity). Each row
/// sums to 1.
fn conditional_affinities(d2: &[f64], n: usize, perplexity: usize) -> Vec<f64> {
    let target = (perplexity as f64).ln();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut beta = 1.0;
            let mut beta_lo = f64::NEG_INFINITY;
            let mut beta_hi = f64::INFINITY;
            let mut row = vec![0.0; n];
            for _ in 0..64 {
                let mut sum = 0.0;
                for j in 0..n {
                    row[j] = if j == i { 0.0 } else { (-beta * d2[i * n + j]).exp() };
                    sum += row[j];
                }
                // Entropy of the normalised row, in nats.
                let mut h = 0.0;
                for &p in &row {
                    if p > 0.0 {
                        let q = p / sum;
                        h -= q * q.ln();
                    }
                }
                let diff = h - target;
                if diff.abs() < 1e-7 {
                    break;
                }
                if diff > 0.0 {
                    beta_lo = beta;
                    beta = if beta_hi.is_finite() { (beta + beta_hi) / 2.0 } else { beta * 2.0 };
                } else {
                    beta_hi = beta;
                    beta = if beta_lo.is_finite() { (beta + beta_lo) / 2.0 } else { beta / 2.0 };
                }
            }
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            row
        })
        .collect_into_vec(&mut rows);
    let mut cond = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    cond
}

/// Symmetrised joint affinities: (P + Pᵀ) / 2n, which sums to 1.
fn symmetrise(cond: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

fn initial_embedding(n: usize, rng: &mut ChaCha20Rng) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, 1e-4).unwrap();
    (0..n).map(|_| (normal.sample(rng), normal.sample(rng))).collect()
}

/// Student-t similarities in the embedding and their total mass.
fn low_dim_kernel(y: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i].0 - y[j].0;
            let dy = y[i].1 - y[j].1;
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = w;
            num[j * n + i] = w;
            total += 2.0 * w;
        }
    }
    (num, total)
}

fn kl_divergence(p: &[f64], y: &[(f64, f64)]) -> f64 {
    let n = y.len();
    let (num, total) = low_dim_kernel(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j].max(PROB_FLOOR);
            let qij = (num[i * n + j] / total).max(PROB_FLOOR);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}

/// Exact t-SNE to two dimensions. Early exaggeration multiplies the
/// input affinities by 12 for the first 250 of 1000 iterations; the
/// learning rate is 200 with momentum 0.5 switching to 0.8 when the
/// exaggeration lifts.
pub fn tsne(m: &FeatureMatrix, perplexity: usize, seed: u64) -> Result<Embedding2D> {
    let n = m.rows();
    if perplexity == 0 || 3 * perplexity > n.saturating_sub(1) {
        return Err(Error::validation(format!(
            "perplexity {perplexity} out of range for {n} rows (need 1 <= perplexity <= (n-1)/3)"
        )));
    }
    let d2 = pairwise_sq(m);
    let p = symmetrise(&conditional_affinities(&d2, n, perplexity), n);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut y = initial_embedding(n, &mut rng);
    let mut velocity = vec![(0.0f64, 0.0f64); n];
    let mut grad = vec![(0.0f64, 0.0f64); n];
    for it in 0..TSNE_ITERATIONS {
        let exaggeration = if it < EXAGGERATION_PHASE { EXAGGERATION } else { 1.0 };
        let momentum = if it < EXAGGERATION_PHASE { 0.5 } else { 0.8 };
        let (num, total) = low_dim_kernel(&y);
        for g in grad.iter_mut() {
            *g = (0.0, 0.0);
        }
        for i in 0..n {
            for j in i + 1..n {
                let w = num[i * n + j];
                let pij = exaggeration * p[i * n + j];
                let qij = w / total;
                let coeff = 4.0 * (pij - qij) * w;
                let dx = y[i].0 - y[j].0;
                let dy = y[i].1 - y[j].1;
                grad[i].0 += coeff * dx;
                grad[i].1 += coeff * dy;
                grad[j].0 -= coeff * dx;
                grad[j].1 -= coeff * dy;
            }
        }
        let mut mean = (0.0, 0.0);
        for i in 0..n {
            velocity[i].0 = momentum * velocity[i].0 - LEARNING_RATE * grad[i].0;
            velocity[i].1 = momentum * velocity[i].1 - LEARNING_RATE * grad[i].1;
            y[i].0 += velocity[i].0;
            y[i].1 += velocity[i].1;
            mean.0 += y[i].0;
            mean.1 += y[i].1;
        }
        // Recentre so the embedding does not drift.
        mean.0 /= n as f64;
        mean.1 /= n as f64;
        for point in y.iter_mut() {
            point.0 -= mean.0;
            point.1 -= mean.1;
        }
    }
    if y.iter().any(|&(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Numeric("embedding diverged to non-finite coordinates".into()));
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(Embedding2D { points: y, final_kl })
}

fn wcss(points: &[(f64, f64)], labels: &[usize], centroids: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(&(x, y), &l)| {
            let dx = x - centroids[l].0;
            let dy = y - centroids[l].1;
            dx * dx + dy * dy
        })
        .sum()
}

fn nearest(point: (f64, f64), centroids: &[(f64, f64)]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, &(cx, cy)) in centroids.iter().enumerate() {
        let dx = point.0 - cx;
        let dy = point.1 - cy;
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn kmeans_once(points: &[(f64, f64)], k: usize, rng: &mut ChaCha20Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    // k-means++ seeding: subsequent centroids drawn proportionally to
    // the squared distance to the nearest chosen one.
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)]);
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|&(x, y)| {
            let dx = x - centroids[0].0;
            let dy = y - centroids[0].1;
            dx * dx + dy * dy
        })
        .collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with a centroid; take the
            // first index to keep the draw deterministic.
            0
        };
        centroids.push(points[next]);
        for (i, &(x, y)) in points.iter().enumerate() {
            let dx = x - centroids.last().unwrap().0;
            let dy = y - centroids.last().unwrap().1;
            min_d2[i] = min_d2[i].min(dx * dx + dy * dy);
        }
    }

    let mut labels: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
    let mut previous_wcss = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        // Update step.
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (&(x, y), &l) in points.iter().zip(&labels) {
            sums[l].0 += x;
            sums[l].1 += y;
            sums[l].2 += 1;
        }
        for (c, &(sx, sy, count)) in sums.iter().enumerate() {
            if count > 0 {
                centroids[c] = (sx / count as f64, sy / count as f64);
            } else {
                // Revive an empty cluster at the point farthest from its
                // current centroid.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = {
                            let dx = points[a].0 - centroids[labels[a]].0;
                            let dy = points[a].1 - centroids[labels[a]].1;
                            dx * dx + dy * dy
                        };
                        let db = {
                            let dx = points[b].0 - centroids[labels[b]].0;
                            let dy = points[b].1 - centroids[labels[b]].1;
                            dx * dx + dy * dy
                        };
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far];
            }
        }
        // Assign step.
        let new_labels: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
        let current = wcss(points, &new_labels, &centroids);
        debug_assert!(
            current <= previous_wcss * (1.0 + 1e-12) + 1e-12,
            "within-cluster sum of squares rose from {previous_wcss} to {current}"
        );
        previous_wcss = current;
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }
    (labels, previous_wcss)
}

/// Lloyd's algorithm with k-means++ seeding; best of 10 restarts by
/// within-cluster sum of squares.
pub fn kmeans(embedding: &Embedding2D, k: usize, seed: u64) -> Result<Partition> {
    let n = embedding.points.len();
    if k == 0 || k > n {
        return Err(Error::validation(format!("k = {k} out of range for {n} points")));
    }
    let mut master = ChaCha20Rng::seed_from_u64(seed);
    let restart_seeds: Vec<u64> = (0..KMEANS_RESTARTS).map(|_| master.random()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in restart_seeds {
        let mut rng = ChaCha20Rng::seed_from_u64(s);
        let (labels, score) = kmeans_once(&embedding.points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, labels));
        }
    }
    Partition::from_labels(&best.unwrap().1)
}

/// Assigns each image to a cluster by majority vote over its feature
/// rows; ties go to the lower cluster id. Returns (image id, cluster)
/// in order of first appearance.
pub fn majority_image_assignment(
    provenance: &[RowProvenance],
    p: &Partition,
) -> Result<Vec<(String, usize)>> {
    if p.n() != provenance.len() {
        return Err(Error::validation("partition does not cover the feature rows"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut votes: Vec<Vec<usize>> = Vec::new();
    let k = p.k();
    for (prov, &label) in provenance.iter().zip(p.labels()) {
        let idx = match order.iter().position(|&id| id == prov.image_id) {
            Some(i) => i,
            None => {
                order.push(&prov.image_id);
                votes.push(vec![0; k]);
                order.len() - 1
            }
        };
        votes[idx][label] += 1;
    }
    Ok(order
        .into_iter()
        .zip(votes)
        .map(|(id, v)| {
            let winner = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(c, _)| c)
                .unwrap();
            (id.to_string(), winner)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use rand_distr::Normal;

    use super::*;
    use crate::keypoints::Keypoint;
    use crate::partition::rand_index;

    fn one_hot_set(image_id: &str, hots: &[usize]) -> KeypointDescriptorSet {
        let keypoints: Vec<Keypoint> = hots
            .iter()
            .map(|_| Keypoint { x: 1.0, y: 2.0, scale: 1.0, strength: 0.5 })
            .collect();
        let mut descriptors = vec![0.0; hots.len() * DESCRIPTOR_WIDTH];
        for (r, &h) in hots.iter().enumerate() {
            descriptors[r * DESCRIPTOR_WIDTH + h] = 1.0;
        }
        KeypointDescriptorSet::from_parts(image_id, keypoints, descriptors).unwrap()
    }

    fn blobs(per_blob: usize, dims: usize, separation: f64, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut data = Vec::new();
        let mut prov = Vec::new();
        for blob in 0..3 {
            for r in 0..per_blob {
                for dim in 0..dims {
                    let centre = if dim == blob { separation } else { 0.0 };
                    data.push(centre + noise.sample(&mut rng));
                }
                prov.push(RowProvenance {
                    image_id: format!("blob{blob}"),
                    sherd_id: r,
                    set_id: blob,
                });
            }
        }
        FeatureMatrix::from_rows(data, per_blob * 3, dims, prov).unwrap()
    }

    #[test]
    fn stacking_preserves_order_and_provenance() {
        let sets = vec![
            (one_hot_set("a", &[0, 1, 2]), 0, 0),
            (one_hot_set("b", &[3, 4]), 1, 0),
            (one_hot_set("c", &[5]), 2, 1),
        ];
        let m = build_feature_matrix(&sets).unwrap();
        assert_eq!(m.rows(), 6);
        assert_eq!(m.cols(), DESCRIPTOR_WIDTH);
        assert_eq!(m.provenance()[0].image_id, "a");
        assert_eq!(m.provenance()[3].image_id, "b");
        assert_eq!(m.provenance()[5], RowProvenance {
            image_id: "c".into(),
            sherd_id: 2,
            set_id: 1,
        });
        let truth = m.set_partition().unwrap();
        assert_eq!(truth.labels(), &[0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn columns_standardise_to_zero_mean_unit_variance() {
        let sets = vec![(one_hot_set("a", &[0, 0, 1, 1]), 0, 0)];
        let m = build_feature_matrix(&sets).unwrap();
        // Column 0 holds (1,1,0,0): mean 0.5, sd 0.5, so values are ±1.
        let col0: Vec<f64> = (0..4).map(|r| m.row(r)[0]).collect();
        assert_eq!(col0, vec![1.0, 1.0, -1.0, -1.0]);
        // Column 7 is constant zero: zero variance leaves it at 0.
        assert!((0..4).all(|r| m.row(r)[7] == 0.0));
    }

    #[test]
    fn single_row_standardises_to_all_zeros() {
        let sets = vec![(one_hot_set("solo", &[5]), 0, 0)];
        let m = build_feature_matrix(&sets).unwrap();
        assert_eq!(m.rows(), 1);
        assert!(m.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affinity_rows_sum_to_one_and_hit_the_target_perplexity() {
        let m = blobs(12, 5, 4.0, 3);
        let n = m.rows();
        let d2 = pairwise_sq(&m);
        let perplexity = 7;
        let cond = conditional_affinities(&d2, n, perplexity);
        for i in 0..n {
            let row = &cond[i * n..(i + 1) * n];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
            assert_eq!(row[i], 0.0);
            let h: f64 = row
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum();
            assert!(
                (h.exp() - perplexity as f64).abs() < 1e-3,
                "row {i} has perplexity {}",
                h.exp()
            );
        }
        let p = symmetrise(&cond, n);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert!(p[i * n + j] >= 0.0);
                assert!((p[i * n + j] - p[j * n + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_descent_reduces_the_divergence() {
        let m = blobs(10, 4, 6.0, 11);
        let n = m.rows();
        let d2 = pairwise_sq(&m);
        let p = symmetrise(&conditional_affinities(&d2, n, 5), n);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let initial = initial_embedding(n, &mut rng);
        let initial_kl = kl_divergence(&p, &initial);
        let emb = tsne(&m, 5, 21).unwrap();
        assert!(
            emb.final_kl <= initial_kl,
            "final KL {} above initial {initial_kl}",
            emb.final_kl
        );
        assert!(emb.final_kl.is_finite() && emb.final_kl >= 0.0);
    }

    #[test]
    fn three_separated_blobs_are_recovered() {
        let m = blobs(50, 10, 10.0, 5);
        let emb = tsne(&m, 15, 7).unwrap();
        assert_eq!(emb.points.len(), 150);
        let clusters = kmeans(&emb, 3, 13).unwrap();
        let truth = m.set_partition().unwrap();
        let rand = rand_index(&clusters, &truth).unwrap();
        assert!(rand >= 0.95, "blob recovery Rand index {rand}");
    }

    #[test]
    fn tsne_is_deterministic_for_a_fixed_seed() {
        let m = blobs(8, 4, 8.0, 2);
        let a = tsne(&m, 5, 31).unwrap();
        let b = tsne(&m, 5, 31).unwrap();
        let bits = |pts: &[(f64, f64)]| {
            pts.iter().flat_map(|&(x, y)| [x.to_bits(), y.to_bits()]).collect::<Vec<_>>()
        };
        assert_eq!(bits(&a.points), bits(&b.points));
        assert_eq!(a.final_kl.to_bits(), b.final_kl.to_bits());
        assert_eq!(kmeans(&a, 3, 4).unwrap(), kmeans(&b, 3, 4).unwrap());
    }

    #[test]
    fn perplexity_bounds_are_enforced() {
        let m = blobs(4, 3, 5.0, 1);
        assert!(tsne(&m, 0, 1).is_err());
        // 12 rows allow perplexity at most (12-1)/3 = 3.
        assert!(tsne(&m, 4, 1).is_err());
        assert!(tsne(&m, 3, 1).is_ok());
    }

    #[test]
    fn kmeans_separates_two_obvious_groups() {
        let emb = Embedding2D {
            points: vec![(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)],
            final_kl: 0.0,
        };
        let p = kmeans(&emb, 2, 9).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn kmeans_extremes() {
        let emb = Embedding2D {
            points: vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            final_kl: 0.0,
        };
        assert_eq!(kmeans(&emb, 3, 1).unwrap().k(), 3);
        let dup = Embedding2D {
            points: vec![(1.5, 2.5); 4],
            final_kl: 0.0,
        };
        assert_eq!(kmeans(&dup, 1, 1).unwrap().labels(), &[0, 0, 0, 0]);
        assert!(kmeans(&emb, 0, 1).is_err());
        assert!(kmeans(&emb, 4, 1).is_err());
    }

    #[test]
    fn majority_vote_assigns_images_with_low_id_tie_break() {
        let sets = vec![
            (one_hot_set("img0", &[0, 1, 2]), 0, 0),
            (one_hot_set("img1", &[3, 4]), 1, 1),
        ];
        let m = build_feature_matrix(&sets).unwrap();
        // img0 rows split 2:1 for cluster 0; img1 rows split 1:1, so the
        // tie goes to cluster 0.
        let p = Partition::from_labels(&[0, 0, 1, 0, 1]).unwrap();
        let assigned = majority_image_assignment(m.provenance(), &p).unwrap();
        assert_eq!(assigned, vec![("img0".to_string(), 0), ("img1".to_string(), 0)]);

        // Canonicalisation renumbers [1,1,0,0,0] to [0,0,1,1,1].
        let q = Partition::from_labels(&[1, 1, 0, 0, 0]).unwrap();
        assert_eq!(q.labels(), &[0, 0, 1, 1, 1]);
        let assigned = majority_image_assignment(m.provenance(), &q).unwrap();
        assert_eq!(assigned, vec![("img0".to_string(), 0), ("img1".to_string(), 1)]);
    }
}
