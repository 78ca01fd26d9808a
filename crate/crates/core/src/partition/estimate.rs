//! Point estimation from a trace and partition comparison metrics.

use std::collections::HashMap;

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::partition::mcmc::McmcTrace;
use crate::partition::Partition;

/// Variation of information between two partitions of the same items,
/// in nats: H(p) + H(q) - 2 I(p, q).
pub fn vi_distance(p: &Partition, q: &Partition) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::validation(format!(
            "partitions cover {} and {} items",
            p.n(),
            q.n()
        )));
    }
    if p.labels() == q.labels() {
        return Ok(0.0);
    }
    let n = p.n() as f64;
    let (kp, kq) = (p.k(), q.k());
    let mut joint = vec![0usize; kp * kq];
    for (&a, &b) in p.labels().iter().zip(q.labels()) {
        joint[a * kq + b] += 1;
    }
    let pa = p.cluster_sizes();
    let qb = q.cluster_sizes();
    let entropy = |sizes: &[usize]| -> f64 {
        sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let f = s as f64 / n;
                -f * f.ln()
            })
            .sum()
    };
    let mut mutual = 0.0;
    for a in 0..kp {
        for b in 0..kq {
            let j = joint[a * kq + b];
            if j > 0 {
                let f = j as f64 / n;
                mutual += f * (f / (pa[a] as f64 / n * (qb[b] as f64 / n))).ln();
            }
        }
    }
    Ok((entropy(&pa) + entropy(&qb) - 2.0 * mutual).max(0.0))
}

/// Proportion of item pairs on which the two partitions agree (both
/// together or both apart).
pub fn rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::validation(format!(
            "partitions cover {} and {} items",
            p.n(),
            q.n()
        )));
    }
    let n = p.n();
    if n < 2 {
        return Err(Error::validation("the Rand index needs at least two items"));
    }
    let (kp, kq) = (p.k(), q.k());
    let mut joint = vec![0u64; kp * kq];
    for (&a, &b) in p.labels().iter().zip(q.labels()) {
        joint[a * kq + b] += 1;
    }
    let choose2 = |x: u64| x * x.saturating_sub(1) / 2;
    let total = choose2(n as u64);
    let same_both: u64 = joint.iter().map(|&j| choose2(j)).sum();
    let same_p: u64 = p.cluster_sizes().iter().map(|&s| choose2(s as u64)).sum();
    let same_q: u64 = q.cluster_sizes().iter().map(|&s| choose2(s as u64)).sum();
    // Pairs together in both, plus pairs apart in both.
    let agreements = total + 2 * same_both - same_p - same_q;
    Ok(agreements as f64 / total as f64)
}

/// Picks the sampled partition minimising the mean VI distance to the
/// whole trace. Ties prefer fewer clusters, then earlier first
/// occurrence. Always returns an element of the trace.
pub fn estimate_partition_vi(trace: &McmcTrace) -> Result<Partition> {
    if trace.partitions.is_empty() {
        return Err(Error::validation("cannot estimate from an empty trace"));
    }
    // Deduplicate: the mean over the trace is a count-weighted mean over
    // distinct partitions.
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut unique: Vec<&Partition> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for p in &trace.partitions {
        match index.get(p.labels()) {
            Some(&u) => counts[u] += 1.0,
            None => {
                index.insert(p.labels(), unique.len());
                unique.push(p);
                counts.push(1.0);
            }
        }
    }
    let u = unique.len();
    let mut pair_vi = vec![0.0; u * u];
    for a in 0..u {
        for b in a + 1..u {
            let v = vi_distance(unique[a], unique[b])?;
            pair_vi[a * u + b] = v;
            pair_vi[b * u + a] = v;
        }
    }
    let total = trace.partitions.len() as f64;
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..u {
        let mean: f64 =
            (0..u).map(|b| counts[b] * pair_vi[a * u + b]).sum::<f64>() / total;
        let k = unique[a].k();
        let better = match best {
            None => true,
            Some((bm, bk, _)) => mean < bm || (mean == bm && k < bk),
        };
        if better {
            best = Some((mean, k, a));
        }
    }
    Ok(unique[best.unwrap().2].clone())
}

/// Average-linkage agglomeration cut at `k` clusters. Distance ties
/// break on the smallest original item indices of the merged clusters,
/// so the result is deterministic.
pub fn linkage_baseline(d: &DissimilarityMatrix, k: usize) -> Result<Partition> {
    if !d.is_complete() {
        return Err(Error::validation("linkage needs a complete distance matrix"));
    }
    let n = d.n();
    if n == 0 || k == 0 || k > n {
        return Err(Error::validation(format!("cluster count {k} out of range for {n} items")));
    }
    struct Node {
        members: Vec<usize>,
        rep: usize,
    }
    let mut nodes: Vec<Option<Node>> = (0..n).map(|i| Some(Node { members: vec![i], rep: i })).collect();
    // Mean pairwise distances between live clusters, updated by the
    // weighted average rule.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i * n + j] = d.get(i, j).unwrap();
            }
        }
    }
    let mut live = n;
    while live > k {
        let mut pick: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..n {
            let Some(na) = &nodes[a] else { continue };
            for b in a + 1..n {
                let Some(nb) = &nodes[b] else { continue };
                let (lo, hi) = (na.rep.min(nb.rep), na.rep.max(nb.rep));
                let key = (dist[a * n + b], lo, hi);
                let better = match pick {
                    None => true,
                    Some((pd, plo, phi, _, _)) => {
                        key.0 < pd || (key.0 == pd && (lo, hi) < (plo, phi))
                    }
                };
                if better {
                    pick = Some((key.0, lo, hi, a, b));
                }
            }
        }
        let (_, _, _, a, b) = pick.unwrap();
        let nb = nodes[b].take().unwrap();
        let na = nodes[a].as_mut().unwrap();
        let (wa, wb) = (na.members.len() as f64, nb.members.len() as f64);
        na.members.extend(nb.members);
        na.rep = na.rep.min(nb.rep);
        for c in 0..n {
            if c == a || nodes[c].is_none() {
                continue;
            }
            let merged = (wa * dist[a * n + c] + wb * dist[b * n + c]) / (wa + wb);
            dist[a * n + c] = merged;
            dist[c * n + a] = merged;
        }
        live -= 1;
    }
    let mut labels = vec![0usize; n];
    for (slot, node) in nodes.iter().flatten().enumerate() {
        for &m in &node.members {
            labels[m] = slot;
        }
    }
    Partition::from_labels(&labels)
}
