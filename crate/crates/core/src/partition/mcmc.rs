//! Partition sampler and trace serialisation.
//!
//! Each sweep reassigns every item by its exact full conditional (join
//! any existing cluster or open a singleton) and then attempts one
//! split-merge move built by sequential allocation, so the chain moves
//! both locally and in blocks. Items are processed in a canonical order
//! derived from the distance matrix itself, which makes the trace
//! invariant to the input order of items.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::partition::model::{McmcConfig, Model};
use crate::partition::Partition;

const TRACE_MAGIC: &[u8; 5] = b"ATRC1";
const MAX_TRACE_N: u32 = 1_000_000;
/// Block moves attempted after each Gibbs sweep.
const SPLIT_MERGE_PER_SWEEP: usize = 3;

/// Post-burn-in thinned samples with their log posteriors and move
/// acceptance counts.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcTrace {
    pub n: usize,
    pub partitions: Vec<Partition>,
    pub log_posterior: Vec<f64>,
    pub attempted_splits: u64,
    pub accepted_splits: u64,
    pub attempted_merges: u64,
    pub accepted_merges: u64,
}

enum MoveOutcome {
    Split(bool),
    Merge(bool),
    Skipped,
}

/// Mutable chain state over the model's item indexing. Within-group pair
/// sums are maintained incrementally and refreshed from scratch at every
/// recorded sample.
struct Chain<'m> {
    m: &'m Model,
    labels: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    n_w: usize,
    l_w: f64,
    s_w: f64,
}

impl<'m> Chain<'m> {
    fn singletons(m: &'m Model) -> Chain<'m> {
        Chain {
            m,
            labels: (0..m.n).collect(),
            clusters: (0..m.n).map(|i| vec![i]).collect(),
            n_w: 0,
            l_w: 0.0,
            s_w: 0.0,
        }
    }

    fn refresh_sums(&mut self) {
        let (n_w, l_w, s_w) = self.m.within_sums(&self.labels);
        self.n_w = n_w;
        self.l_w = l_w;
        self.s_w = s_w;
    }

    fn log_posterior(&self) -> f64 {
        self.m.log_posterior_labels(&self.labels)
    }

    /// Pair sums from item `i` to each member of `members`.
    fn pair_delta(&self, i: usize, members: &[usize]) -> (usize, f64, f64) {
        let mut l = 0.0;
        let mut s = 0.0;
        for &j in members {
            l += self.m.ln_dist(i, j);
            s += self.m.dist(i, j);
        }
        (members.len(), l, s)
    }

    /// Removes item `i` from its cluster, dropping the cluster if it
    /// empties. `labels[i]` dangles until the item is reattached.
    fn detach(&mut self, i: usize) {
        let c = self.labels[i];
        let pos = self.clusters[c].iter().position(|&x| x == i).unwrap();
        self.clusters[c].swap_remove(pos);
        let (dn, dl, ds) = self.pair_delta(i, &self.clusters[c]);
        self.n_w -= dn;
        self.l_w -= dl;
        self.s_w -= ds;
        if self.clusters[c].is_empty() {
            self.clusters.swap_remove(c);
            if c < self.clusters.len() {
                for idx in 0..self.clusters[c].len() {
                    let moved = self.clusters[c][idx];
                    self.labels[moved] = c;
                }
            }
        }
    }

    /// Gibbs update for one item: exact full conditional over joining
    /// each cluster or opening a singleton.
    fn reassign_item(&mut self, i: usize, rng: &mut ChaCha20Rng) {
        self.detach(i);
        let k = self.clusters.len();
        let mut scores = Vec::with_capacity(k + 1);
        let mut deltas = Vec::with_capacity(k);
        for c in 0..k {
            let (dn, dl, ds) = self.pair_delta(i, &self.clusters[c]);
            let s_c = self.clusters[c].len();
            scores.push(
                self.m.loglik(self.n_w + dn, self.l_w + dl, self.s_w + ds)
                    + self.m.ln_size(s_c + 1)
                    - self.m.ln_size(s_c)
                    + self.m.ln_count(k),
            );
            deltas.push((dn, dl, ds));
        }
        scores.push(
            self.m.loglik(self.n_w, self.l_w, self.s_w)
                + self.m.ln_size(1)
                + self.m.ln_count(k + 1),
        );
        let choice = sample_categorical(&scores, rng);
        if choice < k {
            let (dn, dl, ds) = deltas[choice];
            self.n_w += dn;
            self.l_w += dl;
            self.s_w += ds;
            self.clusters[choice].push(i);
            self.labels[i] = choice;
        } else {
            self.labels[i] = self.clusters.len();
            self.clusters.push(vec![i]);
        }
    }

    fn gibbs_sweep(&mut self, rng: &mut ChaCha20Rng) {
        for i in 0..self.m.n {
            self.reassign_item(i, rng);
        }
    }

    /// Replaces the whole assignment (labels must already use dense
    /// cluster ids) and rebuilds the derived state.
    fn set_labels(&mut self, labels: Vec<usize>) {
        let k = labels.iter().copied().max().unwrap() + 1;
        let mut clusters = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(i);
        }
        self.labels = labels;
        self.clusters = clusters;
        self.refresh_sums();
    }

    /// Sequentially allocates `rest` to two blocks seeded with `i` and
    /// `j`, scoring each choice by the posterior of the partition of the
    /// items placed so far. With `forced` the allocation follows the
    /// given block choices and only accumulates their probability, which
    /// is how the reverse move of a merge is priced. Returns both blocks
    /// and the log proposal probability.
    fn allocate_split(
        &self,
        i: usize,
        j: usize,
        rest: &[usize],
        forced: Option<&[bool]>,
        rng: &mut ChaCha20Rng,
    ) -> (Vec<usize>, Vec<usize>, f64) {
        let n = self.m.n;
        let mut present = vec![true; n];
        for &k in rest {
            present[k] = false;
        }
        // Launch state: pair sums over present items, with i and j in
        // fresh singleton blocks and everything else as currently
        // assigned. No present pair crosses into the dissolving
        // cluster(s), so "same cluster" never involves i or j.
        let mut tot = (0usize, 0.0f64, 0.0f64);
        let mut win = (0usize, 0.0f64, 0.0f64);
        for x in 0..n {
            if !present[x] {
                continue;
            }
            for y in x + 1..n {
                if !present[y] {
                    continue;
                }
                tot.0 += 1;
                tot.1 += self.m.ln_dist(x, y);
                tot.2 += self.m.dist(x, y);
                let involves_seed = x == i || x == j || y == i || y == j;
                if !involves_seed && self.labels[x] == self.labels[y] {
                    win.0 += 1;
                    win.1 += self.m.ln_dist(x, y);
                    win.2 += self.m.dist(x, y);
                }
            }
        }

        let mut blk_a = vec![i];
        let mut blk_b = vec![j];
        let mut ln_q = 0.0;
        for (idx, &k) in rest.iter().enumerate() {
            let mut dtot = (0usize, 0.0, 0.0);
            for x in 0..n {
                if present[x] {
                    dtot.0 += 1;
                    dtot.1 += self.m.ln_dist(k, x);
                    dtot.2 += self.m.dist(k, x);
                }
            }
            let tot2 = (tot.0 + dtot.0, tot.1 + dtot.1, tot.2 + dtot.2);
            let da = self.pair_delta(k, &blk_a);
            let db = self.pair_delta(k, &blk_b);
            let score_a = self
                .m
                .loglik_with_totals(tot2, (win.0 + da.0, win.1 + da.1, win.2 + da.2))
                + self.m.ln_size(blk_a.len() + 1)
                - self.m.ln_size(blk_a.len());
            let score_b = self
                .m
                .loglik_with_totals(tot2, (win.0 + db.0, win.1 + db.1, win.2 + db.2))
                + self.m.ln_size(blk_b.len() + 1)
                - self.m.ln_size(blk_b.len());
            let top = score_a.max(score_b);
            let ln_z = ((score_a - top).exp() + (score_b - top).exp()).ln();
            let p_a = (score_a - top - ln_z).exp();
            let to_a = match forced {
                Some(choices) => choices[idx],
                None => rng.random::<f64>() < p_a,
            };
            ln_q += if to_a { score_a - top - ln_z } else { score_b - top - ln_z };
            present[k] = true;
            tot = tot2;
            if to_a {
                win = (win.0 + da.0, win.1 + da.1, win.2 + da.2);
                blk_a.push(k);
            } else {
                win = (win.0 + db.0, win.1 + db.1, win.2 + db.2);
                blk_b.push(k);
            }
        }
        (blk_a, blk_b, ln_q)
    }

    /// One split-merge attempt anchored at a uniformly chosen item pair.
    /// Splits pay their sequential-allocation proposal probability;
    /// merges are deterministic forward and pay the replayed reverse
    /// split probability.
    fn split_merge(&mut self, rng: &mut ChaCha20Rng) -> MoveOutcome {
        let n = self.m.n;
        if n < 2 {
            return MoveOutcome::Skipped;
        }
        let i = rng.random_range(0..n);
        let j0 = rng.random_range(0..n - 1);
        let j = if j0 >= i { j0 + 1 } else { j0 };
        let ci = self.labels[i];
        let cj = self.labels[j];
        let lp_cur = self.log_posterior();

        if ci == cj {
            let mut rest: Vec<usize> =
                self.clusters[ci].iter().copied().filter(|&x| x != i && x != j).collect();
            rest.shuffle(rng);
            let (blk_a, blk_b, ln_q_fwd) = self.allocate_split(i, j, &rest, None, rng);
            let mut proposed = self.labels.clone();
            let fresh = self.clusters.len();
            for &x in &blk_a {
                proposed[x] = ci;
            }
            for &x in &blk_b {
                proposed[x] = fresh;
            }
            let lp_prop = self.m.log_posterior_labels(&proposed);
            let ln_acc = lp_prop - lp_cur - ln_q_fwd;
            let accept = rng.random::<f64>().ln() < ln_acc;
            if accept {
                self.set_labels(proposed);
            }
            MoveOutcome::Split(accept)
        } else {
            let mut rest: Vec<usize> = self.clusters[ci]
                .iter()
                .chain(self.clusters[cj].iter())
                .copied()
                .filter(|&x| x != i && x != j)
                .collect();
            rest.shuffle(rng);
            let forced: Vec<bool> = rest.iter().map(|&x| self.labels[x] == ci).collect();
            let (_, _, ln_q_rev) = self.allocate_split(i, j, &rest, Some(&forced), rng);
            let mut proposed = self.labels.clone();
            for x in 0..n {
                if proposed[x] == cj {
                    proposed[x] = ci;
                }
            }
            // Compact the dense ids after emptying cluster cj.
            let last = self.clusters.len() - 1;
            if cj != last {
                for x in 0..n {
                    if proposed[x] == last {
                        proposed[x] = cj;
                    }
                }
            }
            let lp_prop = self.m.log_posterior_labels(&proposed);
            let ln_acc = lp_prop - lp_cur + ln_q_rev;
            let accept = rng.random::<f64>().ln() < ln_acc;
            if accept {
                self.set_labels(proposed);
            }
            MoveOutcome::Merge(accept)
        }
    }
}

/// Draws an index from unnormalised log weights.
fn sample_categorical(log_w: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&s| (s - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        acc += wk;
        if u < acc {
            return k;
        }
    }
    log_w.len() - 1
}

/// Greedy average-linkage agglomeration over the model's distances,
/// keeping the step whose partition scores the highest posterior. Used
/// to start the chain near the mode instead of at singletons, which
/// cuts the coalescing transient out of the burn-in.
fn warm_start_labels(model: &Model) -> Vec<usize> {
    let n = model.n;
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut best = labels.clone();
    let mut best_lp = model.log_posterior_labels(&labels);
    while members.len() > 1 {
        let k = members.len();
        let (mut bi, mut bj, mut bd) = (0usize, 1usize, f64::INFINITY);
        for i in 0..k {
            for j in i + 1..k {
                let mut s = 0.0;
                for &x in &members[i] {
                    for &y in &members[j] {
                        s += model.dist(x, y);
                    }
                }
                let avg = s / (members[i].len() * members[j].len()) as f64;
                if avg < bd {
                    (bi, bj, bd) = (i, j, avg);
                }
            }
        }
        let merged = members.swap_remove(bj);
        members[bi].extend(merged);
        for (c, m) in members.iter().enumerate() {
            for &x in m {
                labels[x] = c;
            }
        }
        let lp = model.log_posterior_labels(&labels);
        if lp > best_lp {
            best_lp = lp;
            best = labels.clone();
        }
    }
    best
}

/// Item order derived from the matrix content (row sum, then the sorted
/// row, then index), so two inputs differing only by item order run the
/// chain on the same internal matrix.
fn canonical_order(d: &DissimilarityMatrix) -> Vec<usize> {
    let n = d.n();
    let mut keyed: Vec<(f64, Vec<f64>, usize)> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> =
                (0..n).filter(|&j| j != i).map(|j| d.get(i, j).unwrap()).collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (row.iter().sum(), row, i)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| a.1.partial_cmp(&b.1).unwrap())
            .then_with(|| a.2.cmp(&b.2))
    });
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

fn run_chain(model: &Model, order: &[usize]) -> Result<McmcTrace> {
    let cfg = &model.cfg;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut chain = Chain::singletons(model);
    if model.use_likelihood && model.n > 1 {
        chain.set_labels(warm_start_labels(model));
    }
    let lp0 = chain.log_posterior();
    if !lp0.is_finite() {
        return Err(Error::Numeric(format!(
            "log posterior is {lp0} at initialisation; check hyperparameters"
        )));
    }
    let mut trace = McmcTrace {
        n: model.n,
        partitions: Vec::new(),
        log_posterior: Vec::new(),
        attempted_splits: 0,
        accepted_splits: 0,
        attempted_merges: 0,
        accepted_merges: 0,
    };
    for t in 0..cfg.iterations {
        chain.gibbs_sweep(&mut rng);
        for _ in 0..SPLIT_MERGE_PER_SWEEP {
            match chain.split_merge(&mut rng) {
                MoveOutcome::Split(accepted) => {
                    trace.attempted_splits += 1;
                    trace.accepted_splits += accepted as u64;
                }
                MoveOutcome::Merge(accepted) => {
                    trace.attempted_merges += 1;
                    trace.accepted_merges += accepted as u64;
                }
                MoveOutcome::Skipped => {}
            }
        }
        if t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            chain.refresh_sums();
            let mut original = vec![0usize; model.n];
            for (pos, &item) in order.iter().enumerate() {
                original[item] = chain.labels[pos];
            }
            trace.partitions.push(Partition::from_labels(&original)?);
            trace.log_posterior.push(chain.log_posterior());
        }
    }
    Ok(trace)
}

/// Samples partitions given a complete distance matrix. The trace is a
/// deterministic function of the matrix content and the config; item
/// order does not matter.
pub fn run_mcmc(d: &DissimilarityMatrix, cfg: &McmcConfig) -> Result<McmcTrace> {
    if !d.is_complete() {
        return Err(Error::validation(
            "sampler needs a complete distance matrix; impute missing entries first",
        ));
    }
    let order = canonical_order(d);
    let n = d.n();
    let mut canonical = DissimilarityMatrix::new(n);
    for p in 0..n {
        for q in p + 1..n {
            canonical.set(p, q, d.get(order[p], order[q]).unwrap());
        }
    }
    let model = Model::new(&canonical, cfg)?;
    run_chain(&model, &order)
}

/// Samples from the partition prior alone by running the same chain with
/// the likelihood switched off. Useful for checking what the prior says
/// about cluster sizes before any data arrive.
pub fn sample_prior_partitions(n: usize, cfg: &McmcConfig) -> Result<McmcTrace> {
    if n == 0 {
        return Err(Error::validation("cannot sample partitions of zero items"));
    }
    let mut flat = DissimilarityMatrix::new(n);
    for i in 0..n {
        for j in i + 1..n {
            flat.set(i, j, 1.0);
        }
    }
    let mut model = Model::new(&flat, cfg)?;
    model.use_likelihood = false;
    let order: Vec<usize> = (0..n).collect();
    run_chain(&model, &order)
}

/// Writes a trace in the binary layout (all integers and floats
/// little-endian):
///
/// ```text
/// magic  b"ATRC1"
/// u32    n, u32 sample count
/// u64    attempted splits, accepted splits, attempted merges, accepted merges
/// then per sample: n x u32 canonical labels, f64 log posterior
/// ```
pub fn write_trace<W: Write>(trace: &McmcTrace, mut writer: W) -> Result<()> {
    if trace.partitions.len() != trace.log_posterior.len() {
        return Err(Error::validation("trace series lengths disagree"));
    }
    if trace.n as u64 > MAX_TRACE_N as u64 {
        return Err(Error::validation("trace too large for the format"));
    }
    writer.write_all(TRACE_MAGIC)?;
    writer.write_all(&(trace.n as u32).to_le_bytes())?;
    writer.write_all(&(trace.partitions.len() as u32).to_le_bytes())?;
    for v in [
        trace.attempted_splits,
        trace.accepted_splits,
        trace.attempted_merges,
        trace.accepted_merges,
    ] {
        writer.write_all(&v.to_le_bytes())?;
    }
    for (p, &lp) in trace.partitions.iter().zip(&trace.log_posterior) {
        if p.n() != trace.n {
            return Err(Error::validation("trace holds partitions of differing sizes"));
        }
        for &l in p.labels() {
            writer.write_all(&(l as u32).to_le_bytes())?;
        }
        writer.write_all(&lp.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`], validating the canonical
/// label form of every sample.
pub fn read_trace<R: Read>(mut reader: R) -> Result<McmcTrace> {
    let mut magic = [0u8; 5];
    reader.read_exact(&mut magic)?;
    if &magic != TRACE_MAGIC {
        return Err(Error::format("bad magic; not a trace file"));
    }
    let n = read_u32(&mut reader)?;
    if n == 0 || n > MAX_TRACE_N {
        return Err(Error::format("item count out of range"));
    }
    let count = read_u32(&mut reader)? as usize;
    let mut stats = [0u64; 4];
    for s in stats.iter_mut() {
        let mut buf = [0u8; 8];
        reader.read_exact(&mut buf)?;
        *s = u64::from_le_bytes(buf);
    }
    let mut partitions = Vec::new();
    let mut log_posterior = Vec::new();
    for _ in 0..count {
        let mut labels = Vec::with_capacity(n as usize);
        for _ in 0..n {
            labels.push(read_u32(&mut reader)? as usize);
        }
        let p = Partition::from_labels(&labels)?;
        if p.labels() != labels.as_slice() {
            return Err(Error::format("trace labels are not in canonical form"));
        }
        let mut buf = [0u8; 8];
        reader.read_exact(&mut buf)?;
        let lp = f64::from_le_bytes(buf);
        if !lp.is_finite() {
            return Err(Error::format("non-finite log posterior in trace"));
        }
        partitions.push(p);
        log_posterior.push(lp);
    }
    Ok(McmcTrace {
        n: n as usize,
        partitions,
        log_posterior,
        attempted_splits: stats[0],
        accepted_splits: stats[1],
        attempted_merges: stats[2],
        accepted_merges: stats[3],
    })
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand_distr::{Distribution, Gamma};

    use super::*;
    use crate::partition::{partition_log_posterior, rand_index};

    fn matrix_from(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> DissimilarityMatrix {
        let mut d = DissimilarityMatrix::new(n);
        for i in 0..n {
            for j in i + 1..n {
                d.set(i, j, f(i, j));
            }
        }
        d
    }

    fn quick_cfg(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> McmcConfig {
        McmcConfig { iterations, burn_in, thin, seed, ..Default::default() }
    }

    #[test]
    fn trace_length_is_one_when_iterations_is_burn_in_plus_one() {
        let d = matrix_from(4, |i, j| 0.5 + (i + j) as f64 * 0.1);
        let trace = run_mcmc(&d, &quick_cfg(51, 50, 7, 1)).unwrap();
        assert_eq!(trace.partitions.len(), 1);
        assert_eq!(trace.log_posterior.len(), 1);
    }

    #[test]
    fn same_seed_gives_a_bit_identical_trace() {
        let d = matrix_from(6, |i, j| if (i < 3) == (j < 3) { 0.3 } else { 2.5 });
        let cfg = quick_cfg(120, 40, 2, 42);
        let a = run_mcmc(&d, &cfg).unwrap();
        let b = run_mcmc(&d, &cfg).unwrap();
        assert_eq!(a.partitions, b.partitions);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.log_posterior), bits(&b.log_posterior));
        assert_eq!(
            (a.attempted_splits, a.accepted_splits, a.attempted_merges, a.accepted_merges),
            (b.attempted_splits, b.accepted_splits, b.attempted_merges, b.accepted_merges)
        );
    }

    #[test]
    fn planted_two_regime_matrix_is_recovered_exactly() {
        // Two well-separated Gamma regimes: within-pair distances have
        // mean 0.5, between-pair distances mean 8.
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let within = Gamma::new(2.0, 0.25).unwrap();
        let between = Gamma::new(2.0, 4.0).unwrap();
        let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let d = matrix_from(20, |i, j| {
            if truth[i] == truth[j] {
                within.sample(&mut rng)
            } else {
                between.sample(&mut rng)
            }
        });
        let trace = run_mcmc(&d, &quick_cfg(1500, 500, 5, 1)).unwrap();
        let truth_p = Partition::from_labels(&truth).unwrap();
        let best = trace
            .partitions
            .iter()
            .zip(&trace.log_posterior)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(rand_index(best, &truth_p).unwrap(), 1.0);
    }

    #[test]
    fn trace_is_invariant_to_item_permutation() {
        // Three planted blocks with a small symmetric jitter so every
        // row sum is distinct.
        let blocks = [0, 0, 0, 1, 1, 1, 2, 2];
        let base = matrix_from(8, |i, j| {
            let b = if blocks[i] == blocks[j] { 0.2 } else { 2.5 };
            b + 0.001 * ((i + 1) * (j + 1)) as f64
        });
        let perm = [3usize, 7, 0, 5, 1, 6, 2, 4];
        let mut permuted = DissimilarityMatrix::new(8);
        for i in 0..8 {
            for j in i + 1..8 {
                permuted.set(perm[i], perm[j], base.get(i, j).unwrap());
            }
        }
        let cfg = quick_cfg(200, 50, 3, 9);
        let t1 = run_mcmc(&base, &cfg).unwrap();
        let t2 = run_mcmc(&permuted, &cfg).unwrap();
        assert_eq!(t1.partitions.len(), t2.partitions.len());
        for (p1, p2) in t1.partitions.iter().zip(&t2.partitions) {
            let back: Vec<usize> = (0..8).map(|i| p2.labels()[perm[i]]).collect();
            assert_eq!(&Partition::from_labels(&back).unwrap(), p1);
        }
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&t1.log_posterior), bits(&t2.log_posterior));
        assert_eq!(
            (t1.attempted_splits, t1.accepted_splits, t1.attempted_merges, t1.accepted_merges),
            (t2.attempted_splits, t2.accepted_splits, t2.attempted_merges, t2.accepted_merges)
        );
    }

    #[test]
    fn empirical_frequencies_match_the_exact_posterior_on_three_items() {
        // With three items the posterior over the five possible
        // partitions can be normalised exactly; long-run sample
        // frequencies must match it.
        let d = matrix_from(3, |i, j| match (i, j) {
            (0, 1) => 0.3,
            (0, 2) => 2.0,
            _ => 1.8,
        });
        let cfg = quick_cfg(30_000, 2_000, 1, 3);
        let trace = run_mcmc(&d, &cfg).unwrap();

        let all: [&[usize]; 5] =
            [&[0, 0, 0], &[0, 0, 1], &[0, 1, 0], &[0, 1, 1], &[0, 1, 2]];
        let mut exact: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut weights = Vec::new();
        for labels in all {
            let p = Partition::from_labels(labels).unwrap();
            let lp = partition_log_posterior(&d, &p, &cfg).unwrap();
            weights.push(lp);
            exact.insert(labels.to_vec(), lp);
        }
        let top = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = weights.iter().map(|&w| (w - top).exp()).sum();
        for w in exact.values_mut() {
            *w = (*w - top).exp() / z;
        }

        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for p in &trace.partitions {
            *counts.entry(p.labels().to_vec()).or_default() += 1;
        }
        let total = trace.partitions.len() as f64;
        for labels in all {
            let freq = counts.get(labels).copied().unwrap_or(0) as f64 / total;
            let prob = exact[labels];
            assert!(
                (freq - prob).abs() < 0.02,
                "partition {labels:?}: frequency {freq:.4} vs exact {prob:.4}"
            );
        }
    }

    #[test]
    fn single_item_chain_runs() {
        let d = DissimilarityMatrix::new(1);
        let trace = run_mcmc(&d, &quick_cfg(5, 2, 1, 0)).unwrap();
        assert_eq!(trace.partitions.len(), 3);
        for p in &trace.partitions {
            assert_eq!(p.labels(), &[0]);
        }
        assert_eq!(trace.attempted_splits + trace.attempted_merges, 0);
    }

    #[test]
    fn incomplete_matrix_is_rejected() {
        let mut d = DissimilarityMatrix::new(3);
        d.set(0, 1, 1.0);
        assert!(run_mcmc(&d, &McmcConfig::default()).is_err());
    }

    #[test]
    fn prior_sampler_runs_without_data() {
        let trace = sample_prior_partitions(30, &quick_cfg(400, 100, 3, 5)).unwrap();
        assert_eq!(trace.n, 30);
        assert!(!trace.partitions.is_empty());
        // The size prior has mean 4, so typical draws should use many
        // clusters rather than one big block.
        let mean_k: f64 = trace.partitions.iter().map(|p| p.k() as f64).sum::<f64>()
            / trace.partitions.len() as f64;
        assert!(mean_k > 3.0, "mean cluster count {mean_k} is implausibly small");
    }

    #[test]
    fn trace_round_trips_through_the_binary_format() {
        let d = matrix_from(5, |i, j| 0.4 + 0.2 * (i * 5 + j) as f64);
        let trace = run_mcmc(&d, &quick_cfg(40, 10, 3, 11)).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, trace);

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_trace(bad_magic.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_trace(truncated).is_err());
    }

    #[test]
    fn trace_reader_rejects_non_canonical_labels() {
        let p = Partition::from_labels(&[0, 1]).unwrap();
        let trace = McmcTrace {
            n: 2,
            partitions: vec![p],
            log_posterior: vec![-1.0],
            attempted_splits: 0,
            accepted_splits: 0,
            attempted_merges: 0,
            accepted_merges: 0,
        };
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        // Swap the two labels: [1, 0] is not first-appearance canonical.
        let labels_at = buf.len() - 16;
        buf[labels_at] = 1;
        buf[labels_at + 4] = 0;
        assert!(read_trace(buf.as_slice()).is_err());
    }
}
