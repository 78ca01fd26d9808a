//! Dissimilarity matrix assembly, imputation and serialisation.

use std::io::{BufRead, BufReader, Read, Write};

use crate::dissimilarity::PairMetrics;
use crate::error::{Error, Result};

/// Symmetric pairwise dissimilarities with an explicit missing mask.
/// The diagonal is zero and never missing.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl DissimilarityMatrix {
    /// A matrix with every off-diagonal entry missing.
    pub fn new(n: usize) -> Self {
        let mut missing = vec![true; n * n];
        for i in 0..n {
            missing[i * n + i] = false;
        }
        DissimilarityMatrix { n, values: vec![0.0; n * n], missing }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stores a value symmetrically and clears the missing flag.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "diagonal entries are fixed at zero");
        assert!(value.is_finite() && value >= 0.0, "dissimilarity must be finite and nonnegative");
        self.values[i * self.n + j] = value;
        self.values[j * self.n + i] = value;
        self.missing[i * self.n + j] = false;
        self.missing[j * self.n + i] = false;
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if self.missing[i * self.n + j] {
            None
        } else {
            Some(self.values[i * self.n + j])
        }
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.n + j]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// True when every entry is known.
    pub fn is_complete(&self) -> bool {
        self.missing.iter().all(|&m| !m)
    }
}

/// Combines per-pair metrics into one dissimilarity per pair.
///
/// Pairs with fewer than three matched landmarks are marked missing. For
/// the rest, three dissimilarity components are formed (landmark-count
/// deficit, weighted descriptor distance, 1 - SSIM), each min-max
/// normalised over the surviving pairs, and combined as the Euclidean
/// norm of the component vector.
pub fn assemble_matrix(pairs: &[(usize, usize, PairMetrics)], n: usize) -> Result<DissimilarityMatrix> {
    if n == 0 {
        return Err(Error::validation("cannot assemble a matrix of zero items"));
    }
    let expected = n * (n - 1) / 2;
    if pairs.len() != expected {
        return Err(Error::validation(format!(
            "expected metrics for all {expected} unordered pairs, got {}",
            pairs.len()
        )));
    }
    let mut seen = vec![false; n * n];
    for &(i, j, ref m) in pairs {
        if i >= n || j >= n || i == j {
            return Err(Error::validation(format!("bad pair indices ({i}, {j})")));
        }
        let (lo, hi) = (i.min(j), i.max(j));
        if seen[lo * n + hi] {
            return Err(Error::validation(format!("pair ({lo}, {hi}) listed twice")));
        }
        seen[lo * n + hi] = true;
        if !m.weighted_euclid.is_finite()
            || m.weighted_euclid < 0.0
            || !m.ssim.is_finite()
            || !(-1.0..=1.0).contains(&m.ssim)
        {
            return Err(Error::validation(format!("non-finite or out-of-range metrics for ({i}, {j})")));
        }
    }

    let surviving: Vec<&(usize, usize, PairMetrics)> =
        pairs.iter().filter(|(_, _, m)| m.n_matched >= 3).collect();
    if surviving.is_empty() {
        return Err(Error::InsufficientData(
            "every pair has fewer than 3 matched landmarks; matrix would be empty".into(),
        ));
    }
    let max_matched = surviving.iter().map(|(_, _, m)| m.n_matched).max().unwrap() as f64;

    let raw: Vec<[f64; 3]> = surviving
        .iter()
        .map(|(_, _, m)| {
            [
                1.0 - m.n_matched as f64 / max_matched,
                m.weighted_euclid,
                1.0 - m.ssim,
            ]
        })
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for r in &raw {
        for c in 0..3 {
            lo[c] = lo[c].min(r[c]);
            hi[c] = hi[c].max(r[c]);
        }
    }

    let mut out = DissimilarityMatrix::new(n);
    for ((i, j, _), r) in surviving.iter().zip(&raw) {
        let mut sq = 0.0;
        for c in 0..3 {
            // Degenerate spread normalises to zero: the component carries
            // no information to separate pairs.
            let range = hi[c] - lo[c];
            let v = if range > 0.0 { (r[c] - lo[c]) / range } else { 0.0 };
            sq += v * v;
        }
        out.set(*i, *j, sq.sqrt());
    }
    Ok(out)
}

/// Fills missing entries by the ultrametric closure: repeatedly set
/// d[i][j] to the smallest max(d[i][k], d[k][j]) over items k with both
/// legs known, rounds applied synchronously until nothing changes.
/// Entries no round can reach are set to the largest known value.
pub fn ultrametric_impute(d: &DissimilarityMatrix) -> DissimilarityMatrix {
    let n = d.n();
    let mut cur = d.clone();
    loop {
        let mut next = cur.clone();
        let mut progress = false;
        for i in 0..n {
            for j in i + 1..n {
                if !cur.is_missing(i, j) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (cur.get(i, k), cur.get(k, j)) {
                        best = best.min(a.max(b));
                    }
                }
                if best.is_finite() {
                    next.set(i, j, best);
                    progress = true;
                }
            }
        }
        cur = next;
        if !progress {
            break;
        }
    }
    if !cur.is_complete() {
        let mut max_known = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                if let Some(v) = cur.get(i, j) {
                    max_known = max_known.max(v);
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if cur.is_missing(i, j) {
                    cur.set(i, j, max_known);
                }
            }
        }
    }
    cur
}

/// Writes the matrix as CSV: a header row of item ids, then one row per
/// item with missing entries spelled "NA".
pub fn write_matrix_csv<W: Write>(
    d: &DissimilarityMatrix,
    ids: &[String],
    mut writer: W,
) -> Result<()> {
    if ids.len() != d.n() {
        return Err(Error::validation("id count does not match matrix size"));
    }
    for id in ids {
        if id.is_empty() || id.contains(',') || id.contains('\n') || id.contains('\r') {
            return Err(Error::validation(format!("id {id:?} cannot appear in CSV")));
        }
    }
    writeln!(writer, "{}", ids.join(","))?;
    for i in 0..d.n() {
        let row: Vec<String> = (0..d.n())
            .map(|j| match d.get(i, j) {
                Some(v) => format!("{v}"),
                None => "NA".to_string(),
            })
            .collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(DissimilarityMatrix, Vec<String>)> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("empty matrix file"))??;
    let ids: Vec<String> = header.split(',').map(str::to_string).collect();
    let n = ids.len();
    let mut d = DissimilarityMatrix::new(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::format(format!("missing row {i}")))??;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(Error::format(format!("row {i} has {} cells, expected {n}", cells.len())));
        }
        for (j, cell) in cells.iter().enumerate() {
            if *cell == "NA" {
                if i == j {
                    return Err(Error::format(format!("diagonal entry {i} cannot be missing")));
                }
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::format(format!("bad number {cell:?} at ({i}, {j})")))?;
            if i == j {
                if v != 0.0 {
                    return Err(Error::format(format!("nonzero diagonal at {i}: {v}")));
                }
            } else if !v.is_finite() || v < 0.0 {
                return Err(Error::format(format!("invalid dissimilarity {v} at ({i}, {j})")));
            } else {
                if let Some(prev) = d.get(i, j) {
                    if prev != v {
                        return Err(Error::format(format!("asymmetric entries at ({i}, {j})")));
                    }
                }
                d.set(i, j, v);
            }
        }
    }
    // Symmetry of the mask: an entry present on one side only is a
    // malformed file.
    for i in 0..n {
        for j in i + 1..n {
            if d.is_missing(i, j) != d.is_missing(j, i) {
                return Err(Error::format(format!("missing mask asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok((d, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn metrics(n_matched: usize, weighted: f64, ssim: f64) -> PairMetrics {
        PairMetrics { n_matched, weighted_euclid: weighted, ssim }
    }

    #[test]
    fn example_triple_normalises_to_known_values() {
        // After min-max normalisation the three pairs carry component
        // vectors (0,0,0), (1,0,0) and (1,1,1).
        let pairs = vec![
            (0usize, 1usize, metrics(10, 0.2, 0.9)),
            (0, 2, metrics(5, 0.2, 0.9)),
            (1, 2, metrics(5, 0.9, 0.3)),
        ];
        let d = assemble_matrix(&pairs, 3).unwrap();
        assert!(d.get(0, 1).unwrap().abs() < 1e-12);
        assert!((d.get(0, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.get(1, 2).unwrap() - 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pairs_below_three_matches_are_missing() {
        let pairs = vec![
            (0usize, 1usize, metrics(2, 0.1, 0.8)),
            (0, 2, metrics(8, 0.3, 0.7)),
            (1, 2, metrics(4, 0.2, 0.6)),
        ];
        let d = assemble_matrix(&pairs, 3).unwrap();
        assert!(d.is_missing(0, 1));
        assert!(d.is_missing(1, 0));
        assert!(!d.is_missing(0, 2));
    }

    #[test]
    fn values_stay_within_norm_bounds_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 9;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((
                    i,
                    j,
                    metrics(
                        rng.random_range(0..30),
                        rng.random_range(0.0..2.0),
                        rng.random_range(-0.5..1.0),
                    ),
                ));
            }
        }
        let d = assemble_matrix(&pairs, n).unwrap();
        for i in 0..n {
            assert_eq!(d.get(i, i), Some(0.0));
            for j in 0..n {
                if let Some(v) = d.get(i, j) {
                    assert!(v >= 0.0 && v <= 3.0f64.sqrt() + 1e-12);
                    assert_eq!(d.get(j, i), Some(v));
                } else {
                    assert!(d.is_missing(j, i));
                }
            }
        }
    }

    #[test]
    fn all_pairs_excluded_is_an_error() {
        let pairs = vec![
            (0usize, 1usize, metrics(1, 0.0, 1.0)),
            (0, 2, metrics(0, 0.0, 1.0)),
            (1, 2, metrics(2, 0.0, 1.0)),
        ];
        assert!(matches!(assemble_matrix(&pairs, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn incomplete_or_duplicated_pair_lists_are_rejected() {
        let pairs = vec![(0usize, 1usize, metrics(5, 0.1, 0.5))];
        assert!(assemble_matrix(&pairs, 3).is_err());
        let dup = vec![
            (0usize, 1usize, metrics(5, 0.1, 0.5)),
            (1, 0, metrics(5, 0.1, 0.5)),
            (1, 2, metrics(5, 0.1, 0.5)),
        ];
        assert!(assemble_matrix(&dup, 3).is_err());
    }

    #[test]
    fn identical_metric_vectors_give_zero_distance() {
        // With no spread in any component, all surviving pairs collapse
        // to zero dissimilarity.
        let pairs = vec![
            (0usize, 1usize, metrics(7, 0.4, 0.6)),
            (0, 2, metrics(7, 0.4, 0.6)),
            (1, 2, metrics(7, 0.4, 0.6)),
        ];
        let d = assemble_matrix(&pairs, 3).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(d.get(i, j), Some(0.0));
        }
    }

    #[test]
    fn complete_matrix_is_a_fixed_point_of_imputation() {
        let mut d = DissimilarityMatrix::new(4);
        let mut v = 0.1;
        for i in 0..4 {
            for j in i + 1..4 {
                d.set(i, j, v);
                v += 0.07;
            }
        }
        let imputed = ultrametric_impute(&d);
        assert_eq!(imputed, d);
    }

    #[test]
    fn single_missing_entry_uses_the_min_max_path() {
        let mut d = DissimilarityMatrix::new(3);
        d.set(0, 1, 0.2);
        d.set(0, 2, 0.5);
        let imputed = ultrametric_impute(&d);
        assert_eq!(imputed.get(1, 2), Some(0.5));
    }

    /// Random ultrametric via random agglomeration: merge heights increase,
    /// d(i, j) = height of the merge joining them.
    fn random_ultrametric(n: usize, rng: &mut ChaCha8Rng) -> (DissimilarityMatrix, Vec<Vec<usize>>) {
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut d = DissimilarityMatrix::new(n);
        let mut height = 0.0;
        let mut merges: Vec<Vec<usize>> = Vec::new();
        while clusters.len() > 1 {
            height += rng.random_range(0.1..1.0);
            let a = rng.random_range(0..clusters.len());
            let mut b = rng.random_range(0..clusters.len() - 1);
            if b >= a {
                b += 1;
            }
            let (first, second) = (a.min(b), a.max(b));
            let right = clusters.remove(second);
            for &i in &clusters[first] {
                for &j in &right {
                    d.set(i, j, height);
                }
            }
            let mut merged = clusters[first].clone();
            merged.extend(&right);
            merges.push(merged.clone());
            clusters[first] = merged;
        }
        (d, merges)
    }

    #[test]
    fn withheld_ultrametric_entries_with_witnesses_are_recovered_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..60 {
            let n = rng.random_range(3..=12);
            let (full, merges) = random_ultrametric(n, &mut rng);
            // Withhold a pair from a merge of at least 3 leaves, so some
            // third item witnesses the merge height on both legs.
            let merge = merges.iter().find(|m| m.len() >= 3).unwrap();
            let (i, j) = (merge[0], *merge.last().unwrap());
            let want = full.get(i, j).unwrap();
            // Rebuild without that entry (no unset operation by design).
            let mut withheld = DissimilarityMatrix::new(n);
            for a in 0..n {
                for b in a + 1..n {
                    if (a, b) != (i.min(j), i.max(j)) {
                        withheld.set(a, b, full.get(a, b).unwrap());
                    }
                }
            }
            let imputed = ultrametric_impute(&withheld);
            let got = imputed.get(i, j).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "trial {trial}: expected {want}, imputed {got}"
            );
            assert!(imputed.is_complete());
        }
    }

    #[test]
    fn disconnected_blocks_fall_back_to_the_maximum() {
        let mut d = DissimilarityMatrix::new(4);
        d.set(0, 1, 0.3);
        d.set(2, 3, 0.8);
        let imputed = ultrametric_impute(&d);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(imputed.get(i, j), Some(0.8));
        }
    }

    #[test]
    fn isolated_item_is_imputed_to_the_maximum() {
        let mut d = DissimilarityMatrix::new(4);
        d.set(0, 1, 0.4);
        d.set(0, 2, 0.9);
        d.set(1, 2, 0.9);
        let imputed = ultrametric_impute(&d);
        // Item 3 has no known entries; min-max has no path into it.
        for i in 0..3 {
            assert_eq!(imputed.get(i, 3), Some(0.9));
        }
    }

    #[test]
    fn imputation_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 8;
        let mut d = DissimilarityMatrix::new(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_range(0.0..1.0) < 0.6 {
                    d.set(i, j, rng.random_range(0.05..1.0));
                }
            }
        }
        let once = ultrametric_impute(&d);
        let twice = ultrametric_impute(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let mut d = DissimilarityMatrix::new(4);
        d.set(0, 1, 0.123456789012345);
        d.set(0, 2, 1.0 / 3.0);
        d.set(1, 2, 2.0f64.sqrt());
        // (0,3), (1,3), (2,3) stay missing.
        let ids: Vec<String> = ["alpha", "beta", "gamma", "delta"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut buf = Vec::new();
        write_matrix_csv(&d, &ids, &mut buf).unwrap();
        let (back, back_ids) = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back_ids, ids);
        assert_eq!(back, d);
        // And the re-serialisation is byte-identical.
        let mut second = Vec::new();
        write_matrix_csv(&back, &ids, &mut second).unwrap();
        assert_eq!(buf, second);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(read_matrix_csv("".as_bytes()).is_err());
        assert!(read_matrix_csv("a,b\n0,1\n".as_bytes()).is_err());
        assert!(read_matrix_csv("a,b\n0,1\n2,0\n".as_bytes()).is_err());
        assert!(read_matrix_csv("a,b\n0,NA\nNA,0\nextra".as_bytes()).is_ok());
        assert!(read_matrix_csv("a,b\nNA,1\n1,0\n".as_bytes()).is_err());
        assert!(read_matrix_csv("a,b\n0,nope\nnope,0\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_rejects_unusable_ids() {
        let d = DissimilarityMatrix::new(2);
        let mut buf = Vec::new();
        let bad = vec!["a,b".to_string(), "c".to_string()];
        assert!(write_matrix_csv(&d, &bad, &mut buf).is_err());
        let short = vec!["a".to_string()];
        assert!(write_matrix_csv(&d, &short, &mut buf).is_err());
    }
}
