//! Procedurally fractured vessels.
//!
//! Each set draws a smooth radial-harmonic vessel silhouette, paints a
//! set-distinctive texture (gratings plus stamped dots), and shatters
//! the silhouette with a jagged Voronoi fracture. Pieces tile the
//! silhouette exactly; each is rendered on a clean background in its
//! own cropped image, with the crop offset kept as ground truth.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{stream_seed, GroundTruth};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Square side of the vessel source frame all pieces are cut from.
pub const VESSEL_FRAME_SIZE: usize = 320;
/// Piece counts used by the five-set reference corpus.
pub const DEFAULT_PIECE_COUNTS: [usize; 5] = [7, 2, 2, 3, 2];

const FRAME_CENTRE: f64 = VESSEL_FRAME_SIZE as f64 / 2.0;
const BACKGROUND: f64 = 0.04;
const CROP_MARGIN: usize = 12;
/// Amplitude of the fracture-line wobble, in pixels.
const JAG_AMPLITUDE: f64 = 7.0;
const MIN_SHARED_CUT: usize = 10;
const FRACTURE_ATTEMPTS: u64 = 40;

const SHAPE_STREAM: u64 = 2;
const FRACTURE_STREAM: u64 = 3;
const COUNT_STREAM: u64 = 4;

struct VesselSet {
    texture: RasterImage,
    silhouette: Vec<bool>,
    /// Per frame pixel: piece index, or usize::MAX outside the vessel.
    piece_labels: Vec<usize>,
    count: usize,
    adjacency: Vec<(usize, usize)>,
}

/// Star-shaped silhouette: radius varies with three low harmonics.
fn vessel_mask(rng: &mut ChaCha20Rng) -> Vec<bool> {
    let a2 = rng.random_range(6.0..=14.0);
    let a3 = rng.random_range(4.0..=10.0);
    let a5 = rng.random_range(2.0..=6.0);
    let p2 = rng.random_range(0.0..=std::f64::consts::TAU);
    let p3 = rng.random_range(0.0..=std::f64::consts::TAU);
    let p5 = rng.random_range(0.0..=std::f64::consts::TAU);
    let n = VESSEL_FRAME_SIZE;
    let mut mask = vec![false; n * n];
    for (p, m) in mask.iter_mut().enumerate() {
        let x = (p % n) as f64 - FRAME_CENTRE;
        let y = (p / n) as f64 - FRAME_CENTRE;
        let r = (x * x + y * y).sqrt();
        let theta = y.atan2(x);
        let boundary = 105.0
            + a2 * (2.0 * theta + p2).sin()
            + a3 * (3.0 * theta + p3).sin()
            + a5 * (5.0 * theta + p5).sin();
        *m = r <= boundary;
    }
    mask
}

/// Number of distinct stamp motif families available to vessel sets.
const MOTIF_FAMILIES: usize = 5;

/// Normalised impression profile of one stamp, in stamp-local
/// coordinates. `h` is the motif half-size; returns [0, 1].
fn motif_profile(family: usize, u: f64, v: f64, h: f64) -> f64 {
    match family {
        // Solid disc.
        0 => {
            let d = (u * u + v * v).sqrt();
            (h - d + 1.0).clamp(0.0, 1.0)
        }
        // Ring (annulus).
        1 => {
            let d = (u * u + v * v).sqrt();
            (1.4 - (d - h).abs()).clamp(0.0, 1.0)
        }
        // Cross: two perpendicular bars.
        2 => {
            let bar_u = (h - u.abs() + 1.0).clamp(0.0, 1.0) * (1.3 - v.abs()).clamp(0.0, 1.0);
            let bar_v = (h - v.abs() + 1.0).clamp(0.0, 1.0) * (1.3 - u.abs()).clamp(0.0, 1.0);
            bar_u.max(bar_v)
        }
        // Square outline (Chebyshev ring).
        3 => {
            let d = u.abs().max(v.abs());
            (1.3 - (d - h).abs()).clamp(0.0, 1.0)
        }
        // Comb: three parallel bars.
        _ => {
            let spacing = h.max(2.4);
            let nearest = (u / spacing).round().clamp(-1.0, 1.0) * spacing;
            (1.1 - (u - nearest).abs()).clamp(0.0, 1.0) * (h - v.abs() + 1.0).clamp(0.0, 1.0)
        }
    }
}

/// Set-distinctive surface: gentle gratings for tone plus a stamped
/// motif unique to the set. Each vessel carries one motif family at a
/// fixed size and orientation, as a single decorative die would leave.
fn paint_texture(rng: &mut ChaCha20Rng, mask: &[bool], set: usize) -> RasterImage {
    let n = VESSEL_FRAME_SIZE;
    let f1 = rng.random_range(0.10..=0.22);
    let f2 = rng.random_range(0.05..=0.12);
    let o1 = rng.random_range(0.0..=std::f64::consts::PI);
    let o2 = rng.random_range(0.0..=std::f64::consts::PI);
    let ph1 = rng.random_range(0.0..=std::f64::consts::TAU);
    let ph2 = rng.random_range(0.0..=std::f64::consts::TAU);
    let family = set % MOTIF_FAMILIES;
    let half_size = rng.random_range(2.8..=3.8);
    let stamp_angle = rng.random_range(0.0..=std::f64::consts::FRAC_PI_2);
    let amp = -rng.random_range(0.30..=0.38);
    let inside: Vec<usize> = (0..n * n).filter(|&p| mask[p]).collect();
    let n_stamps = rng.random_range(70..=110);
    let stamps: Vec<(f64, f64, f64)> = (0..n_stamps)
        .map(|_| {
            let p = inside[rng.random_range(0..inside.len())];
            (
                (p % n) as f64,
                (p / n) as f64,
                half_size + rng.random_range(-0.3..=0.3),
            )
        })
        .collect();
    let (c1, s1) = o1.sin_cos();
    let (c2, s2) = o2.sin_cos();
    let (sa, ca) = stamp_angle.sin_cos();
    // Conservative reach of any motif from its centre, for the fast reject.
    let reach = 2.0 * half_size + 3.0;
    RasterImage::from_fn(n, n, |px, py| {
        let p = py * n + px;
        if !mask[p] {
            return BACKGROUND;
        }
        let x = px as f64;
        let y = py as f64;
        let r = ((x - FRAME_CENTRE).powi(2) + (y - FRAME_CENTRE).powi(2)).sqrt();
        let mut v = 0.55 + 0.05 * (1.0 - r / FRAME_CENTRE)
            + 0.08 * (f1 * (x * c1 + y * s1) + ph1).sin()
            + 0.06 * (f2 * (x * c2 - y * s2) + ph2).sin();
        for &(sx, sy, h) in &stamps {
            let dx = x - sx;
            let dy = y - sy;
            if dx.abs() > reach || dy.abs() > reach {
                continue;
            }
            let u = dx * ca + dy * sa;
            let w = -dx * sa + dy * ca;
            v += amp * motif_profile(family, u, w, h);
        }
        v.clamp(0.18, 0.95)
    })
}

/// One fracture attempt: jagged nearest-seed labelling, connectivity
/// cleanup, then size and adjacency checks. Returns None when the draw
/// produced degenerate pieces so the caller can retry a fresh stream.
fn try_fracture(
    rng: &mut ChaCha20Rng,
    mask: &[bool],
    count: usize,
) -> Option<(Vec<usize>, Vec<(usize, usize)>)> {
    let n = VESSEL_FRAME_SIZE;
    let inside: Vec<usize> = (0..n * n).filter(|&p| mask[p]).collect();
    if count == 1 {
        let labels = mask.iter().map(|&m| if m { 0 } else { usize::MAX }).collect();
        return Some((labels, Vec::new()));
    }
    // Seeds spread out by rejection on pairwise distance.
    let mut seeds: Vec<(f64, f64)> = Vec::with_capacity(count);
    let mut guard = 0;
    while seeds.len() < count {
        let p = inside[rng.random_range(0..inside.len())];
        let cand = ((p % n) as f64, (p / n) as f64);
        let ok = seeds
            .iter()
            .all(|s| ((s.0 - cand.0).powi(2) + (s.1 - cand.1).powi(2)).sqrt() > 30.0);
        if ok || guard > 400 {
            seeds.push(cand);
        }
        guard += 1;
    }
    // Jag fields: each seed's distance is warped by a smooth wobble, so
    // cell boundaries carry teeth rather than straight bisectors.
    let jags: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.20..=0.30),
                rng.random_range(0.20..=0.30),
                rng.random_range(0.0..=std::f64::consts::TAU),
                rng.random_range(0.0..=std::f64::consts::TAU),
            )
        })
        .collect();
    let mut labels = vec![usize::MAX; n * n];
    for &p in &inside {
        let x = (p % n) as f64;
        let y = (p / n) as f64;
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, (&(sx, sy), &(fx, fy, px, py))) in seeds.iter().zip(&jags).enumerate() {
            let d = ((x - sx).powi(2) + (y - sy).powi(2)).sqrt()
                + JAG_AMPLITUDE * ((fx * x + px).sin() + (fy * y + py).cos());
            if d < best.0 {
                best = (d, i);
            }
        }
        labels[p] = best.1;
    }
    keep_largest_components(&mut labels, n, count);
    absorb_orphans(&mut labels, mask, n);

    let mut sizes = vec![0usize; count];
    for &l in labels.iter().filter(|&&l| l != usize::MAX) {
        sizes[l] += 1;
    }
    let min_size = (inside.len() / (count * 10)).max(80);
    if sizes.iter().any(|&s| s < min_size) {
        return None;
    }
    let adjacency = shared_cuts(&labels, n, count);
    // A physical fracture leaves every piece attached to at least one
    // neighbour; also require the adjacency graph to be connected.
    if !adjacency_connected(&adjacency, count) {
        return None;
    }
    Some((labels, adjacency))
}

/// Keeps, for each label, only its largest 4-connected component;
/// stripped pixels become temporary orphans (usize::MAX - 1).
fn keep_largest_components(labels: &mut [usize], n: usize, count: usize) {
    const ORPHAN: usize = usize::MAX - 1;
    let mut seen = vec![false; labels.len()];
    for target in 0..count {
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for start in 0..labels.len() {
            if labels[start] != target || seen[start] {
                continue;
            }
            let mut comp = vec![start];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(p) = stack.pop() {
                let (x, y) = (p % n, p / n);
                let mut visit = |q: usize| {
                    if labels[q] == target && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                        comp.push(q);
                    }
                };
                if x > 0 {
                    visit(p - 1);
                }
                if x + 1 < n {
                    visit(p + 1);
                }
                if y > 0 {
                    visit(p - n);
                }
                if y + 1 < n {
                    visit(p + n);
                }
            }
            comps.push(comp);
        }
        let largest = comps.iter().enumerate().max_by_key(|(i, c)| (c.len(), usize::MAX - i));
        if let Some((keep, _)) = largest {
            for (i, comp) in comps.iter().enumerate() {
                if i != keep {
                    for &p in comp {
                        labels[p] = ORPHAN;
                    }
                }
            }
        }
    }
}

/// Reassigns orphaned pixels to the majority label among their mask
/// neighbours, in synchronous deterministic waves.
fn absorb_orphans(labels: &mut [usize], mask: &[bool], n: usize) {
    const ORPHAN: usize = usize::MAX - 1;
    loop {
        let mut changes: Vec<(usize, usize)> = Vec::new();
        for p in 0..labels.len() {
            if labels[p] != ORPHAN || !mask[p] {
                continue;
            }
            let (x, y) = (p % n, p / n);
            let mut votes: Vec<usize> = Vec::with_capacity(4);
            let mut consider = |q: usize| {
                if labels[q] != ORPHAN && labels[q] != usize::MAX {
                    votes.push(labels[q]);
                }
            };
            if x > 0 {
                consider(p - 1);
            }
            if x + 1 < n {
                consider(p + 1);
            }
            if y > 0 {
                consider(p - n);
            }
            if y + 1 < n {
                consider(p + n);
            }
            if votes.is_empty() {
                continue;
            }
            votes.sort_unstable();
            // Majority, ties to the smallest label.
            let mut best = (0usize, votes[0]);
            let mut run = (0usize, votes[0]);
            for &v in &votes {
                if v == run.1 {
                    run.0 += 1;
                } else {
                    run = (1, v);
                }
                if run.0 > best.0 {
                    best = run;
                }
            }
            changes.push((p, best.1));
        }
        if changes.is_empty() {
            return;
        }
        for (p, l) in changes {
            labels[p] = l;
        }
    }
}

/// Piece pairs sharing a sufficiently long cut, counted over 4-adjacent
/// pixel pairs with different labels.
fn shared_cuts(labels: &[usize], n: usize, count: usize) -> Vec<(usize, usize)> {
    let mut border = vec![0usize; count * count];
    for p in 0..labels.len() {
        let a = labels[p];
        if a >= count {
            continue;
        }
        let (x, y) = (p % n, p / n);
        for q in [if x + 1 < n { Some(p + 1) } else { None }, if y + 1 < n { Some(p + n) } else { None }]
            .into_iter()
            .flatten()
        {
            let b = labels[q];
            if b < count && b != a {
                let (lo, hi) = (a.min(b), a.max(b));
                border[lo * count + hi] += 1;
            }
        }
    }
    (0..count)
        .flat_map(|i| (i + 1..count).map(move |j| (i, j)))
        .filter(|&(i, j)| border[i * count + j] >= MIN_SHARED_CUT)
        .collect()
}

fn adjacency_connected(adjacency: &[(usize, usize)], count: usize) -> bool {
    if count == 1 {
        return true;
    }
    let mut reach = vec![false; count];
    reach[0] = true;
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        for &(a, b) in adjacency {
            let other = if a == i {
                b
            } else if b == i {
                a
            } else {
                continue;
            };
            if !reach[other] {
                reach[other] = true;
                frontier.push(other);
            }
        }
    }
    reach.into_iter().all(|r| r)
}

fn build_set(master: u64, set: usize, count: usize) -> Result<VesselSet> {
    let mut shape_rng =
        ChaCha20Rng::seed_from_u64(stream_seed(master, SHAPE_STREAM, set as u64));
    let silhouette = vessel_mask(&mut shape_rng);
    let texture = paint_texture(&mut shape_rng, &silhouette, set);
    for attempt in 0..FRACTURE_ATTEMPTS {
        let mut rng = ChaCha20Rng::seed_from_u64(stream_seed(
            master,
            FRACTURE_STREAM,
            ((set as u64) << 8) | attempt,
        ));
        if let Some((piece_labels, adjacency)) = try_fracture(&mut rng, &silhouette, count) {
            let set = VesselSet { texture, silhouette, piece_labels, count, adjacency };
            // Pieces partition the silhouette exactly.
            debug_assert!(set
                .piece_labels
                .iter()
                .zip(&set.silhouette)
                .all(|(&l, &m)| if m { l < count } else { l == usize::MAX }));
            return Ok(set);
        }
    }
    Err(Error::Detection(format!(
        "could not fracture set {set} into {count} well-sized pieces"
    )))
}

/// Crops one piece onto a clean background. Returns the image and the
/// frame coordinates of its origin (image + offset = frame).
fn crop_piece(set: &VesselSet, piece: usize) -> (RasterImage, (f64, f64)) {
    let n = VESSEL_FRAME_SIZE;
    let (mut x0, mut y0, mut x1, mut y1) = (n, n, 0usize, 0usize);
    for p in 0..set.piece_labels.len() {
        if set.piece_labels[p] == piece {
            let (x, y) = (p % n, p / n);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    let ox = x0 as i64 - CROP_MARGIN as i64;
    let oy = y0 as i64 - CROP_MARGIN as i64;
    let w = x1 - x0 + 1 + 2 * CROP_MARGIN;
    let h = y1 - y0 + 1 + 2 * CROP_MARGIN;
    let img = RasterImage::from_fn(w, h, |ix, iy| {
        let fx = ix as i64 + ox;
        let fy = iy as i64 + oy;
        if fx < 0 || fy < 0 || fx >= n as i64 || fy >= n as i64 {
            return BACKGROUND;
        }
        let p = fy as usize * n + fx as usize;
        if set.piece_labels[p] == piece {
            set.texture.get(fx as usize, fy as usize)
        } else {
            BACKGROUND
        }
    });
    (img, (ox as f64, oy as f64))
}

/// Generates sherd sets with explicit piece counts, one count per set.
pub fn synth_sherd_sets_with_counts(
    counts: &[usize],
    seed: u64,
) -> Result<(Vec<RasterImage>, GroundTruth)> {
    if counts.is_empty() {
        return Err(Error::validation("at least one set is required"));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::validation("every set needs at least one piece"));
    }
    let sets: Vec<VesselSet> = counts
        .par_iter()
        .enumerate()
        .map(|(s, &c)| build_set(seed, s, c))
        .collect::<Result<Vec<_>>>()?;
    let mut images = Vec::new();
    let mut item_ids = Vec::new();
    let mut labels = Vec::new();
    let mut offsets = Vec::new();
    let mut adjacency = Vec::new();
    for (s, set) in sets.iter().enumerate() {
        let base = images.len();
        for piece in 0..set.count {
            let (img, offset) = crop_piece(set, piece);
            images.push(img);
            item_ids.push(format!("set{s:02}_piece{piece:02}"));
            labels.push(s);
            offsets.push(offset);
        }
        adjacency.extend(set.adjacency.iter().map(|&(a, b)| (base + a, base + b)));
    }
    Ok((images, GroundTruth { item_ids, labels, adjacency, offsets }))
}

/// Generates `n_sets` sherd sets with piece counts drawn uniformly from
/// `pieces_range` (inclusive).
pub fn synth_sherd_sets(
    n_sets: usize,
    pieces_range: (usize, usize),
    seed: u64,
) -> Result<(Vec<RasterImage>, GroundTruth)> {
    let (min, max) = pieces_range;
    if n_sets == 0 {
        return Err(Error::validation("n_sets must be at least 1"));
    }
    if min < 2 || min > max {
        return Err(Error::validation(format!(
            "pieces_range must satisfy 2 <= min <= max, got ({min}, {max})"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(stream_seed(seed, COUNT_STREAM, 0));
    let counts: Vec<usize> = (0..n_sets).map(|_| rng.random_range(min..=max)).collect();
    synth_sherd_sets_with_counts(&counts, seed)
}
