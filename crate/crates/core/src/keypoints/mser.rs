//! Maximally stable extremal regions.
//!
//! Both polarities are swept with a union-find component tree over the
//! 256-level quantised image. A component's variation at level `t` is
//! `(area(t + delta) - area(t - delta)) / area(t)`; its stability is the
//! reciprocal of the minimum variation over its lifetime. Components are
//! tracked while they remain the larger party of every merge, which is the
//! usual survivor-continues convention.

use crate::error::{Error, Result};
use crate::keypoints::harris::describe_at;
use crate::keypoints::{Keypoint, KeypointDescriptorSet};
use crate::raster::RasterImage;

/// Smallest region area kept (pixels).
const MIN_AREA: usize = 30;
/// Largest region area kept, as a fraction of the image.
const MAX_AREA_FRACTION: f64 = 0.01;

/// A stable extremal region.
#[derive(Debug, Clone)]
pub struct MserRegion {
    /// Member pixels (column, row), sorted.
    pub pixels: Vec<(u32, u32)>,
    /// Pixel centroid (column, row).
    pub center: (f64, f64),
    /// Reciprocal of the minimal relative area variation.
    pub stability: f64,
    pub area: usize,
}

/// Detects stable regions of both polarities and keeps the top
/// `keep_fraction` by stability (at least one when any qualify).
pub fn mser_regions(
    img: &RasterImage,
    delta: usize,
    max_variation: f64,
    keep_fraction: f64,
) -> Result<Vec<MserRegion>> {
    validate(img, delta, max_variation, keep_fraction)?;
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let max_area = ((n as f64 * MAX_AREA_FRACTION) as usize).max(MIN_AREA);

    let dark: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    let bright: Vec<u8> = dark.iter().map(|l| 255 - l).collect();

    let mut candidates = Vec::new();
    sweep_polarity(&dark, w, h, delta, max_variation, MIN_AREA, max_area, false, &mut candidates);
    sweep_polarity(&bright, w, h, delta, max_variation, MIN_AREA, max_area, true, &mut candidates);

    // Strongest first; deterministic ties.
    candidates.sort_by(|a, b| {
        b.stability
            .partial_cmp(&a.stability)
            .unwrap()
            .then(b.area.cmp(&a.area))
            .then(a.seed.cmp(&b.seed))
            .then(a.bright.cmp(&b.bright))
    });
    let keep = ((candidates.len() as f64 * keep_fraction).round() as usize)
        .clamp(usize::from(!candidates.is_empty()), candidates.len());

    let mut out = Vec::with_capacity(keep);
    for cand in candidates.into_iter().take(keep) {
        let levels = if cand.bright { &bright } else { &dark };
        let pixels = flood_region(levels, w, h, cand.seed, cand.level);
        let area = pixels.len();
        let (mut sx, mut sy) = (0.0f64, 0.0f64);
        for &(x, y) in &pixels {
            sx += x as f64;
            sy += y as f64;
        }
        out.push(MserRegion {
            center: (sx / area as f64, sy / area as f64),
            pixels,
            stability: cand.stability,
            area,
        });
    }
    Ok(out)
}

/// Region detection plus descriptor extraction: each retained region
/// becomes one keypoint at its centroid with scale `sqrt(area / pi)` and
/// the region stability as strength.
pub fn detect_mser_features(
    img: &RasterImage,
    delta: usize,
    max_variation: f64,
    keep_fraction: f64,
) -> Result<KeypointDescriptorSet> {
    let regions = mser_regions(img, delta, max_variation, keep_fraction)?;
    let mut set = KeypointDescriptorSet::empty("");
    for region in &regions {
        let scale = (region.area as f64 / std::f64::consts::PI).sqrt();
        if let Some(desc) = describe_at(img, region.center.0, region.center.1, scale) {
            set.push(
                Keypoint {
                    x: region.center.0,
                    y: region.center.1,
                    scale,
                    strength: region.stability,
                },
                &desc,
            );
        }
    }
    Ok(set)
}

fn validate(img: &RasterImage, delta: usize, max_variation: f64, keep_fraction: f64) -> Result<()> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::validation("empty image"));
    }
    if delta == 0 || delta > 127 {
        return Err(Error::validation("delta must be in 1..=127 intensity steps"));
    }
    if !(max_variation > 0.0) || !max_variation.is_finite() {
        return Err(Error::validation("max_variation must be positive and finite"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::validation("keep_fraction must be in (0, 1]"));
    }
    Ok(())
}

struct Candidate {
    seed: u32,
    level: u8,
    stability: f64,
    area: usize,
    bright: bool,
}

struct Node {
    parent: u32,
    size: u32,
    seed: u32,
    birth: u8,
    /// Level at which this node was absorbed; 256 while alive.
    death: u16,
    dirty: bool,
    /// `(level, area at end of level)` while this node was a live root.
    history: Vec<(u8, u32)>,
}

fn find(nodes: &mut [Node], mut a: u32) -> u32 {
    while nodes[a as usize].parent != a {
        let p = nodes[a as usize].parent;
        nodes[a as usize].parent = nodes[p as usize].parent;
        a = nodes[a as usize].parent;
    }
    a
}

#[allow(clippy::too_many_arguments)]
fn sweep_polarity(
    levels: &[u8],
    w: usize,
    h: usize,
    delta: usize,
    max_variation: f64,
    min_area: usize,
    max_area: usize,
    bright: bool,
    out: &mut Vec<Candidate>,
) {
    let n = w * h;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); 256];
    for (i, &l) in levels.iter().enumerate() {
        buckets[l as usize].push(i as u32);
    }

    let mut pixel_root: Vec<u32> = vec![u32::MAX; n];
    let mut nodes: Vec<Node> = Vec::new();
    let mut dirty: Vec<u32> = Vec::new();

    for lev in 0..256u16 {
        for &p in &buckets[lev as usize] {
            let (x, y) = ((p as usize % w) as i64, (p as usize / w) as i64);
            let mut roots = [u32::MAX; 4];
            let mut n_roots = 0;
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if pixel_root[q] == u32::MAX {
                    continue;
                }
                let r = find(&mut nodes, pixel_root[q]);
                if !roots[..n_roots].contains(&r) {
                    roots[n_roots] = r;
                    n_roots += 1;
                }
            }
            if n_roots == 0 {
                let id = nodes.len() as u32;
                nodes.push(Node {
                    parent: id,
                    size: 1,
                    seed: p,
                    birth: lev as u8,
                    death: 256,
                    dirty: false,
                    history: Vec::new(),
                });
                pixel_root[p as usize] = id;
                mark_dirty(&mut nodes, &mut dirty, id);
            } else {
                // Join the largest neighbouring component, absorb the rest.
                let mut main = roots[0];
                for &r in &roots[1..n_roots] {
                    if nodes[r as usize].size > nodes[main as usize].size
                        || (nodes[r as usize].size == nodes[main as usize].size && r < main)
                    {
                        main = r;
                    }
                }
                nodes[main as usize].size += 1;
                pixel_root[p as usize] = main;
                for &r in &roots[..n_roots] {
                    if r == main {
                        continue;
                    }
                    nodes[r as usize].death = lev;
                    nodes[main as usize].size += nodes[r as usize].size;
                    nodes[r as usize].parent = main;
                }
                mark_dirty(&mut nodes, &mut dirty, main);
            }
        }
        for id in dirty.drain(..) {
            let node = &mut nodes[id as usize];
            node.dirty = false;
            if node.death > lev {
                node.history.push((lev as u8, node.size));
            }
        }
    }

    for node in &nodes {
        if node.history.is_empty() {
            continue;
        }
        let death = node.death as i32;
        let birth = node.birth as i32;
        let d = delta as i32;
        // The variation is piecewise constant in t, changing only where
        // t, t - d or t + d crosses a recorded growth level, so probing
        // those breakpoints plus the window ends finds its exact minimum
        // over [birth + d, death - 1 - d].
        let mut probes = vec![birth + d, death - 1 - d];
        for &(t, _) in &node.history {
            let t = t as i32;
            probes.extend_from_slice(&[t - d, t, t + d]);
        }
        probes.sort_unstable();
        probes.dedup();
        let mut best: Option<(f64, u8)> = None;
        for t in probes {
            if t - d < birth || t + d >= death {
                continue;
            }
            let a_now = area_at(&node.history, t) as f64;
            let a_hi = area_at(&node.history, t + d) as f64;
            let a_lo = area_at(&node.history, t - d) as f64;
            let q = (a_hi - a_lo) / a_now;
            if best.is_none() || q < best.unwrap().0 {
                best = Some((q, t as u8));
            }
        }
        if let Some((q, t_star)) = best {
            if q <= max_variation {
                let area = area_at(&node.history, t_star as i32) as usize;
                if (min_area..=max_area).contains(&area) {
                    let stability = if q < 1e-9 { 1e9 } else { 1.0 / q };
                    out.push(Candidate { seed: node.seed, level: t_star, stability, area, bright });
                }
            }
        }
    }
}

fn mark_dirty(nodes: &mut [Node], dirty: &mut Vec<u32>, id: u32) {
    if !nodes[id as usize].dirty {
        nodes[id as usize].dirty = true;
        dirty.push(id);
    }
}

/// Area of the component at `level` (last recorded entry at or before it).
fn area_at(history: &[(u8, u32)], level: i32) -> u32 {
    let mut area = history[0].1;
    for &(l, a) in history {
        if (l as i32) <= level {
            area = a;
        } else {
            break;
        }
    }
    area
}

/// Pixels of the extremal region: flood fill from the seed over pixels
/// with quantised level at or below `level` (4-connected).
fn flood_region(levels: &[u8], w: usize, h: usize, seed: u32, level: u8) -> Vec<(u32, u32)> {
    let mut visited = std::collections::HashSet::new();
    let mut stack = vec![seed];
    visited.insert(seed);
    let mut pixels = Vec::new();
    while let Some(p) = stack.pop() {
        let (x, y) = ((p as usize % w) as i64, (p as usize / w) as i64);
        pixels.push((x as u32, y as u32));
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let q = (ny as usize * w + nx as usize) as u32;
            if levels[q as usize] <= level && visited.insert(q) {
                stack.push(q);
            }
        }
    }
    pixels.sort_unstable();
    pixels
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Several dark blobs of distinct contrasts on a light background.
    fn blob_image() -> RasterImage {
        let centres: [(f64, f64, f64); 6] = [
            (20.0, 20.0, 0.05),
            (60.0, 20.0, 0.15),
            (100.0, 20.0, 0.25),
            (20.0, 70.0, 0.35),
            (60.0, 70.0, 0.10),
            (100.0, 70.0, 0.30),
        ];
        // Blob areas (~95 px) stay under the 1% of image area cap.
        RasterImage::from_fn(128, 96, |x, y| {
            for &(cx, cy, v) in &centres {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d < 5.5 {
                    return v;
                }
            }
            0.9
        })
    }

    #[test]
    fn finds_dark_blobs() {
        let regions = mser_regions(&blob_image(), 2, 0.25, 1.0).unwrap();
        assert!(regions.len() >= 6, "found {}", regions.len());
        // Every blob centre must be covered by some retained region.
        for &(cx, cy) in &[(20u32, 20u32), (60, 20), (100, 20), (20, 70), (60, 70), (100, 70)] {
            assert!(
                regions.iter().any(|r| r.pixels.contains(&(cx, cy))),
                "no region covers blob at ({cx}, {cy})"
            );
        }
        for r in &regions {
            assert!(r.area >= MIN_AREA);
            assert_eq!(r.area, r.pixels.len());
        }
    }

    #[test]
    fn keep_fraction_prunes_to_the_strongest() {
        let img = blob_image();
        let all = mser_regions(&img, 2, 0.25, 1.0).unwrap();
        let kept = mser_regions(&img, 2, 0.25, 0.5).unwrap();
        let expect = ((all.len() as f64 * 0.5).round() as usize).max(1);
        assert_eq!(kept.len(), expect);
        let min_kept = kept.iter().map(|r| r.stability).fold(f64::INFINITY, f64::min);
        let max_all = all[kept.len()..].iter().map(|r| r.stability).fold(0.0f64, f64::max);
        assert!(min_kept >= max_all);
    }

    #[test]
    fn polarity_swaps_under_inversion() {
        let img = blob_image();
        let inverted = RasterImage::from_fn(img.width(), img.height(), |x, y| 1.0 - img.get(x, y));
        let a = mser_regions(&img, 2, 0.25, 1.0).unwrap();
        let b = mser_regions(&inverted, 2, 0.25, 1.0).unwrap();
        let key = |r: &MserRegion| r.pixels.clone();
        let mut pa: Vec<_> = a.iter().map(key).collect();
        let mut pb: Vec<_> = b.iter().map(key).collect();
        pa.sort();
        pb.sort();
        assert_eq!(pa, pb);
    }

    #[test]
    fn intensity_shift_keeps_the_region_set() {
        let img = blob_image();
        // Shift every level up by exactly 32/255 (no clamping occurs).
        let shifted = RasterImage::from_fn(img.width(), img.height(), |x, y| {
            img.get(x, y) + 32.0 / 255.0
        });
        let a = mser_regions(&img, 2, 0.25, 1.0).unwrap();
        let b = mser_regions(&shifted, 2, 0.25, 1.0).unwrap();
        let mut pa: Vec<_> = a.iter().map(|r| r.pixels.clone()).collect();
        let mut pb: Vec<_> = b.iter().map(|r| r.pixels.clone()).collect();
        pa.sort();
        pb.sort();
        assert_eq!(pa, pb);
    }

    #[test]
    fn constant_image_yields_nothing() {
        let img = RasterImage::from_fn(64, 64, |_, _| 0.5);
        let regions = mser_regions(&img, 2, 0.25, 1.0).unwrap();
        assert!(regions.is_empty());
        let set = detect_mser_features(&img, 2, 0.25, 1.0).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn descriptors_accompany_regions() {
        let set = detect_mser_features(&blob_image(), 2, 0.25, 1.0).unwrap();
        assert!(!set.is_empty());
        for i in 0..set.len() {
            let norm: f64 = set.descriptor(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            assert!(set.keypoints[i].scale > 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = blob_image();
        assert!(mser_regions(&img, 0, 0.25, 1.0).is_err());
        assert!(mser_regions(&img, 128, 0.25, 1.0).is_err());
        assert!(mser_regions(&img, 2, 0.0, 1.0).is_err());
        assert!(mser_regions(&img, 2, 0.25, 0.0).is_err());
        assert!(mser_regions(&img, 2, 0.25, 1.5).is_err());
    }
}
