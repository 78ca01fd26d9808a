//! Sherd outline extraction and fragment-edge matching.
//!
//! An outline is recovered from a photographed fragment by Canny edge
//! detection, picking the largest closed edge loop, tracing it with
//! Moore neighbour following and resampling to uniform arc length.
//! Sub-windows of two outlines are then compared by moment invariants to
//! propose mating fracture edges.

mod hu;
mod matching;

use serde::{Deserialize, Serialize};

pub use hu::{hu_from_polygon, hu_from_raster, HuVector};
pub use matching::{
    match_subcontours, reconstruct_pairs, shape_distance, subcontour_points,
    suggested_window_len, MatchReport, SubContourMatch, DEFAULT_STRIDE,
};

use crate::edges::canny;
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Default resampling spacing in pixels.
pub const CONTOUR_SPACING: f64 = 2.0;
/// Shortest traced loop (in pixels of perimeter) accepted as a contour.
const MIN_PERIMETER: f64 = 32.0;
const MIN_POINTS: usize = 8;

/// A closed outline: points in order, the last connecting back to the
/// first, spaced uniformly along the arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPolyline {
    points: Vec<(f64, f64)>,
    arclength_spacing: f64,
}

impl ContourPolyline {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arclength_spacing(&self) -> f64 {
        self.arclength_spacing
    }

    /// Total arc length including the closing segment.
    pub fn perimeter(&self) -> f64 {
        perimeter_of(&self.points)
    }
}

fn perimeter_of(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = points[i];
            let (x1, y1) = points[(i + 1) % n];
            ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
        })
        .sum()
}

/// Resamples a closed polyline to uniform spacing, as close to `spacing`
/// as an integer point count allows.
pub fn resample_closed(points: &[(f64, f64)], spacing: f64) -> Result<ContourPolyline> {
    if points.len() < 3 {
        return Err(Error::validation("a closed polyline needs at least 3 points"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::validation("spacing must be positive and finite"));
    }
    let total = perimeter_of(points);
    if !(total > 0.0) {
        return Err(Error::validation("polyline has zero length"));
    }
    let count = ((total / spacing).round() as usize).max(MIN_POINTS);
    let step = total / count as f64;
    let n = points.len();
    // `step` measures arc length along the input; chords of the output
    // are a touch shorter where the input zigzags, so the recorded
    // spacing is recomputed from the output below.
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    let seg_len = |i: usize| {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
    };
    let mut current_len = seg_len(0);
    for k in 0..count {
        let target = k as f64 * step;
        while seg_start + current_len < target && seg + 1 < n {
            seg_start += current_len;
            seg += 1;
            current_len = seg_len(seg);
        }
        let t = if current_len > 0.0 { (target - seg_start) / current_len } else { 0.0 };
        let (x0, y0) = points[seg];
        let (x1, y1) = points[(seg + 1) % n];
        out.push((x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
    }
    let spacing = perimeter_of(&out) / count as f64;
    Ok(ContourPolyline { points: out, arclength_spacing: spacing })
}

/// Labels 8-connected components of a mask; returns (labels, count)
/// with usize::MAX marking background.
fn components8(mask: &[bool], w: usize, h: usize) -> (Vec<usize>, usize) {
    let mut labels = vec![usize::MAX; w * h];
    let mut next = 0usize;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask[start] || labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if mask[q] && labels[q] == usize::MAX {
                        labels[q] = next;
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    (labels, next)
}

/// Pixels enclosed by a component: flood the border-connected outside
/// over non-component pixels; what remains (and is not the component)
/// is interior.
fn interior_of_component(labels: &[usize], target: usize, w: usize, h: usize) -> Vec<bool> {
    let blocked: Vec<bool> = labels.iter().map(|&l| l == target).collect();
    let mut outside = vec![false; w * h];
    let mut stack = Vec::new();
    for x in 0..w {
        for y in [0, h - 1] {
            let p = y * w + x;
            if !blocked[p] && !outside[p] {
                outside[p] = true;
                stack.push(p);
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            let p = y * w + x;
            if !blocked[p] && !outside[p] {
                outside[p] = true;
                stack.push(p);
            }
        }
    }
    while let Some(p) = stack.pop() {
        let (x, y) = (p % w, p / w);
        let mut push = |q: usize| {
            if !blocked[q] && !outside[q] {
                outside[q] = true;
                stack.push(q);
            }
        };
        if x > 0 {
            push(p - 1);
        }
        if x + 1 < w {
            push(p + 1);
        }
        if y > 0 {
            push(p - w);
        }
        if y + 1 < h {
            push(p + w);
        }
    }
    (0..w * h).map(|p| !blocked[p] && !outside[p]).collect()
}

/// Moore-neighbour boundary trace of a region, clockwise from its
/// topmost-leftmost pixel. Returns pixel coordinates in visit order.
fn trace_boundary(region: &[bool], w: usize, h: usize) -> Vec<(usize, usize)> {
    let start = match (0..w * h).find(|&p| region[p]) {
        Some(p) => (p % w, p / w),
        None => return Vec::new(),
    };
    // Clockwise Moore neighbourhood starting east.
    const DIRS: [(i64, i64); 8] =
        [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && region[y as usize * w + x as usize]
    };
    let mut path = vec![start];
    let mut current = start;
    // The west neighbour of the topmost-leftmost pixel is outside the
    // region; begin the scan there.
    let mut backtrack_dir = 4usize;
    let first_state = loop {
        // Scan clockwise from the neighbour after the backtrack.
        let mut found = None;
        for step in 1..=8 {
            let d = (backtrack_dir + step) % 8;
            let (dx, dy) = DIRS[d];
            if inside(current.0 as i64 + dx, current.1 as i64 + dy) {
                found = Some(d);
                break;
            }
        }
        let Some(d) = found else {
            // Isolated pixel.
            return path;
        };
        let next = (
            (current.0 as i64 + DIRS[d].0) as usize,
            (current.1 as i64 + DIRS[d].1) as usize,
        );
        // New backtrack: the direction pointing back at the previous
        // pixel, rotated to resume scanning just past it.
        backtrack_dir = (d + 4) % 8;
        current = next;
        break (current, backtrack_dir);
    };
    let max_steps = 4 * region.iter().filter(|&&r| r).count() + 8;
    if first_state.0 != start {
        path.push(first_state.0);
    }
    let mut steps = 0;
    loop {
        let mut found = None;
        for step in 1..=8 {
            let d = (backtrack_dir + step) % 8;
            let (dx, dy) = DIRS[d];
            if inside(current.0 as i64 + dx, current.1 as i64 + dy) {
                found = Some(d);
                break;
            }
        }
        let Some(d) = found else { return path };
        let next = (
            (current.0 as i64 + DIRS[d].0) as usize,
            (current.1 as i64 + DIRS[d].1) as usize,
        );
        backtrack_dir = (d + 4) % 8;
        current = next;
        steps += 1;
        if (current, backtrack_dir) == first_state || steps > max_steps {
            return path;
        }
        path.push(current);
    }
}

/// Extracts the sherd outline: Canny edges, the closed edge loop
/// enclosing the most area, Moore tracing, uniform resampling at
/// [`CONTOUR_SPACING`].
pub fn extract_contour(
    img: &RasterImage,
    sigma: f64,
    t_low: f64,
    t_high: f64,
) -> Result<ContourPolyline> {
    let edges = canny(img, sigma, t_low, t_high)?;
    let (w, h) = (edges.width, edges.height);
    let (labels, count) = components8(&edges.mask, w, h);
    let mut sizes = vec![0usize; count];
    for &l in &labels {
        if l != usize::MAX {
            sizes[l] += 1;
        }
    }

    // Among components big enough to possibly close, pick the one
    // enclosing the most interior pixels; open arcs enclose none.
    let mut best: Option<(usize, usize)> = None;
    for (comp, &size) in sizes.iter().enumerate() {
        if (size as f64) < MIN_PERIMETER {
            continue;
        }
        let interior = interior_of_component(&labels, comp, w, h);
        let area = interior.iter().filter(|&&i| i).count();
        if area == 0 {
            continue;
        }
        if best.is_none_or(|(_, a)| area > a) {
            best = Some((comp, area));
        }
    }
    let Some((comp, _)) = best else {
        return Err(Error::Detection(
            "no closed edge loop of sufficient length; is the object on a contrasting background?"
                .into(),
        ));
    };

    // Region = loop plus its interior; its outer boundary is the outline.
    let mut region = interior_of_component(&labels, comp, w, h);
    for (p, r) in region.iter_mut().enumerate() {
        *r = *r || labels[p] == comp;
    }
    let traced = trace_boundary(&region, w, h);
    let polyline: Vec<(f64, f64)> = traced.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    if polyline.len() < 3 || perimeter_of(&polyline) < MIN_PERIMETER {
        return Err(Error::Detection("closed edge loop is too short to be an outline".into()));
    }
    resample_closed(&polyline, CONTOUR_SPACING)
}
