//! Seven rotation, translation and scale invariant region moments.
//!
//! Two ways to measure a region: exactly from a closed polygon via
//! Green's theorem, or from a binary raster by pixel summation. Both
//! normalise orientation by the sign of the area, so traversal
//! direction does not matter; an actual mirror reflection flips the
//! sign of the seventh invariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// The seven invariants, in the conventional order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuVector(pub [f64; 7]);

impl HuVector {
    pub fn values(&self) -> &[f64; 7] {
        &self.0
    }
}

/// Raw geometric moments m_pq for p + q <= 3.
#[derive(Debug, Clone, Copy)]
struct RawMoments {
    m00: f64,
    m10: f64,
    m01: f64,
    m20: f64,
    m11: f64,
    m02: f64,
    m30: f64,
    m21: f64,
    m12: f64,
    m03: f64,
}

impl RawMoments {
    /// Exact area integrals over a simple closed polygon, one shoelace
    /// style term per edge.
    fn of_polygon(pts: &[(f64, f64)]) -> Self {
        let n = pts.len();
        let mut m = RawMoments {
            m00: 0.0,
            m10: 0.0,
            m01: 0.0,
            m20: 0.0,
            m11: 0.0,
            m02: 0.0,
            m30: 0.0,
            m21: 0.0,
            m12: 0.0,
            m03: 0.0,
        };
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            let c = x0 * y1 - x1 * y0;
            m.m00 += c;
            m.m10 += (x0 + x1) * c;
            m.m01 += (y0 + y1) * c;
            m.m20 += (x0 * x0 + x0 * x1 + x1 * x1) * c;
            m.m02 += (y0 * y0 + y0 * y1 + y1 * y1) * c;
            m.m11 += (2.0 * x0 * y0 + x0 * y1 + x1 * y0 + 2.0 * x1 * y1) * c;
            m.m30 += (x0 * x0 * x0 + x0 * x0 * x1 + x0 * x1 * x1 + x1 * x1 * x1) * c;
            m.m03 += (y0 * y0 * y0 + y0 * y0 * y1 + y0 * y1 * y1 + y1 * y1 * y1) * c;
            m.m21 += (3.0 * x0 * x0 * y0
                + 2.0 * x0 * x1 * y0
                + x1 * x1 * y0
                + x0 * x0 * y1
                + 2.0 * x0 * x1 * y1
                + 3.0 * x1 * x1 * y1)
                * c;
            m.m12 += (3.0 * y0 * y0 * x0
                + 2.0 * y0 * y1 * x0
                + y1 * y1 * x0
                + y0 * y0 * x1
                + 2.0 * y0 * y1 * x1
                + 3.0 * y1 * y1 * x1)
                * c;
        }
        m.m00 /= 2.0;
        m.m10 /= 6.0;
        m.m01 /= 6.0;
        m.m20 /= 12.0;
        m.m02 /= 12.0;
        m.m11 /= 24.0;
        m.m30 /= 20.0;
        m.m03 /= 20.0;
        m.m21 /= 60.0;
        m.m12 /= 60.0;
        // Normalise orientation: a clockwise traversal flips every sign.
        if m.m00 < 0.0 {
            for v in [
                &mut m.m00, &mut m.m10, &mut m.m01, &mut m.m20, &mut m.m11, &mut m.m02, &mut m.m30,
                &mut m.m21, &mut m.m12, &mut m.m03,
            ] {
                *v = -*v;
            }
        }
        m
    }

    fn of_mask(mask: &[bool], width: usize) -> Self {
        let mut m = RawMoments {
            m00: 0.0,
            m10: 0.0,
            m01: 0.0,
            m20: 0.0,
            m11: 0.0,
            m02: 0.0,
            m30: 0.0,
            m21: 0.0,
            m12: 0.0,
            m03: 0.0,
        };
        for (p, &on) in mask.iter().enumerate() {
            if !on {
                continue;
            }
            let x = (p % width) as f64;
            let y = (p / width) as f64;
            m.m00 += 1.0;
            m.m10 += x;
            m.m01 += y;
            m.m20 += x * x;
            m.m11 += x * y;
            m.m02 += y * y;
            m.m30 += x * x * x;
            m.m21 += x * x * y;
            m.m12 += x * y * y;
            m.m03 += y * y * y;
        }
        m
    }

    fn invariants(&self) -> Result<HuVector> {
        let a = self.m00;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Numeric("degenerate region: zero or non-finite area".into()));
        }
        let xb = self.m10 / a;
        let yb = self.m01 / a;
        // Central moments.
        let mu20 = self.m20 - xb * self.m10;
        let mu02 = self.m02 - yb * self.m01;
        let mu11 = self.m11 - xb * self.m01;
        let mu30 = self.m30 - 3.0 * xb * self.m20 + 2.0 * xb * xb * self.m10;
        let mu03 = self.m03 - 3.0 * yb * self.m02 + 2.0 * yb * yb * self.m01;
        let mu21 = self.m21 - 2.0 * xb * self.m11 - yb * self.m20 + 2.0 * xb * xb * self.m01;
        let mu12 = self.m12 - 2.0 * yb * self.m11 - xb * self.m02 + 2.0 * yb * yb * self.m10;
        // Scale normalisation: eta_pq = mu_pq / mu00^(1 + (p+q)/2).
        let n2 = a * a;
        let n3 = a * a * a.sqrt();
        let e20 = mu20 / n2;
        let e02 = mu02 / n2;
        let e11 = mu11 / n2;
        let e30 = mu30 / n3;
        let e03 = mu03 / n3;
        let e21 = mu21 / n3;
        let e12 = mu12 / n3;
        let h1 = e20 + e02;
        let h2 = (e20 - e02).powi(2) + 4.0 * e11 * e11;
        let h3 = (e30 - 3.0 * e12).powi(2) + (3.0 * e21 - e03).powi(2);
        let h4 = (e30 + e12).powi(2) + (e21 + e03).powi(2);
        let h5 = (e30 - 3.0 * e12)
            * (e30 + e12)
            * ((e30 + e12).powi(2) - 3.0 * (e21 + e03).powi(2))
            + (3.0 * e21 - e03) * (e21 + e03) * (3.0 * (e30 + e12).powi(2) - (e21 + e03).powi(2));
        let h6 = (e20 - e02) * ((e30 + e12).powi(2) - (e21 + e03).powi(2))
            + 4.0 * e11 * (e30 + e12) * (e21 + e03);
        let h7 = (3.0 * e21 - e03)
            * (e30 + e12)
            * ((e30 + e12).powi(2) - 3.0 * (e21 + e03).powi(2))
            - (e30 - 3.0 * e12) * (e21 + e03) * (3.0 * (e30 + e12).powi(2) - (e21 + e03).powi(2));
        Ok(HuVector([h1, h2, h3, h4, h5, h6, h7]))
    }
}

/// Invariants of the region enclosed by a closed polygon, computed
/// exactly from the vertices.
pub fn hu_from_polygon(points: &[(f64, f64)]) -> Result<HuVector> {
    if points.len() < 3 {
        return Err(Error::validation("a polygon needs at least 3 vertices"));
    }
    RawMoments::of_polygon(points).invariants()
}

/// Invariants of the pixels brighter than `threshold`, treating each
/// pixel as a unit point mass at its integer coordinates.
pub fn hu_from_raster(img: &RasterImage, threshold: f64) -> Result<HuVector> {
    let mask: Vec<bool> = img.data().iter().map(|&v| v > threshold).collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::Numeric("degenerate region: no pixels above threshold".into()));
    }
    RawMoments::of_mask(&mask, img.width()).invariants()
}
