//! Scores candidate joins between every pair of outlines and renders
//! side-by-side overlays for the most promising ones.

use artefact_core::contour::{match_subcontours, subcontour_points, suggested_window_len};
use artefact_core::raster::load_image;
use artefact_core::{ContourPolyline, MatchReport, RasterImage};
use rayon::prelude::*;

use crate::artifacts::{self, ContourArtifact, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

/// Overlays are rendered for this many of the best-scoring reports.
const OVERLAY_REPORTS: usize = 3;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let artifact: ContourArtifact =
        artifacts::read_json(&ws.require(artifacts::CONTOURS, "contours")?)?;
    let (ids, contours): (Vec<String>, Vec<ContourPolyline>) =
        artifact.contours.into_iter().unzip();

    let s = &cfg.sherd_match;
    let window_len =
        if s.window_len > 0 { s.window_len } else { suggested_window_len(&contours) };

    let n = contours.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut reports: Vec<MatchReport> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<MatchReport> {
            let matches =
                match_subcontours(&contours[i], &contours[j], window_len, s.stride, s.top_k)?;
            Ok(MatchReport { sherd_a: i, sherd_b: j, window_len, stride: s.stride, matches })
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|p, q| {
        p.best_score().total_cmp(&q.best_score()).then_with(|| {
            (p.sherd_a, p.sherd_b).cmp(&(q.sherd_a, q.sherd_b))
        })
    });

    for report in reports.iter().take(OVERLAY_REPORTS) {
        render_overlay(&ws, &ids, &contours, report)?;
    }

    artifacts::write_json_compact(&ws.output(artifacts::SHERD_MATCHES)?, &reports)?;
    let best = reports.first().map_or(f64::INFINITY, |r| r.best_score());
    println!("sherd-match: {} pair reports, best score {best:.3e}", reports.len());
    Ok(())
}

/// Both pieces side by side, outlines in blue, the best matched window
/// in red (piece a) and green (piece b).
fn render_overlay(
    ws: &Workspace,
    ids: &[String],
    contours: &[ContourPolyline],
    report: &MatchReport,
) -> Result<()> {
    let (a, b) = (report.sherd_a, report.sherd_b);
    let img_a = load_image(&ws.input(artifacts::corpus_image(&ids[a])))?;
    let img_b = load_image(&ws.input(artifacts::corpus_image(&ids[b])))?;
    let gap = 8u32;
    let width = (img_a.width() + img_b.width()) as u32 + gap;
    let height = img_a.height().max(img_b.height()) as u32;
    let mut canvas = image::RgbImage::new(width, height);

    blit_gray(&mut canvas, &img_a, 0);
    blit_gray(&mut canvas, &img_b, img_a.width() as u32 + gap);

    let x_b = (img_a.width() + gap as usize) as f64;
    draw_polyline(&mut canvas, contours[a].points(), 0.0, [90, 120, 255]);
    draw_polyline(&mut canvas, contours[b].points(), x_b, [90, 120, 255]);
    if let Some(best) = report.matches.first() {
        let wa = subcontour_points(&contours[a], best.start_a, report.window_len, false);
        let wb = subcontour_points(&contours[b], best.start_b, report.window_len, true);
        draw_polyline(&mut canvas, &wa, 0.0, [255, 60, 60]);
        draw_polyline(&mut canvas, &wb, x_b, [60, 220, 60]);
    }

    let path = ws.output(artifacts::overlay_image(&ids[a], &ids[b]))?;
    canvas.save(&path).map_err(|e| crate::error::CliError::artifact(&path, e.to_string()))?;
    Ok(())
}

fn blit_gray(canvas: &mut image::RgbImage, img: &RasterImage, x0: u32) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = (img.get(x, y).clamp(0.0, 1.0) * 255.0).round() as u8;
            canvas.put_pixel(x0 + x as u32, y as u32, image::Rgb([v, v, v]));
        }
    }
}

fn draw_polyline(canvas: &mut image::RgbImage, pts: &[(f64, f64)], x_shift: f64, rgb: [u8; 3]) {
    for &(x, y) in pts {
        let (px, py) = ((x + x_shift).round() as i64, y.round() as i64);
        if px >= 0 && py >= 0 && (px as u32) < canvas.width() && (py as u32) < canvas.height() {
            canvas.put_pixel(px as u32, py as u32, image::Rgb(rgb));
        }
    }
}
