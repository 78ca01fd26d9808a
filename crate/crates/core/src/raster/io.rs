//! Image file input/output.
//!
//! Photographs are read from PNG (via the `image` codec) or binary PGM.
//! Intermediate pipeline images are written as 16-bit binary PGM so that
//! enhancement output survives a round-trip with negligible quantisation.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterImage;

const PGM_MAXVAL: u32 = 65535;

/// Loads a greyscale image from PNG or binary PGM, converting colour input
/// with the 0.299/0.587/0.114 luminance weights.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    let dynimg = image::load_from_memory(&bytes).map_err(map_image_error)?;
    let rgba = dynimg.to_rgba32f();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    for px in rgba.pixels() {
        let [r, g, b, _a] = px.0;
        let lum = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        data.push(lum.clamp(0.0, 1.0));
    }
    RasterImage::from_vec(w, h, data)
}

fn map_image_error(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::format(other.to_string()),
    }
}

/// Writes a binary PGM with maxval 65535 (big-endian samples, per netpbm).
pub fn save_pgm(img: &RasterImage, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.width() * img.height() * 2 + 32);
    write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), PGM_MAXVAL)?;
    for v in img.data() {
        let q = (v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_pgm(path: &Path) -> Result<RasterImage> {
    decode_pgm(&fs::read(path)?)
}

/// Writes an 8-bit greyscale PNG (used for synthetic corpora).
pub fn save_png_gray(img: &RasterImage, path: &Path) -> Result<()> {
    let mut buf = image::GrayImage::new(img.width() as u32, img.height() as u32);
    for (i, v) in img.data().iter().enumerate() {
        let q = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        buf.as_mut()[i] = q;
    }
    buf.save(path).map_err(map_image_error)
}

fn decode_pgm(bytes: &[u8]) -> Result<RasterImage> {
    let mut pos = 0usize;
    let magic = pgm_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::format("not a binary PGM (expected P5 magic)"));
    }
    let width: usize = parse_pgm_number(bytes, &mut pos)?;
    let height: usize = parse_pgm_number(bytes, &mut pos)?;
    let maxval: u32 = parse_pgm_number(bytes, &mut pos)? as u32;
    if width == 0 || height == 0 {
        return Err(Error::format("PGM with zero dimension"));
    }
    if maxval == 0 || maxval > PGM_MAXVAL {
        return Err(Error::format(format!("PGM maxval {maxval} out of range")));
    }
    // Header ends with exactly one whitespace byte before the raster.
    let n = width * height;
    let wide = maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let raster = bytes.get(pos..pos + n * sample_bytes).ok_or_else(|| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "truncated PGM raster",
        ))
    })?;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n);
    if wide {
        for chunk in raster.chunks_exact(2) {
            let s = u16::from_be_bytes([chunk[0], chunk[1]]);
            if s as u32 > maxval {
                return Err(Error::format("PGM sample exceeds maxval"));
            }
            data.push(s as f64 * scale);
        }
    } else {
        for &b in raster {
            if b as u32 > maxval {
                return Err(Error::format("PGM sample exceeds maxval"));
            }
            data.push(b as f64 * scale);
        }
    }
    RasterImage::from_vec(width, height, data)
}

/// Reads the next header token, skipping whitespace and `#` comments.
fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "truncated PGM header",
        )));
    }
    let token = &bytes[start..*pos];
    // Consume the single whitespace byte that terminates the token.
    if *pos < bytes.len() {
        *pos += 1;
    }
    Ok(token)
}

fn parse_pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::format("malformed PGM header number"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_8bit_values_scale_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        fs::write(&path, [b"P5\n2 2\n255\n".as_ref(), &[0u8, 85, 170, 255]].concat()).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn pgm_16bit_round_trip_quantises_below_1e4() {
        let img = RasterImage::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 97) as f64 / 96.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.pgm");
        save_pgm(&img, &path).unwrap();
        let back = load_pgm(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn pgm_writer_output_is_byte_stable() {
        let img = RasterImage::from_fn(5, 4, |x, y| (x + y) as f64 / 8.0);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.pgm");
        let p2 = dir.path().join("b.pgm");
        save_pgm(&img, &p1).unwrap();
        save_pgm(&img, &p2).unwrap();
        assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
    }

    #[test]
    fn truncated_pgm_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        fs::write(&path, b"P5\n4 4\n255\nab").unwrap();
        match load_image(&path) {
            Err(Error::Io(_)) => {}
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, b"definitely not an image").unwrap();
        match load_image(&path) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        match load_image(Path::new("/nonexistent/nope.png")) {
            Err(Error::Io(_)) => {}
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn png_colour_converts_with_luminance_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("red.png");
        let mut buf = image::RgbImage::new(2, 1);
        buf.put_pixel(0, 0, image::Rgb([255, 0, 0]));
        buf.put_pixel(1, 0, image::Rgb([0, 255, 0]));
        buf.save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert!((img.get(0, 0) - 0.299).abs() < 1e-6);
        assert!((img.get(1, 0) - 0.587).abs() < 1e-6);
    }

    #[test]
    fn png_gray_round_trip() {
        let img = RasterImage::from_fn(6, 5, |x, y| ((x * 40 + y * 13) % 256) as f64 / 255.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        save_png_gray(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }
}
