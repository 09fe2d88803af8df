//! Readers and writers for every external format: binary PGM/PPM, 8-bit PNG,
//! 16-bit KITTI disparity PNG, PFM, and CSV cue lists.
//!
//! All loaders pass sample bytes through untouched; out-of-range inputs are
//! errors, never clamped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Cue, DisparityMap, Image, SparseCueSet};

/// Disparity file formats understood by [`load_disparity`] / [`save_disparity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisparityFormat {
    /// Grayscale PFM, float values verbatim. NaN/Inf and values <= 0 load as invalid.
    Pfm,
    /// KITTI convention: 16-bit grayscale PNG, stored value = disparity * 256, 0 = invalid.
    KittiPng,
    /// Sparse `x,y,d` rows on a declared grid; unlisted pixels are invalid.
    Csv { width: usize, height: usize },
}

pub fn load_image(path: &Path) -> Result<Image> {
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 2];
    file.read_exact(&mut magic)
        .map_err(|e| Error::io(path, e))?;
    match &magic {
        b"P5" => load_pnm(file, 1),
        b"P6" => load_pnm(file, 3),
        [0x89, b'P'] => load_png_8bit(path),
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: expected binary PGM (P5), PPM (P6), or PNG",
            path.display()
        ))),
    }
}

fn load_pnm<R: BufRead>(mut reader: R, channels: usize) -> Result<Image> {
    let width = read_pnm_int(&mut reader)?;
    let height = read_pnm_int(&mut reader)?;
    let maxval = read_pnm_int(&mut reader)?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "only 8-bit netpbm supported (maxval 255), got {maxval}"
        )));
    }
    let mut data = vec![0u8; width * height * channels];
    reader
        .read_exact(&mut data)
        .map_err(|_| Error::Malformed("truncated netpbm sample data".into()))?;
    Image::new(width, height, channels, data)
}

/// Reads one whitespace-delimited integer, skipping `#` comments. The single
/// whitespace byte after the last header field is consumed by the failed
/// digit check, which is exactly the netpbm framing rule.
fn read_pnm_int<R: BufRead>(reader: &mut R) -> Result<usize> {
    let mut byte = [0u8; 1];
    // skip whitespace and comments
    loop {
        reader
            .read_exact(&mut byte)
            .map_err(|_| Error::Malformed("truncated netpbm header".into()))?;
        match byte[0] {
            b' ' | b'\t' | b'\r' | b'\n' => continue,
            b'#' => {
                let mut junk = Vec::new();
                reader
                    .read_until(b'\n', &mut junk)
                    .map_err(|_| Error::Malformed("truncated netpbm comment".into()))?;
            }
            _ => break,
        }
    }
    let mut value: usize = 0;
    let mut digits = 0;
    loop {
        match byte[0] {
            b'0'..=b'9' => {
                value = value * 10 + (byte[0] - b'0') as usize;
                digits += 1;
            }
            b' ' | b'\t' | b'\r' | b'\n' => break,
            other => {
                return Err(Error::Malformed(format!(
                    "unexpected byte {other:#04x} in netpbm header"
                )))
            }
        }
        if reader.read_exact(&mut byte).is_err() {
            break;
        }
    }
    if digits == 0 {
        return Err(Error::Malformed("missing netpbm header field".into()));
    }
    Ok(value)
}

fn load_png_8bit(path: &Path) -> Result<Image> {
    let dynamic = image::open(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    match dynamic {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            Image::new(w as usize, h as usize, 1, img.into_raw())
        }
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = img.dimensions();
            Image::new(w as usize, h as usize, 3, img.into_raw())
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: PNG bit depth/color {:?} not supported as an image (8-bit gray or RGB only)",
            path.display(),
            other.color()
        ))),
    }
}

pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" | "ppm" => {
            let magic = if image.channels == 1 { "P5" } else { "P6" };
            let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
            write!(out, "{magic}\n{} {}\n255\n", image.width, image.height)
                .and_then(|_| out.write_all(&image.data))
                .map_err(|e| Error::io(path, e))
        }
        "png" => {
            let color = if image.channels == 1 {
                image::ColorType::L8
            } else {
                image::ColorType::Rgb8
            };
            image::save_buffer(
                path,
                &image.data,
                image.width as u32,
                image.height as u32,
                color,
            )
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
        }
        other => Err(Error::UnsupportedFormat(format!(
            "cannot infer image format from extension '{other}'"
        ))),
    }
}

pub fn load_disparity(path: &Path, format: DisparityFormat) -> Result<DisparityMap> {
    match format {
        DisparityFormat::Pfm => load_pfm(path),
        DisparityFormat::KittiPng => load_kitti_png(path),
        DisparityFormat::Csv { width, height } => load_disparity_csv(path, width, height),
    }
}

pub fn save_disparity(map: &DisparityMap, path: &Path, format: DisparityFormat) -> Result<()> {
    match format {
        DisparityFormat::Pfm => save_pfm(map, path),
        DisparityFormat::KittiPng => save_kitti_png(map, path),
        DisparityFormat::Csv { .. } => {
            Err(Error::UnsupportedFormat("CSV is a cue format; write cues instead".into()))
        }
    }
}

fn load_pfm(path: &Path) -> Result<DisparityMap> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let header = read_pfm_line(&mut reader)?;
    if header.trim() != "Pf" {
        return Err(Error::UnsupportedFormat(format!(
            "expected grayscale PFM header 'Pf', got '{}'",
            header.trim()
        )));
    }
    let dims = read_pfm_line(&mut reader)?;
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Malformed("bad PFM width".into()))?;
    let height: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Malformed("bad PFM height".into()))?;
    let scale: f32 = read_pfm_line(&mut reader)?
        .trim()
        .parse()
        .map_err(|_| Error::Malformed("bad PFM scale".into()))?;
    let little_endian = scale < 0.0;

    let mut raw = vec![0u8; width * height * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|_| Error::Malformed("truncated PFM sample data".into()))?;

    // PFM rows are stored bottom-to-top.
    let mut data = vec![0f32; width * height];
    for row in 0..height {
        let src_row = height - 1 - row;
        for col in 0..width {
            let off = (src_row * width + col) * 4;
            let bytes = [raw[off], raw[off + 1], raw[off + 2], raw[off + 3]];
            let v = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            data[row * width + col] = if v.is_finite() && v > 0.0 {
                v
            } else {
                DisparityMap::INVALID
            };
        }
    }
    DisparityMap::from_values(width, height, data)
}

fn read_pfm_line<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|_| Error::Malformed("truncated PFM header".into()))?;
    Ok(line)
}

/// Writer always emits native little-endian with negative scale.
fn save_pfm(map: &DisparityMap, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write!(out, "Pf\n{} {}\n-1.0\n", map.width, map.height).map_err(|e| Error::io(path, e))?;
    for row in (0..map.height).rev() {
        for col in 0..map.width {
            let v = map.get(col, row);
            let v = if DisparityMap::is_valid(v) { v } else { f32::INFINITY };
            out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn load_kitti_png(path: &Path) -> Result<DisparityMap> {
    let dynamic = image::open(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let img = match dynamic {
        image::DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: KITTI disparity must be 16-bit grayscale PNG, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = img.dimensions();
    let data = img
        .into_raw()
        .into_iter()
        .map(|v| {
            if v == 0 {
                DisparityMap::INVALID
            } else {
                v as f32 / 256.0
            }
        })
        .collect();
    DisparityMap::from_values(w as usize, h as usize, data)
}

fn save_kitti_png(map: &DisparityMap, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(map.data.len());
    for &v in &map.data {
        if !DisparityMap::is_valid(v) {
            raw.push(0u16);
            continue;
        }
        let scaled = (v * 256.0).round();
        if !(0.0..=65535.0).contains(&scaled) {
            return Err(Error::DisparityOverflow(v));
        }
        raw.push(scaled as u16);
    }
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        map.width as u32,
        map.height as u32,
        raw,
    )
    .expect("buffer shape checked above");
    img.save(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

fn load_disparity_csv(path: &Path, width: usize, height: usize) -> Result<DisparityMap> {
    let cues = load_cues_csv(path, width, height, usize::MAX)?;
    let mut map = DisparityMap::invalid(width, height);
    for cue in &cues.cues {
        map.set(cue.x, cue.y, cue.d);
    }
    Ok(map)
}

/// Parses `x,y,d` lines. A single leading non-numeric line is accepted as a header.
pub fn load_cues_csv(path: &Path, width: usize, height: usize, d_max: usize) -> Result<SparseCueSet> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut cues = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Malformed(format!(
                "{}:{}: expected 3 comma-separated fields",
                path.display(),
                lineno + 1
            )));
        }
        let parsed: Option<(usize, usize, f32)> = (|| {
            Some((
                fields[0].parse().ok()?,
                fields[1].parse().ok()?,
                fields[2].parse().ok()?,
            ))
        })();
        match parsed {
            Some((x, y, d)) => cues.push(Cue { x, y, d }),
            None if lineno == 0 => continue, // header row
            None => {
                return Err(Error::Malformed(format!(
                    "{}:{}: unparseable cue row '{trimmed}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    SparseCueSet::new(cues, width, height, d_max)
}

pub fn save_cues_csv(cues: &SparseCueSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "x,y,d").map_err(|e| Error::io(path, e))?;
    for cue in &cues.cues {
        writeln!(out, "{},{},{}", cue.x, cue.y, cue.d).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Sub-samples valid pixels of a disparity map into a cue set.
///
/// The subset has size `round(rate * valid_count)` and is drawn with the
/// seeded ChaCha8 generator (the project-wide PRNG), so the result is
/// reproducible across machines for a fixed (map, rate, seed).
pub fn cues_from_disparity(map: &DisparityMap, rate: f64, seed: u64) -> Result<SparseCueSet> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} not in (0, 1]")));
    }
    let mut valid: Vec<(usize, usize, f32)> = Vec::new();
    for y in 0..map.height {
        for x in 0..map.width {
            let d = map.get(x, y);
            if DisparityMap::is_valid(d) {
                valid.push((x, y, d));
            }
        }
    }
    if valid.is_empty() {
        return Err(Error::InvalidArgument("disparity map has no valid pixels".into()));
    }
    let target = ((rate * valid.len() as f64).round() as usize).min(valid.len());

    // partial Fisher-Yates: the first `target` slots end up a uniform sample
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = valid.len();
    for i in 0..target.min(n - 1) {
        let j = rng.gen_range(i..n);
        valid.swap(i, j);
    }
    let mut picked: Vec<(usize, usize, f32)> = valid[..target].to_vec();
    picked.sort_by_key(|&(x, y, _)| (y, x));

    let d_max = picked
        .iter()
        .map(|&(_, _, d)| d.floor() as usize + 1)
        .max()
        .unwrap_or(1);
    SparseCueSet::new(
        picked.into_iter().map(|(x, y, d)| Cue { x, y, d }).collect(),
        map.width,
        map.height,
        d_max,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn pgm_p5_bytes_pass_through() {
        let dir = tmpdir();
        let path = dir.path().join("t.pgm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0, 255, 128, 64]).unwrap();
        drop(f);
        let img = load_image(&path).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 2, 1));
        assert_eq!(img.data, vec![0, 255, 128, 64]);
    }

    #[test]
    fn ppm_p6_single_pixel() {
        let dir = tmpdir();
        let path = dir.path().join("t.ppm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P6\n# comment\n1 1\n255\n").unwrap();
        f.write_all(&[10, 20, 30]).unwrap();
        drop(f);
        let img = load_image(&path).unwrap();
        assert_eq!((img.width, img.height, img.channels), (1, 1, 3));
        assert_eq!(img.data, vec![10, 20, 30]);
    }

    #[test]
    fn sixteen_bit_png_rejected_as_image() {
        let dir = tmpdir();
        let path = dir.path().join("disp.png");
        let mut map = DisparityMap::invalid(3, 2);
        map.set(1, 0, 100.0);
        save_disparity(&map, &path, DisparityFormat::KittiPng).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)), "{err}");
    }

    #[test]
    fn truncated_pgm_is_error() {
        let dir = tmpdir();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\nxx").unwrap();
        assert!(matches!(load_image(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn kitti_png_quantization_convention() {
        let dir = tmpdir();
        let path = dir.path().join("d.png");
        let mut map = DisparityMap::invalid(2, 1);
        map.set(0, 0, 100.0);
        save_disparity(&map, &path, DisparityFormat::KittiPng).unwrap();
        let back = load_disparity(&path, DisparityFormat::KittiPng).unwrap();
        assert_eq!(back.get(0, 0), 100.0); // 25600 / 256
        assert!(!DisparityMap::is_valid(back.get(1, 0)));
    }

    #[test]
    fn kitti_png_overflow() {
        let dir = tmpdir();
        let mut map = DisparityMap::invalid(1, 1);
        map.set(0, 0, 300.0);
        let err = save_disparity(&map, &dir.path().join("d.png"), DisparityFormat::KittiPng);
        assert!(matches!(err, Err(Error::DisparityOverflow(_))));
    }

    #[test]
    fn pfm_round_trip_bit_exact() {
        let dir = tmpdir();
        let path = dir.path().join("d.pfm");
        let mut map = DisparityMap::invalid(3, 2);
        map.set(0, 0, 1.25);
        map.set(2, 1, 63.99);
        map.set(1, 0, 0.5);
        save_disparity(&map, &path, DisparityFormat::Pfm).unwrap();
        let back = load_disparity(&path, DisparityFormat::Pfm).unwrap();
        for (a, b) in map.data.iter().zip(back.data.iter()) {
            match (DisparityMap::is_valid(*a), DisparityMap::is_valid(*b)) {
                (true, true) => assert_eq!(a.to_bits(), b.to_bits()),
                (false, false) => {}
                _ => panic!("validity changed in round trip"),
            }
        }
    }

    #[test]
    fn csv_single_cue_map() {
        let dir = tmpdir();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "3,4,12.5\n").unwrap();
        let map = load_disparity(&path, DisparityFormat::Csv { width: 10, height: 10 }).unwrap();
        assert_eq!(map.valid_count(), 1);
        assert_eq!(map.get(3, 4), 12.5);
    }

    #[test]
    fn csv_out_of_range_coordinate_is_error() {
        let dir = tmpdir();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "x,y,d\n12,0,1.0\n").unwrap();
        assert!(load_cues_csv(&path, 10, 10, 64).is_err());
    }

    #[test]
    fn csv_duplicate_cue_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "1,1,2.0\n1,1,3.0\n").unwrap();
        assert!(load_cues_csv(&path, 10, 10, 64).is_err());
    }

    #[test]
    fn subsample_full_rate_takes_every_valid_pixel() {
        let mut map = DisparityMap::invalid(4, 4);
        map.set(0, 0, 1.0);
        map.set(3, 2, 2.0);
        map.set(1, 3, 3.0);
        let cues = cues_from_disparity(&map, 1.0, 7).unwrap();
        assert_eq!(cues.len(), 3);
    }

    #[test]
    fn subsample_size_is_rounded_rate() {
        let mut map = DisparityMap::invalid(40, 25);
        for i in 0..1000 {
            map.data[i] = (i % 32) as f32;
        }
        let cues = cues_from_disparity(&map, 0.15, 1).unwrap();
        assert_eq!(cues.len(), 150);
    }

    #[test]
    fn subsample_deterministic_and_subset() {
        let mut map = DisparityMap::invalid(16, 16);
        for i in (0..256).step_by(3) {
            map.data[i] = (i % 20) as f32;
        }
        let a = cues_from_disparity(&map, 0.4, 42).unwrap();
        let b = cues_from_disparity(&map, 0.4, 42).unwrap();
        assert_eq!(a.cues, b.cues);
        for cue in &a.cues {
            assert_eq!(map.get(cue.x, cue.y), cue.d);
        }
        let mut seen = std::collections::HashSet::new();
        assert!(a.cues.iter().all(|c| seen.insert((c.x, c.y))));
    }
}
