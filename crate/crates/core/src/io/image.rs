//! ASCII portable graymaps (`P2`, maxval 255) and plain-text input vectors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAXVAL: u32 = 255;

/// `round(255 v)` with halves rounded up, after clamping `v` to `[0, 1]`.
pub fn quantize(v: f64) -> u32 {
    (v.clamp(0.0, 1.0) * MAXVAL as f64 + 0.5).floor() as u32
}

pub fn image_to_string(values: &[f64], width: usize, height: usize) -> Result<String> {
    if width * height != values.len() {
        return Err(Error::Shape(format!("{width}x{height} image needs {} values, got {}", width * height, values.len())));
    }
    let mut out = format!("P2\n{width} {height}\n{MAXVAL}\n");
    for row in values.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).expect("writing to a string");
    }
    Ok(out)
}

pub fn write_image(values: &[f64], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, image_to_string(values, width, height)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major gray levels in `[0, 1]`.
    pub values: Vec<f64>,
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
        .filter(|t| !t.is_empty())
}

pub fn parse_pgm(text: &str, origin: &Path) -> Result<Image> {
    let err = |message: String| Error::Parse { path: origin.to_path_buf(), message };
    let mut it = tokens(text);
    if it.next() != Some("P2") {
        return Err(err("missing P2 magic".into()));
    }
    let mut num = |what: &str| -> Result<u32> {
        let t = it.next().ok_or_else(|| err(format!("missing {what}")))?;
        t.parse().map_err(|_| err(format!("bad {what} {t:?}")))
    };
    let width = num("width")? as usize;
    let height = num("height")? as usize;
    let maxval = num("maxval")?;
    if maxval == 0 {
        return Err(err("maxval 0".into()));
    }
    let values = (0..width * height)
        .map(|i| num(&format!("pixel {i}")).map(|p| p.min(maxval) as f64 / maxval as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(Image { width, height, values })
}

/// Whitespace- or comma-separated reals.
pub fn parse_vector(text: &str, origin: &Path) -> Result<Vec<f64>> {
    tokens(text)
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("not a number: {t:?}"),
            })
        })
        .collect()
}

/// A graymap when the file starts with `P2`, a text vector otherwise.
pub fn read_input(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with("P2") {
        Ok(parse_pgm(&text, path)?.values)
    } else {
        parse_vector(&text, path)
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    parse_pgm(&std::fs::read_to_string(path)?, path)
}

/// Smallest near-square `(width, height)` with `width * height = n`.
pub fn image_dims(n: usize) -> (usize, usize) {
    let mut h = (n as f64).sqrt().floor() as usize;
    while h > 1 && n % h != 0 {
        h -= 1;
    }
    let h = h.max(1);
    (n / h, h)
}
