use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Plain-text PGM (P2) with max value 255; values are clamped to `[0, 1]`.
pub fn to_pgm(image: &Tensor) -> Result<String> {
    if image.rank() != 2 {
        return Err(Error::dim(
            "to_pgm",
            format!("expected [h, w], got {:?}", image.shape()),
        ));
    }
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let mut out = format!("P2\n{w} {h}\n255\n");
    for r in 0..h {
        let row: Vec<String> = (0..w).map(|c| gray_level(image.at(&[r, c])).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn gray_level(v: Real) -> u8 {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    (v * 255.0).round() as u8
}

/// Reads a P2 image back into `[h, w]` with values in `[0, 1]`.
pub fn from_pgm(text: &str) -> Result<Tensor> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::format("pgm.magic", "expected P2"));
    }
    let mut num = |field: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(field, "missing or non-numeric"))
    };
    let (w, h, max) = (num("pgm.width")?, num("pgm.height")?, num("pgm.maxval")?);
    if max == 0 {
        return Err(Error::format("pgm.maxval", "must be positive"));
    }
    let data = (0..w * h)
        .map(|_| num("pgm.pixel").map(|v| v as Real / max as Real))
        .collect::<Result<Vec<_>>>()?;
    Tensor::new(vec![h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_at_gray_levels() {
        let img = Tensor::new(vec![2, 3], vec![0.0, 1.0, 0.2, 0.5, 1.5, -1.0]).unwrap();
        let text = to_pgm(&img).unwrap();
        assert!(text.starts_with("P2\n3 2\n255\n0 255 51\n"));
        let back = from_pgm(&text).unwrap();
        assert_eq!(back.shape(), &[2, 3]);
        assert_eq!(back.at(&[1, 1]), 1.0);
        assert_eq!(back.at(&[1, 2]), 0.0);
    }
}
