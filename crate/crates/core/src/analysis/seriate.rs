//! Spectral seriation and red–blue heatmaps of distance matrices.

use std::io::Write;

use nalgebra::DMatrix;

use super::matrix::DistanceMatrix;
use crate::error::{Error, Result};

/// Orders specimens by the Fiedler vector of the graph Laplacian of the
/// affinity `exp(−d²/σ²)`, with `σ` the median off-diagonal distance. The
/// sign is fixed so that the first specimen's coordinate is nonpositive;
/// ties in the coordinate go to the smaller index.
pub fn seriate(d: &DistanceMatrix) -> Vec<usize> {
    let n = d.len();
    if n < 3 {
        return (0..n).collect();
    }
    let mut off = d.upper_triangle();
    off.retain(|v| !v.is_nan());
    off.sort_by(f64::total_cmp);
    let sigma = match off.get(off.len() / 2) {
        Some(&m) if m > 0.0 => m,
        _ => 1.0,
    };
    let w = DMatrix::from_fn(n, n, |i, j| {
        let v = d.get(i, j);
        if i == j || v.is_nan() {
            0.0
        } else {
            (-(v / sigma).powi(2)).exp()
        }
    });
    let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| if i == j { degree[i] - w[(i, j)] } else { -w[(i, j)] });
    let eig = lap.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut v: Vec<f64> = eig.eigenvectors.column(idx[1]).iter().copied().collect();
    if v[0] > 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    order
}

fn colour(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
}

/// Writes a binary P6 pixmap, one pixel per cell in the given order: strict
/// upper triangle from `upper`, strict lower from `lower` (aligned by id),
/// diagonal deep blue. Each triangle maps 0 to deep blue and its own
/// maximum to saturated red.
pub fn heatmap_export(upper: &DistanceMatrix, lower: &DistanceMatrix, order: &[usize], mut out: impl Write) -> Result<()> {
    let lower = lower.aligned_to(upper.ids())?;
    let up = upper.permuted(order)?;
    let lo = lower.permuted(order)?;
    let n = up.len();
    let max_of = |m: &DistanceMatrix| m.upper_triangle().into_iter().filter(|v| !v.is_nan()).fold(0.0, f64::max);
    let (mu, ml) = (max_of(&up), max_of(&lo));
    let mut pixels = Vec::with_capacity(3 * n * n);
    for i in 0..n {
        for j in 0..n {
            let t = if i < j && mu > 0.0 {
                up.get(i, j) / mu
            } else if i > j && ml > 0.0 {
                lo.get(i, j) / ml
            } else {
                0.0
            };
            pixels.extend_from_slice(&colour(t));
        }
    }
    write!(out, "P6\n{n} {n}\n255\n")?;
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}

/// Reads back a pixmap written by [`heatmap_export`].
pub fn read_pixmap(bytes: &[u8]) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let bad = || Error::Parse("not a binary P6 pixmap".into());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos + 1..).ok_or_else(bad)?;
    if data.len() != 3 * w * h {
        return Err(bad());
    }
    Ok((w, h, data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DistanceMatrix {
        let n = xs.len();
        let raw = (0..n * n).map(|k| (xs[k / n] - xs[k % n]).abs()).collect();
        DistanceMatrix::from_raw((0..n).map(|i| format!("s{i}")).collect(), None, raw).unwrap()
    }

    #[test]
    fn small_inputs() {
        assert_eq!(seriate(&line(&[0.0, 1.0])), vec![0, 1]);
    }

    #[test]
    fn heatmap_endpoints_and_symmetry() {
        let d = line(&[0.0, 1.0, 3.0, 4.5]);
        let mut buf = Vec::new();
        heatmap_export(&d, &d, &[0, 1, 2, 3], &mut buf).unwrap();
        let (w, h, px) = read_pixmap(&buf).unwrap();
        assert_eq!((w, h), (4, 4));
        for i in 0..4 {
            assert_eq!(px[i * 4 + i], [0, 0, 255]);
            for j in 0..4 {
                assert_eq!(px[i * 4 + j], px[j * 4 + i]);
            }
        }
        assert_eq!(px[3], [255, 0, 0]);
        let zero = line(&[0.0, 0.0, 0.0]);
        let mut buf = Vec::new();
        heatmap_export(&zero, &zero, &[2, 0, 1], &mut buf).unwrap();
        assert!(read_pixmap(&buf).unwrap().2.iter().all(|p| *p == [0, 0, 255]));
    }

    #[test]
    fn heatmap_rejects_bad_order() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert!(heatmap_export(&d, &d, &[0, 0, 1], Vec::new()).is_err());
    }
}
