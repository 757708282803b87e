//! Point location in planar triangulations via a uniform bucket grid.

use num_complex::Complex64 as Complex;

/// A triangulation in the plane with a bucket grid for point queries.
#[derive(Debug, Clone)]
pub struct PlanarTriangulation {
    coords: Vec<Complex>,
    faces: Vec<[usize; 3]>,
    lo: Complex,
    cell: f64,
    res: usize,
    buckets: Vec<Vec<u32>>,
    /// `(a, b, face)` for every boundary edge.
    boundary_edges: Vec<(usize, usize, usize)>,
}

/// Result of a clamped point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub face: usize,
    pub bary: [f64; 3],
    /// False when the query fell outside and was clamped onto the boundary.
    pub inside: bool,
}

const INSIDE_TOL: f64 = 1e-12;

impl PlanarTriangulation {
    /// `boundary_loop` lists boundary vertices in order; consecutive pairs
    /// (cyclically) are the boundary edges.
    pub fn new(coords: Vec<Complex>, faces: Vec<[usize; 3]>, boundary_loop: &[usize]) -> Self {
        let mut lo = Complex::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for z in &coords {
            lo.re = lo.re.min(z.re);
            lo.im = lo.im.min(z.im);
            hi.re = hi.re.max(z.re);
            hi.im = hi.im.max(z.im);
        }
        let res = ((faces.len() as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-300);
        let cell = span / res as f64 * (1.0 + 1e-9);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); res * res];
        for (fi, f) in faces.iter().enumerate() {
            let (mut flo, mut fhi) = (coords[f[0]], coords[f[0]]);
            for &v in &f[1..] {
                flo.re = flo.re.min(coords[v].re);
                flo.im = flo.im.min(coords[v].im);
                fhi.re = fhi.re.max(coords[v].re);
                fhi.im = fhi.im.max(coords[v].im);
            }
            let (i0, j0) = cell_of(lo, cell, res, flo);
            let (i1, j1) = cell_of(lo, cell, res, fhi);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[j * res + i].push(fi as u32);
                }
            }
        }
        let mut edge_face = std::collections::HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                edge_face.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        let n = boundary_loop.len();
        let boundary_edges = (0..n)
            .filter_map(|k| {
                let (a, b) = (boundary_loop[k], boundary_loop[(k + 1) % n]);
                edge_face.get(&(a, b)).map(|&f| (a, b, f))
            })
            .collect();
        Self { coords, faces, lo, cell, res, buckets, boundary_edges }
    }

    pub fn coords(&self) -> &[Complex] {
        &self.coords
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Barycentric coordinates of `w` in face `fi` (may be negative).
    pub fn barycentric(&self, fi: usize, w: Complex) -> [f64; 3] {
        let f = self.faces[fi];
        barycentric(self.coords[f[0]], self.coords[f[1]], self.coords[f[2]], w)
    }

    /// The face containing `w`, preferring the face where `w` is deepest
    /// inside (ties to the smallest face index).
    pub fn locate(&self, w: Complex) -> Option<(usize, [f64; 3])> {
        if !(w.re.is_finite() && w.im.is_finite()) {
            return None;
        }
        let (i, j) = cell_of(self.lo, self.cell, self.res, w);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &fi in &self.buckets[j * self.res + i] {
            let fi = fi as usize;
            let b = self.barycentric(fi, w);
            let m = b[0].min(b[1]).min(b[2]);
            if m >= -INSIDE_TOL && best.map_or(true, |(_, _, bm)| m > bm) {
                best = Some((fi, b, m));
            }
        }
        best.map(|(fi, b, _)| (fi, clean_bary(b)))
    }

    /// Like [`locate`](Self::locate), but points outside the triangulation
    /// are projected onto the nearest boundary edge.
    pub fn locate_clamped(&self, w: Complex) -> Location {
        if let Some((face, bary)) = self.locate(w) {
            return Location { face, bary, inside: true };
        }
        let mut best = (f64::INFINITY, 0usize, 0.0f64, 0usize, 0usize);
        for &(a, b, f) in &self.boundary_edges {
            let (pa, pb) = (self.coords[a], self.coords[b]);
            let d = pb - pa;
            let t = (((w - pa).re * d.re + (w - pa).im * d.im) / d.norm_sqr()).clamp(0.0, 1.0);
            let dist = (pa + d * t - w).norm_sqr();
            if dist < best.0 {
                best = (dist, f, t, a, b);
            }
        }
        let (_, face, t, a, b) = best;
        let f = self.faces[face];
        let mut bary = [0.0; 3];
        for k in 0..3 {
            if f[k] == a {
                bary[k] = 1.0 - t;
            } else if f[k] == b {
                bary[k] = t;
            }
        }
        Location { face, bary, inside: false }
    }

    /// Calls `visit(face, area)` for every face overlapping the
    /// counter-clockwise triangle `tri` with positive intersection area.
    pub fn overlaps(&self, tri: [Complex; 3], mut visit: impl FnMut(usize, f64)) {
        let (mut lo, mut hi) = (tri[0], tri[0]);
        for w in &tri[1..] {
            lo.re = lo.re.min(w.re);
            lo.im = lo.im.min(w.im);
            hi.re = hi.re.max(w.re);
            hi.im = hi.im.max(w.im);
        }
        let (i0, j0) = cell_of(self.lo, self.cell, self.res, lo);
        let (i1, j1) = cell_of(self.lo, self.cell, self.res, hi);
        let mut seen: Vec<u32> = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                seen.extend_from_slice(&self.buckets[j * self.res + i]);
            }
        }
        seen.sort_unstable();
        seen.dedup();
        for fi in seen {
            let f = self.faces[fi as usize];
            let area = clipped_area(&tri, [self.coords[f[0]], self.coords[f[1]], self.coords[f[2]]]);
            if area > 0.0 {
                visit(fi as usize, area);
            }
        }
    }

    /// Piecewise-linear interpolation of per-vertex `values` at `w`; `None`
    /// outside the triangulation.
    pub fn interpolate(&self, values: &[f64], w: Complex) -> Option<f64> {
        self.locate(w).map(|(fi, b)| {
            let f = self.faces[fi];
            b[0] * values[f[0]] + b[1] * values[f[1]] + b[2] * values[f[2]]
        })
    }
}

fn cell_of(lo: Complex, cell: f64, res: usize, w: Complex) -> (usize, usize) {
    let fx = ((w.re - lo.re) / cell).floor();
    let fy = ((w.im - lo.im) / cell).floor();
    let clamp = |v: f64| -> usize {
        if v.is_nan() || v < 0.0 {
            0
        } else {
            (v as usize).min(res - 1)
        }
    };
    (clamp(fx), clamp(fy))
}

pub(crate) fn barycentric(a: Complex, b: Complex, c: Complex, w: Complex) -> [f64; 3] {
    let cross = |u: Complex, v: Complex| u.re * v.im - u.im * v.re;
    let area = cross(b - a, c - a);
    let l1 = cross(c - b, w - b) / area;
    let l2 = cross(a - c, w - c) / area;
    [l1, l2, 1.0 - l1 - l2]
}

fn clean_bary(b: [f64; 3]) -> [f64; 3] {
    let c = [b[0].max(0.0), b[1].max(0.0), b[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

/// Area of the intersection of a convex polygon with a counter-clockwise
/// triangle (Sutherland–Hodgman clipping).
fn clipped_area(poly: &[Complex], tri: [Complex; 3]) -> f64 {
    let cross = |u: Complex, v: Complex| u.re * v.im - u.im * v.re;
    let mut cur: Vec<Complex> = poly.to_vec();
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let side = |p: Complex| cross(b - a, p - a);
        let mut next = Vec::with_capacity(cur.len() + 3);
        for m in 0..cur.len() {
            let (p, q) = (cur[m], cur[(m + 1) % cur.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                next.push(p + (q - p) * (sp / (sp - sq)));
            }
        }
        if next.len() < 3 {
            return 0.0;
        }
        cur = next;
    }
    let n = cur.len();
    0.5 * (0..n).map(|m| cross(cur[m], cur[(m + 1) % n])).sum::<f64>()
}

/// Signed area of the planar triangle `abc`.
pub fn signed_area(a: Complex, b: Complex, c: Complex) -> f64 {
    0.5 * ((b - a).re * (c - a).im - (b - a).im * (c - a).re)
}
