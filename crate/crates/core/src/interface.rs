//! Zero level sets and signed distance fields.
//!
//! Extraction is marching squares with linear interpolation along cell edges.
//! Nodal zeros count as positive and saddle cells are resolved by the sign of
//! the average of the four corners. Redistancing measures the exact Euclidean
//! distance from every node to the nearest segment of the extracted polyline.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, Point, ScalarField};
use crate::real::Real;

/// Zero level set as a segment soup over a deduplicated vertex cloud.
///
/// Each vertex lies on a grid edge; every segment joins two vertices of the same cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterfaceCurve<T> {
    vertices: Vec<Point<T>>,
    segments: Vec<[usize; 2]>,
}

impl<T: Real> InterfaceCurve<T> {
    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    /// Segments as pairs of indices into [`vertices`](Self::vertices).
    pub fn segment_indices(&self) -> &[[usize; 2]] {
        &self.segments
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        self.segments.iter().map(|&[a, b]| (self.vertices[a], self.vertices[b]))
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Total polyline length.
    pub fn length(&self) -> T {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    /// Writes the vertex cloud as `x,y` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for p in &self.vertices {
            writeln!(w, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

/// Which side of a closed interface carries positive distance.
///
/// "Inside" is the side that does not reach the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignConvention {
    pub positive_inside: bool,
}

impl SignConvention {
    pub const POSITIVE_INSIDE: Self = SignConvention { positive_inside: true };
    pub const POSITIVE_OUTSIDE: Self = SignConvention { positive_inside: false };

    /// Infers the convention a field follows from the majority sign of its
    /// boundary nodes (the outside). Ties resolve to positive outside.
    pub fn of_field<T: Real>(f: &ScalarField<T>) -> Self {
        let g = f.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let mut balance: i64 = 0;
        let mut tally = |v: T| balance += if v >= T::zero() { 1 } else { -1 };
        for i in 0..nx {
            tally(f.get(i, 0));
            tally(f.get(i, ny - 1));
        }
        for j in 1..ny - 1 {
            tally(f.get(0, j));
            tally(f.get(nx - 1, j));
        }
        SignConvention { positive_inside: balance < 0 }
    }
}

impl Default for SignConvention {
    fn default() -> Self {
        Self::POSITIVE_INSIDE
    }
}

#[inline]
fn positive<T: Real>(v: T) -> bool {
    v >= T::zero()
}

/// True iff both signs occur among the nodal values (zeros count as positive).
pub fn has_interface<T: Real>(f: &ScalarField<T>) -> bool {
    let v = f.values();
    let first = positive(v[0]);
    v.iter().any(|&x| positive(x) != first)
}

// Crossing on the edge between nodes `a` and `b`, interpolated from the
// negative end towards the positive end.
#[inline]
fn crossing<T: Real>(pa: Point<T>, va: T, pb: Point<T>, vb: T) -> Point<T> {
    let (pn, vn, pp, vp) = if positive(va) { (pb, vb, pa, va) } else { (pa, va, pb, vb) };
    let t = vn / (vn - vp);
    Point::new(pn.x + t * (pp.x - pn.x), pn.y + t * (pp.y - pn.y))
}

/// Marching squares over every cell of `f`.
pub fn extract_zero_set<T: Real>(f: &ScalarField<T>) -> InterfaceCurve<T> {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    const NONE: usize = usize::MAX;

    let mut vertices = Vec::new();
    // Horizontal edge (i, j)-(i+1, j) at j * (nx - 1) + i.
    let mut hedge = vec![NONE; (nx - 1) * ny];
    // Vertical edge (i, j)-(i, j+1) at j * nx + i.
    let mut vedge = vec![NONE; nx * (ny - 1)];
    for j in 0..ny {
        for i in 0..nx {
            let v = f.get(i, j);
            if i + 1 < nx {
                let w = f.get(i + 1, j);
                if positive(v) != positive(w) {
                    hedge[j * (nx - 1) + i] = vertices.len();
                    vertices.push(crossing(g.node(i, j), v, g.node(i + 1, j), w));
                }
            }
            if j + 1 < ny {
                let w = f.get(i, j + 1);
                if positive(v) != positive(w) {
                    vedge[j * nx + i] = vertices.len();
                    vertices.push(crossing(g.node(i, j), v, g.node(i, j + 1), w));
                }
            }
        }
    }

    let mut segments = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [f.get(i, j), f.get(i + 1, j), f.get(i + 1, j + 1), f.get(i, j + 1)];
            let s = c.map(positive);
            // Edges: bottom, right, top, left.
            let e = [
                hedge[j * (nx - 1) + i],
                vedge[j * nx + i + 1],
                hedge[(j + 1) * (nx - 1) + i],
                vedge[j * nx + i],
            ];
            let crossed: Vec<usize> = (0..4).filter(|&k| e[k] != NONE).collect();
            match crossed.len() {
                0 => {}
                2 => segments.push([e[crossed[0]], e[crossed[1]]]),
                4 => {
                    // Saddle: cut off the corners whose sign differs from the centre.
                    let centre = positive((c[0] + c[1] + c[2] + c[3]) / T::lit(4.0));
                    // Corner k touches edges k and (k + 3) % 4.
                    for k in 0..4 {
                        if s[k] != centre {
                            segments.push([e[(k + 3) % 4], e[k]]);
                        }
                    }
                }
                _ => unreachable!("a cell boundary crosses zero an even number of times"),
            }
        }
    }
    InterfaceCurve { vertices, segments }
}

#[inline]
fn segment_foot<T: Real>(p: Point<T>, a: Point<T>, b: Point<T>) -> (T, Point<T>) {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > T::zero() {
        (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let q = Point::new(a.x + t * ex, a.y + t * ey);
    let (dx, dy) = (p.x - q.x, p.y - q.y);
    (dx * dx + dy * dy, q)
}

/// Uniform bucket grid over the bounding box of a curve.
struct SegmentIndex<T> {
    segs: Vec<(Point<T>, Point<T>)>,
    // Bucket boxes (xmin, ymin, xmax, ymax) and their segment lists, non-empty only.
    boxes: Vec<[T; 4]>,
    members: Vec<Vec<u32>>,
}

impl<T: Real> SegmentIndex<T> {
    fn new(curve: &InterfaceCurve<T>, cell_floor: T) -> Self {
        let segs: Vec<_> = curve.segments().collect();
        let (mut x0, mut y0) = (T::infinity(), T::infinity());
        let (mut x1, mut y1) = (T::neg_infinity(), T::neg_infinity());
        for p in curve.vertices() {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let extent = (x1 - x0).max(y1 - y0);
        let per_axis = T::from_count(segs.len()).sqrt().ceil().max(T::one());
        let h = (extent / per_axis).max(cell_floor);
        let cx = ((x1 - x0) / h).floor().to_usize().unwrap_or(0) + 1;
        let cy = ((y1 - y0) / h).floor().to_usize().unwrap_or(0) + 1;
        let cell = |v: T, lo: T, n: usize| ((v - lo) / h).floor().to_usize().unwrap_or(0).min(n - 1);

        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); cx * cy];
        for (k, (a, b)) in segs.iter().enumerate() {
            let (i0, i1) = (cell(a.x.min(b.x), x0, cx), cell(a.x.max(b.x), x0, cx));
            let (j0, j1) = (cell(a.y.min(b.y), y0, cy), cell(a.y.max(b.y), y0, cy));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * cx + i].push(k as u32);
                }
            }
        }
        let mut boxes = Vec::new();
        let mut members = Vec::new();
        for (idx, list) in buckets.into_iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let (i, j) = (idx % cx, idx / cx);
            let bx = x0 + T::from_count(i) * h;
            let by = y0 + T::from_count(j) * h;
            boxes.push([bx, by, bx + h, by + h]);
            members.push(list);
        }
        SegmentIndex { segs, boxes, members }
    }

    #[inline]
    fn box_dist2(p: Point<T>, b: &[T; 4]) -> T {
        let dx = (b[0] - p.x).max(T::zero()).max(p.x - b[2]);
        let dy = (b[1] - p.y).max(T::zero()).max(p.y - b[3]);
        dx * dx + dy * dy
    }

    /// Squared distance to, and location of, the nearest point on the curve.
    fn nearest(&self, p: Point<T>, lower: &mut Vec<T>) -> (T, Point<T>) {
        lower.clear();
        lower.extend(self.boxes.iter().map(|b| Self::box_dist2(p, b)));
        let mut best = (T::infinity(), p);
        let scan = |bucket: usize, best: &mut (T, Point<T>)| {
            for &s in &self.members[bucket] {
                let (a, b) = self.segs[s as usize];
                let cand = segment_foot(p, a, b);
                if cand.0 < best.0 {
                    *best = cand;
                }
            }
        };
        let seed = lower
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |acc, (k, &d)| if d < acc.1 { (k, d) } else { acc })
            .0;
        scan(seed, &mut best);
        for k in 0..lower.len() {
            if k != seed && lower[k] < best.0 {
                scan(k, &mut best);
            }
        }
        best
    }
}

fn orientation_factor<T: Real>(f: &ScalarField<T>, conv: SignConvention) -> T {
    if SignConvention::of_field(f) == conv {
        T::one()
    } else {
        -T::one()
    }
}

/// Rebuilds a signed distance field from the zero set `curve` of `f`.
///
/// Magnitudes are exact distances to the nearest segment; signs follow `f`
/// (zeros positive), globally flipped if needed so the result honours `conv`.
pub fn signed_distance<T: Real>(
    f: &ScalarField<T>,
    curve: &InterfaceCurve<T>,
    conv: SignConvention,
) -> Result<ScalarField<T>> {
    if curve.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let g = f.grid();
    let index = SegmentIndex::new(curve, g.min_spacing());
    let flip = orientation_factor(f, conv);
    let nx = g.nx();
    let mut values = vec![T::zero(); g.len()];
    values.par_chunks_mut(nx).enumerate().for_each_init(Vec::new, |lower, (j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let (d2, _) = index.nearest(g.node(i, j), lower);
            let s = if positive(f.get(i, j)) { flip } else { -flip };
            *out = s * d2.sqrt();
        }
    });
    Ok(ScalarField::from_values_unchecked(g.clone(), values))
}

/// How a propagated field is turned back into a distance function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reinit {
    /// Exact distance to the extracted polygon at every node.
    #[default]
    Exact,
    /// Exact distance away from the curve; the two nodes of every cut edge
    /// instead get their distance to the tangent line through the crossing, so
    /// re-extracting the result reproduces the crossings of `f`.
    Constrained,
}

// One-sided at the ends, central inside.
fn diff_along<T: Real>(i: usize, n: usize, h: T, at: impl Fn(usize) -> T) -> T {
    if i == 0 {
        (at(1) - at(0)) / h
    } else if i == n - 1 {
        (at(n - 1) - at(n - 2)) / h
    } else {
        (at(i + 1) - at(i - 1)) / (T::two() * h)
    }
}

fn nodal_gradient<T: Real>(f: &ScalarField<T>, i: usize, j: usize) -> (T, T) {
    let g = f.grid();
    (
        diff_along(i, g.nx(), g.dx(), |k| f.get(k, j)),
        diff_along(j, g.ny(), g.dy(), |k| f.get(i, k)),
    )
}

/// Overwrites the magnitude of `d` at every node of a cut edge of `f`.
///
/// Along a cut edge with crossing fraction `s` and unit normal `n` (the
/// gradient of `f` interpolated to the crossing), the nodes get `s h |n.e|`
/// and `(1 - s) h |n.e|`. A node on several cut edges takes the value from the
/// edge best aligned with the normal. Signs of `d` are kept.
pub fn constrain_cut_nodes<T: Real>(f: &ScalarField<T>, d: &mut ScalarField<T>) -> Result<()> {
    if !f.same_grid(d) {
        return Err(Error::GridMismatch);
    }
    let g = f.grid().clone();
    let (nx, ny) = (g.nx(), g.ny());
    let pos = |i: usize, j: usize| f.get(i, j) >= T::zero();
    // (distance, alignment) of the best edge seen so far.
    let mut best: Vec<Option<(T, T)>> = vec![None; g.len()];
    let mut offer = |k: usize, dist: T, align: T| match best[k] {
        Some((_, a)) if a >= align => {}
        _ => best[k] = Some((dist, align)),
    };
    for j in 0..ny {
        for i in 0..nx {
            for (di, dj, h) in [(1, 0, g.dx()), (0, 1, g.dy())] {
                let (i2, j2) = (i + di, j + dj);
                if i2 >= nx || j2 >= ny || pos(i, j) == pos(i2, j2) {
                    continue;
                }
                let (fa, fb) = (f.get(i, j), f.get(i2, j2));
                let s = fa / (fa - fb);
                let (ga, gb) = (nodal_gradient(f, i, j), nodal_gradient(f, i2, j2));
                let gx = ga.0 + s * (gb.0 - ga.0);
                let gy = ga.1 + s * (gb.1 - ga.1);
                let norm = gx.hypot(gy);
                if !(norm > T::zero()) {
                    continue;
                }
                let align = (if di == 1 { gx } else { gy } / norm).abs();
                offer(g.index(i, j), s * h * align, align);
                offer(g.index(i2, j2), (T::one() - s) * h * align, align);
            }
        }
    }
    let mut values = d.values().to_vec();
    for (v, b) in values.iter_mut().zip(&best) {
        if let Some((dist, _)) = *b {
            *v = v.signum() * dist;
        }
    }
    *d = ScalarField::from_values_unchecked(g, values);
    Ok(())
}

/// [`signed_distance`], followed by [`constrain_cut_nodes`] for
/// [`Reinit::Constrained`].
pub fn reinitialize<T: Real>(
    f: &ScalarField<T>,
    curve: &InterfaceCurve<T>,
    conv: SignConvention,
    mode: Reinit,
) -> Result<ScalarField<T>> {
    let mut d = signed_distance(f, curve, conv)?;
    if mode == Reinit::Constrained {
        constrain_cut_nodes(f, &mut d)?;
    }
    Ok(d)
}

/// Extracts the zero set of `f` and redistances it in one go.
pub fn redistance<T: Real>(f: &ScalarField<T>, conv: SignConvention) -> Result<(ScalarField<T>, InterfaceCurve<T>)> {
    let curve = extract_zero_set(f);
    let d = signed_distance(f, &curve, conv)?;
    Ok((d, curve))
}

/// Closest point on `curve` for every node of `grid`, in storage order.
pub fn closest_points<T: Real>(grid: &Grid2D<T>, curve: &InterfaceCurve<T>) -> Result<Vec<Point<T>>> {
    if curve.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let index = SegmentIndex::new(curve, grid.min_spacing());
    let nx = grid.nx();
    let mut feet = vec![Point::origin(); grid.len()];
    feet.par_chunks_mut(nx).enumerate().for_each_init(Vec::new, |lower, (j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            *out = index.nearest(grid.node(i, j), lower).1;
        }
    });
    Ok(feet)
}

/// Mean distance from the vertex cloud to `center`.
pub fn average_radius<T: Real>(curve: &InterfaceCurve<T>, center: Point<T>) -> Result<T> {
    average_distance(curve.vertices(), center)
}

/// Mean distance from `points` to `center`.
pub fn average_distance<T: Real>(points: &[Point<T>], center: Point<T>) -> Result<T> {
    if points.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let total: T = points.iter().map(|p| p.distance(center)).sum();
    Ok(total / T::from_count(points.len()))
}

/// Outcome of an eikonal residual scan over a redistanced field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EikonalReport<T> {
    /// Largest `| |grad d| - 1 |` among checked nodes.
    pub max_residual: T,
    pub checked: usize,
    /// Nodes skipped because their stencil straddles a ridge of the distance field.
    pub ridge_nodes: usize,
    /// Node `(i, j)` where the largest residual occurs.
    pub worst: Option<(usize, usize)>,
}

/// Central-difference `| |grad d| - 1 |` at nodes at least `interface_margin`
/// from the curve and `boundary_margin` from the domain edge.
///
/// The distance function is not differentiable on its ridge (medial axis), so
/// nodes whose 5-point stencil sees closest-point directions more than 25
/// degrees apart are skipped and counted separately.
pub fn eikonal_check<T: Real>(
    d: &ScalarField<T>,
    curve: &InterfaceCurve<T>,
    interface_margin: T,
    boundary_margin: T,
) -> Result<EikonalReport<T>> {
    let g = d.grid();
    let feet = closest_points(g, curve)?;
    let (nx, ny) = (g.nx(), g.ny());
    let (two_dx, two_dy) = (T::two() * g.dx(), T::two() * g.dy());
    let direction = |i: usize, j: usize| {
        let p = g.node(i, j);
        let q = feet[g.index(i, j)];
        let n = p.distance(q);
        if n > T::zero() {
            Some(((p.x - q.x) / n, (p.y - q.y) / n))
        } else {
            None
        }
    };
    let mut report = EikonalReport { max_residual: T::zero(), checked: 0, ridge_nodes: 0, worst: None };
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            if d.get(i, j).abs() < interface_margin || g.boundary_distance(i, j) < boundary_margin {
                continue;
            }
            let stencil = [(i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)];
            let dirs: Vec<_> = stencil.iter().filter_map(|&(a, b)| direction(a, b)).collect();
            let ridge = dirs.iter().enumerate().any(|(k, u)| {
                dirs[k + 1..].iter().any(|v| u.0 * v.0 + u.1 * v.1 < T::lit(0.9))
            });
            if ridge {
                report.ridge_nodes += 1;
                continue;
            }
            let gx = (d.get(i + 1, j) - d.get(i - 1, j)) / two_dx;
            let gy = (d.get(i, j + 1) - d.get(i, j - 1)) / two_dy;
            let r = (gx.hypot(gy) - T::one()).abs();
            if r > report.max_residual {
                report.max_residual = r;
                report.worst = Some((i, j));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid2D<f64> {
        Grid2D::square(n, -2.0, 2.0).unwrap()
    }

    fn circle(g: &Grid2D<f64>, r: f64) -> ScalarField<f64> {
        ScalarField::from_fn(g, |p| p.norm() - r)
    }

    #[test]
    fn circle_vertices_on_circle() {
        let g = grid(256);
        let curve = extract_zero_set(&circle(&g, 1.0));
        assert!(!curve.is_empty());
        for p in curve.vertices() {
            assert!((p.norm() - 1.0).abs() < 1.5 * g.dx());
        }
        assert!((curve.length() - 2.0 * PI).abs() < 0.01);
    }

    #[test]
    fn uniform_sign_gives_empty_curve() {
        let g = grid(16);
        assert!(extract_zero_set(&ScalarField::constant(&g, 1.0)).is_empty());
        assert!(extract_zero_set(&ScalarField::constant(&g, 0.0)).is_empty());
        let f = ScalarField::constant(&g, 1.0);
        assert!(matches!(
            signed_distance(&f, &extract_zero_set(&f), SignConvention::default()),
            Err(Error::EmptyInterface)
        ));
    }

    #[test]
    fn linear_field_extracts_a_vertical_line() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |p| p.x);
        let curve = extract_zero_set(&f);
        assert_eq!(curve.len(), 15);
        for p in curve.vertices() {
            assert!(p.x.abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_zeros_count_as_positive() {
        // n = 17 puts a node column exactly on x = 0.
        let g = grid(17);
        let f = ScalarField::from_fn(&g, |p| p.x);
        assert_eq!(f.get(8, 3), 0.0);
        let curve = extract_zero_set(&f);
        for p in curve.vertices() {
            assert_eq!(p.x, 0.0);
        }
        let d = signed_distance(&f, &curve, SignConvention::of_field(&f)).unwrap();
        assert_eq!(d.get(8, 3), 0.0);
        assert!(d.get(7, 3) < 0.0 && d.get(9, 3) > 0.0);
    }

    #[test]
    fn saddle_resolved_by_centre_average() {
        let g = Grid2D::square(3, 0.0, 2.0).unwrap();
        // Corners of the lower-left cell alternate in sign.
        let mut v = vec![1.0; 9];
        v[0] = 1.0; // (0,0) +
        v[1] = -1.0; // (1,0) -
        v[4] = 2.0; // (1,1) +
        v[3] = -1.0; // (0,1) -
        let f = ScalarField::from_values(g.clone(), v.clone()).unwrap();
        let curve = extract_zero_set(&f);
        // Centre average positive: the two negative corners are isolated.
        let seg_count_cell = curve
            .segments()
            .filter(|(a, b)| a.x <= 1.0 && a.y <= 1.0 && b.x <= 1.0 && b.y <= 1.0)
            .count();
        assert_eq!(seg_count_cell, 2);
        let mut w = v;
        w[4] = 1.0;
        w[0] = 0.5;
        w[1] = -2.0;
        let f2 = ScalarField::from_values(g, w).unwrap();
        let c2 = extract_zero_set(&f2);
        let cells: Vec<_> = c2
            .segments()
            .filter(|(a, b)| a.x <= 1.0 && a.y <= 1.0 && b.x <= 1.0 && b.y <= 1.0)
            .collect();
        assert_eq!(cells.len(), 2);
        // Negative centre: segments cut off the positive corners (0,0) and (1,1).
        let touches = |(a, b): &(Point<f64>, Point<f64>), c: Point<f64>| {
            (a.distance(c) < 1.0) && (b.distance(c) < 1.0)
        };
        assert!(cells.iter().any(|s| touches(s, Point::new(0.0, 0.0))));
        assert!(cells.iter().any(|s| touches(s, Point::new(1.0, 1.0))));
    }

    #[test]
    fn has_interface_examples() {
        let g = grid(16);
        assert!(has_interface(&circle(&g, 1.0)));
        assert!(!has_interface(&ScalarField::constant(&g, 1.0)));
        assert!(!has_interface(&ScalarField::constant(&g, -3.0)));
        assert!(!has_interface(&ScalarField::constant(&g, 0.0)));
    }

    #[test]
    fn sdf_is_reproduced() {
        let g = grid(128);
        let f = circle(&g, 1.0);
        let (d, _) = redistance(&f, SignConvention::POSITIVE_OUTSIDE).unwrap();
        assert!(d.max_abs_diff(&f).unwrap() < 1.5 * g.dx());
    }

    #[test]
    fn scaling_is_removed() {
        let g = grid(128);
        let f = ScalarField::from_fn(&g, |p| 2.0 * (p.norm() - 1.0));
        let (d, _) = redistance(&f, SignConvention::POSITIVE_OUTSIDE).unwrap();
        assert!(d.max_abs_diff(&circle(&g, 1.0)).unwrap() < 1.5 * g.dx());
    }

    #[test]
    fn line_distance() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |p| 3.0 * p.x);
        let (d, _) = redistance(&f, SignConvention::of_field(&f)).unwrap();
        let x = ScalarField::from_fn(&g, |p| p.x);
        assert!(d.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn convention_flag_flips_sign() {
        let g = grid(64);
        let f = circle(&g, 1.0);
        assert_eq!(SignConvention::of_field(&f), SignConvention::POSITIVE_OUTSIDE);
        let (d, _) = redistance(&f, SignConvention::POSITIVE_INSIDE).unwrap();
        let inside = ScalarField::from_fn(&g, |p| 1.0 - p.norm());
        assert!(d.max_abs_diff(&inside).unwrap() < 1.5 * g.dx());
        assert_eq!(SignConvention::of_field(&d), SignConvention::POSITIVE_INSIDE);
    }

    #[test]
    fn exact_distance_against_brute_force() {
        let g = grid(40);
        let f = ScalarField::from_fn(&g, |p| {
            ((p.x - 0.3) / 1.2).powi(2) + (p.y / 0.7).powi(2) - 1.0 + 0.1 * (3.0 * p.x).sin()
        });
        let curve = extract_zero_set(&f);
        let d = signed_distance(&f, &curve, SignConvention::of_field(&f)).unwrap();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let p = g.node(i, j);
                let brute = curve
                    .segments()
                    .map(|(a, b)| segment_foot(p, a, b).0)
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                assert!((d.get(i, j).abs() - brute).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reflection_symmetry() {
        let g = grid(50);
        let f = ScalarField::from_fn(&g, |p| (p.x * p.x / 1.3 + p.y * p.y).sqrt() - 1.0 + 0.2 * p.y);
        let (d, curve) = redistance(&f, SignConvention::POSITIVE_INSIDE).unwrap();
        let n = g.nx();
        for j in 0..g.ny() {
            for i in 0..n {
                assert!((d.get(i, j) - d.get(n - 1 - i, j)).abs() < 1e-12);
            }
        }
        let mut xs: Vec<_> = curve.vertices().iter().map(|p| (p.y, p.x.abs())).collect();
        assert_eq!(xs.len() % 2, 0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks(2) {
            assert!((pair[0].0 - pair[1].0).abs() < 1e-12);
            assert!((pair[0].1 - pair[1].1).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_and_idempotence() {
        let g = grid(96);
        let f = ScalarField::from_fn(&g, |p| (p.x - 0.2).powi(2) * 0.8 + p.y.powi(2) * 1.5 - 0.9);
        let (d1, c1) = redistance(&f, SignConvention::POSITIVE_INSIDE).unwrap();
        let (d2, _) = redistance(&d1, SignConvention::POSITIVE_INSIDE).unwrap();
        assert!(d1.max_abs_diff(&d2).unwrap() < 1.5 * g.dx());
        let flip = -1.0;
        for (k, (&a, &b)) in d1.values().iter().zip(f.values()).enumerate() {
            if a.abs() > g.dx() {
                assert_eq!(a > 0.0, flip * b > 0.0, "node {k}");
            }
        }
        let report = eikonal_check(&d1, &c1, 3.0 * g.dx(), 2.0 * g.dx()).unwrap();
        assert!(report.checked > 1000);
        assert!(report.max_residual < 0.05, "{report:?}");
    }

    #[test]
    fn eikonal_skips_only_the_ridge() {
        let g = grid(128);
        let (d, c) = redistance(&circle(&g, 1.0), SignConvention::POSITIVE_OUTSIDE).unwrap();
        let report = eikonal_check(&d, &c, 3.0 * g.dx(), 2.0 * g.dx()).unwrap();
        assert!(report.max_residual < 0.05, "{report:?}");
        assert!(report.ridge_nodes > 0 && report.ridge_nodes < 60, "{report:?}");
    }

    #[test]
    fn constrained_reinit_does_not_drift() {
        let g = grid(128);
        let mut exact = circle(&g, 1.0);
        let mut cons = exact.clone();
        let radius = |f: &ScalarField<f64>| average_radius(&extract_zero_set(f), Point::origin()).unwrap();
        let r0 = radius(&exact);
        for _ in 0..6 {
            let c = extract_zero_set(&exact);
            exact = reinitialize(&exact, &c, SignConvention::POSITIVE_OUTSIDE, Reinit::Exact).unwrap();
            let c = extract_zero_set(&cons);
            cons = reinitialize(&cons, &c, SignConvention::POSITIVE_OUTSIDE, Reinit::Constrained).unwrap();
        }
        // Exact reinitialization shrinks the circle by ~0.05 dx^2 per pass.
        assert!(r0 - radius(&exact) > 6.0 * 0.03 * g.dx() * g.dx());
        assert!((radius(&cons) - r0).abs() < 1e-5);
        let c = extract_zero_set(&cons);
        let report = eikonal_check(&cons, &c, 3.0 * g.dx(), 2.0 * g.dx()).unwrap();
        assert!(report.max_residual < 0.05, "{report:?}");
        for (&a, &b) in cons.values().iter().zip(circle(&g, 1.0).values()) {
            assert!((a - b).abs() < g.dx());
            if b.abs() > g.dx() {
                assert_eq!(a > 0.0, b > 0.0);
            }
        }
    }

    #[test]
    fn constrained_reinit_keeps_line_crossings() {
        let g = grid(64);
        let (a, b) = (0.3f64.cos(), 0.3f64.sin());
        let f = ScalarField::from_fn(&g, |p| 2.0 * (a * p.x + b * p.y - 0.1234));
        let c = extract_zero_set(&f);
        let d = reinitialize(&f, &c, SignConvention::of_field(&f), Reinit::Constrained).unwrap();
        let c2 = extract_zero_set(&d);
        assert_eq!(c.len(), c2.len());
        for (p, q) in c.vertices().iter().zip(c2.vertices()) {
            assert!(p.distance(*q) < 1e-12);
        }
    }

    #[test]
    fn average_radius_examples() {
        let pts: Vec<_> = (0..100)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 100.0;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        assert!((average_distance(&pts, Point::origin()).unwrap() - 1.0).abs() < 1e-12);
        let corners = [
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
        ];
        assert!((average_distance(&corners, Point::origin()).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(average_distance::<f64>(&[], Point::origin()).is_err());

        let g = grid(128);
        let curve = extract_zero_set(&circle(&g, 1.0));
        assert!((average_radius(&curve, Point::origin()).unwrap() - 1.0).abs() < g.dx());
    }

    #[test]
    fn ellipse_mean_radius_matches_quadrature() {
        // Independent oracle: midpoint rule with 10^6 points.
        let m = 1_000_000;
        let oracle: f64 = (0..m)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                (t.cos().powi(2) + 0.25 * t.sin().powi(2)).sqrt()
            })
            .sum::<f64>()
            / m as f64;
        let n = 4096;
        let pts: Vec<_> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                Point::new(t.cos(), 0.5 * t.sin())
            })
            .collect();
        let r = average_distance(&pts, Point::origin()).unwrap();
        assert!((r - oracle).abs() < 1e-10, "{r} {oracle}");
    }

    #[test]
    fn snapshot_csv() {
        let g = grid(8);
        let curve = extract_zero_set(&circle(&g, 1.0));
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y\n"));
        assert_eq!(text.lines().count(), curve.vertices().len() + 1);
    }
}
