//! Small helpers for points in R^3.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[inline]
pub fn add_scaled(a: &Point, s: f64, d: &Point) -> Point {
    [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]]
}

pub fn is_finite(p: &Point) -> bool {
    p.iter().all(|v| v.is_finite())
}

/// Near-uniform points on the unit sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Largest distance between any two points (exact, O(n^2)).
pub fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max(dist(&points[i], &points[j]));
        }
    }
    d
}

/// For every point, the distance to its nearest other point. Uses a uniform cell grid.
pub fn nearest_neighbor_distances(points: &[Point]) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return vec![f64::INFINITY; n];
    }
    let grid = CellGrid::new(points, (n as f64).cbrt().max(1.0));
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut reach = grid.cell;
            loop {
                let mut best = f64::INFINITY;
                grid.for_each_within(p, reach, |j| {
                    if j != i {
                        best = best.min(dist(p, &points[j]));
                    }
                });
                if best <= reach || reach > grid.extent {
                    return best;
                }
                reach *= 2.0;
            }
        })
        .collect()
}

/// Compass search maximizing `f` from `start` with initial step `step`.
pub fn pattern_max(f: &impl Fn(&Point) -> f64, start: Point, step: f64) -> (Point, f64) {
    let dirs: [Point; 6] = [[1., 0., 0.], [-1., 0., 0.], [0., 1., 0.], [0., -1., 0.], [0., 0., 1.], [0., 0., -1.]];
    let mut best = start;
    let mut fbest = f(&start);
    let mut h = step;
    let mut evals = 0;
    while h > step * 1e-3 && evals < 600 {
        let mut improved = false;
        for d in &dirs {
            let p = add_scaled(&best, h, d);
            let v = f(&p);
            evals += 1;
            if v > fbest {
                fbest = v;
                best = p;
                improved = true;
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, fbest)
}

/// Uniform bucket grid for radius queries.
pub struct CellGrid<'a> {
    points: &'a [Point],
    lo: Point,
    pub cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
    pub extent: f64,
}

impl<'a> CellGrid<'a> {
    /// `per_axis` is the target number of cells along the longest axis.
    pub fn new(points: &'a [Point], per_axis: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(1e-12);
        let cell = extent / per_axis.max(1.0);
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; ncell + 1];
        let idx: Vec<usize> = points.iter().map(|p| Self::index_of(&lo, cell, &dims, p)).collect();
        for &c in &idx {
            counts[c + 1] += 1;
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, &c) in idx.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        CellGrid { points, lo, cell, dims, starts: counts, order, extent }
    }

    fn coord(lo: f64, cell: f64, dim: usize, v: f64) -> usize {
        (((v - lo) / cell).floor().max(0.0) as usize).min(dim - 1)
    }

    fn index_of(lo: &Point, cell: f64, dims: &[usize; 3], p: &Point) -> usize {
        let c = [0, 1, 2].map(|a| Self::coord(lo[a], cell, dims[a], p[a]));
        (c[0] * dims[1] + c[1]) * dims[2] + c[2]
    }

    /// Calls `f(j)` for every point j with |p - x_j| <= r.
    pub fn for_each_within(&self, p: &Point, r: f64, mut f: impl FnMut(usize)) {
        let lo_c = [0, 1, 2].map(|a| Self::coord(self.lo[a], self.cell, self.dims[a], p[a] - r));
        let hi_c = [0, 1, 2].map(|a| Self::coord(self.lo[a], self.cell, self.dims[a], p[a] + r));
        for cx in lo_c[0]..=hi_c[0] {
            for cy in lo_c[1]..=hi_c[1] {
                for cz in lo_c[2]..=hi_c[2] {
                    let c = (cx * self.dims[1] + cy) * self.dims[2] + cz;
                    for &j in &self.order[self.starts[c]..self.starts[c + 1]] {
                        if dist(p, &self.points[j]) <= r {
                            f(j);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_points_are_unit() {
        for p in fibonacci_sphere(50) {
            assert!((norm(&p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_neighbor_matches_brute_force() {
        let pts = fibonacci_sphere(300);
        let fast = nearest_neighbor_distances(&pts);
        for (i, p) in pts.iter().enumerate() {
            let brute = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| dist(p, q))
                .fold(f64::INFINITY, f64::min);
            assert!((brute - fast[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_radius_query_is_complete() {
        let pts = fibonacci_sphere(200);
        let grid = CellGrid::new(&pts, 5.0);
        let c = [0.3, -0.2, 0.9];
        let mut got = vec![];
        grid.for_each_within(&c, 0.45, |j| got.push(j));
        got.sort();
        let want: Vec<usize> = (0..pts.len()).filter(|&j| dist(&c, &pts[j]) <= 0.45).collect();
        assert_eq!(got, want);
    }
}
