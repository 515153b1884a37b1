//! Exact nearest-vertex assignment of labelled voxels.

/// Uniform bucket grid over the vertex bounding box.
struct VertexGrid<'a> {
    vertices: &'a [[f64; 3]],
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// Vertex indices sorted by cell, delimited by `starts`.
    order: Vec<u32>,
    starts: Vec<usize>,
}

impl<'a> VertexGrid<'a> {
    fn new(vertices: &'a [[f64; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
        let per_axis = (vertices.len() as f64).cbrt().ceil().max(1.0);
        let cell = if extent > 0.0 { extent / per_axis } else { 1.0 };
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let mut grid = Self {
            vertices,
            origin: lo,
            cell,
            dims,
            order: Vec::new(),
            starts: Vec::new(),
        };
        let cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; cells + 1];
        let keys: Vec<usize> = vertices.iter().map(|v| grid.flat(grid.cell_of(v))).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; vertices.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i as u32;
            fill[k] += 1;
        }
        grid.order = order;
        grid.starts = counts;
        grid
    }

    fn cell_of(&self, p: &[f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            if c.is_nan() || c < 0.0 {
                0
            } else {
                (c as usize).min(self.dims[a] - 1)
            }
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn nearest(&self, p: &[f64; 3]) -> usize {
        let home = self.cell_of(p);
        let mut best = (f64::INFINITY, usize::MAX);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        for ring in 0..=max_ring {
            self.visit_ring(home, ring, |idx| {
                let v = &self.vertices[idx];
                let d2 = (0..3).map(|a| (v[a] - p[a]).powi(2)).sum::<f64>();
                if d2 < best.0 || (d2 == best.0 && idx < best.1) {
                    best = (d2, idx);
                }
            });
            match self.unvisited_bound(p, home, ring) {
                None => break,
                // margin absorbs rounding in cell assignment so ties are never skipped
                Some(bound) if bound > best.0.sqrt() * (1.0 + 1e-9) + 1e-9 * self.cell => break,
                _ => {}
            }
        }
        best.1
    }

    /// Calls `f` for every vertex in cells at Chebyshev distance exactly `ring` from `home`.
    fn visit_ring(&self, home: [usize; 3], ring: usize, mut f: impl FnMut(usize)) {
        let span = |a: usize| {
            let lo = home[a].saturating_sub(ring);
            let hi = (home[a] + ring).min(self.dims[a] - 1);
            lo..=hi
        };
        for z in span(2) {
            for y in span(1) {
                for x in span(0) {
                    let c = [x, y, z];
                    let cheb = (0..3).map(|a| c[a].abs_diff(home[a])).max().unwrap_or(0);
                    if cheb != ring {
                        continue;
                    }
                    let k = self.flat(c);
                    for &i in &self.order[self.starts[k]..self.starts[k + 1]] {
                        f(i as usize);
                    }
                }
            }
        }
    }

    /// Lower bound on the distance from `p` to any cell outside the first
    /// `ring` rings, or `None` when no such cell exists.
    fn unvisited_bound(&self, p: &[f64; 3], home: [usize; 3], ring: usize) -> Option<f64> {
        let mut bound: Option<f64> = None;
        for a in 0..3 {
            if home[a] + ring + 1 < self.dims[a] {
                let edge = self.origin[a] + (home[a] + ring + 1) as f64 * self.cell;
                let d = (edge - p[a]).max(0.0);
                bound = Some(bound.map_or(d, |b| b.min(d)));
            }
            if home[a] > ring {
                let edge = self.origin[a] + (home[a] - ring) as f64 * self.cell;
                let d = (p[a] - edge).max(0.0);
                bound = Some(bound.map_or(d, |b| b.min(d)));
            }
        }
        bound
    }
}

/// Index of the vertex closest to each query point (ties go to the lowest index).
pub fn nearest_vertex(points: &[[f64; 3]], vertices: &[[f64; 3]]) -> Vec<usize> {
    if vertices.is_empty() {
        return Vec::new();
    }
    let grid = VertexGrid::new(vertices);
    points.iter().map(|p| grid.nearest(p)).collect()
}

/// Counts, for each vertex, the voxels whose nearest vertex it is.
/// The counts always sum to the number of voxels when the mesh is non-empty.
pub fn assign_voxels_to_vertices(voxel_centers: &[[f64; 3]], vertices: &[[f64; 3]]) -> Vec<f64> {
    let mut counts = vec![0.0; vertices.len()];
    for i in nearest_vertex(voxel_centers, vertices) {
        counts[i] += 1.0;
    }
    counts
}
