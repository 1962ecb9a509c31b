//! Uniform axis-aligned structured grids and their two-point-flux geometry.
//!
//! Cells are numbered with the x index running fastest, then y, then z.
//! Two-dimensional grids carry unit thickness, so "volumes" are per meter
//! of depth and facet "areas" are edge lengths times one meter.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interior facet shared by two cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet<T> {
    /// The "+" side of every jump; always the smaller index.
    pub cell_a: usize,
    pub cell_b: usize,
    pub area: T,
    /// Distance between the two cell centers.
    pub distance: T,
    pub normal_axis: usize,
    /// Orientation of the unit normal pointing from `cell_a` to `cell_b`
    /// relative to the positive `normal_axis` direction.
    pub normal_sign: i8,
}

impl<T: Real> Facet<T> {
    /// `area / distance`, the geometric part of the transmissibility.
    pub fn geometric_factor(&self) -> T {
        self.area / self.distance
    }
}

/// Facet lying on the domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet<T> {
    pub cell: usize,
    pub area: T,
    /// Distance from the cell center to the facet.
    pub distance: T,
    pub normal_axis: usize,
    /// Sign of the outward normal along `normal_axis`.
    pub outward_sign: i8,
}

#[derive(Debug, Clone)]
pub struct Grid<T> {
    dims: Vec<usize>,
    lengths: Vec<T>,
    cell_size: Vec<T>,
    cell_centers: Vec<[T; 3]>,
    cell_volumes: Vec<T>,
    facets: Vec<Facet<T>>,
    boundary_facets: Vec<BoundaryFacet<T>>,
    // CSR adjacency: for each cell, (facet index, neighbor cell)
    adj_ptr: Vec<usize>,
    adj: Vec<(usize, usize)>,
}

/// Builds a uniform axis-aligned grid with `dims[k]` cells along axis `k`
/// covering `[0, lengths[k]]`.
pub fn build_grid<T: Real>(dims: &[usize], lengths: &[T]) -> Result<Grid<T>> {
    if dims.len() != 2 && dims.len() != 3 {
        return Err(Error::InvalidGrid(format!(
            "expected 2 or 3 axes, got {}",
            dims.len()
        )));
    }
    if lengths.len() != dims.len() {
        return Err(Error::InvalidGrid(format!(
            "{} extents but {} lengths",
            dims.len(),
            lengths.len()
        )));
    }
    if let Some(axis) = dims.iter().position(|&n| n == 0) {
        return Err(Error::InvalidGrid(format!("zero extent along axis {axis}")));
    }
    if let Some(axis) = lengths.iter().position(|&l| !(l > T::zero()) || !l.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "non-positive length along axis {axis}"
        )));
    }

    let nd = dims.len();
    let cell_size: Vec<T> = dims
        .iter()
        .zip(lengths)
        .map(|(&n, &l)| l / T::from_count(n))
        .collect();
    let (nx, ny, nz) = (dims[0], dims[1], if nd == 3 { dims[2] } else { 1 });
    let n_cells = nx * ny * nz;
    let half = T::lit(0.5);

    let volume = cell_size.iter().fold(T::one(), |acc, &h| acc * h);
    let mut cell_centers = Vec::with_capacity(n_cells);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut c = [T::zero(); 3];
                let idx = [i, j, k];
                for axis in 0..nd {
                    c[axis] = (T::from_count(idx[axis]) + half) * cell_size[axis];
                }
                cell_centers.push(c);
            }
        }
    }
    let cell_volumes = vec![volume; n_cells];

    let strides = [1, nx, nx * ny];
    let mut facets = Vec::new();
    let mut boundary_facets = Vec::new();
    for axis in 0..nd {
        // area of a face normal to `axis`: product of the other cell sizes
        let area = (0..nd)
            .filter(|&a| a != axis)
            .fold(T::one(), |acc, a| acc * cell_size[a]);
        let distance = cell_size[axis];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = [i, j, k];
                    let cell = i + nx * (j + ny * k);
                    if idx[axis] == 0 {
                        boundary_facets.push(BoundaryFacet {
                            cell,
                            area,
                            distance: distance * half,
                            normal_axis: axis,
                            outward_sign: -1,
                        });
                    }
                    if idx[axis] + 1 < dims[axis] {
                        facets.push(Facet {
                            cell_a: cell,
                            cell_b: cell + strides[axis],
                            area,
                            distance,
                            normal_axis: axis,
                            normal_sign: 1,
                        });
                    } else {
                        boundary_facets.push(BoundaryFacet {
                            cell,
                            area,
                            distance: distance * half,
                            normal_axis: axis,
                            outward_sign: 1,
                        });
                    }
                }
            }
        }
    }

    let mut counts = vec![0usize; n_cells + 1];
    for f in &facets {
        counts[f.cell_a + 1] += 1;
        counts[f.cell_b + 1] += 1;
    }
    for c in 0..n_cells {
        counts[c + 1] += counts[c];
    }
    let adj_ptr = counts.clone();
    let mut fill = counts;
    let mut adj = vec![(0, 0); 2 * facets.len()];
    for (fi, f) in facets.iter().enumerate() {
        adj[fill[f.cell_a]] = (fi, f.cell_b);
        fill[f.cell_a] += 1;
        adj[fill[f.cell_b]] = (fi, f.cell_a);
        fill[f.cell_b] += 1;
    }
    for c in 0..n_cells {
        adj[adj_ptr[c]..adj_ptr[c + 1]].sort_by_key(|&(_, nb)| nb);
    }

    Ok(Grid {
        dims: dims.to_vec(),
        lengths: lengths.to_vec(),
        cell_size,
        cell_centers,
        cell_volumes,
        facets,
        boundary_facets,
        adj_ptr,
        adj,
    })
}

impl<T: Real> Grid<T> {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn cell_size(&self) -> &[T] {
        &self.cell_size
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_volumes.len()
    }

    pub fn cell_centers(&self) -> &[[T; 3]] {
        &self.cell_centers
    }

    pub fn cell_volumes(&self) -> &[T] {
        &self.cell_volumes
    }

    pub fn facets(&self) -> &[Facet<T>] {
        &self.facets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet<T>] {
        &self.boundary_facets
    }

    /// Axis along which gravity acts (the last one).
    pub fn vertical_axis(&self) -> usize {
        self.dims.len() - 1
    }

    /// Facets incident to `cell`, paired with the cell across each facet,
    /// sorted by neighbor index.
    pub fn facet_neighbors(&self, cell: usize) -> Result<&[(usize, usize)]> {
        if cell >= self.n_cells() {
            return Err(Error::CellOutOfRange { cell, n_cells: self.n_cells() });
        }
        Ok(&self.adj[self.adj_ptr[cell]..self.adj_ptr[cell + 1]])
    }

    /// Index of the cell containing the physical point `x` (clamped to the
    /// domain, so points on the upper boundary map to the last cell).
    pub fn locate(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.n_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dims(),
                found: x.len(),
                context: "point location",
            });
        }
        let mut idx = [0usize; 3];
        for axis in 0..self.n_dims() {
            if !(x[axis] >= T::zero() && x[axis] <= self.lengths[axis]) {
                return Err(Error::InvalidGrid(format!(
                    "point coordinate {} outside [0, {}] along axis {axis}",
                    x[axis], self.lengths[axis]
                )));
            }
            let i = (x[axis] / self.cell_size[axis]).floor().to_usize().unwrap_or(0);
            idx[axis] = i.min(self.dims[axis] - 1);
        }
        let nx = self.dims[0];
        let ny = self.dims[1];
        Ok(idx[0] + nx * (idx[1] + ny * idx[2]))
    }
}
