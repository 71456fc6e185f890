//! Lattice geometry: column-major indexing and the Moore-8 neighborhood.
//!
//! Sites are addressed either by cartesian coordinates `(row, col)` or by a
//! linear index with the column-major convention `i = col * height + row`.
//! Boundaries are free: edge and corner sites simply have fewer neighbors.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("site ({0}, {1}) out of bounds for {2}x{3} lattice")]
    OutOfBounds(usize, usize, usize, usize),
}

/// Column-major linear index of `(row, col)`.
#[inline]
pub fn to_linear(row: usize, col: usize, height: usize) -> usize {
    col * height + row
}

/// Inverse of [`to_linear`].
#[inline]
pub fn from_linear(index: usize, height: usize) -> (usize, usize) {
    (index % height, index / height)
}

/// Neighborhood structure on the lattice.
///
/// Only the Moore neighborhood (the 8 surrounding sites, Chebyshev distance 1)
/// is implemented; the enum leaves room for other stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Neighborhood {
    Moore8,
}

impl Neighborhood {
    /// In-bounds neighbors of `site` on a `width x height` lattice, in a fixed
    /// deterministic order. Never contains `site` itself.
    pub fn neighbors(
        self,
        width: usize,
        height: usize,
        site: (usize, usize),
    ) -> Result<Vec<(usize, usize)>, LatticeError> {
        let (r, c) = site;
        if r >= height || c >= width {
            return Err(LatticeError::OutOfBounds(r, c, width, height));
        }
        let mut out = Vec::with_capacity(8);
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let rr = r as i64 + dr;
                let cc = c as i64 + dc;
                if rr >= 0 && rr < height as i64 && cc >= 0 && cc < width as i64 {
                    out.push((rr as usize, cc as usize));
                }
            }
        }
        Ok(out)
    }
}

/// Flattened neighbor lists (CSR layout) over linear site indices, precomputed
/// once per lattice so the samplers' inner loops avoid bounds arithmetic.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    starts: Vec<u32>,
    flat: Vec<u32>,
    sites: usize,
}

impl NeighborTable {
    pub fn new(nb: Neighborhood, width: usize, height: usize) -> Self {
        let sites = width * height;
        let mut starts = Vec::with_capacity(sites + 1);
        let mut flat = Vec::with_capacity(sites * 8);
        starts.push(0);
        for i in 0..sites {
            let (r, c) = from_linear(i, height);
            // Unwrap is fine: i is in bounds by construction.
            for (rr, cc) in nb.neighbors(width, height, (r, c)).unwrap() {
                flat.push(to_linear(rr, cc, height) as u32);
            }
            starts.push(flat.len() as u32);
        }
        NeighborTable { starts, flat, sites }
    }

    #[inline]
    pub fn neighbors_of(&self, site: usize) -> &[u32] {
        &self.flat[self.starts[site] as usize..self.starts[site + 1] as usize]
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }
}
