//! Finite boxes of Z^d with row-major site indexing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic in every axis.
    Torus,
    /// Sites outside the box do not exist.
    Free,
}

/// A lattice site, identified by its row-major index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub usize);

impl Site {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

const NO_NEIGHBOR: usize = usize::MAX;

/// Validated lattice geometry with a precomputed neighbor table.
///
/// Directions are numbered `2 * axis + s` where `s = 0` steps towards lower
/// coordinates and `s = 1` towards higher ones. The table is immutable after
/// construction, so a lattice can be shared freely between threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    sides: Vec<usize>,
    boundary: Boundary,
    site_count: usize,
    strides: Vec<usize>,
    table: Vec<usize>,
}

impl Lattice {
    /// Builds a `dim`-dimensional box with the given side lengths.
    ///
    /// A torus side of 1 is the degenerate single-site ring and contributes no
    /// neighbors along its axis; a torus side of 2 is rejected since both
    /// neighbors along that axis would coincide.
    pub fn new(dim: usize, sides: &[usize], boundary: Boundary) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if sides.len() != dim {
            return Err(Error::InvalidLattice(format!(
                "expected {dim} side lengths, got {}",
                sides.len()
            )));
        }
        if let Some(axis) = sides.iter().position(|&s| s == 0) {
            return Err(Error::InvalidLattice(format!("side {axis} has length 0")));
        }
        if boundary == Boundary::Torus {
            if let Some(axis) = sides.iter().position(|&s| s == 2) {
                return Err(Error::InvalidLattice(format!(
                    "torus side {axis} has length 2; its two neighbors would coincide"
                )));
            }
        }
        let site_count = sides
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&n| n < u32::MAX as usize)
            .ok_or_else(|| Error::InvalidLattice("site count overflows".into()))?;

        let mut strides = vec![1usize; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * sides[axis + 1];
        }

        let mut lattice = Self {
            sides: sides.to_vec(),
            boundary,
            site_count,
            strides,
            table: Vec::new(),
        };
        let dirs = 2 * dim;
        let mut table = vec![NO_NEIGHBOR; site_count * dirs];
        let mut coords = vec![0usize; dim];
        for index in 0..site_count {
            lattice.fill_coords(index, &mut coords);
            for axis in 0..dim {
                for s in 0..2 {
                    table[index * dirs + 2 * axis + s] = lattice.step(index, &coords, axis, s);
                }
            }
        }
        lattice.table = table;
        Ok(lattice)
    }

    /// Convenience constructor for a one-dimensional ring or segment.
    pub fn line(side: usize, boundary: Boundary) -> Result<Self> {
        Self::new(1, &[side], boundary)
    }

    fn step(&self, index: usize, coords: &[usize], axis: usize, s: usize) -> usize {
        let side = self.sides[axis];
        let c = coords[axis];
        let stride = self.strides[axis];
        match (self.boundary, s) {
            (Boundary::Torus, _) if side == 1 => NO_NEIGHBOR,
            (Boundary::Torus, 0) => {
                if c == 0 {
                    index + (side - 1) * stride
                } else {
                    index - stride
                }
            }
            (Boundary::Torus, _) => {
                if c + 1 == side {
                    index - (side - 1) * stride
                } else {
                    index + stride
                }
            }
            (Boundary::Free, 0) => {
                if c == 0 {
                    NO_NEIGHBOR
                } else {
                    index - stride
                }
            }
            (Boundary::Free, _) => {
                if c + 1 == side {
                    NO_NEIGHBOR
                } else {
                    index + stride
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// Number of neighbor directions, `2d`.
    #[inline]
    pub fn directions(&self) -> usize {
        2 * self.sides.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count).map(Site)
    }

    pub fn check(&self, site: Site) -> Result<()> {
        if site.0 < self.site_count {
            Ok(())
        } else {
            Err(Error::InvalidSite {
                index: site.0,
                site_count: self.site_count,
            })
        }
    }

    fn fill_coords(&self, index: usize, out: &mut [usize]) {
        for (axis, c) in out.iter_mut().enumerate() {
            *c = (index / self.strides[axis]) % self.sides[axis];
        }
    }

    pub fn coords(&self, site: Site) -> Result<Vec<usize>> {
        self.check(site)?;
        let mut out = vec![0; self.dim()];
        self.fill_coords(site.0, &mut out);
        Ok(out)
    }

    pub fn site_at(&self, coords: &[usize]) -> Result<Site> {
        if coords.len() != self.dim() {
            return Err(Error::InvalidLattice(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                coords.len()
            )));
        }
        let mut index = 0;
        for (axis, (&c, &side)) in coords.iter().zip(&self.sides).enumerate() {
            if c >= side {
                return Err(Error::InvalidLattice(format!(
                    "coordinate {c} out of range on axis {axis}"
                )));
            }
            index += c * self.strides[axis];
        }
        Ok(Site(index))
    }

    /// The site at the center of the box (coordinate `side / 2` on each axis).
    pub fn center(&self) -> Site {
        Site(
            self.sides
                .iter()
                .zip(&self.strides)
                .map(|(&side, &stride)| (side / 2) * stride)
                .sum(),
        )
    }

    /// Neighbor of `site` in direction `dir`, if it exists. No bounds check on `site`.
    #[inline]
    pub fn neighbor(&self, site: Site, dir: usize) -> Option<Site> {
        let n = self.table[site.0 * self.directions() + dir];
        (n != NO_NEIGHBOR).then_some(Site(n))
    }

    /// Nearest neighbors in ascending index order.
    pub fn neighbors(&self, site: Site) -> Result<Vec<Site>> {
        self.check(site)?;
        let mut out: Vec<Site> = (0..self.directions())
            .filter_map(|dir| self.neighbor(site, dir))
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Iterates over `(dir, neighbor)` pairs. No bounds check on `site`.
    #[inline]
    pub fn neighbors_by_direction(&self, site: Site) -> impl Iterator<Item = (usize, Site)> + '_ {
        let dirs = self.directions();
        self.table[site.0 * dirs..(site.0 + 1) * dirs]
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != NO_NEIGHBOR)
            .map(|(dir, &n)| (dir, Site(n)))
    }

    /// Direction from `from` to its neighbor `to`.
    pub fn direction_to(&self, from: Site, to: Site) -> Option<usize> {
        self.neighbors_by_direction(from)
            .find(|&(_, n)| n == to)
            .map(|(dir, _)| dir)
    }
}
