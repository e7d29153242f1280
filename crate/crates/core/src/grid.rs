//! Lattice adjacency and black-cluster extraction on thresholded images.
//!
//! The triangular lattice is embedded in the pixel grid by adding one
//! diagonal per cell, running along `(+1, +1) / (-1, -1)`. Every interior
//! vertex then has six neighbours and the graph is isomorphic to the
//! triangular lattice, so site percolation has critical probability 1/2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Coord;
use crate::ops::{NoTally, Tally};

/// Critical probability for site percolation on the triangular lattice.
pub const TRIANGULAR_SITE_CRITICAL_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square4,
    Triangular6,
}

impl LatticeKind {
    // Row-major by neighbour coordinate.
    const SQUARE: &'static [(isize, isize)] = &[(-1, 0), (0, -1), (0, 1), (1, 0)];
    const TRIANGULAR: &'static [(isize, isize)] = &[(-1, -1), (-1, 0), (0, -1), (0, 1), (1, 0), (1, 1)];

    #[inline]
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            LatticeKind::Square4 => Self::SQUARE,
            LatticeKind::Triangular6 => Self::TRIANGULAR,
        }
    }

    pub fn max_degree(self) -> usize {
        self.offsets().len()
    }
}

/// Returns the in-bounds lattice neighbours of `v` on an `n x n` grid,
/// in row-major order.
pub fn neighbors(v: Coord, n: usize, lattice: LatticeKind) -> Result<Vec<Coord>> {
    if v.0 >= n || v.1 >= n {
        return Err(Error::invalid(format!("vertex ({}, {}) outside {n}x{n} grid", v.0, v.1)));
    }
    Ok(neighbor_iter(v, n, lattice).collect())
}

#[inline]
fn neighbor_iter(v: Coord, n: usize, lattice: LatticeKind) -> impl Iterator<Item = Coord> {
    lattice.offsets().iter().filter_map(move |&(di, dj)| {
        let i = v.0.checked_add_signed(di)?;
        let j = v.1.checked_add_signed(dj)?;
        (i < n && j < n).then_some((i, j))
    })
}

/// An `n x n` black/white picture together with the lattice that defines
/// adjacency between its pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    n: usize,
    bits: Vec<bool>,
    lattice: LatticeKind,
}

impl BinaryImage {
    pub fn new(n: usize, bits: Vec<bool>, lattice: LatticeKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("binary image side must be positive"));
        }
        if bits.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} cells for a {n}x{n} binary image, got {}",
                n * n,
                bits.len()
            )));
        }
        Ok(Self { n, bits, lattice })
    }

    pub fn filled(n: usize, black: bool, lattice: LatticeKind) -> Result<Self> {
        Self::new(n, vec![black; n * n], lattice)
    }

    pub fn from_fn(n: usize, lattice: LatticeKind, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let bits = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self::new(n, bits, lattice)
    }

    /// Builds an image that is black exactly at `black`.
    pub fn from_black_pixels(n: usize, lattice: LatticeKind, black: &[Coord]) -> Result<Self> {
        let mut bits = vec![false; n * n];
        for &(i, j) in black {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("pixel ({i}, {j}) outside {n}x{n} grid")));
            }
            bits[i * n + j] = true;
        }
        Self::new(n, bits, lattice)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn lattice(&self) -> LatticeKind {
        self.lattice
    }

    #[inline]
    pub fn is_black(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn black_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn with_lattice(mut self, lattice: LatticeKind) -> Self {
        self.lattice = lattice;
        self
    }
}

/// A maximal connected set of black pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pixels: Vec<Coord>,
}

impl Cluster {
    /// Pixels in row-major order.
    pub fn pixels(&self) -> &[Coord] {
        &self.pixels
    }

    pub fn size(&self) -> usize {
        self.pixels.len()
    }

    /// `(row_min, col_min, row_max, col_max)`, inclusive.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        self.pixels.iter().fold((usize::MAX, usize::MAX, 0, 0), |(r0, c0, r1, c1), &(r, c)| {
            (r0.min(r), c0.min(c), r1.max(r), c1.max(c))
        })
    }

    pub fn first_pixel(&self) -> Coord {
        self.pixels[0]
    }
}

/// Per-pixel cluster labels from a single labelling pass.
#[derive(Debug, Clone)]
pub struct ClusterLabels {
    /// `0` for white pixels, `k + 1` for pixels of the `k`-th discovered cluster.
    pub labels: Vec<u32>,
    /// Sizes indexed by discovery order.
    pub sizes: Vec<usize>,
}

impl ClusterLabels {
    pub fn largest(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Depth-first labelling of all black clusters. Clusters are numbered in the
/// row-major order of their first pixel.
pub fn label_black_clusters(img: &BinaryImage) -> ClusterLabels {
    label_black_clusters_tallied(img, &mut NoTally)
}

/// Same as [`label_black_clusters`], charging one operation per pixel test and
/// one per neighbour inspection.
pub(crate) fn label_black_clusters_tallied<T: Tally>(img: &BinaryImage, tally: &mut T) -> ClusterLabels {
    let n = img.n;
    let mut labels = vec![0u32; n * n];
    let mut sizes = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for start in 0..n * n {
        tally.add(1);
        if !img.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = u32::try_from(sizes.len() + 1).expect("cluster count fits in u32");
        labels[start] = label;
        stack.push(start);
        let mut size = 0usize;
        while let Some(k) = stack.pop() {
            size += 1;
            for (i, j) in neighbor_iter((k / n, k % n), n, img.lattice) {
                tally.add(1);
                let idx = i * n + j;
                if img.bits[idx] && labels[idx] == 0 {
                    labels[idx] = label;
                    stack.push(idx);
                }
            }
        }
        sizes.push(size);
    }
    ClusterLabels { labels, sizes }
}

/// Returns every maximal black cluster, largest first; equal sizes are
/// ordered by their row-major first pixel.
pub fn find_black_clusters(img: &BinaryImage) -> Vec<Cluster> {
    clusters_from_labels(img.n, &label_black_clusters(img))
}

pub(crate) fn clusters_from_labels(n: usize, labelled: &ClusterLabels) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> =
        labelled.sizes.iter().map(|&s| Cluster { pixels: Vec::with_capacity(s) }).collect();
    for (k, &label) in labelled.labels.iter().enumerate() {
        if label != 0 {
            clusters[label as usize - 1].pixels.push((k / n, k % n));
        }
    }
    // Stable: ties keep discovery (row-major first pixel) order.
    clusters.sort_by_key(|c| std::cmp::Reverse(c.size()));
    clusters
}

pub fn largest_cluster_size(img: &BinaryImage) -> usize {
    label_black_clusters(img).largest()
}
