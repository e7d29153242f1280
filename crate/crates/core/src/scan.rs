//! Spatial scan estimators.
//!
//! All `w x w` window sums of an `n x n` image are computed with the
//! two-pass running-sum scheme: first the `w`-high column sums are slid down
//! each column (one add and one subtract per step), then the `w`-wide row
//! sums of those column sums are slid across each row of window positions.
//! With `m = n - w + 1` window positions per axis the scheme spends
//! `w n + 2 n (m - 1)` operations on column sums and `m (w + 2 (m - 1))` on
//! row sums: `O(n^2)` with no factor of `w`.
//!
//! The background estimate is the mean of the window with the smallest sum,
//! the object estimate the mean of the window with the largest sum. Ties go
//! to the row-major first window.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{Coord, Image};
use crate::ops::{NoTally, OpCount, Tally};

/// Sums over every `w x w` window, indexed by top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSums {
    w: usize,
    m: usize,
    sums: Vec<f64>,
}

impl WindowSums {
    pub fn side(&self) -> usize {
        self.w
    }

    /// Number of window positions along each axis, `n - w + 1`.
    pub fn positions_per_axis(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.sums[row * self.m + col]
    }

    pub fn mean(&self, row: usize, col: usize) -> f64 {
        self.get(row, col) / (self.w * self.w) as f64
    }

    /// Row-major sums.
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn argmin(&self) -> Coord {
        self.argmin_tallied(&mut NoTally)
    }

    pub fn argmax(&self) -> Coord {
        self.argmax_tallied(&mut NoTally)
    }

    pub(crate) fn argmin_tallied<T: Tally>(&self, tally: &mut T) -> Coord {
        self.arg_best(tally, |x, best| x < best)
    }

    pub(crate) fn argmax_tallied<T: Tally>(&self, tally: &mut T) -> Coord {
        self.arg_best(tally, |x, best| x > best)
    }

    // Strict comparison keeps the first occurrence on ties.
    fn arg_best<T: Tally>(&self, tally: &mut T, better: impl Fn(f64, f64) -> bool) -> Coord {
        let mut best = 0;
        for (k, &s) in self.sums.iter().enumerate().skip(1) {
            if better(s, self.sums[best]) {
                best = k;
            }
        }
        tally.add(self.sums.len().saturating_sub(1) as u64);
        (best / self.m, best % self.m)
    }
}

/// Floating-point accumulation used for the running sums.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Accumulation {
    #[default]
    Plain,
    /// Neumaier-compensated running sums.
    Compensated,
}

fn check_side(n: usize, w: usize) -> Result<()> {
    if w == 0 || w > n {
        Err(Error::invalid(format!("window side {w} outside 1..={n}")))
    } else {
        Ok(())
    }
}

pub fn sliding_window_sums(img: &Image, w: usize) -> Result<WindowSums> {
    check_side(img.n(), w)?;
    Ok(sums_plain(img, w, &mut NoTally))
}

pub fn sliding_window_sums_with(img: &Image, w: usize, acc: Accumulation) -> Result<WindowSums> {
    check_side(img.n(), w)?;
    Ok(match acc {
        Accumulation::Plain => sums_plain(img, w, &mut NoTally),
        Accumulation::Compensated => sums_compensated(img, w),
    })
}

/// Window sums together with the number of additions and subtractions spent.
pub fn sliding_window_sums_counted(img: &Image, w: usize) -> Result<(WindowSums, u64)> {
    check_side(img.n(), w)?;
    let mut ops = OpCount::default();
    let sums = sums_plain(img, w, &mut ops);
    Ok((sums, ops.0))
}

pub(crate) fn sums_plain<T: Tally>(img: &Image, w: usize, tally: &mut T) -> WindowSums {
    let n = img.n();
    let m = n - w + 1;
    let mut sums = vec![0.0; m * m];

    // Column sums over rows [r, r + w), kept for the current r only.
    let mut col = vec![0.0; n];
    for i in 0..w {
        for (c, &y) in col.iter_mut().zip(img.row(i)) {
            *c += y;
        }
    }
    tally.add((w * n) as u64);

    for r in 0..m {
        let out = &mut sums[r * m..(r + 1) * m];
        let mut s = 0.0;
        for &c in &col[..w] {
            s += c;
        }
        out[0] = s;
        for k in 1..m {
            // One subtract, one add. The difference form keeps exact ties exact.
            s += col[k + w - 1] - col[k - 1];
            out[k] = s;
        }
        tally.add((w + 2 * (m - 1)) as u64);

        if r + 1 < m {
            let (old, new) = (img.row(r), img.row(r + w));
            for ((c, &o), &y) in col.iter_mut().zip(old).zip(new) {
                *c += y - o;
            }
            tally.add(2 * n as u64);
        }
    }
    WindowSums { w, m, sums }
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn sums_compensated(img: &Image, w: usize) -> WindowSums {
    let n = img.n();
    let m = n - w + 1;
    let mut sums = vec![0.0; m * m];
    let mut col = vec![Neumaier::default(); n];
    for i in 0..w {
        for (c, &y) in col.iter_mut().zip(img.row(i)) {
            c.add(y);
        }
    }
    for r in 0..m {
        let vals: Vec<f64> = col.iter().map(Neumaier::value).collect();
        let out = &mut sums[r * m..(r + 1) * m];
        let mut s = Neumaier::default();
        for &c in &vals[..w] {
            s.add(c);
        }
        out[0] = s.value();
        for k in 1..m {
            s.add(vals[k + w - 1]);
            s.add(-vals[k - 1]);
            out[k] = s.value();
        }
        if r + 1 < m {
            let (old, new) = (img.row(r), img.row(r + w));
            for ((c, &o), &y) in col.iter_mut().zip(old).zip(new) {
                c.add(y);
                c.add(-o);
            }
        }
    }
    WindowSums { w, m, sums }
}

/// A square window given by its top-left corner and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub origin: Coord,
    pub side: usize,
}

impl Window {
    pub fn new(origin: Coord, side: usize) -> Self {
        Self { origin, side }
    }

    pub fn contains(&self, (i, j): Coord) -> bool {
        let (r, c) = self.origin;
        (r..r + self.side).contains(&i) && (c..c + self.side).contains(&j)
    }

    fn check(&self, n: usize) -> Result<()> {
        let (r, c) = self.origin;
        if self.side == 0 || r + self.side > n || c + self.side > n {
            return Err(Error::invalid(format!(
                "window at ({r}, {c}) with side {} does not fit a {n}x{n} image",
                self.side
            )));
        }
        Ok(())
    }

    fn values<'a>(&self, img: &'a Image) -> impl Iterator<Item = f64> + 'a {
        let (r, c, side) = (self.origin.0, self.origin.1, self.side);
        (r..r + side).flat_map(move |i| img.row(i)[c..c + side].iter().copied())
    }
}

/// Result of a scan: the selected window and its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanEstimate {
    pub value: f64,
    #[serde(rename = "side")]
    pub window_side: usize,
    #[serde(rename = "origin")]
    pub window_origin: Coord,
}

impl ScanEstimate {
    pub fn window(&self) -> Window {
        Window::new(self.window_origin, self.window_side)
    }

    fn from_sums(sums: &WindowSums, origin: Coord) -> Self {
        Self { value: sums.mean(origin.0, origin.1), window_side: sums.side(), window_origin: origin }
    }
}

/// Background intensity estimate: mean of the `phi0 x phi0` window with the
/// smallest sum.
pub fn estimate_a(img: &Image, phi0: usize) -> Result<ScanEstimate> {
    let sums = sliding_window_sums(img, phi0)?;
    Ok(ScanEstimate::from_sums(&sums, sums.argmin()))
}

/// Object intensity estimate: mean of the `phi1 x phi1` window with the
/// largest sum.
pub fn estimate_b(img: &Image, phi1: usize) -> Result<ScanEstimate> {
    let sums = sliding_window_sums(img, phi1)?;
    Ok(ScanEstimate::from_sums(&sums, sums.argmax()))
}

pub(crate) fn estimate_a_tallied<T: Tally>(img: &Image, phi0: usize, tally: &mut T) -> Result<ScanEstimate> {
    check_side(img.n(), phi0)?;
    let sums = sums_plain(img, phi0, tally);
    Ok(ScanEstimate::from_sums(&sums, sums.argmin_tallied(tally)))
}

pub(crate) fn estimate_b_tallied<T: Tally>(img: &Image, phi1: usize, tally: &mut T) -> Result<ScanEstimate> {
    check_side(img.n(), phi1)?;
    let sums = sums_plain(img, phi1, tally);
    Ok(ScanEstimate::from_sums(&sums, sums.argmax_tallied(tally)))
}

/// Sample variance over `window`, centred on that window's own mean and
/// divided by `|window| - 1`.
pub fn estimate_sigma2(img: &Image, window: Window) -> Result<f64> {
    window.check(img.n())?;
    if window.side < 2 {
        return Err(Error::invalid("variance needs a window side of at least 2"));
    }
    let count = (window.side * window.side) as f64;
    let mean = window.values(img).sum::<f64>() / count;
    let ss: f64 = window.values(img).map(|y| (y - mean) * (y - mean)).sum();
    Ok(ss / (count - 1.0))
}

/// Empirical distribution function of the values in `window`, evaluated at `t`.
pub fn empirical_f(img: &Image, window: Window, t: f64) -> Result<f64> {
    window.check(img.n())?;
    let below = window.values(img).filter(|&y| y <= t).count();
    Ok(below as f64 / (window.side * window.side) as f64)
}

/// Mean over the whole image.
pub fn naive_mean(img: &Image) -> f64 {
    img.values().iter().sum::<f64>() / img.values().len() as f64
}

/// Default window side `ceil(2 ln n)`, clamped to `1..=n`.
pub fn default_window_side(n: usize) -> usize {
    ((2.0 * (n as f64).ln()).ceil() as usize).clamp(1, n.max(1))
}
