//! Two-pass cell-averaging CFAR on a range-Doppler power map.
//!
//! Each pass runs a 1-D CA-CFAR along one axis; a cell is declared only when
//! it clears the threshold in both. Near the map edges the training window is
//! truncated to the cells that exist, and the threshold factor is recomputed
//! for the actual number of training cells so the false-alarm rate holds.

use crate::error::DspError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarParams {
    /// Guard cells per side.
    pub guard: usize,
    /// Training cells per side.
    pub train: usize,
    /// Per-pass false-alarm probability.
    pub pfa: f64,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self { guard: 2, train: 8, pfa: 1e-4 }
    }
}

impl CfarParams {
    pub fn check(&self) -> Result<(), DspError> {
        if self.guard < 1 || self.train < 1 {
            return Err(DspError::CfarParams(format!("guard {} and train {} must be >= 1", self.guard, self.train)));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(DspError::CfarParams(format!("pfa {} must lie in (0, 1)", self.pfa)));
        }
        Ok(())
    }

    /// Smallest dimension the window fits in.
    pub fn min_extent(&self) -> usize {
        2 * (self.guard + self.train) + 1
    }
}

/// CA-CFAR threshold multiplier for `n` exponentially distributed training
/// cells: `n * (pfa^(-1/n) - 1)`.
pub fn threshold_factor(n: usize, pfa: f64) -> f64 {
    let n = n as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

/// Dense row-major 2-D grid of nonnegative powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * c).collect() }
    }
}

/// One cell passing a 1-D CFAR test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassHit {
    pub index: usize,
    pub noise: f64,
}

/// 1-D cell-averaging CFAR over one line of cells. `prefix` is scratch for
/// the running sums.
fn ca_pass(cells: &[f64], guard: usize, train: usize, alphas: &[f64], prefix: &mut Vec<f64>, out: &mut Vec<PassHit>) {
    let len = cells.len();
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in cells {
        acc += v;
        prefix.push(acc);
    }
    for (i, &cell) in cells.iter().enumerate() {
        // Leading window [i - guard - train, i - guard), trailing window
        // (i + guard, i + guard + train], both clipped to the line.
        let lo = (i.saturating_sub(guard + train), i.saturating_sub(guard));
        let hi = ((i + guard + 1).min(len), (i + guard + train + 1).min(len));
        let count = (lo.1 - lo.0) + (hi.1 - hi.0);
        if count == 0 {
            continue;
        }
        let sum = (prefix[lo.1] - prefix[lo.0]) + (prefix[hi.1] - prefix[hi.0]);
        let noise = sum / count as f64;
        if cell > alphas[count] * noise {
            out.push(PassHit { index: i, noise });
        }
    }
}

fn alpha_table(train: usize, pfa: f64) -> Vec<f64> {
    (0..=2 * train).map(|n| if n == 0 { f64::INFINITY } else { threshold_factor(n, pfa) }).collect()
}

/// 1-D CA-CFAR over a vector of powers.
pub fn ca_cfar_1d<T: Scalar>(cells: &[T], guard: usize, train: usize, pfa: f64) -> Vec<PassHit> {
    let alphas = alpha_table(train, pfa);
    let line: Vec<f64> = cells.iter().map(|v| v.as_f64()).collect();
    let mut out = Vec::new();
    ca_pass(&line, guard, train, &alphas, &mut Vec::new(), &mut out);
    out
}

/// A cell that survived both passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarHit {
    /// Column (range bin).
    pub col: usize,
    /// Row (Doppler bin).
    pub row: usize,
    /// Cell power over the mean of both passes' noise estimates.
    pub snr: f64,
}

/// Per-pass hit masks, exposed for false-alarm statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PassMasks {
    /// Noise estimate where the along-columns (range) pass fired.
    pub along_cols: Vec<Option<f64>>,
    /// Noise estimate where the along-rows (Doppler) pass fired.
    pub along_rows: Vec<Option<f64>>,
}

impl PassMasks {
    pub fn along_cols_count(&self) -> usize {
        self.along_cols.iter().filter(|v| v.is_some()).count()
    }

    pub fn along_rows_count(&self) -> usize {
        self.along_rows.iter().filter(|v| v.is_some()).count()
    }
}

/// Runs both passes. Rows are Doppler bins, columns are range bins.
pub fn cfar_passes<T: Scalar>(map: &Grid<T>, params: &CfarParams) -> Result<PassMasks, DspError> {
    params.check()?;
    let needed = params.min_extent();
    if map.rows < needed || map.cols < needed {
        return Err(DspError::MapTooSmall { rows: map.rows, cols: map.cols, needed });
    }
    let alphas = alpha_table(params.train, params.pfa);
    let n = map.rows * map.cols;
    let mut along_cols = vec![None; n];
    let mut along_rows = vec![None; n];
    let mut hits = Vec::new();
    let (mut line, mut prefix) = (Vec::with_capacity(map.cols.max(map.rows)), Vec::new());
    for r in 0..map.rows {
        hits.clear();
        line.clear();
        line.extend(map.data[r * map.cols..][..map.cols].iter().map(|v| v.as_f64()));
        ca_pass(&line, params.guard, params.train, &alphas, &mut prefix, &mut hits);
        for h in &hits {
            along_cols[r * map.cols + h.index] = Some(h.noise);
        }
    }
    for c in 0..map.cols {
        hits.clear();
        line.clear();
        line.extend((0..map.rows).map(|r| map.get(r, c).as_f64()));
        ca_pass(&line, params.guard, params.train, &alphas, &mut prefix, &mut hits);
        for h in &hits {
            along_rows[h.index * map.cols + c] = Some(h.noise);
        }
    }
    Ok(PassMasks { along_cols, along_rows })
}

/// Two-pass CA-CFAR detection, hits ordered by (row, col).
pub fn cfar_detect<T: Scalar>(map: &Grid<T>, params: &CfarParams) -> Result<Vec<CfarHit>, DspError> {
    let masks = cfar_passes(map, params)?;
    let mut out = Vec::new();
    for (i, (a, b)) in masks.along_cols.iter().zip(&masks.along_rows).enumerate() {
        if let (Some(na), Some(nb)) = (a, b) {
            let noise = 0.5 * (na + nb);
            let row = i / map.cols;
            let col = i % map.cols;
            out.push(CfarHit { col, row, snr: map.get(row, col).as_f64() / noise });
        }
    }
    Ok(out)
}
