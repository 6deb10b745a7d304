//! Dimension-adaptive pooling: any `L x C` map to a fixed `target_length x target_channels` grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DapSpec {
    pub target_length: usize,
    pub target_channels: usize,
    #[serde(default)]
    pub pooling: Pooling,
}

impl DapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_length == 0 || self.target_channels == 0 {
            return Err(Error::Param("DAP targets must be >= 1".into()));
        }
        Ok(())
    }

    pub fn output_len(&self) -> usize {
        self.target_length * self.target_channels
    }
}

/// Bin `i` of `out` bins over `n` items: `[floor(i n / out), ceil((i+1) n / out))`.
#[inline]
pub fn bin(i: usize, n: usize, out: usize) -> (usize, usize) {
    let lo = i * n / out;
    let hi = ((i + 1) * n).div_ceil(out);
    (lo, hi.max(lo + 1))
}

pub fn dap_pool(input: &Matrix, spec: &DapSpec) -> Result<Matrix> {
    spec.validate()?;
    if input.rows == 0 || input.cols == 0 {
        return Err(Error::Param("DAP input must be at least 1 x 1".into()));
    }
    let mut out = Matrix::zeros(spec.target_length, spec.target_channels);
    pool_into(
        |r, c| input.get(r, c),
        input.rows,
        input.cols,
        spec,
        |i, j, v, _| out.set(i, j, v),
    );
    Ok(out)
}

/// Shared kernel: `read(row, col)`, `write(out_row, out_col, value, (src_row, src_col))`
/// where the source cell is the max location (max) or unused (mean).
pub(crate) fn pool_into<R, W>(read: R, rows: usize, cols: usize, spec: &DapSpec, mut write: W)
where
    R: Fn(usize, usize) -> f64,
    W: FnMut(usize, usize, f64, (usize, usize)),
{
    for i in 0..spec.target_length {
        let (r0, r1) = bin(i, rows, spec.target_length);
        for j in 0..spec.target_channels {
            let (c0, c1) = bin(j, cols, spec.target_channels);
            match spec.pooling {
                Pooling::Max => {
                    let mut best = (f64::NEG_INFINITY, (r0, c0));
                    for r in r0..r1 {
                        for c in c0..c1 {
                            let v = read(r, c);
                            if v > best.0 {
                                best = (v, (r, c));
                            }
                        }
                    }
                    write(i, j, best.0, best.1);
                }
                Pooling::Mean => {
                    let mut s = 0.0;
                    for r in r0..r1 {
                        for c in c0..c1 {
                            s += read(r, c);
                        }
                    }
                    write(i, j, s / ((r1 - r0) * (c1 - c0)) as f64, (r0, c0));
                }
            }
        }
    }
}
