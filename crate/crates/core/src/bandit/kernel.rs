//! Inverse of the gradient-feature kernel `U = lambda I + sum g g^T / m`,
//! kept current with Sherman-Morrison rank-one updates.
//!
//! Storage is the packed upper triangle (row `i` holds columns `i..p`), so
//! the matrix is symmetric by construction and each update touches
//! `p (p + 1) / 2` entries.

use serde::{Deserialize, Serialize};

use super::network::SparseGrad;
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const SM_DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInverse {
    p: usize,
    packed: Vec<f64>,
}

/// Work computed before a rank-one update is committed.
#[derive(Debug, Clone)]
pub struct PendingUpdate {
    scaled: Vec<f64>,
}

/// Kernel storage policy. `Auto` keeps the exact inverse while it fits in
/// [`FULL_KERNEL_MAX_PARAMS`] parameters and falls back to the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    #[default]
    Auto,
    Full,
    Diagonal,
}

/// Largest `p` stored as a full inverse under [`KernelMode::Auto`] (about 270 MB packed).
pub const FULL_KERNEL_MAX_PARAMS: usize = 8192;

impl KernelMode {
    pub fn resolve(self, p: usize) -> KernelMode {
        match self {
            KernelMode::Auto if p <= FULL_KERNEL_MAX_PARAMS => KernelMode::Full,
            KernelMode::Auto => KernelMode::Diagonal,
            m => m,
        }
    }
}

/// Diagonal of `U`, stored inverted: `1 / (lambda + sum g_i^2 / m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalKernel {
    inv: Vec<f64>,
}

impl DiagonalKernel {
    pub fn new(p: usize, lambda: f64) -> Self {
        Self {
            inv: vec![1.0 / lambda; p],
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.inv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Full(KernelInverse),
    Diagonal(DiagonalKernel),
}

#[derive(Debug, Clone)]
pub enum KernelUpdate {
    Full(PendingUpdate),
    Diagonal(Vec<(usize, f64)>),
}

impl Kernel {
    pub fn new(mode: KernelMode, p: usize, lambda: f64) -> Self {
        match mode.resolve(p) {
            KernelMode::Diagonal => Kernel::Diagonal(DiagonalKernel::new(p, lambda)),
            _ => Kernel::Full(KernelInverse::new(p, lambda)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Kernel::Full(k) => k.dim(),
            Kernel::Diagonal(k) => k.inv.len(),
        }
    }

    pub fn mode(&self) -> KernelMode {
        match self {
            Kernel::Full(_) => KernelMode::Full,
            Kernel::Diagonal(_) => KernelMode::Diagonal,
        }
    }

    pub fn as_full(&self) -> Option<&KernelInverse> {
        match self {
            Kernel::Full(k) => Some(k),
            Kernel::Diagonal(_) => None,
        }
    }

    /// Entry `(i, j)` of the stored inverse (zero off the diagonal in diagonal mode).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Kernel::Full(k) => k.get(i, j),
            Kernel::Diagonal(k) if i == j => k.inv[i],
            Kernel::Diagonal(_) => 0.0,
        }
    }

    pub fn quad_form(&self, g: &SparseGrad) -> f64 {
        match self {
            Kernel::Full(k) => k.quad_form(g),
            Kernel::Diagonal(k) => g.idx.iter().zip(&g.val).map(|(&i, &v)| v * v * k.inv[i]).sum(),
        }
    }

    pub fn prepare_update(&self, g: &SparseGrad, m: f64, exec: Execution) -> Result<KernelUpdate> {
        match self {
            Kernel::Full(k) => k.prepare_update(g, m, exec).map(KernelUpdate::Full),
            Kernel::Diagonal(k) => {
                let mut out = Vec::with_capacity(g.idx.len());
                for (&i, &v) in g.idx.iter().zip(&g.val) {
                    if v == 0.0 {
                        continue;
                    }
                    let inv = 1.0 / (1.0 / k.inv[i] + v * v / m);
                    if !inv.is_finite() || inv <= 0.0 {
                        return Err(Error::Numerical(format!("diagonal kernel entry {inv:e}")));
                    }
                    out.push((i, inv));
                }
                Ok(KernelUpdate::Diagonal(out))
            }
        }
    }

    pub fn commit(&mut self, update: KernelUpdate, exec: Execution) {
        match (self, update) {
            (Kernel::Full(k), KernelUpdate::Full(u)) => k.commit(u, exec),
            (Kernel::Diagonal(k), KernelUpdate::Diagonal(u)) => {
                for (i, v) in u {
                    k.inv[i] = v;
                }
            }
            _ => unreachable!("update prepared by a different kernel kind"),
        }
    }
}

impl KernelInverse {
    /// `(1/lambda) I`, i.e. `U = lambda I`.
    pub fn new(p: usize, lambda: f64) -> Self {
        let mut packed = vec![0.0; p * (p + 1) / 2];
        for i in 0..p {
            packed[Self::row_start(p, i)] = 1.0 / lambda;
        }
        Self { p, packed }
    }

    pub fn from_packed(p: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != p * (p + 1) / 2 {
            return Err(Error::Shape {
                expected: p * (p + 1) / 2,
                got: packed.len(),
            });
        }
        Ok(Self { p, packed })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    #[inline]
    fn row_start(p: usize, i: usize) -> usize {
        i * (2 * p + 1 - i) / 2
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        Self::row_start(self.p, a) + (b - a)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[self.offset(i, j)]
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = self.get(i, j);
            }
        }
        out
    }

    /// `g^T U^{-1} g` for a sparse `g`.
    pub fn quad_form(&self, g: &SparseGrad) -> f64 {
        let mut acc = 0.0;
        for (a, (&i, &gi)) in g.idx.iter().zip(&g.val).enumerate() {
            if gi == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for (&j, &gj) in g.idx[a..].iter().zip(&g.val[a..]) {
                row += self.get(i, j) * gj;
            }
            // off-diagonal terms appear twice
            acc += gi * (2.0 * row - self.get(i, i) * gi);
        }
        acc
    }

    /// Validates the Sherman-Morrison step for `U + g g^T / m` without mutating.
    pub fn prepare_update(&self, g: &SparseGrad, m: f64, exec: Execution) -> Result<PendingUpdate> {
        let active: Vec<(usize, f64)> = g
            .idx
            .iter()
            .zip(&g.val)
            .filter(|(_, v)| **v != 0.0)
            .map(|(&i, &v)| (i, v))
            .collect();
        let u = exec.map_range(self.p, |r| active.iter().map(|&(c, v)| self.get(r, c) * v).sum::<f64>());
        let gu: f64 = active.iter().map(|&(c, v)| v * u[c]).sum();
        let denom = 1.0 + gu / m;
        if !denom.is_finite() || denom <= SM_DENOMINATOR_FLOOR {
            return Err(Error::Numerical(format!(
                "Sherman-Morrison denominator {denom:e}"
            )));
        }
        // w w^T = u u^T / (m * denom); products w_i w_j commute, keeping symmetry exact.
        let s = (m * denom).sqrt();
        let scaled = u.into_iter().map(|v| v / s).collect::<Vec<_>>();
        if scaled.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite kernel update".into()));
        }
        Ok(PendingUpdate { scaled })
    }

    pub fn commit(&mut self, pending: PendingUpdate, exec: Execution) {
        let w = &pending.scaled;
        if w.iter().all(|&v| v == 0.0) {
            return;
        }
        let p = self.p;
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(p);
        let mut rest: &mut [f64] = &mut self.packed;
        for i in 0..p {
            let (row, tail) = rest.split_at_mut(p - i);
            rows.push((i, row));
            rest = tail;
        }
        let apply = |(i, row): &mut (usize, &mut [f64])| {
            let wi = w[*i];
            if wi == 0.0 {
                return;
            }
            for (r, &wj) in row.iter_mut().zip(&w[*i..]) {
                *r -= wi * wj;
            }
        };
        exec.for_each_mut(&mut rows, apply);
    }

    pub fn rank_one_update(&mut self, g: &SparseGrad, m: f64, exec: Execution) -> Result<()> {
        let pending = self.prepare_update(g, m, exec)?;
        self.commit(pending, exec);
        Ok(())
    }
}
