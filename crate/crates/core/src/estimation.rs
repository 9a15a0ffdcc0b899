//! Ordinary least squares for the ARX(p) displacement model.
//!
//! The model regresses each displacement `z[t]` on its `p` predecessors
//! `z[t-1], ..., z[t-p]` with no intercept. Row `r` of the design holds
//! `(z[r+p-1], ..., z[r])` and the response `z[r+p]`, for `r in 0..n-p`.
//!
//! Three interchangeable backends produce the same estimate:
//!
//! * [`Backend::Full`] rebuilds the whole design every call.
//! * [`Backend::Pruned`] drops all-zero lag rows first; they add nothing to
//!   `ZᵀZ` or `ZᵀV`.
//! * [`Backend::Incremental`] keeps `A = ZᵀZ` and `B = ZᵀV` between calls and
//!   patches them after each single-point repair, touching only the `2p`
//!   neighbours of the changed position.

use std::fmt;
use std::str::FromStr;

use crate::error::{RepairError, Result};
use crate::series::{diff, RepairState, TimeSeries};

pub const MAX_ORDER: usize = 8;

/// Absolute pivot magnitude below which the normal equations count as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(RepairError::InvalidOrder(order));
    }
    Ok(())
}

pub(crate) fn check_len(len: usize, order: usize) -> Result<()> {
    check_order(order)?;
    if len <= order {
        return Err(RepairError::TooShort { len, order });
    }
    Ok(())
}

/// Coefficients `φ_1..φ_p`; the intercept is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    phi: Vec<f64>,
}

impl ModelParams {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        check_order(phi.len())?;
        if let Some(index) = phi.iter().position(|v| !v.is_finite()) {
            return Err(RepairError::NonFinite { index });
        }
        Ok(Self { phi })
    }

    pub fn zeros(order: usize) -> Result<Self> {
        Self::new(vec![0.0; order])
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn is_zero(&self) -> bool {
        self.phi.iter().all(|&v| v == 0.0)
    }

    /// `Σ φ_i · lags[t-1-i]`, the model's prediction for position `t`.
    #[inline]
    pub fn predict(&self, lags: &[f64], t: usize) -> f64 {
        self.phi
            .iter()
            .enumerate()
            .map(|(i, phi)| phi * lags[t - 1 - i])
            .sum()
    }
}

/// Lagged design `Z` and response `V`, optionally with zero rows pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    order: usize,
    len: usize,
    z: Vec<f64>,
    v: Vec<f64>,
    row_origin: Vec<usize>,
}

impl DesignMatrices {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rows(&self) -> usize {
        self.v.len()
    }

    /// Lag row `(z[r+p-1], ..., z[r])` for the `row`-th retained row.
    pub fn lags(&self, row: usize) -> &[f64] {
        &self.z[row * self.order..(row + 1) * self.order]
    }

    pub fn responses(&self) -> &[f64] {
        &self.v
    }

    /// Row number in the unpruned layout for each retained row. Equals the
    /// position of the oldest lag in that row.
    pub fn row_origin(&self) -> &[usize] {
        &self.row_origin
    }
}

pub fn build_design_matrices(z: &[f64], order: usize, prune: bool) -> Result<DesignMatrices> {
    check_len(z.len(), order)?;
    let rows = z.len() - order;
    let mut design = DesignMatrices {
        order,
        len: z.len(),
        z: Vec::with_capacity(if prune { 0 } else { rows * order }),
        v: Vec::with_capacity(if prune { 0 } else { rows }),
        row_origin: Vec::new(),
    };
    for r in 0..rows {
        let window = &z[r..r + order];
        if prune && window.iter().all(|&v| v == 0.0) {
            continue;
        }
        design.z.extend(window.iter().rev());
        design.v.push(z[r + order]);
        design.row_origin.push(r);
    }
    Ok(design)
}

/// `A = ZᵀZ` (symmetric, row-major) and `B = ZᵀV`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    order: usize,
    len: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl NormalEquations {
    pub fn zeros(order: usize, len: usize) -> Result<Self> {
        check_len(len, order)?;
        Ok(Self {
            order,
            len,
            a: vec![0.0; order * order],
            b: vec![0.0; order],
        })
    }

    /// Builds from explicit matrices. `a` is row-major `order × order`.
    pub fn from_parts(order: usize, len: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_len(len, order)?;
        if a.len() != order * order {
            return Err(RepairError::LengthMismatch {
                expected: order * order,
                actual: a.len(),
            });
        }
        if b.len() != order {
            return Err(RepairError::LengthMismatch {
                expected: order,
                actual: b.len(),
            });
        }
        Ok(Self { order, len, a, b })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.order + j]
    }

    pub fn b(&self, i: usize) -> f64 {
        self.b[i]
    }

    pub fn a_matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn b_vector(&self) -> &[f64] {
        &self.b
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.order).all(|i| (0..i).all(|j| self.a(i, j) == self.a(j, i)))
    }

    /// Patches `A` and `B` for a change of `z[r]` from `z_before[r]` to
    /// `z_new`, where `z_before` is the sequence before the change.
    ///
    /// Returns the number of sequence elements read, which is at most
    /// `2p + 1` regardless of the series length.
    pub fn apply_change(&mut self, z_before: &[f64], r: usize, z_new: f64) -> Result<usize> {
        let n = self.len;
        let p = self.order;
        if z_before.len() != n {
            return Err(RepairError::LengthMismatch {
                expected: n,
                actual: z_before.len(),
            });
        }
        if r >= n {
            return Err(RepairError::IndexOutOfRange { index: r, len: n });
        }
        if !z_new.is_finite() {
            return Err(RepairError::NonFinite { index: r });
        }

        // Neighbourhood z[r-p ..= r+p], clipped to the series.
        let lo = r.saturating_sub(p);
        let hi = (r + p).min(n - 1);
        let window = &z_before[lo..=hi];
        let at = |pos: usize| window[pos - lo];
        let z_old = at(r);
        let delta = z_new - z_old;
        if delta == 0.0 {
            return Ok(window.len());
        }

        // Column c carries lag c+1: A[c][d] = Σ_{l=p-1-c}^{n-2-c} z[l]·z[l+c-d].
        let in_a_range = |c: usize| r + c + 1 >= p && r + c + 2 <= n;
        for c in 0..p {
            if in_a_range(c) {
                self.a[c * p + c] += z_new * z_new - z_old * z_old;
            }
            for d in c + 1..p {
                let gap = d - c;
                let mut weight = 0.0;
                // term l = r pairs with z[r-gap]
                if in_a_range(c) {
                    weight += at(r - gap);
                }
                // term l = r+gap pairs with z[r+gap]
                if in_a_range(d) {
                    weight += at(r + gap);
                }
                if weight != 0.0 {
                    let upd = delta * weight;
                    self.a[c * p + d] += upd;
                    self.a[d * p + c] += upd;
                }
            }
        }

        // B[c] = Σ_{l=p}^{n-1} z[l]·z[l-k], k = c+1.
        for c in 0..p {
            let k = c + 1;
            let mut weight = 0.0;
            if r >= p {
                weight += at(r - k);
            }
            if r + k >= p && r + k < n {
                weight += at(r + k);
            }
            self.b[c] += delta * weight;
        }

        Ok(window.len())
    }
}

pub fn normal_from_design(design: &DesignMatrices) -> NormalEquations {
    let p = design.order;
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for row in 0..design.rows() {
        let lags = design.lags(row);
        let v = design.v[row];
        for i in 0..p {
            b[i] += lags[i] * v;
            for j in i..p {
                a[i * p + j] += lags[i] * lags[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[i * p + j] = a[j * p + i];
        }
    }
    NormalEquations {
        order: p,
        len: design.len,
        a,
        b,
    }
}

/// Solves `A·φ = B` by Gaussian elimination with partial pivoting.
pub fn solve_normal(ne: &NormalEquations) -> Result<ModelParams> {
    let p = ne.order;
    let mut a = ne.a.clone();
    let mut b = ne.b.clone();
    for col in 0..p {
        let (pivot_row, pivot) =
            (col..p)
                .map(|row| (row, a[row * p + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot.is_nan() || pivot < PIVOT_TOLERANCE {
            return Err(RepairError::SingularSystem { pivot });
        }
        if pivot_row != col {
            for k in 0..p {
                a.swap(col * p + k, pivot_row * p + k);
            }
            b.swap(col, pivot_row);
        }
        let diag = a[col * p + col];
        for row in col + 1..p {
            let factor = a[row * p + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..p {
                a[row * p + k] -= factor * a[col * p + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut phi = vec![0.0; p];
    for row in (0..p).rev() {
        let tail: f64 = (row + 1..p).map(|k| a[row * p + k] * phi[k]).sum();
        phi[row] = (b[row] - tail) / a[row * p + row];
    }
    ModelParams::new(phi).map_err(|_| RepairError::SingularSystem { pivot: 0.0 })
}

/// Returns the normal equations after changing `z[r]` to `z_new`.
pub fn incremental_update(
    ne: &NormalEquations,
    z_before: &[f64],
    r: usize,
    z_new: f64,
) -> Result<NormalEquations> {
    let mut next = ne.clone();
    next.apply_change(z_before, r, z_new)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Full,
    Pruned,
    #[default]
    Incremental,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Full, Backend::Pruned, Backend::Incremental];

    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Full => "full",
            Backend::Pruned => "pruned",
            Backend::Incremental => "incremental",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = RepairError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Backend::Full),
            "pruned" => Ok(Backend::Pruned),
            "incremental" => Ok(Backend::Incremental),
            other => Err(RepairError::InvalidParameter(format!(
                "unknown backend '{other}' (expected full, pruned or incremental)"
            ))),
        }
    }
}

/// Per-job estimation state. Owns the cached normal equations for the
/// incremental backend.
///
/// The caller reports every single-point change through
/// [`Estimator::record_change`] *before* writing the new value into the diff
/// sequence.
#[derive(Debug, Clone)]
pub struct Estimator {
    order: usize,
    backend: Backend,
    cache: Option<NormalEquations>,
    touched: usize,
}

impl Estimator {
    pub fn new(order: usize, backend: Backend) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            order,
            backend,
            cache: None,
            touched: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Cached normal equations (incremental backend only).
    pub fn normal_equations(&self) -> Option<&NormalEquations> {
        self.cache.as_ref()
    }

    /// Elements read by the most recent incremental update.
    pub fn last_touched(&self) -> usize {
        self.touched
    }

    pub fn normal_equations_for(&mut self, z: &[f64]) -> Result<NormalEquations> {
        match self.backend {
            Backend::Full => Ok(normal_from_design(&build_design_matrices(
                z, self.order, false,
            )?)),
            Backend::Pruned => Ok(normal_from_design(&build_design_matrices(
                z, self.order, true,
            )?)),
            Backend::Incremental => {
                if let Some(cache) = &self.cache {
                    if cache.len != z.len() {
                        return Err(RepairError::LengthMismatch {
                            expected: cache.len,
                            actual: z.len(),
                        });
                    }
                    return Ok(cache.clone());
                }
                let ne = normal_from_design(&build_design_matrices(z, self.order, true)?);
                self.cache = Some(ne.clone());
                Ok(ne)
            }
        }
    }

    /// Estimates `φ` for the current diff sequence.
    pub fn estimate(&mut self, z: &[f64]) -> Result<ModelParams> {
        match (self.backend, &self.cache) {
            (Backend::Incremental, Some(cache)) if cache.len == z.len() => solve_normal(cache),
            _ => solve_normal(&self.normal_equations_for(z)?),
        }
    }

    /// Reports that `z[r]` is about to change to `z_new`.
    pub fn record_change(&mut self, z_before: &[f64], r: usize, z_new: f64) -> Result<()> {
        if let (Backend::Incremental, Some(cache)) = (self.backend, self.cache.as_mut()) {
            self.touched = cache.apply_change(z_before, r, z_new)?;
        }
        Ok(())
    }
}

/// Estimates `φ` from the displacements of `state` against the observations.
pub fn estimate(
    x: &TimeSeries,
    state: &RepairState,
    estimator: &mut Estimator,
) -> Result<ModelParams> {
    let z = diff(state, x)?;
    estimator.estimate(&z)
}
