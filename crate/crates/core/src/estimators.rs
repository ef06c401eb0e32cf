//! Weight estimation from sense-antenna voltages.
//!
//! Three estimators recover the real reference weights `w` from a measured
//! voltage vector `v ≈ V_R·w`:
//!
//! * matrix inversion on a square sensor subset chosen by maximum 1-entropy,
//! * least squares over all sensors, `w = Re{V_R† V_R}⁻¹ Re{V_R† v}`,
//! * least squares constrained to `wᵀw = 1`, solved through the Lagrange
//!   condition `(B + λI)w = c` with a safeguarded secular-equation root find.

use std::cmp::Ordering;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::vsh::OrientationWeights;

/// Condition numbers above this are treated as singular.
pub const DEFAULT_CONDITION_CEILING: f64 = 1e12;

/// Largest number of subsets enumerated by default in exhaustive mode.
pub const DEFAULT_SUBSET_BUDGET: u64 = 1_000_000;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `V_R`: sense-antenna voltages (rows) for each reference antenna (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    v_r: CMatrix,
    sense_ids: Vec<String>,
}

impl CalibrationMatrix {
    pub fn new(v_r: CMatrix, sense_ids: Vec<String>) -> Result<Self> {
        if sense_ids.len() != v_r.nrows() {
            return Err(Error::DimensionMismatch {
                context: "calibration sensor labels",
                expected: v_r.nrows(),
                found: sense_ids.len(),
            });
        }
        if v_r.ncols() == 0 || v_r.nrows() < v_r.ncols() {
            return Err(Error::InvalidConfig(format!(
                "calibration matrix needs n_sense >= n_ref >= 1, got {}x{}",
                v_r.nrows(),
                v_r.ncols()
            )));
        }
        if v_r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidConfig("calibration matrix has non-finite entries".into()));
        }
        Ok(Self { v_r, sense_ids })
    }

    /// Labels `s1..sN`.
    pub fn with_default_ids(v_r: CMatrix) -> Result<Self> {
        let ids = default_sense_ids(v_r.nrows());
        Self::new(v_r, ids)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v_r
    }

    pub fn sense_ids(&self) -> &[String] {
        &self.sense_ids
    }

    pub fn n_sense(&self) -> usize {
        self.v_r.nrows()
    }

    pub fn n_ref(&self) -> usize {
        self.v_r.ncols()
    }

    /// Rows `indices` (in the given order) as a new calibration matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_sense()) {
            return Err(Error::InvalidSubsetSize { k: bad, available: self.n_sense() });
        }
        let rows = self.v_r.select_rows(indices.iter());
        let ids = indices.iter().map(|&i| self.sense_ids[i].clone()).collect();
        Self::new(rows, ids)
    }
}

pub fn default_sense_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    v: CVector,
    sense_ids: Vec<String>,
}

impl MeasurementVector {
    pub fn new(v: CVector, sense_ids: Vec<String>) -> Result<Self> {
        if sense_ids.len() != v.len() {
            return Err(Error::DimensionMismatch {
                context: "measurement sensor labels",
                expected: v.len(),
                found: sense_ids.len(),
            });
        }
        Ok(Self { v, sense_ids })
    }

    pub fn with_default_ids(v: CVector) -> Self {
        let ids = default_sense_ids(v.len());
        Self { v, sense_ids: ids }
    }

    pub fn vector(&self) -> &CVector {
        &self.v
    }

    pub fn sense_ids(&self) -> &[String] {
        &self.sense_ids
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.v.len()) {
            return Err(Error::InvalidSubsetSize { k: bad, available: self.v.len() });
        }
        let v = CVector::from_iterator(indices.len(), indices.iter().map(|&i| self.v[i]));
        let ids = indices.iter().map(|&i| self.sense_ids[i].clone()).collect();
        Ok(Self { v, sense_ids: ids })
    }
}

/// `M_×`: measured = `M_×`·true voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    m: CMatrix,
}

impl CrosstalkMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "crosstalk matrix (must be square)",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMatrix::identity(n, n) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Whether every row's diagonal magnitude exceeds the sum of its off-diagonal magnitudes.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.m.row_iter().enumerate().all(|(i, row)| {
            let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, z)| z.norm()).sum();
            row[i].norm() > off
        })
    }
}

/// `T = V_R · A_R⁻¹`: sense voltages per unit VSH coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    t: CMatrix,
}

impl ChannelMatrix {
    pub fn new(t: CMatrix) -> Self {
        Self { t }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.t
    }

    pub fn n_sense(&self) -> usize {
        self.t.nrows()
    }

    pub fn n_vsh(&self) -> usize {
        self.t.ncols()
    }
}

/// A sensor subset and its quality metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    /// Zero-based row indices, strictly increasing.
    pub indices: Vec<usize>,
    pub h1_bits: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetStrategy {
    /// Enumerate all subsets; fails when there are more than `budget`.
    Exhaustive { budget: u64 },
    Greedy,
}

impl Default for SubsetStrategy {
    fn default() -> Self {
        SubsetStrategy::Exhaustive { budget: DEFAULT_SUBSET_BUDGET }
    }
}

fn singular_values(v: &CMatrix) -> DVector<f64> {
    v.clone().svd(false, false).singular_values
}

/// Singular values below this fraction of the largest count as zero.
fn rank_tolerance(v: &CMatrix) -> f64 {
    v.nrows().max(v.ncols()) as f64 * f64::EPSILON
}

/// Ratio of the largest to the smallest singular value; `+∞` when numerically
/// rank deficient.
pub fn condition_number(v: &CMatrix) -> Result<f64> {
    let s = singular_values(v);
    let max = s.max();
    let min = s.min();
    if s.is_empty() || max == 0.0 {
        return Err(Error::ZeroMatrix("condition-number input"));
    }
    if min <= rank_tolerance(v) * max {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// 1-entropy `H₁ = ½·log₂ det(V·V†)` in bits.
///
/// Evaluated as `Σ log₂ σᵢ` over the singular values, which equals the
/// determinant form when `V` has no more rows than columns. For tall matrices
/// the smaller Gram matrix `V†·V` is used, and square input takes
/// `log₂|det V|` from a full-pivot LU. Numerically rank-deficient input
/// returns `-∞`.
pub fn one_entropy(v: &CMatrix) -> f64 {
    if v.is_empty() {
        return f64::NEG_INFINITY;
    }
    let s = singular_values(v);
    let max = s.max();
    if max.is_nan() || max <= 0.0 || s.min() <= rank_tolerance(v) * max {
        return f64::NEG_INFINITY;
    }
    if v.is_square() {
        let lu = v.clone().full_piv_lu();
        return lu.u().diagonal().iter().map(|d| d.norm().log2()).sum();
    }
    s.iter().map(|x| x.log2()).sum()
}

/// `v = M_×⁻¹ · v_m`.
pub fn correct_crosstalk(
    m: &CrosstalkMatrix,
    v_m: &MeasurementVector,
    ceiling: f64,
) -> Result<MeasurementVector> {
    if m.dim() != v_m.v.len() {
        return Err(Error::DimensionMismatch {
            context: "crosstalk matrix vs measurement",
            expected: m.dim(),
            found: v_m.v.len(),
        });
    }
    let lu = checked_lu(&m.m, "crosstalk matrix", ceiling)?;
    let v = lu.solve(&v_m.v).ok_or(singular("crosstalk matrix", f64::INFINITY, &m.m))?;
    MeasurementVector::new(v, v_m.sense_ids.clone())
}

/// Applies [`correct_crosstalk`] to every column of a calibration matrix.
pub fn correct_crosstalk_calibration(
    m: &CrosstalkMatrix,
    v_r: &CalibrationMatrix,
    ceiling: f64,
) -> Result<CalibrationMatrix> {
    if m.dim() != v_r.n_sense() {
        return Err(Error::DimensionMismatch {
            context: "crosstalk matrix vs calibration matrix",
            expected: m.dim(),
            found: v_r.n_sense(),
        });
    }
    let lu = checked_lu(&m.m, "crosstalk matrix", ceiling)?;
    let corrected = lu.solve(&v_r.v_r).ok_or(singular("crosstalk matrix", f64::INFINITY, &m.m))?;
    CalibrationMatrix::new(corrected, v_r.sense_ids.clone())
}

fn singular(matrix: &'static str, condition: f64, v: &CMatrix) -> Error {
    Error::Singular { matrix, condition, h1_bits: one_entropy(v) }
}

fn checked_lu(
    m: &CMatrix,
    name: &'static str,
    ceiling: f64,
) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
    let cond = condition_number(m).unwrap_or(f64::INFINITY);
    if cond > ceiling {
        return Err(singular(name, cond, m));
    }
    Ok(m.clone().lu())
}

/// Number of `k`-subsets of `n` items.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Orders selections by H₁ descending, then lexicographically ascending indices.
fn rank_order(a: &SubsetSelection, b: &SubsetSelection) -> Ordering {
    b.h1_bits
        .total_cmp(&a.h1_bits)
        .then_with(|| a.indices.cmp(&b.indices))
}

fn evaluate_subset(v_full: &CMatrix, indices: Vec<usize>) -> SubsetSelection {
    let rows = v_full.select_rows(indices.iter());
    let h1_bits = one_entropy(&rows);
    let condition = condition_number(&rows).unwrap_or(f64::INFINITY);
    SubsetSelection { indices, h1_bits, condition }
}

fn check_subset_args(v_full: &CalibrationMatrix, k: usize) -> Result<()> {
    if k == 0 || k > v_full.n_sense() {
        return Err(Error::InvalidSubsetSize { k, available: v_full.n_sense() });
    }
    Ok(())
}

fn enumerate(v_full: &CalibrationMatrix, k: usize, budget: u64) -> Result<Vec<Vec<usize>>> {
    check_subset_args(v_full, k)?;
    let count = binomial(v_full.n_sense(), k);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded { subsets: count, budget });
    }
    Ok((0..v_full.n_sense()).combinations(k).collect())
}

/// Every `k`-row subset, ranked by H₁ (best first; ties by smallest index set).
pub fn rank_subsets(
    v_full: &CalibrationMatrix,
    k: usize,
    budget: u64,
    exec: Execution,
) -> Result<Vec<SubsetSelection>> {
    let subsets = enumerate(v_full, k, budget)?;
    let mut ranked = exec.map(&subsets, |idx| evaluate_subset(&v_full.v_r, idx.clone()));
    ranked.sort_by(rank_order);
    Ok(ranked)
}

/// Picks the `k` sensors maximizing H₁.
pub fn select_subset(
    v_full: &CalibrationMatrix,
    k: usize,
    strategy: SubsetStrategy,
    exec: Execution,
) -> Result<SubsetSelection> {
    let best = match strategy {
        SubsetStrategy::Exhaustive { budget } => {
            let subsets = enumerate(v_full, k, budget)?;
            exec.map_reduce(
                &subsets,
                |idx| evaluate_subset(&v_full.v_r, idx.clone()),
                |a, b| if rank_order(&a, &b) == Ordering::Greater { b } else { a },
            )
        }
        SubsetStrategy::Greedy => Some(greedy_subset(v_full, k)?),
    };
    match best {
        Some(sel) if sel.h1_bits > f64::NEG_INFINITY => Ok(sel),
        _ => Err(Error::Singular {
            matrix: "calibration matrix (every sensor subset)",
            condition: f64::INFINITY,
            h1_bits: f64::NEG_INFINITY,
        }),
    }
}

fn greedy_subset(v_full: &CalibrationMatrix, k: usize) -> Result<SubsetSelection> {
    check_subset_args(v_full, k)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<SubsetSelection> = None;
        for row in (0..v_full.n_sense()).filter(|r| !chosen.contains(r)) {
            let mut trial = chosen.clone();
            trial.push(row);
            trial.sort_unstable();
            let cand = SubsetSelection {
                h1_bits: one_entropy(&v_full.v_r.select_rows(trial.iter())),
                indices: trial,
                condition: f64::NAN,
            };
            // candidates arrive in increasing row order, so strict > keeps the smallest on ties
            if best.as_ref().is_none_or(|b| cand.h1_bits > b.h1_bits) {
                best = Some(cand);
            }
        }
        chosen = best.expect("k <= n_sense leaves a candidate").indices;
    }
    Ok(evaluate_subset(&v_full.v_r, chosen))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub weights: OrientationWeights,
    /// Norm of the imaginary part of `V_R⁻¹·v`, discarded from the weights.
    pub imag_norm: f64,
}

/// Matrix-inversion estimate `Re{V_R⁻¹ · v}` for a square `V_R`.
pub fn mi_estimate(v_r: &CalibrationMatrix, v: &MeasurementVector, ceiling: f64) -> Result<MiEstimate> {
    if !v_r.v_r.is_square() {
        return Err(Error::DimensionMismatch {
            context: "matrix inversion needs a square V_R (rows vs columns)",
            expected: v_r.n_ref(),
            found: v_r.n_sense(),
        });
    }
    check_measurement(v_r, v)?;
    let lu = checked_lu(&v_r.v_r, "calibration matrix V_R", ceiling)?;
    let w = lu
        .solve(&v.v)
        .ok_or(singular("calibration matrix V_R", f64::INFINITY, &v_r.v_r))?;
    let weights = OrientationWeights::from_vector(&w.map(|z| z.re))?;
    let imag_norm = w.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    Ok(MiEstimate { weights, imag_norm })
}

fn check_measurement(v_r: &CalibrationMatrix, v: &MeasurementVector) -> Result<()> {
    if v.v.len() != v_r.n_sense() {
        return Err(Error::DimensionMismatch {
            context: "measurement vs calibration rows",
            expected: v_r.n_sense(),
            found: v.v.len(),
        });
    }
    Ok(())
}

/// `B = Re{V_R†V_R}` and `c = Re{V_R†v}`.
pub fn normal_equations(v_r: &CalibrationMatrix, v: &MeasurementVector) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_measurement(v_r, v)?;
    let adj = v_r.v_r.adjoint();
    let b = (&adj * &v_r.v_r).map(|z| z.re);
    let c = (&adj * &v.v).map(|z| z.re);
    Ok((b, c))
}

/// `‖V_R·w − v‖` for real weights.
pub fn residual_norm(v_r: &CalibrationMatrix, w: &OrientationWeights, v: &MeasurementVector) -> f64 {
    let wc = w.to_vector().map(|x| Complex64::new(x, 0.0));
    (&v_r.v_r * wc - &v.v).norm()
}

/// Unconstrained least squares over real weights.
pub fn lse_estimate(v_r: &CalibrationMatrix, v: &MeasurementVector) -> Result<OrientationWeights> {
    let (b, c) = normal_equations(v_r, v)?;
    let eig = b.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
    if cond.is_nan() || cond > DEFAULT_CONDITION_CEILING {
        return Err(singular("normal matrix Re{V_R†V_R}", cond, &v_r.v_r));
    }
    let w = b
        .cholesky()
        .ok_or(singular("normal matrix Re{V_R†V_R}", cond, &v_r.v_r))?
        .solve(&c);
    OrientationWeights::from_vector(&w)
}

/// Minimizer of `wᵀBw − 2cᵀw` on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSphereSolution {
    pub w: DVector<f64>,
    /// Lagrange multiplier λ in `(B + λI)w = c`.
    pub multiplier: f64,
    /// The minimizer is not unique (degenerate eigenvector branch).
    pub ambiguous: bool,
}

/// Solves `min wᵀBw − 2cᵀw  s.t.  ‖w‖ = 1` for symmetric positive semidefinite `B`.
///
/// The global minimizer satisfies `(B + λI)w = c` with `λ ≥ −λ_min(B)`. In the
/// eigenbasis `B = QΛQᵀ`, `d = Qᵀc`, the constraint becomes the secular
/// equation `Σ dᵢ²/(λᵢ + λ)² = 1`, monotone on `(−λ_min, ∞)`. Its root is
/// bracketed by `(−λ_min, ‖c‖ − λ_min]` and found by Newton steps on
/// `1/‖w(λ)‖ − 1` with bisection fallback. When `c` has no component along the
/// smallest eigenvector and the remaining solution lies inside the sphere, the
/// minimizer is completed along that eigenvector.
pub fn solve_unit_sphere(b: &DMatrix<f64>, c: &DVector<f64>) -> UnitSphereSolution {
    let n = c.len();
    let SymmetricEigen { eigenvalues, eigenvectors } = SymmetricEigen::new(b.clone());
    let d = eigenvectors.transpose() * c;
    let c_norm = c.norm();
    let (i_min, &lam_min) = eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(Ordering::Equal))
        .expect("non-empty system");
    let scale = eigenvalues.amax().max(c_norm).max(f64::MIN_POSITIVE);
    let q_min = canonical_sign(eigenvectors.column(i_min).into_owned());

    if c_norm <= f64::EPSILON * scale {
        return UnitSphereSolution { w: q_min, multiplier: -lam_min, ambiguous: true };
    }

    let degenerate: Vec<bool> =
        eigenvalues.iter().map(|&l| l - lam_min <= 1e-12 * scale).collect();
    let d_deg = (0..n).filter(|&i| degenerate[i]).map(|i| d[i] * d[i]).sum::<f64>().sqrt();
    if d_deg <= 1e-12 * c_norm {
        let mut w_part = DVector::zeros(n);
        for i in (0..n).filter(|&i| !degenerate[i]) {
            w_part += eigenvectors.column(i) * (d[i] / (eigenvalues[i] - lam_min));
        }
        let part_norm = w_part.norm();
        if part_norm <= 1.0 {
            let tau = (1.0 - part_norm * part_norm).max(0.0).sqrt();
            return UnitSphereSolution {
                w: w_part + q_min * tau,
                multiplier: -lam_min,
                ambiguous: tau > 0.0,
            };
        }
    }

    let norm_at = |mu: f64| -> (f64, f64) {
        // (‖w‖, Σ dᵢ²/(λᵢ+μ)³)
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..n {
            let den = eigenvalues[i] + mu;
            let t = d[i] * d[i] / (den * den);
            s2 += t;
            s3 += t / den;
        }
        (s2.sqrt(), s3)
    };

    let mut lo = -lam_min;
    let mut hi = c_norm - lam_min;
    let mut mu = hi;
    for _ in 0..200 {
        let (wn, s3) = norm_at(mu);
        let phi = 1.0 / wn - 1.0;
        if phi == 0.0 {
            break;
        }
        if phi < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let step = phi * wn * wn * wn / s3;
        let mut next = mu - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == mu || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            mu = next;
            break;
        }
        mu = next;
    }

    let mut w = DVector::zeros(n);
    for i in 0..n {
        w += eigenvectors.column(i) * (d[i] / (eigenvalues[i] + mu));
    }
    UnitSphereSolution { w, multiplier: mu, ambiguous: false }
}

/// Flips `v` so its first non-negligible component is positive.
fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let tol = 1e-12 * v.amax();
    match v.iter().find(|x| x.abs() > tol) {
        Some(&x) if x < 0.0 => -v,
        _ => v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClseEstimate {
    pub weights: OrientationWeights,
    pub multiplier: f64,
    pub ambiguous: bool,
}

/// Least squares over real unit-norm weights.
pub fn clse_estimate(v_r: &CalibrationMatrix, v: &MeasurementVector) -> Result<ClseEstimate> {
    let (b, c) = normal_equations(v_r, v)?;
    let eig = b.clone().symmetric_eigenvalues();
    let floor = eig.max() / (DEFAULT_CONDITION_CEILING * DEFAULT_CONDITION_CEILING);
    if eig.min().is_nan() || eig.min() <= floor {
        let cond = if eig.min() > 0.0 { (eig.max() / eig.min()).sqrt() } else { f64::INFINITY };
        return Err(singular("normal matrix Re{V_R†V_R}", cond, &v_r.v_r));
    }
    let sol = solve_unit_sphere(&b, &c);
    Ok(ClseEstimate {
        weights: OrientationWeights::from_vector(&sol.w)?,
        multiplier: sol.multiplier,
        ambiguous: sol.ambiguous,
    })
}

/// `T = V_R · A_R⁻¹`.
pub fn channel_matrix(v_r: &CalibrationMatrix, a_r: &CMatrix) -> Result<ChannelMatrix> {
    if a_r.nrows() != a_r.ncols() || a_r.ncols() != v_r.n_ref() {
        return Err(Error::DimensionMismatch {
            context: "A_R must be square with one column per reference",
            expected: v_r.n_ref(),
            found: a_r.ncols(),
        });
    }
    let cond = condition_number(a_r).unwrap_or(f64::INFINITY);
    if cond > DEFAULT_CONDITION_CEILING {
        return Err(singular("reference coefficient matrix A_R", cond, a_r));
    }
    let inv = a_r
        .clone()
        .try_inverse()
        .ok_or(singular("reference coefficient matrix A_R", cond, a_r))?;
    Ok(ChannelMatrix::new(&v_r.v_r * inv))
}
