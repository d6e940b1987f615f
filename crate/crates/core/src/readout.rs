//! Linear readout: tapped feature assembly, ridge regression onto the PAM-4
//! levels, nearest-level decisions and bit-error counting.
//!
//! Tap selection follows the protocol of training on the train segment and
//! picking the tap count with the lowest error on the test segment. There is
//! no separate validation set, so the reported error is optimistically
//! biased by the choice of tap count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::node::StateMatrix;
use crate::transmitter::Pam4Symbols;

/// Pre-FEC log10 BER limit for hard-decision FEC.
pub const HD_FEC_LOG10_BER: f64 = -2.42;
pub const MAX_TAPS: usize = 61;
pub const DEFAULT_RIDGE: f64 = 0.01;

/// Contiguous train / buffer / test segments, in that order, starting after
/// `lead` guard symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: usize,
    pub buffer: usize,
    pub test: usize,
    pub lead: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 16500,
            buffer: 500,
            test: 12000,
            lead: 0,
        }
    }
}

impl SplitSpec {
    /// Reduced split for quick runs.
    pub fn reduced() -> Self {
        Self {
            train: 8000,
            buffer: 500,
            test: 6000,
            lead: 0,
        }
    }

    pub fn total(&self) -> usize {
        self.lead + self.train + self.buffer + self.test
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        self.lead..self.lead + self.train
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        let start = self.lead + self.train + self.buffer;
        start..start + self.test
    }

    pub fn validate(&self, available: usize) -> Result<()> {
        if self.train == 0 || self.test == 0 {
            return Err(invalid("split", "train and test segments must be non-empty"));
        }
        if self.total() > available {
            return Err(Error::LengthMismatch {
                expected: self.total(),
                found: available,
            });
        }
        Ok(())
    }
}

/// Tapped feature rows, optionally with a trailing constant bias column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub taps: usize,
    pub has_bias: bool,
}

impl FeatureMatrix {
    /// Plain matrix without tap structure or bias.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("features", "ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
            taps: 1,
            has_bias: false,
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

fn check_taps(taps: usize) -> Result<()> {
    if taps == 0 || taps % 2 == 0 {
        return Err(invalid("taps", format!("must be odd and >= 1, got {taps}")));
    }
    Ok(())
}

/// Row `k` is the concatenation of state rows `k - h ..= k + h`
/// (`h = (taps - 1) / 2`) followed by a constant 1. Rows beyond the record
/// are replaced by the first or last row.
pub fn build_features(states: &StateMatrix, taps: usize) -> Result<FeatureMatrix> {
    check_taps(taps)?;
    if states.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let n = states.cols();
    let h = (taps - 1) / 2;
    let cols = taps * n + 1;
    let mut data = Vec::with_capacity(states.rows() * cols);
    for k in 0..states.rows() {
        for o in 0..taps {
            data.extend_from_slice(states.row(clamped(k, o as isize - h as isize, states.rows())));
        }
        data.push(1.0);
    }
    Ok(FeatureMatrix {
        rows: states.rows(),
        cols,
        data,
        taps,
        has_bias: true,
    })
}

#[inline]
fn clamped(k: usize, offset: isize, rows: usize) -> usize {
    (k as isize + offset).clamp(0, rows as isize - 1) as usize
}

/// Trained linear readout. Weights follow the [`build_features`] column
/// order; the bias (when present) is last. States are standardized with
/// `offset` and `scale` before the taps are assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub taps: usize,
    pub lambda: f64,
    pub has_bias: bool,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl RidgeModel {
    pub fn bias(&self) -> f64 {
        if self.has_bias {
            *self.weights.last().unwrap_or(&0.0)
        } else {
            0.0
        }
    }

    /// Predict one value per state row.
    pub fn predict(&self, states: &StateMatrix) -> Result<Vec<f64>> {
        let n = states.cols();
        if self.offset.len() != n || self.weights.len() != self.taps * n + usize::from(self.has_bias) {
            return Err(Error::LengthMismatch {
                expected: self.offset.len(),
                found: n,
            });
        }
        let z = standardize(states, &self.offset, &self.scale);
        let h = (self.taps - 1) / 2;
        let rows = states.rows();
        Ok((0..rows)
            .map(|k| {
                let mut acc = self.bias();
                for o in 0..self.taps {
                    let r = clamped(k, o as isize - h as isize, rows);
                    let w = &self.weights[o * n..(o + 1) * n];
                    acc += dot(w, &z[r * n..(r + 1) * n]);
                }
                acc
            })
            .collect())
    }

    /// Predict from an already assembled feature matrix.
    pub fn predict_features(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.cols != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                found: x.cols,
            });
        }
        Ok((0..x.rows).map(|r| dot(x.row(r), &self.weights)).collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `|Xw - y|^2 + lambda |w|^2`, leaving the bias column (if any)
/// unpenalized.
pub fn train_ridge(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if x.rows != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows,
            found: y.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be >= 0"));
    }
    if x.rows == 0 {
        return Err(Error::EmptyInput);
    }
    let xm = DMatrix::from_row_slice(x.rows, x.cols, &x.data);
    let gram = xm.tr_mul(&xm);
    let rhs = xm.tr_mul(&DVector::from_column_slice(y));
    let penalized: Vec<bool> = (0..x.cols).map(|c| !(x.has_bias && c == x.cols - 1)).collect();
    let w = solve_regularized(&gram, &rhs, lambda, &penalized)?;
    let width = if x.has_bias { (x.cols - 1) / x.taps } else { x.cols / x.taps };
    Ok(RidgeModel {
        weights: w.iter().cloned().collect(),
        taps: x.taps,
        lambda,
        has_bias: x.has_bias,
        offset: vec![0.0; width],
        scale: vec![1.0; width],
    })
}

/// Cholesky solve of `(G + lambda D) w = b` with one step of iterative
/// refinement. `D` is diagonal with ones where `penalized`.
fn solve_regularized(gram: &DMatrix<f64>, rhs: &DVector<f64>, lambda: f64, penalized: &[bool]) -> Result<DVector<f64>> {
    let mut a = gram.clone();
    for (i, &p) in penalized.iter().enumerate() {
        if p {
            a[(i, i)] += lambda;
        }
    }
    let chol = a.clone().cholesky().ok_or(Error::RankDeficient)?;
    check_pivots(&chol.l_dirty().diagonal(), &a.diagonal())?;
    let mut w = chol.solve(rhs);
    let r = rhs - &a * &w;
    w += chol.solve(&r);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(w)
}

/// Reject factorizations whose pivots vanish at working precision.
fn check_pivots(l_diag: &DVector<f64>, a_diag: &DVector<f64>) -> Result<()> {
    let scale = a_diag.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-13 * a_diag.len() as f64 * scale;
    if scale == 0.0 || l_diag.iter().any(|d| d * d <= tol) {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Nearest PAM-4 level. Midpoints (-2, 0, +2) go to the lower level.
pub fn decide_pam4(predictions: &[f64]) -> Pam4Symbols {
    let levels = predictions
        .iter()
        .map(|&p| {
            if p <= -2.0 {
                -3
            } else if p <= 0.0 {
                -1
            } else if p <= 2.0 {
                1
            } else {
                3
            }
        })
        .collect();
    Pam4Symbols::from_levels(levels).expect("slicer emits valid levels")
}

/// Bit-error count over the test segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub bit_errors: usize,
    pub bits: usize,
    /// `-inf` when no errors were counted.
    pub log10_ber: f64,
    pub hd_fec_pass: bool,
}

impl BerReport {
    pub fn from_counts(bit_errors: usize, bits: usize) -> Self {
        let log10_ber = if bit_errors == 0 {
            f64::NEG_INFINITY
        } else {
            (bit_errors as f64 / bits as f64).log10()
        };
        Self {
            bit_errors,
            bits,
            log10_ber,
            hd_fec_pass: log10_ber <= HD_FEC_LOG10_BER,
        }
    }

    /// Upper bound `log10(1 / bits)` stands in for a zero count.
    pub fn log10_ber_or_bound(&self) -> f64 {
        if self.bit_errors == 0 {
            -(self.bits.max(1) as f64).log10()
        } else {
            self.log10_ber
        }
    }
}

/// Gray-demap both streams and count bit errors on the test segment.
pub fn evaluate_ber(decided: &Pam4Symbols, truth: &Pam4Symbols, split: &SplitSpec) -> Result<BerReport> {
    if decided.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: decided.len(),
        });
    }
    split.validate(truth.len())?;
    let range = split.test_range();
    Ok(count_errors(&decided.levels()[range.clone()], &truth.levels()[range]))
}

fn count_errors(decided: &[i8], truth: &[i8]) -> BerReport {
    let errors = decided
        .iter()
        .zip(truth)
        .map(|(&a, &b)| {
            let (a0, a1) = crate::transmitter::gray_bits(a).expect("valid level");
            let (b0, b1) = crate::transmitter::gray_bits(b).expect("valid level");
            usize::from(a0 != b0) + usize::from(a1 != b1)
        })
        .sum();
    BerReport::from_counts(errors, 2 * truth.len())
}

/// Per-column mean and standard deviation over `rows`; zero spread maps to
/// a unit scale.
fn column_stats(states: &StateMatrix, rows: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
    let n = states.cols();
    let count = rows.len().max(1) as f64;
    let mut mean = vec![0.0; n];
    for r in rows.clone() {
        mean.iter_mut().zip(states.row(r)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for r in rows {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(states.row(r)) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let sd = (v / count).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn standardize(states: &StateMatrix, offset: &[f64], scale: &[f64]) -> Vec<f64> {
    let n = states.cols();
    let mut z = states.as_slice().to_vec();
    for row in z.chunks_exact_mut(n.max(1)) {
        for ((v, o), s) in row.iter_mut().zip(offset).zip(scale) {
            *v = (*v - o) / s;
        }
    }
    z
}

/// Ridge fits for every odd tap count up to `max_taps` from one factorization.
///
/// Columns are ordered bias, lag 0, lag -1, lag +1, lag -2, ... so that the
/// normal equations for `taps` are the leading block of those for
/// `max_taps`, and so is their Cholesky factor.
pub struct NestedRidge {
    n: usize,
    max_taps: usize,
    lambda: f64,
    offset: Vec<f64>,
    scale: Vec<f64>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    chol_l: DMatrix<f64>,
}

impl NestedRidge {
    /// Accumulate the normal equations over the train segment.
    pub fn fit(states: &StateMatrix, targets: &[f64], split: &SplitSpec, max_taps: usize, lambda: f64) -> Result<Self> {
        check_taps(max_taps)?;
        if targets.len() != states.rows() {
            return Err(Error::LengthMismatch {
                expected: states.rows(),
                found: targets.len(),
            });
        }
        split.validate(states.rows())?;
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        let n = states.cols();
        let (offset, scale) = column_stats(states, split.train_range());
        let z = standardize(states, &offset, &scale);
        let p = 1 + max_taps * n;
        let rows = states.rows();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        const CHUNK: usize = 1024;
        let train = split.train_range();
        let mut start = train.start;
        while start < train.end {
            let end = (start + CHUNK).min(train.end);
            let mut xc = DMatrix::<f64>::zeros(end - start, p);
            for (i, k) in (start..end).enumerate() {
                xc[(i, 0)] = 1.0;
                for (slot, lag) in nested_lags(max_taps).enumerate() {
                    let r = clamped(k, lag, rows);
                    for j in 0..n {
                        xc[(i, 1 + slot * n + j)] = z[r * n + j];
                    }
                }
            }
            gram.gemm_tr(1.0, &xc, &xc, 1.0);
            let yc = DVector::from_column_slice(&targets[start..end]);
            rhs.gemv_tr(1.0, &xc, &yc, 1.0);
            start = end;
        }
        let mut a = gram.clone();
        for i in 1..p {
            a[(i, i)] += lambda;
        }
        let diag = a.diagonal();
        let chol = a.cholesky().ok_or(Error::RankDeficient)?;
        check_pivots(&chol.l_dirty().diagonal(), &diag)?;
        Ok(Self {
            n,
            max_taps,
            lambda,
            offset,
            scale,
            gram,
            rhs,
            chol_l: chol.unpack(),
        })
    }

    /// Solve for one tap count.
    pub fn model(&self, taps: usize) -> Result<RidgeModel> {
        check_taps(taps)?;
        if taps > self.max_taps {
            return Err(invalid("taps", "exceeds the fitted maximum"));
        }
        let m = 1 + taps * self.n;
        let l = self.chol_l.view((0, 0), (m, m));
        let solve = |b: &DVector<f64>| -> Option<DVector<f64>> {
            let y = l.solve_lower_triangular(b)?;
            l.tr_solve_lower_triangular(&y)
        };
        let b = self.rhs.rows(0, m).into_owned();
        let mut a = self.gram.view((0, 0), (m, m)).into_owned();
        for i in 1..m {
            a[(i, i)] += self.lambda;
        }
        let mut w = solve(&b).ok_or(Error::RankDeficient)?;
        let r = &b - &a * &w;
        w += solve(&r).ok_or(Error::RankDeficient)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient);
        }
        // back to build_features order: lags -h..=h, bias last
        let h = (taps - 1) / 2;
        let mut weights = vec![0.0; taps * self.n + 1];
        for (slot, lag) in nested_lags(taps).enumerate() {
            let o = (lag + h as isize) as usize;
            for j in 0..self.n {
                weights[o * self.n + j] = w[1 + slot * self.n + j];
            }
        }
        weights[taps * self.n] = w[0];
        Ok(RidgeModel {
            weights,
            taps,
            lambda: self.lambda,
            has_bias: true,
            offset: self.offset.clone(),
            scale: self.scale.clone(),
        })
    }
}

/// 0, -1, +1, -2, +2, ... covering `taps` lags.
fn nested_lags(taps: usize) -> impl Iterator<Item = isize> {
    (0..taps as isize).map(|i| if i == 0 { 0 } else if i % 2 == 1 { -(i + 1) / 2 } else { i / 2 })
}

/// Train one model per odd tap count up to `max_taps` and keep the one with
/// the fewest test-segment bit errors; ties go to fewer taps.
pub fn tune_taps(
    states: &StateMatrix,
    truth: &Pam4Symbols,
    split: &SplitSpec,
    max_taps: usize,
    lambda: f64,
) -> Result<(RidgeModel, BerReport)> {
    let y = truth.levels_f64();
    let fit = NestedRidge::fit(states, &y, split, max_taps, lambda)?;
    let test = split.test_range();
    let mut best: Option<(RidgeModel, BerReport)> = None;
    for taps in (1..=max_taps).step_by(2) {
        let model = fit.model(taps)?;
        let pred = model.predict(states)?;
        let decided = decide_pam4(&pred[test.clone()]);
        let report = count_errors(decided.levels(), &truth.levels()[test.clone()]);
        if best.as_ref().is_none_or(|(_, b)| report.bit_errors < b.bit_errors) {
            best = Some((model, report));
        }
    }
    best.ok_or(Error::EmptyInput)
}
