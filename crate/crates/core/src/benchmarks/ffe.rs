use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::readout::SplitSpec;
use crate::signal::SampledSignal;
use crate::transmitter::Pam4Symbols;

/// Relative diagonal loading of the equalizer normal equations.
pub const DIAGONAL_LOAD: f64 = 1e-9;

/// T/2-spaced linear equalizer producing one output per symbol.
///
/// Output `k` is `bias + sum_j taps[j] * x[2k + j - center]`, indices taken
/// cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffe {
    pub taps: Vec<f64>,
    pub bias: f64,
    pub center: usize,
}

impl Ffe {
    pub fn apply(&self, sig: &SampledSignal) -> Result<SampledSignal> {
        if sig.len() % 2 != 0 {
            return Err(invalid("sig", "expected 2 samples per symbol"));
        }
        let n = sig.len();
        let x = &sig.samples;
        let out = (0..n / 2)
            .map(|k| {
                let mut acc = self.bias;
                for (j, t) in self.taps.iter().enumerate() {
                    acc += t * x[cyclic(2 * k + j, self.center, n)];
                }
                acc
            })
            .collect();
        let mut s = SampledSignal::new(out, sig.sample_rate / 2.0)?;
        s.warnings = sig.warnings.clone();
        Ok(s)
    }
}

#[inline]
fn cyclic(i: usize, center: usize, n: usize) -> usize {
    (i + n - center % n) % n
}

/// Least-squares fit of an `n_taps` equalizer (plus bias) to the symbol
/// levels of the train segment, with [`DIAGONAL_LOAD`] on the tap weights.
pub fn ffe_train(sig: &SampledSignal, truth: &Pam4Symbols, n_taps: usize, split: &SplitSpec) -> Result<Ffe> {
    if n_taps == 0 {
        return Err(invalid("n_taps", "must be >= 1"));
    }
    if sig.len() != 2 * truth.len() {
        return Err(Error::LengthMismatch {
            expected: 2 * truth.len(),
            found: sig.len(),
        });
    }
    split.validate(truth.len())?;
    let center = (n_taps - 1) / 2;
    let n = sig.len();
    let p = n_taps + 1;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let levels = truth.levels();
    let mut row = DVector::<f64>::zeros(p);
    for k in split.train_range() {
        for j in 0..n_taps {
            row[j] = sig.samples[cyclic(2 * k + j, center, n)];
        }
        row[n_taps] = 1.0;
        gram.ger(1.0, &row, &row, 1.0);
        rhs.axpy(levels[k] as f64, &row, 1.0);
    }
    // T/2 samples of a band-limited signal make the normal equations nearly
    // singular; a tiny diagonal load keeps the factorization well posed.
    let load = DIAGONAL_LOAD * (0..n_taps).map(|j| gram[(j, j)]).sum::<f64>() / n_taps as f64;
    for j in 0..n_taps {
        gram[(j, j)] += load;
    }
    let diag = gram.diagonal();
    let chol = gram.clone().cholesky().ok_or(Error::SingularTraining)?;
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 || chol.l_dirty().diagonal().iter().any(|d| d * d <= 1e-13 * p as f64 * scale) {
        return Err(Error::SingularTraining);
    }
    let mut w = chol.solve(&rhs);
    let r = &rhs - &gram * &w;
    w += chol.solve(&r);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularTraining);
    }
    Ok(Ffe {
        taps: w.rows(0, n_taps).iter().cloned().collect(),
        bias: w[n_taps],
        center,
    })
}

/// Train on the train segment and equalize the whole record.
pub fn ffe_train_apply(
    sig: &SampledSignal,
    truth: &Pam4Symbols,
    n_taps: usize,
    split: &SplitSpec,
) -> Result<(Ffe, SampledSignal)> {
    let ffe = ffe_train(sig, truth, n_taps, split)?;
    let out = ffe.apply(sig)?;
    Ok((ffe, out))
}
