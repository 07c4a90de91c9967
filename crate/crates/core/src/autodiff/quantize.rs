use super::AutodiffError;

/// One-hot `+-1` projection of a real weight vector: `W ~ alpha * B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub alpha: f64,
    /// position of the single non-zero entry of `B`
    pub index: usize,
    /// value of that entry, `+1.0` or `-1.0`
    pub sign: f64,
}

impl Quantized {
    /// The dense `B` vector.
    pub fn one_hot(&self, n: usize) -> Vec<f64> {
        let mut b = vec![0.0; n];
        b[self.index] = self.sign;
        b
    }

    /// `alpha * B_index`, the factor applied to the chosen input.
    pub fn scale(&self) -> f64 {
        self.alpha * self.sign
    }
}

/// Minimizes `||W - alpha B||^2` over one-hot `B` in `{-1, 0, 1}^N` and `alpha >= 0`.
///
/// Expanding the objective gives `alpha^2 - 2 alpha W.B + W.W`, so the best
/// `B` maximizes `W.B`: put `sign(W_j)` at the largest-magnitude entry, and
/// then `alpha = |W_j|`. Ties go to the lowest index and `sign(0) = +1`, so
/// an all-zero vector maps to `B = e_0`, `alpha = 0`.
pub fn quantize_choice(weights: &[f64]) -> Result<Quantized, AutodiffError> {
    if weights.is_empty() {
        return Err(AutodiffError::EmptyChoice);
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(AutodiffError::NonFinite);
    }
    Ok(quantize_unchecked(weights.iter().copied()))
}

pub(crate) fn quantize_unchecked(weights: impl Iterator<Item = f64>) -> Quantized {
    let mut best = Quantized {
        alpha: -1.0,
        index: 0,
        sign: 1.0,
    };
    for (i, w) in weights.enumerate() {
        if w.abs() > best.alpha {
            best = Quantized {
                alpha: w.abs(),
                index: i,
                sign: if w >= 0.0 { 1.0 } else { -1.0 },
            };
        }
    }
    best
}

/// `J(B, alpha) = ||W - alpha B||^2`.
pub fn quantization_error(weights: &[f64], q: &Quantized) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let b = if i == q.index { q.alpha * q.sign } else { 0.0 };
            (w - b) * (w - b)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every one-hot +-1 candidate with its optimal alpha = max(W.B, 0).
    fn exhaustive_min(w: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..w.len() {
            for s in [1.0, -1.0] {
                let alpha = (w[j] * s).max(0.0);
                let q = Quantized { alpha, index: j, sign: s };
                best = best.min(quantization_error(w, &q));
            }
        }
        best
    }

    #[test]
    fn examples() {
        let q = quantize_choice(&[0.3, -0.9, 0.2]).unwrap();
        assert_eq!(q.alpha, 0.9);
        assert_eq!(q.one_hot(3), vec![0.0, -1.0, 0.0]);
        assert!((quantization_error(&[0.3, -0.9, 0.2], &q) - exhaustive_min(&[0.3, -0.9, 0.2])).abs() < 1e-15);

        let q = quantize_choice(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((q.alpha, q.one_hot(3)), (1.0, vec![1.0, 0.0, 0.0]));

        let q = quantize_choice(&[0.5, 0.5]).unwrap();
        assert_eq!((q.alpha, q.one_hot(2)), (0.5, vec![1.0, 0.0]));
    }

    #[test]
    fn degenerate_and_invalid() {
        let q = quantize_choice(&[0.0, 0.0]).unwrap();
        assert_eq!((q.alpha, q.index, q.sign), (0.0, 0, 1.0));
        assert_eq!(quantize_choice(&[]), Err(AutodiffError::EmptyChoice));
        assert_eq!(quantize_choice(&[f64::NAN]), Err(AutodiffError::NonFinite));
    }

    #[test]
    fn negative_tie_breaks_to_lowest_index() {
        let q = quantize_choice(&[-0.7, 0.7]).unwrap();
        assert_eq!((q.index, q.sign), (0, -1.0));
    }
}
