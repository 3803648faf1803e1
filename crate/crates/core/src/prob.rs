use crate::{CoreError, Result};

/// `ln 4`, the entropy of the uniform distribution over four rotations.
pub const MAX_ENTROPY: f64 = std::f64::consts::LN_2 * 2.0;
/// Half the maximal entropy: the center that separates confident from
/// confused rotation predictions.
pub const DEFAULT_RHO: f64 = std::f64::consts::LN_2;
/// Probabilities are clamped here inside `ln` so that `0 ln 0 = 0`.
pub const ENTROPY_CLAMP: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-6;

/// Softmax probabilities over the four rotation classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbVector([f64; 4]);

impl ProbVector {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        validate(&p)?;
        Ok(Self(p))
    }

    pub fn uniform() -> Self {
        Self([0.25; 4])
    }

    pub fn one_hot(class: usize) -> Self {
        let mut p = [0.0; 4];
        p[class] = 1.0;
        Self(p)
    }

    pub fn from_logits(logits: [f64; 4]) -> Self {
        Self(softmax4(logits))
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for k in 1..4 {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        best
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(CoreError::NotNormalized { reason: format!("component {v} is negative or non-finite") });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(CoreError::NotNormalized { reason: format!("components sum to {sum}") });
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax4(logits: [f64; 4]) -> [f64; 4] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e = logits.map(|l| (l - max).exp());
    let sum: f64 = e.iter().sum();
    for v in &mut e {
        *v /= sum;
    }
    e
}

/// Natural-log entropy, `-sum p ln p`, in `[0, ln 4]`.
pub fn entropy(p: &ProbVector) -> f64 {
    let h: f64 = p.0.iter().map(|&pk| -pk * pk.max(ENTROPY_CLAMP).ln()).sum();
    h.clamp(0.0, MAX_ENTROPY)
}

/// Entropy of an arbitrary slice, rejecting anything that is not a
/// probability vector.
pub fn entropy_of(p: &[f64]) -> Result<f64> {
    validate(p)?;
    Ok(p.iter().map(|&pk| -pk * pk.max(ENTROPY_CLAMP).ln()).sum::<f64>().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(entropy(&ProbVector::uniform()), 1.3862943611198906, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&ProbVector::one_hot(0)), 0.0);
        let half = ProbVector::new([0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(entropy(&half), 0.6931471805599453, epsilon = 1e-12);
        assert_abs_diff_eq!(DEFAULT_RHO, MAX_ENTROPY / 2.0);
        assert_abs_diff_eq!(MAX_ENTROPY, 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(ProbVector::new([0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(ProbVector::new([1.2, -0.2, 0.0, 0.0]).is_err());
        assert!(entropy_of(&[0.3, 0.3]).is_err());
        assert!(entropy_of(&[0.25; 4]).is_ok());
    }

    #[test]
    fn softmax_is_shift_invariant_and_stable() {
        let a = softmax4([1.0, 2.0, 3.0, 4.0]);
        let b = softmax4([1001.0, 1002.0, 1003.0, 1004.0]);
        for k in 0..4 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-12);
        }
        assert!(ProbVector::new(softmax4([800.0, -800.0, 0.0, 1.0])).is_ok());
    }

    proptest! {
        #[test]
        fn entropy_bounded_and_permutation_invariant(
            logits in prop::array::uniform4(-30.0f64..30.0),
            perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let p = ProbVector::from_logits(logits);
            let h = entropy(&p);
            prop_assert!((0.0..=MAX_ENTROPY).contains(&h));
            let q = ProbVector::new(perm.map(|k| p.get(k))).unwrap();
            prop_assert!((entropy(&q) - h).abs() < 1e-12);
        }
    }
}
