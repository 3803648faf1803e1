use crate::embedding::check_unit;
use crate::{LossError, Result};

/// Weight of the rotated-negative repulsion term.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Squared distance `|a - b|^2`; for unit vectors this is `2 - 2 cos(a, b)`.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "embedding dimension mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// BYOL regression loss between the online output and the target output.
///
/// Implemented as squared L2 distance of unit vectors so it is smooth at
/// `z_i == z_p`. Panics on a dimension mismatch.
pub fn byol_loss(z_i: &[f64], z_p: &[f64]) -> f64 {
    sq_dist(z_i, z_p)
}

/// Gradients of a BYOL-family loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ByolGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub target: Vec<f64>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn byol_loss_grad(z_i: &[f64], z_p: &[f64]) -> ByolGrad {
    let diff: Vec<f64> = z_i.iter().zip(z_p).map(|(a, b)| 2.0 * (a - b)).collect();
    ByolGrad {
        loss: sq_dist(z_i, z_p),
        target: diff.iter().map(|d| -d).collect(),
        anchor: diff,
        positives: Vec::new(),
        negatives: Vec::new(),
    }
}

fn check(z_i: &[f64], z_p: &[f64], pos: &[&[f64]], neg: &[&[f64]], alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(LossError::Alpha(alpha));
    }
    if !pos.is_empty() && !neg.is_empty() {
        return Err(LossError::BothRotatedSets);
    }
    check_unit(0, z_i)?;
    for (k, v) in std::iter::once(&z_p).chain(pos).chain(neg).enumerate() {
        if v.len() != z_i.len() {
            return Err(LossError::Dimension { expected: z_i.len(), actual: v.len() });
        }
        check_unit(k + 1, v)?;
    }
    Ok(())
}

/// Rotation-aware BYOL loss:
/// `|z_i - z_p|^2 + mean_{P'} |z_i - z_p'|^2 - alpha * mean_{N'} |z_i - z_n|^2`,
/// where an empty set contributes nothing. At most one of the rotated sets may
/// be populated.
pub fn pnda_byol_loss(
    z_i: &[f64],
    z_p: &[f64],
    rotated_pos: &[&[f64]],
    rotated_neg: &[&[f64]],
    alpha: f64,
) -> Result<f64> {
    check(z_i, z_p, rotated_pos, rotated_neg, alpha)?;
    let mut loss = sq_dist(z_i, z_p);
    if !rotated_pos.is_empty() {
        loss += rotated_pos.iter().map(|z| sq_dist(z_i, z)).sum::<f64>() / rotated_pos.len() as f64;
    }
    if !rotated_neg.is_empty() {
        loss -= alpha * rotated_neg.iter().map(|z| sq_dist(z_i, z)).sum::<f64>() / rotated_neg.len() as f64;
    }
    Ok(loss)
}

pub fn pnda_byol_loss_grad(
    z_i: &[f64],
    z_p: &[f64],
    rotated_pos: &[&[f64]],
    rotated_neg: &[&[f64]],
    alpha: f64,
) -> Result<ByolGrad> {
    let loss = pnda_byol_loss(z_i, z_p, rotated_pos, rotated_neg, alpha)?;
    let mut out = byol_loss_grad(z_i, z_p);
    out.loss = loss;
    let mut term = |others: &[&[f64]], weight: f64| -> Vec<Vec<f64>> {
        others
            .iter()
            .map(|z| {
                let g: Vec<f64> = z_i.iter().zip(z.iter()).map(|(a, b)| 2.0 * weight * (a - b)).collect();
                for (dst, v) in out.anchor.iter_mut().zip(&g) {
                    *dst += v;
                }
                g.iter().map(|v| -v).collect()
            })
            .collect()
    };
    let positives =
        if rotated_pos.is_empty() { Vec::new() } else { term(rotated_pos, 1.0 / rotated_pos.len() as f64) };
    let negatives =
        if rotated_neg.is_empty() { Vec::new() } else { term(rotated_neg, -alpha / rotated_neg.len() as f64) };
    out.positives = positives;
    out.negatives = negatives;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const E1: [f64; 4] = [1.0, 0.0, 0.0, 0.0];
    const E2: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
    const E3: [f64; 4] = [0.0, 0.0, 1.0, 0.0];
    const E4: [f64; 4] = [0.0, 0.0, 0.0, 1.0];
    const NEG_E1: [f64; 4] = [-1.0, 0.0, 0.0, 0.0];

    #[test]
    fn byol_reference_values() {
        assert_eq!(byol_loss(&E1, &E1), 0.0);
        assert_abs_diff_eq!(byol_loss(&E1, &E2), 2.0);
        assert_abs_diff_eq!(byol_loss(&E1, &NEG_E1), 4.0);
    }

    #[test]
    fn rai_with_aligned_views_is_zero() {
        let loss = pnda_byol_loss(&E1, &E1, &[&E1, &E1, &E1], &[], DEFAULT_ALPHA).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn non_rai_with_orthogonal_rotations() {
        let loss = pnda_byol_loss(&E1, &E1, &[], &[&E2, &E3, &E4], 0.05).unwrap();
        assert_abs_diff_eq!(loss, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn empty_rotated_sets_reduce_to_byol() {
        let z = [0.6, 0.8, 0.0, 0.0];
        assert_eq!(pnda_byol_loss(&E1, &z, &[], &[], 0.05).unwrap(), byol_loss(&E1, &z));
    }

    #[test]
    fn both_sets_populated_is_an_error() {
        assert_eq!(pnda_byol_loss(&E1, &E1, &[&E2], &[&E3], 0.05), Err(LossError::BothRotatedSets));
        assert_eq!(pnda_byol_loss(&E1, &E1, &[], &[], -0.1), Err(LossError::Alpha(-0.1)));
    }
}
