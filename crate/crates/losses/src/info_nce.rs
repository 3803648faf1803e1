use crate::embedding::check_unit;
use crate::{EmbeddingBatch, LossError, PairSpec, Result};

/// SimCLR temperature.
pub const DEFAULT_TAU_SIMCLR: f64 = 0.5;
/// MoCo v2 temperature.
pub const DEFAULT_TAU_MOCO: f64 = 0.2;

/// Loss value and gradients w.r.t. every embedding that entered it.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(LossError::Temperature(tau))
    }
}

fn check_inputs(anchor: &[f64], positives: &[&[f64]], negatives: &[&[f64]]) -> Result<()> {
    check_unit(0, anchor)?;
    for (k, v) in positives.iter().chain(negatives).enumerate() {
        if v.len() != anchor.len() {
            return Err(LossError::Dimension { expected: anchor.len(), actual: v.len() });
        }
        check_unit(k + 1, v)?;
    }
    Ok(())
}

/// Multi-positive contrastive term shared by both InfoNCE forms:
/// `LSE_{a in P u N}(s_a) - mean_{p in P}(s_p)` with `s_a = <anchor, z_a> / tau`.
///
/// With `grad` set, returns `d loss / d s_a` for every member of `P` then `N`.
fn kernel(anchor: &[f64], positives: &[&[f64]], negatives: &[&[f64]], tau: f64, grad: bool) -> (f64, Vec<f64>) {
    let logits: Vec<f64> = positives.iter().chain(negatives).map(|z| dot(anchor, z) / tau).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    let lse = max + denom.ln();
    let n_pos = positives.len() as f64;
    let mean_pos: f64 = logits[..positives.len()].iter().sum::<f64>() / n_pos;
    let loss = lse - mean_pos;
    if !grad {
        return (loss, Vec::new());
    }
    let dlogits = exps
        .iter()
        .enumerate()
        .map(|(k, e)| e / denom - if k < positives.len() { 1.0 / n_pos } else { 0.0 })
        .collect();
    (loss, dlogits)
}

fn kernel_grad(anchor: &[f64], positives: &[&[f64]], negatives: &[&[f64]], tau: f64) -> InfoNceGrad {
    let (loss, dlogits) = kernel(anchor, positives, negatives, tau, true);
    let mut d_anchor = vec![0.0; anchor.len()];
    let mut grads = Vec::with_capacity(dlogits.len());
    for (z, g) in positives.iter().chain(negatives).zip(&dlogits) {
        let scale = g / tau;
        for (da, zk) in d_anchor.iter_mut().zip(z.iter()) {
            *da += scale * zk;
        }
        grads.push(anchor.iter().map(|a| scale * a).collect::<Vec<f64>>());
    }
    let negatives_grad = grads.split_off(positives.len());
    InfoNceGrad { loss, anchor: d_anchor, positives: grads, negatives: negatives_grad }
}

/// Single-positive InfoNCE:
/// `-ln( e^{z_i.z_p/tau} / (e^{z_i.z_p/tau} + sum_n e^{z_i.z_n/tau}) )`.
pub fn info_nce(anchor: &[f64], positive: &[f64], negatives: &[&[f64]], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if negatives.is_empty() {
        return Err(LossError::NoNegatives);
    }
    check_inputs(anchor, &[positive], negatives)?;
    Ok(kernel(anchor, &[positive], negatives, tau, false).0)
}

pub fn info_nce_grad(anchor: &[f64], positive: &[f64], negatives: &[&[f64]], tau: f64) -> Result<InfoNceGrad> {
    check_tau(tau)?;
    if negatives.is_empty() {
        return Err(LossError::NoNegatives);
    }
    check_inputs(anchor, &[positive], negatives)?;
    Ok(kernel_grad(anchor, &[positive], negatives, tau))
}

fn gather<'a>(pool: &'a EmbeddingBatch, spec: &PairSpec) -> Result<(Vec<&'a [f64]>, Vec<&'a [f64]>)> {
    spec.validate(pool.len())?;
    let p = spec.positives.iter().map(|&k| pool.row(k)).collect();
    let n = spec.negatives.iter().map(|&k| pool.row(k)).collect();
    Ok((p, n))
}

/// Multi-positive InfoNCE over a shared pool:
/// `-(1/|P|) sum_{p in P} ln( e^{s_p} / sum_{a in P u N} e^{s_a} )`.
///
/// The denominator runs over every positive and every negative.
pub fn pnda_info_nce(pool: &EmbeddingBatch, spec: &PairSpec, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let (p, n) = gather(pool, spec)?;
    Ok(kernel(pool.row(spec.anchor), &p, &n, tau, false).0)
}

/// Loss and its gradient w.r.t. the full pool (row-major, same shape as the pool).
pub fn pnda_info_nce_grad(pool: &EmbeddingBatch, spec: &PairSpec, tau: f64) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; pool.as_slice().len()];
    let loss = accumulate(pool, spec, tau, 1.0, &mut grad)?;
    Ok((loss, grad))
}

fn accumulate(pool: &EmbeddingBatch, spec: &PairSpec, tau: f64, weight: f64, grad: &mut [f64]) -> Result<f64> {
    check_tau(tau)?;
    let (p, n) = gather(pool, spec)?;
    let g = kernel_grad(pool.row(spec.anchor), &p, &n, tau);
    let dim = pool.dim();
    let mut add = |row: usize, values: &[f64]| {
        for (dst, v) in grad[row * dim..(row + 1) * dim].iter_mut().zip(values) {
            *dst += weight * v;
        }
    };
    add(spec.anchor, &g.anchor);
    for (&row, values) in spec.positives.iter().zip(&g.positives) {
        add(row, values);
    }
    for (&row, values) in spec.negatives.iter().zip(&g.negatives) {
        add(row, values);
    }
    Ok(g.loss)
}

/// Mean of [`pnda_info_nce`] over `specs` and the gradient of that mean
/// w.r.t. the pool.
pub fn batch_pnda_info_nce(pool: &EmbeddingBatch, specs: &[PairSpec], tau: f64) -> Result<(f64, Vec<f64>)> {
    if specs.is_empty() {
        return Err(LossError::InvalidSpec("no anchors in batch".into()));
    }
    let weight = 1.0 / specs.len() as f64;
    let mut grad = vec![0.0; pool.as_slice().len()];
    let mut total = 0.0;
    for spec in specs {
        total += accumulate(pool, spec, tau, weight, &mut grad)?;
    }
    Ok((total * weight, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const E1: [f64; 3] = [1.0, 0.0, 0.0];
    const E2: [f64; 3] = [0.0, 1.0, 0.0];
    const E3: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn aligned_positive_one_orthogonal_negative() {
        let loss = info_nce(&E1, &E1, &[&E2], 1.0).unwrap();
        assert_abs_diff_eq!(loss, (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(loss, 0.31326168751822286, epsilon = 1e-12);
    }

    #[test]
    fn equal_similarities_give_log_one_plus_k() {
        for k in 1..5 {
            let negs: Vec<&[f64]> = (0..k).map(|_| &E2[..]).collect();
            let loss = info_nce(&E1, &E3, &negs, 0.7).unwrap();
            assert_abs_diff_eq!(loss, (1.0 + k as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn small_temperature_drives_loss_to_zero() {
        let neg = [0.6, 0.8, 0.0];
        assert!(info_nce(&E1, &E1, &[&neg], 0.01).unwrap() < 1e-15);
    }

    #[test]
    fn rejects_bad_temperature_and_missing_negatives() {
        assert_eq!(info_nce(&E1, &E1, &[&E2], 0.0), Err(LossError::Temperature(0.0)));
        assert_eq!(info_nce(&E1, &E1, &[&E2], -1.0), Err(LossError::Temperature(-1.0)));
        assert_eq!(info_nce(&E1, &E1, &[], 1.0), Err(LossError::NoNegatives));
        assert!(matches!(info_nce(&E1, &[2.0, 0.0, 0.0], &[&E2], 1.0), Err(LossError::NotUnitNorm { .. })));
    }

    #[test]
    fn two_identical_positives_two_orthogonal_negatives() {
        // pool: anchor, p1 = p2 = anchor, n1 = e2, n2 = e3
        let pool = EmbeddingBatch::from_rows(&[E1.to_vec(), E1.to_vec(), E1.to_vec(), E2.to_vec(), E3.to_vec()]).unwrap();
        let spec = PairSpec::new(0, vec![1, 2], vec![3, 4]);
        let loss = pnda_info_nce(&pool, &spec, 1.0).unwrap();
        // each term: -ln(e / (2e + 2))
        let expected = -(1f64.exp() / (2.0 * 1f64.exp() + 2.0)).ln();
        assert_abs_diff_eq!(loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn empty_positive_set_is_rejected() {
        let pool = EmbeddingBatch::from_rows(&[E1.to_vec(), E2.to_vec()]).unwrap();
        let spec = PairSpec::new(0, vec![], vec![1]);
        assert_eq!(pnda_info_nce(&pool, &spec, 1.0), Err(LossError::NoPositives));
    }

    #[test]
    fn extra_negative_increases_loss() {
        let pool = EmbeddingBatch::from_rows(&[E1.to_vec(), E1.to_vec(), E2.to_vec(), E3.to_vec()]).unwrap();
        let base = pnda_info_nce(&pool, &PairSpec::new(0, vec![1], vec![2]), 0.5).unwrap();
        let more = pnda_info_nce(&pool, &PairSpec::new(0, vec![1], vec![2, 3]), 0.5).unwrap();
        assert!(more > base);
    }

    #[test]
    fn batch_mean_matches_individual_terms() {
        let pool = EmbeddingBatch::from_rows(&[E1.to_vec(), E2.to_vec(), E3.to_vec()]).unwrap();
        let specs = vec![PairSpec::new(0, vec![1], vec![2]), PairSpec::new(1, vec![2], vec![0])];
        let (mean, grad) = batch_pnda_info_nce(&pool, &specs, 0.5).unwrap();
        let a = pnda_info_nce(&pool, &specs[0], 0.5).unwrap();
        let b = pnda_info_nce(&pool, &specs[1], 0.5).unwrap();
        assert_abs_diff_eq!(mean, (a + b) / 2.0, epsilon = 1e-14);
        let (_, ga) = pnda_info_nce_grad(&pool, &specs[0], 0.5).unwrap();
        let (_, gb) = pnda_info_nce_grad(&pool, &specs[1], 0.5).unwrap();
        for k in 0..grad.len() {
            assert_abs_diff_eq!(grad[k], (ga[k] + gb[k]) / 2.0, epsilon = 1e-14);
        }
    }
}
