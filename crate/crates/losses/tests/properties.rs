use pnda_core::{Rotation, Verdict};
use pnda_losses::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-10 { diff } else { diff / scale }
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn pool_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let dim = 5;
        let rows: Vec<Vec<f64>> = (0..6).map(|_| unit(&mut rng, dim)).collect();
        let pool = EmbeddingBatch::from_rows(&rows).unwrap();
        let spec = PairSpec::new(0, vec![1, 2], vec![3, 4, 5]);
        let tau = rng.random_range(0.1..1.0);
        let (_, analytic) = pnda_info_nce_grad(&pool, &spec, tau).unwrap();
        let numeric = central_diff(
            |flat| pnda_info_nce(&EmbeddingBatch::new(dim, flat.to_vec()).unwrap(), &spec, tau).unwrap(),
            pool.as_slice(),
        );
        assert!(rel_err(&analytic, &numeric) < 1e-6, "{analytic:?} vs {numeric:?}");
    }
}

#[test]
fn byol_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let dim = 4;
        let vs: Vec<Vec<f64>> = (0..5).map(|_| unit(&mut rng, dim)).collect();
        let rai = case % 2 == 0;
        let eval = |flat: &[f64]| {
            let r: Vec<&[f64]> = flat.chunks(dim).collect();
            let rot = &r[2..5];
            if rai {
                pnda_byol_loss(r[0], r[1], rot, &[], 0.05).unwrap()
            } else {
                pnda_byol_loss(r[0], r[1], &[], rot, 0.05).unwrap()
            }
        };
        let flat: Vec<f64> = vs.concat();
        let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
        let g = if rai {
            pnda_byol_loss_grad(refs[0], refs[1], &refs[2..], &[], 0.05).unwrap()
        } else {
            pnda_byol_loss_grad(refs[0], refs[1], &[], &refs[2..], 0.05).unwrap()
        };
        let mut analytic = g.anchor.clone();
        analytic.extend(g.target);
        for v in g.positives.iter().chain(&g.negatives) {
            analytic.extend(v);
        }
        assert!(rel_err(&analytic, &central_diff(eval, &flat)) < 1e-6);
    }
}

#[test]
fn simclr_cardinalities_for_every_anchor() {
    for m in [2usize, 3, 4, 8] {
        let layout = SimclrLayout::new(m, Some((Rotation::R180, Rotation::R90))).unwrap();
        for a in 0..2 * m {
            for v in [Verdict::Rai, Verdict::NonRai] {
                let spec = build_sets_simclr(&layout, a, Some(v)).unwrap();
                spec.validate(layout.pool_len()).unwrap();
                assert_eq!(spec.positives.len() + spec.negatives.len() + 1, 4 * m);
            }
        }
    }
}

proptest! {
    #[test]
    fn pnda_info_nce_is_permutation_invariant(
        seed in any::<u64>(),
        n_pos in 1usize..4,
        n_neg in 1usize..5,
        tau in 0.05f64..1.0,
        shuffle_seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..1 + n_pos + n_neg).map(|_| unit(&mut rng, 6)).collect();
        let pool = EmbeddingBatch::from_rows(&rows).unwrap();
        let pos: Vec<usize> = (1..=n_pos).collect();
        let neg: Vec<usize> = (n_pos + 1..1 + n_pos + n_neg).collect();
        let base = pnda_info_nce(&pool, &PairSpec::new(0, pos.clone(), neg.clone()), tau).unwrap();
        let mut srng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        let (mut p2, mut n2) = (pos, neg);
        use rand::seq::SliceRandom;
        p2.shuffle(&mut srng);
        n2.shuffle(&mut srng);
        let permuted = pnda_info_nce(&pool, &PairSpec::new(0, p2, n2), tau).unwrap();
        prop_assert!((base - permuted).abs() < 1e-12);
        prop_assert!(base.is_finite());
    }

    #[test]
    fn single_positive_reduces_to_info_nce(seed in any::<u64>(), n_neg in 1usize..6, tau in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..2 + n_neg).map(|_| unit(&mut rng, 4)).collect();
        let pool = EmbeddingBatch::from_rows(&rows).unwrap();
        let negs: Vec<&[f64]> = rows[2..].iter().map(Vec::as_slice).collect();
        let a = info_nce(&rows[0], &rows[1], &negs, tau).unwrap();
        let b = pnda_info_nce(&pool, &PairSpec::new(0, vec![1], (2..2 + n_neg).collect()), tau).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
