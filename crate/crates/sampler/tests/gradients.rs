use pnda_core::{entropy, ProbVector, Rotation, DEFAULT_RHO};
use pnda_sampler::objective::{crs_logit_grad, entropy_logit_grad, es_logit_grad, filtered_crs_logit_grad};
use pnda_sampler::{loss_crs_filtered, step1_objective_grad, step2_objective_grad, SamplerConfig};
use proptest::prelude::*;

const H: f64 = 1e-6;
const M: f64 = 0.2;

fn numeric(f: impl Fn(&[f64; 4]) -> f64, x: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|k| {
        let (mut a, mut b) = (*x, *x);
        a[k] += H;
        b[k] -= H;
        (f(&a) - f(&b)) / (2.0 * H)
    })
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

fn h_of(l: &[f64; 4]) -> f64 {
    entropy(&ProbVector::from_logits(*l))
}

fn logits() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-4.0f64..4.0)
}

proptest! {
    #[test]
    fn entropy_gradient(l in logits()) {
        let (_, g) = entropy_logit_grad(&l);
        prop_assert!(rel_err(&g, &numeric(h_of, &l)) < 1e-6);
    }

    #[test]
    fn cross_entropy_gradient(l in logits(), y in 0usize..4) {
        let r = Rotation::from_index(y);
        let (_, g) = crs_logit_grad(&l, r);
        prop_assert!(rel_err(&g, &numeric(|x| crs_logit_grad(x, r).0, &l)) < 1e-6);
    }

    #[test]
    fn separation_gradient_away_from_gate(l in logits()) {
        let d = (h_of(&l) - DEFAULT_RHO).abs();
        prop_assume!((d - M).abs() > 1e-3);
        let (_, g) = es_logit_grad(&l, DEFAULT_RHO, M);
        if d <= M {
            prop_assert_eq!(g, [0.0; 4]);
        } else {
            prop_assert!(rel_err(&g, &numeric(|x| es_logit_grad(x, DEFAULT_RHO, M).0, &l)) < 1e-6);
        }
    }

    #[test]
    fn filtered_gradient_away_from_gate(l in logits(), y in 0usize..4) {
        let r = Rotation::from_index(y);
        prop_assume!((h_of(&l) - DEFAULT_RHO + M).abs() > 1e-3);
        let (_, g) = filtered_crs_logit_grad(&l, r, DEFAULT_RHO, M);
        prop_assert!(rel_err(&g, &numeric(|x| filtered_crs_logit_grad(x, r, DEFAULT_RHO, M).0, &l)) < 1e-6);
    }

    #[test]
    fn filtered_equals_crs_below_gate(p in prop::array::uniform4(0.0f64..1.0), y in 0usize..4) {
        let s: f64 = p.iter().sum();
        prop_assume!(s > 1e-3);
        let pv = ProbVector::new(p.map(|x| x / s)).unwrap();
        let r = Rotation::from_index(y);
        let v = loss_crs_filtered(&pv, r, DEFAULT_RHO, M);
        if entropy(&pv) < DEFAULT_RHO - M {
            prop_assert_eq!(v, -pv.get(y).max(1e-12).ln());
        } else {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn batch_objectives(flat in prop::collection::vec(-4.0f64..4.0, 32), epoch in 1usize..=10) {
        let cfg = SamplerConfig { beta2: 10, ..Default::default() };
        let rows: Vec<[f64; 4]> = flat.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        let labels: Vec<Rotation> = (0..rows.len()).map(|i| Rotation::from_index(i % 4)).collect();
        let near_gate = rows.iter().any(|l| {
            let d = h_of(l) - DEFAULT_RHO;
            (d.abs() - M).abs() < 1e-3 || (d + M).abs() < 1e-3
        });
        prop_assume!(!near_gate);
        type Obj<'a> = dyn Fn(&[[f64; 4]]) -> (f64, Vec<[f64; 4]>) + 'a;
        let objs: [Box<Obj<'_>>; 2] = [
            Box::new(|r| step1_objective_grad(r, &labels, 2).unwrap()),
            Box::new(|r| step2_objective_grad(r, &labels, 2, epoch, &cfg).unwrap()),
        ];
        for obj in &objs {
            let (_, g) = obj(&rows);
            let mut num = Vec::new();
            for i in 0..rows.len() {
                for k in 0..4 {
                    let (mut a, mut b) = (rows.clone(), rows.clone());
                    a[i][k] += H;
                    b[i][k] -= H;
                    num.push((obj(&a).0 - obj(&b).0) / (2.0 * H));
                }
            }
            let flat_g: Vec<f64> = g.iter().flatten().copied().collect();
            prop_assert!(rel_err(&flat_g, &num) < 1e-6);
        }
    }
}
