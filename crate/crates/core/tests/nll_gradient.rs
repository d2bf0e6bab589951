mod oracle;

use ndarray::Array2;
use proptest::prelude::*;
use vrr_core::retriever::in_batch_nll;

fn batch() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(b, d)| {
        let m = prop::collection::vec(prop::collection::vec(-1.5f64..1.5, d), b);
        (m.clone(), m)
    })
}

fn array(rows: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_vec((rows.len(), rows[0].len()), rows.concat()).unwrap()
}

fn max_abs_diff(a: &Array2<f64>, b: &[Vec<f64>]) -> f64 {
    a.indexed_iter().map(|((i, k), x)| (x - b[i][k]).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_and_gradients_match_finite_differences((q, c) in batch()) {
        let out = in_batch_nll(array(&q).view(), array(&c).view()).unwrap();
        prop_assert!((out.loss - oracle::nll_loss(&q, &c)).abs() < 1e-10);
        prop_assert!(max_abs_diff(&out.grad_queries, &oracle::nll_numeric_grad(&q, &c, 0, 1e-3)) < 1e-4);
        prop_assert!(max_abs_diff(&out.grad_contexts, &oracle::nll_numeric_grad(&q, &c, 1, 1e-3)) < 1e-4);
    }

    #[test]
    fn loss_is_invariant_to_pair_order((q, c) in batch(), rot in 0usize..8) {
        let r = rot % q.len();
        let (mut q2, mut c2) = (q.clone(), c.clone());
        q2.rotate_left(r);
        c2.rotate_left(r);
        let a = in_batch_nll(array(&q).view(), array(&c).view()).unwrap();
        let b = in_batch_nll(array(&q2).view(), array(&c2).view()).unwrap();
        prop_assert!((a.loss - b.loss).abs() < 1e-12);
        prop_assert!(a.loss >= 0.0);
    }
}

#[test]
fn gradient_rows_sum_to_zero_against_constant_contexts() {
    // Identical contexts: every softmax is uniform, loss = ln B.
    let q = array(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 0.0]]);
    let c = array(&[vec![0.3, 0.3], vec![0.3, 0.3], vec![0.3, 0.3]]);
    let out = in_batch_nll(q.view(), c.view()).unwrap();
    assert!((out.loss - 3f64.ln()).abs() < 1e-12);
    assert!(out.grad_queries.iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn loss_vanishes_as_the_margin_grows() {
    let mut last = f64::INFINITY;
    for scale in [1.0, 4.0, 16.0, 64.0] {
        let q = array(&[vec![scale, 0.0], vec![0.0, scale]]);
        let c = array(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let loss = in_batch_nll(q.view(), c.view()).unwrap().loss;
        assert!(loss < last);
        last = loss;
    }
    assert!(last < 1e-20);
}
