use proptest::prelude::*;
use softorder::autograd::Graph;
use softorder::gradcheck::{finite_difference_grad, max_relative_error, RandomComposition, DEFAULT_STEP};
use softorder::ops::{conv2d_forward, maxpool2x2, maxpool2x2_backward, softmax_axis};
use softorder::{Real, Tensor};

fn tensor(shape: Vec<usize>, values: Vec<f64>) -> Tensor {
    Tensor::new(shape, values.into_iter().map(|v| v as Real).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn composed_graphs_match_finite_differences(seed in any::<u64>()) {
        let err = RandomComposition::new(seed).max_gradient_error(DEFAULT_STEP).unwrap();
        prop_assert!(err < 1e-5, "relative error {}", err);
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(v in prop::collection::vec(-1e3f64..1e3, 12)) {
        let t = tensor(vec![3, 4], v);
        for axis in 0..2 {
            let s = softmax_axis(&t, axis).unwrap();
            let (outer, len) = if axis == 1 { (3, 4) } else { (4, 3) };
            for o in 0..outer {
                let total: Real = (0..len)
                    .map(|i| if axis == 1 { s.at(&[o, i]) } else { s.at(&[i, o]) })
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxpool_routes_each_gradient_once(
        x in prop::collection::vec(-1.0f64..1.0, 2 * 4 * 6),
        g in prop::collection::vec(-1.0f64..1.0, 2 * 2 * 3),
    ) {
        let x = tensor(vec![1, 2, 4, 6], x);
        let grad = tensor(vec![1, 2, 2, 3], g);
        let (_, argmax) = maxpool2x2(&x).unwrap();
        let back = maxpool2x2_backward(&argmax, x.shape(), &grad);
        prop_assert!((back.sum() - grad.sum()).abs() < 1e-12);
        // Each 2x2 window receives exactly one nonzero (when the gradient is nonzero).
        for c in 0..2 {
            for wr in 0..2 {
                for wc in 0..3 {
                    let hits = (0..2)
                        .flat_map(|i| (0..2).map(move |j| (i, j)))
                        .filter(|&(i, j)| back.at(&[0, c, 2 * wr + i, 2 * wc + j]) != 0.0)
                        .count();
                    let gv = grad.at(&[0, c, wr, wc]);
                    prop_assert_eq!(hits, usize::from(gv != 0.0));
                }
            }
        }
    }

    #[test]
    fn conv_is_linear_in_input_and_kernel(
        k1 in prop::collection::vec(-1.0f64..1.0, 2 * 9),
        k2 in prop::collection::vec(-1.0f64..1.0, 2 * 9),
        x1 in prop::collection::vec(-1.0f64..1.0, 25),
        x2 in prop::collection::vec(-1.0f64..1.0, 25),
        b in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let (k1, k2) = (tensor(vec![2, 1, 3, 3], k1), tensor(vec![2, 1, 3, 3], k2));
        let (x1, x2) = (tensor(vec![1, 1, 5, 5], x1), tensor(vec![1, 1, 5, 5], x2));
        let b = tensor(vec![2], b);
        let zero_b = Tensor::zeros(&[2]);
        let f = |k: &Tensor, x: &Tensor, b: &Tensor| conv2d_forward(k, b, x).unwrap();
        // f(K, x1 + x2) = f(K, x1) + f(K, x2) - bias.
        let lhs = f(&k1, &x1.add(&x2).unwrap(), &b);
        let rhs = f(&k1, &x1, &b).add(&f(&k1, &x2, &b)).unwrap().sub(&f(&k1, &Tensor::zeros(&[1, 1, 5, 5]), &b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
        let lhs = f(&k1.add(&k2).unwrap(), &x1, &zero_b);
        let rhs = f(&k1, &x1, &zero_b).add(&f(&k2, &x1, &zero_b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }
}

#[test]
fn every_primitive_alone_matches_finite_differences() {
    type Build = fn(&mut Graph, softorder::autograd::NodeId) -> softorder::autograd::NodeId;
    let cases: Vec<(&str, Vec<usize>, Build)> = vec![
        ("sigmoid", vec![2, 3], |g, x| {
            g.activate(x, softorder::Activation::Sigmoid)
        }),
        ("relu", vec![2, 3], |g, x| g.activate(x, softorder::Activation::Relu)),
        ("softmax0", vec![3, 2], |g, x| g.softmax(x, 0).unwrap()),
        ("softmax1", vec![3, 2], |g, x| g.softmax(x, 1).unwrap()),
        ("square", vec![4], |g, x| g.mul(x, x).unwrap()),
        ("double", vec![4], |g, x| g.add(x, x).unwrap()),
        ("maxpool", vec![1, 1, 4, 4], |g, x| g.maxpool2x2(x).unwrap()),
        ("mean", vec![2, 5], |g, x| g.mean_features(x)),
        ("reshape", vec![2, 6], |g, x| g.reshape(x, &[3, 4]).unwrap()),
    ];
    let mut rng = softorder::Rng::seed_from(17);
    for (name, shape, build) in cases {
        let n: usize = shape.iter().product();
        let x0 = Tensor::new(
            shape.clone(),
            (0..n).map(|_| rng.uniform_range(-1.0, 1.0) as Real).collect(),
        )
        .unwrap();
        let weights = Tensor::new(vec![n], (0..n).map(|_| rng.uniform_range(-1.0, 1.0) as Real).collect()).unwrap();
        let scalar = |x: &Tensor| -> (Graph, softorder::autograd::NodeId, softorder::autograd::NodeId) {
            let mut g = Graph::new();
            let xin = g.input(x.clone());
            let y = build(&mut g, xin);
            let len = g.value(y).len();
            let flat = g.reshape(y, &[len]).unwrap();
            let w = g.constant(weights.clone().reshape(&[n]).unwrap());
            let out = if len == n {
                let prod = g.mul(flat, w).unwrap();
                g.sum(prod)
            } else {
                let sq = g.mul(flat, flat).unwrap();
                g.sum(sq)
            };
            (g, xin, out)
        };
        let (g, xin, out) = scalar(&x0);
        let analytic = g.backward(out, Tensor::scalar(1.0)).unwrap().wrt(xin).unwrap().clone();
        let numeric = finite_difference_grad(
            |t| {
                let (g, _, out) = scalar(t);
                Ok(g.value(out).clone())
            },
            &x0,
            DEFAULT_STEP,
        )
        .unwrap();
        let err = max_relative_error(&analytic, &numeric).unwrap();
        assert!(err < 1e-5, "{name}: {err}");
    }
}
