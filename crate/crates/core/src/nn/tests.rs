use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn store(entries: &[(&str, Vec<usize>, Vec<f64>)]) -> ParamStore {
    let mut ps = ParamStore::new();
    for (name, shape, data) in entries {
        ps.insert(*name, Tensor::new(shape.clone(), data.clone()).unwrap()).unwrap();
    }
    ps
}

/// Central-difference gradient of `f` with respect to every parameter value.
fn numeric_grads(ps: &ParamStore, f: &dyn Fn(&ParamStore) -> f64) -> Vec<(String, Vec<f64>)> {
    let h = 1e-5;
    let mut out = Vec::new();
    for name in ps.names().map(str::to_string).collect::<Vec<_>>() {
        let n = ps.get(&name).unwrap().len();
        let mut g = vec![0.0; n];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut plus = ps.clone();
            plus.get_mut(&name).unwrap().data_mut()[i] += h;
            let mut minus = ps.clone();
            minus.get_mut(&name).unwrap().data_mut()[i] -= h;
            *gi = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out.push((name, g));
    }
    out
}

fn assert_grads_close(analytic: &std::collections::BTreeMap<String, Tensor>, numeric: &[(String, Vec<f64>)]) {
    for (name, num) in numeric {
        let ana = analytic[name].data();
        for (a, n) in ana.iter().zip(num) {
            let diff = (a - n).abs();
            let rel = diff / a.abs().max(n.abs()).max(1e-300);
            assert!(diff <= 1e-6 || rel <= 1e-6, "{name}: analytic {a} vs numeric {n}");
        }
    }
}

#[test]
fn embed_identity_table_gives_one_hot() {
    let mut eye = vec![0.0; 9];
    for i in 0..3 {
        eye[i * 3 + i] = 1.0;
    }
    let ps = store(&[("t.embedding", vec![3, 3], eye)]);
    let mut g = Graph::new();
    let t = g.param(&ps, "t.embedding").unwrap();
    let e = g.embed(t, &[2], &[1]).unwrap();
    assert_eq!(g.value(e).shape(), &[1, 3]);
    assert_eq!(g.value(e).data(), &[0.0, 0.0, 1.0]);
}

#[test]
fn embed_repeated_index_accumulates() {
    let ps = store(&[("t.embedding", vec![3, 2], vec![0.0; 6])]);
    let mut g = Graph::new();
    let t = g.param(&ps, "t.embedding").unwrap();
    let e = g.embed(t, &[1, 1], &[2]).unwrap();
    let flat = g.reshape(e, &[1, 4]).unwrap();
    let w = g.input(Tensor::new(vec![4, 1], vec![1.0; 4]).unwrap());
    let b = g.input(Tensor::from_vec(vec![0.0]));
    let s = g.linear(flat, w, b, false).unwrap();
    g.backward(s).unwrap();
    let grads = g.param_grads();
    assert_eq!(grads["t.embedding"].data(), &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
}

#[test]
fn embed_out_of_range_is_an_error() {
    let ps = store(&[("t.embedding", vec![3, 2], vec![0.0; 6])]);
    let mut g = Graph::new();
    let t = g.param(&ps, "t.embedding").unwrap();
    assert!(matches!(g.embed(t, &[3], &[1]), Err(Error::IndexOutOfRange { index: 3, rows: 3 })));
}

fn conv(input: (&[usize], Vec<f64>), k: usize, weight: Vec<f64>, bias: Vec<f64>) -> Vec<f64> {
    let d = input.0[2];
    let f = bias.len();
    let mut g = Graph::new();
    let x = g.input(Tensor::new(input.0.to_vec(), input.1).unwrap());
    let w = g.input(Tensor::new(vec![k * d, f], weight).unwrap());
    let b = g.input(Tensor::from_vec(bias));
    let y = g.conv_relu(x, w, b, k).unwrap();
    g.value(y).data().to_vec()
}

#[test]
fn conv_zero_input_zero_bias() {
    let out = conv((&[1, 4, 3], vec![0.0; 12]), 2, vec![0.7; 12], vec![0.0; 2]);
    assert_eq!(out, vec![0.0; 6]);
}

#[test]
fn conv_hand_example() {
    assert_eq!(conv((&[1, 2, 1], vec![1.0, -3.0]), 1, vec![2.0], vec![0.0]), vec![2.0, 0.0]);
}

#[test]
fn conv_dead_relu() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let out = conv((&[1, 20, 1], xs), 1, vec![1.0], vec![-5.0]);
    assert!(out.iter().all(|&v| v == 0.0));
}

#[test]
fn conv_two_wide_window() {
    // x = [[1,2],[3,4],[5,6]], k=2, one filter of ones, bias -1
    let out = conv((&[1, 3, 2], vec![1., 2., 3., 4., 5., 6.]), 2, vec![1.0; 4], vec![-1.0]);
    assert_eq!(out, vec![9.0, 17.0]);
}

#[test]
fn conv_short_sequence_rejected() {
    let mut g = Graph::new();
    let x = g.input(Tensor::zeros(&[1, 1, 2]));
    let w = g.input(Tensor::zeros(&[4, 1]));
    let b = g.input(Tensor::zeros(&[1]));
    assert!(g.conv_relu(x, w, b, 2).is_err());
}

#[test]
fn max_pool_basic_and_tie() {
    let mut g = Graph::new();
    let x = g.input(Tensor::new(vec![1, 3, 1], vec![1.0, 3.0, 2.0]).unwrap());
    let p = g.max_pool(x).unwrap();
    assert_eq!(g.value(p).data(), &[3.0]);

    let mut g = Graph::new();
    let x = g.input(Tensor::new(vec![1, 2, 1], vec![2.0, 2.0]).unwrap());
    let p = g.max_pool(x).unwrap();
    let s = g.sum(&[p]).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[1.0, 0.0]);
}

#[test]
fn max_pool_matches_column_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let data: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut brute = [f64::NEG_INFINITY; 3];
        for r in 0..5 {
            for c in 0..3 {
                brute[c] = brute[c].max(data[r * 3 + c]);
            }
        }
        let mut g = Graph::new();
        let x = g.input(Tensor::new(vec![1, 5, 3], data).unwrap());
        let p = g.max_pool(x).unwrap();
        assert_eq!(g.value(p).data(), &brute);
    }
}

#[test]
fn fully_connected_cases() {
    let mut g = Graph::new();
    let x = g.input(Tensor::from_vec(vec![0.3, -2.0]));
    let w = g.input(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = g.input(Tensor::from_vec(vec![0.0, 0.0]));
    let y = g.linear(x, w, b, false).unwrap();
    assert_eq!(g.value(y).data(), &[0.3, -2.0]);

    let x = g.input(Tensor::from_vec(vec![1.0, 2.0]));
    let w = g.input(Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap());
    let b = g.input(Tensor::from_vec(vec![0.5]));
    let y = g.linear(x, w, b, false).unwrap();
    assert_eq!(g.value(y).data(), &[3.5]);
}

#[test]
fn fully_connected_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ps = store(&[
        ("fc.weight", vec![3, 4], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        ("fc.bias", vec![4], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()),
    ]);
    let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let readout: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let build = |ps: &ParamStore| -> (Graph, Var) {
        let mut g = Graph::new();
        let xi = g.input(Tensor::from_vec(x.clone()));
        let w = g.param(ps, "fc.weight").unwrap();
        let b = g.param(ps, "fc.bias").unwrap();
        let h = g.linear(xi, w, b, false).unwrap();
        let r = g.input(Tensor::new(vec![4, 1], readout.clone()).unwrap());
        let z = g.input(Tensor::from_vec(vec![0.0]));
        let s = g.linear(h, r, z, false).unwrap();
        (g, s)
    };
    let (mut g, s) = build(&ps);
    g.backward(s).unwrap();
    let numeric = numeric_grads(&ps, &|p| {
        let (g, s) = build(p);
        g.value(s).data()[0]
    });
    assert_grads_close(&g.param_grads(), &numeric);
}

#[test]
fn conv_pool_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (t, d, f, k) = (5, 3, 2, 2);
    let ps = store(&[
        ("c.embedding", vec![6, d], (0..6 * d).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        ("c.weight", vec![k * d, f], (0..k * d * f).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        ("c.bias", vec![f], (0..f).map(|_| rng.gen_range(-0.5..0.5)).collect()),
    ]);
    let idx: Vec<usize> = (0..2 * t).map(|_| rng.gen_range(0..6)).collect();
    let build = |ps: &ParamStore| -> (Graph, Var) {
        let mut g = Graph::new();
        let tab = g.param(ps, "c.embedding").unwrap();
        let e = g.embed(tab, &idx, &[2, t]).unwrap();
        let w = g.param(ps, "c.weight").unwrap();
        let b = g.param(ps, "c.bias").unwrap();
        let c = g.conv_relu(e, w, b, k).unwrap();
        let p = g.max_pool(c).unwrap();
        let flat = g.reshape(p, &[1, 2 * f]).unwrap();
        let cat = g.concat(&[flat, flat]).unwrap();
        let r = g.input(Tensor::new(vec![4 * f, 1], (0..4 * f).map(|i| 0.3 * i as f64 - 0.5).collect()).unwrap());
        let z = g.input(Tensor::from_vec(vec![0.1]));
        let o = g.linear(cat, r, z, false).unwrap();
        let s = g.sigmoid(o);
        let l = g.bce(s, 1.0).unwrap();
        (g, l)
    };
    let (mut g, l) = build(&ps);
    g.backward(l).unwrap();
    let numeric = numeric_grads(&ps, &|p| {
        let (g, l) = build(p);
        g.value(l).data()[0]
    });
    assert_grads_close(&g.param_grads(), &numeric);
}

#[test]
fn dropout_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = Graph::new();
    let x = g.input(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
    let y = g.dropout(x, 1.0, &mut rng, true);
    assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
    let y = g.dropout(x, 0.5, &mut rng, false);
    assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
}

#[test]
fn dropout_keep_rate_and_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut g = Graph::new();
    let x = g.input(Tensor::from_vec(vec![1.0; n]));
    let y = g.dropout(x, 0.5, &mut rng, true);
    let kept = g.value(y).data().iter().filter(|&&v| v != 0.0).count();
    let rate = kept as f64 / n as f64;
    assert!((rate - 0.5).abs() < 0.01, "keep rate {rate}");
    assert!(g.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn backward_through_relu_and_scale() {
    let mut g = Graph::new();
    let x = g.input(Tensor::from_vec(vec![3.0]));
    let r = g.relu(x);
    let y = g.scale(r, 2.0);
    g.backward(y).unwrap();
    assert_eq!(g.value(y).data(), &[6.0]);
    assert_eq!(g.grad(x).unwrap(), &[2.0]);
}

#[test]
fn disconnected_parameter_has_zero_gradient() {
    let ps = store(&[("a.weight", vec![1], vec![2.0]), ("b.weight", vec![2], vec![1.0, 1.0])]);
    let mut g = Graph::new();
    let a = g.param(&ps, "a.weight").unwrap();
    let _b = g.param(&ps, "b.weight").unwrap();
    let y = g.scale(a, 3.0);
    g.backward(y).unwrap();
    let grads = g.param_grads();
    assert_eq!(grads["a.weight"].data(), &[3.0]);
    assert_eq!(grads["b.weight"].data(), &[0.0, 0.0]);
}

#[test]
fn gather_scatters_gradient() {
    let mut g = Graph::new();
    let x = g.input(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let y = g.gather(x, &[1, 1, 0]).unwrap();
    assert_eq!(g.value(y).data(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
    let flat = g.reshape(y, &[6]).unwrap();
    let w = g.input(Tensor::new(vec![6, 1], vec![1.0; 6]).unwrap());
    let b = g.input(Tensor::from_vec(vec![0.0]));
    let s = g.linear(flat, w, b, false).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0, 2.0, 2.0]);
}

#[test]
fn bce_gradient_through_sigmoid() {
    // d/dz BCE(sigmoid(z), y) = sigmoid(z) - y
    for &(z, y) in &[(0.3, 1.0), (-1.2, 0.0), (2.0, 0.0)] {
        let mut g = Graph::new();
        let x = g.input(Tensor::from_vec(vec![z]));
        let p = g.sigmoid(x);
        let l = g.bce(p, y).unwrap();
        g.backward(l).unwrap();
        assert!((g.grad(x).unwrap()[0] - (sigmoid(z) - y)).abs() < 1e-12);
    }
}
