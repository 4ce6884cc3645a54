use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn tensor_rejects_inconsistent_length() {
    assert!(matches!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]), Err(Error::Dimension(_))));
    let mut t = Tensor::<f32>::zeros(vec![2, 2]);
    assert!(t.set_grad(vec![0.0; 3]).is_err());
    t.set_grad(vec![1.0; 4]).unwrap();
    assert_eq!(t.grad().unwrap().len(), 4);
}

#[test]
fn affine_identity_and_scalar() {
    let mut store = ParamStore::<f32>::new();
    let w = store.add("w", Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(), false);
    let b = store.add("b", Tensor::zeros(vec![2]), true);
    let w1 = store.add("w1", Tensor::matrix(1, 1, vec![2.0]).unwrap(), false);
    let b1 = store.add("b1", Tensor::new(vec![1], vec![1.0]).unwrap(), true);
    let mut g = Eager::new(&store, false);
    let x = g.input(Tensor::matrix(3, 2, vec![0.5, -1.0, 2.0, 3.0, -4.0, 0.25]).unwrap());
    let (wv, bv) = (g.param(w), g.param(b));
    let y = g.affine(&x, &wv, Some(&bv)).unwrap();
    assert_eq!(g.value(&y).data(), g.value(&x).data());

    let x = g.input(Tensor::matrix(1, 1, vec![3.0]).unwrap());
    let (wv, bv) = (g.param(w1), g.param(b1));
    let y = g.affine(&x, &wv, Some(&bv)).unwrap();
    assert_eq!(g.value(&y).data(), &[7.0]);
}

#[test]
fn affine_shape_mismatch_is_dimension_error() {
    let mut store = ParamStore::<f32>::new();
    let w = store.add("w", Tensor::zeros(vec![3, 2]), false);
    let mut tape = Tape::new(&store, true);
    let x = tape.input(Tensor::zeros(vec![4, 2]));
    let wv = tape.param(w);
    assert!(matches!(tape.affine(&x, &wv, None), Err(Error::Dimension(_))));
}

#[test]
fn affine_gradient_matches_central_differences() {
    // 4×3 input, 3×2 weight; loss = Σ R ⊙ (xW + b) for a fixed random R.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::<f64>::new();
    let w = store.add("w", rand_tensor(&mut rng, vec![3, 2]), false);
    let b = store.add("b", rand_tensor(&mut rng, vec![2]), true);
    let x = rand_tensor(&mut rng, vec![4, 3]);
    let r: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let report = check_store(
        &mut store,
        |t| {
            let xv = t.input(x.clone());
            let (wv, bv) = (t.param(w), t.param(b));
            let y = t.affine(&xv, &wv, Some(&bv))?;
            t.dot_const(&y, r.clone())
        },
        1e-3,
        None,
        0,
    )
    .unwrap();
    assert_eq!(report.checked, 8);
    assert!(report.max_rel_error <= 1e-4, "{report:?}");

    // Input gradient through the same op, against finite differences on x.
    let grads = {
        let mut t = Tape::new(&store, true);
        let xv = t.input(x.clone());
        let (wv, bv) = (t.param(w), t.param(b));
        let y = t.affine(&xv, &wv, Some(&bv)).unwrap();
        let l = t.dot_const(&y, r.clone()).unwrap();
        let g = t.backward(l).unwrap();
        g.wrt_input(xv).unwrap().to_vec()
    };
    let rep = finite_diff_check(
        |th| {
            let mut t = Eager::new(&store, true);
            let xv = t.input(Tensor::matrix(4, 3, th.to_vec())?);
            let (wv, bv) = (t.param(w), t.param(b));
            let y = t.affine(&xv, &wv, Some(&bv))?;
            let l = t.dot_const(&y, r.clone())?;
            Ok(t.value(&l).item())
        },
        x.data(),
        &grads,
        1e-3,
        None,
    )
    .unwrap();
    assert!(rep.max_rel_error <= 1e-4, "{rep:?}");
}

fn norm_store(c: usize) -> (ParamStore<f32>, ParamId, ParamId, NormId) {
    let mut store = ParamStore::<f32>::new();
    let gamma = store.add("g", Tensor::full(vec![c], 1.0), true);
    let beta = store.add("b", Tensor::zeros(vec![c]), true);
    let norm = store.add_norm("n", c);
    (store, gamma, beta, norm)
}

#[test]
fn batch_norm_train_normalizes_by_batch_statistics() {
    let (store, gamma, beta, norm) = norm_store(1);
    let mut t = Tape::new(&store, true);
    let x = t.input(Tensor::matrix(2, 1, vec![1.0, 3.0]).unwrap());
    let (g, b) = (t.param(gamma), t.param(beta));
    let y = t.batch_norm(&x, &g, &b, norm).unwrap();
    // mean 2, biased variance 1: (x - 2) / sqrt(1 + 1e-5)
    let expect = 1.0 / (1.0f32 + 1e-5).sqrt();
    let out = t.value(&y).data();
    assert!((out[0] + expect).abs() < 1e-6 && (out[1] - expect).abs() < 1e-6);
    let upd = t.take_norm_updates();
    assert_eq!(upd.len(), 1);
    assert_eq!(upd[0].mean, vec![2.0]);
    // unbiased: 2 / 1
    assert_eq!(upd[0].var, vec![2.0]);
}

#[test]
fn batch_norm_running_state_updates_by_moving_average() {
    let (mut store, gamma, beta, norm) = norm_store(1);
    let upd = {
        let mut t = Tape::new(&store, true);
        let x = t.input(Tensor::matrix(2, 1, vec![1.0, 3.0]).unwrap());
        let (g, b) = (t.param(gamma), t.param(beta));
        t.batch_norm(&x, &g, &b, norm).unwrap();
        t.take_norm_updates()
    };
    store.apply_norm_updates(&upd);
    let s = store.norm(norm);
    assert!((s.mean[0] - 0.2).abs() < 1e-7);
    assert!((s.var[0] - 1.1).abs() < 1e-6);
}

#[test]
fn batch_norm_eval_with_unit_state_is_identity() {
    let (store, gamma, beta, norm) = norm_store(2);
    let mut t = Eager::new(&store, false);
    let data = vec![0.5, -2.0, 3.0, 1.0];
    let x = t.input(Tensor::matrix(2, 2, data.clone()).unwrap());
    let (g, b) = (t.param(gamma), t.param(beta));
    let y = t.batch_norm(&x, &g, &b, norm).unwrap();
    for (o, i) in t.value(&y).data().iter().zip(&data) {
        assert!((o - i / (1.0f32 + 1e-5).sqrt()).abs() < 1e-6);
    }
    assert!(t.take_norm_updates().is_empty());
}

#[test]
fn batch_norm_constant_column_gives_zeros() {
    let (store, gamma, beta, norm) = norm_store(1);
    let mut t = Eager::new(&store, true);
    let x = t.input(Tensor::matrix(3, 1, vec![4.0, 4.0, 4.0]).unwrap());
    let (g, b) = (t.param(gamma), t.param(beta));
    let y = t.batch_norm(&x, &g, &b, norm).unwrap();
    assert!(t.value(&y).data().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn batch_norm_empty_batch_errors() {
    let (store, gamma, beta, norm) = norm_store(1);
    let mut t = Eager::new(&store, true);
    let x = t.input(Tensor::zeros(vec![0, 1]));
    let (g, b) = (t.param(gamma), t.param(beta));
    assert!(matches!(t.batch_norm(&x, &g, &b, norm), Err(Error::EmptyBatch)));
}

#[test]
fn batch_norm_gradients_match_finite_differences() {
    for train in [true, false] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::new();
        let gamma = store.add("g", rand_tensor(&mut rng, vec![3]), true);
        let beta = store.add("b", rand_tensor(&mut rng, vec![3]), true);
        let w = store.add("w", rand_tensor(&mut rng, vec![2, 3]), false);
        let norm = store.add_norm("n", 3);
        store.norm_mut(norm).mean = vec![0.1, -0.2, 0.3];
        store.norm_mut(norm).var = vec![0.5, 2.0, 1.5];
        let x = rand_tensor(&mut rng, vec![5, 2]);
        let r: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |t: &mut Tape<'_, f64>| {
            let xv = t.input(x.clone());
            let wv = t.param(w);
            let h = t.affine(&xv, &wv, None)?;
            let (g, b) = (t.param(gamma), t.param(beta));
            let y = t.batch_norm(&h, &g, &b, norm)?;
            t.dot_const(&y, r.clone())
        };
        let grads = {
            let mut t = Tape::new(&store, train);
            let l = loss(&mut t).unwrap();
            t.backward(l).unwrap()
        };
        for id in [gamma, beta, w] {
            let theta = store.tensor(id).data().to_vec();
            let analytic = grads.dense(id);
            let mut s2 = store.clone();
            let rep = finite_diff_check(
                |th| {
                    s2.tensor_mut(id).data_mut().copy_from_slice(th);
                    let mut t = Tape::new(&s2, train);
                    let l = loss(&mut t)?;
                    Ok(t.value_of(l))
                },
                &theta,
                &analytic,
                1e-4,
                None,
            )
            .unwrap();
            assert!(rep.max_rel_error < 1e-5, "train={train} {rep:?}");
        }
    }
}

#[test]
fn relu_forward_and_gate() {
    let store = ParamStore::<f32>::new();
    let mut t = Tape::new(&store, true);
    let x = t.input(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap());
    let y = t.relu(&x);
    assert_eq!(t.value(&y).data(), &[0.0, 0.0, 2.0]);
    let l = t.dot_const(&y, vec![5.0, 5.0, 5.0]).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.wrt_input(x).unwrap(), &[0.0, 0.0, 5.0]);

    let nonneg = t.input(Tensor::new(vec![2], vec![0.0, 3.5]).unwrap());
    let y = t.relu(&nonneg);
    assert_eq!(t.value(&y).data(), &[0.0, 3.5]);
}

#[test]
fn max_reduce_picks_max_and_routes_ties_to_first() {
    let store = ParamStore::<f32>::new();
    let mut t = Tape::new(&store, true);
    let x = t.input(Tensor::new(vec![3, 1], vec![1.0, 5.0, 3.0]).unwrap());
    let y = t.max_reduce(&x, 3).unwrap();
    assert_eq!(t.value(&y).data(), &[5.0]);

    let eq = t.input(Tensor::new(vec![4, 2], vec![2.0; 8]).unwrap());
    let y = t.max_reduce(&eq, 4).unwrap();
    let l = t.dot_const(&y, vec![1.0, 3.0]).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.wrt_input(eq).unwrap(), &[1.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn max_reduce_is_symmetric_under_neighbor_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let store = ParamStore::<f32>::new();
    let (p, k, c) = (5, 6, 4);
    let data: Vec<f32> = (0..p * k * c).map(|_| rng.gen()).collect();
    let mut permuted = data.clone();
    for g in 0..p {
        let mut rows: Vec<Vec<f32>> = (0..k).map(|j| data[(g * k + j) * c..(g * k + j + 1) * c].to_vec()).collect();
        rows.reverse();
        rows.rotate_left(2);
        for (j, r) in rows.iter().enumerate() {
            permuted[(g * k + j) * c..(g * k + j + 1) * c].copy_from_slice(r);
        }
    }
    let mut e = Eager::new(&store, false);
    let a = e.input(Tensor::matrix(p * k, c, data).unwrap());
    let b = e.input(Tensor::matrix(p * k, c, permuted).unwrap());
    let ya = e.max_reduce(&a, k).unwrap();
    let yb = e.max_reduce(&b, k).unwrap();
    assert_eq!(e.value(&ya), e.value(&yb));
}

#[test]
fn max_reduce_empty_neighborhood_errors() {
    let store = ParamStore::<f32>::new();
    let mut t = Eager::new(&store, false);
    let x = t.input(Tensor::zeros(vec![2, 1]));
    assert!(matches!(t.max_reduce(&x, 0), Err(Error::EmptyNeighborhood)));
}

#[test]
fn backward_sum_of_squares_gives_2x() {
    let mut store = ParamStore::<f32>::new();
    let x = store.add("x", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap(), false);
    let mut t = Tape::new(&store, true);
    let xv = t.param(x);
    let l = t.sum_squares(&xv);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(x).unwrap(), &[2.0, -4.0, 1.0]);
}

#[test]
fn backward_relu_of_identity_map() {
    // loss = Σ relu(x W), W = I, x > 0  ⇒  dW[i][j] = x_i.
    let mut store = ParamStore::<f32>::new();
    let w = store.add("w", Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap(), false);
    let mut t = Tape::new(&store, true);
    let x = t.input(Tensor::matrix(1, 3, vec![0.5, 1.5, 2.0]).unwrap());
    let wv = t.param(w);
    let h = t.affine(&x, &wv, None).unwrap();
    let y = t.relu(&h);
    let l = t.dot_const(&y, vec![1.0; 3]).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(w).unwrap(), &[0.5, 0.5, 0.5, 1.5, 1.5, 1.5, 2.0, 2.0, 2.0]);
}

#[test]
fn backward_requires_scalar_and_zero_fills_unreachable() {
    let mut store = ParamStore::<f32>::new();
    let used = store.add("used", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap(), false);
    let unused = store.add("unused", Tensor::new(vec![3], vec![1.0; 3]).unwrap(), false);
    let mut t = Tape::new(&store, true);
    let u = t.param(used);
    assert!(matches!(t.backward(u), Err(Error::Contract(_))));
    let l = t.sum_squares(&u);
    let g = t.backward(l).unwrap();
    assert!(g.get(unused).is_none());
    assert_eq!(g.dense(unused), vec![0.0; 3]);
    drop(t);
    g.write_to(&mut store).unwrap();
    assert_eq!(store.tensor(unused).grad().unwrap(), &[0.0; 3]);
    assert_eq!(store.tensor(used).grad().unwrap(), &[2.0, 4.0]);
}

#[test]
fn shared_parameter_accumulates() {
    let mut store = ParamStore::<f32>::new();
    let p = store.add("p", Tensor::new(vec![1], vec![3.0]).unwrap(), false);
    let mut t = Tape::new(&store, true);
    let a = t.param(p);
    let b = t.param(p);
    let s = t.add(&a, &b).unwrap();
    let l = t.sum_squares(&s);
    // loss = (2p)^2, d/dp = 8p
    assert_eq!(t.backward(l).unwrap().get(p).unwrap(), &[24.0]);
}

#[test]
fn finite_diff_quadratic_error_is_tiny() {
    let theta = [0.3, -1.2, 2.0];
    let f = |x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[1] * x[1] - x[0] * x[2] + 0.5 * x[2] * x[2]);
    let analytic = [2.0 * 0.3 - 2.0, 6.0 * -1.2, -0.3 + 2.0];
    let rep = finite_diff_check(f, &theta, &analytic, 1e-3, None).unwrap();
    assert!(rep.max_rel_error < 1e-6, "{rep:?}");
    assert!(rep.skipped.is_empty());
}

#[test]
fn finite_diff_linear_is_exact_up_to_rounding() {
    let theta = [1.0, 2.0];
    let rep = finite_diff_check(|x| Ok(3.0 * x[0] - 0.5 * x[1]), &theta, &[3.0, -0.5], 1e-3, None).unwrap();
    assert!(rep.max_rel_error < 1e-10);
}

#[test]
fn finite_diff_skips_relu_kink() {
    let theta = [0.0, 1.0];
    let f = |x: &[f64]| Ok(x[0].max(0.0) + x[1] * x[1]);
    let rep = finite_diff_check(f, &theta, &[0.0, 2.0], 1e-3, None).unwrap();
    assert_eq!(rep.skipped, vec![0]);
    assert_eq!(rep.checked, 1);
    assert!(rep.max_rel_error < 1e-8);
}

#[test]
fn finite_diff_non_finite_objective_errors() {
    let r = finite_diff_check(|x| Ok((x[0] - 1.0).ln()), &[1.0005], &[2000.0], 1e-3, None);
    assert!(matches!(r, Err(Error::Numeric(_))));
}

fn composite_loss(t: &mut Tape<'_, f32>, w: ParamId, g: ParamId, b: ParamId, n: NormId) -> Var {
    let x = t.input(Tensor::matrix(6, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0, 0.0, 0.3]).unwrap());
    let wv = t.param(w);
    let h = t.affine(&x, &wv, None).unwrap();
    let (gv, bv) = (t.param(g), t.param(b));
    let h = t.batch_norm(&h, &gv, &bv, n).unwrap();
    let h = t.relu(&h);
    let m = t.max_reduce(&h, 3).unwrap();
    t.sum_squares(&m)
}

#[test]
fn identical_passes_give_bit_identical_gradients_and_replay_after_reset() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::<f32>::new();
    let w = store.add_weight("w", 2, 4, &mut rng);
    let g = store.add("g", Tensor::full(vec![4], 1.0), true);
    let b = store.add("b", Tensor::zeros(vec![4]), true);
    let n = store.add_norm("n", 4);
    let mut t = Tape::new(&store, true);
    let l1 = composite_loss(&mut t, w, g, b, n);
    let g1 = t.backward(l1).unwrap();
    let v1 = t.value_of(l1);
    let ops1 = t.ops();
    t.reset();
    assert!(t.is_empty());
    let l2 = composite_loss(&mut t, w, g, b, n);
    let g2 = t.backward(l2).unwrap();
    assert_eq!(v1.to_bits(), t.value_of(l2).to_bits());
    assert_eq!(ops1, t.ops());
    for id in [w, g, b] {
        let a: Vec<u32> = g1.dense(id).iter().map(|v| v.to_bits()).collect();
        let c: Vec<u32> = g2.dense(id).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, c);
    }
}

#[test]
fn gather_concat_interp_gradients_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut store = ParamStore::<f64>::new();
    let p = store.add("p", rand_tensor(&mut rng, vec![4, 3]), false);
    let q = store.add("q", rand_tensor(&mut rng, vec![6, 2]), false);
    let extra = rand_tensor(&mut rng, vec![6, 3]);
    let r: Vec<f64> = (0..6 * 10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rep = check_store(
        &mut store,
        |t| {
            let pv = t.param(p);
            let qv = t.param(q);
            let g = t.gather(&pv, vec![0, 3, 3, 1, 2, 0], Some(extra.clone()))?;
            let i = t.weighted_gather(&pv, vec![0, 1, 2, 3, 2, 1, 0, 0, 1, 2, 3, 3, 1, 1, 1, 2, 0, 3], vec![0.2, 0.3, 0.5, 0.6, 0.2, 0.2, 1.0, 0.0, 0.0, 0.1, 0.1, 0.8, 0.5, 0.25, 0.25, 0.3, 0.3, 0.4], 3)?;
            let ii = t.concat(&i, &i)?;
            let g = t.add(&g, &ii)?;
            let c = t.concat(&g, &qv)?;
            let c = t.concat(&c, &qv)?;
            let m = t.mul_const(&c, (0..60).map(|j| if j % 5 == 0 { 0.0 } else { 2.0 }).collect())?;
            t.dot_const(&m, r.clone())
        },
        1e-4,
        None,
        1,
    );
    let rep = rep.unwrap();
    assert!(rep.max_rel_error < 1e-6, "{rep:?}");
}

#[test]
fn losses_have_correct_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::<f64>::new();
    let z = store.add("z", rand_tensor(&mut rng, vec![5, 4]), false);
    let targets = [0usize, 3, 1, 1, 2];
    let weights = [1.0, 0.0, 2.0, 1.0, 0.5];
    let ce = check_store(&mut store, |t| {
        let zv = t.param(z);
        t.cross_entropy(&zv, &targets, 0.2, Some(&weights))
    }, 1e-4, None, 0).unwrap();
    assert!(ce.max_rel_error < 1e-6, "{ce:?}");
    let pf = check_store(&mut store, |t| {
        let zv = t.param(z);
        t.poly_focal(&zv, &targets, 2.0, 0.25, 1.0, None)
    }, 1e-4, None, 0).unwrap();
    assert!(pf.max_rel_error < 1e-6, "{pf:?}");
}
