use gsit_core::models::{
    gsit_forward, gsit_prediction_on_tape, mult_forward, mult_prediction_on_tape, naive_forward,
    naive_prediction_on_tape, split_segments, GsiTVars, GsiTWeights, ModelConfig, MulTVars, MulTWeights, NaiveVars,
    NaiveWeights,
};
use gsit_core::numkit::{Tape, Var};
use gsit_core::{Error, Rng, SegmentLayout, StructureName, Tensor2};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-2)
}

/// Checks every entry of every leaf against central differences of `loss`.
/// `build` records the loss on a fresh tape from the given leaf values and
/// returns the leaf handles and the loss node.
fn check<F>(leaves: &[Tensor2], build: F) -> f64
where
    F: Fn(&mut Tape, &[Tensor2]) -> (Vec<Var>, Var),
{
    let mut tape = Tape::new();
    let (vars, loss) = build(&mut tape, leaves);
    let grads = tape.backward(loss).unwrap();
    let eval = |vals: &[Tensor2]| {
        let mut t = Tape::new();
        let (_, l) = build(&mut t, vals);
        t.value(l)[(0, 0)]
    };
    let mut worst: f64 = 0.0;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(&tape, *var);
        for idx in 0..leaves[k].len() {
            let mut plus = leaves.to_vec();
            plus[k].data_mut()[idx] += STEP;
            let mut minus = leaves.to_vec();
            minus[k].data_mut()[idx] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            let e = rel_err(analytic.data()[idx], numeric);
            assert!(
                e <= TOL,
                "leaf {k} entry {idx}: analytic {} numeric {numeric} rel {e}",
                analytic.data()[idx]
            );
            worst = worst.max(e);
        }
    }
    worst
}

fn leaves_of(tape: &mut Tape, vals: &[Tensor2]) -> Vec<Var> {
    vals.iter().map(|v| tape.leaf(v.clone())).collect()
}

#[test]
fn linear_sum_gradient_is_outer_product() {
    // loss = W x for a 1×3 row W, so dW = xᵀ.
    let x = Tensor2::from_rows(&[&[1.5], &[-2.0], &[0.5]]).unwrap();
    let w = Tensor2::from_rows(&[&[0.1, 0.2, 0.3]]).unwrap();
    let mut tape = Tape::new();
    let wv = tape.leaf(w);
    let xv = tape.leaf(x.clone());
    let loss = tape.matmul(wv, xv).unwrap();
    let g = tape.backward(loss).unwrap();
    assert_eq!(g.get(wv).unwrap(), &x.transpose());
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor2::zeros(2, 1));
    assert!(matches!(
        tape.backward(a),
        Err(Error::NonScalarLoss { rows: 2, cols: 1 })
    ));
}

#[test]
fn primitive_gradients_match_finite_differences() {
    for seed in 0..20u64 {
        let mut rng = Rng::new(1000 + seed);
        let a = rng.normal_tensor(3, 4, 1.0);
        let b = rng.normal_tensor(4, 5, 1.0);
        let c = rng.normal_tensor(5, 4, 1.0);
        let same = rng.normal_tensor(3, 4, 1.0);
        let t35 = rng.normal_tensor(3, 5, 1.0);
        let t34 = rng.normal_tensor(3, 4, 1.0);
        let t38 = rng.normal_tensor(3, 8, 1.0);
        let t24 = rng.normal_tensor(2, 4, 1.0);
        let t14 = rng.normal_tensor(1, 4, 1.0);
        let mut mask = Tensor2::zeros(3, 4);
        mask[(0, 1)] = f64::NEG_INFINITY;
        mask[(2, 3)] = f64::NEG_INFINITY;
        mask[(2, 0)] = f64::NEG_INFINITY;

        check(&[a.clone(), b.clone()], |t, v| {
            let l = leaves_of(t, v);
            let y = t.matmul(l[0], l[1]).unwrap();
            (l, t.mse(y, &t35).unwrap())
        });
        check(&[a.clone(), c.clone()], |t, v| {
            let l = leaves_of(t, v);
            let y = t.matmul_t(l[0], l[1]).unwrap();
            (l, t.mse(y, &t35).unwrap())
        });
        check(&[a.clone(), same.clone()], |t, v| {
            let l = leaves_of(t, v);
            let y = t.add(l[0], l[1]).unwrap();
            (l, t.mse(y, &t34).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.scale(l[0], -0.7);
            (l, t.mse(y, &t34).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.softmax_rows(l[0], None).unwrap();
            (l, t.mse(y, &t34.scale(0.2)).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.softmax_rows(l[0], Some(&mask)).unwrap();
            (l, t.mse(y, &t34.scale(0.2)).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.relu(l[0]);
            (l, t.mse(y, &t34).unwrap())
        });
        check(&[a.clone(), same.clone()], |t, v| {
            let l = leaves_of(t, v);
            let y = t.concat_cols(&l).unwrap();
            (l, t.mse(y, &t38).unwrap())
        });
        check(std::slice::from_ref(&t38), |t, v| {
            let l = leaves_of(t, v);
            let y = t.slice_cols(l[0], 2, 6).unwrap();
            (l, t.mse(y, &t34).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.slice_rows(l[0], 1, 3).unwrap();
            (l, t.mse(y, &t24).unwrap())
        });
        check(std::slice::from_ref(&a), |t, v| {
            let l = leaves_of(t, v);
            let y = t.select_last_row(l[0]).unwrap();
            (l, t.mse(y, &t14).unwrap())
        });
    }
}

fn gsit_leaves(w: &GsiTWeights) -> Vec<Tensor2> {
    let mut out = Vec::new();
    for enc in [&w.forward, &w.backward, &w.intra] {
        out.extend(enc.arrays().iter().map(|(_, t)| (*t).clone()));
    }
    out.push((*w.f).clone());
    out
}

fn gsit_from_leaves(template: &GsiTWeights, vals: &[Tensor2]) -> GsiTWeights {
    let mut w = template.clone();
    for (k, enc) in [&mut w.forward, &mut w.backward, &mut w.intra].into_iter().enumerate() {
        let enc = std::sync::Arc::make_mut(enc);
        for (slot, val) in enc.arrays_mut().into_iter().zip(&vals[5 * k..5 * k + 5]) {
            *slot = val.clone();
        }
    }
    *std::sync::Arc::make_mut(&mut w.f) = vals[15].clone();
    w
}

#[test]
fn full_gsit_loss_matches_finite_differences() {
    let layout = SegmentLayout::new(2, 2, 2).unwrap();
    let cfg = ModelConfig::new(layout, 4, 8, 1).unwrap();
    for seed in 0..5u64 {
        let mut rng = Rng::new(77 + seed);
        let template = GsiTWeights::random(&cfg, &mut rng, 0.5).unwrap();
        let v_m = rng.normal_tensor(6, 4, 1.0);
        let target = Tensor2::filled(1, 1, rng.uniform(-1.0, 1.0));
        let leaves = gsit_leaves(&template);
        let worst = check(&leaves, |t, vals| {
            let w = gsit_from_leaves(&template, vals);
            let vars = GsiTVars::new(t, &w);
            let x = t.leaf(v_m.clone());
            let pred = gsit_prediction_on_tape(t, &vars, x, &layout, StructureName::Original).unwrap();
            let mut l = Vec::new();
            for e in [vars.forward, vars.backward, vars.intra] {
                l.extend(e.vars());
            }
            l.push(vars.f);
            (l, t.mse(pred, &target).unwrap())
        });
        assert!(worst <= TOL);
    }
}

#[test]
fn tape_forwards_match_eager_forwards() {
    let mut rng = Rng::new(5);
    let layout = SegmentLayout::new(3, 2, 4).unwrap();
    let cfg = ModelConfig::new(layout, 4, 8, 2).unwrap().with_out_dim(2);
    let v_m = rng.normal_tensor(9, 4, 1.0);

    let g = GsiTWeights::random(&cfg, &mut rng, 0.5).unwrap();
    for s in [
        StructureName::Original,
        StructureName::Structure2,
        StructureName::SelfOnly,
    ] {
        let mut tape = Tape::new();
        let vars = GsiTVars::new(&mut tape, &g);
        let x = tape.leaf(v_m.clone());
        let p = gsit_prediction_on_tape(&mut tape, &vars, x, &layout, s).unwrap();
        let eager = gsit_forward(&g, &v_m, &layout, s).unwrap().prediction;
        assert_eq!(tape.value(p).data(), &eager[..]);
    }

    let m = MulTWeights::random(&cfg, &mut rng, 0.5).unwrap();
    let mut tape = Tape::new();
    let vars = MulTVars::new(&mut tape, &m);
    let x = tape.leaf(v_m.clone());
    let p = mult_prediction_on_tape(&mut tape, &vars, x, &layout).unwrap();
    let eager = mult_forward(&m, &split_segments(&v_m, &layout).unwrap()).unwrap();
    let diff = gsit_core::numkit::max_abs_diff(tape.value(p), &Tensor2::new(1, 2, eager.prediction).unwrap());
    assert!(diff <= 1e-12, "{diff}");

    let n = NaiveWeights::random(&cfg, &mut rng, 0.5).unwrap();
    let mut tape = Tape::new();
    let vars = NaiveVars::new(&mut tape, &n);
    let x = tape.leaf(v_m.clone());
    let p = naive_prediction_on_tape(&mut tape, &vars, x, &layout).unwrap();
    let eager = naive_forward(&n, &v_m, &layout).unwrap().prediction;
    let diff = gsit_core::numkit::max_abs_diff(tape.value(p), &Tensor2::new(1, 2, eager).unwrap());
    assert!(diff <= 1e-12, "{diff}");
}

#[test]
fn mult_loss_matches_finite_differences() {
    let layout = SegmentLayout::new(1, 2, 2).unwrap();
    let cfg = ModelConfig::new(layout, 2, 2, 1).unwrap();
    let mut rng = Rng::new(3);
    let template = MulTWeights::random(&cfg, &mut rng, 0.7).unwrap();
    let v_m = rng.normal_tensor(5, 2, 1.0);
    let target = Tensor2::filled(1, 1, 0.3);
    let mut leaves: Vec<Tensor2> = Vec::new();
    for enc in template.cross_all().iter().chain(template.intra_all()) {
        leaves.extend(enc.arrays().iter().map(|(_, t)| (*t).clone()));
    }
    leaves.push((*template.f).clone());
    check(&leaves, |t, vals| {
        let mut w = template.clone();
        let pairs = gsit_core::models::CROSS_PAIRS;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            for (slot, v) in w.cross_mut(i, j).arrays_mut().into_iter().zip(&vals[5 * k..]) {
                *slot = v.clone();
            }
        }
        for (k, m) in gsit_core::Modality::ALL.into_iter().enumerate() {
            for (slot, v) in w.intra_mut(m).arrays_mut().into_iter().zip(&vals[30 + 5 * k..]) {
                *slot = v.clone();
            }
        }
        *std::sync::Arc::make_mut(&mut w.f) = vals[45].clone();
        let vars = MulTVars::new(t, &w);
        let x = t.leaf(v_m.clone());
        let pred = mult_prediction_on_tape(t, &vars, x, &layout).unwrap();
        let mut l: Vec<Var> = Vec::new();
        for e in vars.cross.iter().chain(&vars.intra) {
            l.extend(e.vars());
        }
        l.push(vars.f);
        (l, t.mse(pred, &target).unwrap())
    });
}
