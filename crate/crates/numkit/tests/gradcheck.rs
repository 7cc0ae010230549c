//! Randomized finite-difference gradient checks for every differentiable
//! kernel on the tape. Each kernel gets at least 100 random instances; the
//! analytic gradient must match central differences (eps = 1e-5) within a
//! max relative error of 1e-4.

use std::rc::Rc;

use numkit::gradcheck::{finite_diff_grad, max_rel_error};
use numkit::{Array, DropoutMode, NodeId, Prng, Tape};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;
const CASES: usize = 100;

type Build = Rc<dyn Fn(&mut Tape, &[NodeId]) -> NodeId>;

struct Instance {
    inputs: Vec<Array>,
    weights: Option<Array>,
    build: Build,
}

impl Instance {
    fn new(inputs: Vec<Array>, build: Build) -> Self {
        // Probe the output shape once so the scalarization weights are fixed
        // across analytic and numeric evaluations.
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
        let out = build(&mut tape, &ids);
        let weights = if tape.value(out).is_scalar() {
            None
        } else {
            let mut rng = Prng::new(0xC0FFEE);
            let n = tape.value(out).numel();
            Some(Array::from_vec(tape.value(out).shape().to_vec(), rng.uniform_vec(n, 1.0)).unwrap())
        };
        Instance {
            inputs,
            weights,
            build,
        }
    }

    fn forward(&self, override_input: Option<(usize, &[f64])>) -> (Tape, Vec<NodeId>, NodeId) {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let arr = match override_input {
                    Some((j, data)) if j == i => {
                        Array::from_vec(a.shape().to_vec(), data.to_vec()).unwrap()
                    }
                    _ => a.clone(),
                };
                tape.leaf(arr)
            })
            .collect();
        let out = (self.build)(&mut tape, &ids);
        let root = match &self.weights {
            None => out,
            Some(w) => {
                let wid = tape.leaf(w.clone());
                let prod = tape.mul(out, wid).unwrap();
                tape.sum(prod)
            }
        };
        (tape, ids, root)
    }

    fn scalar(&self, override_input: Option<(usize, &[f64])>) -> f64 {
        let (tape, _, root) = self.forward(override_input);
        tape.value(root).item()
    }

    fn check(&self) -> f64 {
        let (mut tape, ids, root) = self.forward(None);
        tape.backward(root).unwrap();
        let mut worst = 0.0f64;
        for (i, id) in ids.iter().enumerate() {
            let analytic = match tape.grad(*id) {
                Some(g) => g.data().to_vec(),
                None => vec![0.0; self.inputs[i].numel()],
            };
            let base = self.inputs[i].data().to_vec();
            let numeric = finite_diff_grad(
                |x| self.scalar(Some((i, x))),
                &base,
                EPS,
            );
            worst = worst.max(max_rel_error(&analytic, &numeric));
        }
        worst
    }
}

fn run_cases(name: &str, mut gen: impl FnMut(&mut Prng) -> Instance) {
    let mut rng = Prng::new(0x5EED ^ name.len() as u64);
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut case_rng = rng.fork();
        let inst = gen(&mut case_rng);
        let err = inst.check();
        assert!(
            err <= TOL,
            "{name} case {case}: max relative gradient error {err:.3e} > {TOL:.1e}"
        );
        worst = worst.max(err);
    }
    println!("gradcheck {name}: {CASES} cases, worst rel err {worst:.3e}");
}

fn rand_array(rng: &mut Prng, shape: &[usize]) -> Array {
    let n = shape.iter().product();
    Array::from_vec(shape.to_vec(), rng.uniform_vec(n, 2.0)).unwrap()
}

/// Random values bounded away from zero, for kink-free relu probing.
fn rand_array_off_kink(rng: &mut Prng, shape: &[usize]) -> Array {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.uniform(0.05, 2.0);
            if rng.unit() < 0.5 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Array::from_vec(shape.to_vec(), data).unwrap()
}

#[test]
fn grad_matmul() {
    run_cases("matmul", |rng| {
        let m = rng.usize_below(4) + 1;
        let k = rng.usize_below(4) + 1;
        let p = rng.usize_below(4) + 1;
        Instance::new(
            vec![rand_array(rng, &[m, k]), rand_array(rng, &[k, p])],
            Rc::new(|t, ids| t.matmul(ids[0], ids[1]).unwrap()),
        )
    });
}

#[test]
fn grad_temporal_conv1d() {
    run_cases("temporal_conv1d", |rng| {
        let c_in = rng.usize_below(3) + 1;
        let c_out = rng.usize_below(3) + 1;
        let v = rng.usize_below(3) + 1;
        let k = [1, 3, 5][rng.usize_below(3)];
        let t_len = k + rng.usize_below(8);
        let stride = rng.usize_below(2) + 1;
        let padding = rng.usize_below(2);
        if t_len + 2 * padding < k {
            // Degenerate draw; use a safe fallback length.
            unreachable!();
        }
        Instance::new(
            vec![
                rand_array(rng, &[c_in, t_len, v]),
                rand_array(rng, &[c_out, c_in, k]),
            ],
            Rc::new(move |t, ids| t.temporal_conv1d(ids[0], ids[1], stride, padding).unwrap()),
        )
    });
}

#[test]
fn grad_softmax() {
    run_cases("softmax", |rng| {
        let r = rng.usize_below(4) + 1;
        let c = rng.usize_below(4) + 2;
        let axis = rng.usize_below(2);
        Instance::new(
            vec![rand_array(rng, &[r, c])],
            Rc::new(move |t, ids| t.softmax(ids[0], axis).unwrap()),
        )
    });
}

#[test]
fn grad_mse() {
    run_cases("mse", |rng| {
        let n = rng.usize_below(12) + 1;
        Instance::new(
            vec![rand_array(rng, &[n]), rand_array(rng, &[n])],
            Rc::new(|t, ids| t.mse(ids[0], ids[1]).unwrap()),
        )
    });
}

#[test]
fn grad_add_sub_mul() {
    run_cases("add", |rng| {
        let n = rng.usize_below(10) + 1;
        Instance::new(
            vec![rand_array(rng, &[n]), rand_array(rng, &[n])],
            Rc::new(|t, ids| t.add(ids[0], ids[1]).unwrap()),
        )
    });
    run_cases("sub", |rng| {
        let n = rng.usize_below(10) + 1;
        Instance::new(
            vec![rand_array(rng, &[n]), rand_array(rng, &[n])],
            Rc::new(|t, ids| t.sub(ids[0], ids[1]).unwrap()),
        )
    });
    run_cases("mul", |rng| {
        let n = rng.usize_below(10) + 1;
        Instance::new(
            vec![rand_array(rng, &[n]), rand_array(rng, &[n])],
            Rc::new(|t, ids| t.mul(ids[0], ids[1]).unwrap()),
        )
    });
}

#[test]
fn grad_relu() {
    run_cases("relu", |rng| {
        let n = rng.usize_below(12) + 2;
        Instance::new(
            vec![rand_array_off_kink(rng, &[n])],
            Rc::new(|t, ids| t.relu(ids[0])),
        )
    });
}

#[test]
fn grad_dropout_train_mode() {
    run_cases("dropout", |rng| {
        let n = rng.usize_below(12) + 2;
        let p = [0.0, 0.25, 0.5][rng.usize_below(3)];
        let mask_seed = rng.usize_below(1 << 30) as u64;
        Instance::new(
            vec![rand_array(rng, &[n])],
            Rc::new(move |t, ids| {
                // Same seed on every evaluation: the mask is part of the
                // function under test, not fresh noise.
                let mut mask_rng = Prng::new(mask_seed);
                t.dropout(ids[0], p, DropoutMode::Train, &mut mask_rng).unwrap()
            }),
        )
    });
}

#[test]
fn grad_layer_norm() {
    run_cases("layer_norm", |rng| {
        let r = rng.usize_below(3) + 1;
        let d = rng.usize_below(5) + 2;
        Instance::new(
            vec![
                rand_array(rng, &[r, d]),
                rand_array(rng, &[d]),
                rand_array(rng, &[d]),
            ],
            Rc::new(|t, ids| t.layer_norm(ids[0], ids[1], ids[2], 1e-5).unwrap()),
        )
    });
}

#[test]
fn grad_add_bias() {
    run_cases("add_bias", |rng| {
        let c = rng.usize_below(3) + 1;
        let t_len = rng.usize_below(3) + 1;
        let v = rng.usize_below(3) + 1;
        let axis = rng.usize_below(3);
        let dims = [c, t_len, v];
        Instance::new(
            vec![rand_array(rng, &dims), rand_array(rng, &[dims[axis]])],
            Rc::new(move |t, ids| t.add_bias(ids[0], ids[1], axis).unwrap()),
        )
    });
}

#[test]
fn grad_scale() {
    run_cases("scale", |rng| {
        let n = rng.usize_below(10) + 1;
        let f = rng.uniform(-3.0, 3.0);
        Instance::new(
            vec![rand_array(rng, &[n])],
            Rc::new(move |t, ids| t.scale(ids[0], f)),
        )
    });
}

#[test]
fn grad_mean_axis() {
    run_cases("mean_axis", |rng| {
        let a = rng.usize_below(3) + 1;
        let b = rng.usize_below(3) + 1;
        let c = rng.usize_below(3) + 1;
        let axis = rng.usize_below(3);
        Instance::new(
            vec![rand_array(rng, &[a, b, c])],
            Rc::new(move |t, ids| t.mean_axis(ids[0], axis).unwrap()),
        )
    });
}

#[test]
fn grad_sum() {
    run_cases("sum", |rng| {
        let n = rng.usize_below(10) + 1;
        Instance::new(
            vec![rand_array(rng, &[n])],
            Rc::new(|t, ids| t.sum(ids[0])),
        )
    });
}

#[test]
fn grad_concat_and_slice() {
    run_cases("concat_cols", |rng| {
        let r = rng.usize_below(3) + 1;
        let c1 = rng.usize_below(3) + 1;
        let c2 = rng.usize_below(3) + 1;
        Instance::new(
            vec![rand_array(rng, &[r, c1]), rand_array(rng, &[r, c2])],
            Rc::new(|t, ids| t.concat_cols(ids).unwrap()),
        )
    });
    run_cases("slice_cols", |rng| {
        let r = rng.usize_below(3) + 1;
        let c = rng.usize_below(4) + 2;
        let start = rng.usize_below(c - 1);
        let len = rng.usize_below(c - start) + 1;
        Instance::new(
            vec![rand_array(rng, &[r, c])],
            Rc::new(move |t, ids| t.slice_cols(ids[0], start, len).unwrap()),
        )
    });
}

#[test]
fn grad_reshape_transpose_repeat() {
    run_cases("reshape", |rng| {
        let r = rng.usize_below(3) + 1;
        let c = rng.usize_below(3) + 1;
        Instance::new(
            vec![rand_array(rng, &[r, c])],
            Rc::new(move |t, ids| t.reshape(ids[0], &[c, r]).unwrap()),
        )
    });
    run_cases("transpose", |rng| {
        let r = rng.usize_below(4) + 1;
        let c = rng.usize_below(4) + 1;
        Instance::new(
            vec![rand_array(rng, &[r, c])],
            Rc::new(|t, ids| t.transpose2d(ids[0]).unwrap()),
        )
    });
    run_cases("repeat_t", |rng| {
        let c = rng.usize_below(3) + 1;
        let t_len = rng.usize_below(3) + 1;
        let v = rng.usize_below(3) + 1;
        let factor = rng.usize_below(3) + 1;
        Instance::new(
            vec![rand_array(rng, &[c, t_len, v])],
            Rc::new(move |t, ids| t.repeat_t(ids[0], factor).unwrap()),
        )
    });
}

/// Composite graphs: several kernels chained, gradient checked end to end.
#[test]
fn grad_composite_graph() {
    run_cases("composite", |rng| {
        let n = rng.usize_below(3) + 2;
        let d = rng.usize_below(3) + 2;
        Instance::new(
            vec![
                rand_array_off_kink(rng, &[n, d]),
                rand_array(rng, &[d, d]),
                rand_array(rng, &[d]),
                rand_array(rng, &[n, d]),
            ],
            Rc::new(|t, ids| {
                let h = t.matmul(ids[0], ids[1]).unwrap();
                let h = t.add_bias(h, ids[2], 1).unwrap();
                let h = t.relu(h);
                let s = t.softmax(h, 1).unwrap();
                t.mse(s, ids[3]).unwrap()
            }),
        )
    });
}
