use flowmend_nn::check::max_relative_error;
use flowmend_nn::{Graph, Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn check(name: &str, build: &dyn Fn(&mut Graph, &[Var]) -> Result<Var>, make: &dyn Fn(&mut ChaCha8Rng) -> Vec<Tensor>) {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = make(&mut rng);
        let err = max_relative_error(build, &inputs, H).unwrap();
        assert!(err < TOL, "{name} seed {seed}: relative error {err:e}");
    }
}

// Random linear functional of `x`, so upstream gradients are not all ones.
fn probe(g: &mut Graph, x: Var, seed: u64) -> Result<Var> {
    let flat = g.flatten(x);
    let len = g.value(flat).shape()[1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = g.input(rand_tensor(&mut rng, &[1, len]));
    let zero = g.input(Tensor::zeros(vec![1]));
    let y = g.dense(flat, row, zero)?;
    Ok(g.sum(y))
}

#[test]
fn conv3x3_gradients() {
    check(
        "conv3x3",
        &|g, v| {
            let y = g.conv3x3(v[0], v[1], v[2])?;
            probe(g, y, 99)
        },
        &|r| vec![rand_tensor(r, &[2, 2, 5, 4]), rand_tensor(r, &[3, 2, 3, 3]), rand_tensor(r, &[3])],
    );
}

#[test]
fn relu_gradients() {
    check("relu", &|g, v| { let y = g.relu(v[0]); probe(g, y, 7) }, &|r| vec![rand_tensor(r, &[2, 3, 4, 4])]);
}

#[test]
fn maxpool2_gradients() {
    check("maxpool2", &|g, v| { let y = g.maxpool2(v[0])?; probe(g, y, 8) }, &|r| vec![rand_tensor(r, &[2, 2, 4, 6])]);
}

#[test]
fn upsample2_gradients() {
    check("upsample2", &|g, v| { let y = g.upsample2(v[0])?; probe(g, y, 9) }, &|r| vec![rand_tensor(r, &[1, 2, 3, 3])]);
}

#[test]
fn concat_gradients() {
    check(
        "concat",
        &|g, v| { let y = g.concat_channels(v[0], v[1])?; probe(g, y, 10) },
        &|r| vec![rand_tensor(r, &[2, 1, 3, 3]), rand_tensor(r, &[2, 2, 3, 3])],
    );
}

#[test]
fn dense_gradients() {
    check(
        "dense",
        &|g, v| { let y = g.dense(v[0], v[1], v[2])?; probe(g, y, 11) },
        &|r| vec![rand_tensor(r, &[3, 5]), rand_tensor(r, &[4, 5]), rand_tensor(r, &[4])],
    );
}

#[test]
fn softmax_cross_entropy_gradients() {
    check(
        "softmax_ce",
        &|g, v| g.softmax_cross_entropy(v[0], &[0, 5, 3]),
        &|r| vec![rand_tensor(r, &[3, 6])],
    );
}

#[test]
fn mse_gradients() {
    check("mse", &|g, v| g.mse(v[0], v[1]), &|r| vec![rand_tensor(r, &[2, 2, 3, 3]), rand_tensor(r, &[2, 2, 3, 3])]);
}

#[test]
fn endpoint_gradients() {
    check("endpoint", &|g, v| g.endpoint(v[0], v[1]), &|r| vec![rand_tensor(r, &[2, 2, 3, 3]), rand_tensor(r, &[2, 2, 3, 3])]);
}

#[test]
fn wing_gradients_away_from_kink() {
    // residuals drawn from both branches but kept >= 0.05 away from |x| = w
    let w = 1.0;
    check(
        "wing",
        &move |g, v| g.wing(v[0], v[1], w, 0.5),
        &|r| {
            let a = rand_tensor(r, &[1, 2, 4, 4]);
            let b: Vec<f64> = a
                .data()
                .iter()
                .map(|x| {
                    let mut d: f64 = r.gen_range(-2.0..2.0);
                    if (d.abs() - 1.0).abs() < 0.05 {
                        d *= 0.8;
                    }
                    x - d
                })
                .collect();
            vec![a, Tensor::new(vec![1, 2, 4, 4], b).unwrap()]
        },
    );
}

#[test]
fn composed_two_layer_net_gradients() {
    check(
        "conv-relu-pool-dense-ce",
        &|g, v| {
            let c = g.conv3x3(v[0], v[1], v[2])?;
            let a = g.relu(c);
            let p = g.maxpool2(a)?;
            let f = g.flatten(p);
            let logits = g.dense(f, v[3], v[4])?;
            g.softmax_cross_entropy(logits, &[1, 4])
        },
        &|r| {
            vec![
                rand_tensor(r, &[2, 2, 4, 4]),
                rand_tensor(r, &[3, 2, 3, 3]),
                rand_tensor(r, &[3]),
                rand_tensor(r, &[6, 12]),
                rand_tensor(r, &[6]),
            ]
        },
    );
}

#[test]
fn disconnected_input_has_no_gradient() {
    let mut g = Graph::new();
    let x = g.input(Tensor::full(vec![1, 3], 2.0));
    let unused = g.input(Tensor::full(vec![4], 1.0));
    let s = g.sum(x);
    let grads = g.backward(s).unwrap();
    assert!(grads.wrt(unused).is_none());
}

#[test]
fn conv_matches_naive_loop_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cin, cout, h, w) = (1, 3, 4, 4);
        let x = rand_tensor(&mut rng, &[1, cin, h, w]);
        let k = rand_tensor(&mut rng, &[cout, cin, 3, 3]);
        let b = rand_tensor(&mut rng, &[cout]);
        let mut g = Graph::new();
        let (xv, kv, bv) = (g.input(x.clone()), g.input(k.clone()), g.input(b.clone()));
        let y = g.conv3x3(xv, kv, bv).unwrap();
        let got = g.value(y).data();
        for co in 0..cout {
            for yy in 0..h {
                for xx in 0..w {
                    let mut s = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = yy as isize + ky as isize - 1;
                                let sx = xx as isize + kx as isize - 1;
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                                    s += k.data()[((co * cin + ci) * 3 + ky) * 3 + kx]
                                        * x.data()[(ci * h + sy as usize) * w + sx as usize];
                                }
                            }
                        }
                    }
                    let v = got[(co * h + yy) * w + xx];
                    assert!((v - s).abs() <= 1e-12 * s.abs().max(1.0), "{v} vs {s}");
                }
            }
        }
    }
}
