use crate::common::{gradcheck, project, random_input, random_spec, random_tensor, rng, with_params};
use prescient::layers::{
    mean_pool, DualHeads, Gru, GruConfig, Linear, PositionalEncoding, Tcn, TcnConfig, TransformerConfig,
    TransformerEncoder,
};
use prescient::models::{hybrid_loss, Direction, Model};
use prescient::params::{Bound, ParamLayout};
use prescient::tensor::{Tape, Tensor, Var};
use prescient::Result;
use rand::Rng;

const SHAPES: u64 = 20;
const TOL: f64 = 1e-4;

fn dims(seed: u64) -> (usize, usize) {
    let mut r = rng(seed);
    (r.random_range(1..=5), r.random_range(1..=5))
}

fn check(name: &str, seed: u64, inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let g = gradcheck(inputs, seed, f);
    assert!(g.checked > 0, "{name}: nothing checked");
    assert!(g.max_rel_error < TOL, "{name} seed {seed}: relative error {:e} at {:?}", g.max_rel_error, g.worst);
}

fn unary(name: &str, op: impl Fn(&mut Tape, Var) -> Result<Var> + Copy) {
    for seed in 0..SHAPES {
        let (m, n) = dims(seed);
        let x = random_tensor(&mut rng(seed + 100), &[m, n], 2.0);
        check(name, seed, &[x], |t, v| {
            let y = op(t, v[0])?;
            project(t, y, seed)
        });
    }
}

fn binary(name: &str, op: impl Fn(&mut Tape, Var, Var) -> Result<Var> + Copy) {
    for seed in 0..SHAPES {
        let (m, n) = dims(seed);
        let mut r = rng(seed + 200);
        let a = random_tensor(&mut r, &[m, n], 2.0);
        let b = random_tensor(&mut r, &[m, n], 2.0);
        check(name, seed, &[a, b], |t, v| {
            let y = op(t, v[0], v[1])?;
            project(t, y, seed)
        });
    }
}

pub fn elementwise_primitives() {
    binary("add", |t, a, b| t.add(a, b));
    binary("sub", |t, a, b| t.sub(a, b));
    binary("mul", |t, a, b| t.mul(a, b));
    unary("scale", |t, a| t.scale(a, -1.7));
    unary("add_scalar", |t, a| t.add_scalar(a, 0.3));
    unary("sigmoid", |t, a| t.sigmoid(a));
    unary("tanh", |t, a| t.tanh(a));
    unary("gelu", |t, a| t.gelu(a));
    unary("transpose", |t, a| t.transpose(a));
    unary("sum", |t, a| t.sum(a));
}

pub fn relu_away_from_the_kink() {
    for seed in 0..SHAPES {
        let (m, n) = dims(seed);
        let mut x = random_tensor(&mut rng(seed + 300), &[m, n], 2.0);
        for v in x.data_mut() {
            if v.abs() < 0.05 {
                *v += 0.1;
            }
        }
        check("relu", seed, &[x], |t, v| {
            let y = t.relu(v[0])?;
            project(t, y, seed)
        });
    }
}

pub fn shape_primitives() {
    for seed in 0..SHAPES {
        let (m, n) = dims(seed);
        let k = rng(seed + 1).random_range(1..=4);
        let mut r = rng(seed + 400);
        let a = random_tensor(&mut r, &[m, k], 1.0);
        let b = random_tensor(&mut r, &[k, n], 1.0);
        check("matmul", seed, &[a.clone(), b.clone()], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, seed)
        });
        let bias = random_tensor(&mut r, &[k], 1.0);
        check("add_bias", seed, &[a.clone(), bias], |t, v| {
            let y = t.add_bias(v[0], v[1])?;
            project(t, y, seed)
        });
        let c = random_tensor(&mut r, &[m, n], 1.0);
        check("concat", seed, &[a.clone(), c.clone()], |t, v| {
            let y = t.concat(&[v[0], v[1]], 1)?;
            project(t, y, seed)
        });
        let start = r.random_range(0..k);
        let len = r.random_range(1..=k - start);
        check("slice", seed, std::slice::from_ref(&a), |t, v| {
            let y = t.slice(v[0], 1, start, len)?;
            project(t, y, seed)
        });
        check("reshape", seed, std::slice::from_ref(&a), |t, v| {
            let y = t.reshape(v[0], &[m * k])?;
            project(t, y, seed)
        });
        for axis in 0..2 {
            check("mean_over_axis", seed, std::slice::from_ref(&c), |t, v| {
                let y = t.mean_over_axis(v[0], axis)?;
                project(t, y, seed)
            });
            check("softmax_over_axis", seed, std::slice::from_ref(&c), |t, v| {
                let y = t.softmax_over_axis(v[0], axis)?;
                project(t, y, seed)
            });
        }
    }
}

pub fn normalization_dropout_and_losses() {
    for seed in 0..SHAPES {
        let (m, n) = dims(seed);
        let n = n + 1;
        let mut r = rng(seed + 500);
        let x = random_tensor(&mut r, &[m, n], 2.0);
        let gamma = random_tensor(&mut r, &[n], 1.5);
        let beta = random_tensor(&mut r, &[n], 1.0);
        check("layer_norm", seed, &[x.clone(), gamma, beta], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5)?;
            project(t, y, seed)
        });
        let mask: Vec<f64> = (0..m * n).map(|_| r.random_range(0..2) as f64).collect();
        check("dropout", seed, std::slice::from_ref(&x), |t, v| {
            let y = t.dropout(v[0], &mask, 0.7)?;
            project(t, y, seed)
        });
        let target = random_tensor(&mut r, &[m, n], 2.0);
        check("huber_mean", seed, &[x.clone(), target], |t, v| t.huber_mean(v[0], v[1], 0.8));
        let labels = Tensor::new(vec![m, n], (0..m * n).map(|_| r.random_range(0..2) as f64).collect()).unwrap();
        check("bce_with_logits_mean", seed, std::slice::from_ref(&x), |t, v| {
            let y = t.constant(labels.clone())?;
            t.bce_with_logits_mean(v[0], y)
        });
    }
}

pub fn causal_dilated_conv() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 600);
        let (t_len, c_in, c_out) = (r.random_range(1..=7), r.random_range(1..=3), r.random_range(1..=3));
        let k = r.random_range(1..=3);
        let dilation = r.random_range(1..=3);
        let x = random_tensor(&mut r, &[t_len, c_in], 1.0);
        let w = random_tensor(&mut r, &[c_out, c_in, k], 1.0);
        check("causal_dilated_conv1d", seed, &[x, w], |t, v| {
            let y = t.causal_dilated_conv1d(v[0], v[1], dilation)?;
            project(t, y, seed)
        });
    }
}

/// Checks a layer with respect to its input and every parameter.
fn layer_check(
    name: &str,
    seed: u64,
    layout: &ParamLayout,
    input: Tensor,
    forward: impl Fn(&mut Tape, &Bound, Var) -> Result<Var>,
) {
    let params = layout.init(seed);
    let inputs = with_params(&[input], &params);
    check(name, seed, &inputs, |t, v| {
        let p = Bound::from_vars(v[1..].to_vec());
        let y = forward(t, &p, v[0])?;
        project(t, y, seed)
    });
}

pub fn tcn_layer() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 700);
        let cfg =
            TcnConfig::new(r.random_range(1..=3), r.random_range(1..=4), r.random_range(1..=3), r.random_range(1..=3));
        let mut layout = ParamLayout::new();
        let tcn = Tcn::new(cfg.clone(), &mut layout, "tcn").unwrap();
        let rows = r.random_range(1..=6);
        let x = random_tensor(&mut r, &[rows, cfg.in_features], 1.0);
        layer_check("tcn", seed, &layout, x, |t, p, x| tcn.forward(t, p, x));
    }
}

pub fn gru_layer() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 800);
        let cfg = GruConfig { input_size: r.random_range(1..=3), hidden_size: r.random_range(1..=4) };
        let mut layout = ParamLayout::new();
        let gru = Gru::new(cfg.clone(), &mut layout, "gru").unwrap();
        let rows = r.random_range(1..=6);
        let x = random_tensor(&mut r, &[rows, cfg.input_size], 1.0);
        layer_check("gru", seed, &layout, x, |t, p, x| gru.forward(t, p, x));
    }
}

pub fn transformer_layer() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 900);
        let heads = r.random_range(1..=2);
        let cfg = TransformerConfig {
            model_dim: heads * r.random_range(1..=3),
            heads,
            feedforward_dim: r.random_range(1..=5),
            layers: r.random_range(1..=2),
            positional_encoding: if seed % 2 == 0 { PositionalEncoding::Sinusoidal } else { PositionalEncoding::None },
        };
        let mut layout = ParamLayout::new();
        let enc = TransformerEncoder::new(cfg.clone(), &mut layout, "enc").unwrap();
        let rows = r.random_range(1..=5);
        let x = random_tensor(&mut r, &[rows, cfg.model_dim], 1.0);
        layer_check("transformer", seed, &layout, x, |t, p, x| enc.forward(t, p, x));
    }
}

pub fn pooling_and_heads() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 1000);
        let (rows, latent) = (r.random_range(1..=4), r.random_range(1..=4));
        let (n_cont, n_disc) = match seed % 3 {
            0 => (r.random_range(1..=3), 0),
            1 => (0, r.random_range(1..=3)),
            _ => (r.random_range(1..=3), r.random_range(1..=3)),
        };
        let mut layout = ParamLayout::new();
        let heads = DualHeads::new(&mut layout, "heads", latent, rows, n_cont, n_disc).unwrap();
        let rows = r.random_range(1..=5);
        let z = random_tensor(&mut r, &[rows, latent], 1.0);
        layer_check("heads", seed, &layout, z, |t, p, z| {
            let pooled = mean_pool(t, z)?;
            let out = heads.forward(t, p, pooled)?;
            let parts: Vec<Var> = [out.cont, out.disc].into_iter().flatten().collect();
            let flat: Vec<Var> = parts
                .iter()
                .map(|&v| {
                    let n = t.value(v).len();
                    t.reshape(v, &[n])
                })
                .collect::<Result<_>>()?;
            if flat.len() == 1 {
                Ok(flat[0])
            } else {
                t.concat(&flat, 0)
            }
        });
        let mut layout = ParamLayout::new();
        let lin = Linear::new(&mut layout, "lin", latent, rows);
        let x = random_tensor(&mut r, &[3, latent], 1.0);
        layer_check("linear", seed, &layout, x, |t, p, x| lin.forward(t, p, x));
    }
}

pub fn hybrid_loss_gradient() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 1100);
        let rows = r.random_range(1..=3);
        let (nc, nd) = (r.random_range(0..=3), r.random_range(1..=3));
        let pc = random_tensor(&mut r, &[rows, nc.max(1)], 2.0);
        let tc = random_tensor(&mut r, &[rows, nc.max(1)], 2.0);
        let pd = random_tensor(&mut r, &[rows, nd], 2.0);
        let td = Tensor::new(vec![rows, nd], (0..rows * nd).map(|_| r.random_range(0..2) as f64).collect()).unwrap();
        let (alpha, beta, delta) = (r.random_range(0.1..2.0), r.random_range(0.1..2.0), r.random_range(0.2..2.0));
        check("hybrid_loss", seed, &[pc, pd], |t, v| {
            let cont = (nc > 0).then_some(v[0]);
            let true_cont = (nc > 0).then(|| t.constant(tc.clone())).transpose()?;
            let true_disc = t.constant(td.clone())?;
            hybrid_loss(t, cont, true_cont, Some(v[1]), Some(true_disc), alpha, beta, delta)
        });
    }
}

pub fn full_model_loss() {
    for seed in 0..SHAPES {
        let mut r = rng(seed + 1200);
        let direction = if seed % 2 == 0 { Direction::Forward } else { Direction::Backward };
        let spec = random_spec(&mut r, direction);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(seed);
        let x = random_input(&mut r, &spec, spec.input_rows());
        let y = random_input(&mut r, &spec, spec.output_rows());
        let inputs = with_params(&[x], &params);
        check("model", seed, &inputs, |t, v| {
            let p = Bound::from_vars(v[1..].to_vec());
            let trace = model.forward(t, &p, v[0], None)?;
            model.loss(t, &trace.heads, &y)
        });
    }
}
