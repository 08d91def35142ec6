//! Finite-difference gradient checks at 64-bit. Each check runs one random
//! instance and returns the relative error between analytic and numeric
//! gradients, concatenated over every checked quantity.

use fractoseg_core::loss::{cross_entropy_loss, LossBatch};
use fractoseg_core::ops::*;
use fractoseg_core::unet::{Mode, UNetConfig, UNetModel};
use fractoseg_core::Tensor;
use rand::Rng;

use super::{away_from_zero, numeric_grad, rel_error, rng, sample_indices, uniform};

const H: f64 = 1e-6;
const MAX_COORDS: usize = 40;

fn probe_tensor(
    t: &Tensor<f64>,
    analytic: &[f64],
    rng: &mut rand_chacha::ChaCha8Rng,
    mut loss: impl FnMut(&Tensor<f64>) -> f64,
    a: &mut Vec<f64>,
    n: &mut Vec<f64>,
) {
    let idx = sample_indices(rng, t.len(), MAX_COORDS);
    let dims = t.dims();
    n.extend(numeric_grad(t.data(), &idx, H, |v| {
        loss(&Tensor::from_vec(dims, v.to_vec()).unwrap())
    }));
    a.extend(idx.iter().map(|&i| analytic[i]));
}

pub fn conv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (cin, cout) = (r.random_range(1..4), r.random_range(1..4));
    let k = r.random_range(1..4);
    let stride = r.random_range(1..3);
    let pad = r.random_range(0..k);
    let (h, w) = (r.random_range(k..8), r.random_range(k..8));
    let x = uniform(&mut r, [2, cin, h, w], -1.0, 1.0);
    let kernel = uniform(&mut r, [cout, cin, k, k], -1.0, 1.0);
    let bias: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
    let p = ConvParams::new(kernel.clone(), bias.clone(), stride, pad).unwrap();
    let y = conv2d_forward(&x, &p).unwrap();
    let g = uniform(&mut r, y.dims().as_array(), -1.0, 1.0);
    let grads = conv2d_backward(&x, &p, &g).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &x,
        grads.input.data(),
        &mut r,
        |xv| conv2d_forward(xv, &p).unwrap().dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    probe_tensor(
        &kernel,
        grads.kernel.data(),
        &mut r,
        |kv| {
            let q = ConvParams::new(kv.clone(), bias.clone(), stride, pad).unwrap();
            conv2d_forward(&x, &q).unwrap().dot(&g).unwrap()
        },
        &mut a,
        &mut n,
    );
    let bt = Tensor::from_vec([1, 1, 1, cout], bias.clone()).unwrap();
    probe_tensor(
        &bt,
        &grads.bias,
        &mut r,
        |bv| {
            let q = ConvParams::new(kernel.clone(), bv.data().to_vec(), stride, pad).unwrap();
            conv2d_forward(&x, &q).unwrap().dot(&g).unwrap()
        },
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

pub fn conv_transpose(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (cin, cout) = (r.random_range(1..4), r.random_range(1..4));
    let k = r.random_range(1..4);
    let stride = r.random_range(1..3);
    let pad = r.random_range(0..k);
    let (h, w) = (r.random_range(2..6), r.random_range(2..6));
    let x = uniform(&mut r, [2, cin, h, w], -1.0, 1.0);
    let kernel = uniform(&mut r, [cin, cout, k, k], -1.0, 1.0);
    let bias: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
    let p = ConvParams::new_transpose(kernel.clone(), bias.clone(), stride, pad).unwrap();
    let y = conv2d_transpose_forward(&x, &p).unwrap();
    let g = uniform(&mut r, y.dims().as_array(), -1.0, 1.0);
    let grads = conv2d_transpose_backward(&x, &p, &g).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &x,
        grads.input.data(),
        &mut r,
        |xv| conv2d_transpose_forward(xv, &p).unwrap().dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    probe_tensor(
        &kernel,
        grads.kernel.data(),
        &mut r,
        |kv| {
            let q = ConvParams::new_transpose(kv.clone(), bias.clone(), stride, pad).unwrap();
            conv2d_transpose_forward(&x, &q).unwrap().dot(&g).unwrap()
        },
        &mut a,
        &mut n,
    );
    let bt = Tensor::from_vec([1, 1, 1, cout], bias.clone()).unwrap();
    probe_tensor(
        &bt,
        &grads.bias,
        &mut r,
        |bv| {
            let q =
                ConvParams::new_transpose(kernel.clone(), bv.data().to_vec(), stride, pad).unwrap();
            conv2d_transpose_forward(&x, &q).unwrap().dot(&g).unwrap()
        },
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

pub fn relu(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = away_from_zero(&mut r, [2, 3, 5, 4]);
    let g = uniform(&mut r, [2, 3, 5, 4], -1.0, 1.0);
    let analytic = relu_backward(&x, &g).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &x,
        analytic.data(),
        &mut r,
        |xv| relu_forward(xv).dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

pub fn maxpool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (h, w) = (2 * r.random_range(1..4), 2 * r.random_range(1..4));
    let x = uniform(&mut r, [2, 2, h, w], -1.0, 1.0);
    let (y, idx) = maxpool2x2_forward(&x).unwrap();
    let g = uniform(&mut r, y.dims().as_array(), -1.0, 1.0);
    let analytic = maxpool2x2_backward(&idx, &g).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &x,
        analytic.data(),
        &mut r,
        |xv| maxpool2x2_forward(xv).unwrap().0.dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

pub fn concat(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (ca, cb) = (r.random_range(1..4), r.random_range(1..4));
    let xa = uniform(&mut r, [2, ca, 3, 4], -1.0, 1.0);
    let xb = uniform(&mut r, [2, cb, 3, 4], -1.0, 1.0);
    let g = uniform(&mut r, [2, ca + cb, 3, 4], -1.0, 1.0);
    let (ga, gb) = split_channels(&g, ca).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &xa,
        ga.data(),
        &mut r,
        |v| concat_channels(v, &xb).unwrap().dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    probe_tensor(
        &xb,
        gb.data(),
        &mut r,
        |v| concat_channels(&xa, v).unwrap().dot(&g).unwrap(),
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

pub fn softmax_cross_entropy(seed: u64) -> f64 {
    let mut r = rng(seed);
    let logits = uniform(&mut r, [2, 3, 4, 4], -3.0, 3.0);
    let targets: Vec<u8> = (0..32).map(|_| r.random_range(0..3)).collect();
    let ignore = r.random::<bool>().then_some(2u8);
    fn batch<'a>(l: &'a Tensor<f64>, t: &'a [u8], ignore: Option<u8>) -> LossBatch<'a, f64> {
        let b = LossBatch::new(l, t);
        match ignore {
            Some(i) => b.ignoring(i),
            None => b,
        }
    }
    let out = cross_entropy_loss(batch(&logits, &targets, ignore)).unwrap();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    probe_tensor(
        &logits,
        out.grad_logits.data(),
        &mut r,
        |l| cross_entropy_loss(batch(l, &targets, ignore)).unwrap().loss,
        &mut a,
        &mut n,
    );
    rel_error(&a, &n)
}

/// Two-stage toy U-net on a 16×16 input, 50 sampled parameters.
pub fn unet_end_to_end(seed: u64) -> f64 {
    let mut r = rng(seed);
    let config = UNetConfig {
        stages: 2,
        encoder_channels: vec![3, 4],
        conv_repeats: vec![2, 2],
        num_classes: 3,
        input_channels: 1,
    };
    let mut model: UNetModel<f64> = UNetModel::<f32>::build(config, seed).unwrap().cast();
    // Nonzero biases so bias gradients are exercised away from initialization.
    for l in 0..model.layers().len() {
        let name = model.layers()[l].spec.name.clone();
        for b in model.layer_mut(&name).unwrap().params.bias.iter_mut() {
            *b = r.random_range(-0.1..0.1);
        }
    }
    model.set_mode(Mode::Training);
    let x = uniform(&mut r, [2, 1, 16, 16], 0.0, 1.0);
    let targets: Vec<u8> = (0..512).map(|_| r.random_range(0..3)).collect();
    let logits = model.forward(&x).unwrap();
    let out = cross_entropy_loss(LossBatch::new(&logits, &targets)).unwrap();
    let grads = model.backward(&out.grad_logits).unwrap();

    // Flat view over (layer, is_bias, offset).
    let mut coords = Vec::new();
    for (li, l) in model.layers().iter().enumerate() {
        coords.extend((0..l.params.kernel.len()).map(|o| (li, false, o)));
        coords.extend((0..l.params.bias.len()).map(|o| (li, true, o)));
    }
    let picks = sample_indices(&mut r, coords.len(), 50);
    let mut infer = model.clone();
    infer.set_mode(Mode::Inference);
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for &p in &picks {
        let (li, is_bias, o) = coords[p];
        let name = infer.layers()[li].spec.name.clone();
        let analytic = if is_bias {
            grads.layers[li].bias[o]
        } else {
            grads.layers[li].kernel.data()[o]
        };
        let mut eval = |delta: f64| {
            let layer = infer.layer_mut(&name).unwrap();
            let slot = if is_bias {
                &mut layer.params.bias[o]
            } else {
                &mut layer.params.kernel.data_mut()[o]
            };
            let orig = *slot;
            *slot = orig + delta;
            let l = infer.infer(&x).unwrap();
            let loss = cross_entropy_loss(LossBatch::new(&l, &targets))
                .unwrap()
                .loss;
            let layer = infer.layer_mut(&name).unwrap();
            if is_bias {
                layer.params.bias[o] = orig
            } else {
                layer.params.kernel.data_mut()[o] = orig
            }
            loss
        };
        let numeric = (eval(H) - eval(-H)) / (2.0 * H);
        a.push(analytic);
        n.push(numeric);
    }
    rel_error(&a, &n)
}

pub const LAYER_CHECKS: [(&str, fn(u64) -> f64); 6] = [
    ("conv2d", conv),
    ("conv2d_transpose", conv_transpose),
    ("relu", relu),
    ("maxpool2x2", maxpool),
    ("concat", concat),
    ("softmax_cross_entropy", softmax_cross_entropy),
];
