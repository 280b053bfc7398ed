//! Minimal dense networks with explicit backpropagation and Adam.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let mut draw = || F::from_f64(rng.random_range(-bound..bound)).unwrap();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw);
        let b = Array1::from_shape_simple_fn(fan_out, &mut draw);
        Self { w, b }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    fn apply<F: Scalar>(self, z: &Array2<F>) -> Array2<F> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(F::zero())),
            Activation::LeakyRelu(a) => {
                let a = F::from_f64(a).unwrap();
                z.mapv(|v| if v > F::zero() { v } else { v * a })
            }
        }
    }

    fn backward<F: Scalar>(self, z: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
        let slope = match self {
            Activation::Relu => F::zero(),
            Activation::LeakyRelu(a) => F::from_f64(a).unwrap(),
        };
        let mut dz = dy.clone();
        dz.zip_mut_with(z, |g, &v| {
            if v <= F::zero() {
                *g = *g * slope;
            }
        });
        dz
    }
}

/// Hidden layers share one activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Mlp<F> {
    pub layers: Vec<Linear<F>>,
    pub activation: Activation,
}

/// Per-layer (input, pre-activation) pairs recorded by a training forward pass.
pub struct Cache<F> {
    inputs: Vec<Array2<F>>,
    pre: Vec<Array2<F>>,
}

pub struct Gradients<F> {
    pub layers: Vec<(Array2<F>, Array1<F>)>,
}

impl<F: Scalar> Mlp<F> {
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut Rng) -> Self {
        let layers = sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Self { layers, activation }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            if i < last {
                h = self.activation.apply(&h);
            }
        }
        h
    }

    pub fn forward_train(&self, x: &Array2<F>) -> (Array2<F>, Cache<F>) {
        let last = self.layers.len() - 1;
        let mut cache = Cache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.forward(&h);
            cache.inputs.push(h);
            h = if i < last { self.activation.apply(&z) } else { z.clone() };
            cache.pre.push(z);
        }
        (h, cache)
    }

    /// Gradients of the parameters and of the network input given dL/d(output).
    pub fn backward(&self, cache: &Cache<F>, d_out: &Array2<F>) -> (Gradients<F>, Array2<F>) {
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                d = self.activation.backward(&cache.pre[i], &d);
            }
            let dw = cache.inputs[i].t().dot(&d);
            let db = d.sum_axis(Axis(0));
            d = d.dot(&self.layers[i].w.t());
            grads.push((dw, db));
        }
        grads.reverse();
        (Gradients { layers: grads }, d)
    }
}

impl<F: Scalar> Mlp<F> {
    /// Gradient penalty `weight * mean_b (||d out_b / d x_b|| - 1)^2` for a
    /// scalar-output network with piecewise-linear activations, and its
    /// parameter gradients. Activation slopes are locally constant, so the
    /// input gradient is a product of weight matrices and slope masks.
    pub fn gradient_penalty(&self, x: &Array2<F>, weight: f64) -> (f64, Gradients<F>) {
        let n_layers = self.layers.len();
        assert_eq!(self.layers[n_layers - 1].w.ncols(), 1, "scalar output required");
        let batch = x.nrows();
        let (_, cache) = self.forward_train(x);
        let slope = match self.activation {
            Activation::Relu => F::zero(),
            Activation::LeakyRelu(a) => F::from_f64(a).unwrap(),
        };
        let masks: Vec<Array2<F>> = cache.pre[..n_layers - 1]
            .iter()
            .map(|z| z.mapv(|v| if v > F::zero() { F::one() } else { slope }))
            .collect();

        // r_l = d out / d (input of layer l), one row per sample
        let top = self.layers[n_layers - 1].w.column(0).to_owned();
        let mut r = Array2::from_shape_fn((batch, top.len()), |(_, j)| top[j]);
        let mut qs = vec![Array2::zeros((0, 0)); n_layers - 1];
        for l in (0..n_layers - 1).rev() {
            let q = &masks[l] * &r;
            r = q.dot(&self.layers[l].w.t());
            qs[l] = q;
        }

        let mut penalty = 0.0;
        let mut e = Array2::<F>::zeros(r.raw_dim());
        for b in 0..batch {
            let norm = r.row(b).iter().map(|v| v.to_f64().unwrap().powi(2)).sum::<f64>().sqrt();
            penalty += (norm - 1.0).powi(2);
            let coef = if norm > 0.0 {
                2.0 * weight * (norm - 1.0) / norm / batch as f64
            } else {
                0.0
            };
            let coef = F::from_f64(coef).unwrap();
            for (dst, &src) in e.row_mut(b).iter_mut().zip(r.row(b)) {
                *dst = coef * src;
            }
        }
        penalty *= weight / batch as f64;

        let mut grads: Vec<(Array2<F>, Array1<F>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect();
        for l in 0..n_layers - 1 {
            grads[l].0 = e.t().dot(&qs[l]);
            e = &masks[l] * &e.dot(&self.layers[l].w);
        }
        let top_grad = e.sum_axis(Axis(0));
        grads[n_layers - 1].0.column_mut(0).assign(&top_grad);
        (penalty, Gradients { layers: grads })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
            weight_decay: 1e-6,
        }
    }
}

pub struct Adam<F> {
    params: AdamParams,
    t: i32,
    moments: Vec<(Array2<F>, Array2<F>, Array1<F>, Array1<F>)>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(net: &Mlp<F>, params: AdamParams) -> Self {
        let moments = net
            .layers
            .iter()
            .map(|l| {
                (
                    Array2::zeros(l.w.raw_dim()),
                    Array2::zeros(l.w.raw_dim()),
                    Array1::zeros(l.b.raw_dim()),
                    Array1::zeros(l.b.raw_dim()),
                )
            })
            .collect();
        Self { params, t: 0, moments }
    }

    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Gradients<F>) {
        self.t += 1;
        let f = |v: f64| F::from_f64(v).unwrap();
        let p = self.params;
        let (b1, b2) = (f(p.beta1), f(p.beta2));
        let c1 = f(1.0 - p.beta1.powi(self.t));
        let c2 = f(1.0 - p.beta2.powi(self.t));
        let (lr, eps, wd) = (f(p.lr), f(p.eps), f(p.weight_decay));
        for ((layer, (gw, gb)), (mw, vw, mb, vb)) in
            net.layers.iter_mut().zip(&grads.layers).zip(self.moments.iter_mut())
        {
            adam_update(&mut layer.w, gw, mw, vw, [b1, b2, c1, c2, lr, eps, wd]);
            adam_update(&mut layer.b, gb, mb, vb, [b1, b2, c1, c2, lr, eps, wd]);
        }
    }
}

fn adam_update<F: Scalar, D: ndarray::Dimension>(
    param: &mut ndarray::Array<F, D>,
    grad: &ndarray::Array<F, D>,
    m: &mut ndarray::Array<F, D>,
    v: &mut ndarray::Array<F, D>,
    [b1, b2, c1, c2, lr, eps, wd]: [F; 7],
) {
    ndarray::Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            let g = g + wd * *p;
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
}
