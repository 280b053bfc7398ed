use std::io::Write;
use std::path::Path;

use log::warn;
use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sampler::{CondSampler, Condition, RowIndex};
use super::transform::{DataTransformer, Span, SpanKind};
use crate::data::{Dataset, Provenance, RowId, Schema, SplitTag};
use crate::error::{Error, LossRecord, Result};
use crate::nn::{Activation, Adam, AdamParams, Mlp};
use crate::seed::{self, Rng};
use crate::{artifact, Scalar};

const GUMBEL_TAU: f64 = 0.2;
const LEAKY_SLOPE: f64 = 0.2;
const GP_WEIGHT: f64 = 10.0;
const MODEL_KIND: &str = "generator-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub gen_lr: f64,
    pub dis_lr: f64,
    /// Discriminator updates per generator update.
    pub dis_steps: usize,
    pub latent_dim: usize,
    /// Upper bound on mixture modes per continuous column.
    pub mixture_modes: usize,
    pub hidden: Vec<usize>,
    /// Include the outcome label among the conditioned columns.
    pub condition_on_label: bool,
    pub loss: GanLoss,
    pub seed: u64,
}

/// Adversarial objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLoss {
    /// Wasserstein critic with gradient penalty.
    #[default]
    Wasserstein,
    /// Logistic discriminator with the non-saturating generator loss.
    NonSaturating,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 50,
            gen_lr: 2e-4,
            dis_lr: 2e-6,
            dis_steps: 5,
            latent_dim: 128,
            mixture_modes: 10,
            hidden: vec![256, 256],
            condition_on_label: true,
            loss: GanLoss::Wasserstein,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0
            && self.batch_size > 0
            && self.dis_steps > 0
            && self.latent_dim > 0
            && self.mixture_modes > 0
            && !self.hidden.is_empty()
            && self.hidden.iter().all(|&h| h > 0);
        if !positive || !(self.gen_lr > 0.0) || !(self.dis_lr > 0.0) {
            return Err(Error::Config(format!("invalid generator config {self:?}")));
        }
        Ok(())
    }
}

/// A fitted per-subpopulation conditional tabular generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GeneratorModel<F> {
    pub config: GanConfig,
    pub schema_fingerprint: String,
    pub transformer: DataTransformer,
    pub sampler: CondSampler,
    pub generator: Mlp<F>,
    pub batch_size: usize,
    pub loss_trace: Vec<LossRecord>,
    pub training_source: String,
    pub training_rows: Vec<RowId>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// tanh on offset spans, Gumbel-softmax on one-hot spans.
fn activate<F: Scalar>(raw: &Array2<F>, spans: &[Span], rng: &mut Rng) -> Array2<F> {
    let mut out = raw.clone();
    let tau = F::from_f64(GUMBEL_TAU).unwrap();
    for mut row in out.rows_mut() {
        for sp in spans {
            let mut seg = row.slice_mut(s![sp.start..sp.start + sp.len]);
            match sp.kind {
                SpanKind::Tanh => seg.mapv_inplace(|v| v.tanh()),
                SpanKind::Softmax => {
                    for v in seg.iter_mut() {
                        let u: f64 = rng.random::<f64>().clamp(1e-20, 1.0 - 1e-12);
                        let g = F::from_f64(-(-u.ln()).ln()).unwrap();
                        *v = (*v + g) / tau;
                    }
                    let m = seg.fold(F::neg_infinity(), |a, &b| a.max(b));
                    seg.mapv_inplace(|v| (v - m).exp());
                    let sum = seg.sum();
                    seg.mapv_inplace(|v| v / sum);
                }
            }
        }
    }
    out
}

fn activate_backward<F: Scalar>(act: &Array2<F>, d_act: &Array2<F>, spans: &[Span]) -> Array2<F> {
    let mut d_raw = Array2::zeros(act.raw_dim());
    let inv_tau = F::from_f64(1.0 / GUMBEL_TAU).unwrap();
    for r in 0..act.nrows() {
        for sp in spans {
            let range = sp.start..sp.start + sp.len;
            match sp.kind {
                SpanKind::Tanh => {
                    for j in range {
                        let y = act[[r, j]];
                        d_raw[[r, j]] = (F::one() - y * y) * d_act[[r, j]];
                    }
                }
                SpanKind::Softmax => {
                    let dot = range.clone().map(|j| act[[r, j]] * d_act[[r, j]]).sum::<F>();
                    for j in range {
                        d_raw[[r, j]] = inv_tau * act[[r, j]] * (d_act[[r, j]] - dot);
                    }
                }
            }
        }
    }
    d_raw
}

fn noise<F: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = rng.sample(StandardNormal);
        F::from_f64(z).unwrap()
    })
}

fn hstack<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> Array2<F> {
    concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

/// Adds the conditional cross-entropy gradient to `d_raw` and returns the mean loss.
fn cond_loss<F: Scalar>(raw: &Array2<F>, d_raw: &mut Array2<F>, conds: &[Option<Condition>], sampler: &CondSampler) -> f64 {
    let batch = raw.nrows() as f64;
    let mut total = 0.0;
    for (r, c) in conds.iter().enumerate() {
        let Some(c) = c else { continue };
        let col = &sampler.columns[c.column];
        let (start, len) = (col.output_offset, col.counts.len());
        let logits: Vec<f64> = (0..len).map(|k| raw[[r, start + k]].to_f64().unwrap()).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        total += m + sum.ln() - logits[c.level];
        for k in 0..len {
            let p = (logits[k] - m).exp() / sum;
            let g = (p - if k == c.level { 1.0 } else { 0.0 }) / batch;
            d_raw[[r, start + k]] = d_raw[[r, start + k]] + F::from_f64(g).unwrap();
        }
    }
    total / batch
}

/// Trains a conditional tabular GAN on one subpopulation's training rows.
pub fn fit_generator<F: Scalar>(train: &Dataset, cfg: &GanConfig) -> Result<GeneratorModel<F>> {
    cfg.validate()?;
    if train.provenance.split == SplitTag::Test {
        return Err(Error::Training(format!(
            "refusing to fit a generator on test rows (`{}`)",
            train.provenance.source
        )));
    }
    if train.is_empty() {
        return Err(Error::Training("generator training set is empty".into()));
    }
    let n = train.n_rows();
    let batch = if cfg.batch_size > n {
        warn!("batch size {} exceeds {n} training rows; clamping", cfg.batch_size);
        n
    } else {
        cfg.batch_size
    };

    let mut rng = seed::rng(cfg.seed);
    let transformer = DataTransformer::fit(train, cfg.mixture_modes)?;
    let encoded: Array2<F> = transformer.transform(train, &mut rng)?;
    let sampler = CondSampler::new(&transformer, cfg.condition_on_label);
    let index = RowIndex::new(&sampler, &transformer, train);
    let spans = transformer.spans();
    let out_dim = transformer.output_dim();

    let mut g_sizes = vec![cfg.latent_dim + sampler.dim];
    g_sizes.extend(&cfg.hidden);
    g_sizes.push(out_dim);
    let mut d_sizes = vec![out_dim + sampler.dim];
    d_sizes.extend(&cfg.hidden);
    d_sizes.push(1);
    let mut generator: Mlp<F> = Mlp::new(&g_sizes, Activation::Relu, &mut rng);
    let mut discriminator: Mlp<F> = Mlp::new(&d_sizes, Activation::LeakyRelu(LEAKY_SLOPE), &mut rng);
    let mut g_opt = Adam::new(&generator, AdamParams::with_lr(cfg.gen_lr));
    let mut d_opt = Adam::new(&discriminator, AdamParams::with_lr(cfg.dis_lr));

    let steps_per_epoch = (n / batch).max(1);
    let bf = batch as f64;
    let mut trace = Vec::with_capacity(cfg.epochs * steps_per_epoch);
    let to_f = |v: f64| F::from_f64(v).unwrap();

    for step in 0..cfg.epochs * steps_per_epoch {
        let mut d_loss = 0.0;
        for _ in 0..cfg.dis_steps {
            let z = noise::<F>(batch, cfg.latent_dim, &mut rng);
            let (cond, conds) = sampler.draw_batch::<F>(batch, &mut rng, true);
            let rows: Vec<usize> = conds.iter().map(|c| index.sample(*c, &mut rng)).collect();
            let real = encoded.select(Axis(0), &rows);
            let fake = activate(&generator.forward(&hstack(&z, &cond)), &spans, &mut rng);

            let (d_real, real_cache) = discriminator.forward_train(&hstack(&real, &cond));
            let (d_fake, fake_cache) = discriminator.forward_train(&hstack(&fake, &cond));
            let (g_real, g_fake) = match cfg.loss {
                GanLoss::Wasserstein => {
                    d_loss = (d_fake.sum().to_f64().unwrap() - d_real.sum().to_f64().unwrap()) / bf;
                    (d_real.mapv(|_| to_f(-1.0 / bf)), d_fake.mapv(|_| to_f(1.0 / bf)))
                }
                GanLoss::NonSaturating => {
                    d_loss = d_real.iter().map(|v| softplus(-v.to_f64().unwrap())).sum::<f64>() / bf
                        + d_fake.iter().map(|v| softplus(v.to_f64().unwrap())).sum::<f64>() / bf;
                    (
                        d_real.mapv(|v| to_f(-sigmoid(-v.to_f64().unwrap()) / bf)),
                        d_fake.mapv(|v| to_f(sigmoid(v.to_f64().unwrap()) / bf)),
                    )
                }
            };
            let (mut grads, _) = discriminator.backward(&real_cache, &g_real);
            let (grads_fake, _) = discriminator.backward(&fake_cache, &g_fake);
            let mut parts = vec![grads_fake];
            if cfg.loss == GanLoss::Wasserstein {
                let mut mixed = real.clone();
                for (mut m, f) in mixed.rows_mut().into_iter().zip(fake.rows()) {
                    let eps = to_f(rng.random::<f64>());
                    m.zip_mut_with(&f, |a, &b| *a = eps * *a + (F::one() - eps) * b);
                }
                let (penalty, gp_grads) = discriminator.gradient_penalty(&hstack(&mixed, &cond), GP_WEIGHT);
                d_loss += penalty;
                parts.push(gp_grads);
            }
            for part in parts {
                for ((w, b), (wf, bf_)) in grads.layers.iter_mut().zip(part.layers) {
                    w.zip_mut_with(&wf, |a, &b| *a = *a + b);
                    b.zip_mut_with(&bf_, |a, &c| *a = *a + c);
                }
            }
            d_opt.step(&mut discriminator, &grads);
        }

        let z = noise::<F>(batch, cfg.latent_dim, &mut rng);
        let (cond, conds) = sampler.draw_batch::<F>(batch, &mut rng, true);
        let (raw, g_cache) = generator.forward_train(&hstack(&z, &cond));
        let fake = activate(&raw, &spans, &mut rng);
        let (d_fake, d_cache) = discriminator.forward_train(&hstack(&fake, &cond));
        let (adv, g_out) = match cfg.loss {
            GanLoss::Wasserstein => (-d_fake.sum().to_f64().unwrap() / bf, d_fake.mapv(|_| to_f(-1.0 / bf))),
            GanLoss::NonSaturating => (
                d_fake.iter().map(|v| softplus(-v.to_f64().unwrap())).sum::<f64>() / bf,
                d_fake.mapv(|v| to_f(-sigmoid(-v.to_f64().unwrap()) / bf)),
            ),
        };
        let (_, d_input) = discriminator.backward(&d_cache, &g_out);
        let d_act = d_input.slice(s![.., ..out_dim]).to_owned();
        let mut d_raw = activate_backward(&fake, &d_act, &spans);
        let ce = cond_loss(&raw, &mut d_raw, &conds, &sampler);
        let (grads, _) = generator.backward(&g_cache, &d_raw);
        g_opt.step(&mut generator, &grads);

        let record = LossRecord {
            step,
            discriminator: d_loss,
            generator: adv + ce,
        };
        trace.push(record);
        if !record.discriminator.is_finite() || !record.generator.is_finite() {
            return Err(Error::Divergence { step, trace });
        }
    }

    Ok(GeneratorModel {
        config: cfg.clone(),
        schema_fingerprint: train.schema().fingerprint(),
        transformer,
        sampler,
        generator,
        batch_size: batch,
        loss_trace: trace,
        training_source: train.provenance.source.clone(),
        training_rows: train.row_ids().to_vec(),
    })
}

impl<F: Scalar> GeneratorModel<F> {
    pub fn schema(&self) -> &Schema {
        &self.transformer.schema
    }

    /// Exactly `n` schema-valid rows, tagged synthetic; deterministic in `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = seed::rng(seed);
        let spans = self.transformer.spans();
        let out_dim = self.transformer.output_dim();
        let mut out = Array2::<F>::zeros((0, out_dim));
        let mut remaining = n;
        while remaining > 0 {
            let b = remaining.min(self.batch_size.max(1));
            let z = noise::<F>(b, self.config.latent_dim, &mut rng);
            let (cond, _) = self.sampler.draw_batch::<F>(b, &mut rng, false);
            let act = activate(&self.generator.forward(&hstack(&z, &cond)), &spans, &mut rng);
            out = concatenate(Axis(0), &[out.view(), act.view()]).unwrap();
            remaining -= b;
        }
        let ids = (0..n as u64).map(|index| RowId::Synthetic { batch: seed, index }).collect();
        self.transformer.inverse(
            out.view(),
            ids,
            Provenance::new(format!("generated({}, seed={seed})", self.training_source), SplitTag::Synthetic),
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        artifact::encode(MODEL_KIND, self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        artifact::save(MODEL_KIND, self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = artifact::load(MODEL_KIND, path)?;
        if m.schema_fingerprint != m.transformer.schema.fingerprint() {
            return Err(Error::Artifact("stored fingerprint does not match stored schema".into()));
        }
        Ok(m)
    }

    /// Loads and checks the model was trained on data with `schema`.
    pub fn load_for(path: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let m = Self::load(path)?;
        if m.schema_fingerprint != schema.fingerprint() {
            return Err(Error::Artifact(format!(
                "generator schema fingerprint {} does not match expected {}",
                &m.schema_fingerprint[..12],
                &schema.fingerprint()[..12]
            )));
        }
        Ok(m)
    }

    pub fn write_loss_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,discriminator,generator")?;
        for r in &self.loss_trace {
            writeln!(w, "{},{},{}", r.step, r.discriminator, r.generator)?;
        }
        Ok(())
    }
}
