//! Staggered adversarial training: critics every iteration, the generator
//! every `g_update_period` iterations.

mod batch;
mod checkpoint;
mod config;

use std::collections::{BTreeSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

pub use batch::{word_batch_tensor, Batch, BatchSampler};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointState, FORMAT_VERSION,
};
pub use config::{StyleSampling, TrainConfig};

use crate::corpus::{CharsetTokenizer, WordSample, PX_PER_CHAR};
use crate::critics::{
    ctc_loss, hinge_discriminator_loss, hinge_generator_loss, writer_ce_loss, Discriminator,
    Recognizer, WriterClassifier,
};
use crate::error::{Error, Result};
use crate::model::Generator;
use crate::nn::{width_mask, Adam, Ctx, ParamStore};

pub const LOSS_LOG: &str = "losses.jsonl";
pub const LAST_CHECKPOINT: &str = "last.ckpt";

/// Loss values of one iteration. Generator fields are `None` on iterations
/// where the generator is not updated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub iteration: u64,
    pub epoch: usize,
    pub g_updated: bool,
    pub g_adv: Option<f64>,
    pub g_tr: Option<f64>,
    pub g_wcn: Option<f64>,
    pub g_total: Option<f64>,
    /// Gradient norm that fake-image losses put on critic parameters.
    pub critic_grad_from_fake: Option<f64>,
    pub d_loss: f64,
    pub tr_real: f64,
    pub wcn_real: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
}

/// Optimizer steps taken per network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounts {
    pub generator: u64,
    pub discriminator: u64,
    pub recognizer: u64,
    pub writer_classifier: u64,
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub iterations: u64,
    pub checkpoints: Vec<PathBuf>,
    pub loss_log: PathBuf,
}

/// Checkpoint file name for an epoch count.
pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch}.ckpt")
}

fn scalar(t: &Tensor, component: &str) -> Result<f64> {
    let v: f64 = t.to_dtype(DType::F64)?.to_scalar()?;
    if !v.is_finite() {
        return Err(Error::NonFinite(component.to_string()));
    }
    Ok(v)
}

fn mean_of(t: &Tensor) -> Result<f64> {
    Ok(t.mean_all()?.to_dtype(DType::F64)?.to_scalar()?)
}

/// Replace columns beyond `16 * len` of each generated word with white.
pub fn whiten_padding(images: &Tensor, lengths: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    let (b, _, _, w) = images.dims4()?;
    let widths: Vec<usize> = lengths.iter().map(|&k| k * PX_PER_CHAR as usize).collect();
    let mask = width_mask(&widths, w, images.dtype(), images.device())?.reshape((b, 1, 1, w))?;
    let out = images
        .broadcast_mul(&mask)?
        .broadcast_add(&mask.affine(-1.0, 1.0)?)?;
    Ok((out, widths))
}

pub struct Trainer {
    config: TrainConfig,
    tokenizer: CharsetTokenizer,
    writer_keys: Vec<String>,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub recognizer: Recognizer,
    pub writer_classifier: WriterClassifier,
    opt_g: Adam,
    opt_d: Adam,
    opt_tr: Adam,
    opt_wcn: Adam,
    iteration: u64,
    epoch: usize,
    batch_in_epoch: usize,
    history: VecDeque<LossReport>,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        tokenizer: CharsetTokenizer,
        writer_keys: Vec<String>,
    ) -> Result<Self> {
        config.validate()?;
        let m = &config.model;
        if m.num_classes != tokenizer.num_classes() {
            return Err(Error::Config(format!(
                "model has {} classes but the character set needs {}",
                m.num_classes,
                tokenizer.num_classes()
            )));
        }
        let s = config.seed;
        let generator = Generator::new(m, DType::F32, s)?;
        let discriminator = Discriminator::new(m, DType::F32, s.wrapping_add(1))?;
        let recognizer = Recognizer::new(m, DType::F32, s.wrapping_add(2))?;
        let writer_classifier = WriterClassifier::new(m, DType::F32, s.wrapping_add(3))?;
        Ok(Self {
            opt_g: Adam::new(config.adam(config.lr_g), generator.params())?,
            opt_d: Adam::new(config.adam(config.lr_d), discriminator.params())?,
            opt_tr: Adam::new(config.adam(config.lr_tr), recognizer.params())?,
            opt_wcn: Adam::new(config.adam(config.lr_wcn), writer_classifier.params())?,
            generator,
            discriminator,
            recognizer,
            writer_classifier,
            config,
            tokenizer,
            writer_keys,
            iteration: 0,
            epoch: 0,
            batch_in_epoch: 0,
            history: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &CharsetTokenizer {
        &self.tokenizer
    }

    pub fn writer_keys(&self) -> &[String] {
        &self.writer_keys
    }

    /// Change how long [`Trainer::fit`] runs, e.g. to extend a resumed run.
    pub fn set_limits(&mut self, epochs: Option<usize>, max_iterations: Option<u64>) -> Result<()> {
        let mut config = self.config.clone();
        if let Some(e) = epochs {
            config.epochs = e;
        }
        if let Some(m) = max_iterations {
            config.max_iterations = m;
        }
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn history(&self) -> impl Iterator<Item = &LossReport> {
        self.history.iter()
    }

    pub fn update_counts(&self) -> UpdateCounts {
        UpdateCounts {
            generator: self.opt_g.steps(),
            discriminator: self.opt_d.steps(),
            recognizer: self.opt_tr.steps(),
            writer_classifier: self.opt_wcn.steps(),
        }
    }

    pub fn optimizers(&self) -> [(&'static str, &Adam); 4] {
        [
            ("generator", &self.opt_g),
            ("discriminator", &self.opt_d),
            ("recognizer", &self.opt_tr),
            ("writer_classifier", &self.opt_wcn),
        ]
    }

    pub fn is_generator_turn(&self, iteration: u64) -> bool {
        iteration.is_multiple_of(self.config.g_update_period)
    }

    /// Fail early when the corpus does not fit the model or character set.
    pub fn check_corpus(&self, samples: &[WordSample]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::Empty("training corpus".into()));
        }
        let writers: BTreeSet<u32> = samples.iter().map(|s| s.writer.0).collect();
        if let Some(&w) = writers
            .iter()
            .find(|&&w| w as usize >= self.config.model.num_writers)
        {
            return Err(Error::Config(format!(
                "writer id {w} exceeds the classifier's {} writers",
                self.config.model.num_writers
            )));
        }
        for s in samples {
            self.tokenizer.validate(&s.transcription)?;
            let n = s.transcription.chars().count();
            if n == 0 || n > self.config.model.max_text_len {
                return Err(Error::TextTooLong {
                    len: n,
                    max: self.config.model.max_text_len,
                });
            }
        }
        Ok(())
    }

    fn encode_all(&self, texts: &[String]) -> Result<Vec<Vec<u32>>> {
        texts.iter().map(|t| self.tokenizer.encode(t)).collect()
    }

    fn push_history(&mut self, report: LossReport) {
        if self.history.len() == self.config.history_len.max(1) {
            self.history.pop_front();
        }
        self.history.push_back(report);
    }

    /// Generator update against frozen critics. Returns the fake batch
    /// (detached, padding whitened), the item widths and the loss terms.
    pub fn generator_step(
        &mut self,
        batch: &Batch,
        ctx: &Ctx,
    ) -> Result<(Tensor, Vec<usize>, [f64; 5])> {
        let texts: Vec<&str> = batch.targets.iter().map(String::as_str).collect();
        let out = self
            .generator
            .forward(&batch.styles, &texts, &self.tokenizer, false, ctx)?;
        let (fake, widths) = whiten_padding(&out.images, &out.query.lengths)?;
        let frozen = ctx.frozen();
        let adv = hinge_generator_loss(&self.discriminator.forward(&fake, &widths, &frozen)?)?;
        let (lp, frames) = self.recognizer.forward(&fake, &widths, &frozen)?;
        let tr = ctc_loss(
            &lp,
            &self.encode_all(&batch.targets)?,
            &frames,
            self.tokenizer.blank_index(),
        )?;
        let logits = self.writer_classifier.forward(&fake, &widths, &frozen)?;
        let wcn = writer_ce_loss(&logits, &batch.style_writers)?;
        let c = &self.config;
        let total = ((&adv * c.weight_adv)? + (&tr * c.weight_tr)? + (&wcn * c.weight_wcn)?)?;
        let values = [
            scalar(&adv, "generator adversarial loss")?,
            scalar(&tr, "generator recognition loss")?,
            scalar(&wcn, "generator writer loss")?,
            scalar(&total, "generator total loss")?,
        ];
        let grads = total.backward()?;
        let leak = [
            Adam::grad_norm(self.discriminator.params(), &grads)?,
            Adam::grad_norm(self.recognizer.params(), &grads)?,
            Adam::grad_norm(self.writer_classifier.params(), &grads)?,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        self.opt_g.step(self.generator.params(), &grads, c.clip())?;
        Ok((
            fake.detach(),
            widths,
            [values[0], values[1], values[2], values[3], leak],
        ))
    }

    /// Critic update on reals and detached fakes.
    pub fn critic_step(
        &mut self,
        batch: &Batch,
        fake: &Tensor,
        fake_widths: &[usize],
        ctx: &Ctx,
    ) -> Result<[f64; 5]> {
        let fake = fake.detach();
        let d_real = self
            .discriminator
            .forward(&batch.real, &batch.real_widths, ctx)?;
        let d_fake = self.discriminator.forward(&fake, fake_widths, ctx)?;
        let d = hinge_discriminator_loss(&d_real, &d_fake)?;
        let (lp, frames) = self
            .recognizer
            .forward(&batch.real, &batch.real_widths, ctx)?;
        let tr = ctc_loss(
            &lp,
            &self.encode_all(&batch.real_texts)?,
            &frames,
            self.tokenizer.blank_index(),
        )?;
        let logits = self
            .writer_classifier
            .forward(&batch.real, &batch.real_widths, ctx)?;
        let wcn = writer_ce_loss(&logits, &batch.real_writers)?;
        let c = &self.config;
        let values = [
            scalar(&d, "discriminator loss")?,
            scalar(&tr, "recognizer loss")?,
            scalar(&wcn, "writer classifier loss")?,
            mean_of(&d_real)?,
            mean_of(&d_fake)?,
        ];
        let total = ((d + (tr * c.weight_tr)?)? + (wcn * c.weight_wcn)?)?;
        let grads = total.backward()?;
        let clip = c.clip();
        self.opt_d.step(self.discriminator.params(), &grads, clip)?;
        self.opt_tr.step(self.recognizer.params(), &grads, clip)?;
        self.opt_wcn
            .step(self.writer_classifier.params(), &grads, clip)?;
        Ok(values)
    }

    /// One iteration: a generator update on its turn, then a critic update.
    pub fn train_step(&mut self, batch: &Batch) -> Result<LossReport> {
        let ctx = Ctx::train(batch.ctx_seed);
        let g_turn = self.is_generator_turn(self.iteration);
        let (fake, widths, g) = if g_turn {
            let (fake, widths, g) = self.generator_step(batch, &ctx)?;
            (fake, widths, Some(g))
        } else {
            let texts: Vec<&str> = batch.targets.iter().map(String::as_str).collect();
            let out = self.generator.forward(
                &batch.styles,
                &texts,
                &self.tokenizer,
                false,
                &ctx.frozen(),
            )?;
            let (fake, widths) = whiten_padding(&out.images, &out.query.lengths)?;
            (fake.detach(), widths, None)
        };
        let d = self.critic_step(batch, &fake, &widths, &ctx)?;
        let report = LossReport {
            iteration: self.iteration,
            epoch: self.epoch,
            g_updated: g_turn,
            g_adv: g.map(|v| v[0]),
            g_tr: g.map(|v| v[1]),
            g_wcn: g.map(|v| v[2]),
            g_total: g.map(|v| v[3]),
            critic_grad_from_fake: g.map(|v| v[4]),
            d_loss: d[0],
            tr_real: d[1],
            wcn_real: d[2],
            d_real_mean: d[3],
            d_fake_mean: d[4],
        };
        self.iteration += 1;
        self.push_history(report.clone());
        Ok(report)
    }

    fn stores(&self) -> [(&ParamStore, &Adam, &'static str); 4] {
        [
            (self.generator.params(), &self.opt_g, "generator"),
            (self.discriminator.params(), &self.opt_d, "discriminator"),
            (self.recognizer.params(), &self.opt_tr, "recognizer"),
            (
                self.writer_classifier.params(),
                &self.opt_wcn,
                "writer_classifier",
            ),
        ]
    }

    pub fn state(&self) -> CheckpointState {
        CheckpointState {
            format_version: FORMAT_VERSION,
            iteration: self.iteration,
            epoch: self.epoch,
            batch_in_epoch: self.batch_in_epoch,
            rng_seed: self.config.seed,
            config: self.config.clone(),
            charset: self.tokenizer.clone(),
            writer_keys: self.writer_keys.clone(),
            optimizer_steps: self.update_counts(),
            history: self.history.iter().cloned().collect(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut entries = Vec::new();
        for (store, opt, name) in self.stores() {
            entries.extend(store.snapshot());
            entries.extend(opt.export(store, &format!("optimizer.{name}.")));
        }
        save_checkpoint(path, &entries, &self.state())
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(path)?;
        let s = ckpt.state;
        let mut t = Self::new(s.config, s.charset, s.writer_keys)?;
        let opts = [&mut t.opt_g, &mut t.opt_d, &mut t.opt_tr, &mut t.opt_wcn];
        let stores = [
            (t.generator.params(), "generator"),
            (t.discriminator.params(), "discriminator"),
            (t.recognizer.params(), "recognizer"),
            (t.writer_classifier.params(), "writer_classifier"),
        ];
        let counts = s.optimizer_steps;
        let steps = [
            counts.generator,
            counts.discriminator,
            counts.recognizer,
            counts.writer_classifier,
        ];
        for ((opt, (store, name)), step) in opts.into_iter().zip(stores).zip(steps) {
            store.load(&ckpt.tensors, "")?;
            opt.import(store, &ckpt.tensors, &format!("optimizer.{name}."), step)?;
        }
        t.iteration = s.iteration;
        t.epoch = s.epoch;
        t.batch_in_epoch = s.batch_in_epoch;
        t.history = s.history.into();
        Ok(t)
    }

    /// Train over `samples` until the configured epochs or iteration cap,
    /// resuming from the current position. Appends to `out_dir/losses.jsonl`
    /// and writes `epoch_<n>.ckpt` files.
    pub fn fit(
        &mut self,
        samples: &[WordSample],
        out_dir: &Path,
        mut on_report: impl FnMut(&LossReport),
    ) -> Result<FitSummary> {
        self.check_corpus(samples)?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let log_path = out_dir.join(LOSS_LOG);
        truncate_log(&log_path, self.iteration)?;
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        let config = self.config.clone();
        let mut sampler = BatchSampler::new(samples, &config, DType::F32)?;
        let per_epoch = sampler.batches_per_epoch();
        let cap = (config.max_iterations > 0).then_some(config.max_iterations);
        let capped = |it: u64| cap.is_some_and(|c| it >= c);
        let mut checkpoints = Vec::new();
        if capped(self.iteration) {
            return Ok(FitSummary {
                iterations: self.iteration,
                checkpoints,
                loss_log: log_path,
            });
        }
        while self.epoch < config.epochs {
            while self.batch_in_epoch < per_epoch && !capped(self.iteration) {
                let indices = sampler.epoch_batch(self.epoch, self.batch_in_epoch);
                let batch = sampler.batch(&indices, self.iteration)?;
                let report = self.train_step(&batch)?;
                self.batch_in_epoch += 1;
                writeln!(log, "{}", serde_json::to_string(&report)?)
                    .map_err(|e| Error::io(&log_path, e))?;
                on_report(&report);
            }
            let finished = self.batch_in_epoch == per_epoch;
            if finished {
                self.epoch += 1;
                self.batch_in_epoch = 0;
            }
            let stop = capped(self.iteration);
            if stop
                || self.epoch == config.epochs
                || (finished && self.epoch.is_multiple_of(config.checkpoint_every))
            {
                let name = if finished {
                    checkpoint_name(self.epoch)
                } else {
                    LAST_CHECKPOINT.to_string()
                };
                let path = out_dir.join(name);
                self.save_checkpoint(&path)?;
                log::info!("wrote {}", path.display());
                checkpoints.push(path);
            }
            if stop {
                break;
            }
        }
        log.flush().map_err(|e| Error::io(&log_path, e))?;
        Ok(FitSummary {
            iterations: self.iteration,
            checkpoints,
            loss_log: log_path,
        })
    }
}

/// Drop log lines at or after `iteration` so a resumed run does not repeat them.
fn truncate_log(path: &Path, iteration: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kept = String::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let r: LossReport = serde_json::from_str(line)?;
        if r.iteration < iteration {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic_corpus;
    use crate::model::ModelConfig;

    fn tiny() -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                patch_size: 56,
                vit_embed_dim: 8,
                vit_heads: 2,
                d_model: 16,
                decoder_layers: 1,
                decoder_heads: 2,
                decoder_ffn_dim: 16,
                synth_channels: 8,
                critic_channels: 4,
                recognizer_hidden: 8,
                max_text_len: 8,
                ..ModelConfig::desk()
            },
            batch_size: 2,
            epochs: 2,
            seed: 11,
            ..TrainConfig::desk()
        }
    }

    fn corpus() -> Vec<WordSample> {
        let words: Vec<String> = ["ab", "cab", "bad"].iter().map(|s| s.to_string()).collect();
        generate_synthetic_corpus(2, &words, 3, &CharsetTokenizer::ascii()).unwrap()
    }

    fn trainer() -> Trainer {
        Trainer::new(
            tiny(),
            CharsetTokenizer::ascii(),
            vec!["w0".into(), "w1".into()],
        )
        .unwrap()
    }

    fn values(store: &ParamStore) -> Vec<Vec<f32>> {
        store
            .snapshot()
            .into_iter()
            .map(|(_, t)| t.flatten_all().unwrap().to_vec1().unwrap())
            .collect()
    }

    #[test]
    fn generator_updates_on_schedule() {
        let c = corpus();
        let mut t = trainer();
        let mut sampler = BatchSampler::new(&c, t.config(), DType::F32).unwrap();
        let mut flags = Vec::new();
        for it in 0..4 {
            let batch = sampler
                .batch(&sampler.epoch_batch(0, it % 3), it as u64)
                .unwrap();
            let r = t.train_step(&batch).unwrap();
            assert_eq!(r.g_total.is_some(), r.g_updated);
            flags.push(r.g_updated);
        }
        assert_eq!(flags, vec![true, false, true, false]);
        let n = t.update_counts();
        assert_eq!(
            (
                n.generator,
                n.discriminator,
                n.recognizer,
                n.writer_classifier
            ),
            (2, 4, 4, 4)
        );
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn every_window_of_k_periods_holds_k_generator_updates(start in 0u64..10_000, k in 1u64..50, period in 1u64..5) {
            let t = Trainer::new(TrainConfig { g_update_period: period, ..tiny() }, CharsetTokenizer::ascii(), vec!["a".into(), "b".into()]).unwrap();
            let span = period * k;
            let count = (start..start + span).filter(|&i| t.is_generator_turn(i)).count() as u64;
            proptest::prop_assert_eq!(count, k);
        }
    }

    #[test]
    fn generator_step_leaves_critics_untouched() {
        let c = corpus();
        let mut t = trainer();
        let mut sampler = BatchSampler::new(&c, t.config(), DType::F32).unwrap();
        let batch = sampler.batch(&sampler.epoch_batch(0, 0), 0).unwrap();
        let before = [
            values(t.discriminator.params()),
            values(t.recognizer.params()),
            values(t.writer_classifier.params()),
        ];
        let g_before = values(t.generator.params());
        let (fake, widths, g) = t
            .generator_step(&batch, &Ctx::train(batch.ctx_seed))
            .unwrap();
        assert_eq!(g[4], 0.0);
        assert_eq!(values(t.discriminator.params()), before[0]);
        assert_eq!(values(t.recognizer.params()), before[1]);
        assert_eq!(values(t.writer_classifier.params()), before[2]);
        assert_ne!(values(t.generator.params()), g_before);
        let g_after = values(t.generator.params());
        t.critic_step(&batch, &fake, &widths, &Ctx::train(1))
            .unwrap();
        assert_eq!(values(t.generator.params()), g_after);
        assert_ne!(values(t.discriminator.params()), before[0]);
    }

    #[test]
    fn fake_padding_is_white() {
        let x = Tensor::zeros((2, 1, 2, 48), DType::F32, &candle_core::Device::Cpu).unwrap();
        let (y, widths) = whiten_padding(&x, &[3, 1]).unwrap();
        assert_eq!(widths, vec![48, 16]);
        let rows: Vec<f32> = y
            .get(1)
            .unwrap()
            .get(0)
            .unwrap()
            .get(0)
            .unwrap()
            .to_vec1()
            .unwrap();
        assert!(rows[..16].iter().all(|&v| v == 0.0));
        assert!(rows[16..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_bad_corpus() {
        let mut c = corpus();
        let t = trainer();
        t.check_corpus(&c).unwrap();
        c[0].writer = crate::corpus::WriterId(7);
        assert!(matches!(t.check_corpus(&c), Err(Error::Config(_))));
        assert!(t.check_corpus(&[]).is_err());
    }

    #[test]
    fn runs_are_deterministic_and_resume_exactly() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        let full_dir = dir.path().join("full");
        let mut a = trainer();
        let summary = a.fit(&c, &full_dir, |_| {}).unwrap();
        assert_eq!(summary.iterations, 6);
        assert!(full_dir.join("epoch_2.ckpt").exists());

        let mut b = trainer();
        b.fit(&c, &dir.path().join("again"), |_| {}).unwrap();
        let ha: Vec<_> = a.history().cloned().collect();
        assert_eq!(ha, b.history().cloned().collect::<Vec<_>>());

        let part_dir = dir.path().join("part");
        let mut first = Trainer::new(
            TrainConfig {
                max_iterations: 4,
                ..tiny()
            },
            CharsetTokenizer::ascii(),
            vec!["w0".into(), "w1".into()],
        )
        .unwrap();
        first.fit(&c, &part_dir, |_| {}).unwrap();
        let mut resumed = Trainer::from_checkpoint(&part_dir.join(LAST_CHECKPOINT)).unwrap();
        assert_eq!(resumed.iteration(), 4);
        resumed.config.max_iterations = 0;
        resumed.fit(&c, &part_dir, |_| {}).unwrap();
        assert_eq!(resumed.history().cloned().collect::<Vec<_>>(), ha);
        assert_eq!(
            values(resumed.generator.params()),
            values(a.generator.params())
        );
        let log = fs::read_to_string(part_dir.join(LOSS_LOG)).unwrap();
        assert_eq!(log, fs::read_to_string(full_dir.join(LOSS_LOG)).unwrap());
    }
}
