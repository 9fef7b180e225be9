//! Training: loss composition, the alternating adversarial loop,
//! checkpointing, and early stopping on validation imputation error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Array, Tape, Var};
use crate::corruption::{corrupt_imputation, CorruptionPlan};
use crate::dataset::{Dataset, NormStats, SeriesSample, Split};
use crate::error::{Error, Result};
use crate::model::cell::{CellKind, CellParams};
use crate::model::discriminator::{
    discriminator_loss, generator_adversarial_loss, AdvMode, Discriminator, DiscriminatorParams,
};
use crate::model::generator::{CombineMode, Generator, GeneratorParams};
use crate::optim::Adam;
use crate::scalar::Scalar;
use crate::seed::derive;
use crate::tensorfile::{read_entry, read_header, read_u32, write_entry, write_header, write_u32};

/// Everything the training loop needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub loss_mode: AdvMode,
    pub no_gan: bool,
    pub no_lambda: bool,
    pub normalize_combination: bool,
    pub non_saturating_g: bool,
    pub cell: CellKind,
    pub hidden_g: usize,
    pub hidden_d: usize,
    pub train_corrupt_rate: f64,
    pub patience: usize,
    pub n_critic: usize,
    pub clip: f64,
    pub condition_on_mask: bool,
    pub loss_weight_r: f64,
    pub loss_weight_c: f64,
    pub loss_weight_g: f64,
    /// Deletion rate of the fixed validation protocol.
    pub val_rate: f64,
}

/// Learning rate used when the Wasserstein objective is selected and the
/// caller did not override it.
pub const WASSERSTEIN_LR: f64 = 5e-5;

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 32,
            lr_g: 1e-3,
            lr_d: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed,
            loss_mode: AdvMode::Vanilla,
            no_gan: false,
            no_lambda: false,
            normalize_combination: false,
            non_saturating_g: false,
            cell: CellKind::Simple,
            hidden_g: 32,
            hidden_d: 32,
            train_corrupt_rate: 0.0,
            patience: 10,
            n_critic: 5,
            clip: 0.01,
            condition_on_mask: false,
            loss_weight_r: 1.0,
            loss_weight_c: 1.0,
            loss_weight_g: 1.0,
            val_rate: 0.1,
        }
    }

    pub fn combine_mode(&self) -> CombineMode {
        if self.no_lambda {
            CombineMode::Mean
        } else if self.normalize_combination {
            CombineMode::WeightedNormalized
        } else {
            CombineMode::Weighted
        }
    }

    /// Canonical key=value rendering; the basis of the config hash.
    pub fn canonical_text(&self) -> String {
        let mut lines = vec![
            format!("train.adam_eps = {}", self.adam_eps),
            format!("train.batch_size = {}", self.batch_size),
            format!("train.beta1 = {}", self.beta1),
            format!("train.beta2 = {}", self.beta2),
            format!("train.corrupt_rate = {}", self.train_corrupt_rate),
            format!("train.epochs = {}", self.epochs),
            format!("train.lr_d = {}", self.lr_d),
            format!("train.lr_g = {}", self.lr_g),
            format!("train.patience = {}", self.patience),
            format!("train.seed = {}", self.seed),
            format!("train.val_rate = {}", self.val_rate),
            format!("model.cell = {}", self.cell.name()),
            format!("model.clip = {}", self.clip),
            format!("model.condition_on_mask = {}", self.condition_on_mask),
            format!("model.hidden_d = {}", self.hidden_d),
            format!("model.hidden_g = {}", self.hidden_g),
            format!("model.loss_mode = {}", self.loss_mode.name()),
            format!("model.loss_weight_c = {}", self.loss_weight_c),
            format!("model.loss_weight_g = {}", self.loss_weight_g),
            format!("model.loss_weight_r = {}", self.loss_weight_r),
            format!("model.n_critic = {}", self.n_critic),
            format!("model.no_gan = {}", self.no_gan),
            format!("model.no_lambda = {}", self.no_lambda),
            format!("model.non_saturating_g = {}", self.non_saturating_g),
            format!("model.normalize_combination = {}", self.normalize_combination),
        ];
        lines.sort();
        lines.join("\n")
    }

    /// FNV-1a over the canonical rendering.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical_text().as_bytes())
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden_g == 0 || self.hidden_d == 0 {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if self.lr_g <= 0.0 || self.lr_d <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.train_corrupt_rate) {
            return Err(Error::Config("train corrupt rate outside [0, 1)".into()));
        }
        if self.n_critic == 0 {
            return Err(Error::Config("n_critic must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Masked reconstruction loss: mean absolute error between the combined
/// estimate and the target over observed entries; zero when none.
pub fn reconstruction_loss<F: Scalar>(
    tape: &mut Tape<F>,
    x: &[F],
    m: &[F],
    estimate: Var,
) -> Result<Var> {
    let n = m.len();
    let count = m.iter().filter(|&&v| v == F::one()).count();
    if count == 0 {
        return Ok(tape.constant_scalar(F::zero()));
    }
    let masked_x: Vec<F> = x.iter().zip(m).map(|(&xv, &mv)| xv * mv).collect();
    let cx = tape.constant(Array::vector(masked_x));
    let cm = tape.constant(Array::vector(m.to_vec()));
    let masked_est = tape.mul(cm, estimate)?;
    let diff = tape.sub(cx, masked_est)?;
    let mean_all = tape.mean_abs(diff);
    Ok(tape.scale(mean_all, F::c(n as f64 / count as f64)))
}

/// Mean absolute gap between the forward and backward estimates.
pub fn consistency_loss<F: Scalar>(tape: &mut Tape<F>, est_fwd: Var, est_bwd: Var) -> Result<Var> {
    let diff = tape.sub(est_fwd, est_bwd)?;
    Ok(tape.mean_abs(diff))
}

/// One epoch's logged quantities. Adversarial columns are absent when the
/// discriminator is disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss_r: f64,
    pub loss_c: f64,
    pub loss_g: Option<f64>,
    pub loss_d: Option<f64>,
    pub val_mae: f64,
    /// The scalar actually optimized for the generator this epoch.
    pub total_g: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
}

impl TrainLog {
    /// One comma-separated line per epoch; empty adversarial columns when
    /// the discriminator is disabled.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss_r,loss_c,loss_g,loss_d,val_mae\n");
        for e in &self.rows {
            let g = e.loss_g.map(|v| v.to_string()).unwrap_or_default();
            let d = e.loss_d.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.epoch, e.loss_r, e.loss_c, g, d, e.val_mae
            ));
        }
        out
    }
}

pub struct TrainOutcome<F> {
    /// Best-validation snapshot.
    pub checkpoint: Checkpoint<F>,
    pub log: TrainLog,
    /// Parameters as of the last completed epoch.
    pub final_generator: GeneratorParams<F>,
    pub final_discriminator: Option<DiscriminatorParams<F>>,
}

/// Fixed validation plans built once per run.
fn validation_plans<F: Scalar>(
    dataset: &Dataset<F>,
    cfg: &TrainConfig,
) -> Result<Vec<CorruptionPlan<F>>> {
    let mut plans = Vec::new();
    for (k, &i) in dataset.indices_of(Split::Validation).iter().enumerate() {
        let sample = &dataset.samples[i];
        if sample.observed_target_count() == 0 {
            continue;
        }
        let plan = corrupt_imputation(sample, cfg.val_rate, derive(cfg.seed, "val-plan", k as u64))?;
        if plan.eval_count() > 0 {
            plans.push(plan);
        }
    }
    if plans.is_empty() {
        return Err(Error::Data(
            "validation split has no scoreable cells under the validation protocol".into(),
        ));
    }
    Ok(plans)
}

/// Pooled validation MAE in denormalized target units.
fn plans_mae<F: Scalar>(
    generator: &Generator<F>,
    plans: &[CorruptionPlan<F>],
    dataset: &Dataset<F>,
) -> Result<f64> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for plan in plans {
        let out = generator.run(&plan.corrupted)?;
        for (i, &e) in plan.eval_mask.iter().enumerate() {
            if e == F::one() {
                let truth = dataset.denormalize_target(plan.truth[i]).f64();
                let fill = dataset.denormalize_target(out.replaced[i]).f64();
                total += (truth - fill).abs();
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

struct EpochAccumulator {
    sum_r: f64,
    sum_c: f64,
    sum_g: f64,
    sum_total: f64,
    samples: usize,
    sum_d: f64,
    d_updates: usize,
}

/// Train on the dataset's train split with early stopping on the
/// validation split; deterministic for a given config.
pub fn train<F: Scalar>(dataset: &Dataset<F>, cfg: &TrainConfig) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    let train_idx = dataset.indices_of(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::Data("dataset has no train split".into()));
    }
    let val_plans = validation_plans(dataset, cfg)?;
    let norm = dataset
        .norm
        .clone()
        .ok_or_else(|| Error::Data("dataset must be normalized before training".into()))?;

    let d = dataset.d();
    let mut generator = Generator::new(
        GeneratorParams::init(cfg.cell, cfg.hidden_g, d, cfg.seed),
        cfg.combine_mode(),
    );
    let mut discriminator = if cfg.no_gan {
        None
    } else {
        Some(Discriminator::new(
            DiscriminatorParams::init(
                cfg.cell,
                cfg.hidden_d,
                Discriminator::<F>::input_dim(cfg.condition_on_mask),
                cfg.seed,
            ),
            cfg.loss_mode,
            cfg.condition_on_mask,
        ))
    };

    let mut adam_g = Adam::new(
        F::c(cfg.lr_g),
        F::c(cfg.beta1),
        F::c(cfg.beta2),
        F::c(cfg.adam_eps),
    );
    let mut adam_d = Adam::new(
        F::c(cfg.lr_d),
        F::c(cfg.beta1),
        F::c(cfg.beta2),
        F::c(cfg.adam_eps),
    );
    let n_critic = match cfg.loss_mode {
        AdvMode::Vanilla => 1,
        AdvMode::Wasserstein => cfg.n_critic,
    };

    let with_lambda = !cfg.no_lambda;
    let mut best_val = plans_mae(&generator, &val_plans, dataset)?;
    let mut best = Snapshot {
        generator: generator.params.clone(),
        discriminator: discriminator.as_ref().map(|dsc| dsc.params.clone()),
        epoch: 0,
        val_mae: best_val,
    };
    let mut since_improved = 0usize;
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "batch-order", epoch as u64));
        order.shuffle(&mut rng);

        let mut acc = EpochAccumulator {
            sum_r: 0.0,
            sum_c: 0.0,
            sum_g: 0.0,
            sum_total: 0.0,
            samples: 0,
            sum_d: 0.0,
            d_updates: 0,
        };

        for batch in order.chunks(cfg.batch_size) {
            let views: Vec<SeriesSample<F>> = batch
                .iter()
                .map(|&i| training_view(&dataset.samples[i], cfg, epoch, i))
                .collect();

            if let Some(disc) = discriminator.as_mut() {
                // Phase 1/2: completed series from the frozen generator,
                // then critic updates against them.
                let completed: Vec<Vec<F>> = views
                    .iter()
                    .map(|v| generator.run(v).map(|o| o.replaced))
                    .collect::<Result<_>>()?;
                for _ in 0..n_critic {
                    let mut tape = Tape::new();
                    let binding = disc.bind(&mut tape, true);
                    let mut losses = Vec::with_capacity(views.len());
                    for (view, series) in views.iter().zip(&completed) {
                        let steps: Vec<Var> =
                            series.iter().map(|&v| tape.constant_scalar(v)).collect();
                        let pass = disc.forward(&mut tape, &binding, &steps, view)?;
                        let mask = view.target_mask();
                        losses.push(discriminator_loss(&mut tape, pass.scores, &mask, cfg.loss_mode)?);
                    }
                    let batch_loss = mean_of(&mut tape, &losses)?;
                    acc.sum_d += tape.value(batch_loss).item().f64();
                    acc.d_updates += 1;
                    let grads = tape.backward(batch_loss)?;
                    let gvals: Vec<Array<F>> =
                        binding.ordered_vars().iter().map(|&v| grads.wrt(v)).collect();
                    let mut tensors = disc.params.tensors_mut();
                    adam_d.step(&mut tensors, &gvals)?;
                    if cfg.loss_mode == AdvMode::Wasserstein {
                        disc.params.clip_weights(F::c(cfg.clip));
                    }
                }
            }

            // Phase 3: generator update with the discriminator frozen.
            let mut tape = Tape::new();
            let g_binding = generator.bind(&mut tape, true);
            let d_binding = discriminator.as_ref().map(|dsc| dsc.bind(&mut tape, false));
            let mut totals = Vec::with_capacity(views.len());
            let mut batch_r = 0.0;
            let mut batch_c = 0.0;
            let mut batch_g = 0.0;
            for view in &views {
                let pass = generator.forward(&mut tape, &g_binding, view)?;
                let x = view.target_values();
                let m = view.target_mask();
                let loss_r = reconstruction_loss(&mut tape, &x, &m, pass.combined)?;
                let loss_c = consistency_loss(&mut tape, pass.est_fwd, pass.est_bwd)?;
                batch_r += tape.value(loss_r).item().f64();
                batch_c += tape.value(loss_c).item().f64();
                let mut total = tape.scale(loss_r, F::c(cfg.loss_weight_r));
                let wc = tape.scale(loss_c, F::c(cfg.loss_weight_c));
                total = tape.add(total, wc)?;
                if let (Some(disc), Some(db)) = (discriminator.as_ref(), d_binding.as_ref()) {
                    let dp = disc.forward(&mut tape, db, &pass.replaced_steps, view)?;
                    let loss_g = generator_adversarial_loss(
                        &mut tape,
                        dp.scores,
                        &m,
                        cfg.loss_mode,
                        cfg.non_saturating_g,
                    )?;
                    batch_g += tape.value(loss_g).item().f64();
                    let wg = tape.scale(loss_g, F::c(cfg.loss_weight_g));
                    total = tape.add(total, wg)?;
                }
                totals.push(total);
            }
            let batch_total = mean_of(&mut tape, &totals)?;
            acc.sum_r += batch_r;
            acc.sum_c += batch_c;
            acc.sum_g += batch_g;
            acc.sum_total += tape.value(batch_total).item().f64() * views.len() as f64;
            acc.samples += views.len();
            let grads = tape.backward(batch_total)?;
            let gvals: Vec<Array<F>> =
                g_binding.ordered_vars().iter().map(|&v| grads.wrt(v)).collect();
            let mut tensors = generator.params.tensors_mut(with_lambda);
            adam_g.step(&mut tensors, &gvals)?;
        }

        let val_mae = plans_mae(&generator, &val_plans, dataset)?;
        let ns = acc.samples.max(1) as f64;
        log.rows.push(EpochRow {
            epoch,
            loss_r: acc.sum_r / ns,
            loss_c: acc.sum_c / ns,
            loss_g: discriminator.as_ref().map(|_| acc.sum_g / ns),
            loss_d: discriminator.as_ref().map(|_| acc.sum_d / acc.d_updates.max(1) as f64),
            val_mae,
            total_g: acc.sum_total / ns,
        });

        if val_mae < best_val {
            best_val = val_mae;
            best = Snapshot {
                generator: generator.params.clone(),
                discriminator: discriminator.as_ref().map(|dsc| dsc.params.clone()),
                epoch: epoch + 1,
                val_mae,
            };
            since_improved = 0;
        } else {
            since_improved += 1;
            if since_improved >= cfg.patience {
                break;
            }
        }
    }

    let checkpoint = Checkpoint {
        generator: best.generator,
        discriminator: best.discriminator,
        norm,
        target_index: dataset.target_index,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        epoch: best.epoch,
        val_mae: F::c(best.val_mae),
        cell: cfg.cell,
        loss_mode: cfg.loss_mode,
        no_lambda: cfg.no_lambda,
        normalize_combination: cfg.normalize_combination,
        condition_on_mask: cfg.condition_on_mask,
    };
    Ok(TrainOutcome {
        checkpoint,
        log,
        final_generator: generator.params,
        final_discriminator: discriminator.map(|d| d.params),
    })
}

struct Snapshot<F> {
    generator: GeneratorParams<F>,
    discriminator: Option<DiscriminatorParams<F>>,
    epoch: usize,
    val_mae: f64,
}

/// Optionally delete a fresh set of observed target entries for this
/// epoch; the native sample is used when deletion is disabled or cannot
/// apply.
fn training_view<F: Scalar>(
    sample: &SeriesSample<F>,
    cfg: &TrainConfig,
    epoch: usize,
    index: usize,
) -> SeriesSample<F> {
    if cfg.train_corrupt_rate == 0.0 {
        return sample.clone();
    }
    let tag = ((epoch as u64) << 32) | index as u64;
    match corrupt_imputation(sample, cfg.train_corrupt_rate, derive(cfg.seed, "train-corrupt", tag)) {
        Ok(plan) => plan.corrupted,
        Err(_) => sample.clone(),
    }
}

fn mean_of<F: Scalar>(tape: &mut Tape<F>, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(tape.scale(acc, F::c(1.0 / terms.len() as f64)))
}

/// Give a dataset a validation split when it lacks one by relabeling
/// roughly a tenth of the train samples, deterministically.
pub fn ensure_validation_split<F: Scalar>(dataset: &Dataset<F>, seed: u64) -> Dataset<F> {
    if !dataset.indices_of(Split::Validation).is_empty() {
        return dataset.clone();
    }
    let mut out = dataset.clone();
    let mut train = out.indices_of(Split::Train);
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "carve-validation", 0));
    train.shuffle(&mut rng);
    let take = (train.len() / 10).max(1);
    for &i in train.iter().take(take) {
        out.splits[i] = Split::Validation;
    }
    out
}

/// The trained model behind the shared imputer interface; `fit` trains
/// from scratch on the dataset it is handed (carving a validation split
/// when none is present), `impute` runs the generator on the corrupted
/// sample and returns the replaced series.
pub struct BiGanImputer<F> {
    label: String,
    pub config: TrainConfig,
    model: Option<Generator<F>>,
    /// Checkpoint from the most recent `fit`, for persisting fold models.
    pub last_checkpoint: Option<Checkpoint<F>>,
}

impl<F: Scalar> BiGanImputer<F> {
    pub fn new(label: impl Into<String>, config: TrainConfig) -> Self {
        Self { label: label.into(), config, model: None, last_checkpoint: None }
    }

    /// Wrap an already-trained checkpoint (no refitting on `fit`).
    pub fn from_checkpoint(label: impl Into<String>, checkpoint: &Checkpoint<F>, config: TrainConfig) -> Self {
        Self {
            label: label.into(),
            config,
            model: Some(checkpoint.generator()),
            last_checkpoint: Some(checkpoint.clone()),
        }
    }
}

impl<F: Scalar> crate::evaluation::Imputer<F> for BiGanImputer<F> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit(&mut self, train: &Dataset<F>) -> Result<()> {
        let ds = ensure_validation_split(train, self.config.seed);
        let outcome = crate::trainer::train(&ds, &self.config)?;
        self.model = Some(outcome.checkpoint.generator());
        self.last_checkpoint = Some(outcome.checkpoint);
        Ok(())
    }

    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>> {
        let model =
            self.model.as_ref().ok_or_else(|| Error::Data("model imputer not fitted".into()))?;
        Ok(model.run(&plan.corrupted)?.replaced)
    }
}

// ---- checkpoint container ----

const MAGIC: &[u8; 4] = b"BGAN";
const VERSION: u32 = 1;

/// Trained model state; round-trips bit-exactly through the container.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub generator: GeneratorParams<F>,
    pub discriminator: Option<DiscriminatorParams<F>>,
    pub norm: NormStats<F>,
    pub target_index: usize,
    pub config_hash: u64,
    pub seed: u64,
    pub epoch: usize,
    pub val_mae: F,
    pub cell: CellKind,
    pub loss_mode: AdvMode,
    pub no_lambda: bool,
    pub normalize_combination: bool,
    pub condition_on_mask: bool,
}

impl<F: Scalar> Checkpoint<F> {
    /// A generator ready to impute, honoring the stored combine mode.
    pub fn generator(&self) -> Generator<F> {
        let combine = if self.no_lambda {
            CombineMode::Mean
        } else if self.normalize_combination {
            CombineMode::WeightedNormalized
        } else {
            CombineMode::Weighted
        };
        Generator::new(self.generator.clone(), combine)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, MAGIC, VERSION)?;
        let mut entries: Vec<(String, Array<F>)> = vec![
            ("meta.config_hash".into(), limbs(self.config_hash)),
            ("meta.seed".into(), limbs(self.seed)),
            ("meta.epoch".into(), Array::scalar(F::c(self.epoch as f64))),
            ("meta.val_mae".into(), Array::scalar(self.val_mae)),
            ("meta.hidden_g".into(), Array::scalar(F::c(self.generator.hidden as f64))),
            (
                "meta.hidden_d".into(),
                Array::scalar(F::c(
                    self.discriminator.as_ref().map_or(0, |d| d.hidden) as f64
                )),
            ),
            ("meta.input_dim".into(), Array::scalar(F::c(self.generator.input_dim as f64))),
            ("meta.target_index".into(), Array::scalar(F::c(self.target_index as f64))),
            ("meta.cell".into(), flag(self.cell == CellKind::Lstm)),
            ("meta.loss_mode".into(), flag(self.loss_mode == AdvMode::Wasserstein)),
            ("meta.no_lambda".into(), flag(self.no_lambda)),
            ("meta.normalize_combination".into(), flag(self.normalize_combination)),
            ("meta.condition_on_mask".into(), flag(self.condition_on_mask)),
            ("norm.mean".into(), Array::vector(self.norm.mean.clone())),
            ("norm.std".into(), Array::vector(self.norm.std.clone())),
        ];
        for (name, t) in self.generator.tensors(true) {
            entries.push((name, t.clone()));
        }
        if let Some(disc) = &self.discriminator {
            for (name, t) in disc.tensors() {
                entries.push((name, t.clone()));
            }
        }
        write_u32(w, entries.len() as u32)?;
        for (name, t) in &entries {
            write_entry(w, name, t)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let version = read_header(r, MAGIC)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = read_u32(r)? as usize;
        let mut entries: Vec<(String, Array<F>)> = Vec::with_capacity(count);
        for _ in 0..count {
            entries.push(read_entry(r)?);
        }
        let mut map = EntryMap { entries };

        let config_hash = unlimbs(&map.take("meta.config_hash")?)?;
        let seed = unlimbs(&map.take("meta.seed")?)?;
        let epoch = map.take_scalar("meta.epoch")? as usize;
        let val_mae = map.take("meta.val_mae")?.item();
        let hidden_g = map.take_scalar("meta.hidden_g")? as usize;
        let hidden_d = map.take_scalar("meta.hidden_d")? as usize;
        let input_dim = map.take_scalar("meta.input_dim")? as usize;
        let target_index = map.take_scalar("meta.target_index")? as usize;
        let cell = if map.take_scalar("meta.cell")? != 0.0 { CellKind::Lstm } else { CellKind::Simple };
        let loss_mode = if map.take_scalar("meta.loss_mode")? != 0.0 {
            AdvMode::Wasserstein
        } else {
            AdvMode::Vanilla
        };
        let no_lambda = map.take_scalar("meta.no_lambda")? != 0.0;
        let normalize_combination = map.take_scalar("meta.normalize_combination")? != 0.0;
        let condition_on_mask = map.take_scalar("meta.condition_on_mask")? != 0.0;
        let norm = NormStats {
            mean: map.take("norm.mean")?.data().to_vec(),
            std: map.take("norm.std")?.data().to_vec(),
        };

        let generator = GeneratorParams {
            fwd: read_direction(&mut map, "gen.fwd", cell)?,
            bwd: read_direction(&mut map, "gen.bwd", cell)?,
            hidden: hidden_g,
            input_dim,
        };
        let discriminator = if hidden_d > 0 {
            Some(DiscriminatorParams {
                fwd_cell: read_cell(&mut map, "disc.fwd", cell)?,
                bwd_cell: read_cell(&mut map, "disc.bwd", cell)?,
                w_out: map.take("disc.w_out")?,
                b_out: map.take("disc.b_out")?,
                hidden: hidden_d,
                input_dim: if condition_on_mask { 4 } else { 1 },
            })
        } else {
            None
        };

        Ok(Checkpoint {
            generator,
            discriminator,
            norm,
            target_index,
            config_hash,
            seed,
            epoch,
            val_mae,
            cell,
            loss_mode,
            no_lambda,
            normalize_combination,
            condition_on_mask,
        })
    }
}

struct EntryMap<F> {
    entries: Vec<(String, Array<F>)>,
}

impl<F: Scalar> EntryMap<F> {
    fn take(&mut self, name: &str) -> Result<Array<F>> {
        let idx = self
            .entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("checkpoint missing entry {name:?}")))?;
        Ok(self.entries.remove(idx).1)
    }

    fn take_scalar(&mut self, name: &str) -> Result<f64> {
        Ok(self.take(name)?.item().f64())
    }
}

/// u64 encoded as four 16-bit limbs, exact in any float width used here.
fn limbs<F: Scalar>(v: u64) -> Array<F> {
    Array::vector(
        (0..4)
            .map(|i| F::c(((v >> (16 * (3 - i))) & 0xffff) as f64))
            .collect(),
    )
}

fn unlimbs<F: Scalar>(a: &Array<F>) -> Result<u64> {
    if a.len() != 4 {
        return Err(Error::Format("expected 4 limbs".into()));
    }
    let mut v = 0u64;
    for x in a.iter() {
        v = (v << 16) | (x.f64() as u64 & 0xffff);
    }
    Ok(v)
}

fn flag<F: Scalar>(v: bool) -> Array<F> {
    Array::scalar(if v { F::one() } else { F::zero() })
}

fn read_cell<F: Scalar>(map: &mut EntryMap<F>, prefix: &str, kind: CellKind) -> Result<CellParams<F>> {
    match kind {
        CellKind::Simple => Ok(CellParams::Simple {
            w_h: map.take(&format!("{prefix}.w_h"))?,
            u_h: map.take(&format!("{prefix}.u_h"))?,
            b_h: map.take(&format!("{prefix}.b_h"))?,
        }),
        CellKind::Lstm => {
            let mut gates = Vec::with_capacity(4);
            for g in ["i", "f", "o", "g"] {
                gates.push(crate::model::cell::GateParams {
                    w: map.take(&format!("{prefix}.w_{g}"))?,
                    u: map.take(&format!("{prefix}.u_{g}"))?,
                    b: map.take(&format!("{prefix}.b_{g}"))?,
                });
            }
            Ok(CellParams::Lstm { gates })
        }
    }
}

fn read_direction<F: Scalar>(
    map: &mut EntryMap<F>,
    prefix: &str,
    kind: CellKind,
) -> Result<crate::model::generator::DirectionParams<F>> {
    Ok(crate::model::generator::DirectionParams {
        cell: read_cell(map, prefix, kind)?,
        w_x: map.take(&format!("{prefix}.w_x"))?,
        b_x: map.take(&format!("{prefix}.b_x"))?,
        w_gamma: map.take(&format!("{prefix}.w_gamma"))?,
        b_gamma: map.take(&format!("{prefix}.b_gamma"))?,
        w_lambda: map.take(&format!("{prefix}.w_lambda"))?,
        b_lambda: map.take(&format!("{prefix}.b_lambda"))?,
    })
}
