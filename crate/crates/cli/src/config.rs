//! Plain-text configuration: `[section]` headers with `key = value`
//! lines, `#` comments. Precedence: command-line flag, then environment
//! variable (`BIGAN_SECTION_KEY`), then the config file, then the
//! documented default.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bigan_core::model::cell::CellKind;
use bigan_core::model::discriminator::AdvMode;
use bigan_core::trainer::{fnv1a, TrainConfig, WASSERSTEIN_LR};

/// Every key, its default, and its meaning. `auto` learning rates resolve
/// to 1e-3 under the vanilla loss and 5e-5 under the Wasserstein loss.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("train.seed", "42", "run seed; must be set explicitly for training commands"),
    ("train.epochs", "300", "maximum training epochs"),
    ("train.batch_size", "32", "whole samples per batch"),
    ("train.lr_g", "auto", "generator learning rate"),
    ("train.lr_d", "auto", "discriminator learning rate"),
    ("train.beta1", "0.9", "first moment decay"),
    ("train.beta2", "0.999", "second moment decay"),
    ("train.adam_eps", "1e-8", "optimizer epsilon"),
    ("train.patience", "10", "early-stopping patience on validation MAE"),
    ("train.corrupt_rate", "0", "extra random deletion of observed target cells per epoch"),
    ("train.val_rate", "0.1", "deletion rate of the fixed validation protocol"),
    ("model.cell", "simple", "recurrent cell: simple | lstm"),
    ("model.hidden_g", "32", "generator hidden width"),
    ("model.hidden_d", "32", "discriminator hidden width"),
    ("model.loss_mode", "vanilla", "adversarial objective: vanilla | wasserstein"),
    ("model.no_gan", "false", "ablation: drop the discriminator and adversarial losses"),
    ("model.no_lambda", "false", "ablation: average directions instead of learned weights"),
    ("model.normalize_combination", "false", "rescale combination weights to sum to one"),
    ("model.non_saturating_g", "false", "use the non-saturating generator objective"),
    ("model.condition_on_mask", "false", "feed mask and gap channels to the discriminator"),
    ("model.n_critic", "5", "critic updates per generator update (Wasserstein mode)"),
    ("model.clip", "0.01", "weight-clipping bound (Wasserstein mode)"),
    ("model.loss_weight_r", "1", "weight of the reconstruction loss"),
    ("model.loss_weight_c", "1", "weight of the consistency loss"),
    ("model.loss_weight_g", "1", "weight of the adversarial generator loss"),
    ("eval.k", "5", "cross-validation folds"),
    ("eval.knn_k", "5", "neighbors used by the knn imputer"),
    ("eval.mice_iters", "10", "chained-equation iterations"),
    ("eval.rate", "0.1", "imputation-setting deletion rate for ablate"),
    ("eval.obs_len", "4", "prediction-setting observation window for ablate"),
];

/// Rendered key table for `--help`.
pub fn keys_help() -> String {
    let mut out = String::from("Config keys (key = value under [section] headers):\n");
    for (key, default, help) in KEYS {
        out.push_str(&format!("  {key:<30} default {default:<10} {help}\n"));
    }
    out.push_str("\nEnvironment overrides: BIGAN_<SECTION>_<KEY>, e.g. BIGAN_TRAIN_SEED=7.\n");
    out
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Keys that were set explicitly (file, env, or flag).
    explicit: Vec<String>,
}

impl Config {
    /// Defaults, then file, then environment, then flag overrides.
    pub fn load(path: Option<&Path>, flags: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        let mut explicit = Vec::new();

        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (key, value) in parse_config_text(&text)? {
                if !values.contains_key(&key) {
                    bail!("unknown config key `{key}` in {}", path.display());
                }
                values.insert(key.clone(), value);
                explicit.push(key);
            }
        }

        for (key, _, _) in KEYS {
            let env_name =
                format!("BIGAN_{}", key.replace('.', "_").to_uppercase());
            if let Ok(v) = std::env::var(&env_name) {
                values.insert(key.to_string(), v);
                explicit.push(key.to_string());
            }
        }

        for (key, value) in flags {
            if !values.contains_key(key) {
                bail!("unknown config key `{key}`");
            }
            values.insert(key.clone(), value.clone());
            explicit.push(key.clone());
        }

        Ok(Config { values, explicit })
    }

    /// Training commands refuse to guess the seed: a run is only
    /// reproducible when the config pins it.
    pub fn require_explicit_seed(&self) -> Result<()> {
        if !self.explicit.iter().any(|k| k == "train.seed") {
            bail!(
                "missing config key `train.seed` (default 42): set it in the config file \
                 or via BIGAN_TRAIN_SEED so the run is reproducible"
            );
        }
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key validated at load")
    }

    fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key).parse().map_err(|_| anyhow!("config key `{key}`: expected a number, got {:?}", self.get(key)))
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key).parse().map_err(|_| anyhow!("config key `{key}`: expected an integer, got {:?}", self.get(key)))
    }

    fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key).parse().map_err(|_| anyhow!("config key `{key}`: expected an integer, got {:?}", self.get(key)))
    }

    fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => bail!("config key `{key}`: expected true/false, got {other:?}"),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_u64("train.seed")
    }

    pub fn eval_k(&self) -> Result<usize> {
        self.get_usize("eval.k")
    }

    pub fn knn_k(&self) -> Result<usize> {
        self.get_usize("eval.knn_k")
    }

    pub fn mice_iters(&self) -> Result<usize> {
        self.get_usize("eval.mice_iters")
    }

    pub fn eval_rate(&self) -> Result<f64> {
        self.get_f64("eval.rate")
    }

    pub fn eval_obs_len(&self) -> Result<usize> {
        self.get_usize("eval.obs_len")
    }

    /// A copy with the given keys replaced (ablation variants).
    pub fn with_overrides(&self, overrides: &[(&str, &str)]) -> Result<Self> {
        let mut out = self.clone();
        for (key, value) in overrides {
            if !out.values.contains_key(*key) {
                bail!("unknown config key `{key}`");
            }
            out.values.insert(key.to_string(), value.to_string());
            out.explicit.push(key.to_string());
        }
        Ok(out)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let loss_mode = AdvMode::parse(self.get("model.loss_mode"))
            .ok_or_else(|| anyhow!("config key `model.loss_mode`: expected vanilla|wasserstein"))?;
        let cell = CellKind::parse(self.get("model.cell"))
            .ok_or_else(|| anyhow!("config key `model.cell`: expected simple|lstm"))?;
        let auto_lr = match loss_mode {
            AdvMode::Vanilla => 1e-3,
            AdvMode::Wasserstein => WASSERSTEIN_LR,
        };
        let lr = |key: &str| -> Result<f64> {
            if self.get(key) == "auto" {
                Ok(auto_lr)
            } else {
                self.get_f64(key)
            }
        };
        let mut cfg = TrainConfig::new(self.get_u64("train.seed")?);
        cfg.epochs = self.get_usize("train.epochs")?;
        cfg.batch_size = self.get_usize("train.batch_size")?;
        cfg.lr_g = lr("train.lr_g")?;
        cfg.lr_d = lr("train.lr_d")?;
        cfg.beta1 = self.get_f64("train.beta1")?;
        cfg.beta2 = self.get_f64("train.beta2")?;
        cfg.adam_eps = self.get_f64("train.adam_eps")?;
        cfg.patience = self.get_usize("train.patience")?;
        cfg.train_corrupt_rate = self.get_f64("train.corrupt_rate")?;
        cfg.val_rate = self.get_f64("train.val_rate")?;
        cfg.loss_mode = loss_mode;
        cfg.cell = cell;
        cfg.hidden_g = self.get_usize("model.hidden_g")?;
        cfg.hidden_d = self.get_usize("model.hidden_d")?;
        cfg.no_gan = self.get_bool("model.no_gan")?;
        cfg.no_lambda = self.get_bool("model.no_lambda")?;
        cfg.normalize_combination = self.get_bool("model.normalize_combination")?;
        cfg.non_saturating_g = self.get_bool("model.non_saturating_g")?;
        cfg.condition_on_mask = self.get_bool("model.condition_on_mask")?;
        cfg.n_critic = self.get_usize("model.n_critic")?;
        cfg.clip = self.get_f64("model.clip")?;
        cfg.loss_weight_r = self.get_f64("model.loss_weight_r")?;
        cfg.loss_weight_c = self.get_f64("model.loss_weight_c")?;
        cfg.loss_weight_g = self.get_f64("model.loss_weight_g")?;
        Ok(cfg)
    }

    /// All effective values, sorted, one per line.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.values {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical_text().as_bytes())
    }
}

fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {}: unterminated section header", idx + 1))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {line:?}", idx + 1))?;
        let key = key.trim();
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        out.push((full, value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_file_precedence() {
        let dir = std::env::temp_dir().join("bigan-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.config");
        std::fs::write(&path, "[train]\nseed = 7\nepochs = 12\n[model]\nhidden_g = 8\n").unwrap();
        let cfg = Config::load(Some(&path), &[]).unwrap();
        let tc = cfg.train_config().unwrap();
        assert_eq!(tc.seed, 7);
        assert_eq!(tc.epochs, 12);
        assert_eq!(tc.hidden_g, 8);
        assert_eq!(tc.batch_size, 32);
        assert!(cfg.require_explicit_seed().is_ok());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = std::env::temp_dir().join("bigan-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("b.config");
        std::fs::write(&path, "[train]\nseeed = 7\n").unwrap();
        let err = Config::load(Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("seeed"), "{err}");
    }

    #[test]
    fn missing_seed_names_key_and_default() {
        let cfg = Config::load(None, &[]).unwrap();
        let err = cfg.require_explicit_seed().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train.seed") && msg.contains("42"), "{msg}");
    }

    #[test]
    fn wasserstein_auto_learning_rate() {
        let cfg = Config::load(None, &[("model.loss_mode".into(), "wasserstein".into())]).unwrap();
        let tc = cfg.train_config().unwrap();
        assert_eq!(tc.lr_g, WASSERSTEIN_LR);
        let cfg2 = Config::load(
            None,
            &[
                ("model.loss_mode".into(), "wasserstein".into()),
                ("train.lr_g".into(), "0.002".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg2.train_config().unwrap().lr_g, 0.002);
    }

    #[test]
    fn hash_tracks_effective_values() {
        let a = Config::load(None, &[]).unwrap();
        let b = Config::load(None, &[("train.seed".into(), "43".into())]).unwrap();
        assert_ne!(a.hash(), b.hash());
        let c = Config::load(None, &[("train.seed".into(), "42".into())]).unwrap();
        assert_eq!(a.hash(), c.hash());
    }
}
