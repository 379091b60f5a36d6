use std::fmt::Write as _;
use std::path::Path;

use super::ClassifierError;
use crate::augment::AugmentConfig;
use crate::loss::FocalConfig;
use crate::optim::AdamConfig;

/// Training hyper-parameters. Serialised as flat `key = value` text, one
/// entry per line, `#` starts a comment. Keys are the field names below,
/// with `focal.`, `adam.` and `augment.` prefixes for the nested structs.
/// A `preset = tiny` line starts from [`TrainConfig::tiny`] before the
/// other keys are applied; `preset = default` (or `full`) from the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub input_size: usize,
    pub threshold: f64,
    /// Label smoothing factor applied to 0/1 targets during training.
    pub label_smoothing: f64,
    pub focal: FocalConfig,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            train_fraction: 0.8,
            seed: 42,
            input_size: 150,
            threshold: 0.5,
            label_smoothing: 0.0,
            focal: FocalConfig::default(),
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    /// 48 px preset for smoke runs. Twenty single-batch epochs are only
    /// twenty Adam steps, so the step size is lowered to keep the early loss
    /// monotone, alpha is balanced for a balanced set, and the cutout square
    /// is scaled down with the input.
    pub fn tiny() -> Self {
        Self {
            input_size: 48,
            focal: FocalConfig {
                alpha: 0.5,
                ..FocalConfig::default()
            },
            adam: AdamConfig {
                lr: 3e-4,
                ..AdamConfig::default()
            },
            augment: AugmentConfig {
                cutout_size: 6,
                ..AugmentConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let err = |m: String| Err(ClassifierError::Config(m));
        if self.epochs == 0 {
            return err("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return err("batch_size must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return err(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return err(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return err(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if !(0.0..=1.0).contains(&self.focal.alpha) || self.focal.gamma < 0.0 {
            return err("focal.alpha must be in [0, 1] and focal.gamma >= 0".into());
        }
        if !(self.focal.epsilon > 0.0 && self.focal.epsilon < 0.5) {
            return err("focal.epsilon must be in (0, 0.5)".into());
        }
        if self.adam.lr <= 0.0 || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return err("adam.lr must be > 0 and betas in [0, 1)".into());
        }
        self.augment.validate().map_err(ClassifierError::Config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?}"))
        }
        match key {
            "epochs" => self.epochs = num(value)?,
            "batch_size" => self.batch_size = num(value)?,
            "train_fraction" => self.train_fraction = num(value)?,
            "seed" => self.seed = num(value)?,
            "input_size" => self.input_size = num(value)?,
            "threshold" => self.threshold = num(value)?,
            "label_smoothing" => self.label_smoothing = num(value)?,
            "focal.alpha" => self.focal.alpha = num(value)?,
            "focal.gamma" => self.focal.gamma = num(value)?,
            "focal.epsilon" => self.focal.epsilon = num(value)?,
            "adam.lr" => self.adam.lr = num(value)?,
            "adam.beta1" => self.adam.beta1 = num(value)?,
            "adam.beta2" => self.adam.beta2 = num(value)?,
            "adam.eps" => self.adam.eps = num(value)?,
            "augment.rotation_deg" => self.augment.rotation_deg = num(value)?,
            "augment.width_shift" => self.augment.width_shift = num(value)?,
            "augment.height_shift" => self.augment.height_shift = num(value)?,
            "augment.shear_deg" => self.augment.shear_deg = num(value)?,
            "augment.zoom" => self.augment.zoom = num(value)?,
            "augment.hflip_prob" => self.augment.hflip_prob = num(value)?,
            "augment.cutout_size" => self.augment.cutout_size = num(value)?,
            "augment.cutout_prob" => self.augment.cutout_prob = num(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    fn entries(text: &str) -> Result<Vec<(usize, &str, &str)>, ClassifierError> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ClassifierError::Config(format!("line {}: expected key = value", i + 1))
            })?;
            out.push((i + 1, k.trim(), v.trim()));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ClassifierError> {
        let entries = Self::entries(text)?;
        let mut cfg = Self::default();
        for &(line, k, v) in &entries {
            if k == "preset" {
                cfg = match v {
                    "tiny" => Self::tiny(),
                    "full" | "default" => Self::default(),
                    other => {
                        return Err(ClassifierError::Config(format!(
                            "line {line}: unknown preset {other:?}"
                        )))
                    }
                };
            }
        }
        for &(line, k, v) in &entries {
            if k != "preset" {
                cfg.set(k, v)
                    .map_err(|m| ClassifierError::Config(format!("line {line}: {k}: {m}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key in a fixed order; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub(crate) fn pairs(&self) -> Vec<(&'static str, String)> {
        let a = &self.augment;
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("seed", self.seed.to_string()),
            ("input_size", self.input_size.to_string()),
            ("threshold", self.threshold.to_string()),
            ("label_smoothing", self.label_smoothing.to_string()),
            ("focal.alpha", self.focal.alpha.to_string()),
            ("focal.gamma", self.focal.gamma.to_string()),
            ("focal.epsilon", self.focal.epsilon.to_string()),
            ("adam.lr", self.adam.lr.to_string()),
            ("adam.beta1", self.adam.beta1.to_string()),
            ("adam.beta2", self.adam.beta2.to_string()),
            ("adam.eps", self.adam.eps.to_string()),
            ("augment.rotation_deg", a.rotation_deg.to_string()),
            ("augment.width_shift", a.width_shift.to_string()),
            ("augment.height_shift", a.height_shift.to_string()),
            ("augment.shear_deg", a.shear_deg.to_string()),
            ("augment.zoom", a.zoom.to_string()),
            ("augment.hflip_prob", a.hflip_prob.to_string()),
            ("augment.cutout_size", a.cutout_size.to_string()),
            ("augment.cutout_prob", a.cutout_prob.to_string()),
        ]
    }

    pub(crate) fn apply_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}
