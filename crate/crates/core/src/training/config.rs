use std::fmt::Display;
use std::str::FromStr;

use crate::denoiser::{DenoiserConfig, Variant};
use crate::diffusion::{NoiseSchedule, COSINE_OFFSET};
use crate::error::{Error, Result};
use crate::graphdata::Marginals;

/// Dataset size class that selects default hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// A few thousand nodes.
    Citation,
    /// Up to roughly ten thousand nodes.
    Medium,
    Large,
}

impl Scale {
    pub fn of(n: usize) -> Self {
        match n {
            0..=5_000 => Scale::Citation,
            5_001..=10_000 => Scale::Medium,
            _ => Scale::Large,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: DenoiserConfig,
    /// Unconditional models on labeled graphs generate labels as one more
    /// attribute column; when false such labels are dropped.
    pub labels_as_attribute: bool,
    /// Steps of the synchronous schedule.
    pub steps: usize,
    pub attr_steps: usize,
    pub edge_steps: usize,
    pub schedule_offset: f64,
    pub lr_attr: f64,
    pub lr_edge: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Node pairs per edge-loss evaluation.
    pub batch_pairs: usize,
    pub patience: usize,
    pub max_grad_norm: f64,
    pub eval_interval: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn defaults(variant: Variant, conditional: bool, scale: Scale) -> Self {
        let model = match scale {
            Scale::Citation => DenoiserConfig::citation(variant, conditional),
            Scale::Medium => DenoiserConfig::copurchase(variant, conditional, false),
            Scale::Large => DenoiserConfig::copurchase(variant, conditional, true),
        };
        let batch_pairs = match (variant, scale) {
            (_, Scale::Citation) => 16_384,
            (Variant::Sync, Scale::Medium) => 524_288,
            (Variant::Async, Scale::Medium) => 262_144,
            (_, Scale::Large) => 2_097_152,
        };
        Self {
            model,
            labels_as_attribute: true,
            steps: 3,
            attr_steps: if scale == Scale::Large { 7 } else { 6 },
            edge_steps: 9,
            schedule_offset: COSINE_OFFSET,
            lr_attr: 1e-3,
            lr_edge: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_pairs,
            patience: if scale == Scale::Citation { 20 } else { 15 },
            max_grad_norm: 10.0,
            eval_interval: 100,
            max_steps: 50_000,
            seed: 0,
        }
    }

    pub fn for_graph(variant: Variant, conditional: bool, n: usize) -> Self {
        Self::defaults(variant, conditional, Scale::of(n))
    }

    pub fn variant(&self) -> Variant {
        self.model.variant
    }

    pub fn conditional(&self) -> bool {
        self.model.conditional
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_pairs < 1 {
            return bad("batch_pairs must be at least 1");
        }
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.lr_attr > 0.0 && self.lr_edge > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if self.eval_interval < 1 || self.max_steps < 1 {
            return bad("eval_interval and max_steps must be at least 1");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0)
        {
            return bad("optimizer moments need betas in [0, 1) and eps > 0");
        }
        match self.variant() {
            Variant::Sync if self.steps == 0 => bad("steps must be at least 1"),
            Variant::Async if self.attr_steps == 0 || self.edge_steps == 0 => {
                bad("attr_steps and edge_steps must be at least 1")
            }
            _ => Ok(()),
        }
    }

    pub fn schedule(&self, marginals: Marginals) -> Result<NoiseSchedule> {
        match self.variant() {
            Variant::Sync => NoiseSchedule::sync(self.steps, self.schedule_offset, marginals),
            Variant::Async => NoiseSchedule::asynchronous(
                self.attr_steps,
                self.edge_steps,
                self.schedule_offset,
                marginals,
            ),
        }
    }

    /// Sets one `section.name` key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: Display,
        {
            value
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("{key}={value}: {e}")))
        }
        let m = &mut self.model;
        match key {
            "model.variant" => {
                m.variant = Variant::parse(value.trim()).ok_or_else(|| {
                    Error::Config(format!("{key}={value}: expected sync or async"))
                })?
            }
            "model.conditional" => m.conditional = parse(key, value)?,
            "model.time_hidden" => m.time_hidden = parse(key, value)?,
            "model.hidden" => m.hidden = parse(key, value)?,
            "model.label_hidden" => m.label_hidden = parse(key, value)?,
            "model.layers" => m.layers = parse(key, value)?,
            "model.edge_hidden" => m.edge_hidden = parse(key, value)?,
            "model.attr_mlp_hidden" => m.attr_mlp_hidden = parse(key, value)?,
            "model.dropout" => m.dropout = parse(key, value)?,
            "train.labels_as_attribute" => self.labels_as_attribute = parse(key, value)?,
            "train.steps" => self.steps = parse(key, value)?,
            "train.attr_steps" => self.attr_steps = parse(key, value)?,
            "train.edge_steps" => self.edge_steps = parse(key, value)?,
            "train.schedule_offset" => self.schedule_offset = parse(key, value)?,
            "train.lr_attr" => self.lr_attr = parse(key, value)?,
            "train.lr_edge" => self.lr_edge = parse(key, value)?,
            "train.beta1" => self.beta1 = parse(key, value)?,
            "train.beta2" => self.beta2 = parse(key, value)?,
            "train.eps" => self.eps = parse(key, value)?,
            "train.batch_pairs" => self.batch_pairs = parse(key, value)?,
            "train.patience" => self.patience = parse(key, value)?,
            "train.max_grad_norm" => self.max_grad_norm = parse(key, value)?,
            "train.eval_interval" => self.eval_interval = parse(key, value)?,
            "train.max_steps" => self.max_steps = parse(key, value)?,
            "train.seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`; floats print in shortest round-trip form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        vec![
            ("model.variant", m.variant.name().to_string()),
            ("model.conditional", m.conditional.to_string()),
            ("model.time_hidden", m.time_hidden.to_string()),
            ("model.hidden", m.hidden.to_string()),
            ("model.label_hidden", m.label_hidden.to_string()),
            ("model.layers", m.layers.to_string()),
            ("model.edge_hidden", m.edge_hidden.to_string()),
            ("model.attr_mlp_hidden", m.attr_mlp_hidden.to_string()),
            ("model.dropout", m.dropout.to_string()),
            (
                "train.labels_as_attribute",
                self.labels_as_attribute.to_string(),
            ),
            ("train.steps", self.steps.to_string()),
            ("train.attr_steps", self.attr_steps.to_string()),
            ("train.edge_steps", self.edge_steps.to_string()),
            ("train.schedule_offset", self.schedule_offset.to_string()),
            ("train.lr_attr", self.lr_attr.to_string()),
            ("train.lr_edge", self.lr_edge.to_string()),
            ("train.beta1", self.beta1.to_string()),
            ("train.beta2", self.beta2.to_string()),
            ("train.eps", self.eps.to_string()),
            ("train.batch_pairs", self.batch_pairs.to_string()),
            ("train.patience", self.patience.to_string()),
            ("train.max_grad_norm", self.max_grad_norm.to_string()),
            ("train.eval_interval", self.eval_interval.to_string()),
            ("train.max_steps", self.max_steps.to_string()),
            ("train.seed", self.seed.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#` comments
    /// are skipped; keys outside the `model.` and `train.` sections are left
    /// for other consumers.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let k = k.trim();
            if k.starts_with("model.") || k.starts_with("train.") {
                self.set(k, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::defaults(Variant::Async, true, Scale::Large);
        cfg.lr_edge = 0.1 + 0.2;
        cfg.seed = u64::MAX;
        let mut back = TrainConfig::defaults(Variant::Sync, false, Scale::Citation);
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn scale_defaults() {
        let c = TrainConfig::for_graph(Variant::Sync, false, 2708);
        assert_eq!(
            (c.batch_pairs, c.patience, c.model.time_hidden),
            (16_384, 20, 32)
        );
        let p = TrainConfig::for_graph(Variant::Async, false, 7650);
        assert_eq!(
            (p.batch_pairs, p.attr_steps, p.model.attr_mlp_hidden),
            (262_144, 6, 512)
        );
        let l = TrainConfig::for_graph(Variant::Async, true, 13_752);
        assert_eq!(
            (l.batch_pairs, l.attr_steps, l.model.attr_mlp_hidden),
            (2_097_152, 7, 1024)
        );
        assert_eq!(l.model.dropout, 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig::defaults(Variant::Sync, false, Scale::Citation);
        assert!(c.set("train.patience", "x").is_err());
        assert!(c.set("train.nope", "1").is_err());
        assert!(c.apply_text("train.lr_attr").is_err());
        c.patience = 0;
        assert!(c.validate().is_err());
        c.patience = 1;
        c.lr_attr = 0.0;
        assert!(c.validate().is_err());
    }
}
