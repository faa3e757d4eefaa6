use std::path::Path;

use super::{AdamParams, KneeSchedule, LossKind};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Everything one training run needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub hr_patch: usize,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub scale: usize,
    pub schedule: KneeSchedule,
    pub adam: AdamParams,
    pub core: usize,
    pub use_nla: bool,
    pub nla_tile: usize,
    /// Side of the centred square each validation image is cut to; 0 keeps
    /// whole images.
    pub val_crop: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let schedule = KneeSchedule::default();
        TrainConfig {
            batch: 8,
            hr_patch: 512,
            steps_per_epoch: 800,
            epochs: schedule.total_epochs(),
            loss: LossKind::Charbonnier { eps: 0.1 },
            seed: 0,
            scale: 4,
            schedule,
            adam: AdamParams::default(),
            core: 16,
            use_nla: true,
            nla_tile: 16,
            val_crop: 0,
        }
    }
}

/// Splits `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Returns `(line number, key, value)` triples in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: i + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::ConfigSyntax {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::ConfigSyntax {
        line,
        reason: format!("`{key}` cannot take the value `{v}`"),
    })
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        let mut loss_name = String::from("charbonnier");
        let mut eps = 0.1f32;
        let mut saw_epochs = false;
        for (line, k, v) in parse_key_values(text)? {
            match k.as_str() {
                "batch" => c.batch = num(line, &k, &v)?,
                "hr_patch" => c.hr_patch = num(line, &k, &v)?,
                "steps_per_epoch" => c.steps_per_epoch = num(line, &k, &v)?,
                "epochs" => {
                    c.epochs = num(line, &k, &v)?;
                    saw_epochs = true;
                }
                "loss" => loss_name = v.to_ascii_lowercase(),
                "charbonnier_eps" => eps = num(line, &k, &v)?,
                "seed" => c.seed = num(line, &k, &v)?,
                "scale" => c.scale = num(line, &k, &v)?,
                "warmup_epochs" => c.schedule.warmup_epochs = num(line, &k, &v)?,
                "exploit_epochs" => c.schedule.exploit_epochs = num(line, &k, &v)?,
                "cooldown_epochs" => c.schedule.cooldown_epochs = num(line, &k, &v)?,
                "max_lr" => c.schedule.max_lr = num(line, &k, &v)?,
                "floor_lr" => c.schedule.floor_lr = num(line, &k, &v)?,
                "beta1" => c.adam.beta1 = num(line, &k, &v)?,
                "beta2" => c.adam.beta2 = num(line, &k, &v)?,
                "adam_eps" => c.adam.eps = num(line, &k, &v)?,
                "core" => c.core = num(line, &k, &v)?,
                "nla" => c.use_nla = num(line, &k, &v)?,
                "nla_tile" => c.nla_tile = num(line, &k, &v)?,
                "val_crop" => c.val_crop = num(line, &k, &v)?,
                _ => {
                    return Err(Error::ConfigSyntax {
                        line,
                        reason: format!("unknown key `{k}`"),
                    })
                }
            }
        }
        c.loss = match loss_name.as_str() {
            "charbonnier" => LossKind::Charbonnier { eps },
            "l2" => LossKind::L2,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "loss must be `charbonnier` or `l2`, not `{other}`"
                )))
            }
        };
        if !saw_epochs {
            c.epochs = c.schedule.total_epochs();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch == 0 || self.steps_per_epoch == 0 {
            return bad("batch and steps_per_epoch must be positive".into());
        }
        if self.scale == 0 || self.hr_patch == 0 || !self.hr_patch.is_multiple_of(self.scale) {
            return bad(format!(
                "hr_patch {} must be a positive multiple of scale {}",
                self.hr_patch, self.scale
            ));
        }
        if let LossKind::Charbonnier { eps } = self.loss {
            if !(eps > 0.0) {
                return bad(format!("charbonnier_eps {eps} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || !(self.adam.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and adam_eps be positive".into());
        }
        self.schedule.validate()?;
        self.model_config().map(|_| ())
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        ModelConfig::new(self.core, self.use_nla)?
            .with_scale(self.scale)?
            .with_tile(self.nla_tile)
    }
}
