use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampler::sample_batch;
use super::{Adam, LossKind, TrainConfig};
use crate::autodiff::GradientTape;
use crate::error::{Error, Result};
use crate::imaging::{degrade, psnr, EvalProtocol, ImagePlane, Upscaler};
use crate::model::{save_weights, Model, Recording};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the epoch's steps.
    pub loss: f64,
    pub val_psnr: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.6e} {:.6} {:.4}", self.epoch, self.lr, self.loss, self.val_psnr)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub best_model: Model,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub step_losses: Vec<f32>,
}

/// Forward, loss, backward and one optimizer update on a fixed batch.
/// Returns the loss measured before the update. `step` only labels errors.
pub fn train_step(model: &mut Model, adam: &mut Adam, lr_batch: &Tensor, hr_batch: &Tensor, loss: LossKind, lr: f64, step: usize) -> Result<f32> {
    let mut tape = GradientTape::new();
    let mut rec = Recording::new(&mut tape, model)?;
    let x = rec.tape.leaf(lr_batch.clone());
    let y = model.forward_recorded(&mut rec, x).map_err(|e| match e {
        Error::NonFinite(_) => Error::NonFiniteLoss { step },
        other => other,
    })?;
    let t = rec.tape.leaf(hr_batch.clone());
    let l = rec.tape.loss(y, t, loss)?;
    let layers = std::mem::take(&mut rec.layers);
    let value = tape.value(l).data()[0];
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss { step });
    }
    let mut grads = tape.backward_scalar(l)?;
    let mut owned: Vec<Vec<f32>> = Vec::with_capacity(2 * layers.len());
    for (name, p) in model.layers() {
        let lv = layers[name];
        let gw = grads.take(lv.weight).map(Tensor::into_vec).unwrap_or_else(|| vec![0.0; p.weight.numel()]);
        let gb = grads.take(lv.bias).map(Tensor::into_vec).unwrap_or_else(|| vec![0.0; p.bias.len()]);
        owned.push(gw);
        owned.push(gb);
    }
    let grad_refs: Vec<&[f32]> = owned.iter().map(Vec::as_slice).collect();
    let mut params: Vec<&mut [f32]> = model
        .layers_mut()
        .flat_map(|(_, p)| [p.weight.data_mut(), p.bias.as_mut_slice()])
        .collect();
    adam.step(&mut params, &grad_refs, lr)?;
    Ok(value)
}

/// Mean RGB PSNR (shave = scale) of `model` over the validation images.
pub fn validation_psnr(model: &Model, images: &[ImagePlane], crop: usize) -> Result<f64> {
    let s = model.config().scale;
    let proto = EvalProtocol::rgb(s);
    let mut sum = 0.0;
    for img in images {
        let img = if crop > 0 && (img.width() > crop || img.height() > crop) {
            let (w, h) = (img.width().min(crop), img.height().min(crop));
            img.crop((img.width() - w) / 2, (img.height() - h) / 2, w, h)?
        } else {
            img.clone()
        };
        let (hr, lr) = degrade(&img, s)?;
        sum += psnr(&model.upscale(&lr)?, &hr, &proto)?;
    }
    Ok(sum / images.len() as f64)
}

/// Runs `cfg.epochs` epochs of `cfg.steps_per_epoch` steps. `on_epoch` sees
/// each epoch's log line, the current model and whether validation PSNR
/// improved on every earlier epoch.
pub fn train(
    mut model: Model,
    train_set: &[ImagePlane],
    val_set: &[ImagePlane],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog, &Model, bool) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("no training images".into()));
    }
    if model.config().scale != cfg.scale {
        return Err(Error::InvalidConfig(format!(
            "model scale {} but training scale {}",
            model.config().scale,
            cfg.scale
        )));
    }
    let val_set = if val_set.is_empty() { train_set } else { val_set };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::with_capacity(cfg.epochs * cfg.steps_per_epoch);
    let mut best: Option<(usize, f64, Model)> = None;
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr(epoch);
        let mut total = 0.0f64;
        for _ in 0..cfg.steps_per_epoch {
            let (lr_b, hr_b) = sample_batch(train_set, cfg, &mut rng)?;
            let step = step_losses.len();
            let l = train_step(&mut model, &mut adam, &lr_b, &hr_b, cfg.loss, lr, step)?;
            total += l as f64;
            step_losses.push(l);
        }
        let val_psnr = validation_psnr(&model, val_set, cfg.val_crop)?;
        let entry = EpochLog {
            epoch,
            lr,
            loss: total / cfg.steps_per_epoch as f64,
            val_psnr,
        };
        let improved = best.as_ref().is_none_or(|b| val_psnr > b.1);
        if improved {
            best = Some((epoch, val_psnr, model.clone()));
        }
        on_epoch(&entry, &model, improved)?;
        log.push(entry);
    }
    let (best_epoch, _, best_model) = best.unwrap_or((0, f64::NAN, model.clone()));
    Ok(TrainOutcome {
        model,
        best_model,
        best_epoch,
        log,
        step_losses,
    })
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("ckpt_epoch{epoch:04}.gidw"))
}

/// `train` writing `train.log` (one `epoch lr loss val_psnr` line per epoch)
/// and a checkpoint into `dir` whenever validation PSNR improves.
pub fn train_to_dir(model: Model, train_set: &[ImagePlane], val_set: &[ImagePlane], cfg: &TrainConfig, dir: &Path) -> Result<TrainOutcome> {
    use std::io::Write;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log_path = dir.join("train.log");
    let mut file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    train(model, train_set, val_set, cfg, &mut |entry, m, improved| {
        writeln!(file, "{entry}").map_err(|e| Error::io(&log_path, e))?;
        if improved {
            save_weights(m, checkpoint_path(dir, entry.epoch))?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch: 2,
            hr_patch: 16,
            steps_per_epoch: 2,
            epochs: 1,
            core: 4,
            use_nla: false,
            ..TrainConfig::default()
        }
    }

    fn images() -> Vec<ImagePlane> {
        (0..2)
            .map(|k| ImagePlane::from_fn(24, 20, |x, y| [((x + k) * 10) as u8, (y * 12) as u8, ((x ^ y) * 8) as u8]).unwrap())
            .collect()
    }

    #[test]
    fn smoke_epoch_is_finite() {
        let cfg = tiny_cfg();
        let model = Model::build(cfg.model_config().unwrap(), 0).unwrap();
        let mut seen = 0;
        let out = train(model, &images(), &[], &cfg, &mut |_, _, _| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 1);
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.step_losses.len(), 2);
        assert!(out.log[0].loss.is_finite() && out.log[0].val_psnr.is_finite());
    }

    #[test]
    fn scale_mismatch_is_rejected() {
        let cfg = tiny_cfg();
        let model = Model::build(ModelConfig::new(4, false).unwrap().with_scale(2).unwrap(), 0).unwrap();
        assert!(train(model, &images(), &[], &cfg, &mut |_, _, _| Ok(())).is_err());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let cfg = tiny_cfg();
        let model = Model::build(cfg.model_config().unwrap(), 0).unwrap();
        assert!(matches!(
            train(model, &[], &[], &cfg, &mut |_, _, _| Ok(())),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn log_line_format() {
        let e = EpochLog { epoch: 3, lr: 5e-4, loss: 0.125, val_psnr: 27.5 };
        assert_eq!(e.to_string(), "3 5.000000e-4 0.125000 27.5000");
    }
}
