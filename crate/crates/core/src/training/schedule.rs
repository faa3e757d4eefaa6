use crate::error::{Error, Result};

/// Trapezoidal learning rate: linear warm-up, a flat plateau, a linear
/// decay to `floor_lr`, then `floor_lr` for any later epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KneeSchedule {
    pub warmup_epochs: usize,
    pub exploit_epochs: usize,
    pub cooldown_epochs: usize,
    pub max_lr: f64,
    pub floor_lr: f64,
}

impl Default for KneeSchedule {
    fn default() -> Self {
        KneeSchedule {
            warmup_epochs: 10,
            exploit_epochs: 400,
            cooldown_epochs: 400,
            max_lr: 5e-4,
            floor_lr: 1e-6,
        }
    }
}

impl KneeSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor_lr >= 0.0 && self.max_lr > self.floor_lr && self.max_lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "schedule needs 0 <= floor_lr < max_lr (got {} and {})",
                self.floor_lr, self.max_lr
            )));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.warmup_epochs + self.exploit_epochs + self.cooldown_epochs
    }

    /// Learning rate for the 0-based `epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        let knee = self.warmup_epochs + self.exploit_epochs;
        if epoch < self.warmup_epochs {
            self.max_lr * (epoch + 1) as f64 / self.warmup_epochs as f64
        } else if epoch < knee {
            self.max_lr
        } else if epoch < knee + self.cooldown_epochs {
            let frac = (epoch - knee) as f64 / self.cooldown_epochs as f64;
            self.max_lr + (self.floor_lr - self.max_lr) * frac
        } else {
            self.floor_lr
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        let s = KneeSchedule::default();
        assert!((s.lr(0) - 5e-5).abs() < 1e-15);
        assert_eq!(s.lr(9), 5e-4);
        assert_eq!(s.lr(200), 5e-4);
        assert_eq!(s.lr(410), 5e-4);
        assert!((s.lr(610) - 2.5e-4).abs() < 1e-6);
        assert_eq!(s.lr(810), 1e-6);
        assert_eq!(s.lr(1999), 1e-6);
    }

    #[test]
    fn bounded_and_stepwise_continuous() {
        let s = KneeSchedule::default();
        let warm = s.max_lr / s.warmup_epochs as f64;
        let cool = (s.max_lr - s.floor_lr) / s.cooldown_epochs as f64;
        let step = warm.max(cool) + 1e-12;
        for e in 0..1000 {
            assert!(s.lr(e) <= s.max_lr);
            assert!((s.lr(e + 1) - s.lr(e)).abs() <= step, "epoch {e}");
        }
    }

    #[test]
    fn degenerate_phases() {
        let s = KneeSchedule {
            warmup_epochs: 0,
            exploit_epochs: 0,
            cooldown_epochs: 0,
            ..KneeSchedule::default()
        };
        assert_eq!(s.lr(0), s.floor_lr);
        assert!(KneeSchedule { max_lr: 1e-6, ..s }.validate().is_err());
    }
}
