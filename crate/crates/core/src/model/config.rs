use crate::error::{Error, Result};

/// Width of the reconstruction tail, fixed for every `core`.
pub const TAIL_WIDTH: usize = 64;
/// GIDBs in the global refinement chain.
pub const NUM_GIDB: usize = 6;
/// Attention blocks follow these GIDBs (1-based) when enabled.
pub const NLA_AFTER: [usize; 2] = [2, 4];

/// Shape-determining knobs of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Distill width; the trunk runs at `4 * core` channels.
    pub core: usize,
    pub use_nla: bool,
    pub scale: usize,
    /// Attention tile edge in pixels.
    pub nla_tile: usize,
    pub in_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            core: 16,
            use_nla: true,
            scale: 4,
            nla_tile: 16,
            in_channels: 3,
        }
    }
}

impl ModelConfig {
    pub fn new(core: usize, use_nla: bool) -> Result<Self> {
        let cfg = ModelConfig {
            core,
            use_nla,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scale(mut self, scale: usize) -> Result<Self> {
        self.scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tile(mut self, tile: usize) -> Result<Self> {
        self.nla_tile = tile;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.core == 0 || !self.core.is_multiple_of(4) {
            return Err(Error::InvalidCore(self.core));
        }
        if self.scale == 0 {
            return Err(Error::InvalidConfig("scale must be at least 1".into()));
        }
        if self.nla_tile == 0 {
            return Err(Error::InvalidConfig("nla_tile must be at least 1".into()));
        }
        if self.in_channels != 3 {
            return Err(Error::InvalidConfig(format!(
                "in_channels must be 3, got {}",
                self.in_channels
            )));
        }
        Ok(())
    }

    /// Trunk width `C`.
    pub fn trunk(&self) -> usize {
        4 * self.core
    }

    /// Distilled (retained) width `D`.
    pub fn distill(&self) -> usize {
        self.core
    }

    /// Coarse (forwarded) width `R`.
    pub fn coarse(&self) -> usize {
        3 * self.core
    }

    /// Width of the global concatenation feeding the tail.
    pub fn gprm_width(&self) -> usize {
        (NUM_GIDB - 1) * self.distill() + self.trunk()
    }

    /// The long residual is only defined when the trunk and tail widths agree.
    pub fn has_long_residual(&self) -> bool {
        self.trunk() == TAIL_WIDTH
    }
}
