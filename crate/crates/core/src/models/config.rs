use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqnn::UpsampleMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    TcnAe,
    LstmAe,
    FfAe,
    TcnBc,
    LstmBc,
    FfBc,
}

impl Arch {
    pub const ALL: [Arch; 6] = [
        Arch::TcnAe,
        Arch::LstmAe,
        Arch::FfAe,
        Arch::TcnBc,
        Arch::LstmBc,
        Arch::FfBc,
    ];

    pub fn is_autoencoder(self) -> bool {
        matches!(self, Arch::TcnAe | Arch::LstmAe | Arch::FfAe)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::TcnAe => "tcn_ae",
            Arch::LstmAe => "lstm_ae",
            Arch::FfAe => "ff_ae",
            Arch::TcnBc => "tcn_bc",
            Arch::LstmBc => "lstm_bc",
            Arch::FfBc => "ff_bc",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Arch::TcnAe => 1,
            Arch::LstmAe => 2,
            Arch::FfAe => 3,
            Arch::TcnBc => 4,
            Arch::LstmBc => 5,
            Arch::FfBc => 6,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Arch> {
        Arch::ALL.into_iter().find(|a| a.code() == code)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture '{s}'")))
    }
}

/// Architecture hyperparameters.
///
/// TCN fields (`levels`, `kernel`, `dropout`, `pool`) are ignored by the
/// LSTM and feedforward models; `bottleneck` is ignored by the TCN models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Feature dimension.
    pub n: usize,
    /// Sequence length in time steps.
    pub t: usize,
    pub levels: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub dropout: f64,
    pub pool: usize,
    pub bottleneck: usize,
    #[serde(default)]
    pub upsample: UpsampleMode,
    /// Feedforward models only: apply the dense stack to each frame instead
    /// of the flattened `T·n` sequence.
    #[serde(default)]
    pub per_frame: bool,
}

impl ModelConfig {
    /// Full-size defaults for frame-level sequences:
    /// 8 levels, 24 hidden units, kernel 8, dropout 0.05, pool 4, and
    /// 128/64 hidden/bottleneck units for the LSTM and feedforward models.
    pub fn full(arch: Arch, n: usize, t: usize) -> Self {
        let (hidden, bottleneck) = match arch {
            Arch::TcnAe | Arch::TcnBc => (24, 64),
            _ => (128, 64),
        };
        ModelConfig {
            arch,
            n,
            t,
            levels: 8,
            hidden,
            kernel: 8,
            dropout: 0.05,
            pool: 4,
            bottleneck,
            upsample: UpsampleMode::Nearest,
            per_frame: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("t", self.t),
            ("levels", self.levels),
            ("hidden", self.hidden),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("bottleneck", self.bottleneck),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.arch == Arch::TcnAe && self.t % self.pool != 0 {
            return Err(Error::Config(format!(
                "sequence length {} not divisible by pool factor {}",
                self.t, self.pool
            )));
        }
        if self.levels > 30 {
            return Err(Error::Config(format!("{} levels is too deep", self.levels)));
        }
        Ok(())
    }
}

/// Number of past frames that influence one TCN output: two convolutions per
/// level with dilation doubling each level gives `1 + 2(k-1)(2^L - 1)`.
pub fn receptive_field(levels: usize, kernel: usize) -> u64 {
    1 + 2 * (kernel as u64 - 1) * ((1u64 << levels) - 1)
}
