//! Built-in configurations that regenerate the published figures.

use std::fmt;
use std::str::FromStr;

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Closed-form AR-input variance curves.
    Fig2,
    /// Model-order sweep.
    Fig5,
    /// Correlation sweep on the two-output example.
    Fig6,
    /// Total variance against the direction of the correlation.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn source(self) -> &'static str {
        match self {
            Figure::Fig2 => include_str!("../configs/fig2.toml"),
            Figure::Fig5 => include_str!("../configs/fig5.toml"),
            Figure::Fig6 => include_str!("../configs/fig6.toml"),
            Figure::Fig7 => include_str!("../configs/fig7.toml"),
        }
    }

    pub fn config(self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(self.source())
    }

    /// Whether the figure is closed form only (`analyze`) or simulated (`run`).
    pub fn is_closed_form(self) -> bool {
        self == Figure::Fig2
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Figure::Fig2 => "fig2",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        };
        f.write_str(s)
    }
}

impl FromStr for Figure {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.to_string() == s).ok_or_else(|| {
            ExperimentError::config(
                "figure",
                format!("unknown figure {s:?}; expected fig2, fig5, fig6 or fig7"),
            )
        })
    }
}
