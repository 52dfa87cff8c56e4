//! Pulse sequences as explicit event timelines.
//!
//! Gradients are carried as k-space displacement (cycles per FOV) rather than
//! physical amplitude; the engine only needs the accumulated phase.

mod builders;
mod moments;
mod timeline;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builders::{
    build_fse, build_gre_epi, build_moled, build_sequence, moled_quadrant_offsets, BuildOptions,
    EPI_PREPHASE_MS,
};
pub use moments::{echo_centers, EchoCenter};
pub use timeline::{AcquireLine, Event, EventTimeline, TimedEvent};
pub use validate::{validate_timeline, validate_timelines, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SequenceKind {
    #[serde(rename = "fse")]
    Fse,
    #[serde(rename = "gre-epi")]
    GreEpi,
    #[serde(rename = "moled")]
    Moled,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 3] = [Self::Fse, Self::GreEpi, Self::Moled];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fse => "fse",
            Self::GreEpi => "gre-epi",
            Self::Moled => "moled",
        }
    }

    /// Parameter names meaningful for this sequence.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Self::Fse => &["esp", "fa", "refa", "etl", "shots"],
            Self::GreEpi => &["te", "esp", "fa", "sg"],
            Self::Moled => &["esp", "fa", "refa", "sg", "spacing"],
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fse" => Ok(Self::Fse),
            "epi" | "gre-epi" | "gre_epi" => Ok(Self::GreEpi),
            "moled" => Ok(Self::Moled),
            _ => Err(Error::InvalidArgument(format!("unknown sequence `{s}`"))),
        }
    }
}

/// Imaging parameters. Fields that do not apply to `kind` are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub kind: SequenceKind,
    pub te_ms: Option<f64>,
    pub esp_ms: f64,
    pub etl: Option<usize>,
    pub fa_deg: f64,
    pub refa_deg: Option<f64>,
    pub sg_scale: Option<f64>,
    pub shots: Option<usize>,
    /// MOLED only: time between consecutive excitations (default `ESP·n/2`).
    pub excitation_spacing_ms: Option<f64>,
}

pub const FSE_ETL: usize = 16;
pub const FSE_SHOTS: usize = 8;

impl SequenceParams {
    /// FSE with ETL 16 and 180° refocusing; `shots` defaults to 8 (128 lines).
    pub fn fse(esp_ms: f64, fa_deg: f64) -> Self {
        Self {
            kind: SequenceKind::Fse,
            te_ms: None,
            esp_ms,
            etl: Some(FSE_ETL),
            fa_deg,
            refa_deg: Some(180.0),
            sg_scale: None,
            shots: Some(FSE_SHOTS),
            excitation_spacing_ms: None,
        }
    }

    pub fn gre_epi(te_ms: f64, esp_ms: f64, sg_scale: f64) -> Self {
        Self {
            kind: SequenceKind::GreEpi,
            te_ms: Some(te_ms),
            esp_ms,
            etl: None,
            fa_deg: 90.0,
            refa_deg: None,
            sg_scale: Some(sg_scale),
            shots: None,
            excitation_spacing_ms: None,
        }
    }

    pub fn moled(esp_ms: f64, sg_scale: f64) -> Self {
        Self {
            kind: SequenceKind::Moled,
            te_ms: None,
            esp_ms,
            etl: None,
            fa_deg: 30.0,
            refa_deg: Some(180.0),
            sg_scale: Some(sg_scale),
            shots: None,
            excitation_spacing_ms: None,
        }
    }

    /// Mid-range defaults for each sequence.
    pub fn default_for(kind: SequenceKind) -> Self {
        match kind {
            SequenceKind::Fse => Self::fse(11.5, 45.0),
            SequenceKind::GreEpi => Self::gre_epi(60.0, 0.4625, 1.0),
            SequenceKind::Moled => Self::moled(0.4575, 1.0),
        }
    }

    /// FSE shot count that covers `matrix_n` lines with the current ETL.
    pub fn with_shots_for(mut self, matrix_n: usize) -> Self {
        if let Some(etl) = self.etl {
            self.shots = Some((matrix_n / etl).max(1));
        }
        self
    }

    /// Sets a parameter by its short name (`te`, `esp`, `fa`, `refa`, `sg`,
    /// `etl`, `shots`, `spacing`).
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !self.kind.parameter_names().contains(&name) {
            return Err(if ["te", "esp", "fa", "refa", "sg", "etl", "shots", "spacing"].contains(&name) {
                Error::ParameterNotApplicable(name.to_string())
            } else {
                Error::InvalidArgument(format!("unknown parameter `{name}`"))
            });
        }
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("`{name}` must be a positive integer, got {v}")))
            }
        };
        match name {
            "te" => self.te_ms = Some(value),
            "esp" => self.esp_ms = value,
            "fa" => self.fa_deg = value,
            "refa" => self.refa_deg = Some(value),
            "sg" => self.sg_scale = Some(value),
            "etl" => self.etl = Some(as_count(value)?),
            "shots" => self.shots = Some(as_count(value)?),
            "spacing" => self.excitation_spacing_ms = Some(value),
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Checks the empirical ranges used for training data.
    pub fn check_ranges(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if v.is_finite() && (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::ParameterOutOfRange { name: name.to_string(), value: v, lo, hi })
            }
        };
        match self.kind {
            SequenceKind::Fse => {
                check("esp", self.esp_ms, 8.0, 15.0)?;
                check("fa", self.fa_deg, 20.0, 70.0)?;
                check("refa", self.refa_deg.unwrap_or(f64::NAN), 180.0, 180.0)?;
                check("etl", self.etl.unwrap_or(0) as f64, FSE_ETL as f64, FSE_ETL as f64)?;
            }
            SequenceKind::GreEpi => {
                check("te", self.te_ms.unwrap_or(f64::NAN), 40.0, 80.0)?;
                check("esp", self.esp_ms, 0.375, 0.55)?;
                check("fa", self.fa_deg, 90.0, 90.0)?;
                check("sg", self.sg_scale.unwrap_or(f64::NAN), 0.95, 1.05)?;
            }
            SequenceKind::Moled => {
                check("esp", self.esp_ms, 0.375, 0.54)?;
                check("fa", self.fa_deg, 30.0, 30.0)?;
                check("refa", self.refa_deg.unwrap_or(f64::NAN), 180.0, 180.0)?;
                check("sg", self.sg_scale.unwrap_or(f64::NAN), 0.95, 1.05)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_ranges() {
        assert!(SequenceParams::fse(11.5, 45.0).check_ranges().is_ok());
        assert!(SequenceParams::fse(11.5, 90.0).check_ranges().is_err());
        assert!(SequenceParams::fse(16.0, 45.0).check_ranges().is_err());
        assert!(SequenceParams::gre_epi(60.0, 0.5, 1.0).check_ranges().is_ok());
        assert!(SequenceParams::gre_epi(30.0, 0.5, 1.0).check_ranges().is_err());
        assert!(SequenceParams::gre_epi(60.0, 0.5, 1.06).check_ranges().is_err());
        assert!(SequenceParams::moled(0.54, 0.95).check_ranges().is_ok());
        assert!(SequenceParams::moled(0.55, 1.0).check_ranges().is_err());
        for k in SequenceKind::ALL {
            SequenceParams::default_for(k).check_ranges().unwrap();
        }
    }

    #[test]
    fn set_rejects_inapplicable_parameters() {
        let mut p = SequenceParams::fse(10.0, 45.0);
        assert!(matches!(p.set("te", 50.0), Err(Error::ParameterNotApplicable(n)) if n == "te"));
        assert!(matches!(p.set("bogus", 1.0), Err(Error::InvalidArgument(_))));
        p.set("esp", 12.0).unwrap();
        assert_eq!(p.esp_ms, 12.0);
        assert!(p.set("etl", 2.5).is_err());
        let mut e = SequenceParams::gre_epi(50.0, 0.5, 1.0);
        assert!(e.set("refa", 180.0).is_err());
        e.set("te", 70.0).unwrap();
        assert_eq!(e.te_ms, Some(70.0));
    }

    #[test]
    fn kind_names() {
        assert_eq!("epi".parse::<SequenceKind>().unwrap(), SequenceKind::GreEpi);
        assert_eq!("moled".parse::<SequenceKind>().unwrap(), SequenceKind::Moled);
        assert!("gre".parse::<SequenceKind>().is_err());
    }
}
