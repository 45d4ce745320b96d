use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five 3GPP TDL models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TdlModel {
    #[serde(rename = "TDL-A")]
    A,
    #[serde(rename = "TDL-B")]
    B,
    #[serde(rename = "TDL-C")]
    C,
    #[serde(rename = "TDL-D")]
    D,
    #[serde(rename = "TDL-E")]
    E,
}

impl TdlModel {
    pub const ALL: [TdlModel; 5] = [TdlModel::A, TdlModel::B, TdlModel::C, TdlModel::D, TdlModel::E];

    /// LOS models carry a Rician first tap.
    pub fn is_los(self) -> bool {
        matches!(self, TdlModel::D | TdlModel::E)
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Result<Self> {
        Self::ALL
            .get(index as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown TDL model index {index}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            TdlModel::A => "TDL-A",
            TdlModel::B => "TDL-B",
            TdlModel::C => "TDL-C",
            TdlModel::D => "TDL-D",
            TdlModel::E => "TDL-E",
        }
    }
}

impl fmt::Display for TdlModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TdlModel {
    type Err = Error;

    /// Accepts `TDL-C`, `tdl_c`, `tdlc` or just `c`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let key = key.strip_prefix("tdl").unwrap_or(&key);
        match key {
            "a" => Ok(TdlModel::A),
            "b" => Ok(TdlModel::B),
            "c" => Ok(TdlModel::C),
            "d" => Ok(TdlModel::D),
            "e" => Ok(TdlModel::E),
            _ => Err(Error::invalid(format!("unknown TDL model {s:?}"))),
        }
    }
}

/// One tap of a profile. `power_db` is the total tap power after
/// normalization (specular plus diffuse for a Rician tap).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub normalized_delay: f64,
    pub power_db: f64,
    pub rician_k_db: Option<f64>,
}

impl Tap {
    pub fn linear_power(&self) -> f64 {
        db_to_linear(self.power_db)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdlProfile {
    model: TdlModel,
    taps: Vec<Tap>,
}

impl TdlProfile {
    /// Builds a profile from raw taps, checking the structural invariants and
    /// renormalizing powers to unit total linear power.
    pub fn new(model: TdlModel, mut taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("profile has no taps"));
        }
        if taps[0].normalized_delay != 0.0 {
            return Err(Error::invalid("first tap delay must be 0"));
        }
        for pair in taps.windows(2) {
            if !(pair[1].normalized_delay >= pair[0].normalized_delay) {
                return Err(Error::invalid("tap delays must be sorted non-decreasing"));
            }
        }
        for (i, tap) in taps.iter().enumerate() {
            if !tap.power_db.is_finite() || !tap.normalized_delay.is_finite() {
                return Err(Error::invalid(format!("tap {i} is not finite")));
            }
            match (i, tap.rician_k_db) {
                (0, Some(k)) if !model.is_los() => {
                    return Err(Error::invalid(format!("{model} is NLOS but tap 0 has K = {k} dB")))
                }
                (0, None) if model.is_los() => {
                    return Err(Error::invalid(format!("{model} requires a Rician K on tap 0")))
                }
                (0, Some(k)) if k.is_nan() => return Err(Error::invalid("K-factor is NaN")),
                (i, Some(_)) if i > 0 => {
                    return Err(Error::invalid(format!("only tap 0 may carry a K-factor (tap {i})")))
                }
                _ => {}
            }
        }

        let total: f64 = taps.iter().map(Tap::linear_power).sum();
        for tap in &mut taps {
            tap.power_db = 10.0 * (tap.linear_power() / total).log10();
        }
        Ok(Self { model, taps })
    }

    pub fn model(&self) -> TdlModel {
        self.model
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.taps.iter().map(Tap::linear_power).collect()
    }

    /// Absolute tap delays in seconds for a given delay spread.
    pub fn delays_s(&self, delay_spread_s: f64) -> Vec<f64> {
        self.taps.iter().map(|t| t.normalized_delay * delay_spread_s).collect()
    }

    /// Linear K-factor of the first tap, if the profile is LOS.
    pub fn rician_k(&self) -> Option<f64> {
        self.taps[0].rician_k_db.map(db_to_linear)
    }
}

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Embedded PDP tables.
pub fn pdp_source(model: TdlModel) -> &'static str {
    match model {
        TdlModel::A => include_str!("../../data/tdl_a.txt"),
        TdlModel::B => include_str!("../../data/tdl_b.txt"),
        TdlModel::C => include_str!("../../data/tdl_c.txt"),
        TdlModel::D => include_str!("../../data/tdl_d.txt"),
        TdlModel::E => include_str!("../../data/tdl_e.txt"),
    }
}

pub fn load_profile(model: TdlModel) -> Result<TdlProfile> {
    parse_pdp(model, pdp_source(model))
}

/// Parses a PDP table: one tap per line, `normalized_delay power_db [k_db]`,
/// `#` starts a comment. On a row with `k_db`, `power_db` is the specular
/// component and the tap's total power is `P_los * (1 + 1/K)`.
pub fn parse_pdp(model: TdlModel, text: &str) -> Result<TdlProfile> {
    let mut taps = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::invalid(format!(
                "PDP line {}: expected 2 or 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::invalid(format!("PDP line {}: {s:?}: {e}", lineno + 1)))
        };
        let normalized_delay = num(fields[0])?;
        let mut power_db = num(fields[1])?;
        let rician_k_db = fields.get(2).map(|s| num(s)).transpose()?;
        if let Some(k_db) = rician_k_db {
            let k = db_to_linear(k_db);
            power_db += 10.0 * (1.0 + 1.0 / k).log10();
        }
        if normalized_delay < 0.0 {
            return Err(Error::invalid(format!("PDP line {}: negative delay", lineno + 1)));
        }
        taps.push(Tap {
            normalized_delay,
            power_db,
            rician_k_db,
        });
    }
    TdlProfile::new(model, taps)
}
