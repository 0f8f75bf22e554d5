use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six scalar diffusion metrics carried through the group analysis.
///
/// The declaration order is the column order of the cohort CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Fww,
    StickAd,
    Ad,
    Fa,
    Md,
    Rd,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Fww,
        Metric::StickAd,
        Metric::Ad,
        Metric::Fa,
        Metric::Md,
        Metric::Rd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Lower-case column / file stem name.
    pub fn column(self) -> &'static str {
        match self {
            Metric::Fww => "fww",
            Metric::StickAd => "stick_ad",
            Metric::Ad => "ad",
            Metric::Fa => "fa",
            Metric::Md => "md",
            Metric::Rd => "rd",
        }
    }

    /// Display label, e.g. `Stick-AD`.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Fww => "FWW",
            Metric::StickAd => "Stick-AD",
            Metric::Ad => "AD",
            Metric::Fa => "FA",
            Metric::Md => "MD",
            Metric::Rd => "RD",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}` (expected one of FWW, STICK_AD, AD, FA, MD, RD)")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fww" => Ok(Metric::Fww),
            "stickad" => Ok(Metric::StickAd),
            "ad" => Ok(Metric::Ad),
            "fa" => Ok(Metric::Fa),
            "md" => Ok(Metric::Md),
            "rd" => Ok(Metric::Rd),
            _ => Err(UnknownMetric(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_spellings() {
        assert_eq!("STICK_AD".parse::<Metric>().unwrap(), Metric::StickAd);
        assert_eq!("Stick-AD".parse::<Metric>().unwrap(), Metric::StickAd);
        assert_eq!(" fww ".parse::<Metric>().unwrap(), Metric::Fww);
        assert!("kurtosis".parse::<Metric>().is_err());
        for m in Metric::ALL {
            assert_eq!(m.column().parse::<Metric>().unwrap(), m);
            assert_eq!(Metric::ALL[m.index()], m);
        }
    }
}
