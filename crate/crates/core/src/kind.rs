use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The dimension along which a counterfactual perturbs a statement.
///
/// Variant order is significant: probe generation cycles kinds in this order
/// and mitigation breaks ties with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Factual,
    Temporal,
    Quantitative,
    Logical,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] = [
        ProbeKind::Factual,
        ProbeKind::Temporal,
        ProbeKind::Quantitative,
        ProbeKind::Logical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Factual => "factual",
            ProbeKind::Temporal => "temporal",
            ProbeKind::Quantitative => "quantitative",
            ProbeKind::Logical => "logical",
        }
    }

    /// Title-case label used in tabular reports.
    pub fn label(self) -> &'static str {
        match self {
            ProbeKind::Factual => "Factual",
            ProbeKind::Temporal => "Temporal",
            ProbeKind::Quantitative => "Quantitative",
            ProbeKind::Logical => "Logical",
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown probe kind `{0}` (expected factual, temporal, quantitative or logical)")]
pub struct UnknownProbeKind(pub String);

impl FromStr for ProbeKind {
    type Err = UnknownProbeKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "factual" => Ok(ProbeKind::Factual),
            "temporal" => Ok(ProbeKind::Temporal),
            "quantitative" => Ok(ProbeKind::Quantitative),
            "logical" => Ok(ProbeKind::Logical),
            _ => Err(UnknownProbeKind(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serializes_lowercase() {
        let json = serde_json::to_string(&ProbeKind::ALL).unwrap();
        assert_eq!(json, r#"["factual","temporal","quantitative","logical"]"#);
        let back: Vec<ProbeKind> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ProbeKind::ALL);
    }

    #[test]
    fn enum_order_matches_cycle_order() {
        let mut kinds = vec![ProbeKind::Logical, ProbeKind::Factual, ProbeKind::Quantitative, ProbeKind::Temporal];
        kinds.sort();
        assert_eq!(kinds, ProbeKind::ALL);
    }

    #[test]
    fn parses_names() {
        assert_eq!("Temporal".parse::<ProbeKind>().unwrap(), ProbeKind::Temporal);
        assert!("spatial".parse::<ProbeKind>().is_err());
    }
}
