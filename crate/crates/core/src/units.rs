use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

/// Reporting unit for information quantities. Everything is computed in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            Units::Nats => x,
            Units::Bits => x / LN_2,
        }
    }

    pub fn to_nats(self, x: f64) -> f64 {
        match self {
            Units::Nats => x,
            Units::Bits => x * LN_2,
        }
    }
}

impl FromStr for Units {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            other => Err(format!("unknown units '{other}'")),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        })
    }
}
