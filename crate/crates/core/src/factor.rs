use std::fmt;
use std::str::FromStr;

/// The nine hypothesized plot-scoring factors, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    Dist,
    Dry,
    Qual,
    Yield,
    Water,
    Soc,
    HAge,
    HAgri,
    Mig,
}

pub const FACTOR_COUNT: usize = 9;

impl Factor {
    pub const ALL: [Factor; FACTOR_COUNT] = [
        Factor::Dist,
        Factor::Dry,
        Factor::Qual,
        Factor::Yield,
        Factor::Water,
        Factor::Soc,
        Factor::HAge,
        Factor::HAgri,
        Factor::Mig,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Factor> {
        Factor::ALL.get(i).copied()
    }

    /// Name used in rule text and CSV headers, e.g. `F_Qual`.
    pub fn name(self) -> &'static str {
        match self {
            Factor::Dist => "F_Dist",
            Factor::Dry => "F_Dry",
            Factor::Qual => "F_Qual",
            Factor::Yield => "F_Yield",
            Factor::Water => "F_Water",
            Factor::Soc => "F_Soc",
            Factor::HAge => "F_HAge",
            Factor::HAgri => "F_HAgri",
            Factor::Mig => "F_Mig",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Factor::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown factor `{s}`"))
    }
}

/// Which households inform a decision, and therefore which plots it may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SocialConfig {
    /// Every available plot in the valley.
    All,
    /// Plots near the farms of parent, siblings and surviving grandparents.
    Fam,
    /// Plots near the farms of households within a fixed radius.
    Neigh,
    /// Plots near the farms of the best-performing households.
    Perf,
}

impl SocialConfig {
    pub const ALL: [SocialConfig; 4] = [
        SocialConfig::All,
        SocialConfig::Fam,
        SocialConfig::Neigh,
        SocialConfig::Perf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SocialConfig::All => "S_All",
            SocialConfig::Fam => "S_Fam",
            SocialConfig::Neigh => "S_Neigh",
            SocialConfig::Perf => "S_Perf",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SocialConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SocialConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SocialConfig::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown social configuration `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in Factor::ALL {
            assert_eq!(f.name().parse::<Factor>().unwrap(), f);
            assert_eq!(Factor::from_index(f.index()), Some(f));
        }
        for s in SocialConfig::ALL {
            assert_eq!(s.name().parse::<SocialConfig>().unwrap(), s);
        }
        assert!("F_Age".parse::<Factor>().is_err());
    }
}
