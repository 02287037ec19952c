//! Typical-rank verdicts per format from the decidable criteria.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{domain, Result};
use crate::polyfactor::alpha_closed;
use crate::tensor::Format;

/// Largest `m_max`/`n_max` accepted by [`theorem_table`].
pub const TABLE_LIMIT: usize = 64;

/// True iff `x` and `y` share no set bit.
pub fn bit_disjoint(x: u64, y: u64) -> Result<bool> {
    if x == 0 || y == 0 {
        return domain("bit_disjoint needs positive integers");
    }
    Ok(x & y == 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TypicalRanks {
    Single { p: usize },
    Plural { p: usize, p_plus_1: usize },
    Unknown,
}

impl TypicalRanks {
    pub fn name(&self) -> &'static str {
        match self {
            TypicalRanks::Single { .. } => "SINGLE",
            TypicalRanks::Plural { .. } => "PLURAL",
            TypicalRanks::Unknown => "UNKNOWN",
        }
    }

    pub fn is_plural(&self) -> bool {
        matches!(self, TypicalRanks::Plural { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Tall,
    BitDisjointFail,
    AlphaLtP,
    OutOfScopeMidrange,
}

impl Reason {
    pub fn name(&self) -> &'static str {
        match self {
            Reason::Tall => "TALL",
            Reason::BitDisjointFail => "BIT_DISJOINT_FAIL",
            Reason::AlphaLtP => "ALPHA_LT_P",
            Reason::OutOfScopeMidrange => "OUT_OF_SCOPE_MIDRANGE",
        }
    }
}

/// Integers that fit in `u64` are written as JSON numbers, larger ones as strings.
fn ser_big<S: Serializer>(value: &Option<BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match value {
        None => s.serialize_none(),
        Some(v) => match v.to_u64() {
            Some(x) => s.serialize_u64(x),
            None => s.serialize_str(&v.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub trank: TypicalRanks,
    pub reasons: Vec<Reason>,
    pub grank: usize,
    /// Evaluated only at the critical `p`.
    #[serde(serialize_with = "ser_big")]
    pub alpha: Option<BigUint>,
    /// `bit_disjoint(m-1, n-1)`.
    pub bit_disjoint: bool,
}

impl Verdict {
    pub fn alpha_lt_p(&self) -> bool {
        self.reasons.contains(&Reason::AlphaLtP)
    }
}

pub fn classify(m: usize, n: usize, p: usize) -> Result<Verdict> {
    let fmt = Format::general(m, n, p)?;
    let bd = bit_disjoint((m - 1) as u64, (n - 1) as u64)?;
    let mut reasons = Vec::new();
    let mut alpha = None;
    let trank = if p > (m - 1) * n {
        reasons.push(Reason::Tall);
        TypicalRanks::Single { p }
    } else if fmt.is_critical() {
        let a = alpha_closed(m, n)?;
        if !bd {
            reasons.push(Reason::BitDisjointFail);
        }
        if a < BigUint::from(p) {
            reasons.push(Reason::AlphaLtP);
        }
        alpha = Some(a);
        if reasons.is_empty() {
            TypicalRanks::Unknown
        } else {
            TypicalRanks::Plural { p, p_plus_1: p + 1 }
        }
    } else {
        reasons.push(Reason::OutOfScopeMidrange);
        TypicalRanks::Unknown
    };
    Ok(Verdict {
        m,
        n,
        p,
        trank,
        reasons,
        grank: p,
        alpha,
        bit_disjoint: bd,
    })
}

/// Verdicts at the critical `p` for all `3 <= m <= n` with `m <= m_max`, `n <= n_max`.
pub fn theorem_table(m_max: usize, n_max: usize) -> Result<Vec<Verdict>> {
    if m_max > TABLE_LIMIT || n_max > TABLE_LIMIT {
        return domain(format!("table bounds must be at most {TABLE_LIMIT}"));
    }
    let pairs: Vec<(usize, usize)> = (3..=m_max)
        .flat_map(|m| (m..=n_max).map(move |n| (m, n)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(m, n)| classify(m, n, (m - 1) * (n - 1) + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crit(m: usize, n: usize) -> Verdict {
        classify(m, n, (m - 1) * (n - 1) + 1).unwrap()
    }

    #[test]
    fn bit_disjoint_examples() {
        assert!(bit_disjoint(2, 4).unwrap());
        assert!(!bit_disjoint(3, 3).unwrap());
        assert!(bit_disjoint(4, 26).unwrap());
        assert!(bit_disjoint(0, 1).is_err());
    }

    #[test]
    fn classify_examples() {
        let v = crit(3, 5);
        assert!(v.trank.is_plural());
        assert_eq!(v.reasons, vec![Reason::AlphaLtP]);
        assert!(v.bit_disjoint);
        assert_eq!(v.alpha, Some(BigUint::from(3u32)));

        let v = crit(4, 4);
        assert_eq!(v.reasons, vec![Reason::BitDisjointFail, Reason::AlphaLtP]);
        assert_eq!(v.alpha, Some(BigUint::from(0u32)));

        let v = crit(5, 27);
        assert_eq!(v.trank, TypicalRanks::Unknown);
        assert!(v.reasons.is_empty());
        assert_eq!(v.alpha, Some(BigUint::from(105u32)));

        let v = classify(3, 3, 8).unwrap();
        assert_eq!(v.trank, TypicalRanks::Single { p: 8 });
        assert_eq!(v.reasons, vec![Reason::Tall]);

        let v = crit(7, 16);
        assert_eq!(v.reasons, vec![Reason::BitDisjointFail]);
        let v = crit(9, 10);
        assert!(v.reasons.contains(&Reason::AlphaLtP));
    }

    #[test]
    fn midrange_and_domain() {
        let v = classify(3, 4, 8).unwrap();
        assert_eq!(v.trank, TypicalRanks::Unknown);
        assert_eq!(v.reasons, vec![Reason::OutOfScopeMidrange]);
        assert_eq!(v.grank, 8);
        assert!(classify(3, 3, 4).is_err());
        assert!(classify(3, 3, 10).is_err());
        assert!(classify(2, 3, 3).is_err());
        assert!(classify(4, 3, 7).is_err());
    }

    #[test]
    fn critical_p_is_never_single() {
        for v in theorem_table(12, 40).unwrap() {
            assert!(!matches!(v.trank, TypicalRanks::Single { .. }));
            assert_eq!(v.grank, v.p);
            assert_eq!(v.trank.is_plural(), !v.reasons.is_empty());
        }
    }

    #[test]
    fn table_bounds() {
        assert!(theorem_table(65, 10).is_err());
        assert_eq!(theorem_table(3, 5).unwrap().len(), 3);
        let json = serde_json::to_string(&crit(5, 27)).unwrap();
        assert!(json.contains("\"alpha\":105"), "{json}");
    }
}
