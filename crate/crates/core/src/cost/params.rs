use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Signed;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

/// Cost parameters, declared in canonical (name) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    ConnSet,
    MaDepl,
    MaImpl,
    MePrimeDepl,
    MePrimeImpl,
    MeDepl,
    MeImpl,
    WDepl,
}

impl Term {
    pub const ALL: [Term; 8] = [
        Term::ConnSet,
        Term::MaDepl,
        Term::MaImpl,
        Term::MePrimeDepl,
        Term::MePrimeImpl,
        Term::MeDepl,
        Term::MeImpl,
        Term::WDepl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Term::ConnSet => "C_Conn_set",
            Term::MaDepl => "C_Ma_depl",
            Term::MaImpl => "C_Ma_impl",
            Term::MePrimeDepl => "C_MePrime_depl",
            Term::MePrimeImpl => "C_MePrime_impl",
            Term::MeDepl => "C_Me_depl",
            Term::MeImpl => "C_Me_impl",
            Term::WDepl => "C_W_depl",
        }
    }

    pub fn from_name(name: &str) -> Option<Term> {
        Term::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact, non-negative cost units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParams {
    #[serde(rename = "C_Me_impl", with = "rational")]
    pub me_impl: Rational64,
    #[serde(rename = "C_MePrime_impl", with = "rational")]
    pub me_prime_impl: Rational64,
    #[serde(rename = "C_Ma_impl", with = "rational")]
    pub ma_impl: Rational64,
    #[serde(rename = "C_Me_depl", with = "rational")]
    pub me_depl: Rational64,
    #[serde(rename = "C_MePrime_depl", with = "rational")]
    pub me_prime_depl: Rational64,
    #[serde(rename = "C_Ma_depl", with = "rational")]
    pub ma_depl: Rational64,
    #[serde(rename = "C_W_depl", with = "rational")]
    pub w_depl: Rational64,
    #[serde(rename = "C_Conn_set", with = "rational")]
    pub conn_set: Rational64,
}

impl CostParams {
    /// Field order: Me, Me', Ma implementation; Me, Me', Ma, W deployment;
    /// connection setup.
    pub fn from_integers(v: [i64; 8]) -> Self {
        let r = Rational64::from_integer;
        CostParams {
            me_impl: r(v[0]),
            me_prime_impl: r(v[1]),
            ma_impl: r(v[2]),
            me_depl: r(v[3]),
            me_prime_depl: r(v[4]),
            ma_depl: r(v[5]),
            w_depl: r(v[6]),
            conn_set: r(v[7]),
        }
    }

    /// Arbitrary valid binding used when none is given. Not measured data.
    pub fn sample() -> Self {
        CostParams::from_integers([10, 6, 5, 8, 5, 4, 3, 1])
    }

    pub fn get(&self, term: Term) -> Rational64 {
        match term {
            Term::ConnSet => self.conn_set,
            Term::MaDepl => self.ma_depl,
            Term::MaImpl => self.ma_impl,
            Term::MePrimeDepl => self.me_prime_depl,
            Term::MePrimeImpl => self.me_prime_impl,
            Term::MeDepl => self.me_depl,
            Term::MeImpl => self.me_impl,
            Term::WDepl => self.w_depl,
        }
    }

    pub fn zero() -> Self {
        CostParams::from_integers([0; 8])
    }

    pub fn set(&mut self, term: Term, value: Rational64) {
        let slot = match term {
            Term::ConnSet => &mut self.conn_set,
            Term::MaDepl => &mut self.ma_depl,
            Term::MaImpl => &mut self.ma_impl,
            Term::MePrimeDepl => &mut self.me_prime_depl,
            Term::MePrimeImpl => &mut self.me_prime_impl,
            Term::MeDepl => &mut self.me_depl,
            Term::MeImpl => &mut self.me_impl,
            Term::WDepl => &mut self.w_depl,
        };
        *slot = value;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamViolation {
    /// One of the [`rule`] tags.
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.detail)
    }
}

/// Tags of the inequalities a binding must satisfy.
pub mod rule {
    pub const NON_NEGATIVE: &str = "non-negative";
    /// A representing mediator costs more to implement than a plain one.
    pub const MEDIATOR_IMPL: &str = "me-impl-over-me-prime";
    pub const MEDIATOR_DEPL: &str = "me-depl-over-me-prime";
    /// A mask is cheaper than a representing mediator.
    pub const MASK_IMPL: &str = "me-impl-over-ma";
    pub const MASK_DEPL: &str = "me-depl-over-ma";
}

pub fn validate_params(p: &CostParams) -> Vec<ParamViolation> {
    let mut out = Vec::new();
    for t in Term::ALL {
        if p.get(t).is_negative() {
            out.push(ParamViolation {
                rule: rule::NON_NEGATIVE,
                detail: format!("{t} = {} is negative", p.get(t)),
            });
        }
    }
    let strict = [
        (rule::MEDIATOR_IMPL, Term::MeImpl, Term::MePrimeImpl),
        (rule::MEDIATOR_DEPL, Term::MeDepl, Term::MePrimeDepl),
        (rule::MASK_DEPL, Term::MeDepl, Term::MaDepl),
        (rule::MASK_IMPL, Term::MeImpl, Term::MaImpl),
    ];
    for (rule, greater, lesser) in strict {
        if p.get(greater) <= p.get(lesser) {
            out.push(ParamViolation {
                rule,
                detail: format!("{greater} > {lesser} fails ({} vs {})", p.get(greater), p.get(lesser)),
            });
        }
    }
    out
}

/// `3`, `"3/2"`, `"2.5"` or `2.5` (read through its shortest decimal form).
pub fn parse_rational(text: &str) -> Option<Rational64> {
    let text = text.trim();
    if let Ok(r) = Rational64::from_str(text) {
        return Some(r);
    }
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, frac) = digits.split_once('.')?;
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let numer: i64 = format!("{whole}{frac}").parse().ok()?;
    let r = Rational64::new(numer, denom);
    Some(if negative { -r } else { r })
}

pub fn format_rational(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

mod rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_integer() {
            s.serialize_i64(*r.numer())
        } else {
            s.serialize_str(&format_rational(r))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match &v {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => return Err(de::Error::custom(format!("expected a number, found {other}"))),
        };
        parse_rational(&text).ok_or_else(|| de::Error::custom(format!("`{text}` is not an exact number")))
    }
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams::sample()
    }
}
