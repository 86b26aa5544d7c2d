use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use num_rational::Rational64;
use num_traits::Zero;
use serde::{Serialize, Serializer};

use super::params::{CostParams, Term};

/// Integer coefficient `constant + per_n * N`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coefficient {
    pub constant: i64,
    pub per_n: i64,
}

impl Coefficient {
    pub const ONE: Coefficient = Coefficient { constant: 1, per_n: 0 };
    pub const N: Coefficient = Coefficient { constant: 0, per_n: 1 };

    pub fn constant(c: i64) -> Self {
        Coefficient { constant: c, per_n: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0 && self.per_n == 0
    }

    pub fn at(&self, n: u32) -> i64 {
        self.constant + self.per_n * i64::from(n)
    }

    fn negated(self) -> Self {
        Coefficient {
            constant: -self.constant,
            per_n: -self.per_n,
        }
    }

    /// Leading sign for display: a coefficient is written negated when
    /// every part of it is non-positive.
    fn is_negative(&self) -> bool {
        self.constant <= 0 && self.per_n <= 0 && !self.is_zero()
    }
}

impl fmt::Display for Coefficient {
    /// `2`, `N`, `3N`, `(N+1)`, `(2N-1)`. The unit coefficient prints empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n_part = |k: i64| match k {
            1 => "N".to_string(),
            -1 => "-N".to_string(),
            k => format!("{k}N"),
        };
        match (self.per_n, self.constant) {
            (0, 1) => Ok(()),
            (0, c) => write!(f, "{c}"),
            (k, 0) => f.write_str(&n_part(k)),
            (k, c) if c > 0 => write!(f, "({}+{c})", n_part(k)),
            (k, c) => write!(f, "({}{c})", n_part(k)),
        }
    }
}

/// Linear cost expression: a sum of parameter terms with coefficients that
/// may depend on the wrapper count `N`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expr {
    terms: BTreeMap<Term, Coefficient>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn term(term: Term) -> Self {
        Expr::scaled(term, Coefficient::ONE)
    }

    pub fn scaled(term: Term, coefficient: Coefficient) -> Self {
        let mut e = Expr::zero();
        e.add_term(term, coefficient);
        e
    }

    pub fn add_term(&mut self, term: Term, coefficient: Coefficient) {
        let slot = self.terms.entry(term).or_default();
        slot.constant += coefficient.constant;
        slot.per_n += coefficient.per_n;
        if slot.is_zero() {
            self.terms.remove(&term);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Term, Coefficient)> + '_ {
        self.terms.iter().map(|(t, c)| (*t, *c))
    }

    pub fn coefficient(&self, term: Term) -> Coefficient {
        self.terms.get(&term).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Substitutes a concrete `N`.
    pub fn at_n(&self, n: u32) -> Expr {
        let mut e = Expr::zero();
        for (t, c) in &self.terms {
            e.add_term(*t, Coefficient::constant(c.at(n)));
        }
        e
    }

    pub fn eval(&self, params: &CostParams, n: u32) -> Rational64 {
        self.terms
            .iter()
            .map(|(t, c)| params.get(*t) * Rational64::from_integer(c.at(n)))
            .fold(Rational64::zero(), |a, b| a + b)
    }

    /// Canonical text: terms sorted by name, `coef*name`, joined by ` + `
    /// or ` - `; `0` when empty.
    pub fn canonical(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (term, coefficient)) in self.terms.iter().enumerate() {
            let negative = coefficient.is_negative();
            let shown = if negative { coefficient.negated() } else { *coefficient };
            match (i, negative) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let c = shown.to_string();
            if !c.is_empty() {
                out.push_str(&c);
                out.push('*');
            }
            out.push_str(term.name());
        }
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl Add for Expr {
    type Output = Expr;

    fn add(mut self, rhs: Expr) -> Expr {
        for (t, c) in rhs.terms {
            self.add_term(t, c);
        }
        self
    }
}

impl Sub for Expr {
    type Output = Expr;

    fn sub(mut self, rhs: Expr) -> Expr {
        for (t, c) in rhs.terms {
            self.add_term(t, c.negated());
        }
        self
    }
}
