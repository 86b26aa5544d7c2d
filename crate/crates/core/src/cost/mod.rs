//! Shift-cost model for the three layouts: a single mediator layer that
//! also represents (1LMW), a representing mediator layer stacked on a
//! mediating one (2LMW), and masks over mediators (MMW).
//!
//! Costs are exact rationals. Symbolic forms keep the wrapper count `N`
//! open and print canonically, so they compare as strings.

mod expr;
mod params;
mod table;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub use expr::{Coefficient, Expr};
pub use params::{
    format_rational, parse_rational, rule as param_rule, validate_params, CostParams, ParamViolation, Term,
};
pub use table::{compare_table, CostCell, CostGrid, CostRow, CostTable};

use crate::topology::{Action, EditLog, MASK, MEDIATOR, MEDIATOR_PRIME, WRAPPER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Architecture {
    OneLayer,
    TwoLayer,
    Mmw,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::OneLayer, Architecture::TwoLayer, Architecture::Mmw];

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::OneLayer => "1LMW",
            Architecture::TwoLayer => "2LMW",
            Architecture::Mmw => "MMW",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown architecture `{s}` (expected 1LMW, 2LMW or MMW)"))
    }
}

impl Serialize for Architecture {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "u8")]
pub enum Scenario {
    /// New representation type.
    RepresentationType = 1,
    /// New representation of an existing type.
    Representation = 2,
    /// New mediation over existing wrappers.
    Mediation = 3,
    /// New wrapper under an existing mediator.
    Wrapper = 4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::RepresentationType,
        Scenario::Representation,
        Scenario::Mediation,
        Scenario::Wrapper,
    ];

    pub fn number(&self) -> u8 {
        *self as u8
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        s.number()
    }
}

impl TryFrom<u8> for Scenario {
    type Error = CostError;

    fn try_from(n: u8) -> Result<Self, CostError> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.number() == n)
            .ok_or(CostError::InvalidScenario(n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("unknown-component-type: `{0}`")]
    UnknownComponentType(String),
    #[error("no cost is defined for {action} on `{component_type}`")]
    UnpricedAction { action: Action, component_type: String },
    #[error("no scenario {0}; scenarios are 1 to 4")]
    InvalidScenario(u8),
}

impl CostError {
    pub fn code(&self) -> &'static str {
        match self {
            CostError::UnknownComponentType(_) => "unknown-component-type",
            CostError::UnpricedAction { .. } => "unpriced-action",
            CostError::InvalidScenario(_) => "invalid-scenario",
        }
    }
}

/// A symbolic cost and its value under one binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShiftCost {
    pub symbolic: Expr,
    #[serde(serialize_with = "numeric_json")]
    pub numeric: Rational64,
}

fn numeric_json<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    if r.is_integer() {
        s.serialize_i64(*r.numer())
    } else {
        s.serialize_str(&format_rational(r))
    }
}

impl ShiftCost {
    pub fn new(symbolic: Expr, params: &CostParams, n: u32) -> Self {
        let numeric = symbolic.eval(params, n);
        ShiftCost { symbolic, numeric }
    }
}

fn sum(parts: &[(Term, Coefficient)]) -> Expr {
    parts.iter().fold(Expr::zero(), |e, (t, c)| e + Expr::scaled(*t, *c))
}

/// Closed-form shift cost, `N` left symbolic.
pub fn scenario_expr(arch: Architecture, scenario: Scenario) -> Expr {
    use Architecture::*;
    use Scenario::*;
    use Term::*;
    let one = Coefficient::ONE;
    let n = Coefficient::N;
    let n_plus_1 = Coefficient { constant: 1, per_n: 1 };
    match (scenario, arch) {
        (RepresentationType, OneLayer) => sum(&[(MeImpl, one), (MeDepl, one), (ConnSet, n)]),
        (RepresentationType, TwoLayer) => sum(&[(MeImpl, one), (MeDepl, one), (ConnSet, one)]),
        (RepresentationType, Mmw) => sum(&[(MaImpl, one), (MaDepl, one), (ConnSet, one)]),
        (Representation, OneLayer) => sum(&[(MeDepl, one), (ConnSet, n)]),
        (Representation, TwoLayer) => sum(&[(MeDepl, one), (ConnSet, one)]),
        (Representation, Mmw) => sum(&[(MaDepl, one), (ConnSet, one)]),
        (Mediation, OneLayer) => sum(&[(MeDepl, one), (ConnSet, n)]),
        (Mediation, TwoLayer) => sum(&[(MeDepl, Coefficient::constant(2)), (ConnSet, n_plus_1)]),
        (Mediation, Mmw) => sum(&[(MePrimeDepl, one), (MaDepl, one), (ConnSet, n_plus_1)]),
        (Wrapper, _) => sum(&[(WDepl, one), (ConnSet, one)]),
    }
}

pub fn scenario_cost(arch: Architecture, scenario: Scenario, n: u32, params: &CostParams) -> ShiftCost {
    ShiftCost::new(scenario_expr(arch, scenario), params, n)
}

/// Extra cost of adding a mediation compared with the single-layer layout.
pub fn overhead_expr(arch: Architecture) -> Expr {
    use Term::*;
    let one = Coefficient::ONE;
    match arch {
        Architecture::OneLayer => Expr::zero(),
        Architecture::TwoLayer => sum(&[(MeDepl, one), (ConnSet, one)]),
        Architecture::Mmw => sum(&[
            (MePrimeDepl, one),
            (MeDepl, Coefficient::constant(-1)),
            (MaDepl, one),
            (ConnSet, one),
        ]),
    }
}

pub fn overhead_cost(arch: Architecture, n: u32, params: &CostParams) -> ShiftCost {
    ShiftCost::new(overhead_expr(arch), params, n)
}

fn priced_term(action: Action, component_type: &str) -> Result<Term, CostError> {
    let known = [MASK, MEDIATOR, MEDIATOR_PRIME, WRAPPER];
    if !known.contains(&component_type) {
        return Err(CostError::UnknownComponentType(component_type.to_string()));
    }
    Ok(match (action, component_type) {
        (Action::Connect, _) => Term::ConnSet,
        (Action::Implement, MASK) => Term::MaImpl,
        (Action::Implement, MEDIATOR) => Term::MeImpl,
        (Action::Implement, MEDIATOR_PRIME) => Term::MePrimeImpl,
        (Action::Deploy, MASK) => Term::MaDepl,
        (Action::Deploy, MEDIATOR) => Term::MeDepl,
        (Action::Deploy, MEDIATOR_PRIME) => Term::MePrimeDepl,
        (Action::Deploy, WRAPPER) => Term::WDepl,
        (action, ty) => {
            return Err(CostError::UnpricedAction {
                action,
                component_type: ty.to_string(),
            })
        }
    })
}

/// Sums one cost term per logged action.
pub fn price_editlog(log: &EditLog, params: &CostParams) -> Result<ShiftCost, CostError> {
    let mut symbolic = Expr::zero();
    for edit in &log.edits {
        symbolic.add_term(priced_term(edit.action, &edit.component_type)?, Coefficient::ONE);
    }
    Ok(ShiftCost::new(symbolic, params, 0))
}

#[cfg(test)]
mod tests;
