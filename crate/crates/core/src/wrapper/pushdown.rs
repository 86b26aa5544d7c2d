use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{CanonicalQuery, CompareOp, Predicate};

/// What a source can evaluate natively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperCapabilities {
    pub supports_selection: bool,
    pub supported_ops: BTreeSet<CompareOp>,
    pub supports_projection: bool,
    pub supports_limit: bool,
}

impl WrapperCapabilities {
    pub fn new(
        supports_selection: bool,
        supported_ops: impl IntoIterator<Item = CompareOp>,
        supports_projection: bool,
        supports_limit: bool,
    ) -> Self {
        let supported_ops: BTreeSet<_> = supported_ops.into_iter().collect();
        WrapperCapabilities {
            supports_selection: supports_selection && !supported_ops.is_empty(),
            supported_ops,
            supports_projection,
            supports_limit,
        }
    }

    pub fn all() -> Self {
        WrapperCapabilities::new(true, CompareOp::ALL, true, true)
    }

    pub fn none() -> Self {
        WrapperCapabilities::new(false, [], false, false)
    }

    /// Capabilities both `self` and `other` have.
    pub fn intersect(&self, other: &WrapperCapabilities) -> Self {
        WrapperCapabilities::new(
            self.supports_selection && other.supports_selection,
            self.supported_ops.intersection(&other.supported_ops).copied(),
            self.supports_projection && other.supports_projection,
            self.supports_limit && other.supports_limit,
        )
    }

    pub fn can_evaluate(&self, predicate: &Predicate) -> bool {
        self.supports_selection
            && predicate
                .comparisons()
                .iter()
                .all(|c| self.supported_ops.contains(&c.op))
    }

    /// Whether a native request stays within these capabilities.
    pub fn admits(&self, native: &CanonicalQuery) -> bool {
        native.selection.as_ref().is_none_or(|p| self.can_evaluate(p))
            && (native.projection.is_empty() || self.supports_projection)
            && (native.limit.is_none() || self.supports_limit)
    }
}

/// Split of a query between the source and the wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushdownPlan {
    /// Evaluated by the source against the stored relation.
    pub native_query: CanonicalQuery,
    /// Evaluated by the wrapper over the native output.
    pub compensation: CanonicalQuery,
}

/// Pushes as much of `query` to the source as `caps` allow.
///
/// Selection conjuncts made only of supported comparisons go down. The
/// projection goes down only if the residual selection needs nothing outside
/// it, and the limit only if no selection is left for the wrapper.
pub fn plan_pushdown(query: &CanonicalQuery, caps: &WrapperCapabilities) -> PushdownPlan {
    let (native_selection, residual_selection) = match &query.selection {
        None => (None, None),
        Some(selection) => {
            let (pushed, kept): (Vec<&Predicate>, Vec<&Predicate>) =
                selection.conjuncts().into_iter().partition(|c| caps.can_evaluate(c));
            if kept.is_empty() {
                (Some(selection.clone()), None)
            } else if pushed.is_empty() {
                (None, Some(selection.clone()))
            } else {
                (
                    Predicate::conjoin(pushed.into_iter().cloned().collect()),
                    Predicate::conjoin(kept.into_iter().cloned().collect()),
                )
            }
        }
    };

    let projection_pushed = caps.supports_projection
        && residual_selection
            .as_ref()
            .is_none_or(|p| p.attributes().iter().all(|a| query.projection.iter().any(|x| x == a)));
    let projection_pushed = projection_pushed || query.projection.is_empty();
    let (native_projection, residual_projection) = if projection_pushed {
        (query.projection.clone(), Vec::new())
    } else {
        (Vec::new(), query.projection.clone())
    };

    let limit_pushed = caps.supports_limit && residual_selection.is_none();
    let (native_limit, residual_limit) = if limit_pushed {
        (query.limit, None)
    } else {
        (None, query.limit)
    };

    PushdownPlan {
        native_query: CanonicalQuery {
            target: query.target.clone(),
            projection: native_projection,
            selection: native_selection,
            limit: native_limit,
        },
        compensation: CanonicalQuery {
            target: query.target.clone(),
            projection: residual_projection,
            selection: residual_selection,
            limit: residual_limit,
        },
    }
}
