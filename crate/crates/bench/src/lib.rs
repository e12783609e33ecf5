//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use dslab_core::operator::{build_full_operator, conjugate, ReducedOperator};
use dslab_core::MetricSpec;

pub fn desitter3(len: usize) -> Arc<MetricSpec> {
    Arc::new(MetricSpec::desitter(3, len, 1.0, (-5.0f64).exp()).unwrap())
}

pub fn reduced(metric: &Arc<MetricSpec>) -> ReducedOperator {
    conjugate(&build_full_operator(Arc::clone(metric)).unwrap())
}
