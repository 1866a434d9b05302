//! Brute-force reference for [`iterated_seq_norm`](super::iterated_seq_norm).
//!
//! Shares no code with the fast path beyond weight evaluation: the weighted
//! array is materialized as a map from multi-index to value and collapsed with
//! naive, unscaled power sums.

use std::collections::BTreeMap;

use super::{MixedNormSpec, SequenceNd};
use crate::error::{Error, Result};
use crate::weights::WeightFn;

pub fn iterated_seq_norm_oracle(a: &SequenceNd, spec: &MixedNormSpec) -> Result<f64> {
    let d = a.shape.len();
    if spec.p.len() != d || spec.sigma.len() != d || spec.omega.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.p.len(),
        });
    }
    if a.data.iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
        return Err(Error::NonFinite("sequence"));
    }
    let theta: Vec<f64> = if spec.step.is_empty() {
        vec![1.0; d]
    } else {
        spec.step.clone()
    };

    // b(j_sigma(1), ..., j_sigma(d)) = |a(j) omega(T_theta j)|, keyed by the
    // permuted multi-index.
    let mut current: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut counter = vec![0usize; d];
    for flat in 0..a.data.len() {
        let j: Vec<i64> = (0..d).map(|k| counter[k] as i64 + a.origin[k]).collect();
        let x: Vec<f64> = (0..d).map(|k| j[k] as f64 * theta[k]).collect();
        let value = a.data[flat].norm() * spec.omega.eval(&x);
        let key: Vec<i64> = spec.sigma.as_slice().iter().map(|&axis| j[axis]).collect();
        current.insert(key, value);
        for k in (0..d).rev() {
            counter[k] += 1;
            if counter[k] < a.shape[k] {
                break;
            }
            counter[k] = 0;
        }
    }

    // Collapse the leading key component at every step.
    for k in 0..d {
        let p = spec.p.0[k].value();
        let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (key, value) in &current {
            let rest = key[1..].to_vec();
            let slot = next.entry(rest).or_insert(0.0);
            if p.is_infinite() {
                if *value > *slot {
                    *slot = *value;
                }
            } else {
                *slot += value.powf(p);
            }
        }
        if p.is_finite() {
            for value in next.values_mut() {
                *value = value.powf(1.0 / p);
            }
        }
        current = next;
    }
    Ok(current.values().next().copied().unwrap_or(0.0))
}
