//! Exhaustive enumeration of `{0,1}^n` under an iid Bernoulli(p) design.
//!
//! The oracles in this crate (exact HT expectations, definitional
//! misspecified effects, exposure-probability checks) all run through here.

use crate::error::{check_bound, check_probability, Result};

/// Probability of one specific assignment with `treated` of `n` units treated.
pub fn assignment_probability(n: usize, treated: usize, p: f64) -> f64 {
    p.powi(treated as i32) * (1.0 - p).powi((n - treated) as i32)
}

/// Calls `f(z, weight)` for every assignment in mask order `0..2^n`, where
/// bit `j` of the mask is `z[j]`. Refuses when `n` exceeds `bound`.
pub fn for_each_assignment<F>(n: usize, p: f64, bound: usize, mut f: F) -> Result<()>
where
    F: FnMut(&[bool], f64),
{
    check_probability(p)?;
    check_bound(n, bound)?;
    let weights: Vec<f64> = (0..=n).map(|k| assignment_probability(n, k, p)).collect();
    let mut z = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        let mut treated = 0;
        for (j, slot) in z.iter_mut().enumerate() {
            *slot = mask >> j & 1 == 1;
            treated += *slot as usize;
        }
        f(&z, weights[treated]);
    }
    Ok(())
}
