//! Random instance families shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spillover_core::interference::{grid_structure, GridMetric};
use spillover_core::{
    bfs_shells, ring_structure, EdgeList, InterferenceStructure, MisspecTransform, ModelRanges,
    OutcomeModel,
};

pub struct Instance {
    pub label: String,
    pub truth: InterferenceStructure,
    pub assumed: InterferenceStructure,
    pub model: OutcomeModel,
}

pub const TRANSFORM_KINDS: [&str; 5] = ["shell_swap", "radius_shift", "edge_rewire", "subset_sample", "replace_with"];

/// Each unit's other units scattered over shells `1..=R` or left out.
pub fn random_shells(rng: &mut impl Rng, n: usize, radius: usize) -> InterferenceStructure {
    let shells = (0..n)
        .map(|i| {
            let mut unit = vec![Vec::new(); radius];
            for j in (0..n).filter(|&j| j != i) {
                let slot = rng.gen_range(0..=radius);
                if slot > 0 {
                    unit[slot - 1].push(j);
                }
            }
            unit
        })
        .collect();
    InterferenceStructure::new(n, radius, shells).expect("valid by construction")
}

pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> EdgeList {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < density {
                edges.push((a, b));
            }
        }
    }
    EdgeList::new(n, edges).expect("ids in range")
}

/// A true structure from one of the generator families, chosen by `family`.
pub fn family_structure(rng: &mut impl Rng, family: usize, n: usize, radius: usize) -> (String, InterferenceStructure) {
    match family % 4 {
        0 if n > 2 * radius => ("ring".into(), ring_structure(n, radius).unwrap()),
        1 => {
            let width = (2..n).find(|w| n % w == 0 && w * w >= n).unwrap_or(n);
            let metric = if rng.gen() { GridMetric::Manhattan } else { GridMetric::Chebyshev };
            (format!("grid{width}x{}", n / width), grid_structure(width, n / width, radius, metric).unwrap())
        }
        2 => {
            let density = rng.gen_range(0.15..0.6);
            ("bfs".into(), bfs_shells(&random_graph(rng, n, density), radius).unwrap())
        }
        _ => ("explicit".into(), random_shells(rng, n, radius)),
    }
}

pub fn transform_for(rng: &mut impl Rng, kind: &str, n: usize, radius: usize) -> MisspecTransform {
    match kind {
        "shell_swap" => MisspecTransform::ShellSwap,
        "radius_shift" => {
            let offsets: Vec<i64> = (-(radius as i64)..=radius as i64).filter(|&k| k != 0).collect();
            MisspecTransform::RadiusShift { offset: *offsets.choose(rng).unwrap() }
        }
        "edge_rewire" => MisspecTransform::EdgeRewire { fraction: rng.gen_range(0.1..0.9), seed: rng.gen() },
        "subset_sample" => MisspecTransform::SubsetSample { keep: rng.gen_range(0.2..1.0), seed: rng.gen() },
        _ => MisspecTransform::ReplaceWith(random_shells(rng, n, radius)),
    }
}

/// `count` instances with `n` in `n_range`, `R <= max_radius`, cycling
/// through structure families and transform kinds.
pub fn random_suite(
    count: usize,
    seed: u64,
    n_range: std::ops::RangeInclusive<usize>,
    max_radius: usize,
    ranges: ModelRanges,
) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let n = rng.gen_range(n_range.clone());
        let radius = rng.gen_range(1..=max_radius);
        let (family, truth) = family_structure(&mut rng, k, n, radius);
        let kind = TRANSFORM_KINDS[out.len() % TRANSFORM_KINDS.len()];
        let transform = transform_for(&mut rng, kind, n, radius);
        k += 1;
        // edge_rewire can run out of free units on dense structures; draw again
        let Ok(assumed) = truth.apply(&transform) else { continue };
        let model = OutcomeModel::random(n, radius, ranges, rng.gen()).unwrap();
        out.push(Instance { label: format!("{family}/n{n}/R{radius}/{kind}"), truth, assumed, model });
    }
    out
}
