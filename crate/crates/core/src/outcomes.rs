//! The linear potential-outcome model and the true estimands it implies.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::format::f64_17;
use crate::interference::InterferenceStructure;

/// A treatment assignment `z ∈ {0,1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(z: Vec<bool>) -> Self {
        Self(z)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Treats exactly the units in `treated`.
    pub fn treating(n: usize, treated: &[usize]) -> Self {
        let mut z = vec![false; n];
        for &j in treated {
            z[j] = true;
        }
        Self(z)
    }

    /// Bit `j` of `mask` is the treatment of unit `j`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|j| mask >> j & 1 == 1).collect())
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bits(bits: &str) -> Result<Self> {
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!("assignment entry {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_treated(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn treated_count(&self) -> usize {
        self.0.iter().filter(|&&t| t).count()
    }

    /// Number of treated units among `ids`.
    pub fn count_in(&self, ids: &[usize]) -> usize {
        ids.iter().filter(|&&j| self.0[j]).count()
    }

    pub fn to_bits(&self) -> String {
        self.0.iter().map(|&t| if t { '1' } else { '0' }).collect()
    }
}

/// Coefficients `alpha` (baseline), `beta` (direct effect) and `gamma`
/// (`gamma[i][r - 1]`, the effect of one more treated unit in shell `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<Vec<f64>>,
}

/// Uniform ranges for [`OutcomeModel::random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRanges {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for ModelRanges {
    fn default() -> Self {
        Self { alpha: (-2.0, 2.0), beta: (-2.0, 2.0), gamma: (-2.0, 2.0) }
    }
}

impl OutcomeModel {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<Vec<f64>>) -> Result<Self> {
        let n = alpha.len();
        if beta.len() != n || gamma.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "alpha, beta, gamma have {}, {}, {} rows",
                n,
                beta.len(),
                gamma.len()
            )));
        }
        let radius = gamma.first().map_or(0, Vec::len);
        if gamma.iter().any(|row| row.len() != radius) {
            return Err(Error::DimensionMismatch("gamma rows differ in length".into()));
        }
        let all = alpha.iter().chain(&beta).chain(gamma.iter().flatten());
        if let Some(bad) = all.into_iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Same coefficients for every unit.
    pub fn homogeneous(n: usize, alpha: f64, beta: f64, gamma: &[f64]) -> Result<Self> {
        Self::new(vec![alpha; n], vec![beta; n], vec![gamma.to_vec(); n])
    }

    pub fn zeros(n: usize, radius: usize) -> Self {
        Self { alpha: vec![0.0; n], beta: vec![0.0; n], gamma: vec![vec![0.0; radius]; n] }
    }

    /// Independent uniform coefficients from a ChaCha20 stream seeded with
    /// `seed`, drawn unit by unit as alpha, beta, gamma_1..gamma_R.
    pub fn random(n: usize, radius: usize, ranges: ModelRanges, seed: u64) -> Result<Self> {
        for (lo, hi) in [ranges.alpha, ranges.beta, ranges.gamma] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!("bad range [{lo}, {hi}]")));
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
        let (mut alpha, mut beta, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            alpha.push(draw(ranges.alpha));
            beta.push(draw(ranges.beta));
            gamma.push((0..radius).map(|_| draw(ranges.gamma)).collect());
        }
        Self::new(alpha, beta, gamma)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn radius(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `gamma[i][r - 1]`.
    pub fn gamma(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    pub fn gamma_at(&self, i: usize, r: usize) -> f64 {
        self.gamma[i][r - 1]
    }

    pub fn with_gamma(mut self, gamma: Vec<Vec<f64>>) -> Result<Self> {
        self.gamma = gamma;
        Self::new(self.alpha, self.beta, self.gamma)
    }

    pub fn check_against(&self, structure: &InterferenceStructure) -> Result<()> {
        if self.n() != structure.n() || self.radius() != structure.radius() {
            return Err(Error::DimensionMismatch(format!(
                "model has (n, R) = ({}, {}), structure has ({}, {})",
                self.n(),
                self.radius(),
                structure.n(),
                structure.radius()
            )));
        }
        Ok(())
    }

    /// Writes one `i alpha beta gamma_1 ... gamma_R` line per unit.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            let mut fields = vec![i.to_string(), f64_17(self.alpha[i]), f64_17(self.beta[i])];
            fields.extend(self.gamma[i].iter().map(|&g| f64_17(g)));
            writeln!(w, "{}", fields.join(" "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is ASCII")
    }

    /// Reads the model file format. Lines must cover units `0..n` exactly
    /// once, in any order; `#` lines are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut toks = trimmed.split_whitespace();
            let parse_err = |message: String| Error::Parse { line: idx + 1, message };
            let i: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("missing unit id".into()))?;
            let values = toks
                .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("not a number: {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() < 2 {
                return Err(parse_err("expected alpha and beta".into()));
            }
            rows.push((i, values));
        }
        rows.sort_by_key(|row| row.0);
        if rows.iter().enumerate().any(|(k, row)| row.0 != k) {
            return Err(Error::InvalidParameter("model rows must cover units 0..n exactly once".into()));
        }
        let (mut alpha, mut beta, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
        for (_, values) in rows {
            alpha.push(values[0]);
            beta.push(values[1]);
            gamma.push(values[2..].to_vec());
        }
        Self::new(alpha, beta, gamma)
    }
}

/// Outcome of every unit under assignment `z`.
pub fn eval_outcomes(
    model: &OutcomeModel,
    structure: &InterferenceStructure,
    z: &Assignment,
) -> Result<Vec<f64>> {
    model.check_against(structure)?;
    if z.len() != structure.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} entries, structure has {} units",
            z.len(),
            structure.n()
        )));
    }
    Ok(eval_unchecked(model, structure, z.as_slice()))
}

/// Shell counts are multiplied as whole numbers, so two assignments with the
/// same own treatment and shell counts give bit-identical outcomes.
pub(crate) fn eval_unit(
    model: &OutcomeModel,
    structure: &InterferenceStructure,
    z: &[bool],
    i: usize,
) -> f64 {
    let mut y = model.alpha[i];
    if z[i] {
        y += model.beta[i];
    }
    for (k, shell) in structure.shells_of(i).iter().enumerate() {
        let count = shell.iter().filter(|&&j| z[j]).count();
        y += model.gamma[i][k] * count as f64;
    }
    y
}

pub(crate) fn eval_unchecked(
    model: &OutcomeModel,
    structure: &InterferenceStructure,
    z: &[bool],
) -> Vec<f64> {
    (0..structure.n()).map(|i| eval_unit(model, structure, z, i)).collect()
}

/// Average direct effect, average spillover effect, and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimands {
    pub beta_bar: f64,
    pub gamma_bar: f64,
    pub policy_effect: f64,
}

impl Estimands {
    pub fn new(beta_bar: f64, gamma_bar: f64) -> Self {
        Self { beta_bar, gamma_bar, policy_effect: beta_bar + gamma_bar }
    }
}

pub fn estimands(model: &OutcomeModel, structure: &InterferenceStructure) -> Result<Estimands> {
    model.check_against(structure)?;
    let n = structure.n() as f64;
    let beta_bar = model.beta.iter().sum::<f64>() / n;
    let gamma_total: f64 = (0..structure.n())
        .map(|i| {
            (1..=structure.radius())
                .map(|r| model.gamma_at(i, r) * structure.shell_size(i, r) as f64)
                .sum::<f64>()
        })
        .sum();
    Ok(Estimands::new(beta_bar, gamma_total / n))
}

/// Expected change in total outcome when one unit, drawn uniformly, is
/// treated: the average over `k` of `sum_i y_i(1_k) - sum_i y_i(0)`,
/// computed by evaluating the model rather than from its coefficients.
pub fn policy_effect_oracle(model: &OutcomeModel, structure: &InterferenceStructure) -> Result<f64> {
    model.check_against(structure)?;
    let n = structure.n();
    let mut z = vec![false; n];
    let baseline: f64 = eval_unchecked(model, structure, &z).iter().sum();
    let mut total = 0.0;
    for k in 0..n {
        z[k] = true;
        total += eval_unchecked(model, structure, &z).iter().sum::<f64>() - baseline;
        z[k] = false;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{grid_structure, ring_structure, GridMetric};
    use proptest::prelude::*;

    fn mutual_pair() -> InterferenceStructure {
        InterferenceStructure::new(2, 1, vec![vec![vec![1]], vec![vec![0]]]).unwrap()
    }

    /// Independent route: expand every (i, j, r) incidence and accumulate.
    fn incidence_outcomes(model: &OutcomeModel, s: &InterferenceStructure, z: &Assignment) -> Vec<f64> {
        let mut incidences = Vec::new();
        for i in 0..s.n() {
            for r in 1..=s.radius() {
                for &j in s.shell(i, r) {
                    incidences.push((i, j, r));
                }
            }
        }
        let mut y: Vec<f64> = (0..s.n())
            .map(|i| model.alpha()[i] + if z.is_treated(i) { model.beta()[i] } else { 0.0 })
            .collect();
        for (i, j, r) in incidences {
            if z.is_treated(j) {
                y[i] += model.gamma_at(i, r);
            }
        }
        y
    }

    #[test]
    fn zero_assignment_gives_alpha() {
        let s = ring_structure(7, 2).unwrap();
        let m = OutcomeModel::random(7, 2, ModelRanges::default(), 1).unwrap();
        assert_eq!(eval_outcomes(&m, &s, &Assignment::zeros(7)).unwrap(), m.alpha());
    }

    #[test]
    fn mutual_pair_substitution() {
        let m = OutcomeModel::new(vec![1.0, 1.0], vec![-1.0, -1.0], vec![vec![0.5], vec![0.5]]).unwrap();
        let y = eval_outcomes(&m, &mutual_pair(), &Assignment::from_bits("10").unwrap()).unwrap();
        assert_eq!(y, vec![0.0, 1.5]);
    }

    #[test]
    fn matches_incidence_accumulation_on_ring() {
        let s = ring_structure(8, 2).unwrap();
        for seed in 0..20 {
            let m = OutcomeModel::random(8, 2, ModelRanges::default(), seed).unwrap();
            for mask in 0..256 {
                let z = Assignment::from_mask(8, mask);
                let a = eval_outcomes(&m, &s, &z).unwrap();
                let b = incidence_outcomes(&m, &s, &z);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = ring_structure(5, 1).unwrap();
        let m = OutcomeModel::zeros(4, 1);
        assert!(eval_outcomes(&m, &s, &Assignment::zeros(5)).is_err());
        let m = OutcomeModel::zeros(5, 2);
        assert!(estimands(&m, &s).is_err());
        let m = OutcomeModel::zeros(5, 1);
        assert!(eval_outcomes(&m, &s, &Assignment::zeros(4)).is_err());
        assert!(OutcomeModel::new(vec![1.0], vec![f64::NAN], vec![vec![]]).is_err());
    }

    #[test]
    fn estimand_examples() {
        let s = ring_structure(4, 1).unwrap();
        let g = 0.7;
        let m = OutcomeModel::homogeneous(4, 0.0, 0.0, &[g]).unwrap();
        assert_eq!(estimands(&m, &s).unwrap().gamma_bar, 2.0 * g);
        let zero = OutcomeModel::zeros(4, 1);
        assert_eq!(estimands(&zero, &s).unwrap().gamma_bar, 0.0);
        assert_eq!(policy_effect_oracle(&zero, &s).unwrap(), 0.0);
    }

    #[test]
    fn oracle_mutual_pair() {
        let m = OutcomeModel::new(vec![1.0, 1.0], vec![-1.0, -1.0], vec![vec![0.5], vec![0.5]]).unwrap();
        let s = mutual_pair();
        let e = estimands(&m, &s).unwrap();
        assert_eq!(policy_effect_oracle(&m, &s).unwrap(), -0.5);
        assert_eq!(e.policy_effect, -0.5);
        assert_eq!(e.policy_effect, e.beta_bar + e.gamma_bar);
    }

    #[test]
    fn oracle_matches_estimands_on_grid_and_random_instances() {
        let grid = grid_structure(4, 4, 2, GridMetric::Manhattan).unwrap();
        let m = OutcomeModel::random(16, 2, ModelRanges::default(), 99).unwrap();
        let e = estimands(&m, &grid).unwrap();
        let oracle = policy_effect_oracle(&m, &grid).unwrap();
        assert!((oracle - e.beta_bar - e.gamma_bar).abs() <= 1e-12 * oracle.abs().max(1.0));

        let ring = ring_structure(10, 3).unwrap();
        for seed in 0..100 {
            let m = OutcomeModel::random(10, 3, ModelRanges::default(), seed).unwrap();
            let e = estimands(&m, &ring).unwrap();
            let oracle = policy_effect_oracle(&m, &ring).unwrap();
            assert!((oracle - e.policy_effect).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn model_file_round_trip() {
        let m = OutcomeModel::random(5, 3, ModelRanges::default(), 4).unwrap();
        let back = OutcomeModel::read(m.to_text().as_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(OutcomeModel::read("0 1.0\n".as_bytes()).is_err());
        assert!(OutcomeModel::read("1 1.0 2.0 3.0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn superposition_over_disjoint_supports(seed in 0u64..1000, a in 0u64..512, b in 0u64..512) {
            let s = ring_structure(9, 2).unwrap();
            let m = OutcomeModel::random(9, 2, ModelRanges::default(), seed).unwrap();
            let b = b & !a;
            let y0 = eval_outcomes(&m, &s, &Assignment::zeros(9)).unwrap();
            let ya = eval_outcomes(&m, &s, &Assignment::from_mask(9, a)).unwrap();
            let yb = eval_outcomes(&m, &s, &Assignment::from_mask(9, b)).unwrap();
            let yab = eval_outcomes(&m, &s, &Assignment::from_mask(9, a | b)).unwrap();
            for i in 0..9 {
                let lhs = yab[i] - y0[i];
                let rhs = (ya[i] - y0[i]) + (yb[i] - y0[i]);
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }

        #[test]
        fn permuting_within_a_shell_leaves_outcome_unchanged(seed in 0u64..1000, mask in 0u64..4096) {
            let s = grid_structure(4, 3, 2, GridMetric::Chebyshev).unwrap();
            let m = OutcomeModel::random(12, 2, ModelRanges::default(), seed).unwrap();
            let z = Assignment::from_mask(12, mask);
            let y = eval_outcomes(&m, &s, &z).unwrap();
            let i = (seed % 12) as usize;
            let mut moved = z.as_slice().to_vec();
            let shell = s.shell(i, 1);
            let treated: Vec<usize> = shell.iter().copied().filter(|&j| moved[j]).collect();
            for &j in shell {
                moved[j] = false;
            }
            for &j in shell.iter().rev().take(treated.len()) {
                moved[j] = true;
            }
            let y2 = eval_outcomes(&m, &s, &Assignment::new(moved)).unwrap();
            prop_assert_eq!(y[i], y2[i]);
        }
    }
}
