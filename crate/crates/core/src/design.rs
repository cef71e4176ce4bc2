//! Bernoulli experiments and Horvitz-Thompson estimates of the average direct
//! and spillover effects, with exact-expectation and Monte Carlo oracles.
//!
//! # Random streams
//!
//! All randomness comes from ChaCha20 (`rand_chacha`). A run with master seed
//! `m` draws replicate `k` from `ChaCha20Rng::seed_from_u64(m)` with
//! `set_stream(k)`; [`simulate`] with seed `s` is stream 0 of seed `s`. Unit
//! `j` is treated when the `j`-th uniform draw `u = rng.gen::<f64>()`
//! satisfies `u < p`. This derivation is part of the output contract: changing
//! it changes every seeded result.
//!
//! # Empty assumed shells
//!
//! When shell `r` of unit `i` is empty under the assumed structure, the
//! exposure `e_{r+1}` cannot occur and `pi_i(e_{r+1}) = 0`. That unit's
//! `r`-term is defined to be 0, which is what the `|N_i^r| = 0` multiplier
//! gives anyway.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::enumerate::for_each_assignment;
use crate::error::{check_probability, Error, Result};
use crate::exposure::{basis_index_of, ExposureProbabilityTable};
use crate::format::f64_17;
use crate::interference::InterferenceStructure;
use crate::outcomes::{eval_unchecked, Assignment, OutcomeModel};

/// One realized experiment. Estimators only see `z`, `y` and `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub z: Assignment,
    pub y: Vec<f64>,
    pub p: f64,
    pub seed: u64,
    pub stream: u64,
}

impl ExperimentRecord {
    /// Wraps observed data that did not come from [`simulate`].
    pub fn observed(z: Assignment, y: Vec<f64>, p: f64) -> Result<Self> {
        check_probability(p)?;
        if z.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} assignments but {} outcomes",
                z.len(),
                y.len()
            )));
        }
        Ok(Self { z, y, p, seed: 0, stream: 0 })
    }

    /// CSV with header `i,z,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "z", "y"])?;
        for (i, &y) in self.y.iter().enumerate() {
            let z = if self.z.is_treated(i) { "1" } else { "0" };
            out.write_record([i.to_string(), z.to_string(), f64_17(y)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Stream `rep` of master seed `master`.
pub fn replicate_rng(master: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(rep);
    rng
}

fn draw_assignment<R: Rng>(rng: &mut R, n: usize, p: f64) -> Assignment {
    Assignment::new((0..n).map(|_| rng.gen::<f64>() < p).collect())
}

/// Draws `Z` with iid Bernoulli(`p`) entries and records `Y = y(Z)`.
pub fn simulate(
    model: &OutcomeModel,
    structure: &InterferenceStructure,
    p: f64,
    seed: u64,
) -> Result<ExperimentRecord> {
    simulate_stream(model, structure, p, seed, 0)
}

pub fn simulate_stream(
    model: &OutcomeModel,
    structure: &InterferenceStructure,
    p: f64,
    seed: u64,
    stream: u64,
) -> Result<ExperimentRecord> {
    check_probability(p)?;
    model.check_against(structure)?;
    let z = draw_assignment(&mut replicate_rng(seed, stream), structure.n(), p);
    let y = eval_unchecked(model, structure, z.as_slice());
    Ok(ExperimentRecord { z, y, p, seed, stream })
}

/// Horvitz-Thompson estimates with how many units realized each basis
/// exposure `e_0..e_{R+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HtEstimate {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub policy_hat: f64,
    pub basis_counts: Vec<usize>,
}

impl HtEstimate {
    /// Units exposed to any single-neighbor signature `e_2..e_{R+1}`.
    pub fn count_spillover_exposures(&self) -> usize {
        self.basis_counts.iter().skip(2).sum()
    }

    /// Basis exposures that no unit realized in this draw.
    pub fn unrealized(&self) -> Vec<usize> {
        (0..self.basis_counts.len()).filter(|&k| self.basis_counts[k] == 0).collect()
    }

    pub fn triple(&self) -> EstimateTriple {
        EstimateTriple { beta: self.beta_hat, gamma: self.gamma_hat, policy: self.policy_hat }
    }
}

/// `(beta, gamma, policy)` for expectations, means and standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateTriple {
    pub beta: f64,
    pub gamma: f64,
    pub policy: f64,
}

impl EstimateTriple {
    fn as_array(self) -> [f64; 3] {
        [self.beta, self.gamma, self.policy]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Self { beta: a[0], gamma: a[1], policy: a[2] }
    }
}

/// Exposure probabilities of an assumed structure at a fixed `p`, reused
/// across many estimates.
#[derive(Debug, Clone)]
pub struct HtPlan<'a> {
    assumed: &'a InterferenceStructure,
    probs: ExposureProbabilityTable,
}

impl<'a> HtPlan<'a> {
    pub fn new(assumed: &'a InterferenceStructure, p: f64) -> Result<Self> {
        Ok(Self { assumed, probs: ExposureProbabilityTable::new(assumed, p)? })
    }

    pub fn probabilities(&self) -> &ExposureProbabilityTable {
        &self.probs
    }

    pub fn estimate(&self, z: &[bool], y: &[f64]) -> HtEstimate {
        let s = self.assumed;
        let radius = s.radius();
        let mut basis_counts = vec![0; radius + 2];
        let (mut beta_sum, mut gamma_sum) = (0.0, 0.0);
        for i in 0..s.n() {
            let Some(k) = basis_index_of(s, z, i) else { continue };
            basis_counts[k] += 1;
            let weighted = y[i] / self.probs.get(i, k);
            match k {
                0 => {
                    beta_sum -= weighted;
                    let occupied: usize = (1..=radius).map(|r| s.shell_size(i, r)).sum();
                    gamma_sum -= weighted * occupied as f64;
                }
                1 => beta_sum += weighted,
                _ => gamma_sum += weighted * s.shell_size(i, k - 1) as f64,
            }
        }
        let n = s.n() as f64;
        let beta_hat = beta_sum / n;
        let gamma_hat = gamma_sum / n;
        HtEstimate { beta_hat, gamma_hat, policy_hat: beta_hat + gamma_hat, basis_counts }
    }
}

/// Horvitz-Thompson estimates computed from exposures and exposure
/// probabilities under `assumed`. Only the record's `z`, `y` and `p` are read.
pub fn ht_estimate(assumed: &InterferenceStructure, record: &ExperimentRecord) -> Result<HtEstimate> {
    if record.z.len() != assumed.n() || record.y.len() != assumed.n() {
        return Err(Error::DimensionMismatch(format!(
            "record has {} units, assumed structure has {}",
            record.z.len(),
            assumed.n()
        )));
    }
    let plan = HtPlan::new(assumed, record.p)?;
    Ok(plan.estimate(record.z.as_slice(), &record.y))
}

/// Exact design expectation of the HT estimates, averaging over all `2^n`
/// assignments with their Bernoulli(`p`) probabilities.
pub fn exact_expectation_ht(
    model: &OutcomeModel,
    true_structure: &InterferenceStructure,
    assumed: &InterferenceStructure,
    p: f64,
    bound: usize,
) -> Result<EstimateTriple> {
    model.check_against(true_structure)?;
    assumed.check_paired(true_structure)?;
    let plan = HtPlan::new(assumed, p)?;
    let (mut beta, mut gamma) = (0.0, 0.0);
    for_each_assignment(true_structure.n(), p, bound, |z, weight| {
        let y = eval_unchecked(model, true_structure, z);
        let est = plan.estimate(z, &y);
        beta += weight * est.beta_hat;
        gamma += weight * est.gamma_hat;
    })?;
    Ok(EstimateTriple { beta, gamma, policy: beta + gamma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub rep: u64,
    pub estimate: HtEstimate,
}

/// Replicates in rep order plus their component-wise mean and sample
/// standard deviation (absent for a single replicate).
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub rows: Vec<RepRow>,
    pub mean: EstimateTriple,
    pub sd: Option<EstimateTriple>,
}

impl MonteCarloRun {
    pub fn reps(&self) -> usize {
        self.rows.len()
    }

    /// `rep,beta_hat,gamma_hat,policy_hat,count_e0,count_e1,count_e2plus`
    pub fn write_reps_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "rep",
            "beta_hat",
            "gamma_hat",
            "policy_hat",
            "count_e0",
            "count_e1",
            "count_e2plus",
        ])?;
        for row in &self.rows {
            let e = &row.estimate;
            out.write_record([
                row.rep.to_string(),
                f64_17(e.beta_hat),
                f64_17(e.gamma_hat),
                f64_17(e.policy_hat),
                e.basis_counts[0].to_string(),
                e.basis_counts[1].to_string(),
                e.count_spillover_exposures().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per statistic: `mean`, `sd` (empty cells when absent), `reps`,
    /// and `exact` when an exact expectation is supplied.
    pub fn write_summary_csv<W: Write>(&self, w: W, exact: Option<EstimateTriple>) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["statistic", "beta_hat", "gamma_hat", "policy_hat"])?;
        let row = |name: &str, t: Option<EstimateTriple>| -> Vec<String> {
            let mut r = vec![name.to_string()];
            match t {
                Some(t) => r.extend(t.as_array().iter().map(|&x| f64_17(x))),
                None => r.extend(std::iter::repeat_n(String::new(), 3)),
            }
            r
        };
        out.write_record(row("mean", Some(self.mean)))?;
        out.write_record(row("sd", self.sd))?;
        let reps = self.reps().to_string();
        out.write_record(["reps", &reps, &reps, &reps])?;
        if let Some(exact) = exact {
            out.write_record(row("exact", Some(exact)))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `reps` independent experiments, each simulated on the true structure and
/// estimated under `assumed`. Replicate `k` uses [`replicate_rng`]`(master_seed, k)`,
/// so results do not depend on thread scheduling.
pub fn monte_carlo(
    model: &OutcomeModel,
    true_structure: &InterferenceStructure,
    assumed: &InterferenceStructure,
    p: f64,
    reps: usize,
    master_seed: u64,
) -> Result<MonteCarloRun> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    model.check_against(true_structure)?;
    assumed.check_paired(true_structure)?;
    let plan = HtPlan::new(assumed, p)?;
    let n = true_structure.n();
    let rows: Vec<RepRow> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let z = draw_assignment(&mut replicate_rng(master_seed, rep), n, p);
            let y = eval_unchecked(model, true_structure, z.as_slice());
            RepRow { rep, estimate: plan.estimate(z.as_slice(), &y) }
        })
        .collect();
    let (mean, sd) = summarize(rows.iter().map(|r| r.estimate.triple().as_array()));
    Ok(MonteCarloRun { rows, mean, sd })
}

fn summarize(values: impl Iterator<Item = [f64; 3]> + Clone) -> (EstimateTriple, Option<EstimateTriple>) {
    let count = values.clone().count() as f64;
    let mut mean = [0.0; 3];
    for v in values.clone() {
        for c in 0..3 {
            mean[c] += v[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let sd = (count > 1.0).then(|| {
        let mut ss = [0.0; 3];
        for v in values {
            for c in 0..3 {
                ss[c] += (v[c] - mean[c]).powi(2);
            }
        }
        EstimateTriple::from_array(ss.map(|s| (s / (count - 1.0)).sqrt()))
    });
    (EstimateTriple::from_array(mean), sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{ring_structure, MisspecTransform};
    use crate::outcomes::{estimands, ModelRanges};

    #[test]
    fn simulate_is_deterministic() {
        let s = ring_structure(20, 2).unwrap();
        let m = OutcomeModel::random(20, 2, ModelRanges::default(), 8).unwrap();
        let a = simulate(&m, &s, 0.4, 123).unwrap();
        let b = simulate(&m, &s, 0.4, 123).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &s, 0.4, 124).unwrap();
        assert_ne!(a.z, c.z);
        assert!(simulate(&m, &s, 1.0, 1).is_err());
    }

    #[test]
    fn simulate_treatment_rate_concentrates() {
        let n = 10_000;
        let s = InterferenceStructure::empty(n, 1).unwrap();
        let m = OutcomeModel::zeros(n, 1);
        let rec = simulate(&m, &s, 0.3, 2024).unwrap();
        let rate = rec.z.treated_count() as f64 / n as f64;
        assert!((rate - 0.3).abs() <= 4.0 * (0.3f64 * 0.7 / n as f64).sqrt());
    }

    #[test]
    fn null_model_outcomes_are_alpha() {
        let s = ring_structure(9, 1).unwrap();
        let m = OutcomeModel::new(vec![3.0; 9], vec![0.0; 9], vec![vec![0.0]; 9]).unwrap();
        let rec = simulate(&m, &s, 0.5, 1).unwrap();
        assert_eq!(rec.y, vec![3.0; 9]);
    }

    #[test]
    fn unbiased_for_constant_direct_effect() {
        let s = ring_structure(8, 1).unwrap();
        let b = 1.75;
        let m = OutcomeModel::homogeneous(8, 0.4, b, &[0.0]).unwrap();
        let exp = exact_expectation_ht(&m, &s, &s, 0.35, 16).unwrap();
        assert!((exp.beta - b).abs() < 1e-10);
        assert!(exp.gamma.abs() < 1e-10);
    }

    #[test]
    fn unbiased_under_correct_specification() {
        let s = ring_structure(8, 2).unwrap();
        for seed in 0..5 {
            let m = OutcomeModel::random(8, 2, ModelRanges::default(), seed).unwrap();
            let truth = estimands(&m, &s).unwrap();
            let exp = exact_expectation_ht(&m, &s, &s, 0.3, 16).unwrap();
            assert!((exp.beta - truth.beta_bar).abs() < 1e-10);
            assert!((exp.gamma - truth.gamma_bar).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_model_has_zero_expectation() {
        let s = ring_structure(7, 2).unwrap();
        let exp = exact_expectation_ht(&OutcomeModel::zeros(7, 2), &s, &s, 0.5, 16).unwrap();
        assert_eq!(exp, EstimateTriple { beta: 0.0, gamma: 0.0, policy: 0.0 });
    }

    #[test]
    fn dropped_shell_biases_the_spillover_estimate() {
        let s = ring_structure(8, 2).unwrap();
        let m = OutcomeModel::random(8, 2, ModelRanges::default(), 17).unwrap();
        let shifted = s.apply(&MisspecTransform::RadiusShift { offset: 1 }).unwrap();
        let exp = exact_expectation_ht(&m, &s, &shifted, 0.3, 16).unwrap();
        let truth = estimands(&m, &s).unwrap();
        assert!((exp.gamma - truth.gamma_bar).abs() > 1e-6);
        let target = crate::misspec::misspec_gamma_definitional(&m, &s, &shifted, 0.3, 16).unwrap();
        assert!((exp.gamma - target.gamma_breve).abs() < 1e-10);
    }

    #[test]
    fn swapped_shells_leave_the_expectation_at_gamma_bar() {
        let s = ring_structure(8, 2).unwrap();
        let m = OutcomeModel::random(8, 2, ModelRanges::default(), 17).unwrap();
        let swapped = s.apply(&MisspecTransform::ShellSwap).unwrap();
        let exp = exact_expectation_ht(&m, &s, &swapped, 0.3, 16).unwrap();
        let truth = estimands(&m, &s).unwrap();
        assert!((exp.gamma - truth.gamma_bar).abs() < 1e-10);
    }

    #[test]
    fn no_e0_draw_still_estimates() {
        let s = ring_structure(4, 1).unwrap();
        let rec = ExperimentRecord::observed(
            Assignment::from_bits("1111").unwrap(),
            vec![1.0, 2.0, 3.0, 4.0],
            0.5,
        )
        .unwrap();
        let est = ht_estimate(&s, &rec).unwrap();
        assert_eq!(est.basis_counts, vec![0, 0, 0]);
        assert_eq!(est.unrealized(), vec![0, 1, 2]);
        assert_eq!((est.beta_hat, est.gamma_hat), (0.0, 0.0));
    }

    #[test]
    fn single_isolated_unit() {
        let s = InterferenceStructure::empty(1, 1).unwrap();
        let p = 0.3;
        for (bit, expected) in [("1", 2.0 / p), ("0", -2.0 / (1.0 - p))] {
            let rec = ExperimentRecord::observed(Assignment::from_bits(bit).unwrap(), vec![2.0], p).unwrap();
            let est = ht_estimate(&s, &rec).unwrap();
            assert_eq!(est.gamma_hat, 0.0);
            assert!((est.beta_hat - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn ht_rejects_bad_p_and_shape() {
        let s = ring_structure(4, 1).unwrap();
        let mut rec = ExperimentRecord::observed(Assignment::zeros(4), vec![0.0; 4], 0.5).unwrap();
        rec.p = 1.0;
        assert!(ht_estimate(&s, &rec).is_err());
        let rec = ExperimentRecord::observed(Assignment::zeros(3), vec![0.0; 3], 0.5).unwrap();
        assert!(ht_estimate(&s, &rec).is_err());
    }

    #[test]
    fn single_rep_has_no_sd() {
        let s = ring_structure(8, 1).unwrap();
        let m = OutcomeModel::random(8, 1, ModelRanges::default(), 2).unwrap();
        let run = monte_carlo(&m, &s, &s, 0.5, 1, 9).unwrap();
        assert!(run.sd.is_none());
        assert_eq!(run.mean, run.rows[0].estimate.triple());
        let rec = simulate(&m, &s, 0.5, 9).unwrap();
        assert_eq!(run.rows[0].estimate, ht_estimate(&s, &rec).unwrap());
        assert!(monte_carlo(&m, &s, &s, 0.5, 0, 9).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let s = ring_structure(8, 2).unwrap();
        let m = OutcomeModel::random(8, 2, ModelRanges::default(), 4).unwrap();
        let a = monte_carlo(&m, &s, &s, 0.4, 500, 77).unwrap();
        let b = monte_carlo(&m, &s, &s, 0.4, 500, 77).unwrap();
        assert_eq!(a, b);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_reps_csv(&mut x).unwrap();
        b.write_reps_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn summary_csv_layout() {
        let s = ring_structure(5, 1).unwrap();
        let m = OutcomeModel::random(5, 1, ModelRanges::default(), 4).unwrap();
        let run = monte_carlo(&m, &s, &s, 0.4, 1, 1).unwrap();
        let mut buf = Vec::new();
        run.write_summary_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "statistic,beta_hat,gamma_hat,policy_hat");
        assert_eq!(lines[2], "sd,,,");
        assert_eq!(lines[3], "reps,1,1,1");
    }
}
