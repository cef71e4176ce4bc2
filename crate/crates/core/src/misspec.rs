//! Misspecified spillover effects.
//!
//! An analyst who assumes shells `Ñ_i^r` instead of the true `N_i^r` targets
//!
//! ```text
//! γ̆ = Σ_r (1/n) Σ_i (ȳ_i(e_{r+1}) - ȳ_i(e_0)) |Ñ_i^r|,   ȳ_i(d) = E[y_i(Z) | d̆_i(Z) = d]
//! ```
//!
//! Under iid Bernoulli assignment the conditional expectations reduce to
//! counting: given `d̆_i(Z) = e_{s+1}` exactly one unit of `Ñ_i^s` is treated,
//! each equally likely, so
//!
//! ```text
//! w_irs = E[Σ_{j ∈ N_i^r} Z_j 1{j ∈ Ñ_i} | d̆_i(Z) = e_{s+1}] = |N_i^r ∩ Ñ_i^s| / |Ñ_i^s|
//! γ̆     = (1/n) Σ_i Σ_r γ_ir |N_i^r| w_ir,   w_ir = Σ_s w_irs |Ñ_i^s| / |N_i^r| = Σ_s |N_i^r ∩ Ñ_i^s| / |N_i^r|
//! ```
//!
//! The factor in `w_ir` is `|Ñ_i^s|`, the size of the conditioning shell: each
//! `s`-contrast is scaled by its own shell size. `w_ir` is the share of true
//! shell `r` that the assumed structure places in any shell; it is 1 under
//! correct specification and for any relabeling of shells (such as a shell
//! swap), and it does not depend on `p`.
//!
//! Zero-size conventions: an empty `Ñ_i^s` makes its conditioning event
//! impossible and its term 0; an empty `N_i^r` gives `w_ir = 0` (its
//! contribution carries the factor `|N_i^r| = 0`).

use std::io::Write;

use crate::enumerate::for_each_assignment;
use crate::error::{Error, Result};
use crate::exposure::basis_index_of;
use crate::format::{bool_flag, f64_17};
use crate::interference::InterferenceStructure;
use crate::outcomes::{estimands, eval_unchecked, eval_unit, Estimands, OutcomeModel};

/// Design probabilities used for the p-invariance check.
pub const P_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// `w[i][r - 1]` and `w_by_s[i][r - 1][s - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisspecWeights {
    pub w: Vec<Vec<f64>>,
    pub w_by_s: Vec<Vec<Vec<f64>>>,
}

impl MisspecWeights {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.w[i][r - 1]
    }

    /// `Σ_r w_ir` for unit `i`.
    pub fn unit_sum(&self, i: usize) -> f64 {
        self.w[i].iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.w.iter().flatten().chain(self.w_by_s.iter().flatten().flatten()).copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `i,r,w`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "r", "w"])?;
        for (i, row) in self.w.iter().enumerate() {
            for (k, &value) in row.iter().enumerate() {
                out.write_record([i.to_string(), (k + 1).to_string(), f64_17(value)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn misspec_weights(
    true_s: &InterferenceStructure,
    assumed_s: &InterferenceStructure,
) -> Result<MisspecWeights> {
    true_s.check_paired(assumed_s)?;
    let radius = true_s.radius();
    let mut w = Vec::with_capacity(true_s.n());
    let mut w_by_s = Vec::with_capacity(true_s.n());
    for i in 0..true_s.n() {
        let mut w_row = vec![0.0; radius];
        let mut by_s_rows = vec![vec![0.0; radius]; radius];
        for r in 1..=radius {
            let true_size = true_s.shell_size(i, r);
            let mut captured = 0;
            for s in 1..=radius {
                let overlap = true_s.intersection_size(assumed_s, i, r, s);
                let assumed_size = assumed_s.shell_size(i, s);
                if assumed_size > 0 {
                    by_s_rows[r - 1][s - 1] = overlap as f64 / assumed_size as f64;
                    captured += overlap;
                }
            }
            if true_size > 0 {
                w_row[r - 1] = captured as f64 / true_size as f64;
            }
        }
        w.push(w_row);
        w_by_s.push(by_s_rows);
    }
    Ok(MisspecWeights { w, w_by_s })
}

/// Closed form `(1/n) Σ_i Σ_r γ_ir |N_i^r| w_ir`.
pub fn misspec_gamma_closed(
    model: &OutcomeModel,
    true_s: &InterferenceStructure,
    assumed_s: &InterferenceStructure,
) -> Result<f64> {
    model.check_against(true_s)?;
    let weights = misspec_weights(true_s, assumed_s)?;
    Ok(closed_from_weights(model, true_s, &weights))
}

fn closed_from_weights(model: &OutcomeModel, true_s: &InterferenceStructure, weights: &MisspecWeights) -> f64 {
    // summed in the same order as `estimands`, so unit weights reproduce γ̄ bit for bit
    let total: f64 = (0..true_s.n())
        .map(|i| {
            (1..=true_s.radius())
                .map(|r| model.gamma_at(i, r) * true_s.shell_size(i, r) as f64 * weights.get(i, r))
                .sum::<f64>()
        })
        .sum();
    total / true_s.n() as f64
}

/// `γ̆` computed from its definition by exact enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitionalGamma {
    pub gamma_breve: f64,
    pub p: f64,
    /// `(i, r)` pairs whose conditioning event `d̆_i = e_{r+1}` is impossible.
    pub impossible: Vec<(usize, usize)>,
}

/// Enumerates all `2^n` assignments with Bernoulli(`p`) weights, forms
/// `ȳ_i(e_0)` and `ȳ_i(e_{r+1})` under the assumed exposures, and combines
/// them into `γ̆`.
pub fn misspec_gamma_definitional(
    model: &OutcomeModel,
    true_s: &InterferenceStructure,
    assumed_s: &InterferenceStructure,
    p: f64,
    bound: usize,
) -> Result<DefinitionalGamma> {
    model.check_against(true_s)?;
    true_s.check_paired(assumed_s)?;
    let (n, radius) = (true_s.n(), true_s.radius());
    // [i][k] for basis index k; k = 1 (own treated) is never used
    let mut num = vec![vec![0.0; radius + 2]; n];
    let mut den = vec![vec![0.0; radius + 2]; n];
    for_each_assignment(n, p, bound, |z, weight| {
        for i in 0..n {
            match basis_index_of(assumed_s, z, i) {
                Some(k) if k != 1 => {
                    num[i][k] += weight * eval_unit(model, true_s, z, i);
                    den[i][k] += weight;
                }
                _ => {}
            }
        }
    })?;
    let mut impossible = Vec::new();
    let mut gamma_breve = 0.0;
    for r in 1..=radius {
        let mut inner = 0.0;
        for i in 0..n {
            let size = assumed_s.shell_size(i, r);
            if den[i][r + 1] == 0.0 {
                impossible.push((i, r));
                continue;
            }
            let contrast = num[i][r + 1] / den[i][r + 1] - num[i][0] / den[i][0];
            inner += contrast * size as f64;
        }
        gamma_breve += inner / n as f64;
    }
    impossible.sort_unstable();
    Ok(DefinitionalGamma { gamma_breve, p, impossible })
}

/// Spread (max - min) of the definitional `γ̆` over [`P_GRID`].
pub fn p_grid_spread(
    model: &OutcomeModel,
    true_s: &InterferenceStructure,
    assumed_s: &InterferenceStructure,
    bound: usize,
) -> Result<f64> {
    let values = P_GRID
        .iter()
        .map(|&p| misspec_gamma_definitional(model, true_s, assumed_s, p, bound).map(|d| d.gamma_breve))
        .collect::<Result<Vec<_>>>()?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Enumerated `E[Σ_{j ∈ N_i^r} Z_j 1{j ∈ Ñ_i} | d̆_i(Z) = e_{s+1}]`, indexed
/// `[i][r - 1][s - 1]`; 0 where the conditioning event is impossible.
pub fn enumerated_shell_weights(
    true_s: &InterferenceStructure,
    assumed_s: &InterferenceStructure,
    p: f64,
    bound: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    true_s.check_paired(assumed_s)?;
    let (n, radius) = (true_s.n(), true_s.radius());
    let assumed_union: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            let mut mark = vec![false; n];
            for j in assumed_s.neighborhood(i) {
                mark[j] = true;
            }
            mark
        })
        .collect();
    let mut num = vec![vec![vec![0.0; radius]; radius]; n];
    let mut den = vec![vec![0.0; radius]; n];
    for_each_assignment(n, p, bound, |z, weight| {
        for i in 0..n {
            let Some(k) = basis_index_of(assumed_s, z, i) else { continue };
            if k < 2 {
                continue;
            }
            let s = k - 2;
            den[i][s] += weight;
            for r in 1..=radius {
                let hits = true_s.shell(i, r).iter().filter(|&&j| z[j] && assumed_union[i][j]).count();
                num[i][r - 1][s] += weight * hits as f64;
            }
        }
    })?;
    Ok((0..n)
        .map(|i| {
            (0..radius)
                .map(|r| {
                    (0..radius)
                        .map(|s| if den[i][s] > 0.0 { num[i][r][s] / den[i][s] } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect())
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// How the report should compute the definitional side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub p: f64,
    pub bound: usize,
    /// Skip every enumeration (for `n` above the bound).
    pub closed_only: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { p: 0.5, bound: crate::DEFAULT_EXHAUSTIVE_BOUND, closed_only: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisspecReport {
    pub gamma_breve_closed: f64,
    pub definitional: Option<DefinitionalGamma>,
    pub p_grid_spread: Option<f64>,
    pub weights: MisspecWeights,
    pub truth: Estimands,
    /// `sign(γ̆) == sign(β̄ + γ̄)`, zero counting as its own sign.
    pub sign_agree: bool,
    /// `sign(γ̆) == sign(γ̄)`.
    pub sign_agree_gamma_bar: bool,
    /// `|γ̆| / |β̄ + γ̄|`, infinite when the policy effect is 0.
    pub magnitude_ratio: f64,
}

impl MisspecReport {
    pub fn build(
        model: &OutcomeModel,
        true_s: &InterferenceStructure,
        assumed_s: &InterferenceStructure,
        options: ReportOptions,
    ) -> Result<Self> {
        model.check_against(true_s)?;
        let weights = misspec_weights(true_s, assumed_s)?;
        let closed = closed_from_weights(model, true_s, &weights);
        let truth = estimands(model, true_s)?;
        let (definitional, spread) = if options.closed_only {
            (None, None)
        } else {
            (
                Some(misspec_gamma_definitional(model, true_s, assumed_s, options.p, options.bound)?),
                Some(p_grid_spread(model, true_s, assumed_s, options.bound)?),
            )
        };
        Ok(Self {
            gamma_breve_closed: closed,
            definitional,
            p_grid_spread: spread,
            weights,
            truth,
            sign_agree: sign(closed) == sign(truth.policy_effect),
            sign_agree_gamma_bar: sign(closed) == sign(truth.gamma_bar),
            magnitude_ratio: closed.abs() / truth.policy_effect.abs(),
        })
    }

    pub fn gamma_breve_definitional(&self) -> Option<f64> {
        self.definitional.as_ref().map(|d| d.gamma_breve)
    }

    /// Closed and definitional values agree within `tol` (vacuous when the
    /// definitional side was skipped).
    pub fn consistent(&self, tol: f64) -> bool {
        self.gamma_breve_definitional().is_none_or(|d| (d - self.gamma_breve_closed).abs() <= tol)
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "gamma_breve_closed",
        "gamma_breve_definitional",
        "gamma_bar",
        "beta_bar",
        "policy_effect",
        "sign_agree",
        "magnitude_ratio",
        "sign_agree_gamma_bar",
        "p_grid_spread",
        "p",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(f64_17).unwrap_or_default();
        vec![
            f64_17(self.gamma_breve_closed),
            opt(self.gamma_breve_definitional()),
            f64_17(self.truth.gamma_bar),
            f64_17(self.truth.beta_bar),
            f64_17(self.truth.policy_effect),
            bool_flag(self.sign_agree).to_string(),
            f64_17(self.magnitude_ratio),
            bool_flag(self.sign_agree_gamma_bar).to_string(),
            opt(self.p_grid_spread),
            opt(self.definitional.as_ref().map(|d| d.p)),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        out.write_record(self.csv_row())?;
        out.flush()?;
        Ok(())
    }
}

/// Witness-assignment outcomes for every unit and the averages rebuilt from
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim2Report {
    /// `ỹ_i(e_0)`, from the all-zero assignment.
    pub y_e0: Vec<f64>,
    /// `ỹ_i(e_1)`, treating only `i`.
    pub y_e1: Vec<f64>,
    /// `ỹ_i(e_{r+1})` at `[i][r - 1]`, treating the first member of shell `r`;
    /// `None` for empty shells.
    pub y_shell: Vec<Vec<Option<f64>>>,
    /// `(i, r)` with an empty shell, where `e_{r+1}` cannot occur.
    pub skipped: Vec<(usize, usize)>,
    /// Units or shells where a witness outcome differs from its
    /// coefficient expression.
    pub failures: Vec<String>,
    pub beta_bar_reconstructed: f64,
    pub gamma_bar_reconstructed: f64,
    pub estimands: Estimands,
}

impl Claim2Report {
    /// Every identity holds exactly and the reconstructions match within
    /// `rel_tol` relative (absolute below 1).
    pub fn holds(&self, rel_tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0);
        self.failures.is_empty()
            && close(self.beta_bar_reconstructed, self.estimands.beta_bar)
            && close(self.gamma_bar_reconstructed, self.estimands.gamma_bar)
    }
}

/// Builds `e_0`, `e_1` and `e_{r+1}` witness assignments for every unit,
/// checks `ỹ_i(e_0) = α_i`, `ỹ_i(e_1) = α_i + β_i`, `ỹ_i(e_{r+1}) = α_i + γ_ir`,
/// and rebuilds `β̄` and `γ̄` from the exposure contrasts.
pub fn claim2_identities(model: &OutcomeModel, true_s: &InterferenceStructure) -> Result<Claim2Report> {
    model.check_against(true_s)?;
    let (n, radius) = (true_s.n(), true_s.radius());
    let mut z = vec![false; n];
    let y_e0 = eval_unchecked(model, true_s, &z);
    let mut y_e1 = Vec::with_capacity(n);
    let mut y_shell = vec![vec![None; radius]; n];
    let mut skipped = Vec::new();
    let mut failures = Vec::new();
    for i in 0..n {
        let (alpha, beta) = (model.alpha()[i], model.beta()[i]);
        if y_e0[i] != alpha {
            failures.push(format!("unit {i}: y(e_0) = {} but alpha = {alpha}", y_e0[i]));
        }
        z[i] = true;
        let y1 = eval_unit(model, true_s, &z, i);
        z[i] = false;
        if y1 != alpha + beta {
            failures.push(format!("unit {i}: y(e_1) = {y1} but alpha + beta = {}", alpha + beta));
        }
        y_e1.push(y1);
        for r in 1..=radius {
            let Some(&witness) = true_s.shell(i, r).first() else {
                skipped.push((i, r));
                continue;
            };
            z[witness] = true;
            let y = eval_unit(model, true_s, &z, i);
            z[witness] = false;
            let expected = alpha + model.gamma_at(i, r);
            if y != expected {
                failures.push(format!("unit {i}, shell {r}: y(e_{}) = {y} but alpha + gamma = {expected}", r + 1));
            }
            y_shell[i][r - 1] = Some(y);
        }
    }
    let nf = n as f64;
    let beta_bar_reconstructed = (0..n).map(|i| y_e1[i] - y_e0[i]).sum::<f64>() / nf;
    let gamma_bar_reconstructed: f64 = (1..=radius)
        .map(|r| {
            (0..n)
                .filter_map(|i| y_shell[i][r - 1].map(|y| (y - y_e0[i]) * true_s.shell_size(i, r) as f64))
                .sum::<f64>()
                / nf
        })
        .sum();
    Ok(Claim2Report {
        y_e0,
        y_e1,
        y_shell,
        skipped,
        failures,
        beta_bar_reconstructed,
        gamma_bar_reconstructed,
        estimands: estimands(model, true_s)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialKind {
    /// `sign(γ̆) ≠ sign(β̄ + γ̄)`, both nonzero.
    SignFlip,
    /// `|γ̆| ≥ 10 |β̄ + γ̄|` with `β̄ + γ̄ ≠ 0`.
    MagnitudeInflation,
    /// `β̄ + γ̄ = 0` while `|γ̆| ≥ 1`.
    Cancellation,
}

impl AdversarialKind {
    pub const ALL: [AdversarialKind; 3] =
        [AdversarialKind::SignFlip, AdversarialKind::MagnitudeInflation, AdversarialKind::Cancellation];

    pub fn name(self) -> &'static str {
        match self {
            AdversarialKind::SignFlip => "sign_flip",
            AdversarialKind::MagnitudeInflation => "magnitude_inflation",
            AdversarialKind::Cancellation => "cancellation",
        }
    }

    /// Whether `gamma_breve` and the true policy effect meet this kind's
    /// threshold.
    pub fn satisfied_by(self, gamma_breve: f64, policy_effect: f64) -> bool {
        match self {
            AdversarialKind::SignFlip => {
                gamma_breve != 0.0 && policy_effect != 0.0 && sign(gamma_breve) != sign(policy_effect)
            }
            AdversarialKind::MagnitudeInflation => {
                policy_effect != 0.0 && gamma_breve.abs() >= 10.0 * policy_effect.abs()
            }
            AdversarialKind::Cancellation => policy_effect.abs() <= 1e-12 && gamma_breve.abs() >= 1.0,
        }
    }
}

impl std::str::FromStr for AdversarialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdversarialKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown demo {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialInstance {
    pub kind: AdversarialKind,
    pub model: OutcomeModel,
    pub true_structure: InterferenceStructure,
    pub assumed_structure: InterferenceStructure,
    pub report: MisspecReport,
}

/// Checks a candidate instance: mixed-sign spillovers, and the kind's
/// threshold met by the enumerated (definitional) `γ̆` at `p`.
pub fn adversarial_from_parts(
    kind: AdversarialKind,
    model: OutcomeModel,
    true_structure: InterferenceStructure,
    assumed_structure: InterferenceStructure,
    p: f64,
) -> Result<AdversarialInstance> {
    let gammas = model.gamma().iter().flatten();
    let has_pos = gammas.clone().any(|&g| g > 0.0);
    let has_neg = gammas.clone().any(|&g| g < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::Adversarial(
            "spillover effects share one sign, so γ̆ has that sign (or is 0)".into(),
        ));
    }
    let options = ReportOptions { p, bound: crate::DEFAULT_EXHAUSTIVE_BOUND, closed_only: false };
    let report = MisspecReport::build(&model, &true_structure, &assumed_structure, options)?;
    let definitional = report.gamma_breve_definitional().expect("definitional side requested");
    if !kind.satisfied_by(definitional, report.truth.policy_effect) {
        return Err(Error::Adversarial(format!(
            "{}: γ̆ = {definitional}, policy effect = {} miss the threshold",
            kind.name(),
            report.truth.policy_effect
        )));
    }
    Ok(AdversarialInstance { kind, model, true_structure, assumed_structure, report })
}

/// Prebuilt instance of `kind`.
///
/// All three live on an 8-unit ring with `R = 2`, where near neighbors raise
/// the outcome and units two steps away lower it. The assumed structure keeps
/// the near shell and drops the far one, so `γ̆` reports only the near
/// spillovers while the policy effect nets both.
pub fn adversarial_instance(kind: AdversarialKind) -> AdversarialInstance {
    let (near, far, direct) = match kind {
        // γ̄ = 2 - 3 = -1, β̄ + γ̄ = -1, γ̆ = 2
        AdversarialKind::SignFlip => (1.0, -1.5, 0.0),
        // β̄ + γ̄ = 0.1, γ̆ = 2
        AdversarialKind::MagnitudeInflation => (1.0, -1.0, 0.1),
        // β̄ + γ̄ = 0, γ̆ = 2
        AdversarialKind::Cancellation => (1.0, -1.0, 0.0),
    };
    let n = 8;
    let truth = crate::interference::ring_structure(n, 2).expect("n > 2R");
    let assumed_shells = (0..n).map(|i| vec![truth.shell(i, 1).to_vec(), Vec::new()]).collect();
    let assumed = InterferenceStructure::new(n, 2, assumed_shells).expect("subset of a valid structure");
    let model = OutcomeModel::homogeneous(n, 1.0, direct, &[near, far]).expect("finite coefficients");
    adversarial_from_parts(kind, model, truth, assumed, 0.5).expect("prebuilt family meets its threshold")
}
