//! Exposure signatures `(z_i, treated count in shell 1, ..., shell R)`, their
//! probabilities under Bernoulli designs, and a brute-force check that a
//! candidate structure yields a correctly specified exposure mapping.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::enumerate::for_each_assignment;
use crate::error::{check_probability, Error, Result};
use crate::interference::InterferenceStructure;
use crate::outcomes::{eval_unit, Assignment, OutcomeModel};

/// A point of the exposure lattice. Equality is exact integer equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExposureSignature {
    pub own: bool,
    pub counts: Vec<usize>,
}

impl ExposureSignature {
    pub fn new(own: bool, counts: Vec<usize>) -> Self {
        Self { own, counts }
    }

    /// Basis signature `e_k` for radius `R`: `e_0` is all zeros, `e_1` treats
    /// only the unit itself, `e_{r+1}` has a single treated unit in shell `r`.
    pub fn basis(k: usize, radius: usize) -> Self {
        assert!(k <= radius + 1, "basis index {k} out of range for R = {radius}");
        let mut counts = vec![0; radius];
        if k >= 2 {
            counts[k - 2] = 1;
        }
        Self { own: k == 1, counts }
    }

    /// Index `k` such that `self == e_k`, if any.
    pub fn basis_index(&self) -> Option<usize> {
        let mut nonzero = self.counts.iter().enumerate().filter(|(_, &c)| c != 0);
        match (self.own, nonzero.next(), nonzero.next()) {
            (false, None, _) => Some(0),
            (true, None, _) => Some(1),
            (false, Some((r, 1)), None) => Some(r + 2),
            _ => None,
        }
    }

    pub fn radius(&self) -> usize {
        self.counts.len()
    }
}

impl fmt::Display for ExposureSignature {
    /// `own:c1,...,cR`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "{}:{}", self.own as u8, counts.join(","))
    }
}

impl FromStr for ExposureSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed signature {s:?}"));
        let (own, counts) = s.split_once(':').ok_or_else(bad)?;
        let own = match own {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        let counts = if counts.is_empty() {
            Vec::new()
        } else {
            counts.split(',').map(|c| c.parse().map_err(|_| bad())).collect::<Result<_>>()?
        };
        Ok(Self { own, counts })
    }
}

/// Exposure of unit `i` under assignment `z`.
pub fn exposure(structure: &InterferenceStructure, z: &Assignment, i: usize) -> ExposureSignature {
    signature_of(structure, z.as_slice(), i)
}

pub(crate) fn signature_of(structure: &InterferenceStructure, z: &[bool], i: usize) -> ExposureSignature {
    ExposureSignature {
        own: z[i],
        counts: structure.shells_of(i).iter().map(|s| s.iter().filter(|&&j| z[j]).count()).collect(),
    }
}

/// Basis index of unit `i`'s exposure under `z`, without allocating.
pub(crate) fn basis_index_of(structure: &InterferenceStructure, z: &[bool], i: usize) -> Option<usize> {
    let mut hit: Option<usize> = None;
    for (k, shell) in structure.shells_of(i).iter().enumerate() {
        match shell.iter().filter(|&&j| z[j]).count() {
            0 => {}
            1 if hit.is_none() => hit = Some(k),
            _ => return None,
        }
    }
    match (z[i], hit) {
        (false, None) => Some(0),
        (true, None) => Some(1),
        (false, Some(k)) => Some(k + 2),
        (true, Some(_)) => None,
    }
}

/// Packs a signature of unit `i` into an integer with mixed radix
/// `2, |N_i^1| + 1, ..., |N_i^R| + 1`.
fn signature_key(structure: &InterferenceStructure, z: &[bool], i: usize) -> u64 {
    let mut key = z[i] as u64;
    let mut scale = 2u64;
    for shell in structure.shells_of(i) {
        let count = shell.iter().filter(|&&j| z[j]).count() as u64;
        key += scale * count;
        scale *= shell.len() as u64 + 1;
    }
    key
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// `pr(d_i(Z) = sig)` when every unit is treated independently with
/// probability `p`. Unattainable signatures (a count above its shell size)
/// have probability 0.
pub fn exposure_probability(
    structure: &InterferenceStructure,
    p: f64,
    i: usize,
    sig: &ExposureSignature,
) -> Result<f64> {
    check_probability(p)?;
    if sig.radius() != structure.radius() {
        return Err(Error::DimensionMismatch(format!(
            "signature has {} counts, structure radius is {}",
            sig.radius(),
            structure.radius()
        )));
    }
    let q = 1.0 - p;
    let mut prob = if sig.own { p } else { q };
    for (shell, &count) in structure.shells_of(i).iter().zip(&sig.counts) {
        let size = shell.len();
        if count > size {
            return Ok(0.0);
        }
        prob *= binomial(size, count) * p.powi(count as i32) * q.powi((size - count) as i32);
    }
    Ok(prob)
}

/// Every attainable signature of unit `i`, in lexicographic order.
pub fn attainable_signatures(structure: &InterferenceStructure, i: usize) -> Vec<ExposureSignature> {
    let sizes: Vec<usize> = structure.shells_of(i).iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for own in [false, true] {
        let mut counts = vec![0; sizes.len()];
        'odometer: loop {
            out.push(ExposureSignature::new(own, counts.clone()));
            for pos in (0..sizes.len()).rev() {
                if counts[pos] < sizes[pos] {
                    counts[pos] += 1;
                    continue 'odometer;
                }
                counts[pos] = 0;
            }
            break;
        }
    }
    out
}

/// `pi_i(e_k)` for every unit and every basis signature `e_0..e_{R+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProbabilityTable {
    p: f64,
    radius: usize,
    probs: Vec<Vec<f64>>,
}

impl ExposureProbabilityTable {
    pub fn new(structure: &InterferenceStructure, p: f64) -> Result<Self> {
        check_probability(p)?;
        let radius = structure.radius();
        let probs = (0..structure.n())
            .map(|i| {
                (0..=radius + 1)
                    .map(|k| exposure_probability(structure, p, i, &ExposureSignature::basis(k, radius)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p, radius, probs })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// `pi_i(e_k)`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.probs[i][k]
    }

    /// CSV with header `i,signature,probability`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "signature", "probability"])?;
        for (i, row) in self.probs.iter().enumerate() {
            for (k, &prob) in row.iter().enumerate() {
                out.write_record([
                    i.to_string(),
                    ExposureSignature::basis(k, self.radius).to_string(),
                    crate::format::f64_17(prob),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Outcome of [`verify_correct_specification`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecificationCheck {
    Ok,
    /// `z` and `z_prime` give unit `unit` the same candidate exposure but
    /// different outcomes.
    Counterexample { unit: usize, z: Assignment, z_prime: Assignment },
}

impl SpecificationCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, SpecificationCheck::Ok)
    }
}

/// Checks by enumerating all `2^n` assignments whether the exposures induced
/// by `candidate` determine every unit's outcome under the true model.
///
/// Assignments are grouped by candidate signature per unit; outcomes within
/// a group must agree exactly. Refuses when `n` exceeds `bound`.
pub fn verify_correct_specification(
    candidate: &InterferenceStructure,
    model: &OutcomeModel,
    truth: &InterferenceStructure,
    bound: usize,
) -> Result<SpecificationCheck> {
    model.check_against(truth)?;
    candidate.check_paired(truth)?;
    let n = truth.n();
    let mut groups: Vec<HashMap<u64, (Vec<bool>, f64)>> = vec![HashMap::new(); n];
    let mut witness: Option<(usize, Vec<bool>, Vec<bool>)> = None;
    // p only weights the enumeration, which is unused here
    for_each_assignment(n, 0.5, bound, |z, _| {
        if witness.is_some() {
            return;
        }
        for i in 0..n {
            let key = signature_key(candidate, z, i);
            let y = eval_unit(model, truth, z, i);
            match groups[i].get(&key) {
                Some((first, y_first)) if *y_first != y => {
                    witness = Some((i, first.clone(), z.to_vec()));
                    return;
                }
                Some(_) => {}
                None => {
                    groups[i].insert(key, (z.to_vec(), y));
                }
            }
        }
    })?;
    Ok(match witness {
        None => SpecificationCheck::Ok,
        Some((unit, z, z_prime)) => SpecificationCheck::Counterexample {
            unit,
            z: Assignment::new(z),
            z_prime: Assignment::new(z_prime),
        },
    })
}
