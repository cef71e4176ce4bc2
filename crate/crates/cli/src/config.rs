//! Run configuration: a flat `key = value` file overlaid by command-line flags.
//!
//! Keys (all optional unless a command needs them):
//!
//! | key | meaning |
//! |-----|---------|
//! | `ring` | ring generator, unit count |
//! | `grid` | grid generator, `WIDTHxHEIGHT` |
//! | `metric` | grid metric, `manhattan` (default) or `chebyshev` |
//! | `edges` | edge-list file for BFS shells |
//! | `units` | unit count for numeric edge lists (default: largest id + 1) |
//! | `structure` | structure dump file |
//! | `radius` | maximum shell distance R |
//! | `model` | model file; otherwise a random model is drawn |
//! | `model_seed` | seed of the random model (default 0) |
//! | `alpha_range`, `beta_range`, `gamma_range` | `lo,hi` for the random model (default `-2,2`) |
//! | `assumed` | assumed-structure dump file |
//! | `transform` | `identity`, `shell_swap`, `radius_shift[:k]`, `edge_rewire:rho`, `subset_sample:kappa` |
//! | `transform_seed` | seed for the random transforms (default 0) |
//! | `p` | design probability (default 0.5) |
//! | `reps` | Monte Carlo replicates (default 1000) |
//! | `seed` | experiment / master seed (default 0) |
//! | `out` | output directory (default `.`) |
//! | `bound` | exhaustive enumeration bound (default 16, at most 24) |
//! | `closed_only` | `true` to skip enumeration in `misspec` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use spillover_core::{
    bfs_shells, grid_structure, ring_structure, EdgeList, GridMetric, InterferenceStructure,
    MisspecTransform, ModelRanges, OutcomeModel, DEFAULT_EXHAUSTIVE_BOUND, MAX_EXHAUSTIVE_BOUND,
};

use crate::error::CliError;

pub const KEYS: &[&str] = &[
    "ring",
    "grid",
    "metric",
    "edges",
    "units",
    "structure",
    "radius",
    "model",
    "model_seed",
    "alpha_range",
    "beta_range",
    "gamma_range",
    "assumed",
    "transform",
    "transform_seed",
    "p",
    "reps",
    "seed",
    "out",
    "bound",
    "closed_only",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// A structure plus the label map produced when edge-list ids were relabeled.
pub struct LoadedStructure {
    pub structure: InterferenceStructure,
    pub labels: Option<Vec<String>>,
}

impl RunConfig {
    pub fn parse_file(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value, got {line:?}", idx + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", idx + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                Self::parse_file(&text)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Usage(format!("invalid value for {key}: {v:?}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let path = PathBuf::from(v);
                if !path.is_file() {
                    return Err(CliError::Usage(format!("{key}: file {v:?} does not exist")));
                }
                Ok(Some(path))
            }
        }
    }

    pub fn p(&self) -> Result<f64, CliError> {
        let p = self.parsed::<f64>("p")?.unwrap_or(0.5);
        if !(p > 0.0 && p < 1.0) {
            return Err(CliError::Usage(format!("p must lie strictly between 0 and 1, got {p}")));
        }
        Ok(p)
    }

    pub fn reps(&self) -> Result<usize, CliError> {
        let reps = self.parsed::<usize>("reps")?.unwrap_or(1000);
        if reps == 0 {
            return Err(CliError::Usage("reps must be at least 1".into()));
        }
        Ok(reps)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        Ok(self.parsed("seed")?.unwrap_or(0))
    }

    pub fn bound(&self) -> Result<usize, CliError> {
        let bound = self.parsed::<usize>("bound")?.unwrap_or(DEFAULT_EXHAUSTIVE_BOUND);
        if bound > MAX_EXHAUSTIVE_BOUND {
            return Err(CliError::Usage(format!("bound must be at most {MAX_EXHAUSTIVE_BOUND}")));
        }
        Ok(bound)
    }

    pub fn closed_only(&self) -> Result<bool, CliError> {
        Ok(self.parsed("closed_only")?.unwrap_or(false))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = PathBuf::from(self.get("out").unwrap_or("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn radius(&self) -> Result<usize, CliError> {
        self.parsed("radius")?.ok_or_else(|| CliError::Usage("--radius is required".into()))
    }

    /// The true structure, from exactly one of `ring`, `grid`, `edges`, `structure`.
    pub fn structure(&self) -> Result<LoadedStructure, CliError> {
        let sources: Vec<&str> =
            ["ring", "grid", "edges", "structure"].into_iter().filter(|k| self.get(k).is_some()).collect();
        let source = match sources.as_slice() {
            [one] => *one,
            [] => return Err(CliError::Usage("give one of --ring, --grid, --edges, --structure".into())),
            many => return Err(CliError::Usage(format!("conflicting structure sources: {}", many.join(", ")))),
        };
        let plain = |structure| Ok(LoadedStructure { structure, labels: None });
        match source {
            "ring" => plain(ring_structure(self.parsed("ring")?.expect("present"), self.radius()?)?),
            "grid" => {
                let spec = self.get("grid").expect("present");
                let (w, h) = spec
                    .split_once('x')
                    .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                    .ok_or_else(|| CliError::Usage(format!("grid must be WIDTHxHEIGHT, got {spec:?}")))?;
                let metric: GridMetric = self.parsed("metric")?.unwrap_or(GridMetric::Manhattan);
                plain(grid_structure(w, h, self.radius()?, metric)?)
            }
            "edges" => {
                let path = self.path("edges")?.expect("present");
                let text = std::fs::read_to_string(path)?;
                let (graph, labels) = EdgeList::parse(&text, self.parsed("units")?)?;
                Ok(LoadedStructure { structure: bfs_shells(&graph, self.radius()?)?, labels })
            }
            _ => {
                let path = self.path("structure")?.expect("present");
                plain(read_structure(&path)?)
            }
        }
    }

    /// The model from `model`, or a random one sized to `structure`.
    pub fn model(&self, structure: &InterferenceStructure) -> Result<OutcomeModel, CliError> {
        let model = match self.path("model")? {
            Some(path) => OutcomeModel::read(std::io::BufReader::new(std::fs::File::open(path)?))?,
            None => {
                let defaults = ModelRanges::default();
                let ranges = ModelRanges {
                    alpha: self.range("alpha_range")?.unwrap_or(defaults.alpha),
                    beta: self.range("beta_range")?.unwrap_or(defaults.beta),
                    gamma: self.range("gamma_range")?.unwrap_or(defaults.gamma),
                };
                let seed = self.parsed("model_seed")?.unwrap_or(0);
                OutcomeModel::random(structure.n(), structure.radius(), ranges, seed)?
            }
        };
        model.check_against(structure)?;
        Ok(model)
    }

    fn range(&self, key: &str) -> Result<Option<(f64, f64)>, CliError> {
        self.get(key)
            .map(|v| {
                v.split_once(',')
                    .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)))
                    .ok_or_else(|| CliError::Usage(format!("{key} must be lo,hi, got {v:?}")))
            })
            .transpose()
    }

    pub fn transform(&self) -> Result<MisspecTransform, CliError> {
        let spec = self.get("transform").unwrap_or("identity");
        let seed = self.parsed("transform_seed")?.unwrap_or(0);
        let (kind, arg) = match spec.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (spec, None),
        };
        let number = |what: &str| -> Result<f64, CliError> {
            arg.and_then(|a| a.parse().ok())
                .ok_or_else(|| CliError::Usage(format!("transform {kind} needs {what}, e.g. {kind}:0.5")))
        };
        Ok(match kind {
            "identity" => MisspecTransform::RadiusShift { offset: 0 },
            "shell_swap" => MisspecTransform::ShellSwap,
            "radius_shift" => MisspecTransform::RadiusShift {
                offset: match arg {
                    Some(a) => a.parse().map_err(|_| CliError::Usage(format!("bad radius_shift offset {a:?}")))?,
                    None => 1,
                },
            },
            "edge_rewire" => MisspecTransform::EdgeRewire { fraction: number("a fraction")?, seed },
            "subset_sample" => MisspecTransform::SubsetSample { keep: number("a keep fraction")?, seed },
            other => return Err(CliError::Usage(format!("unknown transform {other:?}"))),
        })
    }

    /// The assumed structure: the `assumed` file if given, else `transform`
    /// applied to the truth (identity by default).
    pub fn assumed(&self, truth: &InterferenceStructure) -> Result<InterferenceStructure, CliError> {
        match self.path("assumed")? {
            Some(path) => {
                let assumed = read_structure(&path)?;
                Ok(truth.apply(&MisspecTransform::ReplaceWith(assumed))?)
            }
            None => Ok(truth.apply(&self.transform()?)?),
        }
    }
}

/// Reads a dump, reporting every invariant breach rather than just the first.
fn read_structure(path: &Path) -> Result<InterferenceStructure, CliError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    InterferenceStructure::read_dump(file).map_err(|e| match e {
        spillover_core::Error::InvalidStructure(v) => CliError::Validation(format!(
            "{}: {}",
            path.display(),
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        )),
        other => other.into(),
    })
}

