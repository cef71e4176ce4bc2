//! Interference structures: per-unit distance shells, their generators, and
//! transforms that produce assumed (possibly wrong) structures from true ones.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// One breach of the shell invariants. Radii are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Unit `unit` lists itself in shell `radius`.
    SelfInclusion { unit: usize, radius: usize },
    /// `member` appears in both shells `radius` and `other_radius` of `unit`.
    Overlap { unit: usize, radius: usize, other_radius: usize, member: usize },
    /// Shell `radius` of `unit` references an id that is not a unit.
    OutOfRange { unit: usize, radius: usize, member: usize },
    /// The shell table does not have `n` rows of `R` shells each.
    Shape { unit: usize, found: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::SelfInclusion { unit, radius } => {
                write!(f, "unit {unit} is in its own shell {radius}")
            }
            Violation::Overlap { unit, radius, other_radius, member } => write!(
                f,
                "unit {unit}: member {member} is in shells {radius} and {other_radius}"
            ),
            Violation::OutOfRange { unit, radius, member } => {
                write!(f, "unit {unit}, shell {radius}: id {member} is out of range")
            }
            Violation::Shape { unit, found, expected } => {
                write!(f, "unit {unit} has {found} shells, expected {expected}")
            }
        }
    }
}

/// Checks the three shell invariants on raw data, reporting every breach.
///
/// `shells[i][r - 1]` holds the members of shell `r` of unit `i`.
pub fn validate_shells(n: usize, radius: usize, shells: &[Vec<Vec<usize>>]) -> Vec<Violation> {
    let mut out = Vec::new();
    if shells.len() != n {
        out.push(Violation::Shape { unit: shells.len().min(n), found: shells.len(), expected: n });
    }
    for (i, unit_shells) in shells.iter().enumerate() {
        if unit_shells.len() != radius {
            out.push(Violation::Shape { unit: i, found: unit_shells.len(), expected: radius });
        }
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for (k, shell) in unit_shells.iter().enumerate() {
            let r = k + 1;
            let mut reported_self = false;
            for &j in shell {
                if j >= n {
                    out.push(Violation::OutOfRange { unit: i, radius: r, member: j });
                    continue;
                }
                if j == i {
                    if !reported_self {
                        out.push(Violation::SelfInclusion { unit: i, radius: r });
                        reported_self = true;
                    }
                    continue;
                }
                match seen.get(&j) {
                    Some(&first) if first != r => out.push(Violation::Overlap {
                        unit: i,
                        radius: first,
                        other_radius: r,
                        member: j,
                    }),
                    Some(_) => {}
                    None => {
                        seen.insert(j, r);
                    }
                }
            }
        }
    }
    out
}

/// Distance shells `N_i^r` for `n` units and radii `1..=R`.
///
/// Always valid: members are sorted, distinct, in range, exclude the unit
/// itself, and different shells of one unit are disjoint. Empty shells are
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceStructure {
    n: usize,
    radius: usize,
    shells: Vec<Vec<Vec<usize>>>,
}

impl InterferenceStructure {
    /// Builds a structure from `shells[i][r - 1]`, sorting and deduplicating
    /// members, and rejecting any invariant breach.
    pub fn new(n: usize, radius: usize, mut shells: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("structure needs at least one unit".into()));
        }
        if radius == 0 {
            return Err(Error::InvalidParameter("radius must be at least 1".into()));
        }
        for unit_shells in &mut shells {
            for shell in unit_shells.iter_mut() {
                shell.sort_unstable();
                shell.dedup();
            }
        }
        let violations = validate_shells(n, radius, &shells);
        if !violations.is_empty() {
            return Err(Error::InvalidStructure(violations));
        }
        Ok(Self { n, radius, shells })
    }

    /// A structure where every shell is empty.
    pub fn empty(n: usize, radius: usize) -> Result<Self> {
        Self::new(n, radius, vec![vec![Vec::new(); radius]; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Members of shell `r` (1-based) of unit `i`, sorted ascending.
    pub fn shell(&self, i: usize, r: usize) -> &[usize] {
        &self.shells[i][r - 1]
    }

    pub fn shell_size(&self, i: usize, r: usize) -> usize {
        self.shells[i][r - 1].len()
    }

    /// All shells of unit `i`, indexed by `r - 1`.
    pub fn shells_of(&self, i: usize) -> &[Vec<usize>] {
        &self.shells[i]
    }

    /// Union of all shells of unit `i`, sorted.
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.shells[i].iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Size of `shell(i, r) ∩ other.shell(i, s)`.
    pub fn intersection_size(&self, other: &Self, i: usize, r: usize, s: usize) -> usize {
        let (a, b) = (self.shell(i, r), other.shell(i, s));
        let (mut x, mut y, mut count) = (0, 0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        count
    }

    /// Re-checks the invariants. Constructed values always pass; this exists
    /// for symmetry with [`validate_shells`] on raw input.
    pub fn validate(&self) -> Vec<Violation> {
        validate_shells(self.n, self.radius, &self.shells)
    }

    /// Errors unless `other` has the same unit count and radius.
    pub fn check_paired(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.radius != other.radius {
            return Err(Error::DimensionMismatch(format!(
                "structures have (n, R) = ({}, {}) and ({}, {})",
                self.n, self.radius, other.n, other.radius
            )));
        }
        Ok(())
    }

    pub fn apply(&self, transform: &MisspecTransform) -> Result<Self> {
        apply_misspec(self, transform)
    }

    /// Writes the dump format: a `# units N radius R` header, then one
    /// `i r id1,id2,...` line per unit and radius.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# units {} radius {}", self.n, self.radius)?;
        for (i, unit_shells) in self.shells.iter().enumerate() {
            for (k, shell) in unit_shells.iter().enumerate() {
                if shell.is_empty() {
                    writeln!(w, "{} {}", i, k + 1)?;
                } else {
                    let members: Vec<String> = shell.iter().map(|j| j.to_string()).collect();
                    writeln!(w, "{} {} {}", i, k + 1, members.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_dump_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ASCII")
    }

    /// Reads the dump format. Without a header, `n` and `R` are the largest
    /// unit id plus one and the largest radius seen.
    pub fn read_dump<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut rows: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if let ["units", n, "radius", r] = toks.as_slice() {
                    header = Some((parse_usize(n, lineno)?, parse_usize(r, lineno)?));
                }
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() < 2 || toks.len() > 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `i r [ids]`, got {trimmed:?}"),
                });
            }
            let i = parse_usize(toks[0], lineno)?;
            let r = parse_usize(toks[1], lineno)?;
            if r == 0 {
                return Err(Error::Parse { line: lineno, message: "radius must be >= 1".into() });
            }
            let members = match toks.get(2) {
                Some(list) => list
                    .split(',')
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_usize(t, lineno))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            rows.push((i, r, members));
        }
        let (n, radius) = match header {
            Some(h) => h,
            None => (
                rows.iter().map(|row| row.0 + 1).max().unwrap_or(0),
                rows.iter().map(|row| row.1).max().unwrap_or(0),
            ),
        };
        let mut shells = vec![vec![Vec::new(); radius]; n];
        for (i, r, members) in rows {
            if i >= n || r > radius {
                return Err(Error::InvalidParameter(format!(
                    "dump line for unit {i}, radius {r} lies outside n = {n}, R = {radius}"
                )));
            }
            shells[i][r - 1].extend(members);
        }
        Self::new(n, radius, shells)
    }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("not a unit id: {tok:?}") })
}

/// Cycle of `n` units; shell `r` of unit `i` is `{i - r, i + r} mod n`.
pub fn ring_structure(n: usize, radius: usize) -> Result<InterferenceStructure> {
    if radius == 0 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    if n <= 2 * radius {
        return Err(Error::InvalidParameter(format!(
            "ring needs n > 2R, got n = {n}, R = {radius}"
        )));
    }
    let shells = (0..n)
        .map(|i| (1..=radius).map(|r| vec![(i + n - r) % n, (i + r) % n]).collect())
        .collect();
    InterferenceStructure::new(n, radius, shells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMetric {
    Manhattan,
    Chebyshev,
}

impl GridMetric {
    fn distance(self, a: (usize, usize), b: (usize, usize)) -> usize {
        let dx = a.0.abs_diff(b.0);
        let dy = a.1.abs_diff(b.1);
        match self {
            GridMetric::Manhattan => dx + dy,
            GridMetric::Chebyshev => dx.max(dy),
        }
    }
}

impl std::str::FromStr for GridMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manhattan" => Ok(GridMetric::Manhattan),
            "chebyshev" => Ok(GridMetric::Chebyshev),
            other => Err(Error::InvalidParameter(format!("unknown grid metric {other:?}"))),
        }
    }
}

/// Rectangular lattice without wraparound. Unit `y * width + x` sits at `(x, y)`.
pub fn grid_structure(
    width: usize,
    height: usize,
    radius: usize,
    metric: GridMetric,
) -> Result<InterferenceStructure> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
    }
    let n = width * height;
    let coord = |id: usize| (id % width, id / width);
    let mut shells = vec![vec![Vec::new(); radius]; n];
    for (i, unit_shells) in shells.iter_mut().enumerate() {
        let (cx, cy) = coord(i);
        let x_range = cx.saturating_sub(radius)..=(cx + radius).min(width - 1);
        for y in cy.saturating_sub(radius)..=(cy + radius).min(height - 1) {
            for x in x_range.clone() {
                let d = metric.distance((cx, cy), (x, y));
                if d >= 1 && d <= radius {
                    unit_shells[d - 1].push(y * width + x);
                }
            }
        }
    }
    InterferenceStructure::new(n, radius, shells)
}

/// Undirected simple graph over units `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeList {
    /// Self-loops are dropped and duplicates (in either orientation) collapsed.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) references a unit outside 0..{n}"
                )));
            }
            if a != b {
                out.push((a.min(b), a.max(b)));
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parses the edge-list text format: one edge per line, two
    /// whitespace-separated ids, `#` lines ignored.
    ///
    /// When every id is a nonnegative integer the ids are kept; `units`
    /// overrides the inferred count (largest id + 1). Otherwise ids are
    /// treated as labels and relabeled `0..n` in order of first appearance;
    /// the returned label map gives the original label of each dense id.
    pub fn parse(text: &str, units: Option<usize>) -> Result<(Self, Option<Vec<String>>)> {
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected two ids, got {trimmed:?}"),
                });
            }
            pairs.push((toks[0], toks[1]));
        }
        let numeric: Option<Vec<(usize, usize)>> = pairs
            .iter()
            .map(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .collect();
        match numeric {
            Some(edges) => {
                let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
                let n = units.unwrap_or(inferred);
                Ok((Self::new(n, edges)?, None))
            }
            None => {
                let mut ids: HashMap<&str, usize> = HashMap::new();
                let mut labels: Vec<String> = Vec::new();
                let mut edges = Vec::with_capacity(pairs.len());
                for &(a, b) in &pairs {
                    let mut ends = [0; 2];
                    for (slot, label) in ends.iter_mut().zip([a, b]) {
                        *slot = *ids.entry(label).or_insert_with(|| {
                            labels.push(label.to_string());
                            labels.len() - 1
                        });
                    }
                    edges.push((ends[0], ends[1]));
                }
                let n = labels.len().max(units.unwrap_or(0));
                Ok((Self::new(n, edges)?, Some(labels)))
            }
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Shells by shortest-path distance: shell `r` of `i` holds the vertices at
/// graph distance exactly `r`. Shells past the eccentricity of `i` are empty.
pub fn bfs_shells(graph: &EdgeList, radius: usize) -> Result<InterferenceStructure> {
    if radius == 0 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    let n = graph.n;
    let adj = graph.adjacency();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut shells = Vec::with_capacity(n);
    for root in 0..n {
        let mut unit_shells = vec![Vec::new(); radius];
        let mut touched = vec![root];
        dist[root] = 0;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            if dist[v] == radius {
                continue;
            }
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    unit_shells[dist[w] - 1].push(w);
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        for v in touched {
            dist[v] = usize::MAX;
        }
        shells.push(unit_shells);
    }
    InterferenceStructure::new(n, radius, shells)
}

/// Ways to derive an assumed structure from a true one.
#[derive(Debug, Clone, PartialEq)]
pub enum MisspecTransform {
    /// Reverses the shell order, `r -> R + 1 - r`. For `R = 2` this exchanges
    /// shells 1 and 2.
    ShellSwap,
    /// Assumed shell `r` is true shell `r + offset`, empty when out of range.
    RadiusShift { offset: i64 },
    /// Each membership is moved, with probability `fraction`, to a uniformly
    /// drawn unit that is not yet in any shell of the same unit.
    EdgeRewire { fraction: f64, seed: u64 },
    /// Each membership is kept independently with probability `keep`.
    SubsetSample { keep: f64, seed: u64 },
    /// Ignores the input and returns this structure.
    ReplaceWith(InterferenceStructure),
}

impl MisspecTransform {
    /// Short name used in reports and CLI arguments.
    pub fn kind(&self) -> &'static str {
        match self {
            MisspecTransform::ShellSwap => "shell_swap",
            MisspecTransform::RadiusShift { .. } => "radius_shift",
            MisspecTransform::EdgeRewire { .. } => "edge_rewire",
            MisspecTransform::SubsetSample { .. } => "subset_sample",
            MisspecTransform::ReplaceWith(_) => "replace_with",
        }
    }
}

/// Returns the assumed structure that `transform` derives from `truth`. The
/// output has the same `n` and `R` and satisfies every invariant.
pub fn apply_misspec(
    truth: &InterferenceStructure,
    transform: &MisspecTransform,
) -> Result<InterferenceStructure> {
    let (n, radius) = (truth.n, truth.radius);
    let shells = match transform {
        MisspecTransform::ShellSwap => truth
            .shells
            .iter()
            .map(|unit_shells| unit_shells.iter().rev().cloned().collect())
            .collect(),
        &MisspecTransform::RadiusShift { offset } => truth
            .shells
            .iter()
            .map(|unit_shells| {
                (1..=radius as i64)
                    .map(|r| {
                        let src = r + offset;
                        if src >= 1 && src <= radius as i64 {
                            unit_shells[(src - 1) as usize].clone()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect(),
        &MisspecTransform::EdgeRewire { fraction, seed } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidParameter(format!(
                    "rewire fraction must lie in [0, 1], got {fraction}"
                )));
            }
            rewire(truth, fraction, seed)?
        }
        &MisspecTransform::SubsetSample { keep, seed } => {
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "keep fraction must lie in (0, 1], got {keep}"
                )));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            truth
                .shells
                .iter()
                .map(|unit_shells| {
                    unit_shells
                        .iter()
                        .map(|shell| {
                            shell.iter().copied().filter(|_| rng.gen::<f64>() < keep).collect()
                        })
                        .collect()
                })
                .collect()
        }
        MisspecTransform::ReplaceWith(other) => {
            truth.check_paired(other)?;
            return Ok(other.clone());
        }
    };
    InterferenceStructure::new(n, radius, shells)
}

fn rewire(truth: &InterferenceStructure, fraction: f64, seed: u64) -> Result<Vec<Vec<Vec<usize>>>> {
    let n = truth.n;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = truth.shells.clone();
    for (i, unit_shells) in out.iter_mut().enumerate() {
        let mut taken = vec![false; n];
        taken[i] = true;
        for &j in unit_shells.iter().flatten() {
            taken[j] = true;
        }
        for shell in unit_shells.iter_mut() {
            for slot in shell.iter_mut() {
                if rng.gen::<f64>() >= fraction {
                    continue;
                }
                let free: Vec<usize> = (0..n).filter(|&u| !taken[u]).collect();
                if free.is_empty() {
                    return Err(Error::Transform(format!(
                        "edge_rewire: unit {i} has no unit left outside its shells"
                    )));
                }
                let target = free[rng.gen_range(0..free.len())];
                taken[*slot] = false;
                taken[target] = true;
                *slot = target;
            }
        }
    }
    Ok(out)
}
