//! Color graphs, string assignments and reduced color words.
//!
//! Colors and strings are dense indices; names are kept only for I/O.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simple undirected graph on colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorGraph {
    names: Vec<String>,
    adj: Vec<Vec<bool>>,
}

impl ColorGraph {
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate color '{name}'")));
            }
        }
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidInput(format!(
                    "self-loop at color '{}'",
                    names[a]
                )));
            }
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Ok(ColorGraph { names, adj })
    }

    /// Colors named `c0, c1, ...`.
    pub fn with_indices(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new((0..n).map(|i| format!("c{i}")).collect(), edges)
    }

    pub fn edgeless(n: usize) -> Self {
        Self::with_indices(n, &[]).expect("valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Self::with_indices(n, &edges).expect("valid")
    }

    /// All `2^(n choose 2)` graphs on `n` indexed colors; bit `k` of the code selects the
    /// `k`-th pair in lexicographic order.
    pub fn all_on(n: usize) -> impl Iterator<Item = ColorGraph> {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        (0u64..1 << pairs.len()).map(move |code| {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| code >> k & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            ColorGraph::with_indices(n, &edges).expect("valid")
        })
    }

    pub fn color_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, c: usize) -> &str {
        &self.names[c]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Adjacency; a color is never adjacent to itself.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a][b]
    }

    /// Edges `(a, b)` with `a < b`, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.color_count();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adj[a][b])
            .collect()
    }
}

/// Strings, colors and the incidence relation between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringAssignment {
    string_names: Vec<String>,
    color_names: Vec<String>,
    strings_of: Vec<Vec<usize>>,
    colors_of: Vec<Vec<usize>>,
}

impl StringAssignment {
    /// `incidence` lists `(string, color)` pairs; duplicates are ignored.
    pub fn new(
        string_names: Vec<String>,
        color_names: Vec<String>,
        incidence: &[(usize, usize)],
    ) -> Result<Self> {
        let (ns, nc) = (string_names.len(), color_names.len());
        let mut strings_of = vec![Vec::new(); nc];
        let mut colors_of = vec![Vec::new(); ns];
        for &(s, c) in incidence {
            if s >= ns || c >= nc {
                return Err(Error::InvalidInput(format!(
                    "incidence ({s},{c}) out of range"
                )));
            }
            if !strings_of[c].contains(&s) {
                strings_of[c].push(s);
                colors_of[s].push(c);
            }
        }
        strings_of.iter_mut().for_each(|v| v.sort_unstable());
        colors_of.iter_mut().for_each(|v| v.sort_unstable());
        Ok(StringAssignment {
            string_names,
            color_names,
            strings_of,
            colors_of,
        })
    }

    /// Strings and colors given by index: `sets[c]` lists the strings of color `c`.
    pub fn from_color_sets(string_count: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let incidence: Vec<_> = sets
            .iter()
            .enumerate()
            .flat_map(|(c, ss)| ss.iter().map(move |&s| (s, c)))
            .collect();
        Self::new(
            (0..string_count).map(|s| format!("s{s}")).collect(),
            (0..sets.len()).map(|c| format!("c{c}")).collect(),
            &incidence,
        )
    }

    pub fn string_count(&self) -> usize {
        self.string_names.len()
    }

    pub fn color_count(&self) -> usize {
        self.color_names.len()
    }

    pub fn string_names(&self) -> &[String] {
        &self.string_names
    }

    pub fn color_names(&self) -> &[String] {
        &self.color_names
    }

    /// Strings incident to color `c`, ascending.
    pub fn strings_of(&self, c: usize) -> &[usize] {
        &self.strings_of[c]
    }

    /// Colors incident to string `s`, ascending.
    pub fn colors_of(&self, s: usize) -> &[usize] {
        &self.colors_of[s]
    }

    pub fn incident(&self, s: usize, c: usize) -> bool {
        self.strings_of[c].binary_search(&s).is_ok()
    }

    /// `(string, color)` pairs, ordered by color then string.
    pub fn incidence(&self) -> Vec<(usize, usize)> {
        self.strings_of
            .iter()
            .enumerate()
            .flat_map(|(c, ss)| ss.iter().map(move |&s| (s, c)))
            .collect()
    }

    /// Whether the string sets of two colors are disjoint.
    pub fn disjoint(&self, a: usize, b: usize) -> bool {
        !self.strings_of[a]
            .iter()
            .any(|s| self.strings_of[b].binary_search(s).is_ok())
    }
}

/// One string per non-adjacent color pair, shared by both colors, plus a private string
/// for each color adjacent to every other color.
///
/// Strings are named `s_ab` by the color pair in declaration order (`s_a_b` when some
/// color name is longer than one character) and `s_a` for private strings.
pub fn build_string_assignment(g: &ColorGraph) -> StringAssignment {
    let n = g.color_count();
    let sep = if g.names().iter().all(|c| c.chars().count() == 1) {
        ""
    } else {
        "_"
    };
    let mut names = Vec::new();
    let mut incidence = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !g.adjacent(a, b) {
                let s = names.len();
                names.push(format!("s_{}{sep}{}", g.name(a), g.name(b)));
                incidence.push((s, a));
                incidence.push((s, b));
            }
        }
    }
    for a in 0..n {
        if (0..n).all(|b| b == a || g.adjacent(a, b)) {
            let s = names.len();
            names.push(format!("s_{}", g.name(a)));
            incidence.push((s, a));
        }
    }
    StringAssignment::new(names, g.names().to_vec(), &incidence).expect("indices in range")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A color with no strings.
    EmptyColor { color: String },
    /// Adjacent colors that share a string.
    AdjacentShareString { a: String, b: String },
    /// Non-adjacent colors with disjoint strings.
    NonAdjacentDisjoint { a: String, b: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyColor { color } => write!(f, "color {color} has no strings"),
            Violation::AdjacentShareString { a, b } => {
                write!(f, "adjacent colors ({a},{b}) share a string")
            }
            Violation::NonAdjacentDisjoint { a, b } => {
                write!(f, "non-adjacent colors ({a},{b}) have disjoint strings")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssignmentReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

/// Checks that every color has a string and that two distinct colors have disjoint
/// strings exactly when they are adjacent.
pub fn validate_assignment(g: &ColorGraph, a: &StringAssignment) -> Result<AssignmentReport> {
    if g.names() != a.color_names() {
        return Err(Error::InvalidInput(format!(
            "color sets differ: graph {:?}, assignment {:?}",
            g.names(),
            a.color_names()
        )));
    }
    let n = g.color_count();
    let mut violations = Vec::new();
    for c in 0..n {
        if a.strings_of(c).is_empty() {
            violations.push(Violation::EmptyColor {
                color: g.name(c).to_string(),
            });
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            let (xa, ya) = (g.name(x).to_string(), g.name(y).to_string());
            match (g.adjacent(x, y), a.disjoint(x, y)) {
                (true, false) => violations.push(Violation::AdjacentShareString { a: xa, b: ya }),
                (false, true) => violations.push(Violation::NonAdjacentDisjoint { a: xa, b: ya }),
                _ => {}
            }
        }
    }
    Ok(AssignmentReport {
        valid: violations.is_empty(),
        violations,
    })
}

/// A color word `χ : [k] -> C` with optional per-letter lengths `ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorWord {
    pub colors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<usize>>,
}

impl ColorWord {
    pub fn new(colors: Vec<usize>) -> Self {
        ColorWord {
            colors,
            lengths: None,
        }
    }

    pub fn with_lengths(colors: Vec<usize>, lengths: Vec<usize>) -> Result<Self> {
        if colors.len() != lengths.len() {
            return Err(Error::SizeMismatch(format!(
                "{} colors, {} lengths",
                colors.len(),
                lengths.len()
            )));
        }
        Ok(ColorWord {
            colors,
            lengths: Some(lengths),
        })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

/// True iff between any two equal letters there is a letter whose color is not adjacent
/// to theirs. An equal color in between counts as non-adjacent.
pub fn is_g_reduced(w: &ColorWord, g: &ColorGraph) -> bool {
    let chi = &w.colors;
    (0..chi.len()).all(|i| {
        let mut separated = false;
        for &c in &chi[i + 1..] {
            if c == chi[i] && !separated {
                return false;
            }
            separated |= !g.adjacent(chi[i], c);
        }
        true
    })
}

/// On-disk form of a color graph with an optional assignment, referring to colors and
/// strings by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    pub colors: Vec<String>,
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strings: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence: Option<Vec<[String; 2]>>,
}

impl ModelFile {
    pub fn from_model(g: &ColorGraph, a: Option<&StringAssignment>) -> Self {
        ModelFile {
            colors: g.names().to_vec(),
            edges: g
                .edges()
                .into_iter()
                .map(|(x, y)| [g.name(x).to_string(), g.name(y).to_string()])
                .collect(),
            strings: a.map(|a| a.string_names().to_vec()),
            incidence: a.map(|a| {
                a.incidence()
                    .into_iter()
                    .map(|(s, c)| [a.string_names()[s].clone(), a.color_names()[c].clone()])
                    .collect()
            }),
        }
    }

    pub fn color_graph(&self) -> Result<ColorGraph> {
        let idx = name_index(&self.colors, "color")?;
        let edges = self
            .edges
            .iter()
            .map(|[a, b]| Ok((lookup(&idx, a, "color")?, lookup(&idx, b, "color")?)))
            .collect::<Result<Vec<_>>>()?;
        ColorGraph::new(self.colors.clone(), &edges)
    }

    /// The assignment, if the file carries one.
    pub fn assignment(&self) -> Result<Option<StringAssignment>> {
        let (Some(strings), Some(incidence)) = (&self.strings, &self.incidence) else {
            if self.strings.is_some() || self.incidence.is_some() {
                return Err(Error::InvalidInput(
                    "'strings' and 'incidence' must be given together".into(),
                ));
            }
            return Ok(None);
        };
        let sidx = name_index(strings, "string")?;
        let cidx = name_index(&self.colors, "color")?;
        let pairs = incidence
            .iter()
            .map(|[s, c]| Ok((lookup(&sidx, s, "string")?, lookup(&cidx, c, "color")?)))
            .collect::<Result<Vec<_>>>()?;
        StringAssignment::new(strings.clone(), self.colors.clone(), &pairs).map(Some)
    }
}

fn name_index<'a>(names: &'a [String], what: &str) -> Result<HashMap<&'a str, usize>> {
    let mut idx = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if idx.insert(n.as_str(), i).is_some() {
            return Err(Error::InvalidInput(format!("duplicate {what} '{n}'")));
        }
    }
    Ok(idx)
}

fn lookup(idx: &HashMap<&str, usize>, name: &str, what: &str) -> Result<usize> {
    idx.get(name)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("unknown {what} '{name}'")))
}
