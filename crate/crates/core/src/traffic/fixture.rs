//! Named test graphs on disk, with claims about their kernel tuples that can be
//! rechecked, plus the batch checks run on a fixture.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::kernel::{
    admissible_tuples, analyze_unchecked, is_admissible, t_pi_c, MultiPartition,
};
use super::moments::gamma_empirical;
use super::{ColoredDigraph, LoopedTestGraph, TestGraph};
use crate::combinatorics::Partition;
use crate::error::{saturating_pow, Error, GuardKind, Guards, Result};
use crate::model::{build_string_assignment, ColorGraph, ModelFile, StringAssignment};
use crate::tensor::{stream_rng, MatrixFile, MultiIndexSpace, Permutation, StructuredMatrix};

/// A partition written as blocks of vertex names.
pub type NamedBlocks = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Claim {
    /// The string components `ρ_s`.
    Rho { string: String, blocks: NamedBlocks },
    /// Whether the graph of colored components of one string is a tree.
    GccTree {
        pi: Vec<NamedBlocks>,
        string: String,
        tree: bool,
    },
    /// The growth exponent of a tuple (a rational such as `"-3/2"`) and whether all its
    /// graphs of colored components are trees.
    GrowthExponent {
        pi: Vec<NamedBlocks>,
        value: String,
        all_trees: bool,
    },
    /// The color quotient `T_{π,c}`: its vertex blocks and the names of its edges.
    TPiC {
        pi: Vec<NamedBlocks>,
        color: String,
        vertices: NamedBlocks,
        edges: Vec<String>,
    },
}

impl Claim {
    pub fn check_name(&self) -> &'static str {
        match self {
            Claim::Rho { .. } => "string-components",
            Claim::GccTree { .. } => "gcc-tree",
            Claim::GrowthExponent { .. } => "growth-exponent-equality",
            Claim::TPiC { .. } => "color-quotient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

impl ClaimOutcome {
    fn new(check: &str, passed: bool, detail: String) -> Self {
        ClaimOutcome {
            check: check.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub n: usize,
    pub passed: bool,
    pub outcomes: Vec<ClaimOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficFixture {
    pub model: ModelFile,
    pub vertices: Vec<String>,
    /// `[source, target, color]`.
    pub edges: Vec<[String; 3]>,
    /// Defaults to `X1, X2, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_names: Option<Vec<String>>,
    /// One matrix per edge; random permutations are drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<MatrixFile>>,
    #[serde(default)]
    pub claims: Vec<Claim>,
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn named(blocks: &[&[&str]]) -> NamedBlocks {
    blocks.iter().map(|b| names(b)).collect()
}

impl TrafficFixture {
    /// Three colors `B, G, R` where only `B` and `R` commute, three strings, and a
    /// six-vertex, eight-edge test graph, with claims for its string components and two
    /// kernel tuples.
    pub fn worked_example() -> Self {
        let model = ModelFile {
            colors: names(&["B", "G", "R"]),
            edges: vec![["B".into(), "R".into()]],
            strings: Some(names(&["1", "2", "3"])),
            incidence: Some(
                [("1", "B"), ("2", "B"), ("2", "G"), ("3", "G"), ("3", "R")]
                    .iter()
                    .map(|(s, c)| [s.to_string(), c.to_string()])
                    .collect(),
            ),
        };
        let edges = [
            ("1", "2", "R"),
            ("2", "3", "G"),
            ("2", "3", "B"),
            ("3", "4", "B"),
            ("3", "5", "G"),
            ("4", "1", "G"),
            ("4", "5", "G"),
            ("5", "6", "B"),
        ]
        .iter()
        .map(|(s, t, c)| [s.to_string(), t.to_string(), c.to_string()])
        .collect();
        let rho = vec![
            named(&[&["1", "2", "3", "4", "5"], &["6"]]),
            named(&[&["1", "2"], &["3"], &["4"], &["5"], &["6"]]),
            named(&[&["1"], &["2", "3", "4"], &["5", "6"]]),
        ];
        let sigma = vec![
            named(&[&["1", "2", "3", "4", "5"], &["6"]]),
            named(&[&["1", "2", "3", "4"], &["5"], &["6"]]),
            named(&[&["1", "2", "3", "4"], &["5", "6"]]),
        ];
        let mut claims: Vec<Claim> = ["1", "2", "3"]
            .iter()
            .zip(&rho)
            .map(|(s, b)| Claim::Rho {
                string: s.to_string(),
                blocks: b.clone(),
            })
            .collect();
        claims.push(Claim::TPiC {
            pi: rho.clone(),
            color: "B".into(),
            vertices: named(&[&["1", "2"], &["3"], &["4"], &["5"], &["6"]]),
            edges: names(&["X3", "X4", "X8"]),
        });
        for s in ["1", "2", "3"] {
            claims.push(Claim::GccTree {
                pi: rho.clone(),
                string: s.into(),
                tree: false,
            });
        }
        for s in ["1", "2", "3"] {
            claims.push(Claim::GccTree {
                pi: sigma.clone(),
                string: s.into(),
                tree: true,
            });
        }
        claims.push(Claim::GrowthExponent {
            pi: rho,
            value: "-8".into(),
            all_trees: false,
        });
        claims.push(Claim::GrowthExponent {
            pi: sigma,
            value: "0".into(),
            all_trees: true,
        });
        TrafficFixture {
            model,
            vertices: names(&["1", "2", "3", "4", "5", "6"]),
            edges,
            edge_names: Some((1..=8).map(|i| format!("X{i}")).collect()),
            labels: None,
            claims,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("fixture: {e}")))
    }

    pub fn edge_names(&self) -> Vec<String> {
        self.edge_names
            .clone()
            .unwrap_or_else(|| (1..=self.edges.len()).map(|i| format!("X{i}")).collect())
    }

    /// The color graph and the assignment in the file, or the canonical one if absent.
    pub fn model(&self) -> Result<(ColorGraph, StringAssignment)> {
        let g = self.model.color_graph()?;
        let a = match self.model.assignment()? {
            Some(a) => a,
            None => build_string_assignment(&g),
        };
        Ok((g, a))
    }

    pub fn shape(&self) -> Result<ColoredDigraph> {
        let g = self.model.color_graph()?;
        let vidx = self.vertex_index()?;
        let edges = self
            .edges
            .iter()
            .map(|[s, t, c]| {
                let color = g
                    .index_of(c)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown color '{c}'")))?;
                Ok((vertex(&vidx, s)?, vertex(&vidx, t)?, color))
            })
            .collect::<Result<Vec<_>>>()?;
        ColoredDigraph::from_edges(self.vertices.len(), &edges)
    }

    fn vertex_index(&self) -> Result<HashMap<&str, usize>> {
        let mut idx = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if idx.insert(v.as_str(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vertex '{v}'")));
            }
        }
        Ok(idx)
    }

    fn partition(&self, blocks: &NamedBlocks) -> Result<Partition> {
        let vidx = self.vertex_index()?;
        let blocks = blocks
            .iter()
            .map(|b| b.iter().map(|v| vertex(&vidx, v)).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Partition::from_blocks(self.vertices.len(), &blocks)
    }

    fn tuple(&self, pi: &[NamedBlocks]) -> Result<MultiPartition> {
        MultiPartition::new(pi.iter().map(|b| self.partition(b)).collect::<Result<_>>()?)
    }

    fn named_blocks(&self, p: &Partition) -> NamedBlocks {
        p.blocks()
            .iter()
            .map(|b| b.iter().map(|&v| self.vertices[v].clone()).collect())
            .collect()
    }

    fn named_tuple(&self, pi: &MultiPartition) -> String {
        let parts: Vec<String> = pi
            .parts()
            .iter()
            .map(|p| {
                let blocks: Vec<String> = self
                    .named_blocks(p)
                    .iter()
                    .map(|b| format!("{{{}}}", b.join(",")))
                    .collect();
                format!("{{{}}}", blocks.join(","))
            })
            .collect();
        format!("({})", parts.join("; "))
    }

    /// Rechecks one claim. Input errors (unknown names, malformed partitions) are errors;
    /// a false claim is a failed outcome.
    pub fn check_claim(&self, claim: &Claim) -> Result<ClaimOutcome> {
        let (_, a) = self.model()?;
        let t = self.shape()?;
        let string = |name: &str| {
            a.string_names()
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown string '{name}'")))
        };
        let check = claim.check_name();
        let admissible = |pi: &MultiPartition| -> Result<()> {
            if is_admissible(&t, pi, &a)? {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "claimed tuple {pi} does not dominate the string components"
                )))
            }
        };
        Ok(match claim {
            Claim::Rho { string: s, blocks } => {
                let s = string(s)?;
                let expected = self.partition(blocks)?;
                let got = super::kernel::rho(&t, &a, s)?;
                ClaimOutcome::new(
                    check,
                    got == expected,
                    format!("string {}: {:?}", a.string_names()[s], self.named_blocks(&got)),
                )
            }
            Claim::GccTree { pi, string: s, tree } => {
                let s = string(s)?;
                let pi = self.tuple(pi)?;
                admissible(&pi)?;
                let got = analyze_unchecked(&t, &pi, &a)?.gcc(s).is_tree();
                ClaimOutcome::new(
                    check,
                    got == *tree,
                    format!(
                        "string {} under {}: tree = {got}",
                        a.string_names()[s],
                        self.named_tuple(&pi)
                    ),
                )
            }
            Claim::GrowthExponent { pi, value, all_trees } => {
                let claimed: Ratio<i64> = value
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad rational '{value}'")))?;
                let pi = self.tuple(pi)?;
                admissible(&pi)?;
                let an = analyze_unchecked(&t, &pi, &a)?;
                let got = an.exponent().total;
                let trees = an.all_trees();
                // A claim of a zero exponent with a non-tree graph contradicts the
                // equality case even before it is compared with the computation.
                let consistent = (claimed == Ratio::from_integer(0)) == *all_trees
                    || !t.graph().is_two_edge_connected();
                ClaimOutcome::new(
                    check,
                    consistent && got == claimed && trees == *all_trees,
                    format!("{}: exponent {got}, all trees = {trees}", self.named_tuple(&pi)),
                )
            }
            Claim::TPiC { pi, color, vertices, edges } => {
                let c = a
                    .color_names()
                    .iter()
                    .position(|x| x == color)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown color '{color}'")))?;
                let pi = self.tuple(pi)?;
                admissible(&pi)?;
                let (_, ids) = t_pi_c(&t, &pi, &a, c)?;
                let omega = super::kernel::omega(&pi, &a, c)?;
                let names = self.edge_names();
                let got_edges: Vec<String> = ids.iter().map(|&e| names[e].clone()).collect();
                let mut want_edges = edges.clone();
                want_edges.sort();
                let mut sorted = got_edges.clone();
                sorted.sort();
                let ok = omega == self.partition(vertices)? && sorted == want_edges;
                ClaimOutcome::new(
                    check,
                    ok,
                    format!(
                        "color {color}: vertices {:?}, edges {:?}",
                        self.named_blocks(&omega),
                        got_edges
                    ),
                )
            }
        })
    }

    /// Rechecks every claim, then runs the exhaustive checks over all admissible tuples and
    /// the kernel decomposition of the trace at side `n`.
    pub fn run_checks(&self, n: usize, seed: u64, guards: &Guards) -> Result<TrafficReport> {
        let (_, a) = self.model()?;
        let t = self.shape()?;
        t.check_colors(&a)?;
        let strings = a.string_count();
        guards.check(
            GuardKind::Maps,
            saturating_pow(n as u128, t.vertex_count() * strings),
        )?;
        guards.check(GuardKind::Dense, saturating_pow(n as u128, strings))?;
        let mut outcomes = self
            .claims
            .iter()
            .map(|c| self.check_claim(c))
            .collect::<Result<Vec<_>>>()?;
        let tuples = admissible_tuples(&t, &a, guards)?;
        outcomes.push(self.exponent_suite(&t, &a, &tuples)?);
        outcomes.push(self.decomposition_check(&t, &a, &tuples, n, seed, guards)?);
        Ok(TrafficReport {
            n,
            passed: outcomes.iter().all(|o| o.passed),
            outcomes,
        })
    }

    fn exponent_suite(
        &self,
        t: &ColoredDigraph,
        a: &StringAssignment,
        tuples: &[MultiPartition],
    ) -> Result<ClaimOutcome> {
        const NAME: &str = "growth-exponent-equality";
        if !t.graph().is_two_edge_connected() {
            return Ok(ClaimOutcome::new(
                NAME,
                true,
                format!("bound not applicable: not two-edge connected; {} tuples", tuples.len()),
            ));
        }
        let zero = Ratio::from_integer(0);
        let mut equal = 0usize;
        for pi in tuples {
            let an = analyze_unchecked(t, pi, a)?;
            let e = an.exponent().total;
            let trees = an.all_trees();
            let ok = e <= zero
                && (e == zero) == trees
                && (!trees || (an.leaves_match_components() && an.tree_maps_injective()));
            if !ok {
                return Ok(ClaimOutcome::new(
                    NAME,
                    false,
                    format!("{pi}: exponent {e}, all trees = {trees}"),
                ));
            }
            equal += usize::from(trees);
        }
        Ok(ClaimOutcome::new(
            NAME,
            true,
            format!("{} tuples, {equal} with equality", tuples.len()),
        ))
    }

    fn decomposition_check(
        &self,
        t: &ColoredDigraph,
        a: &StringAssignment,
        tuples: &[MultiPartition],
        n: usize,
        seed: u64,
        guards: &Guards,
    ) -> Result<ClaimOutcome> {
        const NAME: &str = "kernel-decomposition";
        let labels = match &self.labels {
            Some(files) => files
                .iter()
                .map(|f| {
                    if f.n != n {
                        return Err(Error::InvalidInput(format!(
                            "fixture labels have side {}, checks requested at {n}",
                            f.n
                        )));
                    }
                    f.to_structured::<f64>()
                })
                .collect::<Result<Vec<_>>>()?,
            None => {
                let mut rng = stream_rng(seed, &[0]);
                (0..t.edge_count())
                    .map(|e| {
                        let sup = a.strings_of(t.color(e)).to_vec();
                        let d = MultiIndexSpace::new(sup.clone(), n).dim();
                        StructuredMatrix::from_permutation(sup, n, Permutation::sample(d, &mut rng)?)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let tg = LoopedTestGraph::with_identity_loops(TestGraph::new(t.clone(), n, labels)?, a.string_count());
        let mut rng = stream_rng(seed, &[1]);
        let sigmas = (0..a.color_count())
            .map(|c| Permutation::sample(MultiIndexSpace::new(a.strings_of(c).to_vec(), n).dim(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let tau = tg.full_labeled(a, &sigmas, guards)?.trace(guards)?;
        let mut sum = 0.0;
        for pi in tuples {
            sum += gamma_empirical(&tg, pi, a, &sigmas, guards)?;
        }
        let ok = (sum - tau).abs() <= 1e-9 * (1.0 + tau.abs());
        Ok(ClaimOutcome::new(
            NAME,
            ok,
            format!("trace {tau}, sum over admissible tuples {sum}"),
        ))
    }
}

fn vertex(idx: &HashMap<&str, usize>, name: &str) -> Result<usize> {
    idx.get(name)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("unknown vertex '{name}'")))
}
