//! Permutation approximations of vertex groups and of their graph products, the graph
//! product word problem, and exact trace certificates.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{saturating_pow, Error, GuardKind, Guards, Result};
use crate::model::{validate_assignment, ColorGraph, StringAssignment};
use crate::tensor::{perm_word_trace, stream_rng, LocalPermutation, MultiIndexSpace, Permutation};

/// A finite group by its multiplication table, with a list of generators.
/// `table[a][b]` is the product `ab`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupTableFile", into = "GroupTableFile")]
pub struct FiniteGroupTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupTableFile {
    order: usize,
    table: Vec<Vec<usize>>,
    #[serde(default)]
    generators: Vec<usize>,
}

impl TryFrom<GroupTableFile> for FiniteGroupTable {
    type Error = Error;
    fn try_from(f: GroupTableFile) -> Result<Self> {
        if f.table.len() != f.order {
            return Err(Error::InvalidInput(format!(
                "order {} with {} table rows",
                f.order,
                f.table.len()
            )));
        }
        FiniteGroupTable::new(f.table, f.generators)
    }
}

impl From<FiniteGroupTable> for GroupTableFile {
    fn from(g: FiniteGroupTable) -> Self {
        GroupTableFile {
            order: g.order(),
            table: g.table,
            generators: g.generators,
        }
    }
}

impl FiniteGroupTable {
    /// Validates closure, associativity, identity and inverses.
    pub fn new(table: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty group table".into()));
        }
        if table.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= n)) {
            return Err(Error::InvalidInput("table is not an n x n array over 0..n".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::InvalidInput("no identity element".into()))?;
        let inverse = (0..n)
            .map(|x| {
                (0..n)
                    .find(|&y| table[x][y] == identity && table[y][x] == identity)
                    .ok_or_else(|| Error::InvalidInput(format!("element {x} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidInput(format!(
                            "not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        if let Some(&g) = generators.iter().find(|&&g| g >= n) {
            return Err(Error::InvalidInput(format!("generator {g} outside the group")));
        }
        Ok(FiniteGroupTable {
            table,
            identity,
            inverse,
            generators,
        })
    }

    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        FiniteGroupTable::new(table, vec![1 % n]).expect("cyclic group")
    }

    /// Pairs `(a, b)` encoded as `a * |H| + b`; generators of both factors.
    pub fn direct_product(g: &Self, h: &Self) -> Self {
        let (m, n) = (g.order(), h.order());
        let table = (0..m * n)
            .map(|x| {
                (0..m * n)
                    .map(|y| g.mul(x / n, y / n) * n + h.mul(x % n, y % n))
                    .collect()
            })
            .collect();
        let generators = g
            .generators
            .iter()
            .map(|&a| a * n + h.identity)
            .chain(h.generators.iter().map(|&b| g.identity * n + b))
            .collect();
        FiniteGroupTable::new(table, generators).expect("product of groups")
    }

    pub fn klein_four() -> Self {
        Self::direct_product(&Self::cyclic(2), &Self::cyclic(2))
    }

    /// The group generated by the given permutations; element 0 is the identity and the
    /// generators are the given permutations.
    pub fn from_permutations(gens: &[Permutation]) -> Result<Self> {
        let Some(first) = gens.first() else {
            return Err(Error::InvalidInput("no generating permutations".into()));
        };
        let m = first.len();
        if gens.iter().any(|p| p.len() != m) {
            return Err(Error::SizeMismatch("generators act on different sets".into()));
        }
        let mut elems = vec![Permutation::identity(m)];
        let mut index = std::collections::HashMap::new();
        index.insert(elems[0].clone(), 0usize);
        let mut i = 0;
        while i < elems.len() {
            for g in gens {
                let p = g.compose(&elems[i])?;
                if !index.contains_key(&p) {
                    index.insert(p.clone(), elems.len());
                    elems.push(p);
                }
            }
            i += 1;
        }
        let table = elems
            .iter()
            .map(|a| elems.iter().map(|b| Ok(index[&a.compose(b)?])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        FiniteGroupTable::new(table, gens.iter().map(|g| index[g]).collect())
    }

    /// The symmetric group on three points, generated by a transposition and a 3-cycle.
    pub fn symmetric3() -> Self {
        let t = Permutation::new(vec![1, 0, 2]).expect("transposition");
        Self::from_permutations(&[t, Permutation::cycle(3)]).expect("S3")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// `g_j` for `j > 0`, `g_{-j}^{-1}` for `j < 0` (1-based).
    pub fn generator(&self, j: i64) -> Result<usize> {
        let k = j.unsigned_abs() as usize;
        if k == 0 || k > self.generators.len() {
            return Err(Error::InvalidInput(format!(
                "generator {j} outside ±1..±{}",
                self.generators.len()
            )));
        }
        let g = self.generators[k - 1];
        Ok(if j > 0 { g } else { self.inverse[g] })
    }

    /// Product of signed generators, left to right.
    pub fn evaluate(&self, word: &[i64]) -> Result<usize> {
        word.iter()
            .try_fold(self.identity, |acc, &j| Ok(self.mul(acc, self.generator(j)?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LeftRegular,
    CyclicShift,
    Padded,
}

/// Permutations `T_j` on `[N]` approximating generators `g_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRep {
    pub n: usize,
    pub generators: Vec<Permutation>,
    pub provenance: Provenance,
}

impl GeneratorRep {
    /// `T_j` for `j > 0`, `T_{-j}^{-1}` for `j < 0`.
    pub fn generator(&self, j: i64) -> Result<Permutation> {
        let k = j.unsigned_abs() as usize;
        if k == 0 || k > self.generators.len() {
            return Err(Error::InvalidInput(format!(
                "generator {j} outside ±1..±{}",
                self.generators.len()
            )));
        }
        let p = &self.generators[k - 1];
        Ok(if j > 0 { p.clone() } else { p.inverse() })
    }

    /// `tr_N(T_{j_1} ⋯ T_{j_m})` as an exact fraction.
    pub fn word_trace(&self, word: &[i64]) -> Result<BigRational> {
        let local: Vec<LocalPermutation> = self
            .generators
            .iter()
            .map(|p| LocalPermutation::new(vec![0], self.n, p.clone()))
            .collect::<Result<_>>()?;
        let letters = word
            .iter()
            .map(|&j| {
                let k = j.unsigned_abs() as usize;
                if k == 0 || k > local.len() {
                    return Err(Error::InvalidInput(format!("generator {j} out of range")));
                }
                Ok((&local[k - 1], j.signum() as i8))
            })
            .collect::<Result<Vec<_>>>()?;
        perm_word_trace(&letters, &MultiIndexSpace::full(1, self.n))
    }
}

/// `T_j = ` left multiplication by `g_j` on the group's elements. Word traces equal the
/// indicator of the word being trivial.
pub fn left_regular_rep(g: &FiniteGroupTable) -> GeneratorRep {
    let generators = g
        .generators()
        .iter()
        .map(|&s| Permutation::new((0..g.order()).map(|x| g.mul(s, x)).collect()).expect("row of a group table"))
        .collect();
    GeneratorRep {
        n: g.order(),
        generators,
        provenance: Provenance::LeftRegular,
    }
}

/// The cycle `0 → 1 → ⋯ → N-1 → 0` approximating the generator of the integers.
pub fn cyclic_shift_rep(n: usize) -> Result<GeneratorRep> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    Ok(GeneratorRep {
        n,
        generators: vec![Permutation::cycle(n)],
        provenance: Provenance::CyclicShift,
    })
}

/// `q` diagonal copies of each `T_j` followed by the identity on the last `r` points, with
/// `target = q n + r`.
pub fn pad_rep(rep: &GeneratorRep, target: usize) -> Result<GeneratorRep> {
    if target < rep.n || rep.n == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot pad a representation of size {} to {target}",
            rep.n
        )));
    }
    if target == rep.n {
        return Ok(rep.clone());
    }
    let q = target / rep.n;
    let generators = rep
        .generators
        .iter()
        .map(|p| {
            let images = (0..target)
                .map(|x| {
                    let b = x / rep.n;
                    if b < q {
                        b * rep.n + p.apply(x % rep.n)
                    } else {
                        x
                    }
                })
                .collect();
            Permutation::new(images)
        })
        .collect::<Result<_>>()?;
    Ok(GeneratorRep {
        n: target,
        generators,
        provenance: Provenance::Padded,
    })
}

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// The fraction of points where `p` and `q` differ.
pub fn hamming_distance(p: &Permutation, q: &Permutation) -> Result<BigRational> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::SizeMismatch(format!(
            "permutations of {} and {} points",
            p.len(),
            q.len()
        )));
    }
    let differ = (0..p.len()).filter(|&i| p.apply(i) != q.apply(i)).count();
    Ok(ratio(differ, p.len()))
}

/// `1 - tr(P^{-1} Q)`, which equals the Hamming distance.
pub fn hamming_via_trace(p: &Permutation, q: &Permutation) -> Result<BigRational> {
    let fixed = p.inverse().compose(q)?.fixed_points();
    Ok(BigRational::one() - ratio(fixed, p.len()))
}

/// A vertex group of a graph product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexGroup {
    Finite { table: FiniteGroupTable },
    /// The integers with generator `1`; letters are `±1`.
    Integers,
}

impl VertexGroup {
    pub fn finite(table: FiniteGroupTable) -> Self {
        VertexGroup::Finite { table }
    }

    pub fn generator_count(&self) -> usize {
        match self {
            VertexGroup::Finite { table } => table.generators().len(),
            VertexGroup::Integers => 1,
        }
    }

    fn identity(&self) -> i64 {
        match self {
            VertexGroup::Finite { table } => table.identity() as i64,
            VertexGroup::Integers => 0,
        }
    }

    fn letter(&self, j: i64) -> Result<i64> {
        match self {
            VertexGroup::Finite { table } => Ok(table.generator(j)? as i64),
            VertexGroup::Integers if j == 1 || j == -1 => Ok(j),
            VertexGroup::Integers => Err(Error::InvalidInput(format!(
                "letter {j} is not a generator of the integers"
            ))),
        }
    }

    fn mul(&self, a: i64, b: i64) -> i64 {
        match self {
            VertexGroup::Finite { table } => table.mul(a as usize, b as usize) as i64,
            VertexGroup::Integers => a + b,
        }
    }
}

/// A letter `g_{c,j}` (`j` signed, 1-based) of a graph product.
pub type Letter = (usize, i64);

/// A maximal same-color piece of a reduced word: the color and the group element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    pub color: usize,
    pub element: i64,
}

/// A reduced form of `word`: same-color letters that can be brought together by commuting
/// adjacent colors are multiplied and trivial syllables dropped. The word is trivial iff
/// the result is empty.
pub fn reduce_word(g: &ColorGraph, groups: &[VertexGroup], word: &[Letter]) -> Result<Vec<Syllable>> {
    if groups.len() != g.color_count() {
        return Err(Error::SizeMismatch(format!(
            "{} vertex groups for {} colors",
            groups.len(),
            g.color_count()
        )));
    }
    let mut stack: Vec<Syllable> = Vec::new();
    for &(c, j) in word {
        let group = groups
            .get(c)
            .ok_or_else(|| Error::InvalidInput(format!("color {c} out of range")))?;
        let x = group.letter(j)?;
        let mut merged = false;
        for pos in (0..stack.len()).rev() {
            let s = stack[pos];
            if s.color == c {
                let y = group.mul(s.element, x);
                if y == group.identity() {
                    stack.remove(pos);
                } else {
                    stack[pos].element = y;
                }
                merged = true;
                break;
            }
            if !g.adjacent(s.color, c) {
                break;
            }
        }
        if !merged && x != group.identity() {
            stack.push(Syllable { color: c, element: x });
        }
    }
    Ok(stack)
}

pub fn word_triviality(g: &ColorGraph, groups: &[VertexGroup], word: &[Letter]) -> Result<bool> {
    Ok(reduce_word(g, groups, word)?.is_empty())
}

/// Canonical representative of a reduced word under commutation: repeatedly emits the
/// lowest color whose syllable has no earlier non-commuting syllable.
pub fn normal_form(g: &ColorGraph, reduced: &[Syllable]) -> Vec<Syllable> {
    let mut rest = reduced.to_vec();
    let mut out = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let pick = (0..rest.len())
            .filter(|&i| {
                rest[..i]
                    .iter()
                    .all(|s| s.color != rest[i].color && g.adjacent(s.color, rest[i].color))
            })
            .min_by_key(|&i| rest[i].color)
            .expect("the first syllable is always available");
        out.push(rest.remove(pick));
    }
    out
}

/// `Z_{c,j} = Σ_c* T_{c,j} Σ_c ⊗ I` on `[N]^S`, stored as permutations of the coordinates in
/// `S_c` only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphProductRep {
    space: MultiIndexSpace,
    generators: Vec<Vec<LocalPermutation>>,
}

impl GraphProductRep {
    pub fn space(&self) -> &MultiIndexSpace {
        &self.space
    }

    pub fn generator(&self, c: usize, j: i64) -> Result<LocalPermutation> {
        let gens = self
            .generators
            .get(c)
            .ok_or_else(|| Error::InvalidInput(format!("color {c} out of range")))?;
        let k = j.unsigned_abs() as usize;
        if k == 0 || k > gens.len() {
            return Err(Error::InvalidInput(format!(
                "generator {j} of color {c} outside ±1..±{}",
                gens.len()
            )));
        }
        Ok(if j > 0 {
            gens[k - 1].clone()
        } else {
            gens[k - 1].inverse()
        })
    }

    /// `tr(Z_{c_1,j_1} ⋯ Z_{c_m,j_m})`, exact.
    pub fn word_trace(&self, word: &[Letter]) -> Result<BigRational> {
        let mut letters = Vec::with_capacity(word.len());
        for &(c, j) in word {
            let gens = self
                .generators
                .get(c)
                .ok_or_else(|| Error::InvalidInput(format!("color {c} out of range")))?;
            let k = j.unsigned_abs() as usize;
            if k == 0 || k > gens.len() {
                return Err(Error::InvalidInput(format!("generator {j} of color {c} out of range")));
            }
            letters.push((&gens[k - 1], j.signum() as i8));
        }
        perm_word_trace(&letters, &self.space)
    }
}

/// Conjugates each color's representation (of size `N^{#S_c}`) by an independent uniform
/// permutation drawn from `(seed, color)`.
pub fn graph_product_rep(
    g: &ColorGraph,
    a: &StringAssignment,
    vertex_reps: &[GeneratorRep],
    n: usize,
    seed: u64,
    guards: &Guards,
) -> Result<GraphProductRep> {
    let report = validate_assignment(g, a)?;
    if !report.valid {
        return Err(Error::InvalidInput(format!(
            "assignment violates the model: {:?}",
            report.violations
        )));
    }
    if vertex_reps.len() != g.color_count() {
        return Err(Error::SizeMismatch(format!(
            "{} representations for {} colors",
            vertex_reps.len(),
            g.color_count()
        )));
    }
    guards.check(GuardKind::Maps, saturating_pow(n as u128, a.string_count()))?;
    let space = MultiIndexSpace::full(a.string_count(), n);
    let generators = vertex_reps
        .iter()
        .enumerate()
        .map(|(c, rep)| {
            let support = a.strings_of(c).to_vec();
            let d = saturating_pow(n as u128, support.len());
            if rep.n as u128 != d {
                return Err(Error::InvalidInput(format!(
                    "color {} has a representation of size {}, expected N^{} = {d}",
                    g.name(c),
                    rep.n,
                    support.len()
                )));
            }
            let sigma = Permutation::sample(rep.n, &mut stream_rng(seed, &[c as u64]))?;
            rep.generators
                .iter()
                .map(|t| LocalPermutation::new(support.clone(), n, t.conjugate_by(&sigma)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphProductRep { space, generators })
}

/// Every word of length at most `max_len` over the letters `(c, ±j)`, shortest first.
pub fn all_words(groups: &[VertexGroup], max_len: usize) -> Vec<Vec<Letter>> {
    let alphabet: Vec<Letter> = groups
        .iter()
        .enumerate()
        .flat_map(|(c, gr)| {
            (1..=gr.generator_count() as i64).flat_map(move |j| [(c, j), (c, -j)])
        })
        .collect();
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<Letter>> = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&l| {
                    let mut v = w.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

pub fn format_word(g: &ColorGraph, word: &[Letter]) -> String {
    if word.is_empty() {
        return "e".into();
    }
    word.iter()
        .map(|&(c, j)| format!("{}:{j}", g.name(c)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub word: String,
    pub truth: bool,
    pub trace_num: u64,
    pub trace_den: u64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoficCertificate {
    pub entries: Vec<CertificateEntry>,
    /// `max |tr(w) - δ_{w = e}|`, exact.
    pub max_deviation_num: u64,
    pub max_deviation_den: u64,
    pub max_deviation: f64,
}

impl SoficCertificate {
    /// Builds entries from `(word, truth, trace)` triples.
    pub fn from_traces(items: Vec<(String, bool, BigRational)>) -> Result<Self> {
        let mut max = BigRational::zero();
        let mut entries = Vec::with_capacity(items.len());
        for (word, truth, tr) in items {
            let target = if truth { BigRational::one() } else { BigRational::zero() };
            let dev = (tr.clone() - target).abs();
            if dev > max {
                max = dev.clone();
            }
            entries.push(CertificateEntry {
                word,
                truth,
                trace_num: to_u64(tr.numer())?,
                trace_den: to_u64(tr.denom())?,
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(SoficCertificate {
            entries,
            max_deviation_num: to_u64(max.numer())?,
            max_deviation_den: to_u64(max.denom())?,
            max_deviation: max.to_f64().unwrap_or(f64::NAN),
        })
    }

    pub fn max_deviation_exact(&self) -> BigRational {
        BigRational::new(self.max_deviation_num.into(), self.max_deviation_den.into())
    }
}

fn to_u64(x: &BigInt) -> Result<u64> {
    x.to_u64()
        .ok_or_else(|| Error::InvalidInput(format!("{x} does not fit in 64 bits")))
}

/// Exact traces of the given words with truth from the graph product word problem.
pub fn certify(
    g: &ColorGraph,
    groups: &[VertexGroup],
    rep: &GraphProductRep,
    words: &[Vec<Letter>],
) -> Result<SoficCertificate> {
    let items = words
        .iter()
        .map(|w| {
            Ok((
                format_word(g, w),
                word_triviality(g, groups, w)?,
                rep.word_trace(w)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    SoficCertificate::from_traces(items)
}

/// Certificate for a single group's representation, truth from its table.
pub fn certify_rep(
    table: &FiniteGroupTable,
    rep: &GeneratorRep,
    words: &[Vec<i64>],
) -> Result<SoficCertificate> {
    let items = words
        .iter()
        .map(|w| {
            let name = if w.is_empty() {
                "e".to_string()
            } else {
                w.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
            };
            Ok((name, table.evaluate(w)? == table.identity(), rep.word_trace(w)?))
        })
        .collect::<Result<Vec<_>>>()?;
    SoficCertificate::from_traces(items)
}

fn default_max_word_length() -> usize {
    4
}

fn default_threshold() -> f64 {
    1.0
}

/// Config for certifying a graph product: one vertex group per color, in color order.
/// With `pad` unset every finite group's order must equal `N^{#S_c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoficConfig {
    pub model: crate::model::ModelFile,
    pub vertex_groups: Vec<VertexGroup>,
    pub n: usize,
    #[serde(default)]
    pub pad: bool,
    #[serde(default = "default_max_word_length")]
    pub max_word_length: usize,
    #[serde(default)]
    pub seed: u64,
    /// Certification fails when the maximum deviation exceeds this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl SoficConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn run(&self, guards: &Guards) -> Result<SoficCertificate> {
        let g = self.model.color_graph()?;
        let a = match self.model.assignment()? {
            Some(a) => a,
            None => crate::model::build_string_assignment(&g),
        };
        if self.vertex_groups.len() != g.color_count() {
            return Err(Error::InvalidInput(format!(
                "{} vertex groups for {} colors",
                self.vertex_groups.len(),
                g.color_count()
            )));
        }
        let reps = self
            .vertex_groups
            .iter()
            .enumerate()
            .map(|(c, vg)| {
                let d128 = saturating_pow(self.n as u128, a.strings_of(c).len());
                guards.check(GuardKind::Maps, d128)?;
                let d = d128 as usize;
                match vg {
                    VertexGroup::Integers => cyclic_shift_rep(d),
                    VertexGroup::Finite { table } => {
                        let rep = left_regular_rep(table);
                        if rep.n == d {
                            Ok(rep)
                        } else if self.pad && rep.n < d {
                            pad_rep(&rep, d)
                        } else {
                            Err(Error::InvalidInput(format!(
                                "group of order {} for color {} on a space of size {d}{}",
                                rep.n,
                                g.name(c),
                                if self.pad { "" } else { "; set \"pad\": true to pad" }
                            )))
                        }
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = graph_product_rep(&g, &a, &reps, self.n, self.seed, guards)?;
        certify(&g, &self.vertex_groups, &rep, &all_words(&self.vertex_groups, self.max_word_length))
    }
}
