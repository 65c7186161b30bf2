//! Kernel-resolved traffic moments: `λ`, `γ` for a fixed draw, and the exact expectation
//! of `γ` over uniformly random color permutations.

use serde::Serialize;

use super::kernel::{admissible_tuples, analyze_unchecked, is_admissible, omega, MultiPartition};
use super::LoopedTestGraph;
use crate::error::{Error, GuardKind, Guards, Result};
use crate::model::StringAssignment;
use crate::scalar::{falling_factorial, falling_factorial_ratio, pow_usize, Scalar};
use crate::tensor::{conjugate_by_color, MultiIndexSpace, Permutation};

/// Number of labelings `i : V -> [N]^S` whose string coordinates have kernels exactly `π`.
pub fn kernel_labeling_count(pi: &MultiPartition, n: usize) -> u128 {
    pi.parts().iter().fold(1u128, |acc, p| {
        acc.saturating_mul(falling_factorial(n as u128, p.block_count()))
    })
}

/// Calls `f` with the full-space index of every vertex, once per labeling whose coordinate
/// on string `s` has kernel exactly `π_s`. Strings are encoded first-most-significant.
pub fn for_each_kernel_labeling(
    pi: &MultiPartition,
    n: usize,
    guards: &Guards,
    mut f: impl FnMut(&[usize]),
) -> Result<()> {
    guards.check(GuardKind::Maps, kernel_labeling_count(pi, n))?;
    let strings = pi.string_count();
    let v = pi.ground_size();
    let slots: Vec<(usize, usize)> = (0..strings)
        .flat_map(|s| (0..pi.get(s).block_count()).map(move |b| (s, b)))
        .collect();
    let strides: Vec<usize> = (0..strings)
        .map(|s| n.pow((strings - 1 - s) as u32))
        .collect();
    let mut values: Vec<Vec<usize>> = (0..strings)
        .map(|s| vec![0; pi.get(s).block_count()])
        .collect();
    let mut used = vec![vec![false; n]; strings];
    let mut index = vec![0usize; v];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        slots: &[(usize, usize)],
        values: &mut Vec<Vec<usize>>,
        used: &mut Vec<Vec<bool>>,
        index: &mut Vec<usize>,
        pi: &MultiPartition,
        strides: &[usize],
        n: usize,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if k == slots.len() {
            for (vertex, slot) in index.iter_mut().enumerate() {
                *slot = (0..strides.len())
                    .map(|s| values[s][pi.get(s).block_of(vertex)] * strides[s])
                    .sum();
            }
            f(index);
            return;
        }
        let (s, b) = slots[k];
        for x in 0..n {
            if used[s][x] {
                continue;
            }
            used[s][x] = true;
            values[s][b] = x;
            rec(k + 1, slots, values, used, index, pi, strides, n, f);
            used[s][x] = false;
        }
    }
    rec(0, &slots, &mut values, &mut used, &mut index, pi, &strides, n, &mut f);
    Ok(())
}

fn check_looped<T: Scalar>(
    t: &LoopedTestGraph<T>,
    pi: &MultiPartition,
    a: &StringAssignment,
) -> Result<()> {
    t.check_assignment(a)?;
    if pi.string_count() != a.string_count() || pi.ground_size() != t.shape().vertex_count() {
        return Err(Error::SizeMismatch(format!(
            "tuple of {} partitions of {} elements for {} strings and {} vertices",
            pi.string_count(),
            pi.ground_size(),
            a.string_count(),
            t.shape().vertex_count()
        )));
    }
    Ok(())
}

/// `Σ_{i : ker i_s = π_s} ∏_v Λ_v[i(v)]`.
fn lambda_raw<T: Scalar>(t: &LoopedTestGraph<T>, pi: &MultiPartition, guards: &Guards) -> Result<T> {
    let mut sum = T::zero();
    for_each_kernel_labeling(pi, t.side(), guards, |idx| {
        let w = t
            .loops()
            .iter()
            .zip(idx)
            .fold(T::one(), |acc, (l, &i)| acc * l.entries()[i].clone());
        sum = sum.clone() + w;
    })?;
    Ok(sum)
}

/// `λ_N(T, π)`: the loop product summed over labelings with kernels `π`, divided by
/// `N^{Σ_s #π_s}`.
pub fn lambda_value<T: Scalar>(
    t: &LoopedTestGraph<T>,
    pi: &MultiPartition,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<T> {
    check_looped(t, pi, a)?;
    let blocks: usize = pi.parts().iter().map(|p| p.block_count()).sum();
    Ok(lambda_raw(t, pi, guards)? / pow_usize(&T::from_i64(t.side() as i64), blocks))
}

/// The part of `τ(T̊)` coming from labelings with kernels exactly `π`, for the given color
/// permutations (`sigmas[c]` acts on `[N]^{S_c}`).
pub fn gamma_empirical<T: Scalar>(
    t: &LoopedTestGraph<T>,
    pi: &MultiPartition,
    a: &StringAssignment,
    sigmas: &[Permutation],
    guards: &Guards,
) -> Result<T> {
    check_looped(t, pi, a)?;
    let n = t.side();
    let space = MultiIndexSpace::full(a.string_count(), n);
    let shape = t.shape();
    let edges = shape
        .graph()
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(src, dst))| {
            let c = shape.color(e);
            let sigma = sigmas
                .get(c)
                .ok_or_else(|| Error::SizeMismatch(format!("no permutation for color {c}")))?;
            let x = conjugate_by_color(&t.base().labels()[e], sigma)?;
            Ok((src, dst, space.sub_index(x.support())?, x))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = T::zero();
    for_each_kernel_labeling(pi, n, guards, |idx| {
        let mut w = T::one();
        for (src, dst, sub, x) in &edges {
            let (i, j) = (idx[*dst], idx[*src]);
            if sub.rest(i) != sub.rest(j) {
                return;
            }
            w = w * x.entry(sub.local(i), sub.local(j)).clone();
            if w.is_zero() {
                return;
            }
        }
        for (l, &i) in t.loops().iter().zip(idx) {
            w = w * l.entries()[i].clone();
        }
        sum = sum.clone() + w;
    })?;
    let norm = pow_usize(
        &T::from_i64(n as i64),
        a.string_count() * shape.graph().component_count(),
    );
    Ok(sum / norm)
}

/// Exact `E γ(T, π)` over independent uniform color permutations:
///
/// `N^{Σ_s #π_s − #S·#Comp(T)} λ ∏_c (M_c − #V(T_{π,c}))!/M_c! · Σ°(T_{π,c})`,
/// with `M_c = N^{#S_c}` and `Σ°` the unnormalized injective sum of the unconjugated labels.
/// Requires `π_s ≥ ρ_s` for every string; other tuples contribute zero for every draw.
pub fn gamma_expected_formula<T: Scalar>(
    t: &LoopedTestGraph<T>,
    pi: &MultiPartition,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<T> {
    check_looped(t, pi, a)?;
    if !is_admissible(t.shape(), pi, a)? {
        return Err(Error::Precondition(format!(
            "{pi} does not dominate the string components"
        )));
    }
    expected_unchecked(t, pi, a, guards)
}

fn expected_unchecked<T: Scalar>(
    t: &LoopedTestGraph<T>,
    pi: &MultiPartition,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<T> {
    let n = t.side();
    let mut value = lambda_raw(t, pi, guards)?;
    if value.is_zero() {
        return Ok(value);
    }
    for c in 0..a.color_count() {
        let w = omega(pi, a, c)?;
        let local = t
            .base()
            .restrict_colors(|x| x == c)
            .quotient(&w)?
            .color_local(a, c)?;
        let m = MultiIndexSpace::new(a.strings_of(c).to_vec(), n).total_dim();
        let ratio: T = falling_factorial_ratio(m, w.block_count());
        if ratio.is_zero() {
            return Ok(T::zero());
        }
        value = value * ratio * local.raw_injective_trace(guards)?;
    }
    let norm = pow_usize(
        &T::from_i64(n as i64),
        a.string_count() * t.shape().graph().component_count(),
    );
    Ok(value / norm)
}

/// `E τ(T̊)` as the sum of the exact `E γ` over all admissible tuples.
pub fn expected_trace_exact<T: Scalar>(
    t: &LoopedTestGraph<T>,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<T> {
    t.check_assignment(a)?;
    admissible_tuples(t.shape(), a, guards)?
        .iter()
        .try_fold(T::zero(), |acc, pi| Ok(acc + expected_unchecked(t, pi, a, guards)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadingTerm<T> {
    pub pi: MultiPartition,
    #[serde(skip)]
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingTerms<T> {
    pub total: T,
    pub terms: Vec<LeadingTerm<T>>,
}

/// `Σ λ_N(T, π) ∏_c τ°(T_{π,c})` over admissible `π` whose graphs of colored components
/// are all trees, with `τ°` normalized in dimension `N^{#S_c}`. Requires `T` to be
/// two-edge connected.
pub fn expected_trace_leading_terms<T: Scalar>(
    t: &LoopedTestGraph<T>,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<LeadingTerms<T>> {
    t.check_assignment(a)?;
    if !t.shape().graph().is_two_edge_connected() {
        return Err(Error::Precondition("test graph is not two-edge connected".into()));
    }
    let mut total = T::zero();
    let mut terms = Vec::new();
    for pi in admissible_tuples(t.shape(), a, guards)? {
        if !analyze_unchecked(t.shape(), &pi, a)?.all_trees() {
            continue;
        }
        let mut value = lambda_value(t, &pi, a, guards)?;
        for c in 0..a.color_count() {
            let w = omega(&pi, a, c)?;
            let local = t
                .base()
                .restrict_colors(|x| x == c)
                .quotient(&w)?
                .color_local(a, c)?;
            value = value * local.injective_trace(guards)?;
        }
        total = total + value.clone();
        terms.push(LeadingTerm { pi, value });
    }
    Ok(LeadingTerms { total, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::Partition;
    use crate::tensor::{stream_rng, DiagonalMatrix, Matrix, StructuredMatrix};
    use crate::traffic::{rhos, ColoredDigraph, TestGraph};
    use num_rational::BigRational;
    use rand::Rng;

    type Q = BigRational;

    fn q(v: i64) -> Q {
        Q::from_i64(v)
    }

    fn one_string() -> StringAssignment {
        StringAssignment::from_color_sets(1, &[vec![0]]).unwrap()
    }

    fn looped(shape: ColoredDigraph, n: usize, a: &StringAssignment, rng: &mut impl Rng) -> LoopedTestGraph<Q> {
        let labels = (0..shape.edge_count())
            .map(|e| {
                let sup = a.strings_of(shape.color(e)).to_vec();
                let d = n.pow(sup.len() as u32);
                StructuredMatrix::new(sup, n, Matrix::from_fn(d, d, |_, _| q(rng.gen_range(-2..=2))))
                    .unwrap()
            })
            .collect();
        let dim = n.pow(a.string_count() as u32);
        let loops = (0..shape.vertex_count())
            .map(|_| DiagonalMatrix::new((0..dim).map(|_| q(rng.gen_range(-2..=2))).collect()))
            .collect();
        LoopedTestGraph::new(TestGraph::new(shape, n, labels).unwrap(), loops).unwrap()
    }

    #[test]
    fn lambda_with_identity_loops_counts_labelings() {
        let a = StringAssignment::from_color_sets(2, &[vec![0], vec![1]]).unwrap();
        let shape = ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 1)]).unwrap();
        let n = 3;
        let labels = vec![
            StructuredMatrix::<Q>::identity(vec![0], n),
            StructuredMatrix::<Q>::identity(vec![1], n),
        ];
        let t = LoopedTestGraph::with_identity_loops(TestGraph::new(shape, n, labels).unwrap(), 2);
        let g = Guards::default();
        for p0 in Partition::enumerate(3) {
            for p1 in Partition::enumerate(3) {
                let pi = MultiPartition::new(vec![p0.clone(), p1.clone()]).unwrap();
                let mut expected = q(1);
                for p in [&p0, &p1] {
                    let b = p.block_count();
                    expected = expected
                        * q(falling_factorial(n as u128, b) as i64)
                        / q((n as i64).pow(b as u32));
                }
                assert_eq!(lambda_value(&t, &pi, &a, &g).unwrap(), expected);
            }
        }
        let two = LoopedTestGraph::with_identity_loops(
            TestGraph::new(
                ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 1)]).unwrap(),
                2,
                vec![
                    StructuredMatrix::<Q>::identity(vec![0], 2),
                    StructuredMatrix::<Q>::identity(vec![1], 2),
                ],
            )
            .unwrap(),
            2,
        );
        let pi = MultiPartition::new(vec![Partition::singletons(3), Partition::single_block(3)]).unwrap();
        assert_eq!(lambda_value(&two, &pi, &a, &g).unwrap(), q(0));
    }

    #[test]
    fn lambda_is_bounded_by_loop_norms() {
        let a = StringAssignment::from_color_sets(2, &[vec![0, 1]]).unwrap();
        let mut rng = stream_rng(4, &[]);
        for _ in 0..20 {
            let t = looped(ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 0)]).unwrap(), 2, &a, &mut rng);
            let r = t.loops().iter().map(|l| l.op_norm()).fold(0.0, f64::max);
            for p0 in Partition::enumerate(3) {
                let pi = MultiPartition::new(vec![p0.clone(), Partition::singletons(3)]).unwrap();
                let l = lambda_value(&t, &pi, &a, &Guards::default()).unwrap();
                assert!(l.modulus() <= r.powi(3) + 1e-12);
            }
        }
    }

    #[test]
    fn kernel_sum_reproduces_trace_and_vanishes_off_admissible() {
        let g = Guards::default();
        let mut rng = stream_rng(5, &[]);
        let cases: Vec<(StringAssignment, ColoredDigraph)> = vec![
            (one_string(), ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 0), (2, 0, 0)]).unwrap()),
            (
                StringAssignment::from_color_sets(1, &[vec![0], vec![0]]).unwrap(),
                ColoredDigraph::from_edges(2, &[(0, 1, 0), (1, 0, 1)]).unwrap(),
            ),
            (
                StringAssignment::from_color_sets(2, &[vec![0], vec![1]]).unwrap(),
                ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 1), (2, 0, 0)]).unwrap(),
            ),
        ];
        for (a, shape) in cases {
            for n in 2..=3 {
                let t = looped(shape.clone(), n, &a, &mut rng);
                let sigmas: Vec<Permutation> = (0..a.color_count())
                    .map(|c| Permutation::sample(n.pow(a.strings_of(c).len() as u32), &mut rng).unwrap())
                    .collect();
                let tau = t.full_labeled(&a, &sigmas, &g).unwrap().trace(&g).unwrap();
                let rho = rhos(t.shape(), &a).unwrap();
                let v = shape.vertex_count();
                let mut total = q(0);
                let all: Vec<Partition> = Partition::enumerate(v).collect();
                let mut idx = vec![0; a.string_count()];
                loop {
                    let pi = MultiPartition::new(idx.iter().map(|&i| all[i].clone()).collect()).unwrap();
                    let gamma = gamma_empirical(&t, &pi, &a, &sigmas, &g).unwrap();
                    if !pi.dominates(&rho) {
                        assert_eq!(gamma, q(0));
                    }
                    total += gamma;
                    let mut k = idx.len();
                    let mut done = true;
                    while k > 0 {
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < all.len() {
                            done = false;
                            break;
                        }
                        idx[k] = 0;
                    }
                    if done {
                        break;
                    }
                }
                assert_eq!(total, tau);
            }
        }
    }

    /// Average of `γ` over every tuple of color permutations.
    fn brute_expectation(
        t: &LoopedTestGraph<Q>,
        pi: &MultiPartition,
        a: &StringAssignment,
    ) -> Q {
        let n = t.side();
        let g = Guards::default();
        let per_color: Vec<Vec<Permutation>> = (0..a.color_count())
            .map(|c| all_permutations(n.pow(a.strings_of(c).len() as u32)))
            .collect();
        let mut sum = q(0);
        let mut count = 0i64;
        let mut idx = vec![0; per_color.len()];
        loop {
            let sigmas: Vec<Permutation> = idx.iter().zip(&per_color).map(|(&i, p)| p[i].clone()).collect();
            sum += gamma_empirical(t, pi, a, &sigmas, &g).unwrap();
            count += 1;
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return sum / q(count);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_color[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    fn all_permutations(n: usize) -> Vec<Permutation> {
        let mut out = vec![vec![]];
        for k in 0..n {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (0..=k).map(move |pos| {
                        let mut v = p.clone();
                        v.insert(pos, k);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(|v| Permutation::new(v).unwrap()).collect()
    }

    #[test]
    fn expectation_formula_matches_brute_force_on_small_graphs() {
        let g = Guards::default();
        let mut rng = stream_rng(6, &[]);
        let a = one_string();
        let shapes = [
            ColoredDigraph::from_edges(1, &[(0, 0, 0)]).unwrap(),
            ColoredDigraph::from_edges(2, &[(0, 1, 0), (1, 0, 0)]).unwrap(),
            ColoredDigraph::from_edges(2, &[(0, 1, 0)]).unwrap(),
            ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 0), (2, 0, 0)]).unwrap(),
        ];
        for shape in shapes {
            for n in 2..=3 {
                let t = looped(shape.clone(), n, &a, &mut rng);
                let mut total = q(0);
                for pi in admissible_tuples(t.shape(), &a, &g).unwrap() {
                    let formula = gamma_expected_formula(&t, &pi, &a, &g).unwrap();
                    assert_eq!(formula, brute_expectation(&t, &pi, &a), "{pi}");
                    total += formula;
                }
                assert_eq!(total, expected_trace_exact(&t, &a, &g).unwrap());
            }
        }
    }

    #[test]
    fn formula_vanishes_when_quotient_exceeds_dimension() {
        let a = one_string();
        let shape = ColoredDigraph::from_edges(3, &[(0, 1, 0), (1, 2, 0), (2, 0, 0)]).unwrap();
        let t = looped(shape, 2, &a, &mut stream_rng(7, &[]));
        let pi = MultiPartition::new(vec![Partition::singletons(3)]).unwrap();
        assert_eq!(gamma_expected_formula(&t, &pi, &a, &Guards::default()).unwrap(), q(0));
    }

    #[test]
    fn formula_rejects_inadmissible_tuples() {
        let a2 = StringAssignment::from_color_sets(2, &[vec![0], vec![1]]).unwrap();
        let shape = ColoredDigraph::from_edges(2, &[(0, 1, 0), (1, 0, 1)]).unwrap();
        let t = looped(shape, 2, &a2, &mut stream_rng(8, &[]));
        // ρ for string 0 merges the two vertices through the color-1 edge.
        let pi = MultiPartition::new(vec![Partition::singletons(2), Partition::singletons(2)]).unwrap();
        assert!(matches!(
            gamma_expected_formula(&t, &pi, &a2, &Guards::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn leading_terms_of_two_cycle_with_traceless_labels() {
        // Both tuples give trees. The merged one contributes tr(XY) restricted to the
        // diagonal, which vanishes; the split one gives (N-1)/N.
        let a = one_string();
        let g = Guards::default();
        let shape = ColoredDigraph::from_edges(2, &[(0, 1, 0), (1, 0, 0)]).unwrap();
        for n in 2..=4 {
            let shift = crate::tensor::Permutation::cycle(n);
            let x = StructuredMatrix::<Q>::from_permutation(vec![0], n, shift.clone()).unwrap();
            let y = StructuredMatrix::<Q>::from_permutation(vec![0], n, shift.inverse()).unwrap();
            let t = LoopedTestGraph::with_identity_loops(
                TestGraph::new(shape.clone(), n, vec![x, y]).unwrap(),
                1,
            );
            let lead = expected_trace_leading_terms(&t, &a, &g).unwrap();
            assert_eq!(lead.terms.len(), 2);
            assert_eq!(lead.total, q(n as i64 - 1) / q(n as i64));
        }
    }

    #[test]
    fn leading_terms_approach_exact_expectation() {
        let g = Guards::default();
        let a = StringAssignment::from_color_sets(1, &[vec![0], vec![0]]).unwrap();
        let shape = ColoredDigraph::from_edges(2, &[(0, 1, 0), (1, 0, 1), (0, 1, 1)]).unwrap();
        let mut scaled = Vec::new();
        for n in 2..=4 {
            let dn = |i: i64| DiagonalMatrix::new((0..n).map(|k| q(if (k as i64) % 2 == i { 1 } else { -1 })).collect());
            let x = StructuredMatrix::<Q>::from_permutation(vec![0], n, Permutation::cycle(n)).unwrap();
            let y = StructuredMatrix::<Q>::new(vec![0], n, dn(0).to_matrix()).unwrap();
            let z = StructuredMatrix::<Q>::from_permutation(vec![0], n, Permutation::cycle(n).inverse()).unwrap();
            let t = LoopedTestGraph::new(
                TestGraph::new(shape.clone(), n, vec![x, y, z]).unwrap(),
                vec![dn(1), DiagonalMatrix::identity(n)],
            )
            .unwrap();
            let exact = expected_trace_exact(&t, &a, &g).unwrap();
            let lead = expected_trace_leading_terms(&t, &a, &g).unwrap().total;
            let diff = (exact - lead).modulus();
            scaled.push(diff * n as f64);
        }
        assert!(scaled.iter().all(|&s| s <= 4.0), "{scaled:?}");
    }
}
