use num_traits::ToPrimitive;
use permtraffic::sofic::{FiniteGroupTable, SoficConfig, VertexGroup};
use permtraffic::{ColorGraph, Guards, ModelFile};

fn dihedral(n: usize, seed: u64) -> SoficConfig {
    let z2 = VertexGroup::finite(FiniteGroupTable::cyclic(2));
    SoficConfig {
        model: ModelFile::from_model(&ColorGraph::edgeless(2), None),
        vertex_groups: vec![z2.clone(), z2],
        n,
        pad: true,
        max_word_length: 4,
        seed,
        threshold: 1.0,
    }
}

#[test]
fn dihedral_mean_deviation_is_nonincreasing_in_n() {
    let guards = Guards::default();
    let stats: Vec<(f64, f64)> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let d: Vec<f64> = (0..50)
                .map(|s| {
                    dihedral(n, s)
                        .run(&guards)
                        .unwrap()
                        .max_deviation_exact()
                        .to_f64()
                        .unwrap()
                })
                .collect();
            let m = d.iter().sum::<f64>() / 50.0;
            let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 49.0;
            (m, (var / 50.0).sqrt())
        })
        .collect();
    for w in stats.windows(2) {
        let (m0, e0) = w[0];
        let (m1, e1) = w[1];
        assert!(m1 <= m0 + 2.0 * (e0 * e0 + e1 * e1).sqrt(), "{stats:?}");
    }
    assert!(stats[3].0 < stats[0].0, "{stats:?}");
}

#[test]
fn unpadded_mismatched_order_is_rejected() {
    let mut cfg = dihedral(8, 0);
    cfg.pad = false;
    assert!(cfg.run(&Guards::default()).is_err());
}
