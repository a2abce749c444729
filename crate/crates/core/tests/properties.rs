use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, RngCore};

use cylwalk::graph::{Vertex, WeightedGraph};
use cylwalk::rng::stream;
use cylwalk::stats::Welford;
use cylwalk::zoo::{
    box_ratio_closed_form, make_box, make_sierpinski, make_tree, sierpinski_ratio_closed_form, sierpinski_size, tree_ratio_closed_form,
    tree_size, CylVertex, CylinderView,
};

/// A path on `n` vertices plus extra chords, weights in (0, 2].
fn connected_graph() -> impl Strategy<Value = WeightedGraph> {
    (2usize..24)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, 1u32..=8), 0..3 * n), prop::collection::vec(1u32..=8, n - 1)))
        .prop_map(|(n, chords, path)| {
            let mut edges = BTreeMap::new();
            for (i, w) in path.into_iter().enumerate() {
                edges.insert((i, i + 1), w as f64 / 4.0);
            }
            for (a, b, w) in chords {
                if a != b {
                    edges.entry((a.min(b), a.max(b))).or_insert(w as f64 / 4.0);
                }
            }
            let edges: Vec<(Vertex, Vertex, f64)> = edges.into_iter().map(|((a, b), w)| (a as Vertex, b as Vertex, w)).collect();
            WeightedGraph::from_edges(n, &edges).unwrap()
        })
}

proptest! {
    #[test]
    fn text_round_trip(g in connected_graph()) {
        let back = WeightedGraph::from_text(&g.to_text()).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn transition_rows_are_stochastic(g in connected_graph()) {
        prop_assert!(g.is_connected());
        for y in 0..g.n() as Vertex {
            let row: f64 = g.neighbors(y).iter().map(|&y2| g.p(y, y2)).sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_weights_are_consistent(g in connected_graph(), z in -50i64..50) {
        let cyl = CylinderView::new(&g);
        for y in 0..g.n() as Vertex {
            let x = CylVertex::new(y, z);
            let nb = cyl.neighbors(x);
            let total: f64 = nb.iter().map(|p| p.1).sum();
            prop_assert!((total - cyl.vertex_weight(x)).abs() < 1e-12);
            for (x2, w) in nb {
                prop_assert_eq!(cyl.weight(x2, x), w);
            }
        }
    }

    #[test]
    fn welford_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let all: Welford = xs.iter().copied().collect();
        let mut left: Welford = xs[..cut].iter().copied().collect();
        let right: Welford = xs[cut..].iter().copied().collect();
        left.merge(&right);
        prop_assert_eq!(left.n, all.n);
        prop_assert!((left.mean() - all.mean()).abs() < 1e-9);
        prop_assert!((left.var() - all.var()).abs() < 1e-7 * (1.0 + all.var()));
    }

    #[test]
    fn streams_replay_and_separate(seed in any::<u64>(), trial in 0u64..1_000_000) {
        let a: Vec<u64> = (0..8).map({ let mut r = stream(seed, "walk", trial); move |_| r.next_u64() }).collect();
        let b: Vec<u64> = (0..8).map({ let mut r = stream(seed, "walk", trial); move |_| r.next_u64() }).collect();
        let c: Vec<u64> = (0..8).map({ let mut r = stream(seed, "walk", trial + 1); move |_| r.next_u64() }).collect();
        let d: Vec<u64> = (0..8).map({ let mut r = stream(seed, "other", trial); move |_| r.next_u64() }).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
        prop_assert_ne!(&a, &d);
    }

    #[test]
    fn cylinder_steps_stay_adjacent(g in connected_graph(), seed in any::<u64>()) {
        let cyl = CylinderView::new(&g);
        let mut rng = stream(seed, "steps", 0);
        let mut x = CylVertex::new(rng.random_range(0..g.n() as Vertex), 0);
        for _ in 0..200 {
            let x2 = cyl.step(x, &mut rng);
            prop_assert!(cyl.weight(x, x2) > 0.0);
            x = x2;
        }
    }
}

#[test]
fn family_sizes_and_ratios_match_closed_forms() {
    for n in 2..=9 {
        for d in 2..=3 {
            let g = make_box(n, d).unwrap();
            assert_eq!(g.n(), n.pow(d as u32));
            assert!((g.total_weight() / g.n() as f64 - box_ratio_closed_form(n, d)).abs() < 1e-12);
        }
    }
    for n in 0..=6 {
        let s = make_sierpinski(n).unwrap();
        assert_eq!(s.graph.n(), sierpinski_size(n));
        assert!((s.graph.total_weight() / s.graph.n() as f64 - sierpinski_ratio_closed_form(n)).abs() < 1e-12);
        for y in 0..s.graph.n() as Vertex {
            assert!(matches!(s.graph.degree(y), 2 | 4));
        }
    }
    for d in 2..=4 {
        for n in 1..=6 {
            let t = make_tree(d, n).unwrap();
            assert_eq!(t.graph.n(), tree_size(d, n));
            assert_eq!(t.graph.num_edges(), t.graph.n() - 1);
            assert!((t.graph.total_weight() / t.graph.n() as f64 - tree_ratio_closed_form(d, n)).abs() < 1e-12);
        }
    }
}
