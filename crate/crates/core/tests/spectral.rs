use diffuser::diffusion::DiffusionConfig;
use diffuser::graph::*;
use diffuser::spectral::*;
use proptest::prelude::*;

fn regular(n: usize, d: usize, seed: u64) -> UndirectedGraph {
    UndirectedGraph::from_attention(&build_regular_random(n, d, seed).unwrap(), SelfLoops::Drop)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalized_laplacian_range_and_components(sizes in prop::collection::vec(2usize..20, 1..5), seed in any::<u64>()) {
        // Disjoint union of local-window-plus-random blocks.
        let n: usize = sizes.iter().sum();
        let mut edges = Vec::new();
        let mut base = 0;
        for (b, &s) in sizes.iter().enumerate() {
            let g = union(s, &[build_random_tokenwise(s, 1, seed ^ b as u64).unwrap()]).unwrap();
            for i in 0..s.saturating_sub(1) {
                edges.push((base + i, base + i + 1));
            }
            edges.extend(g.edges().map(|(i, j, _)| (base + i, base + j)));
            base += s;
        }
        let g = UndirectedGraph::from_edges(n, &edges).unwrap();
        let s = normalized_laplacian_spectrum(&g).unwrap();
        prop_assert!(s.eigenvalues.iter().all(|v| (-1e-9..=2.0 + 1e-9).contains(v)));
        prop_assert_eq!(s.zero_multiplicity(1e-9), sizes.len());
        prop_assert_eq!(g.component_count(), sizes.len());
    }

    #[test]
    fn regular_spectra_and_reports(half in 1usize..5, extra in 1usize..40, seed in any::<u64>()) {
        let d = 2 * half;
        let g = regular(d + extra, d, seed);
        let adj = adjacency_spectrum(&g).unwrap();
        prop_assert!(adj.eigenvalues.iter().all(|v| v.abs() <= d as f64 + 1e-9));
        prop_assert!((adj.lambda(adj.len()) - d as f64).abs() <= 1e-9);
        let r = expander_report(&g).unwrap();
        prop_assert!(r.epsilon >= 0.0);
        prop_assert!(r.beta <= r.epsilon + 1e-12);
        prop_assert!(r.cheeger_lower <= r.cheeger_upper);
        let eps = complete_graph_approx_epsilon(&g).unwrap();
        prop_assert!((eps - r.epsilon).abs() <= 1e-9);
    }

    #[test]
    fn cheeger_sandwich_on_small_graphs(half in 1usize..4, extra in 1usize..8, seed in any::<u64>()) {
        let d = 2 * half;
        let n = d + extra;
        prop_assume!(n <= CHEEGER_LIMIT);
        let r = cheeger_report(&regular(n, d, seed)).unwrap();
        prop_assert!(r.holds, "{:?}", r);
    }

    #[test]
    fn mixing_bound_holds(half in 1usize..5, extra in 1usize..80, start in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let d = 2 * half;
        let n = d + extra;
        let g = regular(n, d, seed);
        let mut v0 = vec![0.0; n];
        v0[start.index(n)] = 1.0;
        let curve = mixing_tv_curve(&g, &v0, 50).unwrap();
        prop_assert!(curve.points.iter().all(|p| p.distance <= p.bound * (1.0 + 1e-9)));
    }

    #[test]
    fn eigen_transform_on_random_patterns(n in 8usize..64, alpha in 0.05f64..1.0, seed in any::<u64>()) {
        let g = union(n, &[build_local_window(n, 2).unwrap(), build_random_tokenwise(n, 2, seed).unwrap()])
            .unwrap()
            .finalize();
        let u = UndirectedGraph::from_attention(&g, SelfLoops::Keep);
        prop_assert!(verify_eigen_transform(&u, alpha).unwrap() <= EIGEN_TOLERANCE);
    }
}

#[test]
fn complete_graph_fixtures() {
    for n in 3..=12 {
        let k = UndirectedGraph::complete(n);
        let r = cheeger_report(&k).unwrap();
        assert!(r.holds);
        // h(K_n) = n - ⌊n/2⌋.
        assert_eq!(r.h, (n - n / 2) as f64);
        let c = cheeger_report(&UndirectedGraph::cycle(n).unwrap()).unwrap();
        assert!(c.holds);
        assert_eq!(c.h, 2.0 / (n / 2) as f64);
    }
}

#[test]
fn more_steps_widen_the_gap() {
    for seed in [0u64, 1, 2] {
        let g = union(128, &[build_local_window(128, 4).unwrap(), build_random_tokenwise(128, 2, seed).unwrap()])
            .unwrap()
            .finalize();
        let u = UndirectedGraph::from_attention(&g, SelfLoops::Drop);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=12 {
            let s = truncated_diffusion_spectrum(&u, &DiffusionConfig::new(0.1, k).unwrap()).unwrap();
            assert!(s.lambda(2) >= prev - 1e-12, "seed {seed}, K = {k}: {} < {prev}", s.lambda(2));
            prev = s.lambda(2);
        }
    }
}

#[test]
fn random_regular_beats_ring() {
    let ring = UndirectedGraph::from_attention(&build_ring(256).unwrap(), SelfLoops::Drop);
    let ring_eps = expander_report(&ring).unwrap().epsilon;
    let reg = regular(256, 16, 9);
    let report = expander_report(&reg).unwrap();
    assert!(report.epsilon < ring_eps);
    assert!(complete_graph_approx_epsilon(&reg).unwrap() < complete_graph_approx_epsilon(&ring).unwrap());
    assert_eq!(reg.component_count(), 1);
}
