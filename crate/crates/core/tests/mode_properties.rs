use std::f64::consts::TAU;

use proptest::prelude::*;
use qgraph_core::corpus;
use qgraph_core::eigenmode::{eigenfunctions_at, inner_product, vertex_residuals, EigenFunction, SupportClassification};
use qgraph_core::genericity::{trace_theta_path, verify_interlacing, AlphaValue};
use qgraph_core::spectral::{first_eigenvalues, scan_spectrum};
use qgraph_core::{End, MetricGraph, VertexCondition};

mod common;
use common::robin_graph;

fn lollipop(loop_length: f64, pendant: f64, alpha: f64) -> MetricGraph {
    qgraph_core::GraphSpec::new()
        .vertex("a", VertexCondition::Delta(alpha))
        .vertex("p", VertexCondition::NK)
        .edge("loop", "a", "a", loop_length)
        .edge("tail", "a", "p", pendant)
        .build()
        .unwrap()
}

/// Continuity and flux residual at `a` of `(f + f reversed on the loop) / 2`.
fn flipped_residual(g: &MetricGraph, f: &EigenFunction) -> (f64, f64) {
    let lp = g.edge_index("loop").unwrap();
    let tail = g.edge_index("tail").unwrap();
    let l = g.edges()[lp].length;
    let alpha = g.vertices()[g.vertex_index("a").unwrap()].condition.alpha().unwrap();
    let value = |e, x| f.evaluate_index(e, x).unwrap();
    let slope = |e, x| f.derivative_index(e, x);
    // g(x) = (f(x) + f(l - x)) / 2 on the loop
    let g0 = 0.5 * (value(lp, 0.0) + value(lp, l));
    let gl = 0.5 * (value(lp, l) + value(lp, 0.0));
    let dg0 = 0.5 * (slope(lp, 0.0) - slope(lp, l));
    let dgl = 0.5 * (slope(lp, l) - slope(lp, 0.0));
    let t0 = value(tail, 0.0);
    let continuity = (g0 - gl).abs().max((g0 - t0).abs());
    let flux = dg0 - dgl + slope(tail, 0.0) - alpha * t0;
    let k = f.lambda.abs().sqrt();
    (continuity, flux.abs() / (1.0 + k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenspace_bases_are_orthonormal(g in robin_graph()) {
        for r in first_eigenvalues(&g, 12).unwrap() {
            let modes = eigenfunctions_at(&g, &r).unwrap();
            prop_assert_eq!(modes.len(), r.multiplicity);
            for (i, a) in modes.iter().enumerate() {
                for (j, b) in modes.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    let ip = inner_product(&g, a, b);
                    prop_assert!((ip - expected).abs() <= 1e-8, "<{i},{j}> = {ip} at lambda {}", r.lambda);
                }
                let (cont, flux) = vertex_residuals(&g, a);
                prop_assert!(cont <= 1e-7 && flux <= 1e-7, "residuals {cont} {flux} at lambda {}", r.lambda);
            }
        }
    }

    #[test]
    fn one_loop_state_per_loop_eigenvalue(l in 1.0f64..8.0, pendant in 0.3f64..2.0, alpha in -1.0f64..1.0) {
        let g = lollipop(l, pendant, alpha);
        let records = scan_spectrum(&g, 2.0 * TAU / l + 0.2).unwrap();
        for n in 1..=2 {
            let target = (TAU * n as f64 / l).powi(2);
            let r = records.iter().find(|r| (r.lambda - target).abs() <= 1e-9 * target.max(1.0));
            prop_assert!(r.is_some(), "loop eigenvalue {target} missing");
            let modes = eigenfunctions_at(&g, r.unwrap()).unwrap();
            let loop_states = modes
                .iter()
                .filter(|f| matches!(f.support, SupportClassification::LoopSupported(_)))
                .count();
            prop_assert_eq!(loop_states, 1);
        }
    }

    #[test]
    fn flipping_the_loop_stays_in_the_eigenspace(l in 1.0f64..8.0, pendant in 0.3f64..2.0, alpha in -1.0f64..1.0) {
        let g = lollipop(l, pendant, alpha);
        for r in first_eigenvalues(&g, 8).unwrap() {
            for f in eigenfunctions_at(&g, &r).unwrap() {
                let (cont, flux) = flipped_residual(&g, &f);
                prop_assert!(cont <= 1e-7 && flux <= 1e-7, "{cont} {flux} at {}", r.lambda);
            }
        }
    }

    #[test]
    fn interlacing_on_random_coefficients(a in -3.0f64..3.0, gap in 0.01f64..5.0, leaf in any::<bool>()) {
        let g = corpus::star3_dirichlet(corpus::STAR_LENGTHS);
        let g = g.with_condition("c", VertexCondition::Delta(0.3)).unwrap();
        let v = if leaf { "l2" } else { "c" };
        let pairs = [(AlphaValue::Finite(a), AlphaValue::Finite(a + gap))];
        let res = verify_interlacing(&g, v, &pairs, 12).unwrap();
        prop_assert!(res[0].margin >= -1e-9, "margin {}", res[0].margin);
        prop_assert!(res[0].strict_failures.is_empty(), "strict failures {:?}", res[0].strict_failures);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn loop_eigenvalues_survive_perturbations(pendant in 0.3f64..3.0, alpha in -2.0f64..2.0) {
        let g = lollipop(TAU, pendant, alpha);
        let records = scan_spectrum(&g, 3.2).unwrap();
        for n in 1..=3 {
            let target = (n * n) as f64;
            prop_assert!(records.iter().any(|r| (r.lambda - target).abs() <= 1e-9));
        }
    }

    #[test]
    fn theta_path_points_are_eigenvalues_of_extended_graphs(
        l in prop::array::uniform3(0.8f64..2.0),
        leaf in 0usize..3,
    ) {
        let g = corpus::star3_dirichlet(l);
        let leaf_id = ["l1", "l2", "l3"][leaf];
        let path = trace_theta_path(&g, leaf_id, 2, 2, 200).unwrap();
        let e = g.edge_index(&path.leaf_edge).unwrap();
        prop_assert_eq!(g.incident(g.vertex_index(leaf_id).unwrap())[0].end, End::End);
        let stride = (path.samples.len() / 5).max(1);
        for s in path.samples.iter().step_by(stride).chain(path.samples.last()) {
            let extended = g.with_length(&g.edges()[e].id, s.extended_length).unwrap();
            let records = scan_spectrum(&extended, s.lambda.sqrt() + 0.5).unwrap();
            let nearest = records
                .iter()
                .map(|r| (r.lambda - s.lambda).abs() / s.lambda)
                .fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= 1e-8, "theta {}: relative distance {nearest}", s.theta);
        }
    }
}
