use proptest::prelude::*;

use spoclust::bimodality::{check_bimodal, TwoComponentSpec};
use spoclust::evaluation::{bhi, ch_index, kmeans, ChIndex, LabeledPartition};
use spoclust::objective::loss_mu;
use spoclust::optimizer::find_center;
use spoclust::select::gamma_by_range;
use spoclust::{assign, ClusterModel, DataSet, GammaIndex, GaussianComponent, IterationConfig, Partition};

fn rows(p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, p), 3..40)
}

fn transform(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> Vec<f64>) -> DataSet {
    DataSet::from_rows(&rows.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_only_search_descends_and_follows_translation(
        data in rows(2),
        g in 0.1f64..3.0,
        start in 0usize..40,
        shift in prop::collection::vec(-50.0f64..50.0, 2),
    ) {
        let d = DataSet::from_rows(&data).unwrap();
        let g = GammaIndex::new(g).unwrap();
        let x0 = d.row(start % d.n()).to_vec();
        let cfg = IterationConfig::default();
        let r = find_center(&d, &x0, g, &cfg).unwrap();
        for w in r.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }

        let moved = transform(&data, |x| vec![x[0] + shift[0], x[1] + shift[1]]);
        let x1 = vec![x0[0] + shift[0], x0[1] + shift[1]];
        let s = find_center(&moved, &x1, g, &cfg).unwrap();
        for j in 0..2 {
            prop_assert!((s.component.mu()[j] - r.component.mu()[j] - shift[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn loss_is_in_unit_interval_and_scale_covariant(
        data in rows(3),
        mu in prop::collection::vec(-10.0f64..10.0, 3),
        g in 0.01f64..5.0,
        a in 0.1f64..10.0,
    ) {
        let d = DataSet::from_rows(&data).unwrap();
        let v = loss_mu(&d, &mu, GammaIndex::new(g).unwrap()).unwrap();
        prop_assert!((-1.0..=0.0).contains(&v));
        let scaled = transform(&data, |x| x.iter().map(|v| a * v).collect());
        let amu: Vec<f64> = mu.iter().map(|v| a * v).collect();
        let w = loss_mu(&scaled, &amu, GammaIndex::new(g / (a * a)).unwrap()).unwrap();
        prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1e-300) + 1e-15);
    }

    #[test]
    fn range_rule_scales_inverse_square(data in rows(2), a in 0.01f64..100.0) {
        let d = DataSet::from_rows(&data).unwrap();
        prop_assume!(spoclust::max_range(&d) > 1e-6);
        let g = gamma_by_range(&d, 2).unwrap().value();
        let h = gamma_by_range(&transform(&data, |x| x.iter().map(|v| a * v).collect()), 2)
            .unwrap()
            .value();
        prop_assert!((h * a * a / g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bhi_bounded_and_relabel_invariant(
        pairs in prop::collection::vec((0usize..5, 0usize..4), 1..80),
        rot in 0usize..5,
    ) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let b = bhi(&LabeledPartition::new(Partition::new(pred.clone(), 5).unwrap(), truth.clone()).unwrap());
        prop_assert!((0.0..=1.0).contains(&b));
        let relabeled: Vec<usize> = pred.iter().map(|l| (l + rot) % 5).collect();
        let truth2: Vec<usize> = truth.iter().map(|c| 3 - c).collect();
        let c = bhi(&LabeledPartition::new(Partition::new(relabeled, 5).unwrap(), truth2).unwrap());
        prop_assert_eq!(b, c);
    }

    #[test]
    fn lloyd_trace_is_non_increasing(data in rows(2), k in 1usize..4, seed in 0u64..100) {
        let d = DataSet::from_rows(&data).unwrap();
        prop_assume!(k < d.n());
        let fit = kmeans(&d, k, 1, seed).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn ch_invariant_under_rotation_and_translation(
        data in rows(2),
        theta in 0.0f64..std::f64::consts::TAU,
        shift in prop::collection::vec(-100.0f64..100.0, 2),
    ) {
        let d = DataSet::from_rows(&data).unwrap();
        prop_assume!(d.n() >= 4);
        let labels: Vec<usize> = (0..d.n()).map(|i| usize::from(data[i][0] > 0.0) + usize::from(i % 3 == 0)).collect();
        let part = Partition::from_identifiers(&labels);
        prop_assume!(part.k() >= 2 && part.k() < d.n());
        let (c, s) = (theta.cos(), theta.sin());
        let moved = transform(&data, |x| vec![c * x[0] - s * x[1] + shift[0], s * x[0] + c * x[1] + shift[1]]);
        match (ch_index(&d, &part).unwrap(), ch_index(&moved, &part).unwrap()) {
            (ChIndex::Value(a), ChIndex::Value(b)) => prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0)),
            _ => {}
        }
    }

    #[test]
    fn assignment_follows_component_relabeling(data in rows(2), swap in any::<bool>()) {
        let d = DataSet::from_rows(&data).unwrap();
        let comps = vec![
            GaussianComponent::from_slices(&[-3.0, 0.0], &[2.0, 0.3, 0.3, 1.0]).unwrap(),
            GaussianComponent::identity(&[4.0, 1.0]),
        ];
        let g = GammaIndex::new(0.5).unwrap();
        let model = ClusterModel::new(comps.clone(), vec![0.3, 0.7], g, g).unwrap();
        let (ma, a) = assign(&d, model).unwrap();
        let (order, props) = if swap { (vec![1, 0], vec![0.7, 0.3]) } else { (vec![0, 1], vec![0.3, 0.7]) };
        let permuted = ClusterModel::new(order.iter().map(|&i| comps[i].clone()).collect(), props, g, g).unwrap();
        let (mb, b) = assign(&d, permuted).unwrap();
        // Empty components are dropped, so compare the assigned components.
        for (x, y) in a.labels().iter().zip(b.labels()) {
            prop_assert_eq!(ma.components()[*x].mu(), mb.components()[*y].mu());
        }
    }

    #[test]
    fn bimodality_verdict_survives_swapping(
        nu in prop::collection::vec(-4.0f64..4.0, 2),
        sigma2 in 0.25f64..4.0,
        tau1 in 0.05f64..0.95,
        g in 0.1f64..4.0,
    ) {
        prop_assume!(nu.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let spec = TwoComponentSpec::new(nu, sigma2, tau1, GammaIndex::new(g).unwrap()).unwrap();
        let a = check_bimodal(&spec);
        let b = check_bimodal(&spec.swapped());
        prop_assume!(a.d.abs() > 1e-9);
        prop_assert_eq!(a.bimodal, b.bimodal);
    }
}
