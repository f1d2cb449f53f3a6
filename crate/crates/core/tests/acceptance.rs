//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spoclust::bimodality::{check_bimodal, oracle_modes, profile_h, profile_root, TwoComponentSpec};
use spoclust::evaluation::{bhi, LabeledPartition};
use spoclust::objective::loss_mu_gradient;
use spoclust::optimizer::find_center;
use spoclust::select::{aic_penalty, gamma_by_range, select_gamma_aic, CovarianceChoice, GammaGrid};
use spoclust::simulate::{run_experiment, sample_mixture, ExperimentConfig, Method};
use spoclust::{
    detect_centers, find_local_min, objective::loss_mu, DataSet, GammaIndex, GaussianComponent,
    IterationConfig, MixtureSpec, Partition, RestartConfig, UpdateMode,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gamma(v: f64) -> GammaIndex {
    GammaIndex::new(v).unwrap()
}

fn normal_cloud(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataSet {
    let shift: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let scale: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..2.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    let offset = if i % 2 == 0 { shift[j] } else { 0.0 };
                    z * scale[j] + offset
                })
                .collect()
        })
        .collect();
    DataSet::from_rows(&rows).unwrap()
}

fn sample_moments(d: &DataSet) -> (DVector<f64>, DMatrix<f64>) {
    let n = d.n() as f64;
    let mean = DVector::from_vec(d.column_means());
    let mut cov = DMatrix::zeros(d.p(), d.p());
    for x in d.rows() {
        let dev = DVector::from_column_slice(x) - &mean;
        cov += &dev * dev.transpose() / n;
    }
    (mean, cov)
}

fn monotone_descent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = IterationConfig::default();
    let (mut steps, mut repaired, mut worst) = (0usize, 0usize, 0.0f64);
    let (mut plain_rises, mut repaired_rises) = (0usize, 0usize);
    for run in 0..500 {
        let p = rng.gen_range(1..=3);
        let n = rng.gen_range(10..=200);
        let d = normal_cloud(&mut rng, n, p);
        let g = gamma(rng.gen_range(0.1..3.0));
        let start = d.row(rng.gen_range(0..n)).to_vec();
        let (_, cov) = sample_moments(&d);
        let (init, mode) = match run % 3 {
            0 => (GaussianComponent::identity(&start), UpdateMode::MuOnly),
            1 => (
                GaussianComponent::new(DVector::from_vec(d.column_means()), DMatrix::identity(p, p))
                    .unwrap(),
                UpdateMode::SigmaOnly,
            ),
            _ => (
                GaussianComponent::new(DVector::from_vec(start), cov).unwrap(),
                UpdateMode::Joint,
            ),
        };
        let r = find_local_min(&d, &init, g, &cfg, mode).unwrap();
        repaired += r.repaired_steps.len();
        for (t, w) in r.loss_trace.windows(2).enumerate() {
            steps += 1;
            let rise = w[1] - w[0];
            worst = worst.max(rise);
            if rise > 1e-12 {
                if r.repaired_steps.contains(&(t + 1)) {
                    repaired_rises += 1;
                } else {
                    plain_rises += 1;
                }
            }
        }
    }
    outcome(
        plain_rises + repaired_rises == 0,
        format!(
            "{steps} steps, rises > 1e-12: {plain_rises} on plain steps, {repaired_rises} on the \
             {repaired} ridge-repaired steps (largest {worst:.2e})"
        ),
    )
}

fn stationarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = IterationConfig::default();
    let mut worst_grad = 0.0f64;
    let mut converged = 0;
    for _ in 0..100 {
        let p = rng.gen_range(1..=3);
        let d = normal_cloud(&mut rng, 150, p);
        let g = gamma(rng.gen_range(0.1..3.0));
        let r = find_center(&d, d.row(rng.gen_range(0..150)), g, &cfg).unwrap();
        if r.converged {
            converged += 1;
            let mu: Vec<f64> = r.component.mu().iter().copied().collect();
            let grad = loss_mu_gradient(&d, &mu, g).unwrap();
            worst_grad = worst_grad.max(grad.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    let mut worst_fd = 0.0f64;
    for _ in 0..20 {
        let p = rng.gen_range(1..=3);
        let d = normal_cloud(&mut rng, 100, p);
        let g = gamma(rng.gen_range(0.1..3.0));
        let mu: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let grad = loss_mu_gradient(&d, &mu, g).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..p)
            .map(|j| {
                let mut up = mu.clone();
                let mut down = mu.clone();
                up[j] += h;
                down[j] -= h;
                (loss_mu(&d, &up, g).unwrap() - loss_mu(&d, &down, g).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(diff / scale);
    }
    let bound = 100.0 * cfg.epsilon;
    outcome(
        converged > 0 && worst_grad < bound && worst_fd < 1e-4,
        format!("{converged}/100 converged, max |grad| {worst_grad:.2e} (< {bound:.0e}), max relative FD error {worst_fd:.2e}"),
    )
}

fn vanishing_gamma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = rng.gen_range(1..=3);
        let d = normal_cloud(&mut rng, 120, p);
        let init = GaussianComponent::identity(d.row(0));
        let r = find_local_min(&d, &init, gamma(1e-12), &IterationConfig::default(), UpdateMode::Joint)
            .unwrap();
        let (mean, cov) = sample_moments(&d);
        worst = worst
            .max((r.component.mu() - mean).amax())
            .max((r.component.sigma() - cov).amax());
    }
    outcome(worst < 1e-6, format!("max deviation from the sample moments {worst:.2e}"))
}

fn two_component_detection() -> Outcome {
    let spec = MixtureSpec::equal_weights(vec![
        GaussianComponent::identity(&[0.0]),
        GaussianComponent::identity(&[10.0]),
    ])
    .unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let (d, _) = sample_mixture(&spec, 200, seed).unwrap();
        let det = detect_centers(
            &d,
            gamma(1.0),
            &RestartConfig::default().with_seed(seed),
            &IterationConfig::default(),
        )
        .unwrap();
        let mut c: Vec<f64> = det.centers.centers().iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        if c.len() == 2 && c[0].abs() < 0.5 && (c[1] - 10.0).abs() < 0.5 {
            hits += 1;
        }
    }
    outcome(hits >= 95, format!("{hits}/100 seeds found exactly two centers near 0 and 10"))
}

fn five_spherical() -> (Outcome, Outcome) {
    let mut cfg = ExperimentConfig::five_spherical(100);
    cfg.gamma_grid = GammaGrid::log_spaced(0.2, 2.0, 10).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let s = |m| report.summary(m).unwrap();
    let (aic, range, ch, gap) = (
        s(Method::SpontAic),
        s(Method::SpontRange),
        s(Method::KmeansCh),
        s(Method::KmeansGap),
    );
    let freq = format!(
        "K=5: spont_aic {}, spont_range {}, kmeans_ch {}; kmeans_gap modal K {} ({} runs)",
        aic.frequency(5),
        range.frequency(5),
        ch.frequency(5),
        gap.modal_k(),
        gap.frequency(gap.modal_k())
    );
    let bhis = [aic, range, ch, gap].map(|m| m.mean_bhi.unwrap_or(f64::NAN));
    let table = outcome(
        aic.frequency(5) >= 90 && range.frequency(5) >= 80 && ch.frequency(5) >= 95 && gap.modal_k() == 1,
        freq,
    );
    let homogeneity = outcome(
        bhis[0] >= 0.90 && bhis[2] >= 0.90 && bhis[3] <= 0.5,
        format!(
            "mean BHI: spont_aic {:.3}, spont_range {:.3}, kmeans_ch {:.3}, kmeans_gap {:.3}",
            bhis[0], bhis[1], bhis[2], bhis[3]
        ),
    );
    (table, homogeneity)
}

fn two_ellipsoidal() -> Outcome {
    let cfg = ExperimentConfig::two_ellipsoidal(100);
    let report = run_experiment(&cfg).unwrap();
    let s = report.summary(Method::SpontAic).unwrap();
    let dm = s.mean_dm.clone().unwrap_or_default();
    let dv = s.mean_dv.clone().unwrap_or_default();
    let bhi = s.mean_bhi.unwrap_or(f64::NAN);
    let pass = s.frequency(2) >= 95
        && bhi >= 0.98
        && !dm.is_empty()
        && dm.iter().all(|&v| v <= 0.4)
        && dv.iter().all(|&v| v <= 1.0)
        && !dv.is_empty();
    outcome(
        pass,
        format!(
            "K=2 in {} runs, mean BHI {bhi:.3}, DM {dm:.3?}, DV {dv:.3?}",
            s.frequency(2)
        ),
    )
}

fn bimodality_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut checked, mut skipped, mut disagree, mut bound_miss, mut bimodal) = (0, 0, 0, 0, 0);
    while checked < 2000 {
        let p = rng.gen_range(1..=3);
        let dir: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = rng.gen_range(0.1..6.0);
        let nu: Vec<f64> = dir.iter().map(|v| v / len * norm).collect();
        let spec = TwoComponentSpec::new(
            nu,
            rng.gen_range(0.25..4.0),
            rng.gen_range(0.05..0.95),
            gamma(rng.gen_range(0.1..4.0)),
        )
        .unwrap();
        let near_boundary = spec.d().abs() <= 1e-3
            || profile_root(&spec).map_or(false, |r| {
                profile_h(&spec, -r).unwrap().abs() <= 1e-3 || profile_h(&spec, r).unwrap().abs() <= 1e-3
            });
        if near_boundary {
            skipped += 1;
            continue;
        }
        checked += 1;
        let verdict = check_bimodal(&spec);
        let modes = oracle_modes(&spec, 20_000).unwrap();
        if verdict.bimodal != (modes.count() == 2) {
            disagree += 1;
        }
        if let Some(bound) = verdict.displacement_bound {
            bimodal += 1;
            let norm = spec.nu_norm();
            for &t in &modes.minima {
                if norm * (1.0 - t.abs()) > bound + modes.spacing * norm {
                    bound_miss += 1;
                }
            }
        }
    }
    outcome(
        disagree == 0 && bound_miss == 0,
        format!("{checked} specs ({bimodal} bimodal, {skipped} near-boundary skipped): {disagree} disagreements, {bound_miss} bound violations"),
    )
}

fn bimodality_endpoints() -> Outcome {
    let edge = TwoComponentSpec::new(vec![1.0, 1.0], 1.0, 0.5, gamma(1.0)).unwrap();
    let far = TwoComponentSpec::new(vec![2.0, 2.0], 1.0, 0.5, gamma(1.0)).unwrap();
    let (a, b) = (check_bimodal(&edge), check_bimodal(&far));
    outcome(
        a.d == 0.0 && !a.bimodal && b.bimodal,
        format!("nu=(1,1): d = {}, bimodal {}; nu=(2,2): d = {}, bimodal {}", a.d, a.bimodal, b.d, b.bimodal),
    )
}

fn range_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut exact, mut worst_scale) = (true, 0.0f64);
    for _ in 0..100 {
        let p = rng.gen_range(1..=4);
        let d = normal_cloud(&mut rng, 30, p);
        let r = spoclust::max_range(&d);
        exact &= gamma_by_range(&d, 2).unwrap().value() == 72.0 / (r * r);
        let a = rng.gen_range(0.1..10.0);
        let scaled = d.map(|_, v| a * v).unwrap();
        let ratio = gamma_by_range(&scaled, 2).unwrap().value() / gamma_by_range(&d, 2).unwrap().value();
        worst_scale = worst_scale.max((ratio * a * a - 1.0).abs());
    }
    outcome(
        exact && worst_scale < 1e-14,
        format!("72/R^2 bit-exact: {exact}; max relative scaling error {worst_scale:.1e}"),
    )
}

fn aic_penalties() -> Outcome {
    let got = [(1, 1), (5, 2), (3, 9)].map(|(k, p)| aic_penalty(k, p));
    outcome(got == [4.0, 58.0, 328.0], format!("penalties {got:?}"))
}

fn bhi_properties() -> Outcome {
    let labels = vec![0, 0, 1, 1, 2, 2, 2, 3, 3];
    let perfect = bhi(&LabeledPartition::new(Partition::new(labels.clone(), 4).unwrap(), labels).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(5..100);
        let k = rng.gen_range(1..6);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let relabeled: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
        let a = bhi(&LabeledPartition::new(Partition::new(pred, k).unwrap(), truth.clone()).unwrap());
        let b = bhi(&LabeledPartition::new(Partition::new(relabeled, k).unwrap(), truth).unwrap());
        worst = worst.max((a - b).abs());
    }
    outcome(
        perfect == 1.0 && worst == 0.0,
        format!("perfect labeling {perfect}; max change under relabeling {worst:.1e}"),
    )
}

/// Three groups of 15 in nine features, standing in for a real compositional
/// dataset: one dominant feature with a wide range, the rest small, and
/// compact groups.
fn nine_feature_standin() -> Outcome {
    let means: [[f64; 9]; 3] = [
        [18.0, 10.5, 6.75, 4.5, 0.3, 1.35, 1.35, 0.0, 0.15],
        [25.5, 2.25, 0.9, 0.3, 0.15, 4.8, 0.45, 0.0, 0.15],
        [28.5, 6.75, 3.0, 1.5, 0.15, 1.5, 1.2, 0.0, 0.15],
    ];
    let mixture = MixtureSpec::equal_weights(
        means
            .iter()
            .map(|m| {
                GaussianComponent::new(DVector::from_row_slice(m), DMatrix::identity(9, 9) * 0.25)
                    .unwrap()
            })
            .collect(),
    )
    .unwrap();
    let (d, _) = sample_mixture(&mixture, 45, 5).unwrap();
    let rcfg = RestartConfig::default().with_seed(5);
    let icfg = IterationConfig::default();
    let g = gamma_by_range(&d, 2).unwrap();
    let range_k = spoclust::spontaneous_cluster_fixed_identity(&d, g, &rcfg, &icfg)
        .map(|c| c.k())
        .unwrap_or(0);
    let report = select_gamma_aic(
        &d,
        &GammaGrid::log_spaced(0.05, 2.0, 20).unwrap(),
        &rcfg,
        &icfg,
        CovarianceChoice::FixedIdentity,
    )
    .unwrap();
    let aic_k = report.best().k;
    outcome(
        range_k == 3 && aic_k == 3,
        format!(
            "range gamma {:.3} -> K = {range_k}; AIC gamma {:.3} -> K = {aic_k}",
            g.value(),
            report.best_gamma().value()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut line = |id: &str, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!(
            "[{verdict}] {id:>2} {name}: {} ({:.1}s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    line("1", "monotone descent", &monotone_descent);
    line("2", "stationarity", &stationarity);
    line("3", "vanishing gamma gives the MLE", &vanishing_gamma);
    line("4", "two-component 1-D detection", &two_component_detection);
    let start = Instant::now();
    let (table, homogeneity) = five_spherical();
    let t = start.elapsed().as_secs_f64();
    line("5", "five spherical clusters, K frequencies", &|| Outcome {
        pass: table.pass,
        detail: format!("{} (shared run {t:.1}s)", table.detail),
    });
    line("6", "five spherical clusters, mean BHI", &|| Outcome {
        pass: homogeneity.pass,
        detail: homogeneity.detail.clone(),
    });
    line("7", "two ellipsoidal clusters", &two_ellipsoidal);
    line("8", "bimodality checker vs oracle", &bimodality_oracle);
    line("9", "bimodality endpoints", &bimodality_endpoints);
    line("10", "range heuristic", &range_rule);
    line("11", "AIC penalty", &aic_penalties);
    line("12", "BHI properties", &bhi_properties);
    line("--", "nine-feature three-group stand-in", &nine_feature_standin);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
