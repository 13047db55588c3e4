use margin_forge::data::{self, ManifoldKind, ManifoldSpec, PNorm};
use margin_forge::robustness::{self, build_delta_cover, certify, check_probe, find_violation, Cover, CoverMethod};

fn segments(samples_per_class: usize) -> ManifoldSpec {
    ManifoldSpec { kind: ManifoldKind::ParallelSegments, k: 1, m: 2, r_p: 1.0, samples_per_class, seed: 17 }
}

fn covers_for(spec: &ManifoldSpec, delta: f64, method: CoverMethod) -> [Cover; 2] {
    let ds = data::generate_manifold(spec).unwrap();
    let build = |class: usize| {
        let pts: Vec<Vec<f64>> = ds.class_points(class).iter().map(|p| p.to_vec()).collect();
        build_delta_cover(&pts, class, delta, PNorm::L2, method).unwrap()
    };
    [build(0), build(1)]
}

fn brute_force_covered(cover: &Cover, samples: &[Vec<f64>]) -> bool {
    samples.iter().all(|x| cover.centers.iter().any(|c| ((c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2)).sqrt() <= cover.delta))
}

#[test]
fn unit_segment_at_step_one_hundredth() {
    let samples: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
    let cover = build_delta_cover(&samples, 0, 0.1, PNorm::L2, CoverMethod::GreedyCoverage).unwrap();
    assert!(cover.centers.len() <= 6, "{} centers", cover.centers.len());
    assert!(brute_force_covered(&cover, &samples));
    let fp = build_delta_cover(&samples, 0, 0.1, PNorm::L2, CoverMethod::FarthestPoint).unwrap();
    assert!(brute_force_covered(&fp, &samples));
}

#[test]
fn cover_property_for_generated_classes() {
    let spec = segments(300);
    let ds = data::generate_manifold(&spec).unwrap();
    for method in [CoverMethod::GreedyCoverage, CoverMethod::FarthestPoint] {
        for class in 0..2 {
            let pts: Vec<Vec<f64>> = ds.class_points(class).iter().map(|p| p.to_vec()).collect();
            let cover = build_delta_cover(&pts, class, 0.2, PNorm::L2, method).unwrap();
            assert!(brute_force_covered(&cover, &pts));
        }
    }
}

#[test]
fn cover_fails_below_sample_gap() {
    let samples: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
    assert!(build_delta_cover(&samples, 0, 0.05, PNorm::L2, CoverMethod::GreedyCoverage).is_err());
}

#[test]
fn neighbourhood_samples_are_within_epsilon_of_the_segment() {
    let spec = segments(10);
    for class in 0..2 {
        let pts = data::sample_epsilon_neighborhood(&spec, class, 0.2, PNorm::L2, 5000, 3).unwrap();
        let y0 = if class == 0 { 0.0 } else { spec.r_p };
        for p in &pts {
            let dx = (-p[0]).max(p[0] - 1.0).max(0.0);
            let dist = (dx * dx + (p[1] - y0).powi(2)).sqrt();
            assert!(dist <= 0.2 + 1e-12);
        }
        assert_eq!(pts, data::sample_epsilon_neighborhood(&spec, class, 0.2, PNorm::L2, 5000, 3).unwrap());
    }
    let on = data::sample_epsilon_neighborhood(&spec, 1, 0.0, PNorm::L2, 100, 4).unwrap();
    assert!(on.iter().all(|p| p[1] == spec.r_p && (0.0..=1.0).contains(&p[0])));
}

#[test]
fn certified_regime_has_no_misclassifications() {
    let spec = segments(400);
    let covers = covers_for(&spec, 0.5, CoverMethod::GreedyCoverage);
    let r = certify(&covers, &spec, 0.2, 10_000, 5).unwrap();
    assert!(r.theorem_condition_met);
    assert_eq!(r.misclassified, 0);

    let r0 = certify(&covers, &spec, 0.0, 2000, 6).unwrap();
    assert_eq!(r0.misclassified, 0);
}

#[test]
fn oversized_cover_admits_a_constructed_violation() {
    let spec = segments(10);
    let covers = [
        Cover::from_centers(0, vec![vec![0.0, 0.0]], 1.5, PNorm::L2).unwrap(),
        Cover::from_centers(1, vec![vec![1.0, 1.0]], 1.5, PNorm::L2).unwrap(),
    ];
    // Within 0.2 of class 0 at (1, 0), but closer to (1, 1) than to (0, 0).
    let v = check_probe(&covers, &spec, 0, 0.2, &[1.0, 0.2]).unwrap().expect("violation");
    assert_eq!(v.predicted, 1);
    assert!((v.distance_to_class - 0.2).abs() < 1e-12);
    assert!(find_violation(&covers, &spec, 0.2, 10_000, 7).unwrap().is_some());
    assert!(check_probe(&covers, &spec, 0, 0.2, &[0.5, 0.5]).is_err());
}

#[test]
fn shrinking_delta_does_not_add_misclassifications() {
    let spec = segments(400);
    let mut last = usize::MAX;
    for delta in [1.5, 1.2, 1.0, 0.8, 0.6, 0.5, 0.3] {
        let covers = covers_for(&spec, delta, CoverMethod::GreedyCoverage);
        let r = certify(&covers, &spec, 0.2, 5000, 8).unwrap();
        assert!(r.misclassified <= last, "delta {delta}: {} after {last}", r.misclassified);
        last = r.misclassified;
    }
}

#[test]
fn classify_picks_nearest_center() {
    let covers = [
        Cover::from_centers(0, vec![vec![0.0, 0.0], vec![4.0, 0.0]], 1.0, PNorm::L2).unwrap(),
        Cover::from_centers(1, vec![vec![2.0, 0.0]], 1.0, PNorm::L2).unwrap(),
    ];
    assert_eq!(robustness::classify(&covers, &[2.9, 0.0]), 1);
    assert_eq!(robustness::classify(&covers, &[3.1, 0.0]), 0);
}
