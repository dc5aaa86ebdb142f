//! Position metrics from contact coordinates.

use cochlea_plan::geometry::{synth_cochlea, CochlearScene, Point, SpiralParams};
use cochlea_plan::metrics::{
    base_depth_error, classify_scalar, compute_aid, compute_amd, compute_mmd, detect_fold,
    is_folded, write_metrics_csv, ContactLocation, MetricsConfig, PostOpRecord, Precomputed,
    ScalarLabel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene() -> CochlearScene {
    synth_cochlea(&SpiralParams {
        seed: 5,
        ..Default::default()
    })
    .unwrap()
}

/// Contacts on the duct centerline at the given angles, tip first.
fn on_centerline(scene: &CochlearScene, base_to_tip: &[f64]) -> Vec<Point> {
    base_to_tip
        .iter()
        .rev()
        .map(|d| scene.st_point_at(*d).unwrap())
        .collect()
}

fn even(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
        .collect()
}

#[test]
fn aid_is_the_angle_of_the_tip_contact() {
    let s = scene();
    for tip in [180.0, 390.0, 452.0, 520.0] {
        let contacts = on_centerline(&s, &even(5.0, tip, 22));
        let aid = compute_aid(&s, &contacts).unwrap();
        assert!((aid - tip).abs() <= 1.0, "{aid} vs {tip}");
    }
}

#[test]
fn distances_average_brute_force_wall_distances() {
    let s = scene();
    let contacts = on_centerline(&s, &even(5.0, 450.0, 22));
    let d: Vec<f64> = contacts
        .iter()
        .map(|p| {
            (0..s.modiolar_wall.triangles().len())
                .flat_map(|i| s.modiolar_wall.triangle(i))
                .map(|v| (v - p).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mmd = compute_mmd(&s, &contacts).unwrap();
    let amd = compute_amd(&s, &contacts).unwrap();
    // the nearest vertex bounds the nearest surface point from above
    assert!(mmd <= d.iter().sum::<f64>() / 22.0 + 1e-12);
    assert!(amd <= d[..11].iter().sum::<f64>() / 11.0 + 1e-12);
    let exact: f64 = contacts
        .iter()
        .map(|p| s.modiolar_wall.distance(p).unwrap())
        .sum::<f64>()
        / 22.0;
    assert!((mmd - exact).abs() < 1e-12);
    let apical: f64 = contacts[..11]
        .iter()
        .map(|p| s.modiolar_wall.distance(p).unwrap())
        .sum::<f64>()
        / 11.0;
    assert!((amd - apical).abs() < 1e-12);
    // fewer than eleven contacts: all of them
    assert!(
        (compute_amd(&s, &contacts[..4]).unwrap() - compute_mmd(&s, &contacts[..4]).unwrap()).abs()
            < 1e-12
    );
}

#[test]
fn a_contact_in_the_vestibuli_is_a_translocation() {
    let s = scene();
    let mut contacts = on_centerline(&s, &even(5.0, 450.0, 22));
    let c = classify_scalar(&s, &contacts).unwrap();
    assert_eq!(c.label, ScalarLabel::St);
    assert!(c.contacts.iter().all(|l| *l == ContactLocation::St));

    let (lo, hi) = s.sv.bounds().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let in_sv = loop {
        let p = Point::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        if s.sv.contains(&p).unwrap() && !s.st.contains(&p).unwrap() {
            break p;
        }
    };
    contacts[3] = in_sv;
    let c = classify_scalar(&s, &contacts).unwrap();
    assert_eq!(c.label, ScalarLabel::StSv);
    assert_eq!(c.contacts[3], ContactLocation::Sv);
    contacts[3] = Point::new(hi.x + 50.0, 0.0, 0.0);
    let c = classify_scalar(&s, &contacts).unwrap();
    assert_eq!(
        (c.label, c.contacts[3]),
        (ScalarLabel::StSv, ContactLocation::Outside)
    );
}

#[test]
fn a_reversed_tip_is_a_fold() {
    let s = scene();
    let mut angles = even(5.0, 400.0, 22);
    assert!(!detect_fold(&s, &on_centerline(&s, &angles), 30.0).unwrap());
    // the last three contacts turn back by 60 deg
    angles[19] = 360.0;
    angles[20] = 340.0;
    angles[21] = 320.0;
    assert!(detect_fold(&s, &on_centerline(&s, &angles), 30.0).unwrap());
    assert!(!detect_fold(&s, &on_centerline(&s, &angles), 90.0).unwrap());
}

proptest! {
    #[test]
    fn monotone_sequences_never_fold(steps in prop::collection::vec(0.0..40.0f64, 3..30), t in 0.1..90.0f64) {
        let angles: Vec<f64> = steps.iter().scan(0.0, |a, s| { *a += s; Some(*a) }).collect();
        prop_assert!(!is_folded(&angles, t));
    }

    #[test]
    fn a_drop_beyond_the_threshold_folds(steps in prop::collection::vec(1.0..40.0f64, 3..30), t in 1.0..90.0f64, extra in 0.01..10.0f64) {
        let mut angles: Vec<f64> = steps.iter().scan(0.0, |a, s| { *a += s; Some(*a) }).collect();
        let peak = *angles.last().unwrap();
        angles.push(peak - t - extra);
        prop_assert!(is_folded(&angles, t));
        *angles.last_mut().unwrap() = peak - t + 1e-9;
        prop_assert!(!is_folded(&angles, t));
    }
}

#[test]
fn base_depth_error_is_actual_minus_planned() {
    assert!((base_depth_error(Some(-0.5), Some(0.25)).unwrap() - 0.75).abs() < 1e-12);
    assert!(base_depth_error(None, Some(1.0)).is_err());
    assert!(base_depth_error(Some(1.0), None).is_err());
}

#[test]
fn records_use_precomputed_values_or_derive_them() {
    let s = scene();
    let cfg = MetricsConfig::default();
    let contacts = on_centerline(&s, &even(5.0, 430.0, 22));
    let derived = PostOpRecord {
        case_id: "A".into(),
        contact_centers: Some(contacts.clone()),
        planned_base_depth: Some(0.0),
        actual_base_depth: Some(-0.4),
        precomputed: None,
    };
    let m = derived.evaluate(Some(&s), &cfg).unwrap();
    assert!((m.aid_error_deg - (m.aid_deg - 450.0)).abs() < 1e-12);
    assert!((m.d_mm.unwrap() + 0.4).abs() < 1e-12);
    assert!(derived.evaluate(None, &cfg).is_err());

    let consistent = PostOpRecord {
        precomputed: Some(Precomputed {
            aid_deg: m.aid_deg,
            mmd_mm: m.mmd_mm,
            amd_mm: m.amd_mm,
            scalar_label: m.scalar_label,
            fold_flag: m.fold,
            d_mm: Some(-0.4),
        }),
        ..derived.clone()
    };
    consistent.validate(Some(&s), &cfg).unwrap();
    let mut wrong = consistent.clone();
    wrong.precomputed.as_mut().unwrap().aid_deg += 5.0;
    assert!(wrong.validate(Some(&s), &cfg).is_err());
    let mut wrong = consistent.clone();
    wrong.precomputed.as_mut().unwrap().scalar_label = ScalarLabel::StSv;
    assert!(wrong.validate(Some(&s), &cfg).is_err());
    let mut wrong = consistent.clone();
    wrong.precomputed.as_mut().unwrap().d_mm = Some(0.4);
    assert!(wrong.validate(None, &cfg).is_err());

    let table_only = PostOpRecord {
        case_id: "B".into(),
        contact_centers: None,
        planned_base_depth: None,
        actual_base_depth: None,
        precomputed: Some(Precomputed {
            aid_deg: 441.0,
            mmd_mm: 0.3,
            amd_mm: 0.2,
            scalar_label: ScalarLabel::St,
            fold_flag: false,
            d_mm: None,
        }),
    };
    let t = table_only.evaluate(None, &cfg).unwrap();
    assert_eq!(
        (t.aid_error_deg, t.d_mm, t.max_extent_deg),
        (-9.0, None, None)
    );
    let empty = PostOpRecord {
        precomputed: None,
        ..table_only
    };
    assert!(empty.validate(None, &cfg).is_err());
}

#[test]
fn csv_rounds_angles_to_degrees_and_distances_to_hundredths() {
    let rows = vec![cochlea_plan::metrics::PositionMetrics {
        case_id: "C1".into(),
        aid_deg: 452.6,
        aid_error_deg: 2.6,
        mmd_mm: 0.234,
        amd_mm: 0.1,
        scalar_label: ScalarLabel::StSv,
        fold: true,
        d_mm: Some(-0.456),
        max_extent_deg: None,
    }];
    let mut out = Vec::new();
    write_metrics_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "case_id,d_mm,scalar,fold,aid_deg,aid_error_deg,mmd_mm,amd_mm,max_extent_deg"
    );
    assert_eq!(lines.next().unwrap(), "C1,-0.46,ST/SV,Y,453,3,0.23,0.10,");
}
