use proptest::prelude::*;
use segqc_core::cohort::report::{lr_diff_csv, stage_tests_csv, upset_csv};
use segqc_core::cohort::{
    compare_reference, default_chain, lr_diff_stats, parse_heuristic_filters, read_reference_csv, stage_tests,
    summary_by_structure, upset_counts, upset_key, within_patient_sd, CohortTable, FilterSpec, ReferenceRange,
    Requirement,
};
use segqc_core::phantom::{DefectRates, PhantomSpec};
use segqc_core::{evaluate_series, Heuristic, HeuristicConfig, Laterality, LateralityOutcome, Measurements, SegmentQCRecord};

fn record(patient: &str, series: &str, structure: &str, lat: Laterality, ml: f64, pass: [bool; 4]) -> SegmentQCRecord {
    SegmentQCRecord {
        patient_id: patient.into(),
        study_id: format!("{patient}-T0"),
        series_id: series.into(),
        acquisition_index: 0,
        structure: structure.into(),
        laterality: lat,
        measurements: Measurements {
            voxel_count: (ml * 1000.0) as u64,
            volume_ml: ml,
            center_of_mass_world: Some([0.0; 3]),
            connected_component_count: 1,
            largest_component_voxels: (ml * 1000.0) as usize,
            z_extent: Some((1, 2)),
        },
        completeness_pass: pass[0],
        connected_pass: pass[1],
        laterality_pass: if lat == Laterality::None {
            LateralityOutcome::NotApplicable
        } else {
            LateralityOutcome::from_bool(pass[2])
        },
        min_volume_pass: pass[3],
    }
}

#[test]
fn summary_percentages() {
    let recs: Vec<_> = (0..10)
        .map(|i| record("P1", &format!("S{i}"), "liver", Laterality::None, 10.0, [i < 7, true, true, true]))
        .collect();
    let rows = summary_by_structure(&CohortTable::new(recs).unwrap());
    assert_eq!(rows.len(), 4);
    let c = rows.iter().find(|r| r.heuristic == Heuristic::Completeness).unwrap();
    assert_eq!((c.pass, c.total, c.pct), (7, 10, Some(70.0)));
    let l = rows.iter().find(|r| r.heuristic == Heuristic::Laterality).unwrap();
    assert_eq!((l.total, l.pct), (0, None));
    assert!(summary_by_structure(&CohortTable::default()).is_empty());
}

#[test]
fn upset_single_record_and_na() {
    let t = CohortTable::new(vec![record("P", "S", "liver", Laterality::None, 9.0, [true; 4])]).unwrap();
    let u = upset_counts(&t);
    assert_eq!(u.counts.len(), 16);
    assert_eq!(u.get("PPPP"), 1);
    assert_eq!(u.total(), 1);
    assert_eq!(upset_key(&t.records()[0], false), "PPFP");
    let csv = upset_csv(&u);
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("combination,count\n"));
}

#[test]
fn duplicate_keys_rejected() {
    let r = record("P", "S", "liver", Laterality::None, 9.0, [true; 4]);
    assert!(CohortTable::new(vec![r.clone(), r]).is_err());
}

#[test]
fn within_patient_sd_examples() {
    let mut recs = Vec::new();
    for (i, v) in [5.0, 5.0, 5.0].iter().enumerate() {
        recs.push(record("A", &format!("A{i}"), "liver", Laterality::None, *v, [true; 4]));
    }
    for (i, v) in [4.0, 6.0].iter().enumerate() {
        recs.push(record("B", &format!("B{i}"), "liver", Laterality::None, *v, [true; 4]));
    }
    recs.push(record("C", "C0", "liver", Laterality::None, 7.0, [true; 4]));
    let t = CohortTable::new(recs.clone()).unwrap();
    let sds = within_patient_sd(&t, "liver", None, &FilterSpec::new());
    assert_eq!(sds.len(), 2);
    assert_eq!(sds[0].sd, 0.0);
    assert!((sds[1].sd - 2f64.sqrt()).abs() < 1e-15);
    recs.reverse();
    let again = within_patient_sd(&CohortTable::new(recs).unwrap(), "liver", None, &FilterSpec::new());
    assert_eq!(again, sds);
}

#[test]
fn lr_diff_symmetric_and_unpaired() {
    let mut recs = Vec::new();
    for i in 0..6 {
        let p = format!("P{}", i % 3);
        let s = format!("S{i}");
        recs.push(record(&p, &s, "rib_4", Laterality::Left, 10.0 + i as f64, [i != 0, true, true, true]));
        recs.push(record(&p, &s, "rib_4", Laterality::Right, 10.0 + i as f64, [true; 4]));
    }
    recs.push(record("P0", "S0", "liver", Laterality::None, 20.0, [true; 4]));
    let t = CohortTable::new(recs).unwrap();
    let stages = lr_diff_stats(&t, "rib_4", &default_chain()).unwrap();
    assert_eq!(
        stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(),
        ["0", "A", "AB", "ABC", "ABCD"]
    );
    assert_eq!(stages[0].n, 6);
    assert_eq!(stages[1].n, 5);
    for s in &stages {
        assert_eq!(s.mean, Some(0.0));
        assert_eq!(s.sd, Some(0.0));
    }
    let no_filters = lr_diff_stats(&t, "rib_4", &[]).unwrap();
    assert_eq!(no_filters.len(), 1);
    assert_eq!(no_filters[0], stages[0]);
    assert!(matches!(lr_diff_stats(&t, "liver", &default_chain()), Err(segqc_core::Error::Domain(_))));
    let text = lr_diff_csv(&stages);
    assert!(text.starts_with("stage,n,mean,sd\n0,6,0,0\n"));
}

#[test]
fn reference_comparison() {
    let mut recs = Vec::new();
    for (i, v) in [10.0, 12.0].iter().enumerate() {
        recs.push(record(&format!("P{i}"), &format!("S{i}"), "T5", Laterality::None, *v, [true; 4]));
    }
    recs.push(record("P0", "S0", "T8", Laterality::None, 15.0, [true; 4]));
    let t = CohortTable::new(recs).unwrap();
    let refs = read_reference_csv("structure,meanMl,sdMl,source\nT5,11,1.4142135623730951,lit\nT8,15,0,lit\nT12,30,2,lit\n".as_bytes()).unwrap();
    let c = compare_reference(&t, &refs, &FilterSpec::new()).unwrap();
    assert_eq!(c.rows.len(), 2);
    assert_eq!(c.omitted, vec!["T12".to_string()]);
    assert_eq!(c.rows[0].mean_diff, 0.0);
    assert!((c.rows[0].cohort_sd.unwrap() - refs[0].sd_ml).abs() < 1e-12);
    assert_eq!(c.rows[1].cohort_sd, None);
    assert!(c.monotonic);
    let flipped = vec![
        ReferenceRange { mean_ml: 20.0, ..refs[0].clone() },
        refs[1].clone(),
    ];
    assert!(!compare_reference(&t, &flipped, &FilterSpec::new()).unwrap().monotonic);
    assert!(compare_reference(&t, &[], &FilterSpec::new()).is_err());
    assert!(read_reference_csv("structure,meanMl,sdMl,source\nT5,11,-1,lit\n".as_bytes()).is_err());
    assert!(read_reference_csv("structure,mean,sdMl,source\n".as_bytes()).is_err());
}

fn phantom_table(rates: DefectRates, patients: u32, seed: u64) -> CohortTable {
    let spec = PhantomSpec { patients, defect_rates: rates, random_seed: seed, ..PhantomSpec::default() };
    let cfg = HeuristicConfig::default();
    let recs = spec
        .series_keys()
        .into_iter()
        .flat_map(|k| evaluate_series(&spec.generate_series(k).unwrap().0, &cfg))
        .collect();
    CohortTable::new(recs).unwrap()
}

#[test]
fn phantom_vertebra_ladder_is_monotonic() {
    let t = phantom_table(DefectRates::default(), 6, 1);
    // True volumes: T5 box 24×24×16 mm, T8 box 26×26×18 mm.
    let refs = vec![
        ReferenceRange { structure: "vertebra_T5".into(), mean_ml: 9.216, sd_ml: 0.5, source: "box".into() },
        ReferenceRange { structure: "vertebra_T8".into(), mean_ml: 12.168, sd_ml: 0.6, source: "box".into() },
    ];
    assert!(compare_reference(&t, &refs, &FilterSpec::new()).unwrap().monotonic);
}

#[test]
fn truncation_lowers_lr_spread_after_completeness() {
    let t = phantom_table(DefectRates { truncation: 0.2, ..Default::default() }, 10, 2);
    let stages = lr_diff_stats(&t, "kidney", &default_chain()).unwrap();
    assert!(stages[1].sd.unwrap() < stages[0].sd.unwrap());
    for w in stages[1..].windows(2) {
        assert!(w[1].sd.unwrap() <= w[0].sd.unwrap());
    }
    let tests = stage_tests(&stages, None);
    assert_eq!(tests.len(), 5);
    assert_eq!(tests[0].stage_pair, "0-A");
    assert_eq!(tests[4].stage_pair, "0-ABCD");
    assert!(stage_tests_csv(&tests).starts_with("stagePair,beta1,waldZ,pValue,isSignificant\n"));
}

#[test]
fn filtered_sd_not_above_unfiltered_with_defects() {
    let t = phantom_table(DefectRates { truncation: 0.15, shrink: 0.1, ..Default::default() }, 10, 3);
    let before = within_patient_sd(&t, "liver", None, &FilterSpec::new());
    let all_pass = parse_heuristic_filters("completeness=pass,connected=pass,minVolume=pass").unwrap();
    let after = within_patient_sd(&t, "liver", None, &all_pass);
    let med = |v: &[segqc_core::cohort::PatientSd]| {
        segqc_core::stats::median(&v.iter().map(|p| p.sd).collect::<Vec<_>>()).unwrap()
    };
    assert!(med(&after) <= med(&before));
}

fn arb_record() -> impl Strategy<Value = SegmentQCRecord> {
    (
        0usize..4,
        0usize..3,
        prop_oneof![Just(Laterality::Left), Just(Laterality::Right), Just(Laterality::None)],
        prop::array::uniform4(any::<bool>()),
        1.0f64..30.0,
    )
        .prop_map(|(p, s, lat, pass, ml)| {
            record(&format!("P{p}"), "S", &format!("s{s}"), lat, ml, pass)
        })
}

fn arb_table() -> impl Strategy<Value = CohortTable> {
    prop::collection::vec(arb_record(), 0..60).prop_map(|recs| {
        let recs = recs
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.series_id = format!("S{i}");
                r
            })
            .collect();
        CohortTable::new(recs).unwrap()
    })
}

fn arb_filter() -> impl Strategy<Value = FilterSpec> {
    let req = prop_oneof![Just(Requirement::Pass), Just(Requirement::Fail), Just(Requirement::Any)];
    (
        prop::option::of(0usize..3),
        prop::option::of(prop_oneof![Just(Laterality::Left), Just(Laterality::Right), Just(Laterality::None)]),
        prop::array::uniform4(req),
        any::<bool>(),
    )
        .prop_map(|(s, lat, reqs, na_as_pass)| {
            let mut f = FilterSpec::new();
            if let Some(s) = s {
                f = f.structure(format!("s{s}"));
            }
            if let Some(l) = lat {
                f = f.laterality(l);
            }
            for (h, r) in Heuristic::ALL.into_iter().zip(reqs) {
                f = f.with(h, r).unwrap();
            }
            f.na_laterality_as_pass = na_as_pass;
            f
        })
}

proptest! {
    #[test]
    fn upset_partitions_filtered_tables(t in arb_table(), f in arb_filter()) {
        let sub = t.apply_filters(&f);
        prop_assert_eq!(upset_counts(&sub).total(), sub.len() as u64);
        prop_assert_eq!(sub.apply_filters(&f), sub.clone());
    }

    #[test]
    fn successive_filters_equal_conjunction(t in arb_table(), a in arb_filter(), b in arb_filter()) {
        if let Ok(both) = a.and(&b) {
            prop_assert_eq!(t.apply_filters(&a).apply_filters(&b), t.apply_filters(&both));
            prop_assert_eq!(t.apply_filters(&b).apply_filters(&a), t.apply_filters(&both));
        }
    }
}
