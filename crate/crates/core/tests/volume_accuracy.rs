use segqc_core::features::{all_features, center_of_mass_world, segment_volume_ml};
use segqc_core::{Connectivity, LabelVolume, Laterality, SegmentInfo, SegmentMap, SeriesInfo, VolumeGeometry};

fn series() -> SeriesInfo {
    SeriesInfo {
        patient_id: "P".into(),
        study_id: "S".into(),
        series_id: "R".into(),
        acquisition_index: 0,
    }
}

/// Labels voxel centres inside the ellipsoid with label 1.
fn ellipsoid(g: &VolumeGeometry, center: [f64; 3], semi: [f64; 3]) -> LabelVolume {
    let [nx, ny, nz] = g.dims();
    let (o, s) = (g.origin(), g.spacing());
    let mut voxels = vec![0u16; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [o[0] + x as f64 * s[0], o[1] + y as f64 * s[1], o[2] + z as f64 * s[2]];
                let r: f64 = (0..3).map(|k| ((p[k] - center[k]) / semi[k]).powi(2)).sum();
                if r <= 1.0 {
                    voxels[x + nx * (y + ny * z)] = 1;
                }
            }
        }
    }
    let segs = SegmentMap::from_entries([(1, SegmentInfo::new("blob", Laterality::None))]).unwrap();
    LabelVolume::new(g.clone(), voxels, series(), segs).unwrap()
}

fn analytic_ml(semi: [f64; 3]) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * semi[0] * semi[1] * semi[2] / 1000.0
}

#[test]
fn isotropic_ellipsoids_within_three_percent() {
    let g = VolumeGeometry::axis_aligned([64, 64, 64], [1.0; 3], [0.0; 3]).unwrap();
    for semi in [[10.0, 10.0, 10.0], [10.0, 14.5, 21.0], [12.3, 17.7, 25.0], [28.0, 11.0, 19.0]] {
        let v = ellipsoid(&g, [31.7, 32.2, 31.4], semi);
        let got = segment_volume_ml(&v, 1).unwrap();
        let want = analytic_ml(semi);
        assert!((got - want).abs() / want < 0.03, "{semi:?}: {got} vs {want}");
    }
}

#[test]
fn anisotropic_ellipsoids_within_five_percent() {
    let g = VolumeGeometry::axis_aligned([80, 80, 30], [0.7, 0.7, 2.5], [0.0; 3]).unwrap();
    for semi in [[10.0, 10.0, 10.0], [12.0, 15.0, 20.0], [20.0, 11.0, 14.0]] {
        let v = ellipsoid(&g, [28.1, 27.6, 37.3], semi);
        let got = segment_volume_ml(&v, 1).unwrap();
        let want = analytic_ml(semi);
        assert!((got - want).abs() / want < 0.05, "{semi:?}: {got} vs {want}");
    }
}

#[test]
fn center_of_mass_matches_direct_summation() {
    let g = VolumeGeometry::new(
        [20, 18, 12],
        [0.8, 1.1, 2.0],
        [-3.0, 7.5, 11.0],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
    )
    .unwrap();
    // Draw in index space, then attach the rotated geometry.
    let index_space = VolumeGeometry::axis_aligned(g.dims(), [1.0; 3], [0.0; 3]).unwrap();
    let v = ellipsoid(&index_space, [9.0, 8.0, 5.0], [5.0, 4.0, 3.5]).with_geometry(g.clone()).unwrap();
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for (i, &l) in v.voxels().iter().enumerate() {
        if l == 1 {
            let w = g.index_to_world(g.unravel(i).map(|c| c as i64)).unwrap();
            (0..3).for_each(|k| sum[k] += w[k]);
            n += 1.0;
        }
    }
    let com = center_of_mass_world(&v, 1).unwrap().unwrap();
    for k in 0..3 {
        assert!((com[k] - sum[k] / n).abs() < 1e-9);
    }
    let f = &all_features(&v, Connectivity::TwentySix)[&1];
    assert_eq!(f.center_of_mass_world, Some(com));
    assert_eq!(f.connected_component_count, 1);
}

#[test]
fn translation_and_permutation_invariance() {
    let g = VolumeGeometry::axis_aligned([40, 40, 40], [1.0; 3], [0.0; 3]).unwrap();
    let base = ellipsoid(&g, [15.0, 16.0, 17.0], [6.0, 8.0, 10.0]);
    let moved = ellipsoid(&g, [22.0, 19.0, 21.0], [6.0, 8.0, 10.0]);
    let (a, b) = (
        &all_features(&base, Connectivity::TwentySix)[&1],
        &all_features(&moved, Connectivity::TwentySix)[&1],
    );
    assert_eq!(a.voxel_count, b.voxel_count);
    assert_eq!(a.component_sizes, b.component_sizes);
    let (ca, cb) = (a.center_of_mass_world.unwrap(), b.center_of_mass_world.unwrap());
    for (k, d) in [7.0, 3.0, 4.0].iter().enumerate() {
        assert!((cb[k] - ca[k] - d).abs() < 1e-9);
    }

    // Relabelling the segment does not change its features.
    let (geometry, voxels, series, _) = base.clone().into_parts();
    let relabelled: Vec<u16> = voxels.iter().map(|&l| if l == 1 { 9 } else { 0 }).collect();
    let segs = SegmentMap::from_entries([
        (9, SegmentInfo::new("blob", Laterality::None)),
        (1, SegmentInfo::new("other", Laterality::None)),
    ])
    .unwrap();
    let r = LabelVolume::new(geometry, relabelled, series, segs).unwrap();
    let f = all_features(&r, Connectivity::TwentySix);
    assert_eq!(f[&9].voxel_count, a.voxel_count);
    assert_eq!(f[&9].center_of_mass_world, a.center_of_mass_world);
    assert_eq!(f[&1].voxel_count, 0);
}
