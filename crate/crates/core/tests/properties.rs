use ndarray::Array2;
use proptest::prelude::*;

use reben_core::labeling::{
    extract_multilabels, rasterize_reference_map, retention_decision, ClassNomenclature, CoverageThreshold,
    LandCoverPolygon, LandCoverPolygonSet, MultiLabelSet, ReferenceMap, RetentionReason, NUM_CLASSES, UNLABELED,
};
use reben_core::patch::{PatchExtent, TileExtent};
use reben_core::pipeline::{
    dataset_stats, tile_to_patches, upsample_nearest, DatasetStats, PatchFlags, PatchRecord,
};
use reben_core::split::{assign_split, assign_split_grid_baseline, SplitGeometry, SplitTag, GRID_PERIOD};

const CRS: &str = "EPSG:32632";

fn tile(size: f64) -> TileExtent {
    TileExtent::new("T32UPU", 500_000.0, 5_200_000.0, size, CRS).unwrap()
}

fn pq() -> impl Strategy<Value = (f64, f64)> {
    (0.01f64..0.45, 0.01f64..0.45)
}

/// Nested squares by Chebyshev distance from the tile center.
fn concentric_oracle(s: f64, p: f64, q: f64, dx: f64, dy: f64) -> SplitTag {
    let r = dx.abs().max(dy.abs());
    if r < p.sqrt() * s / 2.0 {
        SplitTag::Test
    } else if r < (p + q).sqrt() * s / 2.0 {
        SplitTag::Validation
    } else {
        SplitTag::Train
    }
}

/// Even-odd ray casting, one ray per point.
fn point_in_rings(rings: &[Vec<(f64, f64)>], x: f64, y: f64) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = ring[i];
            let (xj, yj) = ring[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

fn patch(size: f64) -> PatchExtent {
    PatchExtent::in_tile(&tile(size * 4.0), 1, 1, size)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn region_areas_match_fractions((p, q) in pq(), s in 100.0f64..200_000.0) {
        prop_assume!(p + q < 0.95);
        let g = SplitGeometry::new(s, p, q).unwrap();
        let (train, val, test) = g.region_areas();
        let a = s * s;
        prop_assert!((train / a - (1.0 - p - q)).abs() < 1e-9);
        prop_assert!((val / a - q).abs() < 1e-9);
        prop_assert!((test / a - p).abs() < 1e-9);
    }

    #[test]
    fn split_matches_concentric_oracle((p, q) in pq(), fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        prop_assume!(p + q < 0.95);
        let s = 120_000.0;
        let t = tile(s);
        let g = SplitGeometry::new(s, p, q).unwrap();
        let (cx, cy) = t.center();
        let (x, y) = (t.min_x() + fx * s, t.min_y() + fy * s);
        let expected = concentric_oracle(s, p, q, x - cx, y - cy);
        // skip points within rounding distance of a boundary
        let r = (x - cx).abs().max((y - cy).abs());
        let near = [p.sqrt() * s / 2.0, (p + q).sqrt() * s / 2.0]
            .iter()
            .any(|b| (r - b).abs() < 1e-6);
        prop_assume!(!near);
        prop_assert_eq!(g.classify_point(&t, x, y), expected);
    }

    #[test]
    fn edge_band_is_training((p, q) in pq(), frac in 0.0f64..=1.0, along in 0.0f64..1.0, side in 0usize..4) {
        prop_assume!(p + q < 0.95);
        let s = 96_000.0;
        let t = tile(s);
        let g = SplitGeometry::new(s, p, q).unwrap();
        let m = frac * g.outer_width;
        let a = along * s;
        let (x, y) = match side {
            0 => (t.min_x() + m, t.min_y() + a),
            1 => (t.max_x() - m, t.min_y() + a),
            2 => (t.min_x() + a, t.min_y() + m),
            _ => (t.min_x() + a, t.max_y() - m),
        };
        prop_assert_eq!(g.classify_point(&t, x, y), SplitTag::Train);
    }

    #[test]
    fn every_tiled_patch_gets_one_split(n in 1u32..20, (p, q) in pq()) {
        prop_assume!(p + q < 0.95);
        let ps = 1200.0;
        let t = tile(ps * f64::from(n));
        let g = SplitGeometry::new(t.size, p, q).unwrap();
        let patches = tile_to_patches(&t, ps);
        prop_assert_eq!(patches.len(), (n * n) as usize);
        for patch in &patches {
            prop_assert!(t.contains(patch));
            prop_assert!(assign_split(patch, &t, &g).is_ok());
        }
    }

    #[test]
    fn grid_baseline_is_periodic(col in -50i64..50, row in -50i64..50, dc in -3i64..3, dr in -3i64..3) {
        let cell = 1200.0;
        let at = |c: i64, r: i64| {
            let t = TileExtent::new("g", c as f64 * cell, (r as f64 + 1.0) * cell, cell, CRS).unwrap();
            assign_split_grid_baseline(&PatchExtent::in_tile(&t, 0, 0, cell), cell).unwrap()
        };
        prop_assert_eq!(at(col, row), at(col + dc * GRID_PERIOD, row + dr * GRID_PERIOD));
    }

    #[test]
    fn rasterization_matches_ray_casting(
        tri in prop::collection::vec((-100.0f64..1300.0, -100.0f64..1300.0), 3),
        code in prop::sample::select(vec![112u16, 211, 311, 512, 124]),
    ) {
        let patch = patch(1200.0);
        let ring: Vec<(f64, f64)> = tri.iter().map(|&(x, y)| (patch.origin_x + x, patch.min_y() + y)).collect();
        let Ok(poly) = LandCoverPolygon::new(vec![ring.clone()], code) else { return Ok(()) };
        let nomenclature = ClassNomenclature::default();
        let set = LandCoverPolygonSet::new(CRS, vec![poly]);
        let map = rasterize_reference_map(&set, &patch, 10.0, &nomenclature).unwrap();
        let class = nomenclature.class_of(code).map_or(UNLABELED, u16::from);
        for row in 0..120 {
            for col in 0..120 {
                let x = patch.origin_x + (col as f64 + 0.5) * 10.0;
                let y = patch.origin_y - (row as f64 + 0.5) * 10.0;
                let expected = if point_in_rings(&[ring.clone()], x, y) { class } else { UNLABELED };
                prop_assert_eq!(map.get(col, row), expected, "pixel {},{}", col, row);
            }
        }
    }

    #[test]
    fn coarse_map_samples_fine_map(
        rects in prop::collection::vec((0u32..120, 0u32..120, 1u32..60, 1u32..60, 0usize..19), 1..6),
    ) {
        let patch = patch(1200.0);
        let nomenclature = ClassNomenclature::default();
        let codes: Vec<u16> = (0..NUM_CLASSES)
            .map(|c| nomenclature.codes().find(|(_, k)| *k == Some(c as u8)).unwrap().0)
            .collect();
        let polys = rects
            .iter()
            .map(|&(c, r, w, h, k)| {
                let x0 = patch.origin_x + f64::from(c) * 10.0;
                let y1 = patch.origin_y - f64::from(r) * 10.0;
                LandCoverPolygon::rectangle(x0, y1 - f64::from(h) * 10.0, x0 + f64::from(w) * 10.0, y1, codes[k])
            })
            .collect();
        let set = LandCoverPolygonSet::new(CRS, polys);
        let fine = rasterize_reference_map(&set, &patch, 10.0, &nomenclature).unwrap();
        let coarse = rasterize_reference_map(&set, &patch, 20.0, &nomenclature).unwrap();
        for row in 0..60 {
            for col in 0..60 {
                prop_assert_eq!(coarse.get(col, row), fine.get(2 * col + 1, 2 * row));
            }
        }
    }

    #[test]
    fn labels_and_retention_match_counts(values in prop::collection::vec(
        prop_oneof![3 => 0u16..19, 1 => Just(UNLABELED)], 1..400)
    ) {
        let n = values.len();
        let map = ReferenceMap::from_values(n, 1, values.clone()).unwrap();
        let labeled = values.iter().filter(|&&v| v != UNLABELED).count();
        let decision = retention_decision(&map, CoverageThreshold::new(0.75).unwrap());
        if labeled == 0 {
            prop_assert_eq!(decision.reason, RetentionReason::NoLabels);
            prop_assert!(extract_multilabels(&map, 0.0).is_err());
        } else {
            prop_assert_eq!(decision.keep, 4 * labeled >= 3 * n);
            let labels = extract_multilabels(&map, 0.0).unwrap();
            for c in 0..NUM_CLASSES {
                prop_assert_eq!(labels.contains(c as u8), values.contains(&(c as u16)));
            }
        }
    }

    #[test]
    fn upsampling_preserves_value_multiset(src in prop::collection::vec(any::<u16>(), 36)) {
        let a = Array2::from_shape_vec((6, 6), src.clone()).unwrap();
        let up = upsample_nearest(&a, 2);
        let mut expected: Vec<u16> = src.iter().flat_map(|&v| [v; 4]).collect();
        let mut got: Vec<u16> = up.iter().copied().collect();
        expected.sort_unstable();
        got.sort_unstable();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn stats_fold_is_additive(
        recs in prop::collection::vec((0usize..3, any::<u32>(), any::<[bool; 3]>()), 0..60),
        cut in 0usize..60,
    ) {
        let records: Vec<PatchRecord> = recs
            .iter()
            .enumerate()
            .map(|(i, &(s, bits, f))| PatchRecord {
                id: format!("p{i}").into(),
                split: SplitTag::ALL[s],
                labels: MultiLabelSet::from_classes((0..NUM_CLASSES as u8).filter(|c| bits >> c & 1 == 1)),
                flags: PatchFlags { snow: f[0], cloud_or_shadow: f[1], has_invalid: f[2] },
            })
            .collect();
        let cut = cut.min(records.len());
        let whole = dataset_stats(&records);
        let parts: DatasetStats = [dataset_stats(&records[..cut]), dataset_stats(&records[cut..])].into_iter().sum();
        prop_assert_eq!(whole, parts);
        let main: u64 = SplitTag::ALL.iter().map(|&t| whole.patches(t)).sum();
        prop_assert_eq!(main as usize, records.iter().filter(|r| r.flags == PatchFlags::default()).count());
    }
}
