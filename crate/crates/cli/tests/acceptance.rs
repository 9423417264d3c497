//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use reben_core::labeling::{
    extract_multilabels, retention_decision, CoverageThreshold, LabelError, ReferenceMap, RetentionReason,
    NUM_CLASSES, UNLABELED,
};
use reben_core::pipeline::{
    gate_tiles, prepare_model_input, tile_to_patches, upsample_nearest, Band, Modality, PatchPixels,
    TileQualityReport, S2_BANDS,
};
use reben_core::{assign_split, PatchExtent, SplitGeometry, SplitTag, TileExtent};
use reben_store::{
    bench_random_read, decode_record, encode_record, Dtype, PatchStore, Tensor, TensorRecord,
};

const SEED: u64 = 0x5eed_2023;
const SENTINEL_TILE_M: f64 = 10_980.0;
const CRS: &str = "EPSG:32632";

const AREA_REL_TOL: f64 = 1e-12;
const GRID_FRACTION_TOL: f64 = 0.02;
const SPLIT_GEOMETRY_BUDGET: Duration = Duration::from_secs(1);
const SPLIT_ORACLE_BUDGET: Duration = Duration::from_secs(5);
const OVERLAP_BUDGET: Duration = Duration::from_secs(5);
const LABEL_ORACLE_BUDGET: Duration = Duration::from_secs(10);
const STORE_BUDGET: Duration = Duration::from_secs(300);
const MAX_LATENCY_SLOPE: f64 = 1.0;
const MIN_SPEEDUP: f64 = 1.0;

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

fn within(elapsed: Duration, budget: Duration) -> (bool, String) {
    (elapsed < budget, format!("{:.3}s/{:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()))
}

fn tile(id: &str, origin_x: f64, origin_y: f64, size: f64) -> TileExtent {
    TileExtent::new(id, origin_x, origin_y, size, CRS).unwrap()
}

fn split_geometry() -> Outcome {
    let start = Instant::now();
    let s = SENTINEL_TILE_M;
    let geom = SplitGeometry::new(s, 0.25, 0.25).unwrap();
    let (a, b, c) = geom.region_areas();
    let expected = [0.5 * s * s, 0.25 * s * s, 0.25 * s * s];
    let area_err = [a, b, c]
        .iter()
        .zip(expected)
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0, f64::max);

    let t = tile("GRID", 0.0, s, s);
    let patches = tile_to_patches(&t, s / 256.0);
    let mut counts = [0usize; 3];
    for p in &patches {
        counts[assign_split(p, &t, &geom).unwrap().index()] += 1;
    }
    let n = patches.len() as f64;
    let fractions = counts.map(|c| c as f64 / n);
    let frac_err = fractions
        .iter()
        .zip([0.5, 0.25, 0.25])
        .map(|(f, want)| (f - want).abs())
        .fold(0.0, f64::max);
    let (fast, time) = within(start.elapsed(), SPLIT_GEOMETRY_BUDGET);
    outcome(
        area_err <= AREA_REL_TOL && patches.len() == 65_536 && frac_err <= GRID_FRACTION_TOL && fast,
        format!(
            "area rel err {area_err:.1e} (tol {AREA_REL_TOL:.0e}); grid fractions {:.4}/{:.4}/{:.4} max dev {frac_err:.4} (tol {GRID_FRACTION_TOL}); {time}",
            fractions[0], fractions[1], fractions[2]
        ),
    )
}

/// Tag by membership in the open nested squares centered on the tile,
/// with sides sqrt(p) * s (test) and sqrt(p + q) * s (validation).
fn nested_squares_oracle(t: &TileExtent, p: f64, q: f64, x: f64, y: f64) -> SplitTag {
    let (cx, cy) = t.center();
    let inside = |side: f64| {
        let half = side / 2.0;
        cx - half < x && x < cx + half && cy - half < y && y < cy + half
    };
    if inside(p.sqrt() * t.size) {
        SplitTag::Test
    } else if inside((p + q).sqrt() * t.size) {
        SplitTag::Validation
    } else {
        SplitTag::Train
    }
}

fn split_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED);
    let (mut agree, mut total) = (0, 0);
    for pair in 0..50 {
        let p = rng.random_range(0.01..0.9);
        let q = rng.random_range(0.01..(0.99 - p));
        let s = rng.random_range(1_000.0..20_000.0);
        let t = tile(&format!("T{pair}"), rng.random_range(1e5..9e5), rng.random_range(1e6..9e6), s);
        let geom = SplitGeometry::new(s, p, q).unwrap();
        for _ in 0..200 {
            let size = rng.random_range(1.0..s / 4.0);
            let patch = PatchExtent {
                tile_id: t.tile_id.clone(),
                col: 0,
                row: 0,
                origin_x: t.origin_x + rng.random_range(0.0..s - size),
                origin_y: t.origin_y - rng.random_range(0.0..s - size),
                size,
                crs: CRS.into(),
            };
            let (x, y) = patch.center();
            total += 1;
            if assign_split(&patch, &t, &geom).ok() == Some(nested_squares_oracle(&t, p, q, x, y)) {
                agree += 1;
            }
        }
    }
    let (fast, time) = within(start.elapsed(), SPLIT_ORACLE_BUDGET);
    outcome(agree == total && total == 10_000 && fast, format!("{agree}/{total} agree; {time}"))
}

fn overlap_to_training() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let s = SENTINEL_TILE_M;
    let patch_size = 60.0;
    let geom = SplitGeometry::new(s, 0.25, 0.25).unwrap();
    let (mut checked, mut train, mut min_patches) = (0usize, 0usize, usize::MAX);
    for _ in 0..20 {
        let m = rng.random_range(patch_size..=geom.outer_width);
        let a = tile("A", 500_000.0, 5_000_000.0, s);
        let b = tile("B", a.origin_x + s - m, a.origin_y, s);
        let mut in_overlap = 0;
        for (own, other) in [(&a, &b), (&b, &a)] {
            for patch in tile_to_patches(own, patch_size) {
                let (x, y) = patch.center();
                if x < b.min_x() || x > a.max_x() {
                    continue;
                }
                in_overlap += 1;
                checked += 1;
                let here = assign_split(&patch, own, &geom).unwrap();
                let there = geom.classify_point(other, x, y);
                if here == SplitTag::Train && there == SplitTag::Train {
                    train += 1;
                }
            }
        }
        min_patches = min_patches.min(in_overlap);
    }
    let (fast, time) = within(start.elapsed(), OVERLAP_BUDGET);
    outcome(
        checked > 0 && train == checked && min_patches > 0 && fast,
        format!("{train}/{checked} overlap patches train in both tiles over 20 widths; {time}"),
    )
}

fn map_with_labeled(n_labeled: usize) -> ReferenceMap {
    let values = (0..14_400).map(|i| if i < n_labeled { (i % 3) as u16 } else { UNLABELED }).collect();
    ReferenceMap::from_values(120, 120, values).unwrap()
}

fn coverage_boundary() -> Outcome {
    let threshold = CoverageThreshold::new(0.75).unwrap();
    let at = retention_decision(&map_with_labeled(10_800), threshold);
    let below = retention_decision(&map_with_labeled(10_799), threshold);
    let none = retention_decision(&map_with_labeled(0), threshold);
    let full = retention_decision(&map_with_labeled(14_400), threshold);
    let pass = at.keep
        && at.reason == RetentionReason::Kept
        && !below.keep
        && below.reason == RetentionReason::LowCoverage
        && !none.keep
        && none.reason == RetentionReason::NoLabels
        && full.keep;
    outcome(
        pass,
        format!(
            "10800/14400 {:?}, 10799/14400 {:?}, 0/14400 {:?}",
            at.reason, below.reason, none.reason
        ),
    )
}

fn label_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let mut agree = 0;
    for i in 0..1000 {
        let (w, h) = (rng.random_range(1..=120), rng.random_range(1..=120));
        let unlabeled_share = if i % 50 == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
        let palette: Vec<u16> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(0..NUM_CLASSES as u16)).collect();
        let values: Vec<u16> = (0..w * h)
            .map(|_| {
                if rng.random_bool(unlabeled_share) {
                    UNLABELED
                } else {
                    palette[rng.random_range(0..palette.len())]
                }
            })
            .collect();
        let mut expected = [false; NUM_CLASSES];
        for &v in &values {
            if v != UNLABELED {
                expected[v as usize] = true;
            }
        }
        let map = ReferenceMap::from_values(w, h, values).unwrap();
        let ok = match extract_multilabels(&map, 0.0) {
            Ok(set) => set.bits() == expected,
            Err(LabelError::NoLabeledPixels) => expected == [false; NUM_CLASSES],
            Err(_) => false,
        };
        agree += usize::from(ok);
    }
    let (fast, time) = within(start.elapsed(), LABEL_ORACLE_BUDGET);
    outcome(agree == 1000 && fast, format!("{agree}/1000 agree; {time}"))
}

fn quality_gate() -> Outcome {
    let reports: Vec<TileQualityReport> = (0..125)
        .map(|i| {
            let id = format!("T{i:03}");
            match i {
                7 | 31 | 64 => TileQualityReport::new(id, false, true),
                88 | 101 => TileQualityReport::new(id, true, false),
                120 => TileQualityReport::new(id, false, false),
                _ => TileQualityReport::new(id, true, true),
            }
        })
        .collect();
    let gate = gate_tiles(&reports).unwrap();
    outcome(
        gate.passed.len() == 119 && gate.failed.len() == 6,
        format!("{} reports, {} processed, {} failed", reports.len(), gate.passed.len(), gate.failed.len()),
    )
}

fn multiset(values: impl IntoIterator<Item = u16>) -> BTreeMap<u16, usize> {
    let mut m = BTreeMap::new();
    for v in values {
        *m.entry(v).or_default() += 1;
    }
    m
}

fn preprocessing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let mut pixels = PatchPixels::new(1200.0);
    for (name, res) in S2_BANDS.iter().copied().chain([("VV", 10.0), ("VH", 10.0)]) {
        let side = (1200.0 / res) as usize;
        let data = Array2::from_shape_fn((side, side), |_| rng.random_range(1..10_000u16));
        pixels.insert(Band::new(name, res, data)).unwrap();
    }
    let input = prepare_model_input(&pixels, Modality::S1S2).unwrap();
    let shape_ok = input.data.shape() == [12, 120, 120] && input.channels.len() == 12;

    let mut multiset_ok = true;
    let mut coarse = 0;
    for band in pixels.bands().filter(|b| b.resolution == 20.0) {
        coarse += 1;
        let up = upsample_nearest(&band.data, 2);
        let mut want = multiset(band.data.iter().copied());
        want.values_mut().for_each(|n| *n *= 4);
        multiset_ok &= up.dim() == (120, 120) && multiset(up.iter().copied()) == want;
        if let Some(ch) = input.channels.iter().position(|c| c == &band.name) {
            multiset_ok &= multiset(input.data.index_axis(ndarray::Axis(0), ch).iter().copied()) == want;
        }
    }
    outcome(
        shape_ok && multiset_ok && coarse == 6,
        format!(
            "S1+S2 input {:?}, {coarse} coarse bands upsampled with x4 multiset {}",
            input.data.shape(),
            if multiset_ok { "preserved" } else { "violated" }
        ),
    )
}

fn random_tensor(rng: &mut StdRng) -> Tensor {
    let dtype = Dtype::ALL[rng.random_range(0..Dtype::ALL.len())];
    let rank = rng.random_range(0..=3);
    let mut shape: Vec<usize> = (0..rank).map(|_| rng.random_range(0..=5)).collect();
    if rng.random_bool(0.1) && rank > 0 {
        shape[0] = 0;
    }
    let n: usize = shape.iter().product();
    let mut data: Vec<u8> = (0..n * dtype.size()).map(|_| rng.random()).collect();
    if matches!(dtype, Dtype::F32 | Dtype::F64) && n > 0 && rng.random_bool(0.5) {
        let nan: Vec<u8> = match dtype {
            Dtype::F32 => f32::from_bits(0x7fc0_1234).to_le_bytes().to_vec(),
            _ => f64::from_bits(0x7ff8_0000_dead_beef).to_le_bytes().to_vec(),
        };
        let at = rng.random_range(0..n) * dtype.size();
        data[at..at + nan.len()].copy_from_slice(&nan);
    }
    Tensor::new(dtype, shape, data).unwrap()
}

/// The published value format written out by hand: header length, JSON
/// header padded with spaces to a multiple of 8, payload.
fn hand_encoded_single_u16() -> Vec<u8> {
    let mut header = String::from(r#"{"B02":{"dtype":"U16","shape":[2,2],"data_offsets":[0,8]}}"#);
    while header.len() % 8 != 0 {
        header.push(' ');
    }
    let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
    bytes.extend_from_slice(header.as_bytes());
    bytes.extend_from_slice(&[1, 0, 2, 0, 3, 0, 4, 0]);
    bytes
}

fn serialization() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let (mut exact, mut zero_sized, mut with_nan) = (0, 0, 0);
    for _ in 0..1000 {
        let record: TensorRecord = (0..rng.random_range(0..=4))
            .map(|i| (format!("t{i}_{}", rng.random_range(0..100u8)), random_tensor(&mut rng)))
            .collect();
        zero_sized += usize::from(record.iter().any(|(_, t)| t.data().is_empty()));
        with_nan += usize::from(record.iter().any(|(_, t)| {
            t.to_f32().is_some_and(|v| v.iter().any(|x| x.is_nan()))
                || t.to_f64().is_some_and(|v| v.iter().any(|x| x.is_nan()))
        }));
        let bytes = encode_record(&record);
        let ok = decode_record(&bytes).is_ok_and(|back| {
            back.len() == record.len()
                && back.iter().zip(record.iter()).all(|((na, a), (nb, b))| {
                    na == nb && a.dtype() == b.dtype() && a.shape() == b.shape() && a.data() == b.data()
                })
                && encode_record(&back) == bytes
        });
        exact += usize::from(ok);
    }

    let record = TensorRecord::new().with("B02", Tensor::from_u16(vec![2, 2], &[1, 2, 3, 4]).unwrap());
    let ours = encode_record(&record);
    let by_hand = hand_encoded_single_u16();
    let data = [1u8, 0, 2, 0, 3, 0, 4, 0];
    let view = safetensors::tensor::TensorView::new(safetensors::Dtype::U16, vec![2, 2], &data).unwrap();
    let published = safetensors::serialize([("B02", view)], None).unwrap();
    let layout_ok = ours == by_hand && ours == published;
    outcome(
        exact == 1000 && zero_sized > 0 && with_nan > 0 && layout_ok,
        format!(
            "{exact}/1000 bit-exact ({zero_sized} with zero-sized, {with_nan} with NaN tensors); single-tensor layout {}",
            if layout_ok { "matches" } else { "differs" }
        ),
    )
}

fn synthetic_record(rng: &mut StdRng) -> TensorRecord {
    let bands: Vec<u16> = (0..2 * 12 * 12).map(|_| rng.random()).collect();
    let map: Vec<u16> = (0..12 * 12).map(|_| rng.random_range(0..NUM_CLASSES as u16)).collect();
    TensorRecord::new()
        .with("VV", Tensor::from_u16(vec![12, 12], &bands[..144]).unwrap())
        .with("VH", Tensor::from_u16(vec![12, 12], &bands[144..]).unwrap())
        .with("reference_map", Tensor::from_u16(vec![12, 12], &map).unwrap())
}

fn same_record(a: &TensorRecord, b: &TensorRecord) -> bool {
    encode_record(a) == encode_record(b)
}

/// Mean `get_bytes` latency in microseconds over `lookups` random keys.
fn mean_lookup_us(entries: usize, lookups: usize, rng: &mut StdRng) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let store = PatchStore::create(&dir.path().join("scale.lmdb"), 1 << 30).unwrap();
    let value = vec![7u8; 64];
    store
        .write_records(
            (0..entries).map(|i| (format!("P{i:08}"), TensorRecord::new().with("v", Tensor::from_u8(vec![64], &value).unwrap()))),
            10_000,
        )
        .unwrap();
    let keys: Vec<String> = (0..lookups).map(|_| format!("P{:08}", rng.random_range(0..entries))).collect();
    let snap = store.snapshot().unwrap();
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        for k in &keys {
            std::hint::black_box(snap.get_bytes(k).unwrap().unwrap());
        }
        best = best.min(start.elapsed().as_secs_f64() * 1e6 / lookups as f64);
    }
    best
}

fn store_correctness_and_scaling() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED + 5);
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline");
    fs::create_dir_all(&baseline).unwrap();

    let records: Vec<(String, TensorRecord)> = (0..10_000)
        .map(|i| (format!("S2A_T{:02}_{:02}_{:02}", i / 400, (i / 20) % 20, i % 20), synthetic_record(&mut rng)))
        .collect();
    for (key, record) in &records {
        fs::write(baseline.join(format!("{key}.safetensors")), encode_record(record)).unwrap();
    }
    let store = PatchStore::create(&dir.path().join("patches.lmdb"), 256 << 20).unwrap();
    store.write_records(records.iter().cloned(), 512).unwrap();

    let snap = store.snapshot().unwrap();
    let mut parity = 0;
    for (key, record) in &records {
        let from_store = snap.get(key).unwrap();
        let from_file = decode_record(&fs::read(baseline.join(format!("{key}.safetensors"))).unwrap()).unwrap();
        if from_store.is_some_and(|r| same_record(&r, record) && same_record(&r, &from_file)) {
            parity += 1;
        }
    }
    let key_count = snap.len().unwrap();
    drop(snap);

    let keys: Vec<String> = records.iter().map(|(k, _)| k.clone()).collect();
    let report = bench_random_read(&store, &baseline, &keys, 10_000, SEED).unwrap();

    let sizes = [1_000usize, 10_000, 100_000];
    let latencies: Vec<f64> = sizes.iter().map(|&n| mean_lookup_us(n, 20_000, &mut rng)).collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = latencies.iter().map(|l| l.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    let (fast, time) = within(start.elapsed(), STORE_BUDGET);
    outcome(
        parity == 10_000 && key_count == 10_000 && report.speedup > MIN_SPEEDUP && slope < MAX_LATENCY_SLOPE && fast,
        format!(
            "parity {parity}/10000; speedup {:.2}x ({:.0} vs {:.0} loads/s, p50 {:.1}us, p99 {:.1}us); mean lookup {:.3}/{:.3}/{:.3}us at 1e3/1e4/1e5, log-log slope {slope:.3} (< {MAX_LATENCY_SLOPE}); {time}",
            report.speedup, report.store_lps, report.baseline_lps, report.p50_us, report.p99_us,
            latencies[0], latencies[1], latencies[2]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("split_geometry", split_geometry),
        ("split_oracle_equivalence", split_oracle),
        ("overlap_to_training", overlap_to_training),
        ("coverage_boundary", coverage_boundary),
        ("label_extraction_oracle", label_oracle),
        ("quality_gate", quality_gate),
        ("preprocessing_shapes", preprocessing),
        ("serialization_conformance", serialization),
        ("store_correctness_and_scaling", store_correctness_and_scaling),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
