use std::fs;

use polydepth::config::KvConfig;
use polydepth::datamodel::{read_points, read_raster, write_points, write_raster, Point3};
use polydepth::network::{read_checkpoint, write_checkpoint, ModelParams, NetConfig};
use polydepth::{DepthKind, DepthMap, RadarCloud};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = DepthKind> {
    prop_oneof![
        Just(DepthKind::Scaleless),
        Just(DepthKind::Metric),
        Just(DepthKind::GroundTruth)
    ]
}

/// Any finite non-negative f64, including subnormals and huge values.
fn depth() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0f64..1e3,
        any::<u64>().prop_map(|b| f64::from_bits(b >> 1)).prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(f64::MIN_POSITIVE / 4.0),
    ]
}

fn raster() -> impl Strategy<Value = DepthMap> {
    (1usize..12, 1usize..12, kind()).prop_flat_map(|(h, w, k)| {
        prop::collection::vec(depth(), h * w).prop_map(move |v| DepthMap::new(h, w, v, k).unwrap())
    })
}

fn coordinate() -> impl Strategy<Value = f64> {
    prop_oneof![-1e4f64..1e4, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn cloud() -> impl Strategy<Value = RadarCloud> {
    let point = (coordinate(), coordinate(), depth().prop_filter("positive", |v| *v > 0.0))
        .prop_map(|(x, y, z)| Point3 { x, y, z });
    prop::collection::vec(point, 0..40).prop_map(|p| RadarCloud::new(p).unwrap())
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rasters_round_trip_bit_exactly(map in raster()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.prad");
        write_raster(&path, &map).unwrap();
        let back = read_raster(&path).unwrap();
        prop_assert_eq!(back.dims(), map.dims());
        prop_assert_eq!(back.kind(), map.kind());
        prop_assert_eq!(bits(back.values()), bits(map.values()));
    }

    #[test]
    fn points_round_trip_bit_exactly(c in cloud()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pts.csv");
        write_points(&path, &c).unwrap();
        let back = read_points(&path).unwrap();
        prop_assert_eq!(back.len(), c.len());
        for (a, b) in back.points().iter().zip(c.points()) {
            prop_assert_eq!([a.x.to_bits(), a.y.to_bits(), a.z.to_bits()], [b.x.to_bits(), b.y.to_bits(), b.z.to_bits()]);
        }
    }

    #[test]
    fn config_render_parse_is_identity(
        entries in prop::collection::btree_map("[a-z_][a-z0-9_]{0,8}", "[A-Za-z0-9_.,/-]{0,12}", 0..10)
    ) {
        let mut c = KvConfig::new();
        for (k, v) in &entries {
            c.set(k, v);
        }
        prop_assert_eq!(KvConfig::parse(&c.render()).unwrap(), c);
    }
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    for (seed, degree) in [(0, 1), (3, 8), (9, 10)] {
        let m = ModelParams::init(NetConfig {
            c_r: 8,
            c_z: 8,
            c_v: 8,
            c_s: 8,
            prototypes: 4,
            degree,
            seed,
            ..NetConfig::default()
        })
        .unwrap();
        let bytes = write_checkpoint(&m);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        for (a, b) in back.tensors().iter().zip(m.tensors()) {
            assert_eq!(bits(a.data()), bits(b.data()));
        }
    }
}

#[test]
fn truncated_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.prad");
    write_raster(&path, &DepthMap::new(2, 2, vec![1.0; 4], DepthKind::Metric).unwrap()).unwrap();
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_raster(&path), Err(polydepth::Error::Format { .. })));

    let m = ModelParams::init(NetConfig::default()).unwrap();
    let ck = write_checkpoint(&m);
    assert!(read_checkpoint(&ck[..ck.len() - 8]).is_err());
}
