use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn random_cloud(rng: &mut ChaCha8Rng) -> PointCloud {
    let p = rng.gen_range(1..200);
    let pts = |rng: &mut ChaCha8Rng| (0..p).map(|_| [rng.gen::<f32>() * 10.0 - 5.0, rng.gen(), -rng.gen::<f32>()]).collect::<Vec<_>>();
    let mut c = PointCloud::new(pts(rng));
    if rng.gen_bool(0.5) {
        c.colors = Some((0..p).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect());
    }
    if rng.gen_bool(0.5) {
        c.normals = Some(pts(rng));
    }
    c.labels = match rng.gen_range(0..3) {
        0 => Labels::None,
        1 => Labels::Cloud(rng.gen()),
        _ => Labels::Points((0..p).map(|_| rng.gen()).collect()),
    };
    c
}

fn bits(c: &PointCloud) -> Vec<u32> {
    let mut v: Vec<u32> = c.positions.iter().flatten().map(|x| x.to_bits()).collect();
    v.extend(c.colors.iter().flatten().flatten().map(|x| x.to_bits()));
    v.extend(c.normals.iter().flatten().flatten().map(|x| x.to_bits()));
    v
}

#[test]
fn npcd_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let c = random_cloud(&mut rng);
        let back = decode_npcd(&encode_npcd(&c).unwrap()).unwrap();
        assert_eq!(bits(&back), bits(&c));
        assert_eq!(back, c);
    }
}

#[test]
fn npcd_format_errors_name_offsets() {
    let c = PointCloud::new(vec![[1.0, 2.0, 3.0]; 4]).with_labels(Labels::Points(vec![1, 2, 3, 4]));
    let good = encode_npcd(&c).unwrap();
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(decode_npcd(&bad), Err(Error::Format { offset: 0, .. })));
    let mut v2 = good.clone();
    v2[4] = 2;
    assert!(matches!(decode_npcd(&v2), Err(Error::Format { offset: 4, .. })));
    assert!(matches!(decode_npcd(&good[..good.len() - 1]), Err(Error::Format { offset: 61, .. })));
    let mut long = good.clone();
    long.push(0);
    assert!(matches!(decode_npcd(&long), Err(Error::Format { offset: 69, .. })));
    let mut flags = good;
    flags[12] |= 0x80;
    assert!(matches!(decode_npcd(&flags), Err(Error::Format { offset: 12, .. })));
    assert!(matches!(decode_npcd(b"NP"), Err(Error::Format { offset: 0, .. })));
}

#[test]
fn csv_per_cloud_label() {
    let c = decode_csv("x,y,z,cloud_label\n0,0,0,1\n").unwrap();
    assert_eq!(c.positions, vec![[0.0; 3]]);
    assert_eq!(c.labels, Labels::Cloud(1));
    let p = decode_csv("x,y,z,r,g,b,label\n0,0,0,0.5,0.5,0.5,3\n1,0,0,1,0,0,4\n").unwrap();
    assert_eq!(p.labels, Labels::Points(vec![3, 4]));
    assert!(decode_csv("x,y,label\n0,0,1\n").is_err());
    assert!(decode_csv("x,y,z,cloud_label\n0,0,0,1\n1,1,1,2\n").is_err());
    assert!(decode_csv("x,y,z,w\n0,0,0,1\n").is_err());
}

#[test]
fn csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let c = random_cloud(&mut rng);
        assert_eq!(decode_csv(&encode_csv(&c).unwrap()).unwrap(), c);
    }
}

#[test]
fn files_dispatch_on_extension() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_cloud(&mut rng);
    for name in ["a.npcd", "b.csv"] {
        let path = dir.path().join(name);
        write_cloud(&c, &path).unwrap();
        assert_eq!(read_cloud(&path).unwrap(), c);
    }
    let sub = dir.path().join("set");
    write_dir(&[c.clone(), c.clone()], &sub).unwrap();
    assert_eq!(read_dir(&sub).unwrap().len(), 2);
}

#[test]
fn generators_are_deterministic_and_balanced() {
    let spec = SyntheticSpec { kind: SyntheticKind::Cls3, count: 31, points: 64, noise: 0.01, seed: 4, colors: ColorMode::Random };
    let a = generate_synthetic(&spec).unwrap();
    assert_eq!(a, generate_synthetic(&spec).unwrap());
    let mut counts = [0usize; 3];
    for c in &a {
        counts[c.cloud_label().unwrap() as usize] += 1;
    }
    assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    let parts = generate_synthetic(&SyntheticSpec { kind: SyntheticKind::Parts2, ..spec }).unwrap();
    for c in &parts {
        let l = c.point_labels().unwrap();
        assert!(l.contains(&0) && l.contains(&1));
        for (p, &lab) in c.positions.iter().zip(l) {
            if spec.noise == 0.0 {
                assert_eq!(p[2] >= 0.0, lab == 1);
            }
        }
        c.validate(Some(2)).unwrap();
    }
}

#[test]
fn spurious_colors_track_labels_on_train_only() {
    let (train, val) = spurious_color_benchmark(4, 4, 100, 0.0, 5).unwrap();
    for c in &train {
        for (col, &l) in c.colors.as_ref().unwrap().iter().zip(c.point_labels().unwrap()) {
            assert_eq!(col[0] > 0.5, l == 1);
        }
    }
    let agree: usize = val
        .iter()
        .map(|c| c.colors.as_ref().unwrap().iter().zip(c.point_labels().unwrap()).filter(|(col, &l)| (col[0] > 0.5) == (l == 1)).count())
        .sum();
    assert!((150..250).contains(&agree), "{agree}");
}

#[test]
fn split_contracts() {
    let spec = SyntheticSpec { kind: SyntheticKind::Cls3, count: 50, points: 8, noise: 0.0, seed: 6, colors: ColorMode::Random };
    let data = generate_synthetic(&spec).unwrap();
    let (t, v) = split_indices(&data, (1.0, 0.0), 0).unwrap();
    assert_eq!((t.len(), v.len()), (50, 0));
    let (t, v) = split_indices(&data, (0.7, 0.3), 1).unwrap();
    let mut all: Vec<usize> = t.iter().chain(&v).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
    for class in 0..3u16 {
        let total = data.iter().filter(|c| c.cloud_label() == Some(class)).count() as f64;
        let got = t.iter().filter(|&&i| data[i].cloud_label() == Some(class)).count() as f64;
        assert!((got - total * 0.7).abs() <= 1.0);
    }
    assert!(split_indices(&data, (0.0, 0.0), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn npcd_round_trip_prop(seed in any::<u64>()) {
        let c = random_cloud(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(decode_npcd(&encode_npcd(&c).unwrap()).unwrap(), c);
    }
}
