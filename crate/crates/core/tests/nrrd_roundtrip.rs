use cellshed::volume::{read_volume, write_volume, AnyVolume, BinaryVolume, Dims, LabelVolume, ScalarVolume};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Dims> {
    (1usize..=32, 1usize..=32, 1usize..=32).prop_map(|(x, y, z)| Dims::new(x, y, z).unwrap())
}

fn round_trip(vol: AnyVolume) -> AnyVolume {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.nrrd");
    write_volume(vol, &path).unwrap();
    read_volume(&path).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn float_bits_survive(d in dims(), seed in any::<u32>()) {
        // Arbitrary finite bit patterns, subnormals and -0 included. The
        // writer refuses NaN and infinities.
        let vol = ScalarVolume::from_fn(d, |x, y, z| {
            let i = (x + 32 * (y + 32 * z)) as u32;
            let v = f32::from_bits(i.wrapping_mul(2_654_435_761) ^ seed);
            if v.is_finite() { v } else { f32::from_bits(v.to_bits() & !(1 << 30)) }
        });
        let back = round_trip(vol.clone().into()).into_scalar().unwrap();
        prop_assert_eq!(back.dims(), d);
        prop_assert!(back.data().iter().zip(vol.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn labels_survive(d in dims(), k in 1u32..u32::MAX) {
        let vol = LabelVolume::from_fn(d, |x, y, z| ((x + 3 * y + 7 * z) as u32).wrapping_mul(k));
        prop_assert_eq!(round_trip(vol.clone().into()).into_labels().unwrap(), vol);
    }

    #[test]
    fn masks_survive(d in dims(), m in 1usize..7) {
        let vol = BinaryVolume::from_fn(d, |x, y, z| (x + y * z) % m == 0);
        prop_assert_eq!(round_trip(vol.clone().into()).into_binary().unwrap(), vol);
    }
}

#[test]
fn fixed_shapes() {
    let labels = LabelVolume::from_fn(Dims::cube(8).unwrap(), |x, y, z| (x * 100 + y * 10 + z) as u32 + 70_000);
    assert_eq!(round_trip(labels.clone().into()).into_labels().unwrap(), labels);
    let mask = BinaryVolume::from_fn(Dims::cube(16).unwrap(), |x, y, z| (x ^ y ^ z) & 1 == 1);
    assert_eq!(round_trip(mask.clone().into()).into_binary().unwrap(), mask);
}

#[test]
fn written_header_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.nrrd");
    write_volume(LabelVolume::filled(Dims::new(3, 2, 1).unwrap(), 9), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = b"NRRD0004\ntype: uint32\ndimension: 3\nsizes: 3 2 1\nencoding: raw\nendian: little\n\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 24);
    assert_eq!(&bytes[header.len()..header.len() + 4], &9u32.to_le_bytes());
}
