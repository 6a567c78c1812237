use cropsig::baseline::{baseline_crop, baseline_sign_full, baseline_verify};
use cropsig::crypto::{self, OuterKeyPair};
use cropsig::scheme::{crop_signature, sign_full, verify_cropped, CROPPED_SIGNATURE_BYTES};
use cropsig::{BlockGrid, CropRect};
use group::Curve;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn grid(w: u32, h: u32, seed: u64) -> BlockGrid {
    BlockGrid::from_fn(w, h, [seed as u8; 32], |i, j| {
        let n = 8 + ((i * 7 + j * 3) as usize + seed as usize) % 40;
        (0..n)
            .map(|k| (k as u64 ^ seed ^ (i as u64 * 31 + j as u64)) as u8)
            .collect()
    })
    .unwrap()
}

fn rect_strategy() -> impl Strategy<Value = (u32, u32, CropRect, u64)> {
    (1u32..=8, 1u32..=8, any::<u64>()).prop_flat_map(|(w, h, seed)| {
        (1..=h, 1..=w).prop_flat_map(move |(i1, j1)| {
            (i1..=h, j1..=w).prop_map(move |(i2, j2)| (w, h, CropRect::new(i1, i2, j1, j2), seed))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_rectangle_verifies((w, h, rect, seed) in rect_strategy()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = OuterKeyPair::generate(&mut rng);
        let pk = key.public_key().to_bytes();
        let g = grid(w, h, seed);
        let full = sign_full(&key, &g, &mut rng).unwrap();
        let sub = g.sub_grid(&rect).unwrap();

        let cropped = crop_signature(&full, &rect).unwrap();
        prop_assert!(verify_cropped(&pk, &cropped, &sub));
        prop_assert_eq!(cropped.to_bytes().len(), CROPPED_SIGNATURE_BYTES);

        let base = baseline_crop(&baseline_sign_full(&key, &g, &mut rng).unwrap(), &rect).unwrap();
        prop_assert!(baseline_verify(&pk, &base, &sub));
    }

    #[test]
    fn aggregate_is_sum_of_cell_signatures((w, h, rect, seed) in rect_strategy()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = OuterKeyPair::generate(&mut rng);
        let full = sign_full(&key, &grid(w, h, seed), &mut rng).unwrap();
        let cropped = crop_signature(&full, &rect).unwrap();
        let sum = rect.cells().fold(bls12_381::G1Projective::identity(), |acc, (i, j)| {
            crypto::g1_add(&acc, &(*full.block_sig(i, j).unwrap()).into())
        });
        prop_assert_eq!(cropped.aggregate, sum.to_affine());
    }

    #[test]
    fn tampered_cell_fails((w, h, rect, seed) in rect_strategy(), pick in any::<prop::sample::Index>(), byte in any::<prop::sample::Index>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = OuterKeyPair::generate(&mut rng);
        let pk = key.public_key().to_bytes();
        let g = grid(w, h, seed);
        let full = sign_full(&key, &g, &mut rng).unwrap();
        let cropped = crop_signature(&full, &rect).unwrap();
        let mut sub = g.sub_grid(&rect).unwrap();
        let cells: Vec<_> = rect.cells().collect();
        let (i, j) = cells[pick.index(cells.len())];
        let cell = sub.block_mut(i, j).unwrap();
        let k = byte.index(cell.len());
        cell[k] ^= 0x01;
        prop_assert!(!verify_cropped(&pk, &cropped, &sub));
    }
}
