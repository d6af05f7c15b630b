use bats_core::matrix::{mat_rank, mat_solve};
use bats_core::{Error, Field, FieldMatrix, RandomStream};
use proptest::prelude::*;

fn field_strategy() -> impl Strategy<Value = Field> {
    prop_oneof![Just(1u8), Just(2), Just(4), Just(8)].prop_map(|b| Field::new(b).unwrap())
}

fn matrix(field: Field, rows: usize, cols: usize, seed: u64) -> FieldMatrix {
    FieldMatrix::random(field, rows, cols, &mut RandomStream::new(seed, rows as u64 * 64 + cols as u64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_of_product_is_bounded(f in field_strategy(), a in 0usize..8, b in 0usize..8, c in 0usize..8, seed: u64) {
        let x = matrix(f, a, b, seed);
        let y = matrix(f, b, c, seed ^ 0x5555);
        let xy = x.mul(&y).unwrap();
        prop_assert!(mat_rank(&xy) <= mat_rank(&x).min(mat_rank(&y)));
        prop_assert!(mat_rank(&x) <= a.min(b));
    }

    #[test]
    fn solve_round_trip(f in field_strategy(), d in 1usize..7, extra in 0usize..5, t in 0usize..6, seed: u64) {
        let c = d + extra;
        let a = matrix(f, d, c, seed);
        prop_assume!(mat_rank(&a) == d);
        let b = matrix(f, t, d, seed.wrapping_add(1));
        let y = b.mul(&a).unwrap();
        prop_assert_eq!(mat_solve(&a, &y).unwrap(), b);
    }

    #[test]
    fn deficient_systems_are_refused(f in field_strategy(), d in 2usize..6, seed: u64) {
        let mut a = matrix(f, d, d + 1, seed);
        let dup = a.row(0).to_vec();
        a.row_mut(1).copy_from_slice(&dup);
        let y = FieldMatrix::zeros(f, 1, d + 1);
        let refused = matches!(mat_solve(&a, &y), Err(Error::RankDeficient { .. }));
        prop_assert!(refused);
    }

    #[test]
    fn field_axioms(f in field_strategy(), a: u8, b: u8, c: u8) {
        let (a, b, c) = (a & f.mask(), b & f.mask(), c & f.mask());
        prop_assert_eq!(f.add(a, a), 0);
        prop_assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        if b != 0 {
            prop_assert_eq!(f.mul(f.div(a, b).unwrap(), b), a);
        }
    }
}

#[test]
fn inverse_of_zero_is_an_error() {
    for bits in [1, 2, 4, 8] {
        let f = Field::new(bits).unwrap();
        assert!(f.inv(0).is_err());
        assert!(f.div(1, 0).is_err());
    }
}

#[test]
fn gf256_inverses_exhaustive() {
    let f = Field::gf256();
    for x in 1..=255u8 {
        assert_eq!(f.mul(x, f.inv(x).unwrap()), 1);
    }
}

#[test]
fn random_2x2_binary_full_rank_frequency() {
    let f = Field::gf2();
    let mut s = RandomStream::new(11, 3);
    let n = 100_000;
    let full = (0..n).filter(|_| FieldMatrix::random(f, 2, 2, &mut s).rank() == 2).count();
    let p = full as f64 / n as f64;
    assert!((p - 0.375).abs() < 0.01, "{p}");
}

#[test]
fn gf256_elements_pass_chi_square() {
    let f = Field::gf256();
    let mut s = RandomStream::new(2024, 9);
    let n = 1_000_000usize;
    let mut buf = vec![0u8; n];
    s.fill_elements(f, &mut buf);
    let mut counts = [0u64; 256];
    for &b in &buf {
        counts[b as usize] += 1;
    }
    let e = n as f64 / 256.0;
    let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // two-sided 99% band for 255 degrees of freedom (Wilson–Hilferty)
    let k = 255.0f64;
    let band = |z: f64| k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);
    let (lo, hi) = (band(-2.5758), band(2.5758));
    assert!(chi > lo && chi < hi, "chi² = {chi}, band ({lo}, {hi})");
}

#[test]
fn streams_are_pure_functions_of_seed_key_counter() {
    let f = Field::gf256();
    let a = FieldMatrix::random(f, 4, 9, &mut RandomStream::at(5, 6, 7));
    let b = FieldMatrix::random(f, 4, 9, &mut RandomStream::at(5, 6, 7));
    let c = FieldMatrix::random(f, 4, 9, &mut RandomStream::at(5, 7, 7));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
