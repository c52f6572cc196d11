//! Sample statistics of the lattice noise.

use proptest::prelude::*;
use spde_lab::noise::{fill_slab, sample_slab};
use spde_lab::stats::{ks_critical_one_sample, ks_one_sample, mean, stderr, variance};
use spde_lab::{derive_stream, GridSpec};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn slab_entries_have_variance_dt_over_h() {
    let spec = GridSpec::new(64).unwrap();
    let s = derive_stream(11, 0);
    let mut xs = Vec::with_capacity(1_000_000);
    let mut slab = vec![0.0f64; 64];
    for step in 0..(1_000_000 / 64) as u64 {
        fill_slab(&s, step, spec, 1e-3, &mut slab).unwrap();
        xs.extend_from_slice(&slab);
    }
    assert!((variance(&xs) - 0.064).abs() < 0.001, "variance {}", variance(&xs));
    assert!(mean(&xs).abs() < 4.0 * stderr(&xs));
}

#[test]
fn normals_pass_a_ks_test() {
    let s = derive_stream(0, 3);
    let mut xs = vec![0.0f64; 2_000_000];
    for (k, chunk) in xs.chunks_mut(1000).enumerate() {
        s.fill_standard_normals(k as u64, chunk);
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = ks_one_sample(&xs, |x| normal.cdf(x));
    assert!(d < ks_critical_one_sample(xs.len(), 0.01), "KS distance {d}");
}

#[test]
fn adjacent_paths_are_uncorrelated() {
    let (a, b) = (derive_stream(99, 0), derive_stream(99, 1));
    let mut x = vec![0.0f64; 1000];
    let mut y = vec![0.0f64; 1000];
    let mut products = Vec::with_capacity(1_000_000);
    for step in 0..1000 {
        a.fill_standard_normals(step, &mut x);
        b.fill_standard_normals(step, &mut y);
        products.extend(x.iter().zip(&y).map(|(p, q)| p * q));
    }
    assert!(mean(&products).abs() < 0.01);
}

#[test]
fn distinct_cells_are_uncorrelated() {
    let spec = GridSpec::new(16).unwrap();
    let s = derive_stream(7, 2);
    let mut products = Vec::with_capacity(100_000);
    for step in 0..100_000 {
        let slab = sample_slab::<f64>(&s, step, spec, 1.0 / 16.0).unwrap();
        products.push(slab[3] * slab[11]);
    }
    assert!(mean(&products).abs() <= 3.0 * stderr(&products));
}

#[test]
fn single_precision_rounds_the_same_draws() {
    let s = derive_stream(1, 1);
    let mut a = vec![0.0f64; 33];
    let mut b = vec![0.0f32; 33];
    s.fill_standard_normals(4, &mut a);
    s.fill_standard_normals(4, &mut b);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(*x as f32, *y);
    }
}

proptest! {
    #[test]
    fn draws_depend_only_on_seed_path_and_step(seed: u64, path in 0u64..1_000_000, step in 0u64..1_000_000_000, m in 1usize..70) {
        let mut first = vec![0.0f64; m];
        derive_stream(seed, path).fill_standard_normals(step, &mut first);
        let mut other = vec![0.0f64; m];
        derive_stream(seed, path).fill_standard_normals(step + 1, &mut other);
        let mut again = vec![0.0f64; m];
        derive_stream(seed, path).fill_standard_normals(step, &mut again);
        prop_assert_eq!(&first, &again);
        prop_assert!(first.iter().all(|x| x.is_finite()));
        let mut longer = vec![0.0f64; m + 5];
        derive_stream(seed, path).fill_standard_normals(step, &mut longer);
        prop_assert_eq!(&first[..], &longer[..m]);
    }
}
