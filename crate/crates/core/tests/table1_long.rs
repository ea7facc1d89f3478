//! Full-scale sparsity limits at 10^4 trials. These take a long time and are
//! ignored by default: `cargo test -p binsense --test table1_long -- --ignored --nocapture`.

use binsense::bench::{find_kmax, Algorithm, ExperimentConfig, MatrixSource, Sparsity};

fn kmax(source: MatrixSource, alg: Algorithm, start: usize, end: usize) -> usize {
    let mut c = ExperimentConfig::new(source, alg, Sparsity::Range { start, end }, 10_000);
    c.master_seed = 1;
    let r = find_kmax(&c, 0.99).unwrap();
    for row in &r.rows {
        println!("k={} success_rate={:.4}", row.k, row.success_rate);
    }
    r.k_max.unwrap()
}

fn peg7() -> MatrixSource {
    MatrixSource::Peg { m: 200, n: 400, d: 7 }
}

#[test]
#[ignore]
fn omp_peg_d7() {
    let k = kmax(peg7(), Algorithm::omp(), 60, 100);
    println!("OMP k_max = {k} (reference 81)");
    assert!((76..=86).contains(&k));
}

#[test]
#[ignore]
fn iht_peg_d7() {
    let k = kmax(peg7(), Algorithm::iht(), 30, 90);
    println!("IHT k_max = {k} (reference 56)");
}

#[test]
#[ignore]
fn sp_peg_d7() {
    let k = kmax(peg7(), Algorithm::sp(), 50, 100);
    println!("SP k_max = {k} (reference 75)");
}

#[test]
#[ignore]
fn bp_peg_d7() {
    let mut c = ExperimentConfig::new(peg7(), Algorithm::bp(), Sparsity::Range { start: 40, end: 90 }, 10_000);
    c.success_threshold = 1e-3;
    let r = find_kmax(&c, 0.99).unwrap();
    println!("BP k_max = {} (reference 61)", r.k_max.unwrap());
}

#[test]
#[ignore]
fn omp_random_d2_is_zero() {
    let k = kmax(MatrixSource::RandomBinary { m: 200, n: 400, d: 2 }, Algorithm::omp(), 1, 10);
    println!("OMP random d=2 k_max = {k} (reference 0)");
}

#[test]
#[ignore]
fn omp_gaussian() {
    let k = kmax(MatrixSource::Gaussian { m: 200, n: 400 }, Algorithm::omp(), 50, 100);
    println!("OMP Gaussian k_max = {k} (reference 76)");
}
