//! Long orbit products against the extended-precision oracle.

mod common;

use cocycle_lab::arithmetic::Frequency;
use cocycle_lab::cocycle::{iterate_orbit, Cocycle, CocycleSpec, Direction, Potential};
use cocycle_lab::dd::Phase;
use cocycle_lab::linalg2::{Mat2, OrbitProduct};
use cocycle_lab::verification::random_ap_chain;
use common::{oracle_log_norm, BigProduct};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_reproduces_closed_forms() {
    let two = Mat2::diag(2.0);
    let want = 700.0 * std::f64::consts::LN_2;
    assert!((oracle_log_norm(std::iter::repeat_n(&two, 700)) - want).abs() < 1e-15 * want);
    let r = Mat2::rotation(0.3);
    // Rounded rotations have det 1 + O(ε), so the exact product drifts by about nε.
    assert!(oracle_log_norm(std::iter::repeat_n(&r, 1000)).abs() < 1000.0 * f64::EPSILON);
    let shear = Mat2::new(1.0, 1.0, 0.0, 1.0);
    let n = 1e6f64;
    let exact = ((n + (n * n + 4.0).sqrt()) / 2.0).ln();
    let mut p = BigProduct::identity();
    for _ in 0..1_000_000 {
        p.left_mul(&shear);
    }
    assert!((p.log_norm() - exact).abs() < 1e-14 * exact);
}

fn orbit_steps(c: &CocycleSpec, x0: f64, n: usize) -> Vec<Mat2> {
    let mut phase = Phase::new(x0);
    (0..n)
        .map(|_| {
            let m = c.step(phase.value());
            phase.advance(c.alpha());
            m
        })
        .collect()
}

#[test]
fn amo_orbit_products_match_oracle() {
    let n = 10_000;
    for energy in [0.0, 3.7, 7.0] {
        let c = CocycleSpec::almost_mathieu(Frequency::golden(), 10.0, energy);
        for x0 in [0.1, 0.37, 0.73] {
            let got = iterate_orbit(&c, x0, n, Direction::Forward).log_norm();
            let want = oracle_log_norm(&orbit_steps(&c, x0, n));
            assert!((got - want).abs() <= 1e-8 * want.abs(), "E={energy} x0={x0}: {got} vs {want}");
        }
    }
}

#[test]
fn backward_products_match_oracle() {
    let n = 10_000;
    let c = CocycleSpec::schrodinger(Frequency::silver(), 4.0, Potential::cos_family(1.0, 0.2), 1.3);
    let x0 = 0.21;
    let mut phase = Phase::new(x0);
    let steps: Vec<Mat2> = (0..n)
        .map(|_| {
            phase.advance(-c.alpha());
            c.step_inverse(phase.value())
        })
        .collect();
    let got = iterate_orbit(&c, x0, n, Direction::Backward).log_norm();
    let want = oracle_log_norm(&steps);
    assert!((got - want).abs() <= 1e-8 * want.abs(), "{got} vs {want}");
}

#[test]
fn chain_products_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let chain = random_ap_chain(&mut rng, 1e3, 100);
        let mut p = OrbitProduct::identity();
        for m in &chain {
            p.extend(m);
        }
        let want = oracle_log_norm(&chain);
        assert!((p.log_norm() - want).abs() <= 1e-10 * want, "{} vs {want}", p.log_norm());
    }
}
