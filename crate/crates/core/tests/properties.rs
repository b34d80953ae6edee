//! Randomized checks of the invariants, with a fixed seed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thetageo::lattice::{hermitian_norm_sq, theta_eval, theta_eval_bounded};
use thetageo::legendre::{legendre, NewtonOptions};
use thetageo::{
    FourierTerm, KahlerPotential, Lattice, ThetaIndex, TrigPolynomial, TruncationPolicy,
};

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x7e7a)
}

fn skew_lattice() -> Lattice {
    let z = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.3, 1.1),
            Complex64::new(-0.2, 0.25),
            Complex64::new(-0.2, 0.25),
            Complex64::new(0.45, 0.9),
        ],
    );
    Lattice::new(z).unwrap()
}

fn curved(lat: &Lattice) -> KahlerPotential {
    let terms = match lat.dim() {
        1 => vec![
            FourierTerm::new(vec![1], 0.01, 0.0),
            FourierTerm::new(vec![2], 0.002, 0.4),
        ],
        _ => vec![
            FourierTerm::new(vec![1, 0], 0.008, 0.0),
            FourierTerm::new(vec![0, 1], 0.006, 1.0),
            FourierTerm::new(vec![1, -1], 0.004, -0.3),
        ],
    };
    KahlerPotential::new(
        lat.clone(),
        TrigPolynomial::from_terms(lat.dim(), &terms).unwrap(),
    )
    .unwrap()
}

fn random_z(rng: &mut ChaCha8Rng, lat: &Lattice) -> Vec<Complex64> {
    let m = lat.dim();
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..1.5)).collect();
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..1.5)).collect();
    lat.point(&x, &y)
}

/// `sum_{N in j + kZ^m} exp(pi i N.Z N / k + 2 pi i N.z)`, summed directly.
fn theta_direct(lat: &Lattice, k: u32, j: &[u32], z: &[Complex64], reach: i64) -> Complex64 {
    let m = lat.dim();
    let zz = lat.period();
    let kf = k as f64;
    let count = (2 * reach + 1).pow(m as u32);
    let mut acc = Complex64::new(0.0, 0.0);
    for mut c in 0..count {
        let mut n = vec![0.0; m];
        for a in 0..m {
            n[a] = j[a] as f64 + kf * ((c % (2 * reach + 1)) - reach) as f64;
            c /= 2 * reach + 1;
        }
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        for a in 0..m {
            lin += z[a] * n[a];
            for b in 0..m {
                quad += zz[(a, b)] * n[a] * n[b];
            }
        }
        acc += (Complex64::i() * PI * (quad / kf + 2.0 * lin)).exp();
    }
    acc
}

#[test]
fn theta_matches_direct_summation() {
    let mut rng = rng();
    let policy = TruncationPolicy::default();
    for lat in [Lattice::square(1), skew_lattice()] {
        let m = lat.dim();
        for _ in 0..30 {
            let k = rng.random_range(1..=4u32);
            let j: Vec<u32> = (0..m).map(|_| rng.random_range(0..k)).collect();
            let z = random_z(&mut rng, &lat);
            let idx = ThetaIndex::new(k, j.clone()).unwrap();
            let fast = theta_eval(&lat, &idx, &z, &policy).unwrap();
            let slow = theta_direct(&lat, k, &j, &z, 12);
            assert!(
                (fast - slow).norm() <= 1e-12 * slow.norm().max(1.0),
                "{fast} vs {slow}"
            );
        }
    }
}

#[test]
fn hermitian_norm_is_lattice_periodic() {
    let mut rng = rng();
    let policy = TruncationPolicy::default();
    for lat in [Lattice::square(1), skew_lattice()] {
        let pot = curved(&lat);
        let m = lat.dim();
        for _ in 0..20 {
            let k = rng.random_range(1..=5u32);
            let j: Vec<u32> = (0..m).map(|_| rng.random_range(0..k)).collect();
            let idx = ThetaIndex::new(k, j).unwrap();
            let z = random_z(&mut rng, &lat);
            let base = hermitian_norm_sq(&lat, &idx, &z, &pot, &policy).unwrap();
            for g in 0..2 * m {
                let shift = lat.generator(g);
                let zs: Vec<Complex64> = z.iter().zip(&shift).map(|(a, b)| a + b).collect();
                let moved = hermitian_norm_sq(&lat, &idx, &zs, &pot, &policy).unwrap();
                assert!(
                    (moved - base).abs() <= 1e-11 * base.max(1e-300),
                    "{moved} vs {base}"
                );
            }
        }
    }
}

#[test]
fn halving_tail_tolerance_stays_within_bound() {
    let mut rng = rng();
    for lat in [Lattice::square(1), skew_lattice()] {
        let m = lat.dim();
        for _ in 0..30 {
            let k = rng.random_range(1..=6u32);
            let j: Vec<u32> = (0..m).map(|_| rng.random_range(0..k)).collect();
            let idx = ThetaIndex::new(k, j).unwrap();
            let z = random_z(&mut rng, &lat);
            let tol = 10f64.powf(rng.random_range(-12.0..-4.0));
            let coarse = TruncationPolicy {
                tail_tol: tol,
                max_radius: 64,
            };
            let fine = TruncationPolicy {
                tail_tol: tol / 2.0,
                max_radius: 64,
            };
            let a = theta_eval_bounded(&lat, &idx, &z, &coarse).unwrap();
            let b = theta_eval_bounded(&lat, &idx, &z, &fine).unwrap();
            assert!(b.radius >= a.radius);
            let change = (a.value - b.value).norm();
            assert!(
                change <= a.tail_bound + 1e-14 * a.value.norm(),
                "{change:e} > {:e}",
                a.tail_bound
            );
        }
    }
}

#[test]
fn certified_hessians_are_positive() {
    let mut rng = rng();
    for lat in [Lattice::square(1), skew_lattice()] {
        let pot = curved(&lat);
        let m = lat.dim();
        for _ in 0..10_000 {
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h = pot.hess(&y).unwrap();
            let min = h.symmetric_eigen().eigenvalues.min();
            assert!(min > 0.0, "eigenvalue {min} at {y:?}");
            assert!(min >= pot.certificate().lower_bound() - 1e-12);
        }
    }
}

#[test]
fn legendre_transform_is_an_involution() {
    let mut rng = rng();
    let opts = NewtonOptions::default();
    for lat in [Lattice::square(1), skew_lattice()] {
        let pot = curved(&lat);
        let m = lat.dim();
        for _ in 0..100 {
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu = pot.moment_map(&y);
            let dual = legendre(&pot, mu.as_slice(), &opts).unwrap();
            let back: Vec<f64> = dual.y.iter().copied().collect();
            for a in 0..m {
                assert!((back[a] - y[a]).abs() < 1e-10, "{back:?} vs {y:?}");
            }
            let young = mu.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - pot.phi(&y);
            assert!((dual.u - young).abs() < 1e-9 * young.abs().max(1.0));
        }
    }
}
