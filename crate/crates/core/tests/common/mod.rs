#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidkit::rigidity::rigidity_summary;
use rigidkit::{rigidity_matrix, Framework, RigidityClass, Tolerances};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn points(xs: &[&[f64]]) -> Vec<Vec<f64>> {
    xs.iter().map(|p| p.to_vec()).collect()
}

pub fn triangle() -> Framework {
    Framework::complete(&points(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap()
}

pub fn unit_square() -> Vec<Vec<f64>> {
    points(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]])
}

/// Unit square braced by the diagonal between the first and third agents.
pub fn braced_square() -> Framework {
    Framework::from_points(&unit_square(), vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap()
}

pub fn four_cycle() -> Framework {
    Framework::from_points(&unit_square(), vec![(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
}

pub fn k4() -> Framework {
    Framework::complete(&unit_square()).unwrap()
}

/// Points in `[-1, 1]^d` with pairwise separation at least `min_sep`.
pub fn random_points(rng: &mut impl Rng, n: usize, d: usize, min_sep: f64) -> Vec<Vec<f64>> {
    loop {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let separated = (0..n).all(|a| {
            (a + 1..n).all(|b| {
                let d2: f64 = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                d2.sqrt() >= min_sep
            })
        });
        if separated {
            return pts;
        }
    }
}

/// Erdős–Rényi edges over `n` nodes.
pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

pub fn random_framework(rng: &mut impl Rng, n: usize, d: usize, p: f64) -> Framework {
    let pts = random_points(rng, n, d, 0.1);
    Framework::from_points(&pts, random_edges(rng, n, p)).unwrap()
}

/// Ratio of the smallest nonzero to the largest singular value of `R(p*)`.
pub fn conditioning(fw: &Framework) -> f64 {
    let tol = Tolerances::default();
    let rm = rigidity_matrix(fw, fw.positions()).unwrap();
    let rank = rm.rank(&tol);
    let sv = rm.singular_values();
    if rank == 0 {
        return 0.0;
    }
    sv[rank - 1] / sv[0]
}

/// Random infinitesimally rigid framework with `R(p*)` conditioned at least `min_cond`.
pub fn random_rigid(
    rng: &mut impl Rng,
    d: usize,
    nodes: std::ops::RangeInclusive<usize>,
    min_cond: f64,
) -> Framework {
    let tol = Tolerances::default();
    loop {
        let n = rng.random_range(nodes.clone());
        let p = rng.random_range(0.55..0.95);
        let fw = random_framework(rng, n, d, p);
        if rigidity_summary(&fw, &tol).class != RigidityClass::Flexible && conditioning(&fw) >= min_cond {
            return fw;
        }
    }
}

pub fn random_flexible(rng: &mut impl Rng, d: usize, nodes: std::ops::RangeInclusive<usize>) -> Framework {
    let tol = Tolerances::default();
    loop {
        let n = rng.random_range(nodes.clone());
        let p = rng.random_range(0.3..0.6);
        let fw = random_framework(rng, n, d, p);
        if fw.m() > 0 && rigidity_summary(&fw, &tol).class == RigidityClass::Flexible {
            return fw;
        }
    }
}

pub fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

pub fn random_direction(rng: &mut impl Rng, len: usize, scale: f64) -> DVector<f64> {
    let v = DVector::from_iterator(len, (0..len).map(|_| rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v * (scale / norm)
}
