#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toda_core::dressing::PoleData;
use toda_core::linalg::{self, CMat};
use toda_core::solitons::{SolitonIndices, SolitonSolution, SolitonSpec};
use toda_core::verify::{GammaField, Grid, ZPoint};
use toda_core::{BlockStructure, CVec, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bs(sizes: &[usize]) -> BlockStructure {
    BlockStructure::new(sizes.to_vec()).unwrap()
}

pub fn polar(rng: &mut impl Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(rng.gen_range(lo..hi), rng.gen_range(0.0..std::f64::consts::TAU))
}

pub fn vector(rng: &mut impl Rng, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| polar(rng, 0.5, 1.5))
}

fn well_separated(p: usize, mu: &[C64], nu: &[C64]) -> bool {
    let pw = |z: &C64| z.powu(p as u32);
    let all: Vec<C64> = mu.iter().chain(nu).map(pw).collect();
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            if (all[a] - all[b]).norm() < 0.15 * all[a].norm().max(all[b].norm()) {
                return false;
            }
        }
    }
    true
}

/// Random soliton spec on a canonical pair, retried until the constant data
/// is comfortably non-degenerate.
pub fn random_spec(rng: &mut impl Rng, b: &BlockStructure, r: usize) -> SolitonSpec {
    random_spec_in(rng, b, r, 0.7, 1.5)
}

/// As [`random_spec`] with pole moduli in `lo..hi`.
pub fn random_spec_in(rng: &mut impl Rng, b: &BlockStructure, r: usize, lo: f64, hi: f64) -> SolitonSpec {
    let p = b.p();
    for _ in 0..1000 {
        let mu: Vec<C64> = (0..r).map(|_| polar(rng, lo, hi)).collect();
        let nu: Vec<C64> = (0..r).map(|_| polar(rng, lo, hi)).collect();
        if !well_separated(p, &mu, &nu) {
            continue;
        }
        let poles = PoleData::new(p, mu, nu).unwrap();
        let idx: Vec<SolitonIndices> = (0..r)
            .map(|_| {
                let j = rng.gen_range(1..=p as i64);
                let k = (j + rng.gen_range(1..p as i64) - 1).rem_euclid(p as i64) + 1;
                SolitonIndices { i: rng.gen_range(1..=p as i64), j, k }
            })
            .collect();
        let ns = b.n_star();
        let c = (0..r).map(|_| vector(rng, ns)).collect();
        let dj = (0..r).map(|_| vector(rng, ns)).collect();
        let dk = (0..r).map(|_| vector(rng, ns)).collect();
        let Ok(spec) = SolitonSpec::canonical(b, poles, idx, c, dj, dk) else {
            continue;
        };
        let brackets_ok = (0..r).all(|i| {
            (0..r).all(|j| {
                spec.bracket(toda_core::solitons::Branch::J, i, j).norm() > 0.1
                    && spec.bracket(toda_core::solitons::Branch::K, i, j).norm() > 0.1
            })
        });
        if brackets_ok {
            return spec;
        }
    }
    panic!("no admissible draw");
}

/// Whether the solution is comfortably regular on the grid and on the
/// finite-difference stencil around every grid point.
pub fn regular_on(field: &dyn GammaField, grid: &Grid, h: f64, bound: f64) -> bool {
    grid.points().iter().all(|z| {
        [(0.0, 0.0), (h, h), (-h, -h), (h, -h), (-h, h)].iter().all(|(a, b)| {
            match field.gamma_pairs(ZPoint::new(z.z_minus + a, z.z_plus + b)) {
                Ok(gs) => gs
                    .iter()
                    .all(|(g, gi)| linalg::max_abs(g) < bound && linalg::max_abs(gi) < bound),
                Err(_) => false,
            }
        })
    })
}

/// Random spec with moderate poles whose closed-form solution stays
/// well-conditioned on `grid`, so that finite differences at the default
/// step resolve the Toda residual.
pub fn regular_spec(rng: &mut impl Rng, b: &BlockStructure, r: usize, grid: &Grid) -> SolitonSpec {
    for _ in 0..500 {
        let spec = random_spec_in(rng, b, r, 0.8, 1.25);
        let sol = SolitonSolution::closed_form(spec.clone());
        if regular_on(&sol, grid, 0.02, 5.0) {
            return spec;
        }
    }
    panic!("no regular draw for {:?}, r = {r}", b.sizes());
}

pub fn random_point(rng: &mut impl Rng, radius: f64) -> ZPoint {
    ZPoint::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))
}

pub fn max_dev(a: &CMat, b: &CMat) -> f64 {
    linalg::max_abs(&(a - b))
}
