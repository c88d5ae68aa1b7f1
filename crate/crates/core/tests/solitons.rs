mod common;

use common::*;
use rand::Rng;
use toda_core::blockalg::root_of_unity;
use toda_core::dressing::PoleData;
use toda_core::linalg::{self, max_abs};
use toda_core::solitons::{
    interaction_eta, multi_soliton_tau_pair, one_soliton, soliton_gamma_pair, Branch, SolitonIndices,
    SolitonSolution, SolitonSpec,
};
use toda_core::verify::{GammaField, ZPoint};
use toda_core::{CMat, CVec, Error, C64};

const STRUCTURES: [&[usize]; 5] = [&[1, 1], &[2, 1], &[2, 1, 1], &[2, 2, 2], &[1, 2, 1, 3]];

fn e(p: usize, k: i64) -> C64 {
    root_of_unity(p, k).unwrap()
}

fn branch_index(ix: SolitonIndices, a: Branch) -> i64 {
    match a {
        Branch::J => ix.j,
        Branch::K => ix.k,
    }
}

/// `D̃_ij(A) = (ᵗd_{A_i} Θ c_{I_j}) ν_i ε^{-A_i} / (ν_i ε^{-A_i} - μ_j ε^{I_j})`.
fn d_tilde(spec: &SolitonSpec, a: Branch) -> CMat {
    let p = spec.structure().p();
    let (mu, nu) = (spec.poles().mu(), spec.poles().nu());
    let ix = spec.indices();
    CMat::from_fn(spec.r(), spec.r(), |i, j| {
        let x = nu[i] * e(p, -branch_index(ix[i], a));
        spec.bracket(a, i, j) * x / (x - mu[j] * e(p, ix[j].i))
    })
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (perm, sign) in permutations(n - 1) {
        for pos in 0..n {
            let mut q = perm.clone();
            q.insert(pos, n - 1);
            let s = if (n - 1 - pos) % 2 == 0 { sign } else { -sign };
            out.push((q, s));
        }
    }
    out
}

fn leibniz(m: &CMat) -> C64 {
    permutations(m.nrows())
        .iter()
        .map(|(perm, s)| perm.iter().enumerate().fold(C64::from(*s), |acc, (r, &c)| acc * m[(r, c)]))
        .sum()
}

fn cofactor(m: &CMat, row: usize, col: usize) -> C64 {
    let minor = m.clone().remove_row(row).remove_column(col);
    let sign = if (row + col) % 2 == 0 { 1.0 } else { -1.0 };
    leibniz(&minor) * sign
}

fn members(mask: u32, r: usize) -> Vec<usize> {
    (0..r).filter(|i| mask >> i & 1 == 1).collect()
}

/// `X_S` from `H̃`, `D̃(J)⁻¹` and Leibniz cofactors of `M_S`, the identity
/// with the rows in `S` replaced by those of `H̃`.
fn x_oracle(spec: &SolitonSpec, mask: u32, alpha: i64) -> CMat {
    let r = spec.r();
    let dj = d_tilde(spec, Branch::J);
    let dk = d_tilde(spec, Branch::K);
    let dj_inv = dj.clone().try_inverse().unwrap();
    let h = &dk * &dj_inv;
    let mut m = linalg::identity(r);
    for i in members(mask, r) {
        m.set_row(i, &h.row(i));
    }
    let det = leibniz(&m);
    let n = spec.structure().size(alpha);
    let mut x = linalg::identity(n);
    for j in 0..r {
        let a = if mask >> j & 1 == 1 { Branch::K } else { Branch::J };
        for k in 0..r {
            let coef: C64 = (0..r).map(|l| dj_inv[(k, l)] * cofactor(&m, j, l)).sum::<C64>() / det;
            x -= spec.idempotent_tilde(alpha, a, j, k) * coef;
        }
    }
    x
}

fn specs(seed: u64, max_r: usize) -> Vec<SolitonSpec> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for sizes in STRUCTURES {
        for nsol in 1..=max_r {
            out.push(random_spec(&mut r, &bs(sizes), nsol));
        }
    }
    out
}

#[test]
fn idempotent_product_laws() {
    let mut r = rng(31);
    for draw in 0..100 {
        let b = bs(STRUCTURES[draw % STRUCTURES.len()]);
        let spec = random_spec(&mut r, &b, 3);
        let alpha = r.gen_range(1..=b.p() as i64);
        let br = |a, i, j| spec.bracket(a, i, j);
        let (i, j, k, l) = (r.gen_range(0..3), r.gen_range(0..3), r.gen_range(0..3), r.gen_range(0..3));
        for a in [Branch::J, Branch::K] {
            let yii = spec.idempotent(alpha, a, i, i);
            assert!(max_dev(&(&yii * &yii), &yii) <= 1e-12 * (1.0 + max_abs(&yii)));
            for bb in [Branch::J, Branch::K] {
                let lhs = spec.idempotent(alpha, a, i, j) * spec.idempotent(alpha, bb, k, l);
                let rhs = spec.idempotent(alpha, bb, k, j) * (br(a, i, l) / br(a, i, j) * br(bb, k, j) / br(bb, k, l));
                assert!(max_dev(&lhs, &rhs) <= 1e-12 * (1.0 + max_abs(&rhs)), "draw {draw}");
                let lhs = spec.idempotent_tilde(alpha, a, i, j) * spec.idempotent_tilde(alpha, bb, k, l);
                let rhs = spec.idempotent_tilde(alpha, bb, k, j) * br(a, i, l);
                assert!(max_dev(&lhs, &rhs) <= 1e-12 * (1.0 + max_abs(&rhs)), "draw {draw}");
            }
        }
    }
}

#[test]
fn derived_quantities() {
    for spec in specs(32, 3) {
        let p = spec.structure().p();
        assert!(max_dev(spec.d_tilde(Branch::J), &d_tilde(&spec, Branch::J)) <= 1e-13);
        assert!(max_dev(spec.d_tilde(Branch::K), &d_tilde(&spec, Branch::K)) <= 1e-13);
        let h = d_tilde(&spec, Branch::K) * d_tilde(&spec, Branch::J).try_inverse().unwrap();
        assert!(max_dev(spec.h_tilde(), &h) <= 1e-11 * (1.0 + max_abs(&h)));
        for i in 0..spec.r() {
            assert!((spec.delta_exponent(i) - h[(i, i)]).norm() <= 1e-11 * (1.0 + h[(i, i)].norm()));
            let ix = spec.indices()[i];
            let rho = ix.k - ix.j;
            assert_eq!(spec.rho(i), rho);
            assert!((spec.kappa(i) - 2.0 * (std::f64::consts::PI * rho as f64 / p as f64).sin()).abs() < 1e-15);
            let half = C64::from_polar(1.0, -std::f64::consts::PI * (ix.k + ix.j) as f64 / p as f64);
            let zeta = -C64::i() * spec.poles().nu()[i] * half;
            assert!((spec.zeta(i) - zeta).norm() < 1e-14);
            let z = ZPoint::new(0.3, -0.7);
            let phase = spec.kappa(i) * (zeta.inv() * 0.3 + zeta * -0.7);
            assert!((spec.phase(i, z) - phase).norm() < 1e-13);
        }
        let bk = spec.b_tilde(Branch::K) * spec.b_tilde(Branch::J).clone().try_inverse().unwrap();
        assert!(max_dev(&spec.f_tilde().unwrap(), &bk) <= 1e-11 * (1.0 + max_abs(&bk)));
    }
}

#[test]
fn dressing_factors() {
    for spec in specs(33, 3) {
        let b = spec.structure().clone();
        let r = spec.r();
        for a in [Branch::J, Branch::K] {
            let di = d_tilde(&spec, a).try_inverse().unwrap();
            for alpha in 1..=b.p() as i64 {
                let mut want = linalg::identity(b.size(alpha));
                for j in 0..r {
                    for k in 0..r {
                        want -= spec.idempotent_tilde(alpha, a, j, k) * di[(k, j)];
                    }
                }
                let (h, hi) = spec.dressing_factor_h(alpha, a).unwrap();
                assert!(max_dev(&h, &want) <= 1e-11 * (1.0 + max_abs(&want)));
                assert!(max_dev(&(&h * &hi), &linalg::identity(b.size(alpha))) <= 1e-11);
            }
        }
        // Intertwining with the constant pair.
        for alpha in 1..=b.p() as i64 {
            let (h, _) = spec.dressing_factor_h(alpha, Branch::J).unwrap();
            let (h1, h1_inv) = spec.dressing_factor_h(alpha + 1, Branch::J).unwrap();
            let (cp, cm) = (spec.pair().cp(alpha), spec.pair().cm(alpha));
            assert!(max_dev(&(&h * cp * &h1_inv), cp) <= 1e-12 * (1.0 + max_abs(&h) * max_abs(&h1_inv)));
            assert!(max_dev(&(&h1_inv * cm * &h), cm) <= 1e-12 * (1.0 + max_abs(&h) * max_abs(&h1_inv)));
            let _ = h1;
        }
    }
}

#[test]
fn one_pole_dressing_factor_closed_form() {
    for spec in specs(34, 1).into_iter() {
        let p = spec.structure().p();
        let ix = spec.indices()[0];
        let x = spec.poles().mu()[0] / spec.poles().nu()[0] * e(p, ix.i + ix.j);
        for alpha in 1..=p as i64 {
            let id = linalg::identity(spec.structure().size(alpha));
            let y = spec.idempotent(alpha, Branch::J, 0, 0);
            let (h, hi) = spec.dressing_factor_h(alpha, Branch::J).unwrap();
            assert!(max_dev(&h, &(&id - &y * (1.0 - x))) <= 1e-12);
            assert!(max_dev(&hi, &(&id - &y * (1.0 - x.inv()))) <= 1e-11);
        }
    }
}

#[test]
fn interaction_coefficients() {
    let mut r = rng(35);
    for _ in 0..50 {
        let n = r.gen_range(1..=5);
        let h = CMat::from_fn(n, n, |_, _| polar(&mut r, 0.3, 2.0));
        for mask in 1u32..1 << n {
            let s = members(mask, n);
            let sub = CMat::from_fn(s.len(), s.len(), |a, b| h[(s[a], s[b])]);
            let want = leibniz(&sub) / s.iter().fold(C64::new(1.0, 0.0), |acc, &k| acc * h[(k, k)]);
            let got = interaction_eta(&h, &s).unwrap();
            assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
            if s.len() == 1 {
                assert_eq!(got, C64::new(1.0, 0.0));
            }
        }
        let diag = CMat::from_diagonal(&h.diagonal());
        let all: Vec<usize> = (0..n).collect();
        assert!((interaction_eta(&diag, &all).unwrap() - 1.0).norm() <= 1e-14);
    }
    let mut h = CMat::identity(2, 2).map(|x: C64| x);
    h[(1, 1)] = C64::new(0.0, 0.0);
    assert!(matches!(interaction_eta(&h, &[0, 1]), Err(Error::DegenerateConfiguration(_))));
    for spec in specs(36, 3) {
        let full = (1u32 << spec.r()) - 1;
        let h = spec.h_tilde();
        let diag = (0..spec.r()).fold(C64::new(1.0, 0.0), |acc, k| acc * h[(k, k)]);
        let want = leibniz(h) / diag;
        assert!((spec.eta(full) - want).norm() <= 1e-10 * (1.0 + want.norm()));
    }
}

#[test]
fn x_matrices_match_cofactor_oracle() {
    for spec in specs(37, 3) {
        let r = spec.r();
        for mask in 0u32..1 << r {
            for alpha in 1..=spec.structure().p() as i64 {
                let (x, xi) = spec.delta_matrix_x(mask, alpha).unwrap();
                let want = x_oracle(&spec, mask, alpha);
                let scale = 1.0 + max_abs(&want);
                assert!(max_dev(&x, &want) <= 1e-10 * scale, "{:?} S={mask:b}", spec.structure().sizes());
                let id = linalg::identity(x.nrows());
                assert!(max_dev(&(&xi * &x), &id) <= 1e-11 * scale * (1.0 + max_abs(&xi)));
            }
        }
        // The complete set gives h_{α,K}.
        for alpha in 1..=spec.structure().p() as i64 {
            let (x, _) = spec.delta_matrix_x((1 << r) - 1, alpha).unwrap();
            let (hk, _) = spec.dressing_factor_h(alpha, Branch::K).unwrap();
            assert!(max_dev(&x, &hk) <= 1e-12 * (1.0 + max_abs(&hk)));
        }
    }
}

/// The single-index formula written entirely in terms of `H̃` and `D̃(J)⁻¹`.
#[test]
fn x_single_index_formula() {
    for spec in specs(38, 3) {
        let r = spec.r();
        let dj_inv = d_tilde(&spec, Branch::J).try_inverse().unwrap();
        let h = spec.h_tilde();
        for i in 0..r {
            for alpha in 1..=spec.structure().p() as i64 {
                let mut want = linalg::identity(spec.structure().size(alpha));
                for j in 0..r {
                    for k in 0..r {
                        let coef = (dj_inv[(k, j)] * h[(i, i)] - dj_inv[(k, i)] * h[(i, j)]) / h[(i, i)];
                        want -= spec.idempotent_tilde(alpha, Branch::J, j, k) * coef;
                    }
                }
                for k in 0..r {
                    want -= spec.idempotent_tilde(alpha, Branch::K, i, k) * (dj_inv[(k, i)] / h[(i, i)]);
                }
                let (x, _) = spec.delta_matrix_x(1 << i, alpha).unwrap();
                assert!(max_dev(&x, &want) <= 1e-10 * (1.0 + max_abs(&want)));
            }
        }
    }
}

fn abelian_spec(seed: u64, p: usize, r: usize) -> SolitonSpec {
    random_spec(&mut rng(seed), &bs(&vec![1; p]), r)
}

#[test]
fn abelian_reduction() {
    for (seed, p, nsol) in [(39, 2, 1), (40, 3, 2), (41, 4, 3), (42, 5, 2)] {
        let spec = abelian_spec(seed, p, nsol);
        for mask in 0u32..1 << nsol {
            let rho: i64 = members(mask, nsol).iter().map(|&i| spec.rho(i)).sum();
            for alpha in 1..=p as i64 {
                let (x, _) = spec.delta_matrix_x(mask, alpha).unwrap();
                let (_, hj_inv) = spec.dressing_factor_h(alpha, Branch::J).unwrap();
                let xt = hj_inv[(0, 0)] * x[(0, 0)];
                assert!((xt - e(p, rho)).norm() <= 1e-12 * (1.0 + xt.norm()));
            }
        }
        let mut r = rng(seed);
        for _ in 0..10 {
            let z = random_point(&mut r, 1.0);
            for alpha in 1..=p as i64 {
                let Ok((g, _)) = soliton_gamma_pair(&spec, z, alpha) else { continue };
                let here = multi_soliton_tau_pair(&spec, z, alpha).unwrap();
                let next = multi_soliton_tau_pair(&spec, z, alpha + 1).unwrap();
                assert!((here.t_x[(0, 0)] - next.t).norm() <= 1e-12 * (1.0 + next.t.norm()));
                let hirota = next.t / here.t;
                assert!((g[(0, 0)] - hirota).norm() <= 1e-12 * (1.0 + hirota.norm()));
            }
        }
    }
}

#[test]
fn one_soliton_agrees_with_tau_pair() {
    let mut r = rng(43);
    for spec in specs(44, 1) {
        for _ in 0..10 {
            let z = random_point(&mut r, 1.0);
            let Ok(closed) = one_soliton(&spec, z) else { continue };
            for (a, (g, gi)) in closed.iter().enumerate() {
                let (tg, tgi) = soliton_gamma_pair(&spec, z, a as i64 + 1).unwrap();
                assert!(max_dev(g, &tg) <= 1e-11 * (1.0 + max_abs(&tg)));
                assert!(max_dev(gi, &tgi) <= 1e-11 * (1.0 + max_abs(&tgi)));
                assert!(max_dev(&(gi * g), &linalg::identity(g.nrows())) <= 1e-10 * (1.0 + max_abs(gi) * max_abs(g)));
            }
        }
    }
    let two = specs(45, 2).pop().unwrap();
    assert!(matches!(one_soliton(&two, ZPoint::new(0.0, 0.0)), Err(Error::InvalidArgument(_))));
}

/// `T̃ = 1 + E_1 + E_2 + η̃_{12} E_1 E_2` and the matching matrix sum.
#[test]
fn two_soliton_expansion() {
    let mut r = rng(46);
    for sizes in [&[1usize, 1][..], &[2, 1], &[2, 2]] {
        let spec = random_spec(&mut r, &bs(sizes), 2);
        let h = spec.h_tilde();
        let eta = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]) / (h[(0, 0)] * h[(1, 1)]);
        for _ in 0..10 {
            let z = random_point(&mut r, 1.0);
            for alpha in 1..=2i64 {
                let e1 = spec.e_factor(alpha, 0, z);
                let e2 = spec.e_factor(alpha, 1, z);
                let want = 1.0 + e1 + e2 + eta * e1 * e2;
                let (hj, hj_inv) = spec.dressing_factor_h(alpha, Branch::J).unwrap();
                let xt = |mask| &hj_inv * spec.delta_matrix_x(mask, alpha).unwrap().0;
                let want_x = linalg::identity(hj.nrows()) + xt(1) * e1 + xt(2) * e2 + xt(3) * (eta * e1 * e2);
                let tau = multi_soliton_tau_pair(&spec, z, alpha).unwrap();
                assert!((tau.t - want).norm() <= 1e-12 * (1.0 + want.norm()));
                assert!(max_dev(&tau.t_x, &want_x) <= 1e-11 * (1.0 + max_abs(&want_x)));
                let eps_rho = e(2, alpha * spec.rho(0));
                let e_direct = eps_rho * spec.phase(0, z).exp() * h[(0, 0)];
                assert!((e1 - e_direct).norm() <= 1e-13 * (1.0 + e1.norm()));
            }
        }
    }
}

#[test]
fn vacuum_limit() {
    for spec in specs(47, 1) {
        let a = spec.kappa(0) * spec.zeta(0).inv();
        let b = spec.kappa(0) * spec.zeta(0);
        let dir = (a.re, b.re);
        // Re Z = -60.
        let norm2 = dir.0 * dir.0 + dir.1 * dir.1;
        let z = ZPoint::new(-60.0 * dir.0 / norm2, -60.0 * dir.1 / norm2);
        for alpha in 1..=spec.structure().p() as i64 {
            let tau = multi_soliton_tau_pair(&spec, z, alpha).unwrap();
            assert!((tau.t - 1.0).norm() <= 1e-12);
            let id = linalg::identity(tau.t_x.nrows());
            assert!(max_dev(&tau.t_x, &id) <= 1e-12);
            let (g, gi) = soliton_gamma_pair(&spec, z, alpha).unwrap();
            assert!(max_dev(&g, &id) <= 1e-12 && max_dev(&gi, &id) <= 1e-12);
        }
    }
}

/// The dressing construction equals the closed form up to the constant
/// left factor `h_{α,J}`.
#[test]
fn closed_form_matches_dressing() {
    let mut r = rng(48);
    for sizes in [&[1usize, 1][..], &[2, 1], &[1, 2], &[2, 1, 1], &[1, 1, 1], &[2, 2, 2]] {
        let b = bs(sizes);
        for nsol in 1..=3 {
            let spec = random_spec(&mut r, &b, nsol);
            let closed = SolitonSolution::closed_form(spec.clone());
            let dressed = SolitonSolution::dressing(spec.clone()).unwrap();
            let mut compared = 0;
            for _ in 0..25 {
                let z = random_point(&mut r, 1.0);
                let (Ok(cg), Ok(dg)) = (closed.gamma_pairs(z), dressed.gamma_pairs(z)) else { continue };
                for (a, ((g, gi), (dg, dgi))) in cg.iter().zip(&dg).enumerate() {
                    let alpha = a as i64 + 1;
                    let (hj, hj_inv) = spec.dressing_factor_h(alpha, Branch::J).unwrap();
                    let scale = 1.0 + max_abs(dg);
                    assert!(max_dev(&(&hj * g), dg) <= 1e-9 * scale, "{sizes:?} r={nsol}");
                    assert!(max_dev(&(gi * &hj_inv), dgi) <= 1e-9 * (1.0 + max_abs(dgi)));
                    let id = linalg::identity(g.nrows());
                    assert!(max_dev(&(gi * g), &id) <= 1e-10 * (1.0 + max_abs(gi) * max_abs(g)));
                }
                compared += 1;
            }
            assert!(compared >= 20);
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let b = bs(&[2, 1]);
    let one = CVec::from_element(1, C64::new(1.0, 0.0));
    let poles = || PoleData::new(2, vec![C64::new(0.8, 0.2)], vec![C64::new(1.3, -0.1)]).unwrap();
    let build = |ix, d_k: CVec| SolitonSpec::canonical(&b, poles(), vec![ix], vec![one.clone()], vec![one.clone()], vec![d_k]);
    assert!(matches!(
        build(SolitonIndices { i: 1, j: 2, k: 2 }, one.clone()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        build(SolitonIndices { i: 3, j: 1, k: 2 }, one.clone()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        build(SolitonIndices { i: 1, j: 1, k: 2 }, CVec::zeros(1)),
        Err(Error::DegenerateConfiguration(_))
    ));
    assert!(matches!(
        SolitonSpec::canonical(&b, poles(), vec![], vec![], vec![], vec![]),
        Err(Error::StructureMismatch(_))
    ));
}
