use proptest::prelude::*;
use toda_core::blockalg::{build_canonical_c, canonical_pair, root_of_unity};
use toda_core::linalg::{self, max_abs};
use toda_core::spectral::{canonical_theta, eigenvalues, null_basis, spectrum_multiplicities};
use toda_core::{BlockStructure, CMat, C64};

fn commuting_sizes() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=2, prop::collection::vec(0usize..=2, 1..=3)).prop_map(|(m, extra)| {
        extra.iter().flat_map(|&e| [m, m + e]).collect()
    })
}

fn power(m: &CMat, k: usize) -> CMat {
    (0..k).fold(linalg::identity(m.nrows()), |acc, _| m * acc)
}

proptest! {
    #[test]
    fn chain_and_eigen_relations(s in commuting_sizes()) {
        let bs = BlockStructure::new(s).unwrap();
        let pair = build_canonical_c(&bs).unwrap();
        let sd = canonical_theta(&pair).unwrap();
        let p = bs.p();
        for a in 1..=p as i64 {
            prop_assert!(max_abs(&(pair.cm(a) * sd.theta(a) - sd.theta(a + 1))) <= 1e-12);
            prop_assert!(max_abs(&(pair.cp(a) * sd.theta(a + 1) - sd.theta(a))) <= 1e-12);
            let g = sd.theta(a).transpose() * sd.theta(a);
            prop_assert!(max_abs(&(g - sd.gram())) <= 1e-15);
        }
        let (cm, cp) = (pair.c_minus().to_flat(), pair.c_plus().to_flat());
        let mut cols = Vec::new();
        for b in 1..=p as i64 {
            let psi = sd.psi(b).unwrap();
            let e = root_of_unity(p, b).unwrap();
            prop_assert!(max_abs(&(&cm * &psi - &psi * e.inv())) <= 1e-12);
            prop_assert!(max_abs(&(&cp * &psi - &psi * e)) <= 1e-12);
            for a in 1..=p as i64 {
                let blk = psi.rows(bs.offset(a), bs.size(a)).into_owned();
                let want = sd.theta(a) * root_of_unity(p, a * b).unwrap();
                prop_assert!(max_abs(&(blk - want)) <= 1e-15);
            }
            cols.extend(psi.column_iter().map(|c| c.into_owned()));
        }
        prop_assert!(max_abs(&(power(&cm, p) * sd.psi0())) <= 1e-11);
        cols.extend(sd.psi0().column_iter().map(|c| c.into_owned()));
        let basis = CMat::from_columns(&cols);
        prop_assert_eq!(linalg::numerical_rank(&basis, 1e-10), bs.n());
    }

    /// dim ker (c_- - λ)^2 = dim ker (c_- - λ) = n_* at every nonzero eigenvalue.
    #[test]
    fn no_generalized_eigenvectors_off_zero(s in commuting_sizes()) {
        let bs = BlockStructure::new(s).unwrap();
        let pair = build_canonical_c(&bs).unwrap();
        let cm = pair.c_minus().to_flat();
        let n = bs.n();
        for b in 1..=bs.p() as i64 {
            let shifted = &cm - linalg::identity(n) * root_of_unity(bs.p(), -b).unwrap();
            let k1 = n - linalg::numerical_rank(&shifted, 1e-10);
            let k2 = n - linalg::numerical_rank(&(&shifted * &shifted), 1e-10);
            prop_assert_eq!(k1, bs.n_star());
            prop_assert_eq!(k2, bs.n_star());
        }
    }

    /// The spectral statements only involve c_-, so every structure counts.
    #[test]
    fn characteristic_polynomial_clusters(s in prop::collection::vec(1usize..=4, 2..=6)) {
        let bs = BlockStructure::new(s).unwrap();
        let rep = spectrum_multiplicities(&canonical_pair(&bs)).unwrap();
        prop_assert!(rep.matches(&bs), "{:?}", rep);
    }
}

#[test]
fn spectrum_examples() {
    let bs = BlockStructure::new(vec![1, 1]).unwrap();
    let mut ev = eigenvalues(&canonical_pair(&bs).c_minus().to_flat()).unwrap();
    ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    assert!((ev[0] + C64::new(1.0, 0.0)).norm() < 1e-15);
    assert!((ev[1] - C64::new(1.0, 0.0)).norm() < 1e-15);

    let bs = BlockStructure::new(vec![2, 1]).unwrap();
    let rep = spectrum_multiplicities(&build_canonical_c(&bs).unwrap()).unwrap();
    assert_eq!((rep.zero_algebraic, rep.zero_geometric, rep.nonzero.clone()), (1, 1, vec![1, 1]));

    let bs = BlockStructure::new(vec![2, 2, 2]).unwrap();
    let rep = spectrum_multiplicities(&build_canonical_c(&bs).unwrap()).unwrap();
    assert_eq!((rep.zero_algebraic, rep.nonzero.clone()), (0, vec![2, 2, 2]));
}

#[test]
fn null_basis_matches_svd_kernel_oracle() {
    // (2, 1): the kernel of (c_-)^2 is spanned by the second basis vector.
    let bs = BlockStructure::new(vec![2, 1]).unwrap();
    let pair = build_canonical_c(&bs).unwrap();
    let psi0 = null_basis(&pair).unwrap();
    assert_eq!(psi0.ncols(), 1);
    assert!(psi0[(0, 0)].norm() < 1e-14 && psi0[(2, 0)].norm() < 1e-14);
    assert!((psi0[(1, 0)].norm() - 1.0).abs() < 1e-14);
    assert_eq!(null_basis(&build_canonical_c(&BlockStructure::new(vec![1, 1]).unwrap()).unwrap()).unwrap().ncols(), 0);
}
