//! Randomized structural invariants: interchange, commutativity of unit
//! endomorphism algebras, support cutting, the solution-norm equivalence,
//! Hom-dimension conservation under base refinement, composition of support
//! bijections, and dimension arithmetic.

use fibrecat::conjugation::{canonical_solution, dimension, standardize};
use fibrecat::homcalc::{
    balanced_components, compose_horizontal, compose_vertical, direct_sum, hom_basis, hom_dim,
    is_balanced, solution_inner_product, support, theta_compose, CentralFunction, Side, TwoArrow,
};
use fibrecat::model::{Arrow, CategoryPresentation, PresentationBuilder, RawFibre};
use fibrecat::numerics::{SplitMix64, Tolerance};
use proptest::prelude::*;
use std::collections::BTreeMap;

type Cat = CategoryPresentation<f64>;
type Op = TwoArrow<f64>;
type Arr = Arrow<f64>;

fn tol() -> Tolerance<f64> {
    Tolerance::default()
}

/// One object `A` with `points` base points and one endo generator `g{k}`
/// per dims matrix; entry `dims[i][j]` is the fibre dimension at (target
/// point i, source point j), zero meaning no fibre.
fn build_endo(points: usize, dims: &[Vec<Vec<usize>>]) -> Cat {
    let labels: Vec<String> = (0..points).map(|i| format!("p{i}")).collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let mut b = PresentationBuilder::new(tol());
    b.object("A", &refs);
    for (k, m) in dims.iter().enumerate() {
        let mut fibres = Vec::new();
        for (i, row) in m.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if d > 0 {
                    fibres.push(RawFibre::plain(&labels[i], &labels[j], d));
                }
            }
        }
        b.arrow(&format!("g{k}"), "A", "A", fibres);
    }
    b.build().unwrap()
}

fn gen_arrow(cat: &Cat, name: &str) -> Arr {
    Arrow::generator(cat, cat.gen_id(name).unwrap())
}

fn random_hom(cat: &Cat, source: &Arr, target: &Arr, rng: &mut SplitMix64) -> Op {
    let basis = hom_basis(cat, source, target).unwrap();
    let mut acc = TwoArrow::zero(source.clone(), target.clone());
    for e in &basis.elements {
        acc = acc.add(&e.scaled(rng.next_complex_gaussian()));
    }
    acc
}

fn dims_matrix(points: usize, lo: usize, hi: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(lo..=hi, points), points)
}

fn nonzero_dims_matrix(points: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    dims_matrix(points, 0, 2).prop_filter("needs a fibre", |m| {
        m.iter().flatten().any(|&d| d > 0)
    })
}

/// Support permutation plus per-point fibre dimensions: the generator has
/// exactly one fibre per source point, at (perm[j], j).
fn permutation_gen(points: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (
        Just((0..points).collect::<Vec<usize>>()).prop_shuffle(),
        prop::collection::vec(1..=2usize, points),
    )
}

fn permutation_dims(points: usize, perm: &[usize], fibre: &[usize]) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; points]; points];
    for (j, (&i, &d)) in perm.iter().zip(fibre).enumerate() {
        m[i][j] = d;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// (s1 tensor s2) after (t1 tensor t2) equals (s1 after t1) tensor
    /// (s2 after t2) on random quadruples.
    #[test]
    fn interchange_law_holds_on_random_quadruples(
        (points, dims, seed) in (1..=3usize).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(dims_matrix(n, 1, 2), 6),
            any::<u64>(),
        ))
    ) {
        let cat = build_endo(points, &dims);
        let g: Vec<Arr> = (0..6).map(|k| gen_arrow(&cat, &format!("g{k}"))).collect();
        let mut rng = SplitMix64::new(seed);
        let t1 = random_hom(&cat, &g[0], &g[1], &mut rng);
        let s1 = random_hom(&cat, &g[1], &g[2], &mut rng);
        let t2 = random_hom(&cat, &g[3], &g[4], &mut rng);
        let s2 = random_hom(&cat, &g[4], &g[5], &mut rng);
        let lhs = compose_vertical(
            &cat,
            &compose_horizontal(&cat, &s1, &s2).unwrap(),
            &compose_horizontal(&cat, &t1, &t2).unwrap(),
        )
        .unwrap();
        let rhs = compose_horizontal(
            &cat,
            &compose_vertical(&cat, &s1, &t1).unwrap(),
            &compose_vertical(&cat, &s2, &t2).unwrap(),
        )
        .unwrap();
        prop_assert!(lhs.dist_max(&rhs) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// End(1_A) is commutative and its tensor agrees with its composition.
    #[test]
    fn unit_endomorphisms_commute_and_tensor_equals_composition(
        points in 1..=4usize,
        seed in any::<u64>(),
    ) {
        let cat = build_endo(points, &[vec![vec![1; points]; points]]);
        let object = cat.object_id("A").unwrap();
        let mut rng = SplitMix64::new(seed);
        let mut central = || CentralFunction::<f64> {
            object,
            values: (0..points).map(|_| rng.next_complex_gaussian()).collect(),
        };
        let (u, v) = (central(), central());
        let (uu, vv) = (u.to_two_arrow(), v.to_two_arrow());
        let vert = compose_vertical(&cat, &uu, &vv).unwrap();
        let horiz = compose_horizontal(&cat, &uu, &vv).unwrap();
        let swapped = compose_vertical(&cat, &vv, &uu).unwrap();
        let pointwise = u.pointwise_mul(&v).to_two_arrow();
        prop_assert!(vert.dist_max(&horiz) < 1e-12);
        prop_assert!(vert.dist_max(&swapped) < 1e-12);
        prop_assert!(vert.dist_max(&pointwise) < 1e-12);
    }

    /// Tensoring with the support projections of both endpoint arrows
    /// leaves a 2-arrow unchanged.
    #[test]
    fn support_cutting_fixes_every_hom_element(
        (points, d_rho, d_sigma, seed) in (1..=3usize).prop_flat_map(|n| (
            Just(n),
            nonzero_dims_matrix(n),
            nonzero_dims_matrix(n),
            any::<u64>(),
        ))
    ) {
        let cat = build_endo(points, &[d_rho, d_sigma]);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        let mut rng = SplitMix64::new(seed);
        let t = random_hom(&cat, &rho, &sigma, &mut rng);
        let indicator = |arrow: &Arr| {
            let s = support(&cat, arrow, Side::Left);
            CentralFunction::<f64> {
                object: arrow.source(),
                values: (0..points)
                    .map(|i| {
                        if s.contains(&i) {
                            fibrecat::numerics::one()
                        } else {
                            fibrecat::numerics::zero()
                        }
                    })
                    .collect(),
            }
        };
        let e = indicator(&sigma).pointwise_mul(&indicator(&rho)).to_two_arrow();
        let cut = compose_horizontal(&cat, &t, &e).unwrap();
        prop_assert!(cut.dist_max(&t) < 1e-12);
    }

    /// The central inner product is positive and its sup-root norm is
    /// equivalent to the operator norm, with constants given by the
    /// solution norms.
    #[test]
    fn solution_inner_product_is_positive_and_norm_equivalent(
        (points, d_rho, d_sigma, seed) in (1..=3usize).prop_flat_map(|n| (
            Just(n),
            nonzero_dims_matrix(n),
            nonzero_dims_matrix(n),
            any::<u64>(),
        ))
    ) {
        let cat = build_endo(points, &[d_rho, d_sigma]);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        let mut rng = SplitMix64::new(seed);
        let t = random_hom(&cat, &rho, &sigma, &mut rng);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let ip = solution_inner_product(&cat, &t, &t, &sol.r, &sol.r_bar, Side::Right).unwrap();
        prop_assert!(ip.min_real() >= -1e-9);
        let sup_root = ip
            .values
            .iter()
            .map(|v| v.re.max(0.0).sqrt())
            .fold(0.0_f64, f64::max);
        let t_norm = t.op_norm(&tol()).unwrap();
        let r_norm = sol.r.op_norm(&tol()).unwrap();
        let rbar_norm = sol.r_bar.op_norm(&tol()).unwrap();
        prop_assert!(sup_root <= t_norm * r_norm * (1.0 + 1e-7) + 1e-9);
        prop_assert!(t_norm <= rbar_norm * sup_root * (1.0 + 1e-7) + 1e-9);
    }

    /// Refining the base into singletons conserves total Hom dimension;
    /// cross-part Hom spaces vanish.
    #[test]
    fn hom_dimension_is_conserved_under_refinement(
        (points, d_rho, d_sigma) in (2..=3usize).prop_flat_map(|n| (
            Just(n),
            nonzero_dims_matrix(n),
            nonzero_dims_matrix(n),
        ))
    ) {
        let cat = build_endo(points, &[d_rho, d_sigma]);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        let before = hom_dim(&cat, &rho, &sigma).unwrap();
        let parts: Vec<Vec<String>> = (0..points).map(|i| vec![format!("p{i}")]).collect();
        let refined = cat.refine_object("A", &parts).unwrap();
        let mut after = 0;
        for tp in 0..points {
            for sp in 0..points {
                let r = refined.gen_id(&format!("g0#t{tp}#s{sp}"));
                let s = refined.gen_id(&format!("g1#t{tp}#s{sp}"));
                if let (Ok(r), Ok(s)) = (r, s) {
                    let ra = Arrow::generator(&refined, r);
                    let sa = Arrow::generator(&refined, s);
                    after += hom_dim(&refined, &ra, &sa).unwrap();
                }
            }
        }
        prop_assert_eq!(before, after);
    }

    /// The support bijection of a tensor of balanced arrows is the
    /// composite of the factors' bijections.
    #[test]
    fn balanced_support_bijections_compose(
        (points, rho_perm, sigma_perm) in (1..=4usize).prop_flat_map(|n| (
            Just(n),
            permutation_gen(n),
            permutation_gen(n),
        ))
    ) {
        let dims = vec![
            permutation_dims(points, &rho_perm.0, &rho_perm.1),
            permutation_dims(points, &sigma_perm.0, &sigma_perm.1),
        ];
        let cat = build_endo(points, &dims);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        prop_assert!(is_balanced(&cat, &rho));
        prop_assert!(is_balanced(&cat, &sigma));
        let composite = sigma.tensor(&cat, &rho).unwrap();
        prop_assert!(is_balanced(&cat, &composite));
        let comps = balanced_components(&cat, &composite).unwrap();
        prop_assert_eq!(comps.len(), 1);
        let theta_rho: BTreeMap<usize, usize> =
            rho_perm.0.iter().enumerate().map(|(j, &i)| (j, i)).collect();
        let theta_sigma: BTreeMap<usize, usize> =
            sigma_perm.0.iter().enumerate().map(|(j, &i)| (j, i)).collect();
        let expected = theta_compose(&theta_sigma, &theta_rho);
        prop_assert_eq!(&comps[0].theta, &expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Standard dimensions add along direct sums, pointwise on both bases.
    #[test]
    fn dimension_is_additive_on_direct_sums(
        (points, d_rho, d_sigma) in (1..=3usize).prop_flat_map(|n| (
            Just(n),
            nonzero_dims_matrix(n),
            nonzero_dims_matrix(n),
        ))
    ) {
        let cat = build_endo(points, &[d_rho, d_sigma]);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        let (sum, _, _) = direct_sum(&cat, "s", &rho, &sigma).unwrap();
        let dim_of = |arrow: &Arr| {
            let (std, _) = standardize(&cat, &canonical_solution(&cat, arrow).unwrap()).unwrap();
            dimension(&cat, &std).unwrap()
        };
        let (dr, ds, dsum) = (dim_of(&rho), dim_of(&sigma), dim_of(&sum));
        for i in 0..points {
            let left = dr.left.values[i].re + ds.left.values[i].re;
            prop_assert!((dsum.left.values[i].re - left).abs() < 1e-9);
            let right = dr.right.values[i].re + ds.right.values[i].re;
            prop_assert!((dsum.right.values[i].re - right).abs() < 1e-9);
        }
    }

    /// On balanced arrows the left dimension of a tensor multiplies
    /// through the support bijection of the inner factor.
    #[test]
    fn dimension_is_multiplicative_on_balanced_tensors(
        (points, rho_perm, sigma_perm) in (1..=3usize).prop_flat_map(|n| (
            Just(n),
            permutation_gen(n),
            permutation_gen(n),
        ))
    ) {
        let dims = vec![
            permutation_dims(points, &rho_perm.0, &rho_perm.1),
            permutation_dims(points, &sigma_perm.0, &sigma_perm.1),
        ];
        let cat = build_endo(points, &dims);
        let rho = gen_arrow(&cat, "g0");
        let sigma = gen_arrow(&cat, "g1");
        let composite = sigma.tensor(&cat, &rho).unwrap();
        let dim_of = |arrow: &Arr| {
            let (std, _) = standardize(&cat, &canonical_solution(&cat, arrow).unwrap()).unwrap();
            dimension(&cat, &std).unwrap()
        };
        let (dr, ds, dc) = (dim_of(&rho), dim_of(&sigma), dim_of(&composite));
        for w in 0..points {
            let through = rho_perm.0[w];
            let expected = ds.left.values[through].re * dr.left.values[w].re;
            prop_assert!(
                (dc.left.values[w].re - expected).abs() < 1e-9,
                "point {}: {} vs {}",
                w,
                dc.left.values[w].re,
                expected
            );
        }
    }
}
