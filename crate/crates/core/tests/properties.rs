use proptest::prelude::*;

use kcsr_core::click_limit::layer_spectrum;
use kcsr_core::dark::{dimer_product, facilitable_zeros, is_independent_set, is_dark, kernel_basis, DarkClass, CLASS_TOL};
use kcsr_core::dynamics::DensityMatrix;
use kcsr_core::entanglement::{log_negativity, mutual_information_matrix, Bipartition};
use kcsr_core::model_reduction::{alpha, eliminate_cavity, raman_reduce, CavityParams, RamanParams};
use kcsr_core::spin::{
    apply_f, apply_fdag, constraint_allows, expect, sigma_minus, total_sz, Boundary, ConstraintRule, Observable,
    PureState, SpinConfig, C64,
};

fn rule_strategy() -> impl Strategy<Value = ConstraintRule> {
    let boundary = prop_oneof![Just(Boundary::Periodic), Just(Boundary::Open)];
    let named = (0..4usize, boundary.clone()).prop_map(|(k, b)| match k {
        0 => ConstraintRule::dicke(b),
        1 => ConstraintRule::east(b),
        2 => ConstraintRule::and(b),
        _ => ConstraintRule::or(b),
    });
    let custom = (prop::collection::vec(any::<bool>(), 15), boundary, any::<bool>()).prop_map(|(mut t, b, fill)| {
        t.push(true);
        ConstraintRule::custom(2, t, b).unwrap().with_fill(fill)
    });
    prop_oneof![named, custom]
}

fn state_strategy(n: usize) -> impl Strategy<Value = PureState> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_map(move |v| {
        let amps = v.into_iter().map(|(r, i)| C64::new(r, i)).collect();
        PureState::from_amplitudes(n, amps).unwrap()
    })
}

fn normalized(n: usize) -> impl Strategy<Value = PureState> {
    state_strategy(n).prop_filter_map("nonzero", |s| s.normalized().ok())
}

fn max_diff(a: &PureState, b: &PureState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Applies a 2×2 unitary to 1-based site `j`.
fn rotate_site(psi: &PureState, j: usize, u: [[C64; 2]; 2]) -> PureState {
    let bit = 1usize << (j - 1);
    let mut out = psi.clone();
    let a = psi.amplitudes();
    let o = out.amplitudes_mut();
    for b in 0..a.len() {
        if b & bit == 0 {
            let (lo, hi) = (a[b], a[b | bit]);
            o[b] = u[0][0] * lo + u[0][1] * hi;
            o[b | bit] = u[1][0] * lo + u[1][1] * hi;
        }
    }
    out
}

fn unitary(theta: f64, phi: f64, lambda: f64) -> [[C64; 2]; 2] {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [
        [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sz_f_commutator(rule in rule_strategy(), psi in state_strategy(6)) {
        // (S^z F − F S^z + F) ψ = 0
        let mut r = total_sz(&apply_f(&rule, &psi));
        r.axpy(C64::new(-1.0, 0.0), &apply_f(&rule, &total_sz(&psi))).unwrap();
        r.axpy(C64::new(1.0, 0.0), &apply_f(&rule, &psi)).unwrap();
        prop_assert!(r.norm_sqr().sqrt() < 1e-12);
    }

    #[test]
    fn constraint_ignores_own_site(rule in rule_strategy(), bits in 0u64..256, j in 1usize..=8) {
        let c = SpinConfig::new(bits, 8).unwrap();
        let flipped = c.flipped(j).unwrap();
        prop_assert_eq!(
            constraint_allows(&rule, &c, j).unwrap(),
            constraint_allows(&rule, &flipped, j).unwrap()
        );
    }

    #[test]
    fn dicke_f_is_total_lowering(psi in state_strategy(5), periodic in any::<bool>()) {
        let b = if periodic { Boundary::Periodic } else { Boundary::Open };
        let f = apply_f(&ConstraintRule::dicke(b), &psi);
        let mut sum = PureState::zeros(5).unwrap();
        for j in 1..=5 {
            sum.axpy(C64::new(1.0, 0.0), &sigma_minus(&psi, j).unwrap()).unwrap();
        }
        prop_assert_eq!(max_diff(&f, &sum), 0.0);
    }

    #[test]
    fn adjoint_pairing(rule in rule_strategy(), phi in state_strategy(6), psi in state_strategy(6)) {
        let lhs = phi.inner(&apply_f(&rule, &psi)).unwrap();
        let rhs = apply_fdag(&rule, &phi).inner(&psi).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn fdagf_is_norm_of_f(rule in rule_strategy(), psi in normalized(6)) {
        let direct = apply_f(&rule, &psi).norm_sqr();
        let e = expect(Observable::FdagF, &rule, &psi);
        prop_assert!((e - direct).abs() < 1e-12 * (1.0 + direct));
    }

    #[test]
    fn elimination_matches_alpha(g in 0.01f64..10.0, kappa in 0.1f64..100.0, delta in -50.0f64..50.0, n in 1usize..50) {
        let p = CavityParams { g, kappa, delta, n_atoms: n };
        let r = eliminate_cavity(&p).unwrap();
        let a = alpha(&p);
        prop_assert!((r.gamma - 2.0 * a.re).abs() <= 1e-14 * r.gamma.abs().max(1.0));
        prop_assert!((r.chi - a.im).abs() <= 1e-14 * r.chi.abs().max(1.0));
    }

    #[test]
    fn loss_ratio_is_inverse_cooperativity(
        g in 0.01f64..10.0,
        omega in 0.01f64..10.0,
        delta_e in 1.0f64..1000.0,
        gamma_e in 0.01f64..10.0,
        kappa in 0.01f64..100.0,
    ) {
        let r = raman_reduce(&RamanParams { g, omega, delta_e, gamma_e, kappa }).unwrap();
        let want = 1.0 / (4.0 * r.cooperativity);
        prop_assert!(((r.loss_ratio - want) / want).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn layer_intensity_bounded_and_window_positive(
        table in prop::collection::vec(any::<bool>(), 3),
        n in 4usize..=12,
        periodic in any::<bool>(),
    ) {
        let b = if periodic { Boundary::Periodic } else { Boundary::Open };
        let mut t = table;
        t.push(true);
        let rule = ConstraintRule::custom(1, t, b).unwrap();
        let spec = layer_spectrum(&rule, n, n).unwrap();
        let n2 = (n * n) as f64;
        for (k, &i) in spec.intensities.iter().enumerate() {
            prop_assert!(i <= n2 * (1.0 + 1e-12), "k={} I={}", k, i);
            if n as i64 - 3 * k as i64 > 0 {
                prop_assert!(spec.log_norms[k].is_finite());
                prop_assert!(i > 0.0);
            }
        }
    }

    #[test]
    fn disjoint_dimer_packets_compose(
        gaps in prop::collection::vec(2usize..=3, 8),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 4),
    ) {
        // Root built from blocks `1 0…0` with at least two zeros each.
        let n = 20;
        let (mut bits, mut pos) = (0u64, 0usize);
        for g in gaps {
            if pos + 1 + g > n {
                break;
            }
            bits |= 1 << pos;
            pos += 1 + g;
        }
        prop_assert!(is_independent_set(bits, n, Boundary::Periodic));
        let root = SpinConfig::new(bits, n).unwrap();
        let s1 = facilitable_zeros(&root, Boundary::Periodic);
        prop_assert!(s1.len() >= 4);
        let p: Vec<usize> = picks.iter().map(|i| s1[i.index(s1.len())]).collect();
        let rule = ConstraintRule::east(Boundary::Periodic);
        // Overlapping or repeated picks are rejected by the constructor.
        if let Ok(psi) = dimer_product(&root, &[(p[0], p[1]), (p[2], p[3])], Boundary::Periodic) {
            prop_assert!(is_dark(&rule, &psi, 1e-12).unwrap().dark);
        }
    }

    #[test]
    fn negativity_invariant_under_local_unitaries(
        psi in normalized(4),
        angles in prop::collection::vec((0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3), 4),
    ) {
        let part = Bipartition::half(4).unwrap();
        let before = log_negativity(&DensityMatrix::from_pure(&psi).unwrap(), &part).unwrap();
        let mut rotated = psi.clone();
        for (j, (t, p, l)) in angles.into_iter().enumerate() {
            rotated = rotate_site(&rotated, j + 1, unitary(t, p, l));
        }
        let after = log_negativity(&DensityMatrix::from_pure(&rotated).unwrap(), &part).unwrap();
        prop_assert!((before - after).abs() < 1e-9, "{} vs {}", before, after);
    }

    #[test]
    fn mutual_information_symmetric_nonnegative(psi in normalized(4), phi in normalized(4), w in 0.0f64..1.0) {
        let a = DensityMatrix::from_pure(&psi).unwrap().into_entries();
        let b = DensityMatrix::from_pure(&phi).unwrap().into_entries();
        let rho = DensityMatrix::new(4, a * C64::new(w, 0.0) + b * C64::new(1.0 - w, 0.0)).unwrap();
        let mi = mutual_information_matrix(&rho).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((mi[(i, j)] - mi[(j, i)]).abs() < 1e-12);
                prop_assert!(mi[(i, j)] > -1e-10);
            }
        }
    }
}

#[test]
fn kernel_vectors_fall_in_exactly_one_class() {
    for n in 3..=8 {
        for b in [Boundary::Periodic, Boundary::Open] {
            let basis = kernel_basis(&ConstraintRule::east(b), n).unwrap();
            for (_, label, _) in basis.vectors() {
                let expected = if label.ntri >= CLASS_TOL {
                    DarkClass::TriplePlus
                } else if label.nadj >= CLASS_TOL {
                    DarkClass::Singlet
                } else {
                    DarkClass::Bitstring
                };
                assert_eq!(label.class, expected);
            }
            let total: usize = [DarkClass::Bitstring, DarkClass::Singlet, DarkClass::TriplePlus]
                .into_iter()
                .map(|c| basis.count(c))
                .sum();
            assert_eq!(total, basis.len());
        }
    }
}
