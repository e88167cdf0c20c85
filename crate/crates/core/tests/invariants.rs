use mcopf::analysis::{format_sig9, relaxation_gap};
use mcopf::formulations::{embed, lift_point};
use mcopf::netmodel::{kron_reduce, parse_network, to_json, two_bus_two_wire};
use mcopf::{build_formulation, ComplexMatrix, FormulationKind, IvrPoint};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Points satisfying current KCL on the two-bus case.
fn kcl_point() -> impl Strategy<Value = IvrPoint> {
    (complex(), complex(), complex(), complex()).prop_map(|(ua, un, ia, i_n)| {
        let net = two_bus_two_wire();
        let mut p = IvrPoint::flat(&net);
        p.voltages[1] = vec![ua, un];
        p.branch_currents[0] = vec![ia, i_n];
        p.gen_currents[0] = vec![ia, i_n];
        p.load_currents[0] = vec![ia, i_n];
        p
    })
}

fn labelled_max(entries: &[mcopf::formulations::ResidualEntry], prefix: &str) -> f64 {
    let v: Vec<f64> = entries.iter().filter(|e| e.label.starts_with(prefix)).map(|e| e.value.abs()).collect();
    assert!(!v.is_empty(), "no {prefix} rows");
    v.into_iter().fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn kron_matches_schur_complement(a in 0.1f64..1.0, b in -0.05f64..0.05, d in 0.1f64..1.0, x in 0.01f64..1.0) {
        let z = ComplexMatrix::from_row_slice(2, 2, &[
            Complex64::new(a, x), Complex64::new(b, 0.5 * x),
            Complex64::new(b, 0.5 * x), Complex64::new(d, x),
        ]);
        let k = kron_reduce(&z, &[1]).unwrap();
        let hand = z[(0, 0)] - z[(0, 1)] * z[(1, 0)] / z[(1, 1)];
        prop_assert!((k[(0, 0)] - hand).norm() < 1e-12);
    }

    #[test]
    fn lifted_kcl_follows_from_current_kcl(p in kcl_point()) {
        let net = two_bus_two_wire();
        for kind in [FormulationKind::Swr1, FormulationKind::Swr2] {
            let inst = build_formulation(&net, kind).unwrap();
            let rep = inst.residuals(&embed(&inst, &net, &p).unwrap()).unwrap();
            prop_assert!(labelled_max(&rep.entries, "kcl") <= 1e-10);
        }
    }

    #[test]
    fn conserved_load_current_gives_zero_row_sums(p in kcl_point(), ia in complex()) {
        let net = two_bus_two_wire();
        let mut p = p;
        p.load_currents[0] = vec![ia, -ia];
        let inst = build_formulation(&net, FormulationKind::Swr2).unwrap();
        let rep = inst.residuals(&embed(&inst, &net, &p).unwrap()).unwrap();
        prop_assert!(labelled_max(&rep.entries, "load_rowsum") <= 1e-12);
    }

    #[test]
    fn lifted_blocks_are_rank_one_psd(p in kcl_point()) {
        let net = two_bus_two_wire();
        let lifted = lift_point(&p, &net).unwrap();
        for w in &lifted.w {
            prop_assert!(w.is_hermitian(1e-12));
        }
        let inst = build_formulation(&net, FormulationKind::Swr1).unwrap();
        let rep = inst.residuals(&embed(&inst, &net, &p).unwrap()).unwrap();
        for e in rep.psd_min_eigenvalues {
            prop_assert!(e >= -1e-9);
        }
    }

    #[test]
    fn point_json_round_trips(p in kcl_point()) {
        let net = two_bus_two_wire();
        let back = IvrPoint::from_json(p.to_json(&net).as_bytes(), &net).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn sig9_keeps_nine_digits(v in -1e6f64..1e6) {
        let back: f64 = format_sig9(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-8 * v.abs().max(1e-4));
    }

    #[test]
    fn gap_is_zero_for_equal_objectives(p in 0.01f64..100.0) {
        prop_assert!(relaxation_gap(p, p).unwrap().abs() < 1e-12);
    }
}

#[test]
fn network_json_round_trips() {
    let net = two_bus_two_wire();
    assert_eq!(parse_network(to_json(&net).as_bytes()).unwrap(), net);
}
