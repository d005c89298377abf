use proptest::prelude::*;
use tmreadout_core::spectrum::{solve, FockCutoffs, SpectrumOptions};
use tmreadout_core::{derive_bare_modes, CircuitParams};

fn scaled(fs: f64, ft: f64, fj: f64, fl: f64) -> CircuitParams {
    CircuitParams::new(132e-15 * fs, 96.6e-15 * ft, 3.84e9 * fj, 3.85e-9 * fl)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian_for_random_circuits(
        fs in 0.7f64..1.3, ft in 0.7f64..1.3, fj in 0.7f64..1.3, fl in 0.7f64..1.3
    ) {
        let (_, _, defect) = solve(&scaled(fs, ft, fj, fl), &FockCutoffs::new(10, 10), &SpectrumOptions::default()).unwrap();
        prop_assert!(defect < 1e-12);
    }

    #[test]
    fn cross_kerr_agreement_in_thirty_percent_ball(
        fs in 0.7f64..1.3, ft in 0.7f64..1.3, fj in 0.7f64..1.3, fl in 0.7f64..1.3
    ) {
        let c = scaled(fs, ft, fj, fl);
        let bare = derive_bare_modes(&c).unwrap();
        let (p, _, _) = solve(&c, &FockCutoffs::default(), &SpectrumOptions::default()).unwrap();
        prop_assert!(((p.chi_qa - bare.chi_qa) / bare.chi_qa).abs() < 0.15);
    }

    #[test]
    fn anharmonicity_agreement_in_thirty_percent_ball(
        fs in 0.7f64..1.3, ft in 0.7f64..1.3, fj in 0.7f64..1.3, fl in 0.7f64..1.3
    ) {
        let c = scaled(fs, ft, fj, fl);
        let bare = derive_bare_modes(&c).unwrap();
        let (p, _, _) = solve(&c, &FockCutoffs::default(), &SpectrumOptions::default()).unwrap();
        prop_assert!(
            ((p.alpha_q - bare.alpha_q) / bare.alpha_q).abs() < 0.10,
            "numeric {} vs analytic {}", p.alpha_q, bare.alpha_q
        );
    }
}
