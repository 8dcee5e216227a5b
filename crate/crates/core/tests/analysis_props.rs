use nd_core::analysis::{
    discovery_prob, discovery_terms, expected_total_slots, theory_curve, AnalysisParams,
};
use nd_core::phy::{PhyConfig, UnpackCache, UnpackTable};
use nd_core::{BaseAlgorithm, SicMode, SimConfig, Variant};
use proptest::prelude::*;

/// Synthetic unpack table 1/m^2 for m = 1..=15.
fn synthetic_table() -> UnpackTable {
    UnpackTable {
        n0: 15,
        values: (1..=15).map(|m| 1.0 / (m * m) as f64).collect(),
    }
}

fn real_table() -> UnpackTable {
    UnpackTable::compute(&PhyConfig::default(), 800.0, 20_000, 1)
}

#[test]
fn formulas_match_reference_evaluation() {
    // K = 15, p_t = 0.15, four beams, j in {0, 7, 14}; reference values from
    // a separate Python evaluation of the same closed forms
    let cases: [(Variant, [f64; 3]); 6] = [
        (
            Variant::plain(BaseAlgorithm::Cra),
            [
                0.005392680238692574,
                0.00650734065348782,
                0.009333199138966698,
            ],
        ),
        (
            Variant::sic(BaseAlgorithm::Cra),
            [
                0.006622728917608654,
                0.007670342934562894,
                0.010176498156269033,
            ],
        ),
        (
            Variant::sic_mpr(BaseAlgorithm::Cra, 2),
            [
                0.009190637516291449,
                0.010255649370719043,
                0.01257943518360183,
            ],
        ),
        (
            Variant::plain(BaseAlgorithm::Sba),
            [
                0.01674737017995386,
                0.02001333732870801,
                0.026206265730375503,
            ],
        ),
        (
            Variant::sic(BaseAlgorithm::Sba),
            [
                0.03196049233597834,
                0.0341483892550291,
                0.049329631919567206,
            ],
        ),
        (
            Variant::sic_mpr(BaseAlgorithm::Sba, 2),
            [
                0.06673257215106805,
                0.06802980865847512,
                0.10028044897916169,
            ],
        ),
    ];
    let table = synthetic_table();
    for (v, expected) in cases {
        let params = AnalysisParams::with_table(v, 15.0, 0.15, 4, &table);
        for (j, e) in [0, 7, 14].into_iter().zip(expected) {
            let got = discovery_prob(&params, j).unwrap();
            assert!((got - e).abs() < 1e-12, "{v} j={j}: {got} vs {e}");
        }
    }
}

#[test]
fn sic_beats_plain_on_the_reference_grid() {
    let table = real_table();
    for base in [BaseAlgorithm::Cra, BaseAlgorithm::Sba] {
        let plain = AnalysisParams::with_table(Variant::plain(base), 15.0, 0.15, 4, &table);
        let sic = AnalysisParams::with_table(Variant::sic(base), 15.0, 0.15, 4, &table);
        let mpr = AnalysisParams::with_table(Variant::sic_mpr(base, 2), 15.0, 0.15, 4, &table);
        for j in 0..15 {
            let p = discovery_prob(&plain, j).unwrap();
            let s = discovery_prob(&sic, j).unwrap();
            let m = discovery_prob(&mpr, j).unwrap();
            assert!(s >= p, "{base:?} j={j}: SIC {s} < plain {p}");
            assert!(m >= s, "{base:?} j={j}: MPR {m} < SIC {s}");
        }
    }
}

#[test]
fn single_neighbor_expectation_is_geometric() {
    let table = real_table();
    for v in Variant::all(3) {
        for beams in [2, 4, 12] {
            let params = AnalysisParams::with_table(v, 1.0, 0.4, beams, &table);
            let p = discovery_prob(&params, 0).unwrap();
            let e = expected_total_slots(&params).unwrap();
            assert!((e - beams as f64 / p).abs() < 1e-9 * e);
        }
    }
}

#[test]
fn reference_config_parameters() {
    let c = SimConfig::reference(300, Variant::sic(BaseAlgorithm::Sba), 0.1, 6);
    let mut c = c;
    c.pbar_samples = 5_000;
    let params = AnalysisParams::from_config(&c, &UnpackCache::new(), 1).unwrap();
    // 54.2332291116 / 6
    assert!((params.k - 9.038_871_518_6).abs() < 1e-8, "{}", params.k);
    assert_eq!(params.k_int(), 9);
    assert_eq!(params.n0, 15);
}

fn grid_variant() -> impl Strategy<Value = Variant> {
    (
        prop::sample::select(vec![BaseAlgorithm::Cra, BaseAlgorithm::Sba]),
        prop::sample::select(vec![SicMode::None, SicMode::Perfect, SicMode::Imperfect]),
        1u32..=4,
    )
        .prop_map(|(b, m, h)| {
            let h = if m == SicMode::None { 1 } else { h };
            Variant::new(b, m, h)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn probabilities_stay_in_unit_interval(
        v in grid_variant(),
        p_step in 1u32..=19,
        k in 1u32..=30,
        beams in prop::sample::select(vec![4u32, 6, 12]),
    ) {
        let table = synthetic_table();
        let params = AnalysisParams::with_table(v, k as f64, p_step as f64 * 0.05, beams, &table);
        for j in 0..k as i64 {
            let t = discovery_terms(&params, j).unwrap();
            for x in [t.p_receive, t.p_transmit, t.p_reply, t.p_ack, t.total] {
                prop_assert!((0.0..=1.0).contains(&x), "{:?}", t);
            }
        }
        let e = expected_total_slots(&params).unwrap();
        prop_assert!(e > 0.0 && e.is_finite());
    }

    #[test]
    fn theory_curve_rises_to_at_most_one(
        v in grid_variant(),
        p_t in 0.01f64..0.99,
        k in 0.5f64..30.0,
        beams in prop::sample::select(vec![2u32, 4, 6, 12]),
    ) {
        let params = AnalysisParams::with_table(v, k, p_t, beams, &synthetic_table());
        let curve = theory_curve(&params, 500).unwrap();
        prop_assert_eq!(curve.len(), 500);
        let mut prev = 0.0;
        for &f in &curve {
            prop_assert!(f >= prev && f <= 1.0);
            prev = f;
        }
    }
}

#[test]
fn cra_curve_starts_at_the_first_step_probability() {
    let params = AnalysisParams::with_table(
        Variant::sic(BaseAlgorithm::Cra),
        13.6,
        0.2,
        4,
        &synthetic_table(),
    );
    let curve = theory_curve(&params, 1).unwrap();
    assert!((curve[0] - discovery_prob(&params, 0).unwrap()).abs() < 1e-15);
}

#[test]
fn ack_probability_stays_at_most_one_when_replies_vanish() {
    let table = real_table();
    for j in 0..30 {
        let params =
            AnalysisParams::with_table(Variant::sic(BaseAlgorithm::Sba), 30.0, 0.95, 12, &table);
        let t = discovery_terms(&params, j).unwrap();
        assert!(t.p_ack <= 1.0, "j={j}: {t:?}");
    }
}
