use infosieve::codec::{
    base_powers, harden, inverse_base_powers, positional_value, truncate, BinaryCode, MaskSequence, TrainSchedule,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn code_and_mask() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..16).prop_flat_map(|l| (vec(-1.0f64..1.0, l), vec(0.0f64..1.0, l)))
}

proptest! {
    #[test]
    fn positional_value_matches_oracle((soft, mask) in code_and_mask(), base in 1.0f64..2.0) {
        let code = BinaryCode::from_soft(soft.clone());
        let m = MaskSequence::new(mask.clone(), base);
        let mut want = 0.0;
        for k in 0..soft.len() {
            want += 0.5 * (soft[k] + 1.0) * mask[k] / base.powi(k as i32 + 1);
        }
        let got = positional_value(&code, &m, base);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn bits_stay_in_the_unit_interval(soft in vec(-1.0f64..1.0, 1..16)) {
        let c = BinaryCode::from_soft(soft);
        prop_assert!(c.bits.iter().all(|b| (0.0..=1.0).contains(b)));
    }

    #[test]
    fn truncation_is_the_hadamard_product((soft, mask) in code_and_mask()) {
        let code = BinaryCode::from_soft(soft);
        let m = MaskSequence::new(mask.clone(), 2.0);
        let t = truncate(&code, &m).unwrap();
        for k in 0..t.len() {
            prop_assert_eq!(t[k], code.bits[k] * mask[k]);
        }
    }

    #[test]
    fn weighted_mask_uses_powers_of_the_base((_, mask) in code_and_mask(), base in 1.0f64..2.0) {
        let m = MaskSequence::new(mask.clone(), base);
        for k in 0..mask.len() {
            let want = mask[k] * base.powi(k as i32 + 1);
            prop_assert!((m.weighted[k] - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn hardened_code_is_a_prefix_within_the_mask((soft, mask) in code_and_mask()) {
        let code = BinaryCode::from_soft(soft.clone());
        let m = MaskSequence::new(mask.clone(), 2.0);
        let h = harden(&code, &m);
        let stop = mask.iter().position(|&v| v <= 0.5).unwrap_or(mask.len());
        prop_assert_eq!(h.len(), stop);
        for (k, ch) in h.chars().enumerate() {
            prop_assert_eq!(ch == '1', soft[k] > 0.0);
        }
    }

    #[test]
    fn schedule_stays_in_range(epoch in 0usize..500, n in 1usize..300, a_max in 1.0f64..50.0) {
        let s = TrainSchedule::at(epoch, n, a_max);
        prop_assert!(s.age >= 1.0 && s.age <= a_max + 1e-12);
        prop_assert!(s.base >= 1.0 - 1e-12 && s.base <= 2.0);
    }
}

#[test]
fn schedule_endpoints() {
    let start = TrainSchedule::at(0, 60, 30.0);
    assert_eq!((start.age, start.base), (1.0, 2.0));
    let mid = TrainSchedule::at(30, 60, 30.0);
    assert_eq!((mid.age, mid.base), (15.5, 1.5));
    let end = TrainSchedule::at(60, 60, 30.0);
    assert_eq!((end.age, end.base), (30.0, 1.0));
}

#[test]
fn hardening_examples() {
    let code = BinaryCode::from_soft(vec![0.9, -0.8, 0.7, 0.6]);
    let mask = MaskSequence::new(vec![0.99, 0.97, 0.2, 0.9], 2.0);
    assert_eq!(harden(&code, &mask), "10");
    assert_eq!(mask.eff_length, 4);
    let closed = MaskSequence::new(vec![0.1, 0.9, 0.9, 0.9], 2.0);
    assert_eq!(harden(&code, &closed), "");
}

#[test]
fn base_power_tables() {
    assert_eq!(base_powers(4, 2.0), vec![2.0, 4.0, 8.0, 16.0]);
    assert_eq!(inverse_base_powers(3, 2.0), vec![0.5, 0.25, 0.125]);
    assert_eq!(base_powers(3, 1.0), vec![1.0; 3]);
}

#[test]
fn truncate_rejects_length_mismatch() {
    let code = BinaryCode::from_soft(vec![0.1, 0.2]);
    let mask = MaskSequence::new(vec![0.5], 2.0);
    assert!(truncate(&code, &mask).is_err());
}
