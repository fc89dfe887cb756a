//! Tsirelson norm against an independent brute-force recursion over
//! admissible partitions, in exact arithmetic.

use std::collections::{BTreeSet, HashMap};

use amnm::tsirelson::{clone_family, schreier_check, tsirelson_norm, TsirelsonVector};
use amnm::Rational;
use proptest::prelude::*;

/// `‖x‖` for `x` given as `(index, |x_i|)` sorted by index.
///
/// By unconditionality the optimal sets can be taken as consecutive blocks of
/// the support, with `min E₁` equal to the first support index in `E₁`. The
/// single-block term is at most `‖x‖/2` and never attains the maximum, so the
/// recursion only visits strictly smaller blocks.
fn oracle(x: &[(usize, Rational)], memo: &mut HashMap<(usize, usize), Rational>, lo: usize, hi: usize) -> Rational {
    if lo >= hi {
        return Rational::from_integer(0);
    }
    if let Some(v) = memo.get(&(lo, hi)) {
        return *v;
    }
    let mut best = x[lo..hi].iter().map(|e| e.1).max().unwrap();
    for start in lo..hi {
        let cap = x[start].0;
        // all ways of cutting x[start..hi] into 2..=cap consecutive blocks
        let len = hi - start;
        for cuts in 1u32..(1 << (len - 1)) {
            let blocks = cuts.count_ones() as usize + 1;
            if blocks > cap {
                continue;
            }
            let mut sum = Rational::from_integer(0);
            let mut from = start;
            for k in 0..len - 1 {
                if cuts >> k & 1 == 1 {
                    sum += oracle(x, memo, from, start + k + 1);
                    from = start + k + 1;
                }
            }
            sum += oracle(x, memo, from, hi);
            best = best.max(sum / 2);
        }
    }
    memo.insert((lo, hi), best);
    best
}

fn brute_norm(entries: &[(usize, i64)]) -> Rational {
    let mut x: Vec<(usize, Rational)> = entries
        .iter()
        .filter(|e| e.1 != 0)
        .map(|&(i, v)| (i, Rational::from_integer(v.abs())))
        .collect();
    x.sort();
    oracle(&x, &mut HashMap::new(), 0, x.len())
}

fn vector(entries: &[(usize, i64)]) -> TsirelsonVector<Rational> {
    TsirelsonVector::new(entries.iter().map(|&(i, v)| (i, Rational::from_integer(v)))).unwrap()
}

fn sparse() -> impl Strategy<Value = Vec<(usize, i64)>> {
    proptest::collection::btree_map(1usize..=9, -5i64..=5, 1..=6).prop_map(|m| m.into_iter().collect())
}

#[test]
fn hand_computed_norms() {
    assert_eq!(tsirelson_norm(&vector(&[(1, 1)])).unwrap().value, Rational::from_integer(1));
    // two singletons starting at 2
    assert_eq!(tsirelson_norm(&vector(&[(2, 1), (3, 1)])).unwrap().value, Rational::from_integer(1));
    assert_eq!(tsirelson_norm(&vector(&[(3, 1), (4, 1), (5, 1)])).unwrap().value, Rational::new(3, 2));
    // nothing starting at 1 can be split
    assert_eq!(tsirelson_norm(&vector(&[(1, 4), (2, 1)])).unwrap().value, Rational::from_integer(4));
}

#[test]
fn oracle_agrees_on_every_small_pattern() {
    for mask in 1u32..(1 << 7) {
        let entries: Vec<(usize, i64)> = (0..7).filter(|b| mask >> b & 1 == 1).map(|b| (b + 2, 1)).collect();
        if entries.len() > 6 {
            continue;
        }
        assert_eq!(tsirelson_norm(&vector(&entries)).unwrap().value, brute_norm(&entries), "{entries:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn norm_matches_brute_force(entries in sparse()) {
        prop_assert_eq!(tsirelson_norm(&vector(&entries)).unwrap().value, brute_norm(&entries));
    }

    #[test]
    fn norm_sits_between_sup_and_l1(entries in sparse()) {
        let x = vector(&entries);
        let n = tsirelson_norm(&x).unwrap().value;
        let l1: i64 = entries.iter().map(|e| e.1.abs()).sum();
        prop_assert!(x.sup_norm() <= n);
        prop_assert!(n <= Rational::from_integer(l1));
    }

    #[test]
    fn signs_do_not_matter(entries in sparse(), flips in any::<u8>()) {
        let flipped: Vec<(usize, i64)> =
            entries.iter().enumerate().map(|(k, &(i, v))| (i, if flips >> (k % 8) & 1 == 1 { -v } else { v })).collect();
        prop_assert_eq!(tsirelson_norm(&vector(&entries)).unwrap().value, tsirelson_norm(&vector(&flipped)).unwrap().value);
    }

    #[test]
    fn restriction_never_increases(entries in sparse(), keep in any::<u16>()) {
        let x = vector(&entries);
        let y = x.restrict(|i| keep >> (i % 16) & 1 == 1);
        prop_assert!(tsirelson_norm(&y).unwrap().value <= tsirelson_norm(&x).unwrap().value);
    }

    #[test]
    fn schreier_sets_are_recognized(set in proptest::collection::btree_set(1usize..=12, 1..=6)) {
        let want = set.len() <= *set.iter().next().unwrap();
        prop_assert_eq!(schreier_check(&set).schreier, want);
    }

    #[test]
    fn clone_families_grow_and_skip_only_schreier_intervals(word in proptest::collection::vec(any::<bool>(), 0..12), n in 1usize..=24) {
        let f = clone_family(&word, n).unwrap();
        prop_assert!(f.satisfies_growth());
        prop_assert!(f.matches_closed_form());
        prop_assert_eq!(f.interval_schreier_violation(), None);
        prop_assert!(f.terms.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn gaps_are_schreier_when_scanned_directly() {
    let f = clone_family(&[true, false, true, true, false, false, true], 9).unwrap();
    let top = f.last();
    for a in 1..=top {
        let mut b = a;
        while b <= top && !f.contains(b) {
            let interval: BTreeSet<usize> = (a as usize..=b as usize).collect();
            assert!(schreier_check(&interval).schreier, "[{a}, {b}]");
            b += 1;
        }
    }
}
