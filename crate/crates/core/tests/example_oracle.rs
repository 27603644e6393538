//! The example construction against a leaf-vector oracle: the conditional
//! distribution over depth-6 leaves is pushed down the `y`-tree one bit at a
//! time, and every cylinder value is compared with the closed form.

use randlab_core::example::{conditional_deviation, marked_half};
use randlab_core::rational::ratio;
use randlab_core::sample::{random_example_params, rng};
use randlab_core::{build_example, Bitstring, ExampleParams, JointMeasure, MachineTable, Rational};

const LEAVES: usize = 6;

struct Oracle {
    eps: Rational,
    /// Per machine, trigger words as '0'/'1' strings.
    triggers: Vec<Vec<String>>,
}

impl Oracle {
    fn halted(&self, n: usize, y: &str) -> bool {
        self.triggers[n - 1]
            .iter()
            .any(|t| y.starts_with(t.as_str()))
    }

    fn fires_along(&self, n: usize, y: &str) -> bool {
        self.triggers[n - 1]
            .iter()
            .any(|t| t.len() < y.len() && y.starts_with(t.as_str()))
    }

    /// Machine and half (false = marked) owning a leaf, if any.
    fn owner(leaf: &str) -> Option<(usize, bool)> {
        let ones = leaf.chars().take_while(|&c| c == '1').count();
        let b = leaf.as_bytes();
        (b.len() >= ones + 2).then(|| (ones + 1, b[ones + 1] == b'1'))
    }

    fn leaves(&self, y: &str) -> Vec<Rational> {
        let mut dist = vec![ratio(1, 1 << LEAVES); 1 << LEAVES];
        for i in 0..y.len() {
            let node = &y[..i];
            let up = y.as_bytes()[i] == b'1';
            for n in 1..=self.triggers.len() {
                let detects = self.halted(n, node) && (i == 0 || !self.halted(n, &y[..i - 1]));
                if !detects {
                    continue;
                }
                let f = if up {
                    ratio(1, 1) + &self.eps
                } else {
                    ratio(1, 1) - &self.eps
                };
                for (k, v) in dist.iter_mut().enumerate() {
                    let leaf = format!("{k:0width$b}", width = LEAVES);
                    match Self::owner(&leaf) {
                        Some((m, false)) if m == n => *v *= &f,
                        Some((m, true)) if m == n => *v *= ratio(2, 1) - &f,
                        _ => {}
                    }
                }
            }
        }
        dist
    }

    fn conditional(&self, x: &Bitstring, y: &Bitstring) -> Rational {
        let xs = x.to_string();
        self.leaves(&y.to_string())
            .into_iter()
            .enumerate()
            .filter(|(k, _)| format!("{k:0width$b}", width = LEAVES).starts_with(&xs))
            .map(|(_, v)| v)
            .sum()
    }
}

fn oracle_for(params: &ExampleParams) -> Oracle {
    let t = &params.table;
    Oracle {
        eps: params.epsilon.clone(),
        triggers: (1..=t.machine_count())
            .map(|n| t.triggers(n).map(|w| w.to_string()).collect())
            .collect(),
    }
}

#[test]
fn closed_form_matches_leaf_oracle() {
    let mut r = rng(2024);
    for _ in 0..10 {
        let params = random_example_params(&mut r);
        let oracle = oracle_for(&params);
        let p = build_example(params).unwrap();
        for y in Bitstring::all_up_to(5) {
            for x in Bitstring::all_up_to(LEAVES) {
                assert_eq!(
                    p.conditional(&x, &y).unwrap(),
                    oracle.conditional(&x, &y),
                    "x = {x}, y = {y}"
                );
            }
        }
    }
}

#[test]
fn deviation_iff_a_trigger_fires() {
    let mut r = rng(99);
    for _ in 0..10 {
        let params = random_example_params(&mut r);
        let oracle = oracle_for(&params);
        let count = params.table.machine_count();
        let p = build_example(params).unwrap();
        for y in Bitstring::all_up_to(6) {
            for n in 1..=count {
                let d = conditional_deviation(&p, n, &y).unwrap();
                assert_eq!(
                    d.deviates,
                    oracle.fires_along(n, &y.to_string()),
                    "n = {n}, y = {y}"
                );
                assert_eq!(d.trigger_fired, d.deviates);
            }
        }
    }
}

#[test]
fn hand_computed_second_machine() {
    // machine 2 halts from "0"; its marked half is Δ(100)
    let t = MachineTable::from_triggers(2, [(2, "0".parse().unwrap())]).unwrap();
    let p = build_example(ExampleParams::new(ratio(1, 4), t)).unwrap();
    let bs = |s: &str| -> Bitstring { s.parse().unwrap() };
    assert_eq!(marked_half(2), bs("100"));
    assert_eq!(p.conditional(&bs("100"), &bs("01")).unwrap(), ratio(5, 32));
    assert_eq!(p.conditional(&bs("101"), &bs("01")).unwrap(), ratio(3, 32));
    assert_eq!(p.conditional(&bs("1000"), &bs("01")).unwrap(), ratio(5, 64));
    assert_eq!(p.conditional(&bs("100"), &bs("00")).unwrap(), ratio(3, 32));
    assert_eq!(p.conditional(&bs("100"), &bs("0")).unwrap(), ratio(1, 8));
    assert_eq!(p.conditional(&bs("100"), &bs("1")).unwrap(), ratio(1, 8));
    assert_eq!(p.eval(&bs("100"), &bs("01")).unwrap(), ratio(5, 128));
}

#[test]
fn empty_tables_give_the_uniform_product() {
    let q = JointMeasure::uniform_product();
    for eps in [ratio(1, 4), ratio(1, 2), ratio(3, 4)] {
        let p = build_example(ExampleParams::new(eps, MachineTable::empty(4))).unwrap();
        for x in Bitstring::all_up_to(5) {
            for y in Bitstring::all_up_to(5) {
                assert_eq!(p.eval(&x, &y).unwrap(), q.eval(&x, &y).unwrap());
            }
        }
    }
}
