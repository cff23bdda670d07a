mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{lattice_model, lattice_trace, random_walk, LatticePath};
use rand::Rng;
use rnncov::abstraction::{AbstractInput, AbstractState};
use rnncov::coverage::*;
use rnncov::mdp::{AbstractTransition, MdpModel};
use rnncov::Error;

type Triple = (Vec<i32>, i32, Vec<i32>);

fn triples(paths: &[LatticePath]) -> Vec<Triple> {
    paths
        .iter()
        .flat_map(|p| (0..p.inputs.len()).map(move |i| (p.states[i].clone(), p.inputs[i], p.states[i + 1].clone())))
        .collect()
}

fn profile_of(model: &MdpModel, origin: &[i32], paths: &[LatticePath]) -> CoverageProfile {
    let traces: Vec<_> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| lattice_trace(origin, &format!("q{i}"), p))
        .collect();
    profile_traces(model, &traces).unwrap()
}

/// Coverage values recomputed from raw triples with plain set arithmetic.
struct Oracle {
    bscov: f64,
    btcov: f64,
    iscov: f64,
    wicov: f64,
    ksbcov: f64,
}

fn oracle(train: &[Triple], test: &[Triple], boundary: &BTreeSet<Vec<i32>>) -> Oracle {
    let states =
        |ts: &[Triple]| -> BTreeSet<Vec<i32>> { ts.iter().flat_map(|(a, _, b)| [a.clone(), b.clone()]).collect() };
    let pairs = |ts: &[Triple]| -> BTreeSet<(Vec<i32>, Vec<i32>)> {
        ts.iter().map(|(a, _, b)| (a.clone(), b.clone())).collect()
    };
    let choices = |ts: &[Triple]| -> BTreeSet<(Vec<i32>, i32)> { ts.iter().map(|(a, x, _)| (a.clone(), *x)).collect() };
    let (sm, st) = (states(train), states(test));
    let (pm, pt) = (pairs(train), pairs(test));
    let (cm, ct) = (choices(train), choices(test));
    let mut counts: BTreeMap<Triple, f64> = BTreeMap::new();
    let mut totals: BTreeMap<(Vec<i32>, i32), f64> = BTreeMap::new();
    for t in train {
        *counts.entry(t.clone()).or_default() += 1.0;
        *totals.entry((t.0.clone(), t.1)).or_default() += 1.0;
    }
    let test_set: BTreeSet<&Triple> = test.iter().collect();
    let wi: f64 = counts
        .iter()
        .filter(|(t, _)| test_set.contains(t))
        .map(|(t, n)| n / totals[&(t.0.clone(), t.1)])
        .sum();
    Oracle {
        bscov: sm.intersection(&st).count() as f64 / sm.len() as f64,
        btcov: pm.intersection(&pt).count() as f64 / pm.len() as f64,
        iscov: cm.intersection(&ct).count() as f64 / cm.len() as f64,
        wicov: wi / cm.len() as f64,
        ksbcov: st.intersection(boundary).count() as f64 / boundary.len() as f64,
    }
}

#[test]
fn criteria_match_set_arithmetic_oracle() {
    let mut rng = common::rng(31);
    let origin = [0, 0];
    for _ in 0..100 {
        let n = rng.random_range(1..5);
        let train: Vec<LatticePath> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..10);
                random_walk(&mut rng, &origin, len, 3, 3)
            })
            .collect();
        let n = rng.random_range(1..5);
        let test: Vec<LatticePath> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..10);
                random_walk(&mut rng, &origin, len, 5, 4)
            })
            .collect();
        let model = lattice_model(&origin, &train);
        let p = profile_of(&model, &origin, &test);
        let k = rng.random_range(1..=3);
        let visited: Vec<Vec<i32>> = model.states().iter().map(|s| s.0.clone()).collect();
        let boundary: BTreeSet<Vec<i32>> = common::exhaustive_boundary(&visited, k).into_iter().flatten().collect();
        let o = oracle(&triples(&train), &triples(&test), &boundary);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(bscov(&model, &p).value(), o.bscov));
        assert!(close(btcov(&model, &p).value(), o.btcov));
        assert!(close(iscov(&model, &p).value(), o.iscov));
        assert!(close(wicov(&model, &p).value(), o.wicov));
        assert!(close(ksbcov(&model, &p, k).unwrap().value(), o.ksbcov));
        let ev = CoverageEvaluator::new(&model, k).unwrap();
        for c in Criterion::ALL {
            let direct = match c {
                Criterion::Bscov => bscov(&model, &p),
                Criterion::Ksbcov => ksbcov(&model, &p, k).unwrap(),
                Criterion::Btcov => btcov(&model, &p),
                Criterion::Iscov => iscov(&model, &p),
                Criterion::Wicov => wicov(&model, &p),
            };
            assert_eq!(ev.evaluate(c, &p), direct);
        }
    }
}

#[test]
fn profile_matches_brute_force_abstraction() {
    let mut rng = common::rng(32);
    let origin = [1, -1];
    let paths: Vec<LatticePath> = (0..4).map(|_| random_walk(&mut rng, &origin, 8, 4, 3)).collect();
    let model = lattice_model(&origin, &paths[..2]);
    let p = profile_of(&model, &origin, &paths);
    let t = triples(&paths);
    let states: BTreeSet<AbstractState> = t
        .iter()
        .flat_map(|(a, _, b)| [AbstractState(a.clone()), AbstractState(b.clone())])
        .collect();
    let trans: BTreeSet<AbstractTransition> = t
        .iter()
        .map(|(a, x, b)| AbstractTransition {
            src: AbstractState(a.clone()),
            input: AbstractInput(vec![*x]),
            dst: AbstractState(b.clone()),
        })
        .collect();
    assert_eq!(p.states, states);
    assert_eq!(p.transitions, trans);
    assert!(p.is_consistent());
    assert!(profile_traces(&model, &[]).unwrap().is_empty());
}

#[test]
fn self_coverage_is_full() {
    let mut rng = common::rng(33);
    let origin = [0, 0, 0];
    let train: Vec<LatticePath> = (0..5).map(|_| random_walk(&mut rng, &origin, 12, 3, 3)).collect();
    let model = lattice_model(&origin, &train);
    let p = profile_of(&model, &origin, &train);
    assert_eq!(&p.states, model.states());
    for v in [
        bscov(&model, &p),
        btcov(&model, &p),
        iscov(&model, &p),
        wicov(&model, &p),
    ] {
        assert_eq!(v.to_decimal(), "1.000000");
    }
    assert_eq!(ksbcov(&model, &p, 2).unwrap().value(), 0.0);
}

#[test]
fn merge_laws() {
    let mut rng = common::rng(34);
    let origin = [0, 0];
    let model = lattice_model(&origin, &[random_walk(&mut rng, &origin, 10, 3, 3)]);
    for _ in 0..50 {
        let mut ps: Vec<CoverageProfile> = (0..3)
            .map(|_| {
                let n = rng.random_range(0..3);
                let paths: Vec<LatticePath> = (0..n).map(|_| random_walk(&mut rng, &origin, 6, 4, 3)).collect();
                profile_of(&model, &origin, &paths)
            })
            .collect();
        let c = ps.pop().unwrap();
        let b = ps.pop().unwrap();
        let a = ps.pop().unwrap();
        let empty = CoverageProfile::empty(&model);
        assert_eq!(merge(&a, &empty).unwrap(), a);
        assert_eq!(merge(&a, &a).unwrap(), a);
        assert_eq!(merge(&a, &b).unwrap(), merge(&b, &a).unwrap());
        assert_eq!(
            merge(&merge(&a, &b).unwrap(), &c).unwrap(),
            merge(&a, &merge(&b, &c).unwrap()).unwrap()
        );
        assert!(merge(&a, &b).unwrap().is_consistent());
    }
}

#[test]
fn profiles_of_different_models_do_not_mix() {
    let m1 = lattice_model(
        &[0],
        &[LatticePath {
            states: vec![vec![0], vec![1]],
            inputs: vec![0],
        }],
    );
    let m2 = lattice_model(
        &[0],
        &[LatticePath {
            states: vec![vec![0], vec![2]],
            inputs: vec![0],
        }],
    );
    let a = CoverageProfile::empty(&m1);
    let b = CoverageProfile::empty(&m2);
    assert!(matches!(merge(&a, &b), Err(Error::Validation(_))));
    let ev = CoverageEvaluator::new(&m1, 1).unwrap();
    assert!(ev.increases(Criterion::Bscov, &a, &b).is_err());
}

#[test]
fn basic_state_worked_example() {
    // model states A B C D, test touches A B and an unseen X
    let origin = [0, 0];
    let train = LatticePath {
        states: vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]],
        inputs: vec![0, 0, 0],
    };
    let model = lattice_model(&origin, &[train]);
    let test = LatticePath {
        states: vec![vec![0, 0], vec![1, 0], vec![2, 0]],
        inputs: vec![0, 0],
    };
    let p = profile_of(&model, &origin, &[test]);
    let v = bscov(&model, &p);
    assert_eq!(v.denominator, 4);
    assert_eq!(v.to_decimal(), "0.500000");
}

#[test]
fn boundary_worked_example_one_dimensional() {
    let origin = [1];
    let model = lattice_model(
        &origin,
        &[LatticePath {
            states: vec![vec![1], vec![2]],
            inputs: vec![0],
        }],
    );
    let test = LatticePath {
        states: vec![vec![1], vec![0]],
        inputs: vec![0],
    };
    let p = profile_of(&model, &origin, &[test]);
    let k1 = ksbcov(&model, &p, 1).unwrap();
    assert_eq!((k1.denominator, k1.to_decimal().as_str()), (2, "0.500000"));
    let k2 = ksbcov(&model, &p, 2).unwrap();
    assert_eq!((k2.denominator, k2.to_decimal().as_str()), (4, "0.250000"));
    let ev = CoverageEvaluator::new(&model, 2).unwrap();
    let want: BTreeSet<AbstractState> = [-1, 0, 3, 4].into_iter().map(|i| AbstractState(vec![i])).collect();
    assert_eq!(ev.boundary(), &want);
    let inside = profile_of(
        &model,
        &origin,
        &[LatticePath {
            states: vec![vec![1], vec![2]],
            inputs: vec![0],
        }],
    );
    assert_eq!(ksbcov(&model, &inside, 1).unwrap().value(), 0.0);
}

#[test]
fn weighted_input_worked_example() {
    // the four-cell model: covering only (s1, x, s2) adds 1/2
    let model = common::four_cell_model();
    let mut p = CoverageProfile::empty(&model);
    p.add_path(&[AbstractTransition {
        src: AbstractState(vec![1, 0]),
        input: AbstractInput(vec![1]),
        dst: AbstractState(vec![0, 1]),
    }]);
    let v = wicov(&model, &p);
    assert_eq!(v.numerator_decimal(), "0.500000");
    assert_eq!(v.denominator, model.choice_count() as u64);
    assert_eq!(wicov(&model, &CoverageProfile::empty(&model)).value(), 0.0);
}

#[test]
fn jaccard_examples() {
    let model = lattice_model(
        &[0],
        &[LatticePath {
            states: vec![vec![0], vec![1]],
            inputs: vec![0],
        }],
    );
    let with = |cells: &[i32]| {
        let mut p = CoverageProfile::empty(&model);
        p.states = cells.iter().map(|c| AbstractState(vec![*c])).collect();
        p
    };
    assert_eq!(jaccard_counts(&with(&[0, 1]), &with(&[1, 2])).unwrap(), (1, 3));
    assert_eq!(jaccard(&with(&[0, 1]), &with(&[0, 1])).unwrap(), 1.0);
    assert_eq!(jaccard(&with(&[0]), &with(&[1])).unwrap(), 0.0);
    assert_eq!(jaccard(&with(&[3]), &with(&[])).unwrap(), 0.0);
    assert!(matches!(jaccard(&with(&[]), &with(&[])), Err(Error::EmptyJaccard)));
}

#[test]
fn decimal_rendering_rounds_half_up() {
    let model = lattice_model(
        &[0],
        &[LatticePath {
            states: vec![vec![0], vec![1], vec![2]],
            inputs: vec![0, 1],
        }],
    );
    let p = profile_of(
        &model,
        &[0],
        &[LatticePath {
            states: vec![vec![0], vec![1]],
            inputs: vec![0],
        }],
    );
    assert_eq!(bscov(&model, &p).to_decimal(), "0.666667");
    assert_eq!(bscov(&model, &CoverageProfile::empty(&model)).to_decimal(), "0.000000");
}

#[test]
fn increases_agrees_with_recomputation() {
    let mut rng = common::rng(35);
    let origin = [0, 0];
    let model = lattice_model(
        &origin,
        &(0..3)
            .map(|_| random_walk(&mut rng, &origin, 10, 3, 3))
            .collect::<Vec<_>>(),
    );
    let ev = CoverageEvaluator::new(&model, 2).unwrap();
    for _ in 0..200 {
        let g = profile_of(&model, &origin, &[random_walk(&mut rng, &origin, 6, 5, 4)]);
        let c = profile_of(&model, &origin, &[random_walk(&mut rng, &origin, 6, 5, 4)]);
        let merged = merge(&g, &c).unwrap();
        for crit in Criterion::ALL {
            let grew = ev.evaluate(crit, &merged).ratio() > ev.evaluate(crit, &g).ratio();
            assert_eq!(ev.increases(crit, &g, &c).unwrap(), grew, "{crit}");
        }
    }
}
