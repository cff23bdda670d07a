#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnncov::abstraction::{Abstraction, GridConfig, Projection};
use rnncov::mdp::MdpModel;
use rnncov::trace::{ConcreteState, Trace, TraceSet, TraceStep};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A trace of `len` steps from the zero state with states drawn from a
/// random walk, so that consecutive states are correlated.
pub fn random_trace<R: Rng>(rng: &mut R, id: &str, d: usize, din: usize, len: usize, spread: f32) -> Trace {
    let mut state = ConcreteState::zeros(d);
    let mut steps = Vec::with_capacity(len);
    for _ in 0..len {
        let input: Vec<f32> = (0..din).map(|_| rng.random_range(-spread..spread)).collect();
        let next: Vec<f32> = state
            .values()
            .iter()
            .map(|v| (v + rng.random_range(-spread..spread)).clamp(-4.0, 4.0))
            .collect();
        steps.push(TraceStep {
            state,
            input,
            output: rng.random_range(0..5),
        });
        state = ConcreteState(next);
    }
    Trace::new(id, steps, state).unwrap()
}

pub fn random_trace_set<R: Rng>(rng: &mut R, prefix: &str, d: usize, din: usize, n: usize, max_len: usize) -> TraceSet {
    let mut ts = TraceSet::new(d, din).unwrap();
    for i in 0..n {
        let len = rng.random_range(1..=max_len);
        ts.push(random_trace(rng, &format!("{prefix}{i}"), d, din, len, 1.0))
            .unwrap();
    }
    ts
}

fn step(state: [f32; 2], input: f32) -> TraceStep {
    TraceStep {
        state: ConcreteState(state.to_vec()),
        input: vec![input],
        output: 0,
    }
}

/// Four-cell worked example: identity projection, state grid of 2x2 cells
/// over [0,2]^2 and input grid of 3 cells over [0,3].
///
/// Cells: s0=(0,0) s1=(1,0) s2=(0,1) s3=(1,1); inputs a=(0) x=(1) x'=(2).
pub fn four_cell_traces() -> Vec<Trace> {
    let (s0, s1, s2, s3) = ([0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]);
    let zero = [0.0, 0.0];
    let (a, x, xp) = (0.5, 1.5, 2.5);
    let fin = |s: [f32; 2]| ConcreteState(s.to_vec());
    vec![
        Trace::new("t1", vec![step(zero, a), step(s1, x)], fin(s2)).unwrap(),
        Trace::new("t2", vec![step(zero, a), step(s1, x), step(s3, a)], fin(s3)).unwrap(),
        Trace::new("t3", vec![step(zero, a), step(s1, xp), step(s1, xp)], fin(s0)).unwrap(),
    ]
}

pub fn four_cell_model() -> MdpModel {
    let state = Abstraction::new(
        Projection::axis_aligned(2, 2).unwrap(),
        GridConfig::new(2, vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
    )
    .unwrap();
    let input = Abstraction::new(
        Projection::axis_aligned(1, 1).unwrap(),
        GridConfig::new(3, vec![0.0], vec![3.0]).unwrap(),
    )
    .unwrap();
    MdpModel::from_traces(state, input, &four_cell_traces()).unwrap()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns) sorted by descending eigenvalue.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|x, y| a[*y][*y].partial_cmp(&a[*x][*x]).unwrap());
    let values = idx.iter().map(|i| a[*i][*i]).collect();
    let vectors = idx.iter().map(|i| (0..n).map(|r| v[r][*i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance with divisor N-1, computed densely.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// Interval index of `v` found by scanning an explicit interval list.
/// Intervals are `[lo_i, hi_i)` with the in-range top one closed.
pub fn interval_scan(lb: f64, ub: f64, m: usize, v: f64) -> i32 {
    let w = (ub - lb) / m as f64;
    let pad = 4 * m as i64 + 4;
    let lo = |i: i64| if i == m as i64 { ub } else { lb + i as f64 * w };
    for i in -pad..(m as i64 + pad) {
        let (a, b) = (lo(i), lo(i + 1));
        let inside = if i == m as i64 - 1 {
            a <= v && v <= b
        } else {
            a <= v && v < b
        };
        if inside {
            return i as i32;
        }
    }
    panic!("value {v} outside the scanned range");
}

/// Every lattice cell within `k` Manhattan steps of `visited`, bucketed by
/// exact minimal distance, found by scanning the enclosing box.
pub fn exhaustive_boundary(visited: &[Vec<i32>], k: usize) -> Vec<std::collections::BTreeSet<Vec<i32>>> {
    let dims = visited[0].len();
    let kk = k as i32;
    let lo: Vec<i32> = (0..dims)
        .map(|d| visited.iter().map(|c| c[d]).min().unwrap() - kk)
        .collect();
    let hi: Vec<i32> = (0..dims)
        .map(|d| visited.iter().map(|c| c[d]).max().unwrap() + kk)
        .collect();
    let mut out = vec![std::collections::BTreeSet::new(); k + 1];
    let mut cur = lo.clone();
    loop {
        let dist = visited
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&cur)
                    .map(|(a, b)| (a - b).unsigned_abs() as usize)
                    .sum::<usize>()
            })
            .min()
            .unwrap();
        if dist >= 1 && dist <= k {
            out[dist].insert(cur.clone());
        }
        let mut d = 0;
        loop {
            if d == dims {
                return out;
            }
            cur[d] += 1;
            if cur[d] <= hi[d] {
                break;
            }
            cur[d] = lo[d];
            d += 1;
        }
    }
}

/// Levenshtein distance by memoized recursion on suffixes.
pub fn edit_distance_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

/// Random lowercase sentence with words from a small lexicon, so that
/// matches and substitutions both occur.
pub fn random_sentence<R: Rng>(rng: &mut R, max_words: usize) -> String {
    const WORDS: [&str; 8] = ["the", "cat", "sat", "on", "a", "mat", "tea", "eat"];
    let n = rng.random_range(0..=max_words);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A path on the integer lattice: `states.len() == inputs.len() + 1`.
#[derive(Debug, Clone)]
pub struct LatticePath {
    pub states: Vec<Vec<i32>>,
    pub inputs: Vec<i32>,
}

/// Identity abstraction with unit cells, shifted so that the zero vector
/// falls in cell `origin`. Cell `c` is hit by the vector `c - origin`.
pub fn lattice_abstraction(origin: &[i32]) -> Abstraction {
    let dims = origin.len();
    let lb: Vec<f64> = origin.iter().map(|c| -f64::from(*c) - 0.5).collect();
    let ub: Vec<f64> = lb.iter().map(|v| v + 64.0).collect();
    Abstraction::new(
        Projection::axis_aligned(dims, dims).unwrap(),
        GridConfig::new(64, lb, ub).unwrap(),
    )
    .unwrap()
}

pub fn lattice_trace(origin: &[i32], id: &str, path: &LatticePath) -> Trace {
    assert_eq!(path.states[0], origin);
    let point = |c: &Vec<i32>| ConcreteState(c.iter().zip(origin).map(|(a, o)| (a - o) as f32).collect());
    let steps = path
        .inputs
        .iter()
        .enumerate()
        .map(|(i, x)| TraceStep {
            state: point(&path.states[i]),
            input: vec![*x as f32],
            output: 0,
        })
        .collect();
    Trace::new(id, steps, point(path.states.last().unwrap())).unwrap()
}

pub fn lattice_model(origin: &[i32], paths: &[LatticePath]) -> MdpModel {
    let traces: Vec<Trace> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| lattice_trace(origin, &format!("p{i}"), p))
        .collect();
    MdpModel::from_traces(lattice_abstraction(origin), lattice_abstraction(&[0]), &traces).unwrap()
}

/// Random walk of `len` steps from `origin` with inputs in `0..n_inputs`.
pub fn random_walk<R: Rng>(rng: &mut R, origin: &[i32], len: usize, radius: i32, n_inputs: i32) -> LatticePath {
    let mut states = vec![origin.to_vec()];
    let mut inputs = Vec::new();
    for _ in 0..len {
        let mut next = states.last().unwrap().clone();
        let d = rng.random_range(0..next.len());
        next[d] = (next[d] + rng.random_range(-1..=1)).clamp(-radius, radius);
        inputs.push(rng.random_range(0..n_inputs));
        states.push(next);
    }
    LatticePath { states, inputs }
}
