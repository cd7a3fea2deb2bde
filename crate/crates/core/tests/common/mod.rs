//! Independent reference computations. None of these call into the library's
//! solvers; they are deliberately naive.
#![allow(dead_code)]

use gridflex::grid::{Branch, Bus, Generator, GridCase, LoadBus, SectorWeights};
use gridflex::timeline::ScenarioTimeline;

pub const TOL: f64 = 1e-7;

/// Dense Gaussian elimination with partial pivoting. `None` when singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Power transfer distribution factors (branch × bus) with the slack as the
/// reference. Only for cases with at most three buses.
pub fn ptdf(case: &GridCase) -> Vec<Vec<f64>> {
    let n = case.buses.len();
    assert!(n <= 3, "oracle handles at most three buses");
    let pos = |id| case.buses.iter().position(|b| b.id == id).unwrap();
    let slack = case.buses.iter().position(|b| b.is_slack).unwrap();
    let mut bmat = vec![vec![0.0; n]; n];
    for br in &case.branches {
        let (f, t) = (pos(br.from_bus), pos(br.to_bus));
        let y = case.base_mva / br.reactance;
        bmat[f][f] += y;
        bmat[t][t] += y;
        bmat[f][t] -= y;
        bmat[t][f] -= y;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    // inverse of the reduced susceptance matrix, by cofactors
    let inv: Vec<Vec<f64>> = match rest.len() {
        0 => vec![],
        1 => vec![vec![1.0 / bmat[rest[0]][rest[0]]]],
        2 => {
            let (a, b, c, d) = (
                bmat[rest[0]][rest[0]],
                bmat[rest[0]][rest[1]],
                bmat[rest[1]][rest[0]],
                bmat[rest[1]][rest[1]],
            );
            let det = a * d - b * c;
            vec![vec![d / det, -b / det], vec![-c / det, a / det]]
        }
        _ => unreachable!(),
    };
    // theta at bus i per unit injection at bus j
    let theta = |i: usize, j: usize| -> f64 {
        match (rest.iter().position(|&r| r == i), rest.iter().position(|&r| r == j)) {
            (Some(a), Some(b)) => inv[a][b],
            _ => 0.0,
        }
    };
    case.branches
        .iter()
        .map(|br| {
            let (f, t) = (pos(br.from_bus), pos(br.to_bus));
            let y = case.base_mva / br.reactance;
            (0..n).map(|j| y * (theta(f, j) - theta(t, j))).collect()
        })
        .collect()
}

/// Least-cost dispatch by enumerating vertices of the feasible polytope in
/// generator space. Returns `(cost, dispatch, flows)` or `None` if infeasible.
pub fn lp_oracle(case: &GridCase, gen_cap: &[f64], load: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let k = case.generators.len();
    let n = case.buses.len();
    let pos = |id| case.buses.iter().position(|b| b.id == id).unwrap();
    let p = ptdf(case);
    let mut demand = vec![0.0; n];
    for (lb, &l) in case.load_buses.iter().zip(load) {
        demand[pos(lb.bus)] += l;
    }
    let total: f64 = load.iter().sum();
    // rows: a · g <= b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        rows.push((e.clone(), gen_cap[j]));
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    for (l, br) in case.branches.iter().enumerate() {
        let coeff: Vec<f64> = case.generators.iter().map(|g| p[l][pos(g.bus)]).collect();
        let offset: f64 = (0..n).map(|i| p[l][i] * demand[i]).sum();
        rows.push((coeff.clone(), br.limit + offset));
        rows.push((coeff.iter().map(|c| -c).collect(), br.limit - offset));
    }
    let flows_of = |g: &[f64]| -> Vec<f64> {
        let mut inj = demand.iter().map(|d| -d).collect::<Vec<_>>();
        for (gen, &v) in case.generators.iter().zip(g) {
            inj[pos(gen.bus)] += v;
        }
        p.iter().map(|row| row.iter().zip(&inj).map(|(a, b)| a * b).sum()).collect()
    };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for active in subsets(rows.len(), k - 1) {
        let mut a = vec![vec![1.0; k]];
        let mut b = vec![total];
        for &r in &active {
            a.push(rows[r].0.clone());
            b.push(rows[r].1);
        }
        let Some(g) = gauss_solve(a, b) else { continue };
        let scale = 1.0 + total.abs();
        if rows
            .iter()
            .all(|(a, b)| a.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>() <= b + TOL * scale)
        {
            let cost: f64 = case.generators.iter().zip(&g).map(|(gen, v)| gen.cost * v).sum();
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                let flows = flows_of(&g);
                best = Some((cost, g, flows));
            }
        }
    }
    best
}

/// NNLS by enumerating every support set and solving its normal equations.
pub fn nnls_oracle(design: &[Vec<f64>], target: &[f64]) -> (Vec<f64>, f64) {
    let m = design.len();
    let k = design[0].len();
    let residual = |x: &[f64]| -> f64 {
        (0..m)
            .map(|i| {
                let r: f64 = design[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - target[i];
                r * r
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut best = (vec![0.0; k], residual(&vec![0.0; k]));
    for size in 1..=k {
        for support in subsets(k, size) {
            let ata: Vec<Vec<f64>> = support
                .iter()
                .map(|&p| {
                    support
                        .iter()
                        .map(|&q| (0..m).map(|i| design[i][p] * design[i][q]).sum())
                        .collect()
                })
                .collect();
            let atb: Vec<f64> = support
                .iter()
                .map(|&p| (0..m).map(|i| design[i][p] * target[i]).sum())
                .collect();
            let Some(xs) = gauss_solve(ata, atb) else { continue };
            if xs.iter().any(|&v| v < 0.0) {
                continue;
            }
            let mut x = vec![0.0; k];
            for (&j, &v) in support.iter().zip(&xs) {
                x[j] = v;
            }
            let r = residual(&x);
            if r < best.1 {
                best = (x, r);
            }
        }
    }
    best
}

/// Direct O(n·m) Gaussian kernel sum at each point of `xs`.
pub fn kde_oracle(samples: &[f64], h: f64, xs: &[f64]) -> Vec<f64> {
    let c = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * samples.len() as f64);
    xs.iter()
        .map(|&x| {
            let mut s = 0.0;
            for &v in samples {
                let u = (x - v) / h;
                s += (-(u * u) / 2.0).exp();
            }
            s * c
        })
        .collect()
}

/// Σ_t roundup(max(0, load_t + p_r_min − caps_t), step).
pub fn gap_oracle(timeline: &ScenarioTimeline, p_r_min: f64, step: f64) -> f64 {
    timeline
        .hours
        .iter()
        .map(|h| {
            let load: f64 = h.load.iter().sum();
            let cap: f64 = h.gen_cap.iter().sum();
            let gap = (load + p_r_min - cap).max(0.0);
            (gap / step).ceil() * step
        })
        .sum()
}

/// Largest hourly gap divided by that hour's committed interruptible MW.
pub fn peak_gap_scale(timeline: &ScenarioTimeline, p_r_min: f64) -> f64 {
    timeline
        .hours
        .iter()
        .map(|h| {
            let gap = h.load.iter().sum::<f64>() + p_r_min - h.gen_cap.iter().sum::<f64>();
            if gap > 0.0 { gap / h.committed_mw } else { 0.0 }
        })
        .fold(0.0, f64::max)
}

/// Mean of N(mu, sd) conditioned on [0, 1], by composite Simpson quadrature.
pub fn truncated_normal_mean(mu: f64, sd: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let pdf = |x: f64| (-0.5 * ((x - mu) / sd).powi(2)).exp();
    let (mut mass, mut first) = (0.0, 0.0);
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        mass += w * pdf(x);
        first += w * x * pdf(x);
    }
    first / mass
}

pub fn bus(id: u32, slack: bool) -> Bus {
    Bus {
        id,
        zone: "z".into(),
        is_slack: slack,
    }
}

pub fn branch(from: u32, to: u32, x: f64, limit: f64) -> Branch {
    Branch {
        from_bus: from,
        to_bus: to,
        reactance: x,
        limit,
    }
}

pub fn generator(id: u32, bus: u32, cap: f64, cost: f64) -> Generator {
    Generator {
        id,
        bus,
        p_max_installed: cap,
        cost,
    }
}

pub fn load_bus(bus: u32, w: (f64, f64, f64)) -> LoadBus {
    LoadBus {
        bus,
        weights: SectorWeights::new(w.0, w.1, w.2),
    }
}

/// Two buses, one line: generator at bus 1, load at bus 2.
pub fn two_bus(limit: f64) -> GridCase {
    GridCase {
        buses: vec![bus(1, true), bus(2, false)],
        branches: vec![branch(1, 2, 0.1, limit)],
        generators: vec![generator(1, 1, 100.0, 1.0)],
        load_buses: vec![load_bus(2, (0.5, 0.3, 0.2))],
        base_mva: 100.0,
    }
}

/// Triangle with equal reactances, generators at buses 1 and 2, load at 3.
pub fn triangle(limit: f64) -> GridCase {
    GridCase {
        buses: vec![bus(1, true), bus(2, false), bus(3, false)],
        branches: vec![
            branch(1, 2, 0.1, limit),
            branch(1, 3, 0.1, limit),
            branch(2, 3, 0.1, limit),
        ],
        generators: vec![generator(1, 1, 60.0, 1.0), generator(2, 2, 60.0, 2.0)],
        load_buses: vec![load_bus(3, (0.5, 0.3, 0.2))],
        base_mva: 100.0,
    }
}
