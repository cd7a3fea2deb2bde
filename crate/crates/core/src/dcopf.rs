//! Single-snapshot DC optimal power flow in the B-theta formulation.
//!
//! Variables are generator outputs, bus angles (slack fixed at zero) and
//! branch flows. Infeasibility is a normal outcome (`feasible == false`),
//! not an error.

use std::collections::HashMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::tolerance::FEAS_MW;

/// One hourly snapshot: available capacity per generator and load per load
/// bus, both aligned with the order in `case`.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotInput<'a> {
    pub case: &'a GridCase,
    pub gen_cap: &'a [f64],
    pub load: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub feasible: bool,
    /// MW per generator; empty when infeasible.
    pub dispatch: Vec<f64>,
    /// MW per branch, positive from `from_bus` to `to_bus`.
    pub flows: Vec<f64>,
    /// Radians per bus.
    pub angles: Vec<f64>,
    /// $/h at the true (unperturbed) costs.
    pub cost: f64,
}

impl DispatchResult {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            dispatch: Vec::new(),
            flows: Vec::new(),
            angles: Vec::new(),
            cost: 0.0,
        }
    }
}

/// Index-resolved network, reusable across many snapshots of the same case.
#[derive(Debug, Clone)]
pub struct DcNetwork {
    n_bus: usize,
    slack: usize,
    gen_bus: Vec<usize>,
    gen_cost: Vec<f64>,
    /// Tie-break rank by ascending generator id.
    gen_rank: Vec<usize>,
    load_bus: Vec<usize>,
    /// (from, to, base_mva / x, limit)
    branches: Vec<(usize, usize, f64, f64)>,
}

impl DcNetwork {
    pub fn new(case: &GridCase) -> Result<Self> {
        let index: HashMap<_, _> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let lookup = |id| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("unknown bus {id}")))
        };
        let slack = case
            .buses
            .iter()
            .position(|b| b.is_slack)
            .ok_or_else(|| Error::InvalidArgument("case has no slack bus".into()))?;
        let gen_bus = case.generators.iter().map(|g| lookup(g.bus)).collect::<Result<_>>()?;
        let load_bus = case.load_buses.iter().map(|l| lookup(l.bus)).collect::<Result<_>>()?;
        let branches = case
            .branches
            .iter()
            .map(|b| Ok((lookup(b.from_bus)?, lookup(b.to_bus)?, case.base_mva / b.reactance, b.limit)))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..case.generators.len()).collect();
        order.sort_by_key(|&i| case.generators[i].id);
        let mut gen_rank = vec![0; order.len()];
        for (rank, &i) in order.iter().enumerate() {
            gen_rank[i] = rank;
        }
        Ok(Self {
            n_bus: case.buses.len(),
            slack,
            gen_bus,
            gen_cost: case.generators.iter().map(|g| g.cost).collect(),
            gen_rank,
            load_bus,
            branches,
        })
    }

    pub fn n_generators(&self) -> usize {
        self.gen_bus.len()
    }

    pub fn n_loads(&self) -> usize {
        self.load_bus.len()
    }

    /// Least-cost dispatch for the given capacities and loads.
    pub fn solve(&self, gen_cap: &[f64], load: &[f64]) -> Result<DispatchResult> {
        if gen_cap.len() != self.gen_bus.len() {
            return Err(Error::Dimension(format!(
                "{} generator capacities for {} generators",
                gen_cap.len(),
                self.gen_bus.len()
            )));
        }
        if load.len() != self.load_bus.len() {
            return Err(Error::Dimension(format!(
                "{} loads for {} load buses",
                load.len(),
                self.load_bus.len()
            )));
        }
        if gen_cap.iter().chain(load).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite capacity or load".into()));
        }
        if gen_cap.iter().chain(load).any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative capacity or load".into()));
        }

        let total_load: f64 = load.iter().sum();
        let total_cap: f64 = gen_cap.iter().sum();
        if total_cap + FEAS_MW < total_load {
            return Ok(DispatchResult::infeasible());
        }

        let max_cost = self.gen_cost.iter().fold(1.0_f64, |m, &c| m.max(c));
        let tie_eps = 1e-6 * max_cost;

        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let gens: Vec<_> = self
            .gen_cost
            .iter()
            .zip(gen_cap)
            .zip(&self.gen_rank)
            .map(|((&c, &cap), &rank)| lp.add_var(c + tie_eps * rank as f64, (0.0, cap)))
            .collect();
        let angles: Vec<_> = (0..self.n_bus)
            .map(|b| {
                let bounds = if b == self.slack {
                    (0.0, 0.0)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                };
                lp.add_var(0.0, bounds)
            })
            .collect();
        let flows: Vec<_> = self
            .branches
            .iter()
            .map(|&(_, _, _, limit)| lp.add_var(0.0, (-limit, limit)))
            .collect();

        for (k, &(f, t, b, _)) in self.branches.iter().enumerate() {
            lp.add_constraint(
                &[(flows[k], 1.0), (angles[f], -b), (angles[t], b)],
                ComparisonOp::Eq,
                0.0,
            );
        }

        let mut injection_terms: Vec<Vec<(minilp::Variable, f64)>> = vec![Vec::new(); self.n_bus];
        for (g, &bus) in self.gen_bus.iter().enumerate() {
            injection_terms[bus].push((gens[g], 1.0));
        }
        for (k, &(f, t, _, _)) in self.branches.iter().enumerate() {
            injection_terms[f].push((flows[k], -1.0));
            injection_terms[t].push((flows[k], 1.0));
        }
        let mut bus_load = vec![0.0; self.n_bus];
        for (l, &bus) in self.load_bus.iter().enumerate() {
            bus_load[bus] += load[l];
        }
        for (bus, terms) in injection_terms.iter().enumerate() {
            lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, bus_load[bus]);
        }

        let sol = match lp.solve() {
            Ok(s) => s,
            Err(minilp::Error::Infeasible) => return Ok(DispatchResult::infeasible()),
            Err(minilp::Error::Unbounded) => {
                return Err(Error::Numerical("DC OPF reported unbounded".into()))
            }
        };

        let dispatch: Vec<f64> = gens
            .iter()
            .zip(gen_cap)
            .map(|(&v, &cap)| sol[v].clamp(0.0, cap))
            .collect();
        let cost = dispatch.iter().zip(&self.gen_cost).map(|(g, c)| g * c).sum();
        Ok(DispatchResult {
            feasible: true,
            flows: flows.iter().map(|&v| sol[v]).collect(),
            angles: angles.iter().map(|&v| sol[v]).collect(),
            dispatch,
            cost,
        })
    }
}

/// Solves one snapshot. See [`DcNetwork`] to amortize setup across hours.
pub fn solve_dcopf(input: &SnapshotInput<'_>) -> Result<DispatchResult> {
    DcNetwork::new(input.case)?.solve(input.gen_cap, input.load)
}

/// Σ capacity − Σ load + shed that would be restored.
pub fn total_reserve(input: &SnapshotInput<'_>, restored_shed: f64) -> f64 {
    input.gen_cap.iter().sum::<f64>() - input.load.iter().sum::<f64>() + restored_shed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus, Generator, LoadBus, SectorWeights};

    fn bus(id: u32, slack: bool) -> Bus {
        Bus { id, zone: "Z".into(), is_slack: slack }
    }

    fn load(bus: u32) -> LoadBus {
        LoadBus { bus, weights: SectorWeights::new(1.0, 0.0, 0.0) }
    }

    fn two_bus(limit: f64) -> GridCase {
        GridCase {
            buses: vec![bus(1, true), bus(2, false)],
            branches: vec![Branch { from_bus: 1, to_bus: 2, reactance: 0.1, limit }],
            generators: vec![Generator { id: 1, bus: 1, p_max_installed: 100.0, cost: 1.0 }],
            load_buses: vec![load(2)],
            base_mva: 100.0,
        }
    }

    #[test]
    fn two_bus_single_path() {
        let case = two_bus(60.0);
        let r = solve_dcopf(&SnapshotInput { case: &case, gen_cap: &[100.0], load: &[50.0] }).unwrap();
        assert!(r.feasible);
        assert!((r.dispatch[0] - 50.0).abs() < 1e-6);
        assert!((r.flows[0] - 50.0).abs() < 1e-6);
        assert!((r.cost - 50.0).abs() < 1e-6);
        // flow = base * (theta_1 - theta_2) / x
        assert!((100.0 * (r.angles[0] - r.angles[1]) / 0.1 - 50.0).abs() < 1e-6);
    }

    #[test]
    fn two_bus_line_limit_infeasible() {
        let case = two_bus(40.0);
        let r = solve_dcopf(&SnapshotInput { case: &case, gen_cap: &[100.0], load: &[50.0] }).unwrap();
        assert!(!r.feasible);
        assert!(r.dispatch.is_empty());
    }

    #[test]
    fn equal_costs_prefer_lowest_id() {
        let case = GridCase {
            buses: vec![bus(1, true)],
            branches: vec![],
            generators: vec![
                Generator { id: 9, bus: 1, p_max_installed: 100.0, cost: 5.0 },
                Generator { id: 2, bus: 1, p_max_installed: 100.0, cost: 5.0 },
            ],
            load_buses: vec![load(1)],
            base_mva: 100.0,
        };
        let r = solve_dcopf(&SnapshotInput { case: &case, gen_cap: &[100.0, 100.0], load: &[60.0] }).unwrap();
        assert!((r.dispatch[1] - 60.0).abs() < 1e-6);
        assert!(r.dispatch[0].abs() < 1e-6);
    }

    #[test]
    fn non_finite_is_numerical_error() {
        let case = two_bus(60.0);
        let err = solve_dcopf(&SnapshotInput { case: &case, gen_cap: &[f64::NAN], load: &[1.0] }).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn reserve_arithmetic() {
        let case = two_bus(60.0);
        let s = SnapshotInput { case: &case, gen_cap: &[100.0], load: &[80.0] };
        assert_eq!(total_reserve(&s, 0.0), 20.0);
        let s = SnapshotInput { case: &case, gen_cap: &[100.0], load: &[95.0] };
        assert_eq!(total_reserve(&s, 10.0), 15.0);
    }
}
