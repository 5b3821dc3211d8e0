//! Grid discretization of the risk functional and its linear program.
//!
//! On a grid `x_r` with cell volumes `Δ_r` the risk becomes
//!
//! ```text
//! Z_Δ(phi) = sum_r sum_j phi_j(x_r) g_j(x_r) Δ_r
//! ```
//!
//! minimized over `phi_j(x_r) >= 0` with `sum_j phi_j(x_r) = 1` at every
//! point. [`solve_assignment_lp`] hands this to a general simplex solver;
//! [`integer_assignment`] takes the pointwise argmin. Agreement between the
//! two certifies the pointwise rule on the grid.

use crate::decision::{argmin, cost_densities, HypothesisFamily, WeightMatrix};
use crate::error::{Error, Result};

/// Grid points and their cell volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<Vec<f64>>,
    pub cell_weights: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("points", "grid is empty"));
        }
        if self.points.len() != self.cell_weights.len() {
            return Err(Error::invalid("cell_weights", "one weight per point required"));
        }
        if let Some(r) = self.cell_weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!("cell_weights[{r}]"), "must be finite and > 0"));
        }
        Ok(())
    }
}

/// `costs[r][j] = g_j(x_r)`.
pub type CostTable = Vec<Vec<f64>>;

/// Per-point decision probabilities `phi[r][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAssignment {
    pub phi: Vec<Vec<f64>>,
}

impl DiscreteAssignment {
    /// Checks non-negativity and `sum_j phi[r][j] = 1` at every point.
    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.phi.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::invalid(format!("phi[{r}]"), "negative entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("phi[{r}]"), format!("entries sum to {s}")));
            }
        }
        Ok(())
    }

    /// Label with the largest probability at each point (lowest on ties).
    pub fn labels(&self) -> Vec<usize> {
        self.phi
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Default box: `[min a - 8 sigma_max, max a + 8 sigma_max]` per axis, over
/// every marginal of every hypothesis.
pub fn default_bounds(family: &HypothesisFamily) -> Vec<(f64, f64)> {
    let d = family.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut sigma = vec![0.0_f64; d];
    for model in family.densities() {
        for comp in model.components() {
            for (j, m) in comp.marginals().iter().enumerate() {
                lo[j] = lo[j].min(m.a());
                hi[j] = hi[j].max(m.a());
                sigma[j] = sigma[j].max(m.sigma());
            }
        }
        if let Some(atom) = model.atom() {
            for (j, &x) in atom.location.iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
    }
    (0..d)
        .map(|j| {
            let s = if sigma[j] > 0.0 { sigma[j] } else { 1.0 };
            (lo[j] - 8.0 * s, hi[j] + 8.0 * s)
        })
        .collect()
}

/// Uniform tensor grid with `resolution` points per axis (endpoints
/// included) and the cost table on it.
pub fn discretize(weights: &WeightMatrix, family: &HypothesisFamily, bounds: &[(f64, f64)], resolution: usize) -> Result<(Grid, CostTable)> {
    let d = family.dim();
    if bounds.is_empty() {
        return Err(Error::domain("bounds are empty"));
    }
    if bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bounds.len(),
        });
    }
    if d > 3 {
        return Err(Error::DimensionTooLarge(d));
    }
    if resolution < 2 {
        return Err(Error::domain(format!("resolution must be >= 2, got {resolution}")));
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::domain(format!("bounds[{j}] = ({lo}, {hi}) is empty")));
        }
    }
    let steps: Vec<f64> = bounds.iter().map(|&(lo, hi)| (hi - lo) / (resolution - 1) as f64).collect();
    let cell: f64 = steps.iter().product();
    let total = resolution.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; d];
        // Last axis varies fastest.
        for j in (0..d).rev() {
            let idx = rem % resolution;
            rem /= resolution;
            x[j] = if idx == resolution - 1 {
                bounds[j].1
            } else {
                bounds[j].0 + idx as f64 * steps[j]
            };
        }
        points.push(x);
    }
    let costs = points
        .iter()
        .map(|x| cost_densities(weights, family, x))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Grid {
            cell_weights: vec![cell; points.len()],
            points,
        },
        costs,
    ))
}

fn check_table(grid: &Grid, costs: &CostTable) -> Result<usize> {
    grid.validate()?;
    if costs.len() != grid.len() {
        return Err(Error::invalid("costs", format!("{} rows for {} grid points", costs.len(), grid.len())));
    }
    let labels = costs[0].len();
    if labels == 0 {
        return Err(Error::invalid("costs[0]", "no labels"));
    }
    for (r, row) in costs.iter().enumerate() {
        if row.len() != labels {
            return Err(Error::invalid(format!("costs[{r}]"), "ragged cost table"));
        }
        if row.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("costs[{r}]"), "non-finite cost"));
        }
    }
    Ok(labels)
}

/// `Z_Δ(assignment)`.
pub fn objective(grid: &Grid, costs: &CostTable, assignment: &DiscreteAssignment) -> f64 {
    let mut z = 0.0;
    for ((phi, row), w) in assignment.phi.iter().zip(costs).zip(&grid.cell_weights) {
        for (p, g) in phi.iter().zip(row) {
            z += p * g * w;
        }
    }
    z
}

/// Pointwise argmin with the lowest label winning ties.
pub fn integer_assignment(grid: &Grid, costs: &CostTable) -> Result<DiscreteAssignment> {
    let labels = check_table(grid, costs)?;
    Ok(DiscreteAssignment {
        phi: costs
            .iter()
            .map(|row| {
                let mut v = vec![0.0; labels];
                v[argmin(row)] = 1.0;
                v
            })
            .collect(),
    })
}

/// Solves the grid problem as a generic LP with the simplex method.
pub fn solve_assignment_lp(grid: &Grid, costs: &CostTable) -> Result<DiscreteAssignment> {
    let labels = check_table(grid, costs)?;
    let m = grid.len();
    let n = m * labels;
    let mut c = vec![0.0; n];
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let mut row = vec![0.0; n];
        for j in 0..labels {
            c[r * labels + j] = costs[r][j] * grid.cell_weights[r];
            row[r * labels + j] = 1.0;
        }
        rows.push(row);
    }
    let lp = LinearProgram {
        costs: c,
        constraints: rows,
        rhs: vec![1.0; m],
    };
    let solution = lp.solve()?;
    Ok(DiscreteAssignment {
        phi: solution.x.chunks(labels).map(<[f64]>::to_vec).collect(),
    })
}

/// `min c.x  s.t.  A x = b, x >= 0` in dense form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;
// Optimality is tested relative to each column's own cost magnitude so that
// tiny but meaningful costs are not rounded away.
const REDUCED_COST_RTOL: f64 = 1e-12;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, obj: &mut [f64], obj_rhs: &mut f64, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        self.rhs[row] /= p;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row];
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor == 0.0 {
                continue;
            }
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                if *pv != 0.0 {
                    *v -= factor * pv;
                }
            }
            r[col] = 0.0;
            self.rhs[i] -= factor * pivot_rhs;
        }
        let factor = obj[col];
        if factor != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                if *pv != 0.0 {
                    *v -= factor * pv;
                }
            }
            obj[col] = 0.0;
            *obj_rhs -= factor * pivot_rhs;
        }
        self.basis[row] = col;
    }

    /// Bland's rule: lowest-index improving column, lowest-index basic
    /// variable among ratio-test ties.
    fn optimize(&mut self, obj: &mut [f64], obj_rhs: &mut f64, scale: &[f64], allowed: usize) -> Result<usize> {
        let mut pivots = 0;
        loop {
            let entering = (0..allowed).find(|&j| obj[j] < -REDUCED_COST_RTOL * scale[j].max(f64::MIN_POSITIVE));
            let Some(col) = entering else {
                return Ok(pivots);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((best, br)) => {
                            if ratio < br || (ratio == br && self.basis[i] < self.basis[best]) {
                                Some((i, ratio))
                            } else {
                                Some((best, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            self.pivot(obj, obj_rhs, row, col);
            pivots += 1;
            if pivots > 50 * (self.width + self.rows.len()) {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
        }
    }
}

impl LinearProgram {
    /// Two-phase dense simplex. Columns that already form unit vectors with
    /// non-negative right-hand sides seed the starting basis; remaining rows
    /// get artificial variables.
    pub fn solve(&self) -> Result<LpSolution> {
        let m = self.constraints.len();
        let n = self.costs.len();
        if self.rhs.len() != m {
            return Err(Error::invalid("rhs", "one right-hand side per constraint"));
        }
        if let Some(i) = self.constraints.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!("constraints[{i}]"), "wrong row length"));
        }
        let mut rows = self.constraints.clone();
        let mut rhs = self.rhs.clone();
        for i in 0..m {
            if rhs[i] < 0.0 {
                rhs[i] = -rhs[i];
                for v in rows[i].iter_mut() {
                    *v = -*v;
                }
            }
        }

        // Unit columns usable as initial basic variables.
        let mut basis = vec![usize::MAX; m];
        for j in 0..n {
            let mut unit_row = None;
            let mut is_unit = true;
            for (i, row) in rows.iter().enumerate() {
                let v = row[j];
                if v == 0.0 {
                    continue;
                }
                if v == 1.0 && unit_row.is_none() {
                    unit_row = Some(i);
                } else {
                    is_unit = false;
                    break;
                }
            }
            if let (true, Some(i)) = (is_unit, unit_row) {
                if basis[i] == usize::MAX {
                    basis[i] = j;
                }
            }
        }
        let artificial_rows: Vec<usize> = (0..m).filter(|&i| basis[i] == usize::MAX).collect();
        let width = n + artificial_rows.len();
        for row in rows.iter_mut() {
            row.resize(width, 0.0);
        }
        for (t, &i) in artificial_rows.iter().enumerate() {
            rows[i][n + t] = 1.0;
            basis[i] = n + t;
        }
        let mut tab = Tableau { rows, rhs, basis, width };
        let mut pivots = 0;

        if !artificial_rows.is_empty() {
            // Phase 1: minimise the sum of artificials.
            let mut obj = vec![0.0; width];
            let mut obj_rhs = 0.0;
            for t in 0..artificial_rows.len() {
                obj[n + t] = 1.0;
            }
            for &i in &artificial_rows {
                for (o, v) in obj.iter_mut().zip(&tab.rows[i]) {
                    *o -= v;
                }
                obj_rhs -= tab.rhs[i];
            }
            let ones = vec![1.0; width];
            pivots += tab.optimize(&mut obj, &mut obj_rhs, &ones, width)?;
            if -obj_rhs > FEAS_EPS {
                return Err(Error::Numerical("linear program is infeasible".into()));
            }
            // Drive any zero-level artificials out of the basis.
            for i in 0..m {
                if tab.basis[i] >= n {
                    if let Some(col) = (0..n).find(|&j| tab.rows[i][j].abs() > PIVOT_EPS) {
                        tab.pivot(&mut obj, &mut obj_rhs, i, col);
                        pivots += 1;
                    }
                }
            }
        }

        // Phase 2.
        let mut obj = vec![0.0; width];
        obj[..n].copy_from_slice(&self.costs);
        let mut obj_rhs = 0.0;
        for i in 0..m {
            let b = tab.basis[i];
            let cb = if b < n { self.costs[b] } else { 0.0 };
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&tab.rows[i]) {
                    if *v != 0.0 {
                        *o -= cb * v;
                    }
                }
                obj_rhs -= cb * tab.rhs[i];
            }
        }
        let scale: Vec<f64> = (0..width).map(|j| if j < n { self.costs[j].abs() } else { 1.0 }).collect();
        pivots += tab.optimize(&mut obj, &mut obj_rhs, &scale, n)?;

        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs[i];
            }
        }
        let objective = x.iter().zip(&self.costs).map(|(a, c)| a * c).sum();
        Ok(LpSolution { x, objective, pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::QuasiGaussian1D;

    #[test]
    fn single_point_lp_picks_the_minimum() {
        let grid = Grid {
            points: vec![vec![0.0]],
            cell_weights: vec![1.0],
        };
        let costs = vec![vec![3.0, 1.0, 2.0]];
        let a = solve_assignment_lp(&grid, &costs).unwrap();
        assert_eq!(a.phi, vec![vec![0.0, 1.0, 0.0]]);
        a.validate().unwrap();
    }

    #[test]
    fn ties_go_to_label_zero() {
        let grid = Grid {
            points: vec![vec![0.0]],
            cell_weights: vec![0.5],
        };
        let a = integer_assignment(&grid, &vec![vec![2.0, 2.0, 2.0]]).unwrap();
        assert_eq!(a.labels(), vec![0]);
    }

    #[test]
    fn uniform_grid_spacing() {
        let fam = HypothesisFamily::new(vec![
            QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
            QuasiGaussian1D::gaussian(2.0, 1.0).unwrap(),
        ])
        .unwrap();
        let w = WeightMatrix::unit(2).unwrap();
        let (grid, costs) = discretize(&w, &fam, &[(-5.0, 5.0)], 11).unwrap();
        assert_eq!(grid.len(), 11);
        assert!(grid.cell_weights.iter().all(|&c| (c - 1.0).abs() < 1e-15));
        assert_eq!(grid.points[0], vec![-5.0]);
        assert_eq!(grid.points[10], vec![5.0]);
        assert_eq!(costs.len(), 11);
        assert!(discretize(&w, &fam, &[], 11).is_err());
        assert!(discretize(&w, &fam, &[(1.0, 1.0)], 11).is_err());
        assert!(discretize(&w, &fam, &[(0.0, 1.0)], 1).is_err());
        assert_eq!(default_bounds(&fam), vec![(-8.0, 10.0)]);
    }

    #[test]
    fn general_lp_with_artificials() {
        // min -x0 - 2 x1  s.t. x0 + x1 + s0 = 4, x0 + 3 x1 + s1 = 6 (s0, s1 slack)
        // written with the slack columns permuted so phase 1 is exercised
        // on the second row: 2 x0 + 2 x1 + 2 s0 = 8.
        let lp = LinearProgram {
            costs: vec![-1.0, -2.0, 0.0, 0.0],
            constraints: vec![vec![2.0, 2.0, 2.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            rhs: vec![8.0, 6.0],
        };
        let s = lp.solve().unwrap();
        // Optimum at x0 = 3, x1 = 1: objective -5.
        assert!((s.objective + 5.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let infeasible = LinearProgram {
            costs: vec![1.0, 1.0],
            constraints: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            rhs: vec![1.0, 2.0],
        };
        assert!(matches!(infeasible.solve(), Err(Error::Numerical(_))));
        let unbounded = LinearProgram {
            costs: vec![-1.0, 0.0],
            constraints: vec![vec![1.0, -1.0]],
            rhs: vec![0.0],
        };
        assert!(matches!(unbounded.solve(), Err(Error::Numerical(_))));
    }
}
