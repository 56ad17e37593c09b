//! Dense two-phase primal simplex.
//!
//! Entering columns follow Dantzig's rule (most negative reduced cost). After
//! `STALL_LIMIT` consecutive degenerate pivots the solver switches to Bland's
//! rule until the objective moves again, which rules out cycling.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c . x
//! subject to  A_eq x  = b_eq
//!             A_ub x <= b_ub
//!             x >= 0
//! ```
//!
//! Inequality rows receive a slack column; rows that cannot start with a
//! feasible slack (equalities, and inequalities with a negative right-hand
//! side) receive an artificial column that phase 1 drives to zero.

use thiserror::Error;

/// Primal feasibility tolerance, relative to `max(1, |b|_inf)`.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Reduced costs above `-OPTIMALITY_TOL` are treated as non-negative.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Pivot elements below this magnitude are a numerical breakdown.
pub const PIVOT_FLOOR: f64 = 1e-11;
/// Column entries at or below this are ignored by the ratio test.
const RATIO_TOL: f64 = 1e-9;
/// Relative slack used when deciding that two ratios tie.
const TIE_TOL: f64 = 1e-12;
/// Degenerate pivots tolerated before falling back to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("numerical breakdown: largest pivot candidate {pivot:e} is below the reliable threshold")]
    NumericalBreakdown { pivot: f64 },
    #[error("simplex iteration limit ({0}) exceeded")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ub_matrix: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_ub(&mut self, row: Vec<f64>, rhs: f64) {
        self.ub_matrix.push(row);
        self.ub_rhs.push(rhs);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.eq_matrix.len() != self.eq_rhs.len() {
            return Err(LpError::Malformed(format!(
                "{} equality rows but {} right-hand sides",
                self.eq_matrix.len(),
                self.eq_rhs.len()
            )));
        }
        if self.ub_matrix.len() != self.ub_rhs.len() {
            return Err(LpError::Malformed(format!(
                "{} inequality rows but {} right-hand sides",
                self.ub_matrix.len(),
                self.ub_rhs.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        let rows = self
            .eq_matrix
            .iter()
            .zip(&self.eq_rhs)
            .map(|r| ("equality", r))
            .chain(self.ub_matrix.iter().zip(&self.ub_rhs).map(|r| ("inequality", r)));
        for (i, (kind, (row, rhs))) in rows.enumerate() {
            if row.len() != n {
                return Err(LpError::Malformed(format!(
                    "{kind} row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if !rhs.is_finite() || row.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("{kind} row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Largest violation of `x >= 0`, the equalities and the inequalities,
    /// in that order.
    pub fn violations(&self, x: &[f64]) -> (f64, f64, f64) {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let neg = x.iter().fold(0.0f64, |m, v| m.max(-v));
        let eq = self
            .eq_matrix
            .iter()
            .zip(&self.eq_rhs)
            .fold(0.0f64, |m, (row, b)| m.max((dot(row) - b).abs()));
        let ub = self
            .ub_matrix
            .iter()
            .zip(&self.ub_rhs)
            .fold(0.0f64, |m, (row, b)| m.max(dot(row) - b));
        (neg, eq, ub)
    }

    /// `max(1, |b|_inf)`, the scale feasibility tolerances are measured against.
    pub fn constraint_scale(&self) -> f64 {
        self.eq_rhs
            .iter()
            .chain(&self.ub_rhs)
            .fold(1.0f64, |m, b| m.max(b.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    /// `c . x`; NaN unless `status` is `Optimal`.
    pub objective_value: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective_value: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.data[r * w + e];
        let inv = 1.0 / p;
        let mut pivot_row: Vec<(usize, f64)> = Vec::new();
        for k in 0..w {
            let v = &mut self.data[r * w + k];
            if *v != 0.0 {
                *v *= inv;
                pivot_row.push((k, *v));
            }
        }
        self.data[r * w + e] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for &(k, v) in &pivot_row {
                row[k] -= f * v;
            }
            row[e] = 0.0;
        }
        let f = self.obj[e];
        if f != 0.0 {
            for &(k, v) in &pivot_row {
                self.obj[k] -= f * v;
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Runs primal simplex over columns `0..allowed`.
    fn run(&mut self, allowed: usize) -> Result<Phase, LpError> {
        let rhs = self.rhs_col();
        let mut is_basic = vec![false; self.width];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        let mut stalled = 0usize;
        loop {
            let candidates = (0..allowed).filter(|&j| !is_basic[j] && self.obj[j] < -OPTIMALITY_TOL);
            let entering = if stalled < STALL_LIMIT {
                candidates.min_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]).then(a.cmp(&b)))
            } else {
                candidates.min()
            };
            let Some(e) = entering else {
                return Ok(Phase::Optimal);
            };
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            self.iterations += 1;

            let mut leave: Option<(usize, f64)> = None;
            let mut largest_small = 0.0f64;
            for i in 0..self.rows {
                let a = self.at(i, e);
                if a <= RATIO_TOL {
                    if a > largest_small {
                        largest_small = a;
                    }
                    continue;
                }
                let ratio = self.at(i, rhs).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= TIE_TOL * (1.0 + br.abs());
                        if (tie && self.basis[i] < self.basis[bi]) || (!tie && ratio < br) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => {
                    let before = self.obj[rhs];
                    is_basic[self.basis[r]] = false;
                    is_basic[e] = true;
                    self.pivot(r, e);
                    if self.obj[rhs] == before {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                }
                None if largest_small > PIVOT_FLOOR => {
                    return Err(LpError::NumericalBreakdown {
                        pivot: largest_small,
                    })
                }
                None => return Ok(Phase::Unbounded),
            }
            if !self.obj[rhs].is_finite() {
                return Err(LpError::NumericalBreakdown { pivot: f64::NAN });
            }
        }
    }
}

/// Solves `lp` to global optimality, or classifies it as infeasible or unbounded.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m_eq = lp.eq_matrix.len();
    let m_ub = lp.ub_matrix.len();
    let m = m_eq + m_ub;
    let n_struct = n + m_ub;

    // Rows needing an artificial: all equalities, and inequalities with b < 0.
    let needs_art: Vec<bool> = (0..m)
        .map(|i| i < m_eq || lp.ub_rhs[i - m_eq] < 0.0)
        .collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = n_struct + n_art + 1;
    let rhs_col = width - 1;

    let mut data = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut next_art = n_struct;
    for i in 0..m {
        let row = &mut data[i * width..(i + 1) * width];
        let (coeffs, b) = if i < m_eq {
            (&lp.eq_matrix[i], lp.eq_rhs[i])
        } else {
            (&lp.ub_matrix[i - m_eq], lp.ub_rhs[i - m_eq])
        };
        row[..n].copy_from_slice(coeffs);
        if i >= m_eq {
            row[n + i - m_eq] = 1.0;
        }
        row[rhs_col] = b;
        if b < 0.0 {
            for v in row[..n_struct].iter_mut() {
                *v = -*v;
            }
            row[rhs_col] = -b;
        }
        if needs_art[i] {
            row[next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = n + i - m_eq;
        }
    }

    let max_iterations = 50_000 + 50 * (m + width);
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        obj: vec![0.0; width],
        basis,
        iterations: 0,
        max_iterations,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for i in 0..m {
            if needs_art[i] {
                for k in 0..n_struct {
                    tab.obj[k] -= tab.at(i, k);
                }
                tab.obj[rhs_col] -= tab.at(i, rhs_col);
            }
        }
        tab.run(n_struct)?;
        let infeasibility = -tab.obj[rhs_col];
        if infeasibility > FEASIBILITY_TOL * lp.constraint_scale() {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Pivot remaining (zero-level) artificials out; rows with no usable
        // structural entry are redundant and dropped.
        let mut keep = vec![true; m];
        for r in 0..m {
            if tab.basis[r] < n_struct {
                continue;
            }
            match (0..n_struct).find(|&j| tab.at(r, j).abs() > RATIO_TOL) {
                Some(j) => tab.pivot(r, j),
                None => keep[r] = false,
            }
        }
        let new_width = n_struct + 1;
        let mut data = Vec::with_capacity(m * new_width);
        let mut basis = Vec::with_capacity(m);
        for r in (0..m).filter(|&r| keep[r]) {
            data.extend_from_slice(&tab.data[r * width..r * width + n_struct]);
            data.push(tab.at(r, rhs_col));
            basis.push(tab.basis[r]);
        }
        tab = Tableau {
            rows: basis.len(),
            width: new_width,
            data,
            obj: vec![0.0; new_width],
            basis,
            iterations: tab.iterations,
            max_iterations,
        };
    }

    // Phase 2: reduced costs of the true objective.
    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };
    let rhs = tab.rhs_col();
    for j in 0..tab.width {
        tab.obj[j] = if j == rhs { 0.0 } else { cost(j) };
    }
    for r in 0..tab.rows {
        let cb = cost(tab.basis[r]);
        if cb != 0.0 {
            for j in 0..tab.width {
                let v = tab.at(r, j);
                if v != 0.0 {
                    tab.obj[j] -= cb * v;
                }
            }
        }
    }
    match tab.run(n_struct)? {
        Phase::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded)),
        Phase::Optimal => {
            let mut x = vec![0.0; n];
            for r in 0..tab.rows {
                if tab.basis[r] < n {
                    x[tab.basis[r]] = tab.at(r, rhs);
                }
            }
            let objective_value = x.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                objective_value,
            })
        }
    }
}
