//! Butcher tableaux for the Radau IIA, Gauss and Lobatto IIIC families.
//!
//! Nodes are computed as roots of the family's (shifted) Legendre-type
//! polynomial via companion-matrix eigenvalues followed by a Newton polish.
//! The coefficient matrix is then fixed row by row from simplifying
//! conditions: `C(s)` for the collocation families, and `a_{i1} = b_1` plus
//! `C(s-1)` for Lobatto IIIC.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stage counts with test coverage. Larger values work but are untested.
pub const TESTED_MAX_STAGES: usize = 5;
const HARD_MAX_STAGES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RadauIIA,
    Gauss,
    LobattoIIIC,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::RadauIIA, Family::Gauss, Family::LobattoIIIC];

    pub fn name(self) -> &'static str {
        match self {
            Family::RadauIIA => "radau-iia",
            Family::Gauss => "gauss",
            Family::LobattoIIIC => "lobatto-iiic",
        }
    }

    /// Classical order of the `s`-stage member.
    pub fn order(self, s: usize) -> usize {
        match self {
            Family::RadauIIA => 2 * s - 1,
            Family::Gauss => 2 * s,
            Family::LobattoIIIC => 2 * s - 2,
        }
    }

    fn min_stages(self) -> usize {
        match self {
            Family::LobattoIIIC => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "radau-iia" | "radau" | "radauiia" => Ok(Family::RadauIIA),
            "gauss" | "gauss-legendre" => Ok(Family::Gauss),
            "lobatto-iiic" | "lobatto" | "lobattoiiic" => Ok(Family::LobattoIIIC),
            other => Err(Error::Config(format!("unknown tableau family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub family: Family,
    pub stages: usize,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
}

/// Builds the `s`-stage member of `family`.
pub fn make_tableau(family: Family, s: usize) -> Result<ButcherTableau> {
    if s < family.min_stages() || s > HARD_MAX_STAGES {
        return Err(Error::UnsupportedStageCount {
            family: family.name(),
            stages: s,
        });
    }
    if s > TESTED_MAX_STAGES {
        log::warn!("{family} with s={s} is outside the tested range 1..={TESTED_MAX_STAGES}");
    }

    let c = nodes(family, s);
    let b = solve_vandermonde_row(&c, |k| 1.0 / k as f64, None);
    let mut a = DMatrix::zeros(s, s);
    for i in 0..s {
        let row = match family {
            Family::RadauIIA | Family::Gauss => {
                solve_vandermonde_row(&c, |k| c[i].powi(k as i32) / k as f64, None)
            }
            Family::LobattoIIIC => solve_vandermonde_row(&c, |k| c[i].powi(k as i32) / k as f64, Some(b[0])),
        };
        for j in 0..s {
            a[(i, j)] = row[j];
        }
    }

    let sigma_min = a.clone().svd(false, false).singular_values.min();
    if !(sigma_min > 1e-12) {
        return Err(Error::SingularTableau(sigma_min));
    }
    Ok(ButcherTableau {
        family,
        stages: s,
        a,
        b,
        c,
        order: family.order(s),
    })
}

/// Solves for `x` in `sum_j x_j c_j^{k-1} = rhs(k)`. With `first = Some(v)`
/// the first equation is replaced by `x_1 = v` and `k` runs over `1..s`.
fn solve_vandermonde_row(c: &[f64], rhs: impl Fn(usize) -> f64, first: Option<f64>) -> Vec<f64> {
    let s = c.len();
    let mut m = DMatrix::zeros(s, s);
    let mut r = DVector::zeros(s);
    let offset = match first {
        Some(v) => {
            m[(0, 0)] = 1.0;
            r[0] = v;
            1
        }
        None => 0,
    };
    for row in offset..s {
        let k = row + 1 - offset;
        for j in 0..s {
            m[(row, j)] = c[j].powi(k as i32 - 1);
        }
        r[row] = rhs(k);
    }
    let lu = m.clone().lu();
    let mut x = lu.solve(&r).expect("distinct nodes give a nonsingular Vandermonde system");
    // one step of iterative refinement
    let resid = &r - &m * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    x.iter().copied().collect()
}

/// Monomial coefficients (ascending powers) of `P_n(2x - 1)`.
fn shifted_legendre(n: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; n + 1];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
        *ck = sign * binomial(n, k) * binomial(n + k, k);
    }
    coeffs
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn poly_eval(p: &[f64], x: f64) -> (f64, f64) {
    let mut val = 0.0;
    let mut der = 0.0;
    for &coef in p.iter().rev() {
        der = der * x + val;
        val = val * x + coef;
    }
    (val, der)
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Real roots of `p` (all roots are real and simple for the polynomials used
/// here), sorted ascending.
fn real_roots(p: &[f64]) -> Vec<f64> {
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let mut companion = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -p[i] / lead;
    }
    let mut roots: Vec<f64> = companion.complex_eigenvalues().iter().map(|z| z.re).collect();
    for r in roots.iter_mut() {
        let (v, d) = poly_eval(p, *r);
        if d != 0.0 {
            *r -= v / d;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

fn nodes(family: Family, s: usize) -> Vec<f64> {
    match family {
        Family::Gauss => real_roots(&shifted_legendre(s)),
        Family::RadauIIA => {
            let ps = shifted_legendre(s);
            let pm = shifted_legendre(s - 1);
            let diff: Vec<f64> = ps
                .iter()
                .enumerate()
                .map(|(k, &v)| v - pm.get(k).copied().unwrap_or(0.0))
                .collect();
            let mut c = real_roots(&diff);
            // the right endpoint is a root by construction
            *c.last_mut().unwrap() = 1.0;
            c
        }
        Family::LobattoIIIC => {
            let interior = real_roots(&poly_derivative(&shifted_legendre(s - 1)));
            let mut c = Vec::with_capacity(s);
            c.push(0.0);
            c.extend(interior);
            c.push(1.0);
            c
        }
    }
}

impl ButcherTableau {
    pub fn is_stiffly_accurate(&self, tol: f64) -> bool {
        let s = self.stages;
        (0..s).all(|j| (self.a[(s - 1, j)] - self.b[j]).abs() <= tol)
    }

    pub fn a_inverse(&self) -> DMatrix<f64> {
        self.a.clone().try_inverse().expect("tableau matrices are invertible")
    }

    /// `R(z) = 1 + z b^T (I - zA)^{-1} 1`, the stability function.
    pub fn stability_function(&self, z: f64) -> f64 {
        let s = self.stages;
        let m = DMatrix::identity(s, s) - &self.a * z;
        let ones = DVector::from_element(s, 1.0);
        let k = m.lu().solve(&ones).expect("I - zA is nonsingular for z <= 0");
        1.0 + z * self.b.iter().zip(k.iter()).map(|(b, k)| b * k).sum::<f64>()
    }

    /// Solves `y' = lambda y` on `[0, t_end]` with `steps` uniform steps by
    /// solving each stage system directly.
    pub fn integrate_linear(&self, lambda: f64, y0: f64, t_end: f64, steps: usize) -> f64 {
        let h = t_end / steps as f64;
        let s = self.stages;
        let m = DMatrix::identity(s, s) - &self.a * (h * lambda);
        let lu = m.lu();
        let mut y = y0;
        for _ in 0..steps {
            let rhs = DVector::from_element(s, lambda * y);
            let k = lu.solve(&rhs).expect("stage system is nonsingular");
            y += h * self.b.iter().zip(k.iter()).map(|(b, k)| b * k).sum::<f64>();
        }
        y
    }
}

impl fmt::Display for ButcherTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.stages;
        let cell = |v: f64| format!("{v:>12.8}");
        writeln!(f, "{} s={} order={}", self.family, s, self.order)?;
        for i in 0..s {
            write!(f, "{} |", cell(self.c[i]))?;
            for j in 0..s {
                write!(f, " {}", cell(self.a[(i, j)]))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "{}-+{}", "-".repeat(12), "-".repeat(13 * s))?;
        write!(f, "{} |", " ".repeat(12))?;
        for j in 0..s {
            write!(f, " {}", cell(self.b[j]))?;
        }
        writeln!(f)
    }
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    /// Max residual `|b . Phi(t) - 1/gamma(t)|` over all rooted trees of
    /// order `<= up_to`.
    pub max_residual: f64,
    /// Max residual per order, index 0 is order 1.
    pub per_order: Vec<f64>,
    pub trees_checked: usize,
    pub stiffly_accurate: bool,
    pub min_singular_value: f64,
}

/// Evaluates every rooted-tree order condition up to order `up_to`.
pub fn check_order_conditions(t: &ButcherTableau, up_to: usize) -> OrderReport {
    let forest = RootedTrees::up_to(up_to);
    let s = t.stages;
    // elementary weight vectors g(t), with b . g(t) = Phi(t)
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(forest.trees.len());
    let mut per_order = vec![0.0f64; up_to];
    for tree in &forest.trees {
        let mut v = vec![1.0; s];
        for &child in &tree.children {
            let ag = mat_vec(&t.a, &g[child]);
            v.iter_mut().zip(&ag).for_each(|(x, y)| *x *= y);
        }
        let phi: f64 = t.b.iter().zip(&v).map(|(b, x)| b * x).sum();
        let resid = (phi - 1.0 / tree.density).abs();
        per_order[tree.order - 1] = per_order[tree.order - 1].max(resid);
        g.push(v);
    }
    OrderReport {
        max_residual: per_order.iter().copied().fold(0.0, f64::max),
        per_order,
        trees_checked: forest.trees.len(),
        stiffly_accurate: t.is_stiffly_accurate(1e-13),
        min_singular_value: t.a.clone().svd(false, false).singular_values.min(),
    }
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

struct Tree {
    order: usize,
    density: f64,
    /// Indices of child subtrees, non-increasing.
    children: Vec<usize>,
}

/// All unlabelled rooted trees up to a given order, children before parents.
struct RootedTrees {
    trees: Vec<Tree>,
}

impl RootedTrees {
    fn up_to(max_order: usize) -> Self {
        let mut trees: Vec<Tree> = Vec::new();
        for n in 1..=max_order {
            let existing = trees.len();
            let mut forests = Vec::new();
            multisets(&trees, existing, n - 1, &mut Vec::new(), &mut forests);
            for children in forests {
                let density = n as f64 * children.iter().map(|&c| trees[c].density).product::<f64>();
                trees.push(Tree {
                    order: n,
                    density,
                    children,
                });
            }
        }
        Self { trees }
    }
}

/// Enumerates multisets of trees (ids `< bound`, non-increasing) whose orders
/// sum to `remaining`.
fn multisets(trees: &[Tree], bound: usize, remaining: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if remaining == 0 {
        out.push(cur.clone());
        return;
    }
    for id in (0..bound).rev() {
        let ord = trees[id].order;
        if ord <= remaining {
            cur.push(id);
            multisets(trees, id + 1, remaining - ord, cur, out);
            cur.pop();
        }
    }
}
