//! Linear solvers for the assembled nonsymmetric systems.
//!
//! * `Direct`: banded LU with partial pivoting after a reverse Cuthill–McKee
//!   reordering, followed by iterative refinement.
//! * `Krylov`: restarted GMRES, right-preconditioned with ILU(0).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::{norm, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolverConfig {
    Direct { tol: f64 },
    Krylov { restart: usize, max_iter: usize, tol: f64 },
}

impl SolverConfig {
    pub fn direct() -> Self {
        SolverConfig::Direct { tol: 1e-10 }
    }

    pub fn krylov() -> Self {
        SolverConfig::Krylov {
            restart: 50,
            max_iter: 5000,
            tol: 1e-8,
        }
    }

    pub fn tol(&self) -> f64 {
        match *self {
            SolverConfig::Direct { tol } | SolverConfig::Krylov { tol, .. } => tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.tol();
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!("solver tolerance {tol} not in (0, 1)")));
        }
        if let SolverConfig::Krylov { restart, .. } = *self {
            if restart == 0 {
                return Err(Error::InvalidArgument("GMRES restart must be at least 1".into()));
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::direct()
    }
}

impl std::str::FromStr for SolverConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct" | "direct_lu" | "lu" => Ok(Self::direct()),
            "krylov" | "gmres" => Ok(Self::krylov()),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub solution: Vec<T>,
    /// `‖b − Ax‖ / ‖b‖` of the returned solution.
    pub relative_residual: T,
    /// Refinement steps (direct) or GMRES iterations (Krylov).
    pub iterations: usize,
}

pub fn solve<T: Real>(a: &CsrMatrix<T>, b: &[T], cfg: &SolverConfig) -> Result<SolveReport<T>> {
    cfg.validate()?;
    if a.nrows != a.ncols || a.nrows != b.len() {
        return Err(Error::InvalidArgument(format!(
            "system is {}x{} with right-hand side of length {}",
            a.nrows,
            a.ncols,
            b.len()
        )));
    }
    if let Some(p) = a.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("matrix entry {p}"),
        });
    }
    if norm(b) == T::zero() {
        return Ok(SolveReport {
            solution: vec![T::zero(); b.len()],
            relative_residual: T::zero(),
            iterations: 0,
        });
    }
    match *cfg {
        SolverConfig::Direct { tol } => solve_direct(a, b, T::lit(tol)),
        SolverConfig::Krylov { restart, max_iter, tol } => gmres(a, b, restart, max_iter, T::lit(tol)),
    }
}

fn relative_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> (Vec<T>, T) {
    let ax = a.matvec(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &yi)| bi - yi).collect();
    let rel = norm(&r) / norm(b);
    (r, rel)
}

/// Reverse Cuthill–McKee ordering of the symmetrised pattern;
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.nrows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU factors with row pivots, in LAPACK `gbtrf` layout.
struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn factor(a: &CsrMatrix<T>, perm: &[usize]) -> Result<Self> {
        let n = a.nrows;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for &j in a.row(i).0 {
                let (ni, nj) = (inv[i], inv[j]);
                if ni > nj {
                    kl = kl.max(ni - nj);
                } else {
                    ku = ku.max(nj - ni);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![T::zero(); n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let idx = lu.at(inv[i], inv[j]);
                lu.band[idx] += v;
            }
        }
        let scale = a.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::from_count(n.max(1));
        let upper = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.band[lu.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = lu.band[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::Singular { row: perm[k] });
            }
            lu.pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (x, y) = (lu.at(k, j), lu.at(p, j));
                    lu.band.swap(x, y);
                }
            }
            let pivot = lu.band[lu.at(k, k)];
            let row_k = lu.at(k, k + 1);
            let len = last_col - k;
            for i in k + 1..=last_row {
                let ik = lu.at(i, k);
                let l = lu.band[ik] / pivot;
                lu.band[ik] = l;
                if l == T::zero() {
                    continue;
                }
                let row_i = lu.at(i, k + 1);
                for t in 0..len {
                    let u = lu.band[row_k + t];
                    lu.band[row_i + t] -= l * u;
                }
            }
        }
        Ok(lu)
    }

    /// Solves in the permuted numbering, in place.
    fn solve_in_place(&self, x: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.band[self.at(i, k)] * xk;
            }
        }
        let upper = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + upper).min(n - 1) {
                s -= self.band[self.at(k, j)] * x[j];
            }
            x[k] = s / self.band[self.at(k, k)];
        }
    }
}

fn solve_direct<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: T) -> Result<SolveReport<T>> {
    let perm = reverse_cuthill_mckee(a);
    let lu = BandedLu::factor(a, &perm)?;
    log::debug!("banded LU: n = {}, kl = {}, ku = {}", lu.n, lu.kl, lu.ku);
    let apply = |rhs: &[T]| -> Vec<T> {
        let mut y: Vec<T> = perm.iter().map(|&old| rhs[old]).collect();
        lu.solve_in_place(&mut y);
        let mut out = vec![T::zero(); rhs.len()];
        for (new, &old) in perm.iter().enumerate() {
            out[old] = y[new];
        }
        out
    };
    let mut x = apply(b);
    let (mut r, mut rel) = relative_residual(a, &x, b);
    let mut steps = 0;
    while rel > tol && steps < 3 {
        let dx = apply(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        steps += 1;
        (r, rel) = relative_residual(a, &x, b);
    }
    if !rel.is_finite() {
        return Err(Error::NonFinite {
            location: "direct solution".into(),
        });
    }
    if rel > tol {
        return Err(Error::NoConvergence {
            residual: rel.as_f64(),
            iterations: steps,
            history: vec![rel.as_f64()],
        });
    }
    Ok(SolveReport {
        solution: x,
        relative_residual: rel,
        iterations: steps,
    })
}

/// ILU(0) on the pattern of `a`.
struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.nrows;
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let (cols, _) = lu.row(i);
            *d = lu.row_ptr[i] + cols.binary_search(&i).map_err(|_| Error::Singular { row: i })?;
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.col_idx[p]] = p;
            }
            for p in start..end {
                let k = lu.col_idx[p];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                if pivot == T::zero() {
                    return Err(Error::Singular { row: k });
                }
                let l = lu.values[p] / pivot;
                lu.values[p] = l;
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[q];
                    if pos[j] != usize::MAX {
                        let u = lu.values[q];
                        lu.values[pos[j]] -= l * u;
                    }
                }
            }
            for p in start..end {
                pos[lu.col_idx[p]] = usize::MAX;
            }
            if lu.values[diag[i]] == T::zero() {
                return Err(Error::Singular { row: i });
            }
        }
        Ok(Self { lu, diag })
    }

    fn apply(&self, r: &[T]) -> Vec<T> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[p] * y[self.lu.col_idx[p]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[p] * y[self.lu.col_idx[p]];
            }
            y[i] = s / self.lu.values[self.diag[i]];
        }
        y
    }
}

fn gmres<T: Real>(a: &CsrMatrix<T>, b: &[T], restart: usize, max_iter: usize, tol: T) -> Result<SolveReport<T>> {
    let n = b.len();
    let ilu = Ilu0::new(a)?;
    let bnorm = norm(b);
    let mut x = vec![T::zero(); n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (r, rel) = relative_residual(a, &x, b);
        history.push(rel.as_f64());
        if rel <= tol {
            return Ok(SolveReport {
                solution: x,
                relative_residual: rel,
                iterations,
            });
        }
        if iterations >= max_iter || !rel.is_finite() {
            return Err(Error::NoConvergence {
                residual: rel.as_f64(),
                iterations,
                history,
            });
        }
        let beta = norm(&r);
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&ri| ri / beta).collect()];
        let mut h: Vec<Vec<T>> = Vec::new();
        let (mut cs, mut sn) = (Vec::<T>::new(), Vec::<T>::new());
        let mut g = vec![beta];
        let mut inner = 0;
        while inner < restart && iterations < max_iter {
            let z = ilu.apply(&v[inner]);
            let mut w = a.matvec(&z);
            let mut col = vec![T::zero(); inner + 2];
            for _pass in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let hij: T = w.iter().zip(vj).map(|(&a, &b)| a * b).sum();
                    col[j] += hij;
                    for (wi, &vi) in w.iter_mut().zip(vj) {
                        *wi -= hij * vi;
                    }
                }
            }
            let wn = norm(&w);
            col[inner + 1] = wn;
            for j in 0..inner {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = col[inner].hypot(col[inner + 1]);
            let (c, s) = if denom == T::zero() {
                (T::one(), T::zero())
            } else {
                (col[inner] / denom, col[inner + 1] / denom)
            };
            col[inner] = denom;
            col[inner + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            let gi = g[inner];
            g[inner] = c * gi;
            g.push(-s * gi);
            h.push(col);
            inner += 1;
            iterations += 1;
            let est = g[inner].abs() / bnorm;
            if est <= tol * T::lit(0.5) || wn == T::zero() {
                break;
            }
            v.push(w.iter().map(|&wi| wi / wn).collect());
        }
        let mut y = vec![T::zero(); inner];
        for i in (0..inner).rev() {
            let mut s = g[i];
            for j in i + 1..inner {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![T::zero(); n];
        for (yj, vj) in y.iter().zip(&v) {
            for (u, &vi) in update.iter_mut().zip(vj) {
                *u += *yj * vi;
            }
        }
        let dz = ilu.apply(&update);
        for (xi, d) in x.iter_mut().zip(dz) {
            *xi += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.2));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.8));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(4);
        let b = vec![1.0, -2.0, 3.5, 0.25];
        for cfg in [SolverConfig::direct(), SolverConfig::krylov()] {
            let r = solve(&a, &b, &cfg).unwrap();
            assert_eq!(r.solution, b);
        }
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        for cfg in [SolverConfig::direct(), SolverConfig::krylov()] {
            let x = solve(&a, &[3.0, 5.0], &cfg).unwrap().solution;
            let x: Vec<f64> = x;
            assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 1.0]]);
        let x = solve(&a, &[1.0, 5.0, 4.0], &SolverConfig::direct()).unwrap().solution;
        let ax = a.matvec(&x);
        for (l, r) in ax.iter().zip([1.0f64, 5.0, 4.0]) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            solve(&a, &[1.0, 1.0], &SolverConfig::direct()),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn gmres_reports_history_on_failure() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        let cfg = SolverConfig::Krylov {
            restart: 1,
            max_iter: 2,
            tol: 1e-14,
        };
        // ILU(0) is exact on a tridiagonal matrix, so force failure with a
        // perturbed pattern instead.
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..200 {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((i, j, v));
            }
            t.push((i, (i * 7 + 3) % 200, 0.3));
        }
        let a = CsrMatrix::from_triplets(200, 200, t);
        match solve(&a, &b, &cfg) {
            Err(Error::NoConvergence { history, .. }) => assert!(!history.is_empty()),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn direct_and_krylov_agree() {
        let a = laplacian_1d(300);
        let b: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).sin()).collect();
        let x1 = solve(&a, &b, &SolverConfig::direct()).unwrap();
        let x2 = solve(&a, &b, &SolverConfig::krylov()).unwrap();
        assert!(x1.relative_residual <= 1e-10);
        let diff: f64 = x1.solution.iter().zip(&x2.solution).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff / norm(&x1.solution) < 1e-6);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(10);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn bad_config_rejected() {
        let a = CsrMatrix::<f64>::identity(1);
        assert!(solve(&a, &[1.0], &SolverConfig::Direct { tol: 0.0 }).is_err());
        let k = SolverConfig::Krylov {
            restart: 0,
            max_iter: 1,
            tol: 1e-8,
        };
        assert!(solve(&a, &[1.0], &k).is_err());
    }
}
