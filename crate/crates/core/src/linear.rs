//! Linear isomorphisms: the multiplicative Jordan decomposition
//! `T = T_H T_E T_U`, fixed subspaces, the recurrent set
//! `R(T) = fix(T_H) ∩ fix(T_U)`, a brute-force recurrence oracle and the
//! eigenvalue entropy `Σ_{|λ|>1} log |λ|`.
//!
//! The decomposition is built from the complex eigenstructure: eigenvalues
//! are clustered, each cluster's generalized eigenspace is the kernel of
//! `(T - λI)^m`, and the factors act on it as `|λ|`, `λ/|λ|` and `λ^{-1} T`.

use nalgebra::{Complex, ComplexField, DMatrix, RealField};
use serde::Serialize;

use crate::dynamics::SquareMatrix;
use crate::error::{EntropyError, Result};
use crate::scalar::Real;

/// Relative `|det|` below which a matrix counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanConfig {
    /// Eigenvalues closer than this (relative) share a cluster.
    pub cluster_tol: f64,
    /// Widest tolerance tried when the eigenbasis is ill-conditioned.
    pub max_cluster_tol: f64,
    /// Condition number of the eigenbasis that triggers a wider clustering.
    pub max_condition: f64,
    pub invariant_tol: f64,
    /// Powers `E^k`, `k <= power_horizon`, checked for boundedness.
    pub power_horizon: usize,
}

impl Default for JordanConfig {
    fn default() -> Self {
        Self { cluster_tol: 1e-8, max_cluster_tol: 1e-3, max_condition: 1e10, invariant_tol: 1e-9, power_horizon: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(residual: f64, tolerance: f64) -> Self {
        Self { residual, tolerance, passed: residual <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    /// `‖HEU - T‖ / ‖T‖`.
    pub recomposition: Check,
    /// Largest `‖XY - YX‖ / max(1, ‖X‖‖Y‖)` over the three pairs.
    pub commutation: Check,
    /// Spectrum of `H` real and positive, and the product of `H - μI` over
    /// its distinct eigenvalues vanishes.
    pub hyperbolic: Check,
    /// `‖(U - I)^d‖`.
    pub unipotent: Check,
    /// `max_k ‖E^k‖` against `sqrt(d) cond(P)`; the residual is the ratio.
    pub elliptic: Check,
    pub warnings: Vec<String>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        [self.recomposition, self.commutation, self.hyperbolic, self.unipotent, self.elliptic].iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanTriple<T: RealField> {
    pub h: SquareMatrix<T>,
    pub e: SquareMatrix<T>,
    pub u: SquareMatrix<T>,
    /// Cluster centers with multiplicities.
    pub eigenvalues: Vec<(Complex<T>, usize)>,
    /// Columns span the generalized eigenspaces, cluster by cluster.
    pub eigenbasis: DMatrix<Complex<T>>,
    pub cluster_tol: f64,
    pub report: InvariantReport,
}

fn lit<T: RealField>(x: f64) -> T {
    nalgebra::convert(x)
}

fn to_f64<T: RealField>(x: T) -> f64 {
    x.to_subset().unwrap_or(f64::NAN)
}

fn dense<T: RealField + Copy>(m: &SquareMatrix<T>) -> DMatrix<T> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.row_major())
}

fn square<T: RealField + Copy>(m: &DMatrix<T>) -> SquareMatrix<T> {
    SquareMatrix::from_fn(m.nrows(), |i, j| m[(i, j)])
}

fn fro<T: RealField + Copy>(m: &DMatrix<T>) -> f64 {
    to_f64(m.norm())
}

fn check_invertible<T: RealField + Copy>(a: &DMatrix<T>) -> Result<()> {
    let d = a.nrows();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(EntropyError::domain("matrix has non-finite entries"));
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(to_f64(x.abs())));
    let det = to_f64(a.clone().determinant()).abs();
    if scale == 0.0 || det <= SINGULAR_TOL * scale.powi(d as i32) {
        return Err(EntropyError::domain(format!("matrix is not invertible (|det| = {det:e})")));
    }
    Ok(())
}

/// Single-linkage clusters of eigenvalues within `tol * max(1, |λ|)`.
fn cluster<T: RealField + Copy>(eig: &[Complex<T>], tol: f64) -> Vec<(Complex<T>, usize)> {
    let n = eig.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let gap = to_f64((eig[i] - eig[j]).modulus());
            let scale = 1f64.max(to_f64(eig[i].modulus())).max(to_f64(eig[j].modulus()));
            if gap <= tol * scale {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out: Vec<(usize, Complex<T>, usize)> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        match out.iter_mut().find(|c| c.0 == r) {
            Some(c) => {
                c.1 += eig[i];
                c.2 += 1;
            }
            None => out.push((r, eig[i], 1)),
        }
    }
    out.into_iter().map(|(_, s, m)| (s.unscale(lit(m as f64)), m)).collect()
}

/// Right singular vectors for the `k` smallest singular values.
fn kernel_basis<T: RealField + Copy>(m: DMatrix<Complex<T>>, k: usize) -> Option<Vec<nalgebra::DVector<Complex<T>>>> {
    let svd = m.svd(false, true);
    let vt = svd.v_t?;
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    Some(idx[..k].iter().map(|&i| vt.row(i).adjoint()).collect())
}

fn condition<T: RealField + Copy>(p: &DMatrix<Complex<T>>) -> f64 {
    let s = p.clone().singular_values();
    let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(to_f64(x)), hi.max(to_f64(x))));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Generalized eigenbasis for the clustering at `tol`, with its condition.
fn eigenbasis<T: RealField + Copy>(
    a: &DMatrix<T>,
    clusters: &[(Complex<T>, usize)],
) -> Option<(DMatrix<Complex<T>>, f64)> {
    let d = a.nrows();
    let ac = a.map(|x| Complex::new(x, T::zero()));
    let mut cols = Vec::with_capacity(d);
    for &(c, m) in clusters {
        let shifted = &ac - DMatrix::<Complex<T>>::identity(d, d) * c;
        let mut power = shifted.clone();
        for _ in 1..m {
            power = &power * &shifted;
        }
        cols.extend(kernel_basis(power, m)?);
    }
    let p = DMatrix::from_columns(&cols);
    let cond = condition(&p);
    Some((p, cond))
}

/// `T = H E U` with commuting hyperbolic, elliptic and unipotent factors.
pub fn jordan_multiplicative<T: RealField + Copy>(t: &SquareMatrix<T>, cfg: &JordanConfig) -> Result<JordanTriple<T>> {
    let a = dense(t);
    let d = a.nrows();
    if d == 0 {
        return Err(EntropyError::domain("empty matrix"));
    }
    check_invertible(&a)?;
    let eig: Vec<Complex<T>> = a.clone().complex_eigenvalues().iter().copied().collect();
    let mut warnings = Vec::new();
    let min_gap = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .map(|(i, j)| to_f64((eig[i] - eig[j]).modulus()))
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min_gap < cfg.cluster_tol {
        warnings.push(format!("distinct computed eigenvalues only {min_gap:e} apart were merged"));
    }
    let mut tol = cfg.cluster_tol;
    let (clusters, p, cond) = loop {
        let clusters = cluster(&eig, tol);
        match eigenbasis(&a, &clusters) {
            Some((p, cond)) if cond <= cfg.max_condition || tol >= cfg.max_cluster_tol => break (clusters, p, cond),
            _ if tol < cfg.max_cluster_tol => {
                warnings.push(format!("eigenbasis ill-conditioned at cluster tolerance {tol:e}; widening"));
                tol = (tol * 100.0).min(cfg.max_cluster_tol);
            }
            _ => return Err(EntropyError::domain("generalized eigenbasis could not be computed")),
        }
    };
    if cond > 1e6 {
        warnings.push(format!("eigenbasis condition number {cond:e}"));
    }
    let p_inv = p.clone().try_inverse().ok_or_else(|| EntropyError::domain("generalized eigenbasis is singular"))?;
    let diag = |f: &dyn Fn(Complex<T>) -> Complex<T>| {
        let values: Vec<Complex<T>> = clusters.iter().flat_map(|&(c, m)| std::iter::repeat_n(f(c), m)).collect();
        &p * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values)) * &p_inv
    };
    let real_part = |m: DMatrix<Complex<T>>, warnings: &mut Vec<String>, name: &str| {
        let im = m.iter().fold(0.0f64, |acc, z| acc.max(to_f64(z.im.abs())));
        if im > 1e-9 {
            warnings.push(format!("{name} has imaginary residue {im:e}"));
        }
        m.map(|z| z.re)
    };
    let h = real_part(diag(&|c| Complex::new(c.modulus(), T::zero())), &mut warnings, "H");
    let e = real_part(diag(&|c| c.unscale(c.modulus())), &mut warnings, "E");
    let s_inv = real_part(diag(&|c| Complex::new(T::one(), T::zero()) / c), &mut warnings, "S^-1");
    let u = s_inv * &a;
    let report = invariant_report(&a, &h, &e, &u, cond, cfg, warnings);
    Ok(JordanTriple {
        h: square(&h),
        e: square(&e),
        u: square(&u),
        eigenvalues: clusters,
        eigenbasis: p,
        cluster_tol: tol,
        report,
    })
}

fn invariant_report<T: RealField + Copy>(
    a: &DMatrix<T>,
    h: &DMatrix<T>,
    e: &DMatrix<T>,
    u: &DMatrix<T>,
    cond: f64,
    cfg: &JordanConfig,
    warnings: Vec<String>,
) -> InvariantReport {
    let d = a.nrows();
    let tol = cfg.invariant_tol;
    let id = DMatrix::<T>::identity(d, d);
    let recomposition = Check::new(fro(&(h * e * u - a)) / fro(a), tol);
    let comm = |x: &DMatrix<T>, y: &DMatrix<T>| fro(&(x * y - y * x)) / 1f64.max(fro(x) * fro(y));
    let commutation = Check::new(comm(h, e).max(comm(h, u)).max(comm(e, u)), tol);
    let unipotent = {
        let n = u - &id;
        let mut p = n.clone();
        for _ in 1..d {
            p = &p * &n;
        }
        Check::new(fro(&p), tol)
    };
    InvariantReport {
        recomposition,
        commutation,
        hyperbolic: hyperbolic_check(h, tol),
        unipotent,
        elliptic: elliptic_check(e, cond, cfg.power_horizon, tol),
        warnings,
    }
}

/// Real positive spectrum and a vanishing product over distinct eigenvalues,
/// computed from `H` alone.
fn hyperbolic_check<T: RealField + Copy>(h: &DMatrix<T>, tol: f64) -> Check {
    let d = h.nrows();
    let eig: Vec<Complex<T>> = h.clone().complex_eigenvalues().iter().copied().collect();
    let scale = 1f64.max(fro(h));
    let worst_im = eig.iter().fold(0.0f64, |m, z| m.max(to_f64(z.im.abs())));
    let worst_re = eig.iter().fold(f64::INFINITY, |m, z| m.min(to_f64(z.re)));
    if worst_re <= 0.0 {
        return Check::new(f64::INFINITY, tol);
    }
    let distinct = cluster(&eig, 1e-6);
    let mut prod = DMatrix::<T>::identity(d, d);
    let mut norm = 1.0;
    for (mu, _) in &distinct {
        prod *= h - DMatrix::<T>::identity(d, d) * mu.re;
        norm *= scale + to_f64(mu.re.abs());
    }
    Check::new((fro(&prod) / norm).max(worst_im / scale), tol)
}

/// `‖E^k‖_F <= sqrt(d) cond(P)` for `k <= horizon`; the residual is the
/// excess of the largest power over that bound, relative to it.
fn elliptic_check<T: RealField + Copy>(e: &DMatrix<T>, cond: f64, horizon: usize, tol: f64) -> Check {
    let d = e.nrows();
    let bound = (d as f64).sqrt() * cond;
    let mut p = DMatrix::<T>::identity(d, d);
    let mut worst = fro(&p);
    for _ in 0..horizon {
        p = &p * e;
        worst = worst.max(fro(&p));
    }
    let excess = ((worst - bound) / bound).max(0.0);
    Check::new(if worst.is_finite() { excess } else { f64::INFINITY }, tol.max(1e-6))
}

/// Orthonormal basis, stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subspace<T> {
    pub ambient: usize,
    pub basis: Vec<Vec<T>>,
}

impl<T: RealField + Copy> Subspace<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Largest `|<b_i, b_j> - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let dot = a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
                let want = if i == j { T::one() } else { T::zero() };
                worst = worst.max(to_f64((dot - want).abs()));
            }
        }
        worst
    }

    /// Orthogonal projection onto the complement.
    pub fn complement_component(&self, x: &[T]) -> Vec<T> {
        let mut r = x.to_vec();
        for b in &self.basis {
            let dot = b.iter().zip(x).fold(T::zero(), |s, (&p, &q)| s + p * q);
            for (ri, &bi) in r.iter_mut().zip(b) {
                *ri -= dot * bi;
            }
        }
        r
    }
}

/// Kernel of a (possibly tall) matrix at singular-value threshold
/// `1e-9 * max(1, σ_max)`.
fn kernel<T: RealField + Copy>(m: DMatrix<T>) -> Subspace<T> {
    let cols = m.ncols();
    // Pad tall or short matrices to at least square so that V is complete.
    let m = if m.nrows() < cols { m.resize_vertically(cols, T::zero()) } else { m };
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(to_f64(s)));
    let thr = 1e-9 * smax.max(1.0);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| to_f64(svd.singular_values[i]) <= thr).collect();
    idx.sort_unstable();
    Subspace { ambient: cols, basis: idx.into_iter().map(|i| vt.row(i).iter().copied().collect()).collect() }
}

/// `ker(M - I)`.
pub fn fixed_subspace<T: RealField + Copy>(m: &SquareMatrix<T>) -> Subspace<T> {
    let a = dense(m);
    let d = a.nrows();
    kernel(a - DMatrix::identity(d, d))
}

/// `fix(T_H) ∩ fix(T_U)`, the kernel of the stacked `[H - I; U - I]`.
pub fn recurrent_set<T: RealField + Copy>(t: &SquareMatrix<T>, cfg: &JordanConfig) -> Result<Subspace<T>> {
    let j = jordan_multiplicative(t, cfg)?;
    let d = t.dim();
    let id = DMatrix::<T>::identity(d, d);
    let top = dense(&j.h) - &id;
    let bottom = dense(&j.u) - &id;
    let mut stacked = DMatrix::<T>::zeros(2 * d, d);
    stacked.rows_mut(0, d).copy_from(&top);
    stacked.rows_mut(d, d).copy_from(&bottom);
    Ok(kernel(stacked))
}

/// Eigenvalue moduli above this count as expanding.
pub const EXPANDING_TOL: f64 = 1e-12;

/// `Σ log |λ|` over eigenvalues with `|λ| > 1`, with algebraic multiplicity.
pub fn classical_entropy<T: RealField + Copy>(t: &SquareMatrix<T>) -> Result<T> {
    let a = dense(t);
    check_invertible(&a)?;
    let mut sum = T::zero();
    for z in a.complex_eigenvalues().iter() {
        let r = z.modulus();
        if to_f64(r) > 1.0 + EXPANDING_TOL {
            sum += r.ln();
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecurrenceOutcome {
    pub recurrent: bool,
    /// First `k` with `‖T^k x - x‖ < ε`.
    pub return_time: Option<usize>,
    /// The orbit left the floating-point range.
    pub escaped: bool,
}

/// Whether `‖T^k x - x‖ < ε` for some `1 <= k <= n_max`.
pub fn recurrence_oracle<T: Real>(t: &SquareMatrix<T>, x: &[T], eps: T, n_max: usize) -> Result<RecurrenceOutcome> {
    if !(eps > T::zero()) {
        return Err(EntropyError::domain("eps must be positive"));
    }
    if x.len() != t.dim() {
        return Err(EntropyError::domain("point dimension does not match the matrix"));
    }
    let mut y = x.to_vec();
    for k in 1..=n_max {
        y = t.mul_vec(&y);
        if y.iter().any(|v| !v.is_finite()) {
            return Ok(RecurrenceOutcome { recurrent: false, return_time: None, escaped: true });
        }
        let dist = y.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b)).sqrt();
        if dist < eps {
            return Ok(RecurrenceOutcome { recurrent: true, return_time: Some(k), escaped: false });
        }
    }
    Ok(RecurrenceOutcome { recurrent: false, return_time: None, escaped: false })
}
