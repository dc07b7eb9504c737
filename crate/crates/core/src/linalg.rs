//! Tolerance-aware dense kernels shared by the whole pipeline.
//!
//! Every rank or cluster decision here is relative: thresholds are a
//! tolerance times the largest singular value of the operand. Backed by
//! nalgebra for the raw factorizations (SVD, Schur, symmetric eigen).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<Complex64>;

const SVD_MAX_ITER: usize = 4096;

/// Largest singular value; 0 for an empty matrix.
pub fn spec_norm_r(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn spec_norm_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn re_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn im_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

pub fn conj_mat(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// Horizontal concatenation. Blocks must share the row count.
pub fn hcat_c(blocks: &[&CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        assert!(b.ncols() == 0 || b.nrows() == rows, "row mismatch in hcat");
        out.view_mut((0, off), (b.nrows(), b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

pub fn hcat_r(blocks: &[&RMat]) -> RMat {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = RMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        assert!(b.ncols() == 0 || b.nrows() == rows, "row mismatch in hcat");
        out.view_mut((0, off), (b.nrows(), b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

fn svd_c(m: &CMat) -> Result<nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
    nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("complex SVD did not converge".into()))
}

fn svd_r(m: &RMat) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("real SVD did not converge".into()))
}

/// Orthonormal basis (unitary columns) of the column space, rank decided
/// at tau_rank relative to the largest singular value.
pub fn orthonormal_cols_c(m: &CMat, tol: &Tolerances) -> Result<CMat> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(CMat::zeros(m.nrows(), 0));
    }
    let svd = svd_c(m)?;
    let u = svd.u.as_ref().expect("u requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(CMat::zeros(m.nrows(), 0));
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol.tau_rank * smax)
        .collect();
    let mut out = CMat::zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    Ok(out)
}

pub fn orthonormal_cols_r(m: &RMat, tol: &Tolerances) -> Result<RMat> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(RMat::zeros(m.nrows(), 0));
    }
    let svd = svd_r(m)?;
    let u = svd.u.as_ref().expect("u requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(RMat::zeros(m.nrows(), 0));
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol.tau_rank * smax)
        .collect();
    let mut out = RMat::zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    Ok(out)
}

/// A subspace of C^p held as a matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: usize,
    basis: CMat,
}

impl Subspace {
    pub fn empty(ambient: usize) -> Self {
        Subspace { ambient, basis: CMat::zeros(ambient, 0) }
    }

    /// Orthonormalize the given spanning columns, truncating at tau_rank.
    pub fn from_cols(cols: &CMat, tol: &Tolerances) -> Result<Self> {
        let basis = orthonormal_cols_c(cols, tol)?;
        Ok(Subspace { ambient: cols.nrows(), basis })
    }

    /// Like from_cols but the caller knows the dimension; a mismatch means
    /// the spanning set was numerically degenerate.
    pub fn from_cols_exact(cols: &CMat, dim: usize, tol: &Tolerances) -> Result<Self> {
        let s = Self::from_cols(cols, tol)?;
        if s.dim() != dim {
            return Err(Error::SpectralInconsistency(format!(
                "subspace rank {} differs from expected dimension {}",
                s.dim(),
                dim
            )));
        }
        Ok(s)
    }

    pub fn from_orthonormal(basis: CMat) -> Self {
        Subspace { ambient: basis.nrows(), basis }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn conjugate(&self) -> Subspace {
        Subspace { ambient: self.ambient, basis: conj_mat(&self.basis) }
    }

    fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// Spectral norm of the projector difference; 0 for equal spans,
    /// 1 when one space has a direction orthogonal to the other.
    pub fn distance_to(&self, other: &Subspace) -> f64 {
        assert_eq!(self.ambient, other.ambient, "subspace ambient mismatch");
        spec_norm_c(&(self.projector() - other.projector()))
    }

    pub fn is_conjugation_closed(&self, tol: &Tolerances) -> bool {
        self.distance_to(&self.conjugate()) <= tol.tau_verify.sqrt()
    }

    /// Real orthonormal basis of the real points of a conjugation-closed
    /// subspace. Fails if the space is not closed under conjugation.
    pub fn real_form(&self, tol: &Tolerances) -> Result<RMat> {
        let stacked = hcat_r(&[&re_part(&self.basis), &im_part(&self.basis)]);
        let basis = orthonormal_cols_r(&stacked, tol)?;
        if basis.ncols() != self.dim() {
            return Err(Error::SpectralInconsistency(format!(
                "real form of a {}-dim subspace came out {}-dimensional; \
                 space is not conjugation-closed at the working tolerance",
                self.dim(),
                basis.ncols()
            )));
        }
        Ok(basis)
    }
}

/// Orthonormal basis of the numerical kernel: right singular directions
/// whose singular value is at most tau_rank times the largest one.
pub fn kernel_basis(m: &CMat, tol: &Tolerances) -> Result<Subspace> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if m.ncols() == 0 {
        return Ok(Subspace::empty(0));
    }
    if m.nrows() == 0 {
        return Ok(Subspace::from_orthonormal(CMat::identity(m.ncols(), m.ncols())));
    }
    let svd = svd_c(m)?;
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol.tau_rank * smax)
        .collect();
    // Directions outside the thin SVD (ncols > nrows) are exact kernel.
    let v = v_t.adjoint();
    let mut basis = CMat::zeros(m.ncols(), 0);
    if smax == 0.0 {
        return Ok(Subspace::from_orthonormal(CMat::identity(m.ncols(), m.ncols())));
    }
    cols.sort_unstable();
    let extra = m.ncols().saturating_sub(svd.singular_values.len());
    if extra > 0 {
        // Complete V to a full unitary by orthogonalizing the complement.
        let mut full = CMat::identity(m.ncols(), m.ncols());
        full.view_mut((0, 0), (m.ncols(), v.ncols())).copy_from(&v);
        let q = orthonormal_cols_c(&full, tol)?;
        debug_assert_eq!(q.ncols(), m.ncols());
        let mut sel = CMat::zeros(m.ncols(), cols.len() + extra);
        for (k, &i) in cols.iter().enumerate() {
            sel.set_column(k, &v.column(i));
        }
        // The completion columns are orthogonal to the row space, hence kernel.
        let proj = &v * v.adjoint();
        let mut k = cols.len();
        for j in 0..q.ncols() {
            if k >= sel.ncols() {
                break;
            }
            let c = q.column(j).clone_owned();
            let r = &c - &proj * &c;
            if r.norm() > 0.5 {
                sel.set_column(k, &(r.clone() / Complex64::new(r.norm(), 0.0)));
                k += 1;
            }
        }
        basis = orthonormal_cols_c(&sel, tol)?;
    } else {
        let mut sel = CMat::zeros(m.ncols(), cols.len());
        for (k, &i) in cols.iter().enumerate() {
            sel.set_column(k, &v.column(i));
        }
        if !cols.is_empty() {
            basis = sel;
        }
    }
    Ok(Subspace::from_orthonormal(basis))
}

pub fn kernel_basis_r(m: &RMat, tol: &Tolerances) -> Result<Subspace> {
    kernel_basis(&complexify(m), tol)
}

/// Clustered eigenvalues of a real square matrix: single-linkage merge at
/// radius tau_eig times the largest singular value, multiplicity-weighted
/// means, then exact conjugate symmetrization. Sorted by (re, im).
pub fn eig_clusters(a: &RMat, tol: &Tolerances) -> Result<Vec<(Complex64, usize)>> {
    assert!(a.is_square(), "eig_clusters needs a square matrix");
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let eigs: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    let scale = spec_norm_r(a);
    let radius = tol.tau_eig * scale;

    // Single linkage via union-find on the complete graph.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<(Complex64, usize)> = groups
        .values()
        .map(|members| {
            let mut sorted = members.clone();
            sorted.sort_by(|&a, &b| {
                (eigs[a].re, eigs[a].im)
                    .partial_cmp(&(eigs[b].re, eigs[b].im))
                    .unwrap()
            });
            let sum: Complex64 = sorted.iter().map(|&i| eigs[i]).sum();
            (sum / sorted.len() as f64, sorted.len())
        })
        .collect();

    // Conjugate symmetrization: values must occur in exact conjugate pairs.
    let match_radius = 4.0 * radius + 16.0 * f64::EPSILON * scale;
    let m = clusters.len();
    let mut paired = vec![false; m];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        (clusters[i].0.re, clusters[i].0.im)
            .partial_cmp(&(clusters[j].0.re, clusters[j].0.im))
            .unwrap()
    });
    for &i in &order {
        if paired[i] {
            continue;
        }
        let v = clusters[i].0;
        if 2.0 * v.im.abs() <= match_radius {
            clusters[i].0 = Complex64::new(v.re, 0.0);
            paired[i] = true;
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in &order {
            if j == i || paired[j] || clusters[j].1 != clusters[i].1 {
                continue;
            }
            let d = (clusters[j].0 - v.conj()).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= match_radius => {
                let sym = (v + clusters[j].0.conj()) * 0.5;
                clusters[i].0 = sym;
                clusters[j].0 = sym.conj();
                paired[i] = true;
                paired[j] = true;
            }
            _ => {
                return Err(Error::NumericalFailure(format!(
                    "conjugate symmetrization failed near eigenvalue {v}"
                )));
            }
        }
    }

    clusters.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    Ok(clusters)
}

/// Signature (p, q) of a real symmetric form. Eigenvalues inside the
/// tau_rank dead zone are an error: the form is degenerate there.
pub fn signature(g: &RMat, tol: &Tolerances) -> Result<(usize, usize)> {
    assert!(g.is_square(), "signature needs a square matrix");
    if g.nrows() == 0 {
        return Ok((0, 0));
    }
    let scale = spec_norm_r(g);
    if spec_norm_r(&(g - g.transpose())) > tol.tau_verify * scale.max(1.0) {
        return Err(Error::InvalidInput("signature of a non-symmetric matrix".into()));
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let emax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if emax == 0.0 {
        return Err(Error::DegenerateForm { context: "zero symmetric form".into(), value: 0.0 });
    }
    let (mut p, mut q) = (0, 0);
    for &v in eig.eigenvalues.iter() {
        if v > tol.tau_rank * emax {
            p += 1;
        } else if v < -tol.tau_rank * emax {
            q += 1;
        } else {
            return Err(Error::DegenerateForm {
                context: "symmetric form has an eigenvalue inside the rank dead zone".into(),
                value: v,
            });
        }
    }
    Ok((p, q))
}

/// Signature (p, q) of a hermitian form, same dead-zone contract as the
/// real version.
pub fn signature_c(h: &CMat, tol: &Tolerances) -> Result<(usize, usize)> {
    assert!(h.is_square(), "signature needs a square matrix");
    if h.nrows() == 0 {
        return Ok((0, 0));
    }
    let scale = spec_norm_c(h);
    if spec_norm_c(&(h - h.adjoint())) > tol.tau_verify * scale.max(1.0) {
        return Err(Error::InvalidInput("signature of a non-hermitian matrix".into()));
    }
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let emax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if emax == 0.0 {
        return Err(Error::DegenerateForm { context: "zero hermitian form".into(), value: 0.0 });
    }
    let (mut p, mut q) = (0, 0);
    for &v in eig.eigenvalues.iter() {
        if v > tol.tau_rank * emax {
            p += 1;
        } else if v < -tol.tau_rank * emax {
            q += 1;
        } else {
            return Err(Error::DegenerateForm {
                context: "hermitian form has an eigenvalue inside the rank dead zone".into(),
                value: v,
            });
        }
    }
    Ok((p, q))
}

/// Basis vectors normalized against an indefinite hermitian pairing,
/// each with its sign h(u, u) = +-1.
#[derive(Debug, Clone)]
pub struct SignedBasis {
    pub basis: CMat,
    pub signs: Vec<i8>,
}

impl SignedBasis {
    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn positives(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0).count()
    }
}

/// Signed Gram-Schmidt for an indefinite hermitian pairing h(u, w) = u* H w.
///
/// Columns are processed in input order (so well-behaved inputs reproduce
/// classical Gram-Schmidt). A column whose projected self-pairing is too
/// small to pivot on is combined with a later column (v+w, v-w, v+iw or
/// v-iw, whichever has the largest self-pairing); if no combination works
/// the restricted pairing is degenerate. Output columns are sorted with all
/// +1 signs first, preserving relative order.
pub fn hermitian_orthonormalize(cols: &CMat, h: &CMat, tol: &Tolerances) -> Result<SignedBasis> {
    assert_eq!(cols.nrows(), h.nrows(), "ambient mismatch");
    assert!(h.is_square(), "pairing matrix must be square");
    let hscale = spec_norm_c(h);
    if spec_norm_c(&(h - h.adjoint())) > tol.tau_verify * hscale.max(1.0) {
        return Err(Error::InvalidInput("pairing matrix is not hermitian".into()));
    }
    let d = cols.ncols();
    if d == 0 {
        return Ok(SignedBasis { basis: CMat::zeros(cols.nrows(), 0), signs: Vec::new() });
    }

    let pair = |u: &CVec, w: &CVec| -> Complex64 { (u.adjoint() * h * w)[(0, 0)] };

    // Working copies, h-projected against every accepted vector as we go.
    let mut work: Vec<CVec> = (0..d).map(|j| cols.column(j).clone_owned()).collect();
    let mut accepted: Vec<CVec> = Vec::with_capacity(d);
    let mut signs: Vec<i8> = Vec::with_capacity(d);

    // Pivot acceptance threshold, relative to the pairing scale. Smaller
    // projected self-pairings trigger the combination fallback.
    let stall = 1e-6 * hscale.max(f64::MIN_POSITIVE);
    let dead = tol.tau_rank.sqrt() * hscale;

    let project = |v: &CVec, accepted: &[CVec], signs: &[i8]| -> CVec {
        let mut out = v.clone();
        // Two passes of subtraction keep orthogonality at roundoff level.
        for _ in 0..2 {
            for (u, &s) in accepted.iter().zip(signs) {
                let c = pair(u, &out) * (s as f64);
                out -= u * c;
            }
        }
        out
    };

    let mut queue: std::collections::VecDeque<CVec> = work.drain(..).collect();
    while let Some(raw) = queue.pop_front() {
        let v = project(&raw, &accepted, &signs);
        let nv = v.norm();
        if nv <= 1e3 * f64::EPSILON * raw.norm().max(1.0) {
            return Err(Error::NumericalFailure(
                "hermitian_orthonormalize: dependent column".into(),
            ));
        }
        let v = v / Complex64::new(nv, 0.0);
        let hvv = pair(&v, &v).re;
        if hvv.abs() > stall {
            let s: i8 = if hvv > 0.0 { 1 } else { -1 };
            let u = &v / Complex64::new(hvv.abs().sqrt(), 0.0);
            accepted.push(u);
            signs.push(s);
            continue;
        }
        // Stalled on a near-isotropic vector: combine with a later column.
        // The pair {v, w} is replaced by {v + c w, v - c w}, which spans the
        // same plane, so the accepted count still matches the input count.
        let mut best: Option<(usize, Complex64, f64, CVec)> = None;
        for (k, w_raw) in queue.iter().enumerate() {
            let w = project(w_raw, &accepted, &signs);
            let nw = w.norm();
            if nw <= 1e3 * f64::EPSILON * w_raw.norm().max(1.0) {
                continue;
            }
            let w = w / Complex64::new(nw, 0.0);
            let hvw = pair(&v, &w);
            let hww = pair(&w, &w).re;
            for (a, b) in [
                (1.0, 0.0),
                (-1.0, 0.0),
                (0.0, 1.0),
                (0.0, -1.0),
            ] {
                // self-pairing of v + (a + ib) w
                let coef = Complex64::new(a, b);
                let val = hvv + hww + 2.0 * (coef * hvw).re;
                if best.as_ref().is_none_or(|&(_, _, bv, _)| val.abs() > bv.abs()) {
                    best = Some((k, coef, val, w.clone()));
                }
            }
        }
        match best {
            Some((k, coef, val, w)) if val.abs() > dead => {
                queue.remove(k);
                let cand = &v + &w * coef;
                let nc = cand.norm();
                let cand = cand / Complex64::new(nc, 0.0);
                let hcc = pair(&cand, &cand).re;
                if hcc.abs() <= dead {
                    return Err(Error::DegenerateForm {
                        context: "hermitian pairing degenerate on the span".into(),
                        value: hcc,
                    });
                }
                let s: i8 = if hcc > 0.0 { 1 } else { -1 };
                let u = &cand / Complex64::new(hcc.abs().sqrt(), 0.0);
                accepted.push(u);
                signs.push(s);
                queue.push_back(&v - &w * coef);
                continue;
            }
            _ => {
                return Err(Error::DegenerateForm {
                    context: "hermitian pairing degenerate on the span".into(),
                    value: hvv,
                });
            }
        }
    }

    if accepted.len() != d {
        return Err(Error::InternalInconsistency(format!(
            "hermitian_orthonormalize produced {} of {} vectors",
            accepted.len(),
            d
        )));
    }

    // Refinement sweep. The combination fallback can cost several digits of
    // orthogonality through intermediate swell; one more round of projection
    // and renormalization brings the Gram matrix back to roundoff level.
    for k in 0..d {
        let mut v = accepted[k].clone();
        for _ in 0..2 {
            for j in 0..k {
                let c = pair(&accepted[j], &v) * (signs[j] as f64);
                v -= &accepted[j] * c;
            }
        }
        let hvv = pair(&v, &v).re;
        if hvv.abs() <= dead || (hvv > 0.0) != (signs[k] > 0) {
            return Err(Error::DegenerateForm {
                context: "signed basis collapsed under refinement".into(),
                value: hvv,
            });
        }
        accepted[k] = &v / Complex64::new(hvv.abs().sqrt(), 0.0);
    }

    // Stable sort: +1 blocks first.
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by_key(|&i| if signs[i] > 0 { 0 } else { 1 });
    let mut basis = CMat::zeros(cols.nrows(), d);
    let mut out_signs = Vec::with_capacity(d);
    for (k, &i) in idx.iter().enumerate() {
        basis.set_column(k, &accepted[i]);
        out_signs.push(signs[i]);
    }

    // The Gram matrix must reconstruct diag(signs).
    let gram = basis.adjoint() * h * &basis;
    let want = CMat::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(out_signs[i] as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let resid = spec_norm_c(&(&gram - &want));
    if resid > 1e4 * tol.tau_verify {
        return Err(Error::DegenerateForm {
            context: "signed basis failed Gram reconstruction".into(),
            value: resid,
        });
    }

    Ok(SignedBasis { basis, signs: out_signs })
}

/// k-th power by repeated multiplication (k is small: chain depths).
pub fn cmat_pow(m: &CMat, k: usize) -> CMat {
    let n = m.nrows();
    let mut acc = CMat::identity(n, n);
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

pub fn try_inverse_c(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular matrix inversion".into()))
}

pub fn try_inverse_r(m: &RMat) -> Result<RMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular matrix inversion".into()))
}

/// Solve M X = B for complex square M.
pub fn solve_c(m: &CMat, b: &CMat) -> Result<CMat> {
    m.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::NumericalFailure("singular complex solve".into()))
}

pub fn solve_r(m: &RMat, b: &RMat) -> Result<RMat> {
    m.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::NumericalFailure("singular real solve".into()))
}

/// exp(M) by scaling and squaring with a Taylor tail; fine for the
/// well-scaled generators used in stabilizer construction.
pub fn expm(m: &RMat) -> RMat {
    let n = m.nrows();
    let norm = spec_norm_r(m);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = m / 2f64.powi(s as i32);
    let mut term = RMat::identity(n, n);
    let mut acc = RMat::identity(n, n);
    for k in 1..64 {
        term = &term * &a / k as f64;
        acc += &term;
        if spec_norm_r(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

/// X^{-1/2} for real X near the identity, by the Newton iteration
/// z <- z (3 I - X z^2) / 2. All iterates are polynomials in X, so the
/// result commutes with anything commuting with X.
pub fn inv_sqrt_near_identity(x: &RMat, tol: &Tolerances) -> Result<RMat> {
    let n = x.nrows();
    let id = RMat::identity(n, n);
    if spec_norm_r(&(x - &id)) >= 1.0 {
        return Err(Error::NumericalFailure(
            "inverse square root: matrix too far from identity".into(),
        ));
    }
    let mut z = id.clone();
    for _ in 0..60 {
        let zz = &z * &z;
        let resid = spec_norm_r(&(x * &zz - &id));
        if resid <= tol.tau_verify * 1e-2 {
            return Ok(z);
        }
        z = &z * (&id * 3.0 - x * &zz) * 0.5;
    }
    let zz = &z * &z;
    let resid = spec_norm_r(&(x * &zz - &id));
    if resid <= tol.tau_verify {
        Ok(z)
    } else {
        Err(Error::NumericalFailure(format!(
            "inverse square root stalled at residual {resid:.3e}"
        )))
    }
}
