//! Spectral analysis of the structure operator A.
//!
//! Because A is g-skew, its spectrum is symmetric under both negation and
//! conjugation. Cluster values are symmetrized to make the orbit structure
//! {alpha, conj(alpha), -alpha, -conj(alpha)} exact in floating point, and
//! conjugate eigenspaces are stored as exact conjugates of each other, so
//! everything downstream can rely on those identities literally.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, Subspace};
use crate::structures::Mode;
use crate::tol::Tolerances;

/// One eigenvalue cluster with its generalized eigenspace
/// D_alpha = ker (A - alpha I)^chain_depth; dim is the algebraic
/// multiplicity, which always equals the space dimension.
#[derive(Debug, Clone)]
pub struct EigCluster {
    pub alpha: Complex64,
    pub dim: usize,
    pub chain_depth: usize,
    pub space: Subspace,
}

/// Clusters plus the exact pairing structure of the spectrum.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub scale: f64,
    pub clusters: Vec<EigCluster>,
    /// conj_partner[i] = j with alpha_j = conj(alpha_i), exactly.
    pub conj_partner: Vec<usize>,
    /// neg_partner[i] = j with alpha_j = -alpha_i, exactly.
    pub neg_partner: Vec<usize>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.clusters.iter().map(|c| c.dim).sum()
    }

    pub fn cluster_of(&self, alpha: Complex64) -> Option<usize> {
        self.clusters.iter().position(|c| c.alpha == alpha)
    }

    /// Index pairs (i, j) with alpha_j = conj(alpha_i), i <= j.
    pub fn conjugation_pairs(&self) -> Vec<(usize, usize)> {
        self.conj_partner
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i <= j)
            .map(|(i, &j)| (i, j))
            .collect()
    }

    /// Index pairs (i, j) with alpha_j = -alpha_i, i <= j.
    pub fn negation_pairs(&self) -> Vec<(usize, usize)> {
        self.neg_partner
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i <= j)
            .map(|(i, &j)| (i, j))
            .collect()
    }
}

/// Exact negation symmetrization on top of the conjugate-exact cluster
/// values from eig_clusters. Returns values and, per index, the negation
/// partner.
fn symmetrize_orbits(
    vals: &mut [Complex64],
    mults: &[usize],
    radius: f64,
) -> Result<Vec<usize>> {
    let m = vals.len();
    let mut neg = vec![usize::MAX; m];
    let mut done = vec![false; m];
    let nearest = |vals: &[Complex64], target: Complex64, skip_done: &[bool]| -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in vals.iter().enumerate() {
            if skip_done[j] {
                continue;
            }
            let d = (v - target).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best
    };
    for i in 0..m {
        if done[i] {
            continue;
        }
        let a = vals[i];
        let (jn, dn) = nearest(vals, -a, &done).expect("nonempty");
        if dn > radius {
            return Err(Error::SpectralInconsistency(format!(
                "spectrum is not symmetric under negation near {a}"
            )));
        }
        if jn == i {
            // Cluster at zero.
            vals[i] = Complex64::new(0.0, 0.0);
            neg[i] = i;
            done[i] = true;
            continue;
        }
        if mults[jn] != mults[i] {
            return Err(Error::SpectralInconsistency(format!(
                "negation partners {a} and {} have multiplicities {} and {}",
                vals[jn], mults[i], mults[jn]
            )));
        }
        if a.im == 0.0 {
            // Real pair {r, -r}.
            let r = (a.re - vals[jn].re) * 0.5;
            vals[i] = Complex64::new(r, 0.0);
            vals[jn] = Complex64::new(-r, 0.0);
            neg[i] = jn;
            neg[jn] = i;
            done[i] = true;
            done[jn] = true;
            continue;
        }
        let (jc, dc) = nearest(vals, a.conj(), &done).expect("nonempty");
        if dc > radius {
            return Err(Error::SpectralInconsistency(format!(
                "spectrum is not symmetric under conjugation near {a}"
            )));
        }
        if jc == jn {
            // Imaginary pair {i b, -i b}: negation partner is the conjugate.
            let b = (a.im - vals[jn].im) * 0.5;
            vals[i] = Complex64::new(0.0, b);
            vals[jn] = Complex64::new(0.0, -b);
            neg[i] = jn;
            neg[jn] = i;
            done[i] = true;
            done[jn] = true;
            continue;
        }
        // Full quadruple {g, conj g, -g, -conj g}.
        let (jcn, dcn) = nearest(vals, -a.conj(), &done).expect("nonempty");
        if dcn > radius || jcn == i || jcn == jc || jcn == jn {
            return Err(Error::SpectralInconsistency(format!(
                "eigenvalue orbit of {a} is not a clean quadruple"
            )));
        }
        if mults[jc] != mults[i] || mults[jcn] != mults[i] {
            return Err(Error::SpectralInconsistency(format!(
                "quadruple at {a} has mismatched multiplicities"
            )));
        }
        let g = (a + vals[jc].conj() - vals[jn] - vals[jcn].conj()) * 0.25;
        vals[i] = g;
        vals[jc] = g.conj();
        vals[jn] = -g;
        vals[jcn] = -g.conj();
        neg[i] = jn;
        neg[jn] = i;
        neg[jc] = jcn;
        neg[jcn] = jc;
        for k in [i, jc, jn, jcn] {
            done[k] = true;
        }
    }
    Ok(neg)
}

/// Generalized eigenspace of the (scaled) operator at alpha, grown until
/// the kernel dimension stabilizes at the cluster multiplicity.
fn eigenspace_at(
    a: &RMat,
    alpha: Complex64,
    multiplicity: usize,
    scale: f64,
    tol: &Tolerances,
) -> Result<(Subspace, usize)> {
    let n = a.nrows();
    let cap = n.max(1);
    // Work with the scaled shift so kernel thresholds stay relative.
    let shift = if alpha.im == 0.0 {
        // Real shift: real arithmetic keeps the basis exactly real.
        None
    } else {
        Some(())
    };
    let mut prev_dim = 0usize;
    let mut depth = 0usize;
    let mut space = Subspace::empty(n);
    let denom = scale.max(f64::MIN_POSITIVE);
    for k in 1..=cap {
        let sub = if shift.is_none() {
            let m = (a - RMat::identity(n, n) * alpha.re) / denom;
            let mk = {
                let mut acc = RMat::identity(n, n);
                for _ in 0..k {
                    acc = &acc * &m;
                }
                acc
            };
            linalg::kernel_basis_r(&mk, tol)?
        } else {
            let ac = linalg::complexify(a);
            let m = (&ac - CMat::identity(n, n) * alpha) / Complex64::new(denom, 0.0);
            let mk = linalg::cmat_pow(&m, k);
            linalg::kernel_basis(&mk, tol)?
        };
        let d = sub.dim();
        if d == multiplicity {
            return Ok((sub, k));
        }
        if d == prev_dim {
            // Stalled below the multiplicity: the cluster and its space
            // disagree, typically from under-merged eigenvalues.
            return Err(Error::SpectralInconsistency(format!(
                "generalized eigenspace at {alpha} stalled at dimension {d}, \
                 cluster multiplicity is {multiplicity}"
            )));
        }
        if d > multiplicity {
            return Err(Error::SpectralInconsistency(format!(
                "generalized eigenspace at {alpha} has dimension {d} exceeding \
                 cluster multiplicity {multiplicity}"
            )));
        }
        prev_dim = d;
        space = sub;
        depth = k;
    }
    let _ = (space, depth);
    Err(Error::SpectralInconsistency(format!(
        "generalized eigenspace at {alpha} did not stabilize within depth {cap}"
    )))
}

/// Cluster the spectrum of A and compute all generalized eigenspaces.
/// Conjugate clusters get exactly conjugate bases.
pub fn generalized_eigenspaces(a: &RMat, tol: &Tolerances) -> Result<SpectralData> {
    assert!(a.is_square(), "spectral analysis needs a square matrix");
    let n = a.nrows();
    let raw = linalg::eig_clusters(a, tol)?;
    let scale = linalg::spec_norm_r(a);
    let radius = 4.0 * tol.tau_eig * scale + 16.0 * f64::EPSILON * scale;

    let mut vals: Vec<Complex64> = raw.iter().map(|&(v, _)| v).collect();
    let mults: Vec<usize> = raw.iter().map(|&(_, m)| m).collect();
    let neg = symmetrize_orbits(&mut vals, &mults, radius)?;

    // Conjugation partners are exact after symmetrization.
    let m = vals.len();
    let mut conj = vec![usize::MAX; m];
    for i in 0..m {
        let target = vals[i].conj();
        conj[i] = vals
            .iter()
            .position(|&v| v == target)
            .ok_or_else(|| Error::SpectralInconsistency(format!(
                "no exact conjugate partner for {}",
                vals[i]
            )))?;
    }

    // Compute spaces: fresh for im >= 0, exact conjugates for im < 0.
    let mut spaces: Vec<Option<(Subspace, usize)>> = vec![None; m];
    for i in 0..m {
        if vals[i].im < 0.0 {
            continue;
        }
        spaces[i] = Some(eigenspace_at(a, vals[i], mults[i], scale, tol)?);
    }
    for i in 0..m {
        if vals[i].im < 0.0 {
            let j = conj[i];
            let (s, d) = spaces[j].as_ref().ok_or_else(|| {
                Error::InternalInconsistency("conjugate partner space missing".into())
            })?;
            spaces[i] = Some((s.conjugate(), *d));
        }
    }

    let clusters: Vec<EigCluster> = (0..m)
        .map(|i| {
            let (space, chain_depth) = spaces[i].take().expect("space computed");
            EigCluster { alpha: vals[i], dim: mults[i], chain_depth, space }
        })
        .collect();

    let total: usize = clusters.iter().map(|c| c.dim).sum();
    if total != n {
        return Err(Error::SpectralInconsistency(format!(
            "eigenspace dimensions sum to {total}, ambient dimension is {n}"
        )));
    }

    Ok(SpectralData { scale, clusters, conj_partner: conj, neg_partner: neg })
}

/// Outcome of the eigenspace orthogonality check: D_alpha is g-orthogonal
/// to D_beta unless beta = -alpha, and the pairing between D_alpha and
/// D_{-alpha} is nondegenerate.
#[derive(Debug, Clone)]
pub struct OrthogonalityReport {
    pub gscale: f64,
    /// Largest |g(u, w)| over orthonormal basis vectors of non-dual pairs.
    pub max_cross: f64,
    /// Smallest singular value of the D_alpha x D_{-alpha} pairing matrix,
    /// minimized over clusters.
    pub min_dual_sigma: f64,
}

impl OrthogonalityReport {
    pub fn ok(&self, tol: &Tolerances) -> bool {
        self.max_cross <= tol.tau_verify * self.gscale
            && self.min_dual_sigma > tol.tau_rank * self.gscale
    }
}

pub fn verify_orthogonality(data: &SpectralData, g: &RMat) -> OrthogonalityReport {
    let gc = linalg::complexify(g);
    let gscale = linalg::spec_norm_r(g);
    let mut max_cross = 0.0f64;
    let mut min_dual = f64::INFINITY;
    for (i, ci) in data.clusters.iter().enumerate() {
        for (j, cj) in data.clusters.iter().enumerate() {
            // Bilinear pairing: transpose on the left, not adjoint.
            let pairing = ci.space.basis().transpose() * &gc * cj.space.basis();
            if data.neg_partner[i] == j {
                let smin = if pairing.is_empty() {
                    f64::INFINITY
                } else {
                    pairing.singular_values().min()
                };
                min_dual = min_dual.min(smin);
            } else {
                max_cross = max_cross.max(linalg::spec_norm_c(&pairing));
            }
        }
    }
    if min_dual == f64::INFINITY {
        min_dual = gscale.max(1.0);
    }
    OrthogonalityReport { gscale, max_cross, min_dual_sigma: min_dual }
}

/// The direct sum of one negation-conjugation orbit of eigenspaces, with
/// the signature of g restricted to its real points.
#[derive(Debug, Clone)]
pub struct QuadSpace {
    /// Distinguished representative: im > 0 and re >= 0 in CR mode,
    /// re < 0 and im >= 0 in Lagrangian mode.
    pub alpha: Complex64,
    /// Cluster indices, ordered {rep, conj, -rep, -conj} with dedup.
    pub members: Vec<usize>,
    /// C_alpha: the direct sum of the member eigenspaces. Closed under
    /// conjugation, so it has a real form.
    pub complex_space: Subspace,
    /// Orthonormal basis of the real points of C_alpha; same dimension.
    pub real_basis: RMat,
    /// Signature of g on real_basis, equivalently of h on C_alpha.
    pub signature: (usize, usize),
    /// Literally re(alpha) == 0; only possible in CR mode for generic
    /// spectra, so always false in Lagrangian mode.
    pub pure_imaginary: bool,
}

impl QuadSpace {
    /// Complex dimension of C_alpha.
    pub fn dim(&self) -> usize {
        self.complex_space.dim()
    }
}

fn is_rep(mode: Mode, v: Complex64) -> bool {
    match mode {
        Mode::Cr => v.im > 0.0 && v.re >= 0.0,
        Mode::Lagrangian => v.re < 0.0 && v.im >= 0.0,
    }
}

/// Group clusters into quads and compute their signatures. Requires a
/// generic spectrum: in CR mode no real clusters, in Lagrangian mode no
/// imaginary ones. A cluster that cannot be assigned, or a non-imaginary
/// quad whose signature is not split, is a spectral inconsistency (callers
/// are expected to have checked genericity already).
pub fn group_quads(
    mode: Mode,
    data: &SpectralData,
    g: &RMat,
    tol: &Tolerances,
) -> Result<Vec<QuadSpace>> {
    let mut assigned = vec![false; data.clusters.len()];
    let mut quads = Vec::new();
    let mut reps: Vec<usize> = (0..data.clusters.len())
        .filter(|&i| is_rep(mode, data.clusters[i].alpha))
        .collect();
    reps.sort_by(|&i, &j| {
        let (a, b) = (data.clusters[i].alpha, data.clusters[j].alpha);
        (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap()
    });
    for &i in &reps {
        let jc = data.conj_partner[i];
        let jn = data.neg_partner[i];
        let jcn = data.conj_partner[jn];
        let mut members = vec![i];
        for k in [jc, jn, jcn] {
            if !members.contains(&k) {
                members.push(k);
            }
        }
        for &k in &members {
            if assigned[k] {
                return Err(Error::InternalInconsistency(format!(
                    "cluster {} claimed by two quads",
                    data.clusters[k].alpha
                )));
            }
            assigned[k] = true;
        }
        let alpha = data.clusters[i].alpha;
        let expected: usize = members.iter().map(|&k| data.clusters[k].dim).sum();
        let bases: Vec<&CMat> = members.iter().map(|&k| data.clusters[k].space.basis()).collect();
        let complex_space = Subspace::from_cols(&linalg::hcat_c(&bases), tol)?;
        if complex_space.dim() != expected {
            return Err(Error::SpectralInconsistency(format!(
                "quad at {alpha} spans dimension {}, member eigenspaces sum to {expected}",
                complex_space.dim()
            )));
        }
        let real_basis = complex_space.real_form(tol)?;
        let gram = real_basis.transpose() * g * &real_basis;
        let signature = linalg::signature(&gram, tol).map_err(|e| match e {
            Error::DegenerateForm { value, .. } => Error::DegenerateForm {
                context: format!("pairing degenerate on the quad at {alpha}"),
                value,
            },
            other => other,
        })?;
        let pure_imaginary = alpha.re == 0.0;
        if !pure_imaginary && signature.0 != signature.1 {
            return Err(Error::SpectralInconsistency(format!(
                "quad at {alpha} has signature ({}, {}), expected split",
                signature.0, signature.1
            )));
        }
        quads.push(QuadSpace { alpha, members, complex_space, real_basis, signature, pure_imaginary });
    }
    if assigned.iter().any(|&a| !a) {
        // Leftover clusters sit in the bad set (real in CR mode, imaginary
        // in Lagrangian mode); genericity should have caught this upstream.
        let leftover: Vec<String> = assigned
            .iter()
            .enumerate()
            .filter(|&(_, &a)| !a)
            .map(|(k, _)| data.clusters[k].alpha.to_string())
            .collect();
        return Err(Error::SpectralInconsistency(format!(
            "clusters {{{}}} sit in the bad set for {mode} mode and cannot be grouped",
            leftover.join(", ")
        )));
    }
    Ok(quads)
}
