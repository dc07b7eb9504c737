//! Transport of the eigenspace decomposition onto the structure eigenspaces.
//!
//! Given a generic instance, the generalized eigenspaces D_alpha of the
//! derived operator A are carried onto subspaces of the eigenspaces of the
//! input structure (L+/L- for J, E/F for sigma) by a real g-orthogonal map
//! e. The reduced structure K = Re(e^{-1} S e) is then partially integrable
//! and independent of every choice made along the way: it is determined by
//! the image of the good half of the spectrum, which is forced to be all of
//! L+ (respectively E tensor C).

use nalgebra::Complex;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, Subspace};
use crate::spectral::{self, QuadSpace, SpectralData};
use crate::structures::{self, DerivedTriple, Instance, Mode};
use crate::tol::Tolerances;

/// Where one quad goes: a subspace P of the good structure eigenspace,
/// refined into a dual pair (P1, P2) when the quad is not purely imaginary.
#[derive(Debug, Clone)]
pub struct TargetSplit {
    /// Representative eigenvalue of the quad this split serves.
    pub alpha: Complex64,
    /// Target inside L+ (E tensor C in Lagrangian mode) for the good half
    /// of the quad.
    pub p: Subspace,
    /// The half of P receiving D_alpha itself. Equals P for purely
    /// imaginary quads.
    pub p1: Subspace,
    /// Dual partner receiving the negated eigenvalues. Empty for purely
    /// imaginary quads, where the dual partner is conj(P).
    pub p2: Subspace,
    /// Signature of g on the real points of the quad.
    pub q_real_signature: (usize, usize),
}

/// A real g-orthogonal matrix, stored in complex form because it is built
/// from complex eigenbases and is only real up to roundoff.
#[derive(Debug, Clone)]
pub struct IsometryE {
    pub e: CMat,
}

impl IsometryE {
    pub fn det(&self) -> Complex64 {
        self.e.determinant()
    }
}

/// Output of a successful reduction.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// The reduced structure: K^2 = -Id (CR) or K^2 = Id, tr K = 0
    /// (Lagrangian).
    pub k: RMat,
    pub e: IsometryE,
    /// ||K^2 + Id|| or ||K^2 - Id||.
    pub residual_structure: f64,
    /// ||K^T Omega K - Omega|| or ||K^T Omega K + Omega||.
    pub residual_hermitian: f64,
    pub seed_used: u64,
    /// det(e), recorded for inspection; no branch of the algorithm
    /// constrains it.
    pub det_e: Complex64,
}

/// Eigenspaces of the input structure: (L+, L-) for J in CR mode, the
/// complexified (+1, -1) eigenspaces (E tensor C, F tensor C) for sigma in
/// Lagrangian mode. Each must have dimension n.
pub fn structure_eigenspaces(inst: &Instance, tol: &Tolerances) -> Result<(Subspace, Subspace)> {
    let n = inst.n();
    let (plus, minus) = match inst.mode() {
        Mode::Cr => {
            let jc = linalg::complexify(inst.structure());
            let dim = jc.nrows();
            let i_id = CMat::identity(dim, dim) * Complex::new(0.0, 1.0);
            let plus = linalg::kernel_basis(&(&jc - &i_id), tol)?;
            let minus = linalg::kernel_basis(&(&jc + &i_id), tol)?;
            (plus, minus)
        }
        Mode::Lagrangian => {
            let s = inst.structure();
            let id = RMat::identity(s.nrows(), s.nrows());
            let e = linalg::kernel_basis_r(&(s - &id), tol)?;
            let f = linalg::kernel_basis_r(&(s + &id), tol)?;
            (e, f)
        }
    };
    if plus.dim() != n || minus.dim() != n {
        return Err(Error::InvalidInput(format!(
            "structure eigenspaces have dimensions ({}, {}), expected ({n}, {n}); \
             the input structure is not an almost complex structure / involution",
            plus.dim(),
            minus.dim()
        )));
    }
    Ok((plus, minus))
}

/// Choose targets inside the good structure eigenspace for every quad.
///
/// CR mode consumes an h-orthonormal signed basis of L+ greedily, handing
/// each quad as many positive and negative vectors as the signature of h on
/// D_alpha demands (half the quad signature). Purely imaginary quads take
/// the vectors as they are; others combine a (+,-) pair into the isotropic
/// dual pair (u+ + u-)/sqrt2, (u+ - u-)/sqrt2.
///
/// Lagrangian mode consumes a dual pair of real bases x_i of E and y_i of F
/// with g(x_i, y_j) = delta_ij. Real quads take d pairs directly; complex
/// quads combine two pairs into (x + i x')/sqrt2 and (y - i y')/sqrt2,
/// which keeps every cross pairing of distinct targets at zero.
pub fn build_target_split(
    mode: Mode,
    l_plus: &Subspace,
    l_minus: &Subspace,
    quads: &[QuadSpace],
    tri: &DerivedTriple,
    tol: &Tolerances,
) -> Result<Vec<TargetSplit>> {
    match mode {
        Mode::Cr => build_target_split_cr(l_plus, quads, tri, tol),
        Mode::Lagrangian => build_target_split_lag(l_plus, l_minus, quads, tri, tol),
    }
}

fn build_target_split_cr(
    l_plus: &Subspace,
    quads: &[QuadSpace],
    tri: &DerivedTriple,
    tol: &Tolerances,
) -> Result<Vec<TargetSplit>> {
    let gc = linalg::complexify(tri.g());
    let dim = l_plus.ambient();
    let pool = linalg::hermitian_orthonormalize(l_plus.basis(), &gc, tol)?;
    let n_pos = pool.positives();
    let mut next_pos = 0usize;
    let mut next_neg = n_pos;

    let mut splits = Vec::with_capacity(quads.len());
    for quad in quads {
        let (sp, sq) = quad.signature;
        if !sp.is_multiple_of(2) || !sq.is_multiple_of(2) {
            return Err(Error::InternalInconsistency(format!(
                "quad at {} has odd signature ({sp}, {sq})",
                quad.alpha
            )));
        }
        let (want_pos, want_neg) = (sp / 2, sq / 2);
        if next_pos + want_pos > n_pos || next_neg + want_neg > pool.dim() {
            return Err(Error::SignatureMismatch(format!(
                "signed pool exhausted at quad {}: need ({want_pos}, {want_neg}) more, \
                 pool has ({}, {}) left",
                quad.alpha,
                n_pos - next_pos,
                pool.dim() - next_neg
            )));
        }
        let pos: Vec<usize> = (next_pos..next_pos + want_pos).collect();
        let neg: Vec<usize> = (next_neg..next_neg + want_neg).collect();
        next_pos += want_pos;
        next_neg += want_neg;

        let col = |i: usize| pool.basis.column(i).clone_owned();
        if quad.pure_imaginary {
            let cols: Vec<_> = pos.iter().chain(&neg).map(|&i| col(i)).collect();
            let p = Subspace::from_cols_exact(&cols_to_mat(dim, &cols), cols.len(), tol)?;
            splits.push(TargetSplit {
                alpha: quad.alpha,
                p1: p.clone(),
                p2: Subspace::empty(dim),
                p,
                q_real_signature: quad.signature,
            });
        } else {
            // Split law: the signature is (2d, 2d), so want_pos == want_neg.
            if want_pos != want_neg {
                return Err(Error::InternalInconsistency(format!(
                    "non-imaginary quad at {} has non-split signature ({sp}, {sq})",
                    quad.alpha
                )));
            }
            let rt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut p1_cols = Vec::with_capacity(want_pos);
            let mut p2_cols = Vec::with_capacity(want_pos);
            let mut p_cols = Vec::with_capacity(2 * want_pos);
            for (&ip, &im) in pos.iter().zip(&neg) {
                let (u, w) = (col(ip), col(im));
                p1_cols.push((&u + &w) * rt2);
                p2_cols.push((&u - &w) * rt2);
                p_cols.push(u);
                p_cols.push(w);
            }
            splits.push(TargetSplit {
                alpha: quad.alpha,
                p: Subspace::from_cols_exact(&cols_to_mat(dim, &p_cols), p_cols.len(), tol)?,
                p1: Subspace::from_cols_exact(&cols_to_mat(dim, &p1_cols), p1_cols.len(), tol)?,
                p2: Subspace::from_cols_exact(&cols_to_mat(dim, &p2_cols), p2_cols.len(), tol)?,
                q_real_signature: quad.signature,
            });
        }
    }
    if next_pos != n_pos || next_neg != pool.dim() {
        return Err(Error::SignatureMismatch(format!(
            "signed pool not exhausted: ({}, {}) vectors left over",
            n_pos - next_pos,
            pool.dim() - next_neg
        )));
    }
    Ok(splits)
}

fn build_target_split_lag(
    l_plus: &Subspace,
    l_minus: &Subspace,
    quads: &[QuadSpace],
    tri: &DerivedTriple,
    tol: &Tolerances,
) -> Result<Vec<TargetSplit>> {
    let g = tri.g();
    let gscale = linalg::spec_norm_r(g);
    let dim = l_plus.ambient();
    let n = dim / 2;

    // Dual real bases: x_i spanning E, y_i spanning F, g(x_i, y_j) = delta.
    let x = l_plus.real_form(tol)?;
    let y0 = l_minus.real_form(tol)?;
    let m = x.transpose() * g * &y0;
    let smin = m.clone().singular_values().min();
    if smin <= tol.tau_rank * gscale {
        return Err(Error::DegenerateForm {
            context: "duality pairing between the structure eigenspaces".into(),
            value: smin,
        });
    }
    let y = &y0 * linalg::try_inverse_r(&m)?;

    let xc = linalg::complexify(&x);
    let yc = linalg::complexify(&y);
    let mut next = 0usize;

    let mut splits = Vec::with_capacity(quads.len());
    for quad in quads {
        let real_quad = quad.members.len() == 2;
        // d = dim D_alpha; the quad spans 2d (real alpha) or 4d dimensions.
        let d = quad.dim() / quad.members.len();
        let pairs = if real_quad { d } else { 2 * d };
        if next + pairs > n {
            return Err(Error::SignatureMismatch(format!(
                "dual basis exhausted at quad {}: need {pairs} more pairs, {} left",
                quad.alpha,
                n - next
            )));
        }
        let idx: Vec<usize> = (next..next + pairs).collect();
        next += pairs;

        if real_quad {
            let px = select_cols(&xc, &idx);
            let py = select_cols(&yc, &idx);
            let p = Subspace::from_cols_exact(&px, d, tol)?;
            splits.push(TargetSplit {
                alpha: quad.alpha,
                p1: p.clone(),
                p2: Subspace::from_cols_exact(&py, d, tol)?,
                p,
                q_real_signature: quad.signature,
            });
        } else {
            let i = Complex64::new(0.0, 1.0);
            let rt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut p1_cols = Vec::with_capacity(d);
            let mut p2_cols = Vec::with_capacity(d);
            for j in 0..d {
                let (a, b) = (idx[2 * j], idx[2 * j + 1]);
                p1_cols.push((xc.column(a) + xc.column(b) * i) * rt2);
                p2_cols.push((yc.column(a) - yc.column(b) * i) * rt2);
            }
            let px = select_cols(&xc, &idx);
            splits.push(TargetSplit {
                alpha: quad.alpha,
                p: Subspace::from_cols_exact(&px, 2 * d, tol)?,
                p1: Subspace::from_cols_exact(&cols_to_mat(dim, &p1_cols), d, tol)?,
                p2: Subspace::from_cols_exact(&cols_to_mat(dim, &p2_cols), d, tol)?,
                q_real_signature: quad.signature,
            });
        }
    }
    if next != n {
        return Err(Error::SignatureMismatch(format!(
            "dual basis not exhausted: {} pairs left over",
            n - next
        )));
    }
    Ok(splits)
}

fn cols_to_mat(nrows: usize, cols: &[nalgebra::DVector<Complex64>]) -> CMat {
    let mut m = CMat::zeros(nrows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        m.set_column(k, c);
    }
    m
}

fn select_cols(m: &CMat, idx: &[usize]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &m.column(i));
    }
    out
}

fn random_invertible(rng: &mut ChaCha8Rng, d: usize, complex: bool) -> Result<CMat> {
    for _ in 0..32 {
        let m = CMat::from_fn(d, d, |_, _| {
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
            Complex64::new(re, im)
        });
        let sv = m.clone().singular_values();
        if sv.min() > 0.2 * sv.max() {
            return Ok(m);
        }
    }
    Err(Error::NumericalFailure(
        "failed to draw a well-conditioned coefficient matrix".into(),
    ))
}

/// h-signed basis of the target slice, aligned with the domain basis when
/// the two spaces are close. Signed bases are unique only up to U(p, q),
/// which is noncompact, so a cold orthonormalization of the slice can sit a
/// large hyperbolic boost away from the domain basis even when the spaces
/// coincide; the boost inflates cond(e) and amplifies whatever imperfection
/// the input structure carries into K. Orthonormalizing the projection of
/// the domain basis instead picks the boost-free representative. Far away
/// or on any degeneracy, fall back to the cold basis: every valid signed
/// basis yields the same K, only the conditioning differs.
fn aligned_signed_target(
    domain: &Subspace,
    sd: &linalg::SignedBasis,
    p: &Subspace,
    gc: &CMat,
    tol: &Tolerances,
) -> Result<linalg::SignedBasis> {
    let b = p.basis();
    let cos_min = (b.adjoint() * domain.basis()).singular_values().min();
    if cos_min > 0.1 {
        let projected = b * (b.adjoint() * &sd.basis);
        if let Ok(sp) = linalg::hermitian_orthonormalize(&projected, gc, tol) {
            if sp.positives() == sd.positives() && sp.dim() == sd.dim() {
                return Ok(sp);
            }
        }
    }
    linalg::hermitian_orthonormalize(b, gc, tol)
}

/// Assemble the g-orthogonal real map e with e(D_alpha) = target for every
/// cluster. Freedom inside each target (an invertible coefficient matrix,
/// seeded) is deliberately random: K must not depend on it.
pub fn build_isometry(
    mode: Mode,
    data: &SpectralData,
    quads: &[QuadSpace],
    splits: &[TargetSplit],
    tri: &DerivedTriple,
    rng_seed: u64,
    tol: &Tolerances,
) -> Result<IsometryE> {
    assert_eq!(quads.len(), splits.len(), "one split per quad");
    let gc = linalg::complexify(tri.g());
    let gscale = linalg::spec_norm_r(tri.g());
    let dim = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // (domain block, target block) per cluster, assembled quad by quad.
    let mut blocks: Vec<Option<(CMat, CMat)>> = vec![None; data.clusters.len()];
    let mut place = |slot: usize, v: CMat, w: CMat| -> Result<()> {
        if blocks[slot].is_some() {
            return Err(Error::InternalInconsistency(format!(
                "cluster {slot} assigned twice during isometry assembly"
            )));
        }
        blocks[slot] = Some((v, w));
        Ok(())
    };

    for (quad, split) in quads.iter().zip(splits) {
        match (mode, quad.members.len()) {
            (Mode::Cr, 2) => {
                // Purely imaginary: match h-signed bases of D_alpha and P,
                // then conjugate both sides for D_{-alpha} = conj(D_alpha).
                let rep = quad.members[0];
                let sd = linalg::hermitian_orthonormalize(
                    data.clusters[rep].space.basis(),
                    &gc,
                    tol,
                )?;
                let sp = aligned_signed_target(&data.clusters[rep].space, &sd, &split.p, &gc, tol)?;
                if sd.positives() != sp.positives() || sd.dim() != sp.dim() {
                    return Err(Error::SignatureMismatch(format!(
                        "h-signature of D_{} is ({}, {}) but its target carries ({}, {})",
                        quad.alpha,
                        sd.positives(),
                        sd.dim() - sd.positives(),
                        sp.positives(),
                        sp.dim() - sp.positives()
                    )));
                }
                place(rep, sd.basis.clone(), sp.basis.clone())?;
                place(quad.members[1], linalg::conj_mat(&sd.basis), linalg::conj_mat(&sp.basis))?;
            }
            (Mode::Lagrangian, 2) => {
                // Real eigenvalue pair: everything stays real.
                let (rep, negp) = (quad.members[0], quad.members[1]);
                let d = data.clusters[rep].dim;
                let b_rep = linalg::complexify(&data.clusters[rep].space.real_form(tol)?);
                let b_neg = linalg::complexify(&data.clusters[negp].space.real_form(tol)?);
                let p1 = linalg::complexify(&split.p1.real_form(tol)?);
                let p2 = linalg::complexify(&split.p2.real_form(tol)?);
                let m = random_invertible(&mut rng, d, false)?;
                let w_rep = &p1 * &m;
                let w_neg = dual_block(&b_neg, &b_rep, &p2, &w_rep, &gc, gscale, tol)?;
                place(rep, b_rep, w_rep)?;
                place(negp, b_neg, w_neg)?;
            }
            (_, 4) => {
                // Full quadruple {alpha, conj, -alpha, -conj}. D_alpha gets
                // a random basis of P1; D_{-alpha} is forced by duality
                // against it; the conjugate clusters mirror both.
                let (rep, conj, negp, negc) =
                    (quad.members[0], quad.members[1], quad.members[2], quad.members[3]);
                let d = data.clusters[rep].dim;
                let b_rep = data.clusters[rep].space.basis().clone();
                let b_neg = data.clusters[negp].space.basis().clone();
                let m = random_invertible(&mut rng, d, true)?;
                let w_rep = split.p1.basis() * &m;
                let dual_target = match mode {
                    Mode::Cr => linalg::conj_mat(split.p2.basis()),
                    Mode::Lagrangian => split.p2.basis().clone(),
                };
                let w_neg = dual_block(&b_neg, &b_rep, &dual_target, &w_rep, &gc, gscale, tol)?;
                place(rep, b_rep.clone(), w_rep.clone())?;
                place(conj, linalg::conj_mat(&b_rep), linalg::conj_mat(&w_rep))?;
                place(negp, b_neg.clone(), w_neg.clone())?;
                place(negc, linalg::conj_mat(&b_neg), linalg::conj_mat(&w_neg))?;
            }
            (m, k) => {
                return Err(Error::InternalInconsistency(format!(
                    "quad with {k} members in {m:?} mode"
                )));
            }
        }
    }

    let mut v = CMat::zeros(dim, dim);
    let mut w = CMat::zeros(dim, dim);
    let mut at = 0usize;
    for (slot, b) in blocks.into_iter().enumerate() {
        let Some((bv, bw)) = b else {
            return Err(Error::InternalInconsistency(format!(
                "cluster {slot} never assigned during isometry assembly"
            )));
        };
        let k = bv.ncols();
        v.view_mut((0, at), (dim, k)).copy_from(&bv);
        w.view_mut((0, at), (dim, k)).copy_from(&bw);
        at += k;
    }
    if at != dim {
        return Err(Error::InternalInconsistency(format!(
            "isometry blocks span {at} of {dim} columns"
        )));
    }

    // e V = W, solved as V^T e^T = W^T.
    let e = linalg::solve_c(&v.transpose(), &w.transpose())?.transpose();

    let escale = linalg::spec_norm_c(&e).max(1.0);
    let realness = linalg::spec_norm_r(&linalg::im_part(&e));
    if realness > tol.tau_verify * escale {
        return Err(Error::NumericalFailure(format!(
            "isometry is not real: ||Im e|| = {realness:.3e} at scale {escale:.3e}"
        )));
    }
    // e can be legitimately large: the isometry group of an indefinite form
    // is noncompact, and a spectrum split by a small perturbation leaves
    // nearly parallel eigenspaces headed for well-separated targets. The
    // congruence e^T g e is then formed with roundoff of order ||e||^2, so
    // the breakdown check scales with it. Accuracy of K is enforced where
    // it matters, on K itself: its errors largely cancel in e^{-1} S e.
    let gres = linalg::spec_norm_c(&(e.transpose() * &gc * &e - &gc));
    if gres > tol.tau_verify * gscale.max(1.0) * escale * escale {
        return Err(Error::NumericalFailure(format!(
            "isometry fails g-orthogonality: residual {gres:.3e} at scale {gscale:.3e}, \
             ||e|| = {escale:.3e}"
        )));
    }
    Ok(IsometryE { e })
}

/// Solve for the image of the dual cluster D_{-alpha}: a block W_neg inside
/// the dual target with g(W_neg, W_rep) = g(B_neg, B_rep) columnwise. With
/// every other pairing vanishing on both sides, this is the entire isometry
/// constraint on the quad.
fn dual_block(
    b_neg: &CMat,
    b_rep: &CMat,
    dual_target: &CMat,
    w_rep: &CMat,
    gc: &CMat,
    gscale: f64,
    tol: &Tolerances,
) -> Result<CMat> {
    let r = dual_target.transpose() * gc * w_rep;
    let sv = r.clone().singular_values();
    if sv.min() <= tol.tau_rank * gscale.max(1.0) {
        return Err(Error::NumericalFailure(format!(
            "duality pairing between target blocks is ill-conditioned: \
             sigma_min = {:.3e}",
            sv.min()
        )));
    }
    let gt = b_neg.transpose() * gc * b_rep;
    // (T C)^T G W_rep = C^T R = Gt.
    let c = linalg::solve_c(&r.transpose(), &gt.transpose())?;
    Ok(dual_target * c)
}

/// K = Re(e^{-1} S e). The imaginary part is a pure diagnostic: it must
/// vanish because e is real and S is real.
pub fn induce_structure(e: &IsometryE, inst: &Instance, tol: &Tolerances) -> Result<RMat> {
    let sc = linalg::complexify(inst.structure());
    let kc = linalg::solve_c(&e.e, &(&sc * &e.e))?;
    let kscale = linalg::spec_norm_c(&kc).max(1.0);
    let imag = linalg::spec_norm_r(&linalg::im_part(&kc));
    if imag > tol.tau_verify * kscale {
        return Err(Error::NumericalFailure(format!(
            "induced structure has imaginary residual {imag:.3e} at scale {kscale:.3e}"
        )));
    }
    Ok(linalg::re_part(&kc))
}

/// Full pipeline: derive, check genericity, split the spectrum, transport
/// it onto the structure eigenspaces, and verify the reduced structure.
pub fn reduce(inst: &Instance, rng_seed: u64, tol: &Tolerances) -> Result<ReductionResult> {
    let tri = structures::derive(inst, tol)?;
    let report = structures::check_genericity(inst, &tri, tol)?;
    if !report.generic {
        return Err(Error::NotGeneric { report: Box::new(report) });
    }

    let data = spectral::generalized_eigenspaces(tri.a(), tol)?;
    let orth = spectral::verify_orthogonality(&data, tri.g());
    if !orth.ok(tol) {
        return Err(Error::SpectralInconsistency(format!(
            "eigenspace orthogonality violated: max cross pairing {:.3e}, \
             min dual sigma {:.3e}, scale {:.3e}",
            orth.max_cross, orth.min_dual_sigma, orth.gscale
        )));
    }
    let quads = spectral::group_quads(inst.mode(), &data, tri.g(), tol)?;
    let (l_plus, l_minus) = structure_eigenspaces(inst, tol)?;
    let splits = build_target_split(inst.mode(), &l_plus, &l_minus, &quads, &tri, tol)?;
    let e = build_isometry(inst.mode(), &data, &quads, &splits, &tri, rng_seed, tol)?;
    let k = induce_structure(&e, inst, tol)?;

    let dim = inst.dim();
    let id = RMat::identity(dim, dim);
    let k2 = &k * &k;
    let residual_structure = match inst.mode() {
        Mode::Cr => linalg::spec_norm_r(&(&k2 + &id)),
        Mode::Lagrangian => linalg::spec_norm_r(&(&k2 - &id)),
    };
    let omega = inst.omega();
    let oscale = linalg::spec_norm_r(omega);
    let pulled = k.transpose() * omega * &k;
    let residual_hermitian = match inst.mode() {
        Mode::Cr => linalg::spec_norm_r(&(&pulled - omega)),
        Mode::Lagrangian => linalg::spec_norm_r(&(&pulled + omega)),
    };

    // Hard backstops, an order looser than the verification tolerance the
    // caller will apply: anything beyond this is a numerical breakdown, not
    // a marginal instance.
    if residual_structure > 10.0 * tol.tau_verify {
        return Err(Error::NumericalFailure(format!(
            "reduced structure residual {residual_structure:.3e} exceeds backstop"
        )));
    }
    if residual_hermitian > 10.0 * tol.tau_verify * oscale.max(1.0) {
        return Err(Error::NumericalFailure(format!(
            "hermitian residual {residual_hermitian:.3e} exceeds backstop at scale {oscale:.3e}"
        )));
    }
    if inst.mode() == Mode::Lagrangian {
        let tr = k.trace().abs();
        if tr > tol.tau_verify * dim as f64 {
            return Err(Error::NumericalFailure(format!(
                "reduced involution has trace {tr:.3e}, expected 0"
            )));
        }
    }

    let det_e = e.det();
    Ok(ReductionResult { k, e, residual_structure, residual_hermitian, seed_used: rng_seed, det_e })
}

/// Spread of K across seeds, and the drift of K when the isometry is
/// composed with a random element of the stabilizer of (g, S).
#[derive(Debug, Clone, Copy)]
pub struct UniquenessReport {
    pub max_pairwise: f64,
    pub stabilizer_drift: f64,
}

/// Reduce once per seed and measure the spread of K, then conjugate the
/// first isometry by a random element of the stabilizer of (g, S) and check
/// K does not move.
pub fn verify_uniqueness(
    inst: &Instance,
    seeds: &[u64],
    tol: &Tolerances,
) -> Result<UniquenessReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("verify_uniqueness needs at least one seed".into()));
    }
    let results: Vec<ReductionResult> =
        seeds.iter().map(|&s| reduce(inst, s, tol)).collect::<Result<_>>()?;

    let mut max_dist = 0.0f64;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let d = linalg::spec_norm_r(&(&results[i].k - &results[j].k));
            max_dist = max_dist.max(d);
        }
    }
    let limit = 10.0 * tol.tau_verify;
    if max_dist > limit {
        return Err(Error::UniquenessViolation { distance: max_dist, limit });
    }

    // Stabilizer probe: f = exp(Z) with Z g-skew and commuting with S
    // preserves every structure used to build e, so f e must induce the
    // same K. Z is averaged onto the commutant of S; S^{-1} = -S or S.
    let tri = structures::derive(inst, tol)?;
    let g = tri.g();
    let s = inst.structure();
    let s_inv = match inst.mode() {
        Mode::Cr => -s.clone(),
        Mode::Lagrangian => s.clone(),
    };
    let dim = inst.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds[0] ^ 0x5741_4c4c);
    let r = RMat::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let z0 = (&r - linalg::solve_r(g, &(r.transpose() * g))?) * 0.5;
    let z = (&z0 + s * &z0 * &s_inv) * 0.5;
    let zn = linalg::spec_norm_r(&z);
    if zn <= f64::EPSILON {
        return Err(Error::InternalInconsistency("stabilizer direction vanished".into()));
    }
    let f = linalg::expm(&(&z * (0.5 / zn)));
    let comm = linalg::spec_norm_r(&(&f * s - s * &f));
    let gres = linalg::spec_norm_r(&(f.transpose() * g * &f - g));
    let gscale = linalg::spec_norm_r(g).max(1.0);
    if comm > 1e-10 * gscale || gres > 1e-10 * gscale {
        return Err(Error::InternalInconsistency(format!(
            "stabilizer element drifted: [f, S] = {comm:.3e}, g-residual = {gres:.3e}"
        )));
    }
    let fc = linalg::complexify(&f);
    let e_conj = IsometryE { e: &fc * &results[0].e.e };
    let k_conj = induce_structure(&e_conj, inst, tol)?;
    let drift = linalg::spec_norm_r(&(&k_conj - &results[0].k));
    let stab_limit = tol.tau_verify * 0.1;
    if drift > stab_limit {
        return Err(Error::UniquenessViolation { distance: drift, limit: stab_limit });
    }

    Ok(UniquenessReport { max_pairwise: max_dist, stabilizer_drift: drift })
}
