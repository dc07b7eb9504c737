//! Total classification of instances by where the spectrum of A sits, and
//! the two-block splitting of mixed instances.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, Subspace};
use crate::reduction;
use crate::spectral::{self, SpectralData};
use crate::structures::{self, bad_set_distance, GenericityReport, Instance, Mode};
use crate::tol::Tolerances;

/// Where an instance lands. `Mixed` means the derived operator has some,
/// but not necessarily all, eigenvalues on the mode's bad axis;
/// `DegenerateForm` means the derivation itself broke down (singular omega
/// or nu), so there is no spectrum to speak of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    CrGeneric,
    LagrangianGeneric,
    Mixed,
    DegenerateForm,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::CrGeneric => "cr_generic",
            Kind::LagrangianGeneric => "lagrangian_generic",
            Kind::Mixed => "mixed",
            Kind::DegenerateForm => "degenerate_form",
        };
        f.write_str(s)
    }
}

/// One eigenvalue cluster: its value, total generalized multiplicity, and
/// distance to the bad axis (|Im| in CR mode, |Re| in Lagrangian mode).
#[derive(Debug, Clone, Copy)]
pub struct EigRow {
    pub alpha: Complex64,
    pub dim: usize,
    pub axis_distance: f64,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub kind: Kind,
    /// Total generalized multiplicity of the clusters on the bad axis.
    /// Always even: bad clusters pair under negation.
    pub bad_rank: usize,
    pub eigen_table: Vec<EigRow>,
}

/// Classify without failing: derivation problems become the
/// `DegenerateForm` kind rather than errors.
pub fn classify(inst: &Instance, tol: &Tolerances) -> Classification {
    let degenerate = Classification {
        kind: Kind::DegenerateForm,
        bad_rank: 0,
        eigen_table: Vec::new(),
    };
    let Ok(tri) = structures::derive(inst, tol) else {
        return degenerate;
    };
    let Ok(report) = structures::check_genericity(inst, &tri, tol) else {
        return degenerate;
    };
    if !(report.omega_ok && report.nu_ok) {
        return degenerate;
    }

    let eigen_table: Vec<EigRow> = report
        .eigenvalues
        .iter()
        .map(|c| {
            let alpha = Complex64::new(c.re, c.im);
            EigRow {
                alpha,
                dim: c.multiplicity,
                axis_distance: bad_set_distance(inst.mode(), alpha),
            }
        })
        .collect();
    let bad_rank: usize = eigen_table
        .iter()
        .filter(|r| r.axis_distance <= report.threshold)
        .map(|r| r.dim)
        .sum();
    let kind = if bad_rank > 0 {
        Kind::Mixed
    } else {
        match inst.mode() {
            Mode::Cr => Kind::CrGeneric,
            Mode::Lagrangian => Kind::LagrangianGeneric,
        }
    };
    Classification { kind, bad_rank, eigen_table }
}

/// The two-block splitting of a mixed instance: H1 carries the off-axis
/// (complex-elliptic) part and a complex structure J1, H2 carries the
/// on-axis (real-hyperbolic) part and a trace-free involution sigma2. The
/// blocks are mutually orthogonal for both g and omega, and each induced
/// structure satisfies its model identity together with the corresponding
/// invariance of omega restricted to the block.
#[derive(Debug, Clone)]
pub struct MixedResult {
    /// Orthonormal real basis of the off-axis block (possibly 0 columns).
    pub h1_basis: RMat,
    /// Orthonormal real basis of the on-axis block (possibly 0 columns).
    pub h2_basis: RMat,
    /// Complex structure on H1, in the H1 basis: j1^2 = -Id.
    pub j1: RMat,
    /// Involution on H2, in the H2 basis: sigma2^2 = Id, tr sigma2 = 0.
    pub sigma2: RMat,
    /// ||j1^2 + Id||.
    pub residual_j1_structure: f64,
    /// ||j1^T (omega|H1) j1 - omega|H1||.
    pub residual_j1_hermitian: f64,
    /// ||sigma2^2 - Id||.
    pub residual_sigma2_structure: f64,
    /// ||sigma2^T (omega|H2) sigma2 + omega|H2||.
    pub residual_sigma2_hermitian: f64,
    /// max of the g- and omega-pairings between H1 and H2, relative to the
    /// larger of the two form scales.
    pub residual_block_orthogonality: f64,
}

/// Spectral projector onto the sum of the selected clusters, along the
/// others: V diag(sel) V^{-1} for a full generalized eigenbasis V.
fn half_projector(data: &SpectralData, selected: &[bool]) -> Result<CMat> {
    let dim = data.dim();
    let bases: Vec<&CMat> = data.clusters.iter().map(|c| c.space.basis()).collect();
    let v = linalg::hcat_c(&bases);
    let vinv = linalg::try_inverse_c(&v)?;
    let mut pi = CMat::zeros(dim, dim);
    let mut at = 0usize;
    for (ci, cluster) in data.clusters.iter().enumerate() {
        let d = cluster.dim;
        if selected[ci] {
            pi += v.columns(at, d) * vinv.rows(at, d);
        }
        at += d;
    }
    Ok(pi)
}

/// Report for a block that fails its margin, shaped like a genericity
/// report of the mode whose notion applies to that block.
fn block_report(
    block_mode: Mode,
    parent: &GenericityReport,
    rows: &[usize],
) -> GenericityReport {
    let eigenvalues: Vec<_> = rows.iter().map(|&i| parent.eigenvalues[i].clone()).collect();
    let min_over = |f: fn(&structures::ClusterInfo) -> f64| {
        eigenvalues.iter().map(f).fold(f64::INFINITY, f64::min)
    };
    GenericityReport {
        mode: block_mode,
        omega_ok: parent.omega_ok,
        omega_sigma_min: parent.omega_sigma_min,
        nu_ok: parent.nu_ok,
        nu_sigma_min: parent.nu_sigma_min,
        min_im: min_over(|c| c.im.abs()),
        min_re: min_over(|c| c.re.abs()),
        eigenvalues,
        scale: parent.scale,
        threshold: parent.threshold,
        generic: false,
    }
}

/// Compress an ambient operator that preserves the span of the given
/// orthonormal real basis down to that basis.
fn compress(basis: &RMat, op: &RMat) -> RMat {
    basis.transpose() * op * basis
}

/// Split a mixed instance into its elliptic and hyperbolic blocks.
///
/// The off-axis block keeps the input structure: its g-orthogonal
/// compression must be close to a complex structure (or involution in
/// Lagrangian mode), is polar-corrected, and the block instance is fully
/// reduced. The on-axis block has no usable input structure, so it gets
/// the canonical one induced by the spectrum: the difference of the
/// spectral projectors onto the stable and unstable halves, which
/// satisfies its identities exactly.
pub fn mixed_reduce(inst: &Instance, rng_seed: u64, tol: &Tolerances) -> Result<MixedResult> {
    let classification = classify(inst, tol);
    match classification.kind {
        Kind::Mixed => {}
        Kind::DegenerateForm => {
            return Err(Error::DegenerateForm {
                context: "mixed_reduce needs a nondegenerate instance".into(),
                value: f64::NAN,
            });
        }
        k => {
            return Err(Error::InvalidInput(format!(
                "mixed_reduce expects a mixed instance, this one is {k}"
            )));
        }
    }

    let tri = structures::derive(inst, tol)?;
    let report = structures::check_genericity(inst, &tri, tol)?;
    let data = spectral::generalized_eigenspaces(tri.a(), tol)?;
    let orth = spectral::verify_orthogonality(&data, tri.g());
    if !orth.ok(tol) {
        return Err(Error::SpectralInconsistency(format!(
            "eigenspace orthogonality violated: max cross pairing {:.3e}, \
             min dual sigma {:.3e}",
            orth.max_cross, orth.min_dual_sigma
        )));
    }

    // Partition clusters by distance to the real axis. The bad axis of CR
    // mode is the real one; in Lagrangian mode the real clusters are the
    // good ones. Either way H1 collects the off-axis part.
    let on_axis: Vec<bool> = data
        .clusters
        .iter()
        .map(|c| c.alpha.im.abs() <= report.threshold)
        .collect();

    // Block margins. Off-axis clusters clear the real axis by partition;
    // on-axis ones must clear zero, or the hyperbolic block is itself
    // degenerate.
    let bad_rows: Vec<usize> = (0..data.clusters.len()).filter(|&i| on_axis[i]).collect();
    let good_rows: Vec<usize> = (0..data.clusters.len()).filter(|&i| !on_axis[i]).collect();
    if bad_rows
        .iter()
        .any(|&i| data.clusters[i].alpha.re.abs() <= report.threshold)
    {
        return Err(Error::NotGeneric {
            report: Box::new(block_report(Mode::Lagrangian, &report, &bad_rows)),
        });
    }

    let dim = inst.dim();
    let gather = |rows: &[usize]| -> Result<RMat> {
        if rows.is_empty() {
            return Ok(RMat::zeros(dim, 0));
        }
        let bases: Vec<&CMat> = rows.iter().map(|&i| data.clusters[i].space.basis()).collect();
        let total: usize = rows.iter().map(|&i| data.clusters[i].dim).sum();
        let span = Subspace::from_cols_exact(&linalg::hcat_c(&bases), total, tol)?;
        span.real_form(tol)
    };
    let h1_basis = gather(&good_rows)?;
    let h2_basis = gather(&bad_rows)?;

    let g = tri.g();
    let gscale = linalg::spec_norm_r(g);
    let omega = inst.omega();
    let oscale = linalg::spec_norm_r(omega);
    for (name, h) in [("off-axis", &h1_basis), ("on-axis", &h2_basis)] {
        if h.ncols() == 0 {
            continue;
        }
        let gram = compress(h, g);
        let smin = gram.singular_values().min();
        if smin <= tol.tau_rank * gscale {
            return Err(Error::DegenerateForm {
                context: format!("g restricted to the {name} block"),
                value: smin,
            });
        }
    }
    let cross_g = linalg::spec_norm_r(&(h1_basis.transpose() * g * &h2_basis));
    let cross_o = linalg::spec_norm_r(&(h1_basis.transpose() * omega * &h2_basis));
    let residual_block_orthogonality = cross_g.max(cross_o) / gscale.max(oscale).max(1.0);

    // The instance's own block keeps the input structure: compress it
    // g-orthogonally, correct it to an exact structure of that kind, and
    // run the full reduction on the block instance.
    let own_block = |basis: &RMat| -> Result<(RMat, f64, f64)> {
        let gram = compress(basis, g);
        let s_proj = linalg::try_inverse_r(&gram)?
            * basis.transpose()
            * g
            * inst.structure()
            * basis;
        let d = s_proj.nrows();
        let id = RMat::identity(d, d);
        let s2 = &s_proj * &s_proj;
        let defect = match inst.mode() {
            Mode::Cr => linalg::spec_norm_r(&(&s2 + &id)),
            Mode::Lagrangian => linalg::spec_norm_r(&(&s2 - &id)),
        };
        if defect > 0.5 {
            return Err(Error::StructureProjectionFailure { residual: defect });
        }
        // Polar correction: X = -+ s_proj^2 is near Id and commutes with
        // s_proj, so s_proj X^{-1/2} squares to -+ Id exactly.
        let x = match inst.mode() {
            Mode::Cr => -&s2,
            Mode::Lagrangian => s2.clone(),
        };
        let s_corr = &s_proj * linalg::inv_sqrt_near_identity(&x, tol)?;
        let block = Instance::new(inst.mode(), compress(basis, omega), s_corr, tol)?;
        let r = reduction::reduce(&block, rng_seed, tol)?;
        Ok((r.k, r.residual_structure, r.residual_hermitian))
    };

    // The other block has no usable input structure; it gets the
    // canonical one from its spectral splitting, which satisfies the
    // model identities exactly.
    let spectral_j1 = |basis: &RMat| -> Result<(RMat, f64, f64)> {
        let up: Vec<bool> = (0..data.clusters.len())
            .map(|i| !on_axis[i] && data.clusters[i].alpha.im > 0.0)
            .collect();
        let down: Vec<bool> = (0..data.clusters.len())
            .map(|i| !on_axis[i] && data.clusters[i].alpha.im < 0.0)
            .collect();
        let diff = half_projector(&data, &up)? - half_projector(&data, &down)?;
        let j_amb = linalg::re_part(&(diff * Complex64::new(0.0, 1.0)));
        let j1 = compress(basis, &j_amb);
        let d = j1.nrows();
        let id = RMat::identity(d, d);
        let rs = linalg::spec_norm_r(&(&j1 * &j1 + &id));
        let omega1 = compress(basis, omega);
        let rh = linalg::spec_norm_r(&(j1.transpose() * &omega1 * &j1 - &omega1));
        Ok((j1, rs, rh))
    };
    let spectral_sigma2 = |basis: &RMat| -> Result<(RMat, f64, f64)> {
        let neg: Vec<bool> = (0..data.clusters.len())
            .map(|i| on_axis[i] && data.clusters[i].alpha.re < 0.0)
            .collect();
        let pos: Vec<bool> = (0..data.clusters.len())
            .map(|i| on_axis[i] && data.clusters[i].alpha.re > 0.0)
            .collect();
        let sig_amb =
            linalg::re_part(&(half_projector(&data, &neg)? - half_projector(&data, &pos)?));
        let sigma2 = compress(basis, &sig_amb);
        let d = sigma2.nrows();
        let id = RMat::identity(d, d);
        let rs = linalg::spec_norm_r(&(&sigma2 * &sigma2 - &id));
        let omega2 = compress(basis, omega);
        let rh = linalg::spec_norm_r(&(sigma2.transpose() * &omega2 * &sigma2 + &omega2));
        Ok((sigma2, rs, rh))
    };

    let empty = (RMat::zeros(0, 0), 0.0, 0.0);
    let (j1, residual_j1_structure, residual_j1_hermitian) = if h1_basis.ncols() == 0 {
        empty.clone()
    } else {
        match inst.mode() {
            Mode::Cr => own_block(&h1_basis)?,
            Mode::Lagrangian => spectral_j1(&h1_basis)?,
        }
    };
    let (sigma2, residual_sigma2_structure, residual_sigma2_hermitian) =
        if h2_basis.ncols() == 0 {
            empty
        } else {
            match inst.mode() {
                Mode::Cr => spectral_sigma2(&h2_basis)?,
                Mode::Lagrangian => own_block(&h2_basis)?,
            }
        };

    Ok(MixedResult {
        h1_basis,
        h2_basis,
        j1,
        sigma2,
        residual_j1_structure,
        residual_j1_hermitian,
        residual_sigma2_structure,
        residual_sigma2_hermitian,
        residual_block_orthogonality,
    })
}

/// One instance of a rank profile.
#[derive(Debug, Clone)]
pub struct RankRow {
    pub index: usize,
    pub kind: Kind,
    pub bad_rank: usize,
}

#[derive(Debug, Clone)]
pub struct RankProfile {
    pub rows: Vec<RankRow>,
    /// Indices whose bad rank strictly exceeds both neighbors' (runs of
    /// equal rank are flagged together): candidates for parameter values
    /// where upper semicontinuity of the bad rank bites.
    pub spikes: Vec<usize>,
}

/// Classify a family of instances sharing mode and dimension and flag
/// interior bad-rank spikes.
pub fn rank_profile(instances: &[Instance], tol: &Tolerances) -> Result<RankProfile> {
    let Some(first) = instances.first() else {
        return Err(Error::InvalidInput("rank_profile needs at least one instance".into()));
    };
    if instances
        .iter()
        .any(|i| i.mode() != first.mode() || i.n() != first.n())
    {
        return Err(Error::InvalidInput(
            "rank_profile instances must share mode and dimension".into(),
        ));
    }
    let rows: Vec<RankRow> = instances
        .iter()
        .enumerate()
        .map(|(index, inst)| {
            let c = classify(inst, tol);
            RankRow { index, kind: c.kind, bad_rank: c.bad_rank }
        })
        .collect();

    let ranks: Vec<usize> = rows.iter().map(|r| r.bad_rank).collect();
    Ok(RankProfile { rows, spikes: rank_spikes(&ranks) })
}

/// Indices of interior bad-rank spikes: maximal runs of equal rank that sit
/// strictly above both flanks. Endpoints never qualify.
pub fn rank_spikes(ranks: &[usize]) -> Vec<usize> {
    let mut spikes = Vec::new();
    let mut i = 1usize;
    while i < ranks.len().saturating_sub(1) {
        // Maximal run of equal rank starting at i.
        let mut j = i;
        while j + 1 < ranks.len() && ranks[j + 1] == ranks[i] {
            j += 1;
        }
        if j < ranks.len() - 1 && ranks[i] > ranks[i - 1] && ranks[i] > ranks[j + 1] {
            spikes.extend(i..=j);
        }
        i = j + 1;
    }
    spikes
}
