//! Instances, derived triples, and genericity.
//!
//! An instance is a nondegenerate 2-form omega on R^{2n} together with a
//! compatible candidate structure: an almost complex J (J^2 = -I) in CR
//! mode, or an almost product sigma (sigma^2 = I, tr sigma = 0) in
//! Lagrangian mode. Conventions: column vectors, omega(x, y) = x' Omega y,
//! g(x, y) = x' G y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cr,
    Lagrangian,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Cr => write!(f, "cr"),
            Mode::Lagrangian => write!(f, "lagrangian"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cr" => Ok(Mode::Cr),
            "lagrangian" | "lag" => Ok(Mode::Lagrangian),
            other => Err(Error::InvalidInput(format!("unknown mode '{other}'"))),
        }
    }
}

/// A validated (omega, structure) pair on R^{2n}.
#[derive(Debug, Clone)]
pub struct Instance {
    mode: Mode,
    omega: RMat,
    structure: RMat,
    n: usize,
}

impl Instance {
    pub fn new(mode: Mode, omega: RMat, structure: RMat, tol: &Tolerances) -> Result<Self> {
        tol.validate()?;
        let dim = omega.nrows();
        if !omega.is_square() || !structure.is_square() || structure.nrows() != dim {
            return Err(Error::InvalidInput(format!(
                "omega is {}x{}, structure is {}x{}; both must be square of equal size",
                omega.nrows(),
                omega.ncols(),
                structure.nrows(),
                structure.ncols()
            )));
        }
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "ambient dimension {dim} must be a positive even number"
            )));
        }
        let n = dim / 2;
        let oscale = linalg::spec_norm_r(&omega);
        if oscale == 0.0 {
            return Err(Error::DegenerateForm { context: "omega is zero".into(), value: 0.0 });
        }
        let skew = linalg::spec_norm_r(&(&omega + omega.transpose()));
        if skew > tol.tau_verify * oscale {
            return Err(Error::InvalidInput(format!(
                "omega is not antisymmetric: |omega + omega'| = {skew:.3e}"
            )));
        }
        let smin = omega.singular_values().min();
        if smin <= tol.tau_rank * oscale {
            return Err(Error::DegenerateForm {
                context: "omega is singular".into(),
                value: smin / oscale,
            });
        }
        let sscale = linalg::spec_norm_r(&structure).max(1.0);
        let id = RMat::identity(dim, dim);
        match mode {
            Mode::Cr => {
                let resid = linalg::spec_norm_r(&(&structure * &structure + &id));
                if resid > tol.tau_verify * sscale * sscale {
                    return Err(Error::InvalidInput(format!(
                        "J^2 differs from -I by {resid:.3e}"
                    )));
                }
            }
            Mode::Lagrangian => {
                let resid = linalg::spec_norm_r(&(&structure * &structure - &id));
                if resid > tol.tau_verify * sscale * sscale {
                    return Err(Error::InvalidInput(format!(
                        "sigma^2 differs from I by {resid:.3e}"
                    )));
                }
                let tr = structure.trace();
                if tr.abs() > tol.tau_verify * (dim as f64) * sscale {
                    return Err(Error::InvalidInput(format!(
                        "sigma has trace {tr:.3e}; eigenspaces must have equal dimension"
                    )));
                }
            }
        }
        Ok(Instance { mode, omega, structure, n })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn omega(&self) -> &RMat {
        &self.omega
    }

    /// J in CR mode, sigma in Lagrangian mode.
    pub fn structure(&self) -> &RMat {
        &self.structure
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Residual of the partial integrability identity, relative to |omega|:
    /// J' omega J = omega in CR mode, sigma' omega sigma = -omega in
    /// Lagrangian mode.
    pub fn partial_integrability_residual(&self) -> f64 {
        let s = &self.structure;
        let pulled = s.transpose() * &self.omega * s;
        let diff = match self.mode {
            Mode::Cr => pulled - &self.omega,
            Mode::Lagrangian => pulled + &self.omega,
        };
        linalg::spec_norm_r(&diff) / linalg::spec_norm_r(&self.omega)
    }

    pub fn is_partially_integrable(&self, tol: &Tolerances) -> bool {
        self.partial_integrability_residual() <= tol.tau_verify
    }
}

/// The derived triple (nu, g, A): the structure-compatible part of omega,
/// the induced symmetric form, and the structure operator A = -G^{-1} Omega
/// characterized by A' G = Omega.
#[derive(Debug, Clone)]
pub struct DerivedTriple {
    nu: RMat,
    g: RMat,
    a: RMat,
    signature_g: (usize, usize),
}

impl DerivedTriple {
    pub fn nu(&self) -> &RMat {
        &self.nu
    }

    pub fn g(&self) -> &RMat {
        &self.g
    }

    pub fn a(&self) -> &RMat {
        &self.a
    }

    pub fn signature_g(&self) -> (usize, usize) {
        self.signature_g
    }
}

/// Compute the derived triple. Fails with DegenerateForm when the induced
/// symmetric form g is singular at the rank tolerance; that is precisely
/// the boundary where the reduction problem changes character.
pub fn derive(inst: &Instance, tol: &Tolerances) -> Result<DerivedTriple> {
    let s = inst.structure();
    let omega = inst.omega();
    let pulled = s.transpose() * omega * s;
    let nu = match inst.mode() {
        Mode::Cr => (omega + &pulled) * 0.5,
        Mode::Lagrangian => (omega - &pulled) * 0.5,
    };
    let g = &nu * s;
    let gscale = linalg::spec_norm_r(&g);
    let sym_resid = linalg::spec_norm_r(&(&g - g.transpose()));
    if gscale == 0.0 || sym_resid > tol.tau_verify * gscale {
        return Err(Error::InternalInconsistency(format!(
            "derived g is not symmetric: residual {sym_resid:.3e} at scale {gscale:.3e}"
        )));
    }
    // Forces nondegeneracy as a side effect of reading off the signature.
    let signature_g = linalg::signature(&g, tol).map_err(|e| match e {
        Error::DegenerateForm { value, .. } => Error::DegenerateForm {
            context: "derived symmetric form g is singular".into(),
            value,
        },
        other => other,
    })?;
    let a = -linalg::solve_r(&g, omega)?;
    let resid = linalg::spec_norm_r(&(a.transpose() * &g - omega));
    let oscale = linalg::spec_norm_r(omega);
    if resid > 1e3 * tol.tau_verify * oscale {
        return Err(Error::NumericalFailure(format!(
            "A' G = Omega failed at residual {resid:.3e}; g is too ill-conditioned"
        )));
    }
    Ok(DerivedTriple { nu, g, a, signature_g })
}

/// The block model structures: J0 rotating (x, y) -> (-y, x) blockwise for
/// CR, sigma0 = diag(I_n, -I_n) for Lagrangian.
pub fn model_structure(mode: Mode, n: usize) -> RMat {
    let dim = 2 * n;
    match mode {
        Mode::Cr => RMat::from_fn(dim, dim, |i, j| {
            if i < n && j == i + n {
                -1.0
            } else if i >= n && j + n == i {
                1.0
            } else {
                0.0
            }
        }),
        Mode::Lagrangian => RMat::from_fn(dim, dim, |i, j| {
            if i != j {
                0.0
            } else if i < n {
                1.0
            } else {
                -1.0
            }
        }),
    }
}

/// Distance from an eigenvalue to the mode's bad set: the real axis for CR
/// (real eigenvalues of A obstruct the complex structure), the imaginary
/// axis for Lagrangian (imaginary eigenvalues obstruct the product one).
pub fn bad_set_distance(mode: Mode, alpha: num_complex::Complex64) -> f64 {
    match mode {
        Mode::Cr => alpha.im.abs(),
        Mode::Lagrangian => alpha.re.abs(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Outcome of the genericity test. Nondegeneracy of omega and nu is tracked
/// through their smallest singular values; the eigenvalue clusters of A carry
/// the distance of the spectrum to the mode's bad set (min_im for CR,
/// min_re for Lagrangian). The test reports; it never rejects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericityReport {
    pub mode: Mode,
    pub omega_ok: bool,
    pub omega_sigma_min: f64,
    pub nu_ok: bool,
    pub nu_sigma_min: f64,
    pub eigenvalues: Vec<ClusterInfo>,
    pub min_im: f64,
    pub min_re: f64,
    pub scale: f64,
    pub threshold: f64,
    pub generic: bool,
}

impl GenericityReport {
    /// Margin between the spectrum and the bad set for the report's mode.
    pub fn margin(&self) -> f64 {
        match self.mode {
            Mode::Cr => self.min_im,
            Mode::Lagrangian => self.min_re,
        }
    }

    pub fn summary(&self) -> String {
        if self.generic {
            format!(
                "generic: {} eigenvalue clusters, margin to the bad set \
                 {:.3e} (threshold {:.3e})",
                self.eigenvalues.len(),
                self.margin(),
                self.threshold
            )
        } else if !self.omega_ok || !self.nu_ok {
            format!(
                "not generic: degenerate form (sigma_min omega {:.3e}, nu {:.3e})",
                self.omega_sigma_min, self.nu_sigma_min
            )
        } else {
            let thresh = self.threshold;
            let offenders: Vec<String> = self
                .eigenvalues
                .iter()
                .filter(|c| bad_set_distance(self.mode, num_complex::Complex64::new(c.re, c.im)) <= thresh)
                .map(|c| format!("{:+.6e}{:+.6e}i (x{})", c.re, c.im, c.multiplicity))
                .collect();
            format!(
                "not generic in {} mode: clusters {} are within {:.3e} of the bad set",
                self.mode,
                offenders.join(", "),
                thresh
            )
        }
    }
}

/// Spectrum-side margins of an operator: clusters, scale, threshold, and the
/// distances of the spectrum to the real and imaginary axes.
pub(crate) fn spectral_margins(
    a: &RMat,
    tol: &Tolerances,
) -> Result<(Vec<ClusterInfo>, f64, f64, f64, f64)> {
    let clusters = linalg::eig_clusters(a, tol)?;
    let scale = linalg::spec_norm_r(a);
    let threshold = tol.tau_eig * scale;
    let infos: Vec<ClusterInfo> = clusters
        .iter()
        .map(|&(v, m)| ClusterInfo { re: v.re, im: v.im, multiplicity: m })
        .collect();
    let min_im = infos.iter().map(|c| c.im.abs()).fold(f64::INFINITY, f64::min);
    let min_re = infos.iter().map(|c| c.re.abs()).fold(f64::INFINITY, f64::min);
    Ok((infos, scale, threshold, min_im, min_re))
}

/// Genericity of an instance: omega and the derived nu nondegenerate, and
/// every eigenvalue cluster of A clear of the bad set by tau_eig times the
/// spectral scale of A.
pub fn check_genericity(
    inst: &Instance,
    triple: &DerivedTriple,
    tol: &Tolerances,
) -> Result<GenericityReport> {
    let sigma_range = |m: &RMat| -> (f64, f64) {
        let sv = m.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (min, max)
    };
    let (omega_sigma_min, omega_sigma_max) = sigma_range(inst.omega());
    let (nu_sigma_min, nu_sigma_max) = sigma_range(triple.nu());
    let omega_ok = omega_sigma_min > tol.tau_rank * omega_sigma_max;
    let nu_ok = nu_sigma_min > tol.tau_rank * nu_sigma_max;
    let (eigenvalues, scale, threshold, min_im, min_re) = spectral_margins(triple.a(), tol)?;
    let margin = match inst.mode() {
        Mode::Cr => min_im,
        Mode::Lagrangian => min_re,
    };
    Ok(GenericityReport {
        mode: inst.mode(),
        omega_ok,
        omega_sigma_min,
        nu_ok,
        nu_sigma_min,
        eigenvalues,
        min_im,
        min_re,
        scale,
        threshold,
        generic: omega_ok && nu_ok && margin > threshold,
    })
}

/// Diagnostics for an instance whose triple cannot be derived because the
/// hermitian part degenerates: the form singular values are still measured
/// directly, the spectrum columns stay empty, and the verdict is never
/// generic. This keeps reporting total on the degenerate branch.
pub fn degenerate_report(inst: &Instance, tol: &Tolerances) -> GenericityReport {
    let sigma_range = |m: &RMat| -> (f64, f64) {
        let sv = m.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (min, max)
    };
    let s = inst.structure();
    let omega = inst.omega();
    let pulled = s.transpose() * omega * s;
    let nu = match inst.mode() {
        Mode::Cr => (omega + &pulled) * 0.5,
        Mode::Lagrangian => (omega - &pulled) * 0.5,
    };
    let (omega_sigma_min, omega_sigma_max) = sigma_range(omega);
    let (nu_sigma_min, nu_sigma_max) = sigma_range(&nu);
    GenericityReport {
        mode: inst.mode(),
        omega_ok: omega_sigma_min > tol.tau_rank * omega_sigma_max,
        omega_sigma_min,
        nu_ok: nu_sigma_min > tol.tau_rank * nu_sigma_max,
        nu_sigma_min,
        eigenvalues: Vec::new(),
        min_im: 0.0,
        min_re: 0.0,
        scale: 0.0,
        threshold: 0.0,
        generic: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spec_norm_r;
    use crate::testutil::{random_instance, std2_cr, std2_lag, tol};
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    #[test]
    fn std2_cr_triple() {
        // Hand computation: nu = omega, G = I, A = J.
        let inst = std2_cr();
        let t = derive(&inst, &tol()).unwrap();
        assert!(spec_norm_r(&(t.nu() - inst.omega())) < 1e-14);
        assert!(spec_norm_r(&(t.g() - RMat::identity(2, 2))) < 1e-14);
        assert!(spec_norm_r(&(t.a() - inst.structure())) < 1e-14);
    }

    #[test]
    fn std2_lag_triple() {
        // Hand computation: nu = omega, G = [[0,-1],[-1,0]], A = -sigma.
        let inst = std2_lag();
        let t = derive(&inst, &tol()).unwrap();
        assert!(spec_norm_r(&(t.nu() - inst.omega())) < 1e-14);
        let g_expect = RMat::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(spec_norm_r(&(t.g() - g_expect)) < 1e-14);
        assert!(spec_norm_r(&(t.a() + inst.structure())) < 1e-14);
        assert_eq!(linalg::signature(t.g(), &tol()).unwrap(), (1, 1));
    }

    #[test]
    fn std_instances_are_partially_integrable_and_generic() {
        for inst in [std2_cr(), std2_lag()] {
            assert!(inst.is_partially_integrable(&tol()));
            let t = derive(&inst, &tol()).unwrap();
            let rep = check_genericity(&inst, &t, &tol()).unwrap();
            assert!(rep.generic, "{}", rep.summary());
            assert!(rep.omega_ok && rep.nu_ok);
            assert!((rep.margin() - 1.0).abs() < 1e-9);
        }
        assert_eq!(derive(&std2_cr(), &tol()).unwrap().signature_g(), (2, 0));
        assert_eq!(derive(&std2_lag(), &tol()).unwrap().signature_g(), (1, 1));
    }

    #[test]
    fn partially_integrable_recovers_structure() {
        // On a partially integrable instance the derived operator equals the
        // structure itself (CR) or its negative (Lagrangian).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in [Mode::Cr, Mode::Lagrangian] {
            for n in 1..4usize {
                let inst = crate::testutil::random_partially_integrable(&mut rng, mode, n);
                assert!(inst.is_partially_integrable(&tol()));
                let t = derive(&inst, &tol()).unwrap();
                let expect = match mode {
                    Mode::Cr => inst.structure().clone(),
                    Mode::Lagrangian => -inst.structure(),
                };
                let resid = spec_norm_r(&(t.a() - &expect));
                assert!(resid < 1e-9, "{mode} n={n}: A off by {resid:.3e}");
            }
        }
    }

    #[test]
    fn derive_is_natural() {
        // Positive scaling of omega scales nu and g, fixing A; a change of
        // frame T acts by congruence on the forms and conjugation on A.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [Mode::Cr, Mode::Lagrangian] {
            let inst = random_instance(&mut rng, mode, 2);
            let t = derive(&inst, &tol()).unwrap();
            for lambda in [0.5, 2.0, 10.0] {
                let scaled =
                    Instance::new(mode, inst.omega() * lambda, inst.structure().clone(), &tol())
                        .unwrap();
                let ts = derive(&scaled, &tol()).unwrap();
                assert!(spec_norm_r(&(ts.nu() - t.nu() * lambda)) < 1e-12 * lambda);
                assert!(spec_norm_r(&(ts.g() - t.g() * lambda)) < 1e-12 * lambda);
                assert!(spec_norm_r(&(ts.a() - t.a())) < 1e-10);
            }
            let tr = crate::testutil::well_conditioned(&mut rng, inst.dim());
            let tr_inv = tr.clone().try_inverse().unwrap();
            let omega2 = tr_inv.transpose() * inst.omega() * &tr_inv;
            let s2 = &tr * inst.structure() * &tr_inv;
            let moved = Instance::new(mode, omega2, s2, &tol()).unwrap();
            let tm = derive(&moved, &tol()).unwrap();
            let expect_a = &tr * t.a() * &tr_inv;
            let resid = spec_norm_r(&(tm.a() - &expect_a));
            assert!(resid < 1e-8 * spec_norm_r(&expect_a).max(1.0));
        }
    }

    #[test]
    fn derived_triple_invariants() {
        // Structural identities that hold for every derived triple:
        // g symmetric, S-compatibility of nu, A' G = Omega, A g-skew,
        // and the anticommutation {S, A} = -2 I.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for mode in [Mode::Cr, Mode::Lagrangian] {
            for n in 1..4usize {
                for _ in 0..20 {
                    let inst = random_instance(&mut rng, mode, n);
                    let t = derive(&inst, &tol()).unwrap();
                    let (g, a, nu) = (t.g(), t.a(), t.nu());
                    let s = inst.structure();
                    let dim = inst.dim();
                    let scale = spec_norm_r(g).max(spec_norm_r(a));
                    assert!(spec_norm_r(&(g - g.transpose())) < 1e-10 * scale);
                    let pulled = s.transpose() * nu * s;
                    let nu_resid = match mode {
                        Mode::Cr => spec_norm_r(&(&pulled - nu)),
                        Mode::Lagrangian => spec_norm_r(&(&pulled + nu)),
                    };
                    assert!(nu_resid < 1e-9 * spec_norm_r(nu));
                    assert!(
                        spec_norm_r(&(a.transpose() * g - inst.omega())) < 1e-9 * scale,
                        "A' G = Omega violated"
                    );
                    assert!(
                        spec_norm_r(&(a.transpose() * g + g * a)) < 1e-8 * scale * scale,
                        "A not g-skew"
                    );
                    let anti = s * a + a * s + RMat::identity(dim, dim) * 2.0;
                    assert!(
                        spec_norm_r(&anti) < 1e-8 * scale.max(1.0),
                        "{{S, A}} = -2I violated by {:.3e}",
                        spec_norm_r(&anti)
                    );
                    let pulled_g = s.transpose() * g * s;
                    let g_resid = match mode {
                        Mode::Cr => spec_norm_r(&(&pulled_g - g)),
                        Mode::Lagrangian => spec_norm_r(&(&pulled_g + g)),
                    };
                    assert!(g_resid < 1e-8 * spec_norm_r(g), "structure not g-compatible");
                }
            }
        }
    }

    #[test]
    fn rejects_malformed_inputs() {
        let t = tol();
        let omega = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let not_skew = RMat::identity(2, 2);
        let j = RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(
            Instance::new(Mode::Cr, not_skew, j.clone(), &t),
            Err(Error::InvalidInput(_))
        ));
        let not_j = RMat::identity(2, 2);
        assert!(matches!(
            Instance::new(Mode::Cr, omega.clone(), not_j, &t),
            Err(Error::InvalidInput(_))
        ));
        // sigma with nonzero trace
        let bad_sigma = RMat::identity(2, 2);
        assert!(matches!(
            Instance::new(Mode::Lagrangian, omega.clone(), bad_sigma, &t),
            Err(Error::InvalidInput(_))
        ));
        // singular omega
        let sing = RMat::zeros(2, 2);
        assert!(matches!(
            Instance::new(Mode::Cr, sing, j.clone(), &t),
            Err(Error::DegenerateForm { .. })
        ));
        // odd dimension
        let o3 = RMat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            Instance::new(Mode::Cr, o3.clone(), o3, &t),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn genericity_margins_separate_the_axes() {
        // Spectrum {+1, -1}: distance 1 from the imaginary axis, distance 0
        // from the real one.
        let a = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (_, _, _, min_im, min_re) = spectral_margins(&a, &tol()).unwrap();
        assert_eq!(min_im, 0.0);
        assert!((min_re - 1.0).abs() < 1e-12);
        // STD2_LAG realizes that spectrum: generic as given, and its report
        // carries both margins.
        let inst = std2_lag();
        let t = derive(&inst, &tol()).unwrap();
        let rep = check_genericity(&inst, &t, &tol()).unwrap();
        assert!(rep.generic);
        assert_eq!(rep.min_im, 0.0);
        assert!((rep.min_re - 1.0).abs() < 1e-12);
    }
}
