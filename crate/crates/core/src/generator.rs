//! Instance generators: exactly partially integrable pairs, generic
//! perturbations of them, and one-parameter families driven into the
//! degenerate set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::structures::{self, Instance, Mode};
use crate::tol::Tolerances;

/// Whether generated instances stay in the standard basis or are pulled
/// back along a seeded well-conditioned change of coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Standard,
    RandomConjugation,
}

/// Parameters for the generators. `signature` is the (p, q) of the
/// hermitian form in CR mode with p + q = n; Lagrangian mode ignores it
/// (the split signature is forced).
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub mode: Mode,
    pub n: usize,
    pub signature: (usize, usize),
    pub perturbation: f64,
    pub seed: u64,
    pub frame: Frame,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if self.mode == Mode::Cr && self.signature.0 + self.signature.1 != self.n {
            return Err(Error::InvalidInput(format!(
                "signature ({}, {}) does not sum to n = {}",
                self.signature.0, self.signature.1, self.n
            )));
        }
        if !self.perturbation.is_finite() || self.perturbation < 0.0 {
            return Err(Error::InvalidInput(format!(
                "perturbation must be finite and nonnegative, got {}",
                self.perturbation
            )));
        }
        Ok(())
    }
}

/// Random real matrix with singular values clamped into [1/2, 2], so its
/// condition number never exceeds 4.
fn well_conditioned(rng: &mut ChaCha8Rng, dim: usize) -> RMat {
    let m = RMat::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let s = RMat::from_diagonal(&svd.singular_values.map(|v| v.clamp(0.5, 2.0)));
    u * s * vt
}

/// The standard pair for the requested mode and signature.
///
/// CR: G0 = diag(e, e) with e the sign pattern of the signature, J0 the
/// block rotation, omega0 = -G0 J0. Lagrangian: omega0 the standard
/// symplectic form, sigma0 = diag(Id, -Id).
fn standard_pair(mode: Mode, n: usize, signature: (usize, usize)) -> (RMat, RMat) {
    let s0 = crate::structures::model_structure(mode, n);
    let omega0 = match mode {
        Mode::Cr => {
            let mut e = RMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                let v = if i < signature.0 { 1.0 } else { -1.0 };
                e[(i, i)] = v;
                e[(i + n, i + n)] = v;
            }
            -&e * &s0
        }
        Mode::Lagrangian => {
            let mut w = RMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                w[(i, i + n)] = 1.0;
                w[(i + n, i)] = -1.0;
            }
            w
        }
    };
    (omega0, s0)
}

fn conjugated(
    mode: Mode,
    omega: &RMat,
    s: &RMat,
    frame: Frame,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<Instance> {
    match frame {
        Frame::Standard => Instance::new(mode, omega.clone(), s.clone(), tol),
        Frame::RandomConjugation => {
            let t = well_conditioned(rng, omega.nrows());
            let tinv = linalg::try_inverse_r(&t)?;
            Instance::new(mode, t.transpose() * omega * &t, &tinv * s * &t, tol)
        }
    }
}

/// An exactly partially integrable instance: the standard pair, optionally
/// pulled back along a seeded change of coordinates.
pub fn gen_partially_integrable(spec: &GeneratorSpec, tol: &Tolerances) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (omega0, s0) = standard_pair(spec.mode, spec.n, spec.signature);
    conjugated(spec.mode, &omega0, &s0, spec.frame, &mut rng, tol)
}

/// Project a skew matrix onto the directions that break partial
/// integrability: anti-hermitian for J, sigma-invariant for sigma.
fn breaking_part(mode: Mode, s: &RMat, w0: &RMat) -> RMat {
    let skew = (w0 - &w0.transpose()) * 0.5;
    let pulled = s.transpose() * &skew * s;
    match mode {
        Mode::Cr => (&skew - &pulled) * 0.5,
        Mode::Lagrangian => (&skew + &pulled) * 0.5,
    }
}

/// The seeded perturbation direction of a generator family: the first
/// draw, normalized to the scale of the base form. Zero when the breaking
/// space is trivial (n = 1).
pub fn family_direction(spec: &GeneratorSpec, tol: &Tolerances) -> Result<(Instance, RMat)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (omega0, s0) = standard_pair(spec.mode, spec.n, spec.signature);
    let base = conjugated(spec.mode, &omega0, &s0, spec.frame, &mut rng, tol)?;
    let dim = 2 * spec.n;
    let w0 = RMat::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let w = breaking_part(spec.mode, base.structure(), &w0);
    let wn = linalg::spec_norm_r(&w);
    let oscale = linalg::spec_norm_r(base.omega());
    let w = if wn < 1e-12 * oscale { RMat::zeros(dim, dim) } else { &w * (oscale / wn) };
    Ok((base, w))
}

/// A generic instance near the partially integrable one: base + eps * W
/// with W a seeded random breaking direction, resampled (at most 100
/// times) until the spectral margin clears twice the genericity threshold.
pub fn gen_generic(spec: &GeneratorSpec, tol: &Tolerances) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (omega0, s0) = standard_pair(spec.mode, spec.n, spec.signature);
    let base = conjugated(spec.mode, &omega0, &s0, spec.frame, &mut rng, tol)?;
    let dim = 2 * spec.n;
    let oscale = linalg::spec_norm_r(base.omega());

    let mut best_margin = f64::NEG_INFINITY;
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        let w0 = RMat::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let w = breaking_part(spec.mode, base.structure(), &w0);
        let wn = linalg::spec_norm_r(&w);
        let omega = if wn < 1e-12 * oscale {
            // The breaking space is trivial; the base is the whole family.
            base.omega().clone()
        } else {
            base.omega() + &w * (spec.perturbation * oscale / wn)
        };
        let Ok(inst) = Instance::new(spec.mode, omega, base.structure().clone(), tol) else {
            continue;
        };
        let Ok(tri) = structures::derive(&inst, tol) else { continue };
        let Ok(report) = structures::check_genericity(&inst, &tri, tol) else { continue };
        let margin = report.margin();
        if report.omega_ok && report.nu_ok && margin >= 2.0 * report.threshold {
            return Ok(inst);
        }
        best_margin = best_margin.max(margin);
    }
    Err(Error::GenerationFailure { attempts: ATTEMPTS, best_margin })
}

/// Drive a CR family into the degenerate set: a base with signature
/// (n-1, 1) and the fixed breaking direction coupling the definite and
/// indefinite complex lines. The spectral margin of omega0 + t W decays to
/// zero at a finite t*; past it the affected eigenvalues sit on the real
/// axis. Returns an instance slightly beyond the crossing together with
/// t*. The seed only moves the basis.
/// The standard degenerating CR family in half-dimension n: base pair of
/// indefinite signature (n-1, 1) and the line Omega(t) = Omega_0 + t W.
/// Returns (Omega_0, J_0, W). The eigenvalues of the structure operator
/// leave the imaginary axis as t grows; a definite base never crosses,
/// which is why the base takes one negative direction.
pub fn degenerate_family(n: usize) -> Result<(RMat, RMat, RMat)> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "degenerate families need n >= 2: at n = 1 the margin never closes".into(),
        ));
    }
    let (omega0, s0) = standard_pair(Mode::Cr, n, (n - 1, 1));
    // W = x_1 ^ x_n - y_1 ^ y_n, anti-hermitian for J0 and supported on
    // the plane spanned by the first (positive) and last (negative)
    // complex coordinate lines.
    let mut w = RMat::zeros(2 * n, 2 * n);
    w[(0, n - 1)] = 1.0;
    w[(n - 1, 0)] = -1.0;
    w[(n, 2 * n - 1)] = -1.0;
    w[(2 * n - 1, n)] = 1.0;
    Ok((omega0, s0, w))
}

pub fn gen_degenerate(n: usize, seed: u64, tol: &Tolerances) -> Result<(Instance, f64)> {
    let mode = Mode::Cr;
    let (omega0, s0, w) = degenerate_family(n)?;

    // Margin of the family at parameter t, if the instance makes sense.
    let margin_at = |t: f64| -> Option<f64> {
        let omega = &omega0 + &w * t;
        let inst = Instance::new(mode, omega, s0.clone(), tol).ok()?;
        let tri = structures::derive(&inst, tol).ok()?;
        let report = structures::check_genericity(&inst, &tri, tol).ok()?;
        if !(report.omega_ok && report.nu_ok) {
            return None;
        }
        Some(report.margin() - report.threshold)
    };

    // Bracket the crossing on (0, 100], then bisect.
    let mut lo = 0.0f64;
    let mut hi = None;
    let mut t = 0.125;
    while t <= 100.0 {
        match margin_at(t) {
            Some(m) if m > 0.0 => lo = t,
            _ => {
                hi = Some(t);
                break;
            }
        }
        t *= 2.0;
    }
    let Some(mut hi) = hi else {
        return Err(Error::GenerationFailure {
            attempts: 0,
            best_margin: margin_at(lo).unwrap_or(f64::NAN),
        });
    };
    if lo == 0.0 {
        return Err(Error::InternalInconsistency(
            "degenerate family is already degenerate at its base".into(),
        ));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match margin_at(mid) {
            Some(m) if m > 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    let t_star = 0.5 * (lo + hi);

    // Walk past the crossing until the instance is clean again: valid,
    // nondegenerate form, every eigenvalue cleanly on or off the real
    // axis, with the on-axis part present and away from zero.
    let mut inst_beyond = None;
    let mut step = 1e-3 * t_star.max(1.0);
    for _ in 0..40 {
        let t = t_star + step;
        step *= 2.0;
        let omega = &omega0 + &w * t;
        let Ok(inst) = Instance::new(mode, omega, s0.clone(), tol) else { continue };
        let Ok(tri) = structures::derive(&inst, tol) else { continue };
        let Ok(report) = structures::check_genericity(&inst, &tri, tol) else { continue };
        if !(report.omega_ok && report.nu_ok) {
            continue;
        }
        let clean = report.eigenvalues.iter().all(|c| {
            let on_axis = c.im.abs() <= report.threshold;
            let off_axis = c.im.abs() >= 2.0 * report.threshold;
            let away_from_zero = c.re.abs() >= 2.0 * report.threshold;
            (on_axis && away_from_zero) || off_axis
        });
        let on_axis_rank: usize = report
            .eigenvalues
            .iter()
            .filter(|c| c.im.abs() <= report.threshold)
            .map(|c| c.multiplicity)
            .sum();
        if clean && on_axis_rank > 0 {
            inst_beyond = Some(inst);
            break;
        }
    }
    let Some(inst) = inst_beyond else {
        return Err(Error::GenerationFailure { attempts: 40, best_margin: 0.0 });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = well_conditioned(&mut rng, 2 * n);
    let tinv = linalg::try_inverse_r(&t)?;
    let moved = Instance::new(
        mode,
        t.transpose() * inst.omega() * &t,
        &tinv * inst.structure() * &t,
        tol,
    )?;
    Ok((moved, t_star))
}
