//! Shared fixtures for unit tests. Compiled only for tests; integration
//! tests use the public generator API instead.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::RMat;
use crate::structures::{derive, Instance, Mode};
use crate::tol::Tolerances;

pub(crate) fn tol() -> Tolerances {
    Tolerances::default()
}

pub(crate) fn std2_cr() -> Instance {
    let omega = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let j = RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    Instance::new(Mode::Cr, omega, j, &tol()).unwrap()
}

pub(crate) fn std2_lag() -> Instance {
    let omega = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let sigma = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    Instance::new(Mode::Lagrangian, omega, sigma, &tol()).unwrap()
}

/// Block-diagonal sum of two copies of std2_cr.
pub(crate) fn std4_cr() -> Instance {
    let block = |m: &RMat| {
        let mut out = RMat::zeros(4, 4);
        out.view_mut((0, 0), (2, 2)).copy_from(m);
        out.view_mut((2, 2), (2, 2)).copy_from(m);
        out
    };
    let small = std2_cr();
    Instance::new(Mode::Cr, block(small.omega()), block(small.structure()), &tol()).unwrap()
}

pub(crate) fn random_rmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
    RMat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random invertible matrix with singular values in [0.5, 2].
pub(crate) fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> RMat {
    let a = random_rmat(rng, n, n);
    let svd = a.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let d = RMat::from_fn(n, n, |i, j| if i == j { rng.gen_range(0.5..2.0) } else { 0.0 });
    u * d * vt
}

pub(crate) use crate::structures::model_structure;

/// Arbitrary valid instance: conjugated model structure, random
/// nondegenerate skew omega, rejected until the derived g is nonsingular.
pub(crate) fn random_instance(rng: &mut ChaCha8Rng, mode: Mode, n: usize) -> Instance {
    let dim = 2 * n;
    let s0 = model_structure(mode, n);
    for _ in 0..100 {
        let t = well_conditioned(rng, dim);
        let tinv = t.clone().try_inverse().unwrap();
        let s = &t * &s0 * &tinv;
        let r = random_rmat(rng, dim, dim);
        let omega = &r - r.transpose();
        let Ok(inst) = Instance::new(mode, omega, s.clone(), &tol()) else {
            continue;
        };
        if derive(&inst, &tol()).is_ok() {
            return inst;
        }
    }
    panic!("no valid random instance after 100 draws");
}

/// Instance whose omega is exactly structure-compatible: symmetrized in the
/// model frame, then moved by a well-conditioned change of basis.
pub(crate) fn random_partially_integrable(rng: &mut ChaCha8Rng, mode: Mode, n: usize) -> Instance {
    let dim = 2 * n;
    let s0 = model_structure(mode, n);
    for _ in 0..100 {
        let r = random_rmat(rng, dim, dim);
        let w = &r - r.transpose();
        let pulled = s0.transpose() * &w * &s0;
        let omega0 = match mode {
            Mode::Cr => (&w + &pulled) * 0.5,
            Mode::Lagrangian => (&w - &pulled) * 0.5,
        };
        let t = well_conditioned(rng, dim);
        let tinv = t.clone().try_inverse().unwrap();
        let s = &t * &s0 * &tinv;
        let omega = tinv.transpose() * &omega0 * &tinv;
        let Ok(inst) = Instance::new(mode, omega, s, &tol()) else {
            continue;
        };
        if derive(&inst, &tol()).is_ok() {
            return inst;
        }
    }
    panic!("no valid partially integrable instance after 100 draws");
}
