//! File formats: instance inputs and analysis reports, as strict JSON.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which is enough for every f64 to survive a write/parse cycle bit for
//! bit. Parsing rejects unknown fields so a typo in an input file fails
//! loudly instead of being ignored.

use serde::{Deserialize, Serialize};

use crate::classify::{Classification, EigRow, Kind, MixedResult};
use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::reduction::ReductionResult;
use crate::structures::{GenericityReport, Instance, Mode};
use crate::tol::Tolerances;

/// Pretty JSON formatter writing every float in scientific notation with a
/// 16-digit mantissa (17 significant digits), the shortest width that
/// round-trips every f64 exactly.
struct Formatter17 {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter17 {
    fn new() -> Self {
        Formatter17 { inner: serde_json::ser::PrettyFormatter::new() }
    }
}

macro_rules! delegate_fmt {
    ($($name:ident),*) => {
        $(fn $name<W>(&mut self, writer: &mut W) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            self.inner.$name(writer)
        })*
    };
}

impl serde_json::ser::Formatter for Formatter17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    delegate_fmt!(begin_array, end_array, begin_object, end_object);

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Serialize any value with the 17-digit float format, pretty-printed.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let fmt = Formatter17::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| Error::InternalInconsistency(e.to_string()))
}

pub fn from_json_str<'a, T: Deserialize<'a>>(s: &'a str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("parse error: {e}")))
}

#[derive(Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_rank: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_eig: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_verify: Option<f64>,
}

impl ToleranceSection {
    pub fn apply(&self, t: &mut Tolerances) {
        if let Some(v) = self.tau_rank {
            t.tau_rank = v;
        }
        if let Some(v) = self.tau_eig {
            t.tau_eig = v;
        }
        if let Some(v) = self.tau_verify {
            t.tau_verify = v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tau_rank.is_none() && self.tau_eig.is_none() && self.tau_verify.is_none()
    }
}

/// On-disk instance: mode, half-dimension, and the two matrices as nested
/// row-major arrays. Unknown fields are rejected.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub mode: String,
    pub n: usize,
    pub omega: Vec<Vec<f64>>,
    pub structure: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

pub fn mode_from_str(s: &str) -> Result<Mode> {
    match s {
        "cr" => Ok(Mode::Cr),
        "lagrangian" => Ok(Mode::Lagrangian),
        other => Err(Error::InvalidInput(format!(
            "mode must be \"cr\" or \"lagrangian\", got \"{other}\""
        ))),
    }
}

pub fn mode_to_str(mode: Mode) -> &'static str {
    match mode {
        Mode::Cr => "cr",
        Mode::Lagrangian => "lagrangian",
    }
}

pub fn rows_to_rmat(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<RMat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput(format!(
            "{what} must be a {dim}x{dim} row-major matrix"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(RMat::from_row_slice(dim, dim, &flat))
}

pub fn rmat_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl InstanceFile {
    /// Resolve the file into a validated instance, with the file's
    /// tolerance section applied on top of the given base tolerances.
    pub fn to_instance(&self, base: &Tolerances) -> Result<(Instance, Tolerances)> {
        let mode = mode_from_str(&self.mode)?;
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        let dim = 2 * self.n;
        let omega = rows_to_rmat(&self.omega, dim, "omega")?;
        let structure = rows_to_rmat(&self.structure, dim, "structure")?;
        let mut tol = *base;
        if let Some(section) = &self.tolerances {
            section.apply(&mut tol);
        }
        tol.validate()?;
        let inst = Instance::new(mode, omega, structure, &tol)?;
        Ok((inst, tol))
    }

    pub fn from_instance(inst: &Instance, label: Option<String>) -> Self {
        InstanceFile {
            mode: mode_to_str(inst.mode()).to_string(),
            n: inst.n(),
            omega: rmat_to_rows(inst.omega()),
            structure: rmat_to_rows(inst.structure()),
            tolerances: None,
            label,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct GenericitySection {
    pub omega_ok: bool,
    pub omega_sigma_min: f64,
    pub nu_ok: bool,
    pub nu_sigma_min: f64,
    pub eigenvalues: Vec<ClusterSection>,
    pub min_im: f64,
    pub min_re: f64,
    pub scale: f64,
    pub threshold: f64,
    pub generic: bool,
}

impl GenericitySection {
    pub fn from_report(r: &GenericityReport) -> Self {
        GenericitySection {
            omega_ok: r.omega_ok,
            omega_sigma_min: r.omega_sigma_min,
            nu_ok: r.nu_ok,
            nu_sigma_min: r.nu_sigma_min,
            eigenvalues: r
                .eigenvalues
                .iter()
                .map(|c| ClusterSection { re: c.re, im: c.im, multiplicity: c.multiplicity })
                .collect(),
            min_im: r.min_im,
            min_re: r.min_re,
            scale: r.scale,
            threshold: r.threshold,
            generic: r.generic,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct EigRowSection {
    pub re: f64,
    pub im: f64,
    pub dim: usize,
    pub axis_distance: f64,
}

impl EigRowSection {
    pub fn from_row(r: &EigRow) -> Self {
        EigRowSection {
            re: r.alpha.re,
            im: r.alpha.im,
            dim: r.dim,
            axis_distance: r.axis_distance,
        }
    }
}

/// One named invariant with its measured value, its bound, and whether it
/// held. The report verdict is the conjunction.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckSection {
    pub fn measured(name: &str, value: f64, bound: f64) -> Self {
        CheckSection { name: name.to_string(), value, bound, pass: value <= bound }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ToleranceValues {
    pub tau_rank: f64,
    pub tau_eig: f64,
    pub tau_verify: f64,
}

impl ToleranceValues {
    pub fn from_tolerances(t: &Tolerances) -> Self {
        ToleranceValues { tau_rank: t.tau_rank, tau_eig: t.tau_eig, tau_verify: t.tau_verify }
    }
}

/// Output of the reduce command. K, e and the residuals are present only
/// when the reduction ran to completion; a non-generic instance still gets
/// its genericity section and eigenvalue table.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mode: String,
    pub n: usize,
    pub genericity: GenericitySection,
    pub eigen_table: Vec<EigRowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
    /// det(e) as [re, im]; diagnostic only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_e: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_structure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_hermitian: Option<f64>,
    pub seed: u64,
    pub tolerances: ToleranceValues,
    pub checks: Vec<CheckSection>,
    /// "pass" exactly when every check passed.
    pub verdict: String,
}

impl ReportFile {
    /// Assemble the report for a completed or refused reduction. `outcome`
    /// is None when the instance was not generic.
    pub fn build(
        label: Option<String>,
        inst: &Instance,
        report: &GenericityReport,
        eigen_table: &[EigRow],
        outcome: Option<&ReductionResult>,
        seed: u64,
        tol: &Tolerances,
    ) -> Self {
        let oscale = crate::linalg::spec_norm_r(inst.omega()).max(1.0);
        let mut checks = vec![CheckSection {
            name: "generic".into(),
            value: report.margin(),
            bound: report.threshold,
            pass: report.generic,
        }];
        if let Some(r) = outcome {
            checks.push(CheckSection::measured(
                "structure_identity",
                r.residual_structure,
                tol.tau_verify,
            ));
            checks.push(CheckSection::measured(
                "hermitian_identity",
                r.residual_hermitian,
                tol.tau_verify * oscale,
            ));
            if inst.mode() == Mode::Lagrangian {
                checks.push(CheckSection::measured(
                    "trace_free",
                    r.k.trace().abs(),
                    tol.tau_verify * inst.dim() as f64,
                ));
            }
        }
        let verdict =
            if checks.iter().all(|c| c.pass) && outcome.is_some() { "pass" } else { "fail" };
        ReportFile {
            label,
            mode: mode_to_str(inst.mode()).to_string(),
            n: inst.n(),
            genericity: GenericitySection::from_report(report),
            eigen_table: eigen_table.iter().map(EigRowSection::from_row).collect(),
            k: outcome.map(|r| rmat_to_rows(&r.k)),
            e: outcome.map(|r| rmat_to_rows(&crate::linalg::re_part(&r.e.e))),
            det_e: outcome.map(|r| [r.det_e.re, r.det_e.im]),
            residual_structure: outcome.map(|r| r.residual_structure),
            residual_hermitian: outcome.map(|r| r.residual_hermitian),
            seed,
            tolerances: ToleranceValues::from_tolerances(tol),
            checks,
            verdict: verdict.to_string(),
        }
    }
}

/// Output of the classify command.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ClassifyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mode: String,
    pub n: usize,
    pub kind: String,
    pub bad_rank: usize,
    pub eigen_table: Vec<EigRowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed: Option<MixedSection>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct MixedSection {
    pub h1_dim: usize,
    pub h2_dim: usize,
    pub h1_basis: Vec<Vec<f64>>,
    pub h2_basis: Vec<Vec<f64>>,
    pub j1: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub residual_j1_structure: f64,
    pub residual_j1_hermitian: f64,
    pub residual_sigma2_structure: f64,
    pub residual_sigma2_hermitian: f64,
    pub residual_block_orthogonality: f64,
}

pub fn kind_to_str(kind: Kind) -> &'static str {
    match kind {
        Kind::CrGeneric => "cr_generic",
        Kind::LagrangianGeneric => "lagrangian_generic",
        Kind::Mixed => "mixed",
        Kind::DegenerateForm => "degenerate_form",
    }
}

impl ClassifyFile {
    pub fn build(
        label: Option<String>,
        mode: Mode,
        n: usize,
        c: &Classification,
        mixed: Option<&MixedResult>,
    ) -> Self {
        ClassifyFile {
            label,
            mode: mode_to_str(mode).to_string(),
            n,
            kind: kind_to_str(c.kind).to_string(),
            bad_rank: c.bad_rank,
            eigen_table: c.eigen_table.iter().map(EigRowSection::from_row).collect(),
            mixed: mixed.map(|m| MixedSection {
                h1_dim: m.h1_basis.ncols(),
                h2_dim: m.h2_basis.ncols(),
                h1_basis: rmat_to_rows(&m.h1_basis),
                h2_basis: rmat_to_rows(&m.h2_basis),
                j1: rmat_to_rows(&m.j1),
                sigma2: rmat_to_rows(&m.sigma2),
                residual_j1_structure: m.residual_j1_structure,
                residual_j1_hermitian: m.residual_j1_hermitian,
                residual_sigma2_structure: m.residual_sigma2_structure,
                residual_sigma2_hermitian: m.residual_sigma2_hermitian,
                residual_block_orthogonality: m.residual_block_orthogonality,
            }),
        }
    }
}
