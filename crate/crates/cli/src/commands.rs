use std::fs;
use std::path::{Path, PathBuf};

use crreduce_core::io::{
    self, ClassifyFile, CheckSection, InstanceFile, ReportFile, ToleranceValues,
};
use crreduce_core::linalg::spec_norm_r;
use crreduce_core::structures::{check_genericity, degenerate_report};
use crreduce_core::{
    classify, derive, gen_degenerate, gen_generic, gen_partially_integrable, mixed_reduce,
    rank_spikes, reduce, verify_uniqueness, Classification, Error as CoreError, Frame,
    GeneratorSpec, Instance, Kind, Mode, RMat, Tolerances,
};

use crate::args::{GenKind, Seeds, Signature, TolArgs};
use crate::report::{FamilyFile, PathFile, SampleRow, StepRow, VerifyFile};

/// Command failure, carrying the process exit code. 0 is reserved for
/// success, 1 for input problems, 2 for non-generic instances, 3 for
/// property failures, 4 for generation failures.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    fn input(message: impl Into<String>) -> Self {
        CmdError { code: 1, message: message.into() }
    }

    fn not_generic(message: impl Into<String>) -> Self {
        CmdError { code: 2, message: message.into() }
    }

    fn property(message: impl Into<String>) -> Self {
        CmdError { code: 3, message: message.into() }
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::NotGeneric { report } => CmdError::not_generic(report.summary()),
            CoreError::GenerationFailure { .. } => CmdError { code: 4, message: e.to_string() },
            _ => CmdError::input(e.to_string()),
        }
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

/// Default tolerances with the CRREDUCE_TOL override applied. One value
/// sets tau_verify; three comma-separated values set all of them.
fn env_tolerances() -> CmdResult<Tolerances> {
    let mut t = Tolerances::default();
    let Ok(raw) = std::env::var("CRREDUCE_TOL") else {
        return Ok(t);
    };
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CmdError::input(format!("CRREDUCE_TOL: {e}")))?;
    match parts[..] {
        [verify] => t.tau_verify = verify,
        [rank, eig, verify] => {
            t.tau_rank = rank;
            t.tau_eig = eig;
            t.tau_verify = verify;
        }
        _ => {
            return Err(CmdError::input(
                "CRREDUCE_TOL takes one value (tau_verify) or three (tau_rank,tau_eig,tau_verify)",
            ))
        }
    }
    Ok(t)
}

fn apply_flags(mut t: Tolerances, flags: &TolArgs) -> CmdResult<Tolerances> {
    if let Some(v) = flags.tol_rank {
        t.tau_rank = v;
    }
    if let Some(v) = flags.tol_eig {
        t.tau_eig = v;
    }
    if let Some(v) = flags.tol_verify {
        t.tau_verify = v;
    }
    t.validate()?;
    Ok(t)
}

fn read_instance_file(path: &Path) -> CmdResult<InstanceFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
    io::from_json_str(&text).map_err(|e| CmdError::input(format!("{}: {e}", path.display())))
}

/// Resolve tolerances (defaults, then CRREDUCE_TOL, then the file section,
/// then flags) and attempt construction. The construction result is kept
/// separate so classify can totalize a degenerate form.
fn prepare(
    file: &InstanceFile,
    flags: &TolArgs,
) -> CmdResult<(crreduce_core::Result<Instance>, Tolerances)> {
    let mut t = env_tolerances()?;
    if let Some(section) = &file.tolerances {
        section.apply(&mut t);
    }
    let t = apply_flags(t, flags)?;
    let mode = io::mode_from_str(&file.mode)?;
    if file.n == 0 {
        return Err(CmdError::input("n must be at least 1"));
    }
    let dim = 2 * file.n;
    let omega = io::rows_to_rmat(&file.omega, dim, "omega")?;
    let structure = io::rows_to_rmat(&file.structure, dim, "structure")?;
    Ok((Instance::new(mode, omega, structure, &t), t))
}

fn write_output(json: &str, output: Option<&Path>) -> CmdResult<()> {
    match output {
        Some(path) => fs::write(path, json.as_bytes())
            .map_err(|e| CmdError::input(format!("{}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

pub fn cmd_reduce(
    input: &Path,
    seed: u64,
    output: Option<&Path>,
    flags: &TolArgs,
) -> CmdResult<()> {
    let file = read_instance_file(input)?;
    let (built, tol) = prepare(&file, flags)?;
    let inst = built.map_err(|e| CmdError::input(format!("invalid instance: {e}")))?;

    match reduce(&inst, seed, &tol) {
        Ok(res) => {
            let tri = derive(&inst, &tol)?;
            let report = check_genericity(&inst, &tri, &tol)?;
            let table = classify(&inst, &tol).eigen_table;
            let rf =
                ReportFile::build(file.label.clone(), &inst, &report, &table, Some(&res), seed, &tol);
            write_output(&io::to_json_string(&rf)?, output)?;
            eprintln!(
                "reduce: {} (structure residual {:.3e}, hermitian residual {:.3e})",
                rf.verdict, res.residual_structure, res.residual_hermitian
            );
            if rf.verdict == "pass" {
                Ok(())
            } else {
                let failed = rf.checks.iter().find(|c| !c.pass);
                Err(CmdError::property(match failed {
                    Some(c) => format!("{} residual {:.3e} exceeds {:.3e}", c.name, c.value, c.bound),
                    None => "report verdict fail".into(),
                }))
            }
        }
        Err(CoreError::NotGeneric { report }) => {
            let table = classify(&inst, &tol).eigen_table;
            let rf = ReportFile::build(file.label.clone(), &inst, &report, &table, None, seed, &tol);
            write_output(&io::to_json_string(&rf)?, output)?;
            Err(CmdError::not_generic(report.summary()))
        }
        Err(CoreError::DegenerateForm { context, value }) => {
            let report = degenerate_report(&inst, &tol);
            let rf = ReportFile::build(file.label.clone(), &inst, &report, &[], None, seed, &tol);
            write_output(&io::to_json_string(&rf)?, output)?;
            Err(CmdError::not_generic(format!(
                "degenerate form: {context} (sigma_min {value:.3e})"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_classify(
    input: &Path,
    seed: u64,
    output: Option<&Path>,
    flags: &TolArgs,
) -> CmdResult<()> {
    let file = read_instance_file(input)?;
    let (built, tol) = prepare(&file, flags)?;
    let mode = io::mode_from_str(&file.mode)?;

    let cf = match built {
        Err(CoreError::DegenerateForm { context, .. }) => {
            eprintln!("classify: degenerate_form ({context})");
            let c = Classification {
                kind: Kind::DegenerateForm,
                bad_rank: 0,
                eigen_table: Vec::new(),
            };
            ClassifyFile::build(file.label.clone(), mode, file.n, &c, None)
        }
        Err(e) => return Err(CmdError::input(format!("invalid instance: {e}"))),
        Ok(inst) => {
            let c = classify(&inst, &tol);
            let mixed = if c.kind == Kind::Mixed {
                match mixed_reduce(&inst, seed, &tol) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        eprintln!("classify: mixed, but the split is unavailable: {e}");
                        None
                    }
                }
            } else {
                None
            };
            eprintln!("classify: {} (bad rank {})", io::kind_to_str(c.kind), c.bad_rank);
            ClassifyFile::build(file.label.clone(), inst.mode(), inst.n(), &c, mixed.as_ref())
        }
    };
    write_output(&io::to_json_string(&cf)?, output)
}

/// Conjugate K by a unit shear. The square identity K^2 = +/-Id survives
/// conjugation exactly, the omega-compatibility does not, so this fabricates
/// precisely a hermitian-identity failure.
fn corrupt_k(k: &RMat) -> RMat {
    let dim = k.nrows();
    let mut shear = RMat::identity(dim, dim);
    shear[(0, 1)] += 1e-3;
    let mut inv = RMat::identity(dim, dim);
    inv[(0, 1)] -= 1e-3;
    inv * k * shear
}

pub fn cmd_verify(
    input: &Path,
    seeds: &Seeds,
    output: Option<&Path>,
    corrupt: bool,
    flags: &TolArgs,
) -> CmdResult<()> {
    let file = read_instance_file(input)?;
    let (built, tol) = prepare(&file, flags)?;
    let inst = built.map_err(|e| CmdError::input(format!("invalid instance: {e}")))?;
    let seeds = &seeds.0;

    let base = reduce(&inst, seeds[0], &tol)?;
    let k = if corrupt { corrupt_k(&base.k) } else { base.k.clone() };

    let omega = inst.omega();
    let oscale = spec_norm_r(omega).max(1.0);
    let dim = inst.dim();
    let eye = RMat::identity(dim, dim);
    let mut rows = Vec::new();

    let structure_resid = match inst.mode() {
        Mode::Cr => spec_norm_r(&(&k * &k + &eye)),
        Mode::Lagrangian => spec_norm_r(&(&k * &k - &eye)),
    };
    rows.push(CheckSection::measured("structure_identity", structure_resid, tol.tau_verify));

    let hermitian_resid = match inst.mode() {
        Mode::Cr => spec_norm_r(&(k.transpose() * omega * &k - omega)),
        Mode::Lagrangian => spec_norm_r(&(k.transpose() * omega * &k + omega)),
    };
    rows.push(CheckSection::measured(
        "hermitian_identity",
        hermitian_resid,
        tol.tau_verify * oscale,
    ));

    // Uniqueness: the structure must not depend on the seed.
    let mut ks = Vec::with_capacity(seeds.len());
    for &s in seeds {
        ks.push(reduce(&inst, s, &tol)?.k);
    }
    let mut max_pair = 0.0f64;
    for i in 0..ks.len() {
        for j in i + 1..ks.len() {
            max_pair = max_pair.max(spec_norm_r(&(&ks[i] - &ks[j])));
        }
    }
    rows.push(CheckSection::measured("uniqueness", max_pair, 10.0 * tol.tau_verify));

    // Scale invariance: omega -> lambda * omega leaves K fixed.
    let mut max_scale_drift = 0.0f64;
    for lambda in [0.5, 2.0, 10.0] {
        let scaled = Instance::new(inst.mode(), omega * lambda, inst.structure().clone(), &tol)?;
        let rs = reduce(&scaled, seeds[0], &tol)?;
        max_scale_drift = max_scale_drift.max(spec_norm_r(&(&rs.k - &base.k)));
    }
    rows.push(CheckSection::measured("scale_invariance", max_scale_drift, tol.tau_verify));

    // Idempotence: reducing (omega, K) returns K itself.
    let again = Instance::new(inst.mode(), omega.clone(), base.k.clone(), &tol)?;
    let idem = spec_norm_r(&(&reduce(&again, seeds[0], &tol)?.k - &base.k));
    rows.push(CheckSection::measured("idempotence", idem, tol.tau_verify));

    // Stabilizer action: conjugating e by a structure-preserving isometry
    // must leave K exactly alone. verify_uniqueness runs that probe.
    match verify_uniqueness(&inst, seeds, &tol) {
        Ok(d) => rows.push(CheckSection::measured("stabilizer", d, 10.0 * tol.tau_verify)),
        Err(CoreError::UniquenessViolation { distance, limit }) => rows.push(CheckSection {
            name: "stabilizer".into(),
            value: distance,
            bound: limit,
            pass: false,
        }),
        Err(e) => return Err(CmdError::property(format!("stabilizer probe failed: {e}"))),
    }

    println!("{:<20} {:>13} {:>13}  status", "property", "value", "bound");
    for row in &rows {
        println!(
            "{:<20} {:>13.3e} {:>13.3e}  {}",
            row.name,
            row.value,
            row.bound,
            if row.pass { "pass" } else { "FAIL" }
        );
    }

    let verdict = if rows.iter().all(|r| r.pass) { "pass" } else { "fail" };
    if let Some(path) = output {
        let vf = VerifyFile {
            label: file.label.clone(),
            mode: io::mode_to_str(inst.mode()).to_string(),
            n: inst.n(),
            seeds: seeds.clone(),
            corrupted: corrupt,
            properties: rows.clone(),
            tolerances: ToleranceValues::from_tolerances(&tol),
            verdict: verdict.to_string(),
        };
        write_output(&io::to_json_string(&vf)?, Some(path))?;
    }

    match rows.iter().find(|r| !r.pass) {
        None => Ok(()),
        Some(row) => Err(CmdError::property(format!(
            "{} residual {:.3e} exceeds {:.3e}",
            row.name, row.value, row.bound
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_generate(
    kind: GenKind,
    mode: Mode,
    n: usize,
    signature: Option<Signature>,
    epsilon: f64,
    seed: u64,
    output: Option<&Path>,
    flags: &TolArgs,
) -> CmdResult<()> {
    let tol = apply_flags(env_tolerances()?, flags)?;
    let sig = signature.map(|Signature(p, q)| (p, q)).unwrap_or((n, 0));
    let (inst, label) = match kind {
        GenKind::Integrable => {
            let spec = GeneratorSpec {
                mode,
                n,
                signature: sig,
                perturbation: 0.0,
                seed,
                frame: Frame::RandomConjugation,
            };
            let inst = gen_partially_integrable(&spec, &tol)?;
            (inst, format!("integrable mode={} n={n} seed={seed}", io::mode_to_str(mode)))
        }
        GenKind::Generic => {
            let spec = GeneratorSpec {
                mode,
                n,
                signature: sig,
                perturbation: epsilon,
                seed,
                frame: Frame::RandomConjugation,
            };
            let inst = gen_generic(&spec, &tol)?;
            (
                inst,
                format!(
                    "generic mode={} n={n} epsilon={epsilon} seed={seed}",
                    io::mode_to_str(mode)
                ),
            )
        }
        GenKind::Degenerate => {
            if mode != Mode::Cr {
                return Err(CmdError::input(
                    "--kind degenerate is defined for --mode cr only",
                ));
            }
            let (inst, t_star) = gen_degenerate(n, seed, &tol)?;
            (inst, format!("degenerate n={n} seed={seed} t_star={t_star:.6}"))
        }
    };
    let file = InstanceFile::from_instance(&inst, Some(label.clone()));
    write_output(&io::to_json_string(&file)?, output)?;
    eprintln!("generate: {label}");
    Ok(())
}

struct PathSample {
    t: Option<f64>,
    label: Option<String>,
    built: crreduce_core::Result<Instance>,
}

fn path_samples_from_files(
    inputs: &[PathBuf],
    flags: &TolArgs,
) -> CmdResult<(Vec<PathSample>, String, usize, Tolerances)> {
    let files: Vec<InstanceFile> =
        inputs.iter().map(|p| read_instance_file(p)).collect::<CmdResult<_>>()?;
    let first = &files[0];
    if files.iter().any(|f| f.mode != first.mode || f.n != first.n) {
        return Err(CmdError::input("path samples must share mode and n"));
    }
    if files.iter().any(|f| f.tolerances.as_ref().is_some_and(|t| !t.is_empty())) {
        eprintln!("path: per-file tolerance sections are ignored; use --tol-* flags");
    }
    let tol = apply_flags(env_tolerances()?, flags)?;
    let mode = io::mode_from_str(&first.mode)?;
    let dim = 2 * first.n;
    let samples = files
        .iter()
        .map(|f| {
            let built = io::rows_to_rmat(&f.omega, dim, "omega").and_then(|omega| {
                let s = io::rows_to_rmat(&f.structure, dim, "structure")?;
                Instance::new(mode, omega, s, &tol)
            });
            PathSample { t: None, label: f.label.clone(), built }
        })
        .collect();
    Ok((samples, first.mode.clone(), first.n, tol))
}

fn path_samples_from_family(
    path: &Path,
    flags: &TolArgs,
) -> CmdResult<(Vec<PathSample>, String, usize, Tolerances)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
    let family: FamilyFile = io::from_json_str(&text)
        .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
    if family.ts.is_empty() {
        return Err(CmdError::input("family grid is empty"));
    }
    if family.ts.iter().any(|t| !t.is_finite()) {
        return Err(CmdError::input("family grid has non-finite parameters"));
    }
    let base = &family.base;
    let mut tol = env_tolerances()?;
    if let Some(section) = &base.tolerances {
        section.apply(&mut tol);
    }
    let tol = apply_flags(tol, flags)?;
    let mode = io::mode_from_str(&base.mode)?;
    if base.n == 0 {
        return Err(CmdError::input("n must be at least 1"));
    }
    let dim = 2 * base.n;
    let omega0 = io::rows_to_rmat(&base.omega, dim, "omega")?;
    let structure = io::rows_to_rmat(&base.structure, dim, "structure")?;
    let direction = io::rows_to_rmat(&family.direction, dim, "direction")?;
    let samples = family
        .ts
        .iter()
        .map(|&t| PathSample {
            t: Some(t),
            label: None,
            built: Instance::new(mode, &omega0 + &direction * t, structure.clone(), &tol),
        })
        .collect();
    Ok((samples, base.mode.clone(), base.n, tol))
}

pub fn cmd_path(
    inputs: &[PathBuf],
    family: Option<&Path>,
    seed: u64,
    output: Option<&Path>,
    flags: &TolArgs,
) -> CmdResult<()> {
    let (samples, mode_str, n, tol) = match (family, inputs.is_empty()) {
        (Some(f), _) => path_samples_from_family(f, flags)?,
        (None, false) => path_samples_from_files(inputs, flags)?,
        (None, true) => {
            return Err(CmdError::input("provide sample files or --family"));
        }
    };

    let mut rows = Vec::with_capacity(samples.len());
    let mut structures: Vec<Option<RMat>> = Vec::with_capacity(samples.len());
    for (index, sample) in samples.iter().enumerate() {
        let (kind, bad_rank, generic, k) = match &sample.built {
            Err(CoreError::DegenerateForm { .. }) => (Kind::DegenerateForm, 0, false, None),
            Err(e) => {
                return Err(CmdError::input(format!("sample {index} is invalid: {e}")));
            }
            Ok(inst) => {
                let c = classify(inst, &tol);
                let generic = matches!(c.kind, Kind::CrGeneric | Kind::LagrangianGeneric);
                let k = if generic {
                    match reduce(inst, seed, &tol) {
                        Ok(r) => Some(r.k),
                        Err(e) => {
                            eprintln!("path: sample {index} did not reduce: {e}");
                            None
                        }
                    }
                } else {
                    None
                };
                (c.kind, c.bad_rank, generic, k)
            }
        };
        rows.push(SampleRow {
            index,
            t: sample.t,
            label: sample.label.clone(),
            kind: io::kind_to_str(kind).to_string(),
            bad_rank,
            generic,
        });
        structures.push(k);
    }

    let mut steps = Vec::new();
    for i in 0..structures.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (&structures[i], &structures[i + 1]) {
            steps.push(StepRow { from: i, to: i + 1, distance: spec_norm_r(&(b - a)) });
        }
    }
    let modulus = steps.iter().map(|s| s.distance).fold(None, |acc: Option<f64>, d| {
        Some(acc.map_or(d, |m| m.max(d)))
    });
    let crossings: Vec<[usize; 2]> = (0..rows.len().saturating_sub(1))
        .filter(|&i| rows[i].generic != rows[i + 1].generic)
        .map(|i| [i, i + 1])
        .collect();
    let bad_ranks: Vec<usize> = rows.iter().map(|r| r.bad_rank).collect();
    let spikes = rank_spikes(&bad_ranks);

    eprintln!(
        "path: {} samples, {} generic, modulus of continuity {}, {} crossing(s)",
        rows.len(),
        rows.iter().filter(|r| r.generic).count(),
        modulus.map_or("n/a".to_string(), |m| format!("{m:.3e}")),
        crossings.len()
    );

    let pf = PathFile {
        mode: mode_str,
        n,
        seed,
        samples: rows,
        steps,
        modulus_of_continuity: modulus,
        crossings,
        spikes,
        tolerances: ToleranceValues::from_tolerances(&tol),
    };
    write_output(&io::to_json_string(&pf)?, output)
}
