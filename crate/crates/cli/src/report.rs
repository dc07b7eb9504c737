//! Machine-readable outputs specific to the verify and path subcommands,
//! plus the family input format for path. The reduce and classify report
//! formats live in the core crate next to the types they serialize.

use serde::{Deserialize, Serialize};

use crreduce_core::io::{CheckSection, InstanceFile, ToleranceValues};

/// Output of the verify subcommand: one check row per property.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mode: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub corrupted: bool,
    pub properties: Vec<CheckSection>,
    pub tolerances: ToleranceValues,
    pub verdict: String,
}

/// A one-parameter family of instances: omega(t) = base.omega + t * direction,
/// with the structure held fixed. Unknown fields are rejected.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub base: InstanceFile,
    /// 2n x 2n row-major antisymmetric direction matrix.
    pub direction: Vec<Vec<f64>>,
    /// Parameter grid, in path order.
    pub ts: Vec<f64>,
}

/// One sample along a path.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SampleRow {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: String,
    pub bad_rank: usize,
    pub generic: bool,
}

/// Distance between the reduced structures of two consecutive generic
/// samples.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct StepRow {
    pub from: usize,
    pub to: usize,
    pub distance: f64,
}

/// Output of the path subcommand.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub mode: String,
    pub n: usize,
    pub seed: u64,
    pub samples: Vec<SampleRow>,
    pub steps: Vec<StepRow>,
    /// max step distance over consecutive generic pairs; absent when no
    /// two consecutive samples are both generic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus_of_continuity: Option<f64>,
    /// Grid intervals [i, i+1] where the samples change between generic
    /// and non-generic: the sampled crossings of the bad set.
    pub crossings: Vec<[usize; 2]>,
    /// Interior samples whose bad rank spikes above both flanks.
    pub spikes: Vec<usize>,
    pub tolerances: ToleranceValues,
}
