//! Command-line front end: JSON job in, JSON result out.
//!
//! Exit codes: 0 on success, 1 when a job fails validation or a verdict is
//! negative, 2 on usage errors (bad flags, unreadable or malformed input).

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ff::{FieldElement, FieldError, PrimeField};
use crate::instances::level2_instance;
use crate::isogeny::{compute_isogeny, decompose, IsogenyError, IsogenyOptions};
use crate::kernel::{validate_kernel, KernelDescriptor, KernelError, KernelJson};
use crate::theta::{ThetaError, ThetaNullPoint};
use crate::velu::{kernel_x_poly, theta_null_to_curve, velu_isogeny, VeluError};

/// Environment variable seeding instance generation.
pub const SEED_VAR: &str = "THETA_ISOGENY_SEED";
const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "theta-isogeny",
    version,
    about = "Isogenies of abelian varieties in theta coordinates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Job description (JSON); defaults to stdin.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Where to write the result; defaults to stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Force the number of squares in the decomposition of ell.
    #[arg(long, global = true, value_parser = ["1", "2", "4"])]
    pub force_r: Option<String>,
    /// Normalise the first tensor leg once and transport it to the second.
    #[arg(long, global = true)]
    pub three_way: bool,
    /// Worker threads for the per-coordinate loops.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Codomain theta null point and images of the job's points.
    Compute,
    /// Sum-of-squares decomposition of ell for level n.
    Decompose {
        #[arg(long)]
        ell: u64,
        #[arg(long, default_value_t = 2)]
        n: u32,
    },
    /// Check the theta null point and the kernel of a job.
    Validate,
    /// Compare the codomain with Vélu's formulas (g = 1, n = 2).
    OracleCheck {
        /// Generate a level-2 instance with this ell instead of reading a job.
        #[arg(long)]
        generate_ell: Option<u64>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_r: Option<usize>,
    #[serde(default)]
    pub three_way: bool,
    #[serde(default)]
    pub oracle_check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDescription {
    pub p: u64,
    pub g: usize,
    pub n: u32,
    pub theta_null: Vec<u64>,
    pub kernel: KernelJson,
    #[serde(default)]
    pub points: Vec<Vec<u64>>,
    #[serde(default)]
    pub options: JobOptions,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Theta(#[from] ThetaError<()>),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Isogeny(#[from] IsogenyError),
    #[error(transparent)]
    Velu(#[from] VeluError),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// The innermost variant name, e.g. `UnsupportedLevel`.
    pub fn kind(&self) -> String {
        let dbg = match self {
            CliError::Usage(_) => return "Usage".into(),
            CliError::Invalid(_) => return "Invalid".into(),
            CliError::Field(e) => format!("{e:?}"),
            CliError::Theta(e) => format!("{e:?}"),
            CliError::Kernel(e) => format!("{e:?}"),
            CliError::Isogeny(IsogenyError::Kernel(e)) => format!("{e:?}"),
            CliError::Isogeny(IsogenyError::Decompose(e)) => format!("{e:?}"),
            CliError::Isogeny(e) => format!("{e:?}"),
            CliError::Velu(e) => format!("{e:?}"),
        };
        dbg.split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or_default()
            .to_string()
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

/// A job parsed into library objects.
pub struct Job {
    pub field: PrimeField,
    pub null: ThetaNullPoint,
    pub kernel: KernelDescriptor,
    pub points: Vec<Vec<FieldElement>>,
    pub options: JobOptions,
}

fn elements(f: &PrimeField, vals: &[u64]) -> Result<Vec<FieldElement>, CliError> {
    vals.iter().map(|&v| f.check(v).map_err(CliError::from)).collect()
}

impl JobDescription {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed job: {e}")))
    }

    pub fn field(&self) -> Result<PrimeField, CliError> {
        Ok(PrimeField::new(self.p)?)
    }

    pub fn null(&self) -> Result<ThetaNullPoint, CliError> {
        let f = self.field()?;
        let coords = elements(&f, &self.theta_null)?;
        ThetaNullPoint::new(f, self.g, self.n, coords).map_err(|e| CliError::Theta(e.cast()))
    }

    pub fn load(&self) -> Result<Job, CliError> {
        let field = self.field()?;
        let null = self.null()?;
        let kernel = KernelDescriptor::from_json(&null, &self.kernel)?;
        let points = self
            .points
            .iter()
            .map(|p| elements(&field, p))
            .collect::<Result<_, _>>()?;
        Ok(Job {
            field,
            null,
            kernel,
            points,
            options: self.options.clone(),
        })
    }
}

fn values(v: &[FieldElement]) -> Vec<u64> {
    v.iter().map(|c| c.value()).collect()
}

/// Runs the pipeline on a job and returns the result object.
pub fn cmd_compute(job: &Job) -> Result<Value, CliError> {
    let opts = IsogenyOptions {
        force_r: job.options.force_r,
        three_way: job.options.three_way,
    };
    let res = compute_isogeny(&job.null, &job.kernel, &job.points, &opts)?;
    let mut out = json!({
        "codomain_null": values(&res.codomain_null),
        "images": res.images.iter().map(|p| values(p)).collect::<Vec<_>>(),
        "diagnostics": res.diagnostics,
    });
    if job.options.oracle_check {
        out["oracle_check"] = oracle_compare(job)?;
    }
    Ok(out)
}

pub fn cmd_decompose(ell: u64, n: u32) -> Result<Value, CliError> {
    let dec = decompose(ell, n).map_err(IsogenyError::from)?;
    Ok(serde_json::to_value(dec).expect("serializable"))
}

/// Validation report and whether every check passed.
pub fn cmd_validate(desc: &JobDescription) -> (Value, bool) {
    let mut checks = Vec::new();
    let mut push = |name: &str, res: Result<Value, String>| {
        let ok = res.is_ok();
        checks.push(match res {
            Ok(detail) => json!({ "check": name, "passed": true, "detail": detail }),
            Err(reason) => json!({ "check": name, "passed": false, "reason": reason }),
        });
        ok
    };
    let level_ok = push(
        "level",
        if desc.n.is_multiple_of(2) {
            Ok(json!(desc.n))
        } else {
            Err("n must be even".to_string())
        },
    );
    let field_ok = push(
        "field",
        desc.field().map(|f| json!(f.modulus())).map_err(|e| e.to_string()),
    );
    let mut all = level_ok && field_ok;
    if all {
        match desc.null() {
            Err(e) => {
                push("theta_null", Err(e.to_string()));
                all = false;
            }
            Ok(null) => {
                push("theta_null", Ok(json!(desc.theta_null)));
                let kernel = KernelDescriptor::from_json(&null, &desc.kernel)
                    .and_then(|kd| validate_kernel(&kd, &null))
                    .map_err(|e| match e {
                        KernelError::Invalid { reason, .. } => reason,
                        other => other.to_string(),
                    });
                all &= push("kernel", kernel.map(|d| serde_json::to_value(d).expect("serializable")));
                let points = desc.points.iter().all(|p| p.len() == null.size());
                all &= push(
                    "points",
                    if points {
                        Ok(json!(desc.points.len()))
                    } else {
                        Err("point has the wrong length".to_string())
                    },
                );
            }
        }
    }
    (json!({ "valid": all, "checks": checks }), all)
}

/// j-invariants of the theta codomain and of the Vélu codomain.
fn oracle_compare(job: &Job) -> Result<Value, CliError> {
    let grp = job.null.group();
    if grp.g() != 1 || grp.n() != 2 {
        return Err(CliError::Invalid(format!(
            "the oracle needs g = 1 and n = 2, got g = {}, n = {}",
            grp.g(),
            grp.n()
        )));
    }
    let f = job.field;
    let ell = job.kernel.ell();
    let dec = crate::isogeny::pipeline_decomposition(ell, 2, job.options.force_r).map_err(IsogenyError::from)?;
    let b = crate::isogeny::codomain_null(&job.null, &job.kernel, &dec)?;
    let theta_j = theta_null_to_curve(&f, &b)?.j_invariant();
    let velu = kernel_x_poly(&f, job.null.coords(), job.kernel.q(), &job.kernel.coords()[1])
        .and_then(|psi| velu_isogeny(&theta_null_to_curve(&f, job.null.coords())?, &psi));
    let (velu_j, reason) = match velu {
        Ok(e) => (Some(e.j_invariant().value()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut out = json!({
        "theta_j": theta_j.value(),
        "velu_j": velu_j,
        "equal": velu_j == Some(theta_j.value()),
        "codomain_null": values(&b),
    });
    if let Some(r) = reason {
        out["velu_error"] = json!(r);
    }
    Ok(out)
}

pub fn cmd_oracle_check(job: &Job) -> Result<(Value, bool), CliError> {
    let out = oracle_compare(job)?;
    let equal = out["equal"] == json!(true);
    Ok((out, equal))
}

/// Seed from [`SEED_VAR`], or a fixed default.
pub fn seed() -> Result<u64, CliError> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_VAR} must be an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// A level-2 job for a random curve with a rational `ℓ`-kernel.
pub fn generated_job(ell: u64, seed: u64) -> Result<JobDescription, CliError> {
    if ell < 3 || ell.is_multiple_of(2) {
        return Err(CliError::Usage(format!("ell = {ell} must be odd and at least 3")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = level2_instance(&mut rng, ell, 1000, 1 << 20);
    Ok(JobDescription {
        p: inst.field.modulus(),
        g: 1,
        n: 2,
        theta_null: values(inst.null.coords()),
        kernel: inst.kernel.to_json(),
        points: Vec::new(),
        options: JobOptions::default(),
    })
}

fn read_job(cli: &Cli) -> Result<JobDescription, CliError> {
    let text = match &cli.input {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => std::io::read_to_string(std::io::stdin()).map_err(|e| CliError::Usage(format!("stdin: {e}")))?,
    };
    let mut desc = JobDescription::parse(&text)?;
    if let Some(r) = &cli.force_r {
        desc.options.force_r = Some(r.parse().expect("validated by clap"));
    }
    desc.options.three_way |= cli.three_way;
    if cli.jobs.is_some() {
        desc.options.jobs = cli.jobs;
    }
    Ok(desc)
}

fn execute(cli: &Cli) -> Result<(Value, bool), CliError> {
    match &cli.command {
        Command::Decompose { ell, n } => Ok((cmd_decompose(*ell, *n)?, true)),
        Command::Validate => Ok(cmd_validate(&read_job(cli)?)),
        Command::Compute => {
            let job = read_job(cli)?.load()?;
            Ok((cmd_compute(&job)?, true))
        }
        Command::OracleCheck { generate_ell } => {
            let desc = match generate_ell {
                Some(ell) => generated_job(*ell, seed()?)?,
                None => read_job(cli)?,
            };
            let (mut out, equal) = cmd_oracle_check(&desc.load()?)?;
            if generate_ell.is_some() {
                out["job"] = serde_json::to_value(&desc).expect("serializable");
            }
            Ok((out, equal))
        }
    }
}

fn emit(cli: &Cli, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match &cli.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("stdout: {e}"))),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> ExitCode {
    let jobs = cli.jobs.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (value, code) = match pool.install(|| execute(cli)) {
        Ok((v, ok)) => (v, if ok { 0 } else { 1 }),
        Err(e) => (e.to_json(), e.exit_code()),
    };
    if let Err(e) = emit(cli, &value) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

pub fn main() -> ExitCode {
    run(&Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_job() -> JobDescription {
        JobDescription::parse(
            r#"{"p": 1009, "g": 1, "n": 2, "theta_null": [971, 94],
                "kernel": {"ell": 5, "convention": "kummer_half", "Q": [353, 746, 1],
                           "coords": {"0": [1], "1": [0, 1]}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn compute_worked_example() {
        let out = cmd_compute(&worked_job().load().unwrap()).unwrap();
        let f = PrimeField::new(1009).unwrap();
        let expected = f.mul(f.elem(513), f.inv(f.elem(186)).unwrap()).value();
        assert_eq!(out["codomain_null"], json!([1, expected]));
        assert_eq!(out["images"], json!([]));
        assert_eq!(out["diagnostics"]["raw_codomain_null"], json!([186, 513]));
        assert_eq!(out["diagnostics"]["N"], json!(1));
    }

    #[test]
    fn level_two_images_are_refused() {
        let mut desc = worked_job();
        desc.points = vec![vec![1, 7]];
        let err = cmd_compute(&desc.load().unwrap()).unwrap_err();
        assert_eq!(err.kind(), "UnsupportedLevel");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn decompose_outputs() {
        assert_eq!(cmd_decompose(5, 2).unwrap()["r"], json!(2));
        assert_eq!(cmd_decompose(9, 2).unwrap()["r"], json!(1));
        assert_eq!(cmd_decompose(4, 2).unwrap_err().kind(), "BadEll");
    }

    #[test]
    fn validation_reports() {
        let (report, ok) = cmd_validate(&worked_job());
        assert!(ok, "{report}");
        let mut bad = worked_job();
        bad.kernel.q[0] = 354;
        let (report, ok) = cmd_validate(&bad);
        assert!(!ok);
        assert!(report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c["reason"] == json!("ell-torsion check failed")));
        let mut odd = worked_job();
        odd.n = 3;
        let (report, ok) = cmd_validate(&odd);
        assert!(!ok);
        assert_eq!(report["checks"][0]["reason"], json!("n must be even"));
    }

    #[test]
    fn oracle_verdicts() {
        let (out, equal) = cmd_oracle_check(&worked_job().load().unwrap()).unwrap();
        assert!(equal, "{out}");
        let a = generated_job(5, 1).unwrap();
        let (_, equal) = cmd_oracle_check(&a.load().unwrap()).unwrap();
        assert!(equal);
        // the kernel of one instance against the null point of another
        let b = generated_job(5, 2).unwrap();
        let mut swapped = a.clone();
        swapped.kernel = b.kernel.clone();
        swapped.p = b.p;
        swapped.theta_null = a.theta_null.iter().map(|v| v % b.p).collect();
        let verdict = swapped.load().and_then(|job| cmd_oracle_check(&job));
        assert!(!matches!(verdict, Ok((_, true))));
    }

    #[test]
    fn results_round_trip() {
        let out = cmd_compute(&worked_job().load().unwrap()).unwrap();
        let back: Value = serde_json::from_str(&serde_json::to_string(&out).unwrap()).unwrap();
        assert_eq!(back, out);
        let diag: crate::isogeny::IsogenyDiagnostics = serde_json::from_value(out["diagnostics"].clone()).unwrap();
        assert_eq!(serde_json::to_value(&diag).unwrap(), out["diagnostics"]);
        let job = worked_job();
        assert_eq!(
            JobDescription::parse(&serde_json::to_string(&job).unwrap()).unwrap(),
            job
        );
    }
}
