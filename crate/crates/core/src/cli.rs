//! Command-line driver: `vqe`, `adiabatic`, `estimate` and `certify`.
//!
//! Every subcommand reads one JSON config (unknown keys are rejected), writes
//! its artifacts into `--out` only after the whole run succeeded, and maps the
//! outcome to an exit code: 0 success, 2 budget exhausted, 1 any error.
//! Relative paths inside a config resolve against the config's directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    fermionic_ucc_generators, prepare_state, spin_cluster_generators, suquca_generators, AnsatzConfig,
    ReferenceState,
};
use crate::bounds::{certify, BoundInputs, Certificate};
use crate::error::{Error, Result};
use crate::estimate::{
    build_groups, covariance_matrix, estimate_expectation, expected_preparations, truncate_terms, EstimateOptions,
    EstimateReport, EstimatorMode, MeasurementPlan,
};
use crate::fermion::{build_hamiltonian, jordan_wigner, load_integrals};
use crate::fmt_f64;
use crate::optimize::{nelder_mead, NelderMeadConfig};
use crate::pauli::{HamiltonianJson, PauliSum};
use crate::rng::stream_rng;
use crate::schedule::{minimum_gap, optimize_path, path_record, spectrum_along_path, Family, PathObjective, DEFAULT_STEPS};
use crate::simulator::{exact_eigensystem, expectation, expectation_and_variance, StateVector};

/// Largest register for which diagnostic exact energies are computed.
const EXACT_DIAGNOSTIC_QUBITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "vqe", version, about = "Variational quantum eigensolver toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the ansatz energy of a Hamiltonian.
    Vqe(CommonArgs),
    /// Spectrum, path and success-probability tables for annealing schedules.
    Adiabatic(CommonArgs),
    /// Measurement plans, expected costs and sampled estimates.
    Estimate(CommonArgs),
    /// Accuracy certificates from a mean, a variance and a gap bound.
    Certify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Use exact expectations instead of sampling.
    #[arg(long)]
    pub exact: bool,
}

/// Successful outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    BudgetExhausted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::BudgetExhausted => 2,
        }
    }
}

/// Files produced by a command, written together at the end.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub stdout: String,
}

impl Artifacts {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok((outcome, artifacts)) => {
            print!("{}", artifacts.stdout);
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a command and writes its artifacts.
pub fn run(command: &Command) -> Result<(Outcome, Artifacts)> {
    let (args, result) = match command {
        Command::Vqe(a) => (a, cmd_vqe(a)),
        Command::Adiabatic(a) => (a, cmd_adiabatic(a)),
        Command::Estimate(a) => (a, cmd_estimate(a)),
        Command::Certify(a) => (a, cmd_certify(a)),
    };
    let (outcome, artifacts) = result?;
    artifacts.write(&args.out)?;
    Ok((outcome, artifacts))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, PathBuf)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Hamiltonian given inline, as a JSON file, or as an integral file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    pub hamiltonian: Option<HamiltonianJson>,
    pub hamiltonian_path: Option<String>,
    pub integrals_path: Option<String>,
}

impl ProblemSource {
    fn load(&self, base: &Path) -> Result<PauliSum> {
        match (&self.hamiltonian, &self.hamiltonian_path, &self.integrals_path) {
            (Some(h), None, None) => PauliSum::from_json(h),
            (None, Some(p), None) => PauliSum::from_json_str(&fs::read_to_string(resolve(base, p))?),
            (None, None, Some(p)) => {
                let ints = load_integrals(resolve(base, p))?;
                Ok(jordan_wigner(&build_hamiltonian(&ints)?)?.simplify())
            }
            _ => Err(Error::InvalidArgument(
                "exactly one of hamiltonian, hamiltonian_path, integrals_path is required".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Occupied modes (set bits) of a basis state.
    Occupied(Vec<usize>),
    Index(usize),
    /// `[[re, im], [re, im]]` per qubit.
    Product(Vec<[[f64; 2]; 2]>),
}

impl ReferenceSpec {
    fn build(&self, n_qubits: usize) -> Result<ReferenceState> {
        match self {
            ReferenceSpec::Occupied(m) => ReferenceState::occupied(n_qubits, m),
            ReferenceSpec::Index(i) => Ok(ReferenceState::Basis { n_qubits, index: *i }),
            ReferenceSpec::Product(p) => {
                crate::error::check_dim(n_qubits, p.len())?;
                Ok(ReferenceState::Product(
                    p.iter().map(|[a, b]| (Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1]))).collect(),
                ))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzFamily {
    FermionicUcc,
    SpinUcc,
    Suquca,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub family: AnsatzFamily,
    pub order: usize,
    /// Defaults to 1 for fermionic families and 2 for spin UCC.
    pub trotter_slices: Option<usize>,
    #[serde(default)]
    pub relaxed: bool,
    /// Fermionic UCC occupied modes; also the default reference.
    #[serde(default)]
    pub occupied: Vec<usize>,
    /// Fermionic UCC unoccupied modes; defaults to every other mode.
    pub unoccupied: Option<Vec<usize>>,
    /// Defaults to the occupied modes.
    pub reference: Option<ReferenceSpec>,
}

impl AnsatzSpec {
    fn build(&self, n_qubits: usize) -> Result<(AnsatzConfig, ReferenceState)> {
        let (set, default_slices) = match self.family {
            AnsatzFamily::FermionicUcc => {
                let virt = self
                    .unoccupied
                    .clone()
                    .unwrap_or_else(|| (0..n_qubits).filter(|m| !self.occupied.contains(m)).collect());
                (fermionic_ucc_generators(&self.occupied, &virt, self.order)?, 1)
            }
            AnsatzFamily::SpinUcc => (spin_cluster_generators(n_qubits, self.order)?, 2),
            AnsatzFamily::Suquca => (suquca_generators(n_qubits, self.order)?, 1),
        };
        if set.n_qubits() != n_qubits {
            return Err(Error::InvalidArgument(format!(
                "ansatz acts on {} qubits but the Hamiltonian has {n_qubits}",
                set.n_qubits()
            )));
        }
        let reference = match &self.reference {
            Some(r) => r.build(n_qubits)?,
            None => ReferenceState::occupied(n_qubits, &self.occupied)?,
        };
        Ok((AnsatzConfig::new(set, self.trotter_slices.unwrap_or(default_slices), self.relaxed)?, reference))
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GroupingStrategy {
    /// Greedy merge guided by exact covariances at the starting state.
    #[default]
    Covariance,
    /// Greedy merge of commuting terms without covariances.
    Commuting,
    Singletons,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Exact,
    Frequentist,
    Bayesian,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub mode: EstimatorKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Truncation bias fraction in `[0, 1)`.
    #[serde(default)]
    pub truncation: f64,
    #[serde(default)]
    pub grouping: GroupingStrategy,
    /// Total preparations allowed across the run.
    pub max_preparations: Option<u64>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            mode: EstimatorKind::Exact,
            epsilon: default_epsilon(),
            truncation: 0.0,
            grouping: GroupingStrategy::Covariance,
            max_preparations: None,
        }
    }
}

fn default_epsilon() -> f64 {
    1e-2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Value-spread tolerance; defaults to `epsilon` when sampling, the
    /// noise level of one evaluation, and `1e-10` otherwise.
    pub tol: Option<f64>,
    /// Starting parameters; defaults to zeros.
    pub initial: Option<Vec<f64>>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings { max_evals: default_max_evals(), tol: None, initial: None }
    }
}

fn default_max_evals() -> usize {
    2000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeConfig {
    pub problem: ProblemSource,
    pub ansatz: AnsatzSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    /// Gap lower bound used for certificates.
    pub gap: Option<f64>,
    /// Dominance bound used for the Delos-Blinder certificate.
    pub alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
struct VqeResult {
    energy: f64,
    energy_variance_of_estimator: f64,
    parameters: Vec<f64>,
    evaluations: usize,
    converged: bool,
    total_preparations: u64,
    exact_ground_energy: Option<f64>,
    state_energy: f64,
    state_variance: f64,
    certificate: Option<Certificate>,
    seed: u64,
}

struct SampledObjective {
    h: PauliSum,
    plan: MeasurementPlan,
    epsilon: f64,
    opts: EstimateOptions,
    seed: u64,
}

impl SampledObjective {
    fn estimate(&self, state: &StateVector, stream: u64) -> Result<EstimateReport> {
        let mut rng = stream_rng(self.seed, stream);
        estimate_expectation(&mut || Ok(state.clone()), &self.h, &self.plan, self.epsilon, &self.opts, &mut rng)
    }
}

fn plan_for(h: &PauliSum, strategy: GroupingStrategy, state: &StateVector) -> Result<MeasurementPlan> {
    match strategy {
        GroupingStrategy::Covariance => build_groups(h, Some(&covariance_matrix(state, h)?)),
        GroupingStrategy::Commuting => build_groups(h, None),
        GroupingStrategy::Singletons => Ok(MeasurementPlan::singletons(h)),
    }
}

fn cmd_vqe(args: &CommonArgs) -> Result<(Outcome, Artifacts)> {
    let (cfg, base): (VqeConfig, PathBuf) = read_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let h = cfg.problem.load(&base)?;
    let n = h.n_qubits();
    let (ansatz, reference) = cfg.ansatz.build(n)?;
    let x0 = cfg.optimizer.initial.clone().unwrap_or_else(|| vec![0.0; ansatz.n_params()]);
    crate::error::check_dim(ansatz.n_params(), x0.len())?;
    let sampled = !args.exact && cfg.estimator.mode != EstimatorKind::Exact;
    let eps = cfg.estimator.epsilon;
    if sampled && !(eps > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive when sampling".into()));
    }
    let nm = NelderMeadConfig {
        tol: cfg.optimizer.tol.unwrap_or(if sampled { eps } else { 1e-10 }),
        max_evals: cfg.optimizer.max_evals,
        initial_step: None,
    };

    let objective = if sampled {
        let trunc = truncate_terms(&h, eps, cfg.estimator.truncation)?;
        let start = prepare_state(&reference, &ansatz, &x0)?;
        let plan = plan_for(&trunc.retained, cfg.estimator.grouping, &start)?
            .with_variance_budget((1.0 - cfg.estimator.truncation.powi(2)) * eps * eps);
        let mut opts = EstimateOptions::new(match cfg.estimator.mode {
            EstimatorKind::Bayesian => EstimatorMode::Bayesian,
            _ => EstimatorMode::Frequentist,
        });
        opts.max_preparations = None;
        Some(SampledObjective { h: trunc.retained, plan, epsilon: eps, opts, seed })
    } else {
        None
    };

    let budget = cfg.estimator.max_preparations;
    let mut total_preps = 0u64;
    let mut failure: Option<Error> = None;
    let mut eval_index = 0u64;
    let result = nelder_mead(
        |x| {
            if failure.is_some() {
                return f64::NAN;
            }
            let value = prepare_state(&reference, &ansatz, x).and_then(|s| match &objective {
                None => expectation(&s, &h),
                Some(obj) => {
                    if budget.is_some_and(|b| total_preps >= b) {
                        return Err(Error::BudgetExhausted { shots: total_preps });
                    }
                    eval_index += 1;
                    let r = obj.estimate(&s, eval_index)?;
                    total_preps += r.total_preparations;
                    Ok(r.value)
                }
            });
            value.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &x0,
        &nm,
    )?;
    let mut exhausted = !result.converged;
    match failure {
        Some(Error::BudgetExhausted { .. }) => exhausted = true,
        Some(e) => return Err(e),
        None => {}
    }

    let state = prepare_state(&reference, &ansatz, &result.best_params)?;
    let (state_energy, state_variance) = expectation_and_variance(&state, &h)?;
    let (energy, energy_var) = match &objective {
        None => (state_energy, 0.0),
        Some(obj) => {
            let r = obj.estimate(&state, 0)?;
            total_preps += r.total_preparations;
            (r.value, r.variance_of_estimator)
        }
    };
    let exact_ground_energy =
        if n <= EXACT_DIAGNOSTIC_QUBITS { Some(exact_eigensystem(&h)?.ground_energy()) } else { None };
    let certificate = match cfg.gap {
        Some(g) => Some(certify(&BoundInputs::new(state_energy, state_variance, g, cfg.alpha)?)),
        None => None,
    };
    let out = VqeResult {
        energy,
        energy_variance_of_estimator: energy_var,
        parameters: result.best_params.clone(),
        evaluations: result.evaluations,
        converged: result.converged,
        total_preparations: total_preps,
        exact_ground_energy,
        state_energy,
        state_variance,
        certificate,
        seed,
    };
    let mut arts = Artifacts::default();
    arts.add("result.json", serde_json::to_string_pretty(&out)? + "\n");
    let mut trace = String::from("evaluation,value\n");
    for (k, v) in &result.trace {
        writeln!(trace, "{k},{}", fmt_f64(*v)).expect("string write");
    }
    arts.add("trace.csv", trace);
    arts.stdout = format!(
        "energy {}\nevaluations {}\nconverged {}\n",
        fmt_f64(energy),
        result.evaluations,
        result.converged
    );
    Ok((if exhausted { Outcome::BudgetExhausted } else { Outcome::Completed }, arts))
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleFamily {
    Linear,
    #[default]
    Spline,
    BangBang,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PathObjectiveSpec {
    #[default]
    Energy,
    Infidelity,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticConfig {
    pub initial: ProblemSource,
    pub problem: ProblemSource,
    pub taus: Vec<f64>,
    #[serde(default)]
    pub family: ScheduleFamily,
    /// Switch count for the bang-bang family.
    #[serde(default = "default_switches")]
    pub switches: usize,
    #[serde(default)]
    pub start_high: bool,
    #[serde(default)]
    pub objective: PathObjectiveSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_grid_step")]
    pub spectrum_step: f64,
    #[serde(default = "default_path_evals")]
    pub max_evals: usize,
    #[serde(default = "default_path_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub path_samples: usize,
    pub seed: u64,
}

fn default_switches() -> usize {
    2
}
fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_grid_step() -> f64 {
    1e-3
}
fn default_path_evals() -> usize {
    200
}
fn default_path_tol() -> f64 {
    1e-6
}
fn default_samples() -> usize {
    100
}

fn cmd_adiabatic(args: &CommonArgs) -> Result<(Outcome, Artifacts)> {
    let (cfg, base): (AdiabaticConfig, PathBuf) = read_config(&args.config)?;
    let h_i = cfg.initial.load(&base)?;
    let h_p = cfg.problem.load(&base)?;
    if cfg.taus.is_empty() {
        return Err(Error::InvalidArgument("taus must not be empty".into()));
    }
    if !(cfg.spectrum_step > 0.0 && cfg.spectrum_step <= 1.0) {
        return Err(Error::InvalidArgument("spectrum_step must lie in (0, 1]".into()));
    }
    let points = (1.0 / cfg.spectrum_step).round() as usize;
    let grid: Vec<f64> = (0..=points).map(|k| k as f64 / points as f64).collect();
    let spectra = spectrum_along_path(&h_i, &h_p, &grid)?;
    let dim = spectra[0].len();
    let mut spectrum = String::from("a");
    for k in 0..dim {
        write!(spectrum, ",e{k}").expect("string write");
    }
    spectrum.push_str(",gap\n");
    for (a, s) in grid.iter().zip(&spectra) {
        spectrum.push_str(&fmt_f64(*a));
        for v in s {
            write!(spectrum, ",{}", fmt_f64(*v)).expect("string write");
        }
        let gap = if s.len() > 1 { s[1] - s[0] } else { 0.0 };
        writeln!(spectrum, ",{}", fmt_f64(gap)).expect("string write");
    }
    let (gap_at, gap) = minimum_gap(&grid, &spectra).unwrap_or((f64::NAN, f64::NAN));

    let family = match cfg.family {
        ScheduleFamily::Linear => Family::Linear,
        ScheduleFamily::Spline => Family::Spline,
        ScheduleFamily::BangBang => Family::BangBang { switches: cfg.switches, start_high: cfg.start_high },
    };
    let objective = match cfg.objective {
        PathObjectiveSpec::Energy => PathObjective::FinalEnergy,
        PathObjectiveSpec::Infidelity => PathObjective::Infidelity,
    };
    let nm = NelderMeadConfig { tol: cfg.tol, max_evals: cfg.max_evals, initial_step: None };
    let mut success = String::from("tau,linear_success,optimized_success,evaluations,converged,params\n");
    let mut paths = String::from("schedule,tau,s,value,target_overlap\n");
    for &tau in &cfg.taus {
        let linear = Family::Linear.build(tau, &Family::Linear.initial_params(tau))?;
        let lin = path_record(Family::Linear, &linear, &h_i, &h_p, cfg.steps, cfg.path_samples)?;
        let (params, study) = if family == Family::Linear {
            (lin.params.clone(), None)
        } else {
            let (p, s) = optimize_path(family, &h_i, &h_p, tau, cfg.steps, &nm, objective)?;
            (p, Some(s))
        };
        let opt = match &study {
            Some(s) => s.records[0].clone(),
            None => lin.clone(),
        };
        let (evals, converged) = study.as_ref().map_or((0, true), |s| (s.evaluations, s.converged));
        let joined: Vec<String> = params.iter().map(|p| fmt_f64(*p)).collect();
        writeln!(
            success,
            "{},{},{},{evals},{converged},{}",
            fmt_f64(tau),
            fmt_f64(lin.success),
            fmt_f64(opt.success),
            joined.join(";")
        )
        .expect("string write");
        for (name, rec) in [("linear", &lin), ("optimized", &opt)] {
            let sched = if name == "linear" { linear.clone() } else { family.build(tau, &params)? };
            for &(s, ov) in &rec.trajectory {
                let value = sched.evaluate(s * tau)?;
                writeln!(paths, "{name},{},{},{},{}", fmt_f64(tau), fmt_f64(s), fmt_f64(value), fmt_f64(ov))
                    .expect("string write");
            }
        }
    }
    let mut arts = Artifacts::default();
    arts.add("spectrum.csv", spectrum);
    arts.add("paths.csv", paths);
    arts.add("success.csv", success);
    arts.stdout = format!("minimum gap {} at a = {}\n", fmt_f64(gap), fmt_f64(gap_at));
    Ok((Outcome::Completed, arts))
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Index(usize),
    Occupied(Vec<usize>),
    /// `[re, im]` per amplitude; normalized on load.
    Amplitudes(Vec<[f64; 2]>),
    Product(Vec<[[f64; 2]; 2]>),
}

impl StateSpec {
    fn build(&self, n_qubits: usize) -> Result<StateVector> {
        match self {
            StateSpec::Index(i) => StateVector::basis(n_qubits, *i),
            StateSpec::Occupied(m) => ReferenceState::occupied(n_qubits, m)?.to_state(),
            StateSpec::Amplitudes(a) => {
                crate::error::check_dim(1 << n_qubits, a.len())?;
                StateVector::from_amplitudes_normalized(a.iter().map(|[r, i]| Complex64::new(*r, *i)).collect())
            }
            StateSpec::Product(p) => ReferenceSpec::Product(p.clone()).build(n_qubits)?.to_state(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPlan {
    pub name: String,
    pub groups: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub problem: ProblemSource,
    pub state: StateSpec,
    pub epsilon: f64,
    #[serde(default = "default_sampling_mode")]
    pub mode: EstimatorMode,
    #[serde(default)]
    pub truncation: f64,
    /// Explicit plans to cost; the greedy covariance plan is always added.
    #[serde(default)]
    pub plans: Vec<NamedPlan>,
    /// Plan used for sampling; defaults to the greedy covariance plan.
    pub sample_plan: Option<String>,
    #[serde(default = "default_true")]
    pub sample: bool,
    pub max_preparations: Option<u64>,
    pub seed: u64,
}

fn default_sampling_mode() -> EstimatorMode {
    EstimatorMode::Frequentist
}
fn default_true() -> bool {
    true
}

fn cmd_estimate(args: &CommonArgs) -> Result<(Outcome, Artifacts)> {
    let (cfg, base): (EstimateConfig, PathBuf) = read_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let h = cfg.problem.load(&base)?;
    let state = cfg.state.build(h.n_qubits())?;
    let trunc = truncate_terms(&h, cfg.epsilon, cfg.truncation)?;
    let h = trunc.retained;
    let mut plans: Vec<(String, MeasurementPlan)> = Vec::new();
    for p in &cfg.plans {
        plans.push((p.name.clone(), MeasurementPlan::from_groups(&h, p.groups.clone())?));
    }
    plans.push(("greedy".to_string(), build_groups(&h, Some(&covariance_matrix(&state, &h)?))?));

    let mut dump = String::new();
    let mut costs = String::from("plan,groups,expected_preparations_times_eps2,expected_preparations\n");
    let mut stdout = String::new();
    for (name, plan) in &plans {
        writeln!(dump, "# {name}").expect("string write");
        dump.push_str(&plan.dump(&h));
        let n = expected_preparations(plan, &state, &h, cfg.epsilon)?;
        let scaled = n * cfg.epsilon * cfg.epsilon;
        writeln!(costs, "{name},{},{},{}", plan.groups.len(), fmt_f64(scaled), fmt_f64(n)).expect("string write");
        writeln!(stdout, "{name}: {} groups, expected preparations {:.6}/eps^2", plan.groups.len(), scaled)
            .expect("string write");
    }
    let mut arts = Artifacts::default();
    arts.add("plan.txt", dump);
    arts.add("expected.csv", costs);
    let mut outcome = Outcome::Completed;
    if cfg.sample && !args.exact {
        let chosen = match &cfg.sample_plan {
            Some(name) => plans
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, p)| p.clone())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown plan {name}")))?,
            None => plans.last().expect("greedy plan").1.clone(),
        };
        let chosen = chosen.with_variance_budget((1.0 - cfg.truncation.powi(2)) * cfg.epsilon * cfg.epsilon);
        let mut opts = EstimateOptions::new(cfg.mode);
        opts.max_preparations = cfg.max_preparations;
        let mut rng = stream_rng(seed, 0);
        match estimate_expectation(&mut || Ok(state.clone()), &h, &chosen, cfg.epsilon, &opts, &mut rng) {
            Ok(report) => {
                writeln!(
                    stdout,
                    "estimate {} variance {} preparations {}",
                    fmt_f64(report.value),
                    fmt_f64(report.variance_of_estimator),
                    report.total_preparations
                )
                .expect("string write");
                arts.add("report.json", report.to_json_string()? + "\n");
            }
            Err(Error::BudgetExhausted { shots }) => {
                writeln!(stdout, "budget exhausted after {shots} preparations").expect("string write");
                outcome = Outcome::BudgetExhausted;
            }
            Err(e) => return Err(e),
        }
    }
    arts.stdout = stdout;
    Ok((outcome, arts))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Moments given directly.
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    /// Or computed exactly from a Hamiltonian and a state.
    pub problem: Option<ProblemSource>,
    pub state: Option<StateSpec>,
    pub gap: f64,
    pub alpha: Option<f64>,
}

fn cmd_certify(args: &CommonArgs) -> Result<(Outcome, Artifacts)> {
    let (cfg, base): (CertifyConfig, PathBuf) = read_config(&args.config)?;
    let (mean, variance) = match (cfg.mean, cfg.variance, &cfg.problem, &cfg.state) {
        (Some(m), Some(v), None, None) => (m, v),
        (None, None, Some(p), Some(s)) => {
            let h = p.load(&base)?;
            expectation_and_variance(&s.build(h.n_qubits())?, &h)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give either mean and variance, or problem and state".into(),
            ))
        }
    };
    let cert = certify(&BoundInputs::new(mean, variance, cfg.gap, cfg.alpha)?);
    let mut stdout = String::new();
    writeln!(stdout, "weinstein [{}, {}]", fmt_f64(cert.weinstein.0), fmt_f64(cert.weinstein.1)).expect("string write");
    if let Some(g) = cert.ground_overlap {
        writeln!(stdout, "ground overlap >= {}", fmt_f64(g)).expect("string write");
    }
    writeln!(stdout, "excited overlap >= {}", fmt_f64(cert.excited_overlap)).expect("string write");
    if let Some(d) = cert.delos_blinder {
        writeln!(stdout, "delos-blinder >= {}", fmt_f64(d)).expect("string write");
    }
    for n in &cert.notes {
        writeln!(stdout, "note: {n}").expect("string write");
    }
    let mut arts = Artifacts::default();
    arts.add("certificate.json", serde_json::to_string_pretty(&cert)? + "\n");
    arts.stdout = stdout;
    Ok((Outcome::Completed, arts))
}
