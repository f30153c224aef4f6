//! Config-driven runs behind the `hglk` binary.
//!
//! A run reads one TOML document, checks every section before any numerics
//! start, performs one subcommand and writes its reports under `output.dir`.
//! `manifest.json` records the SHA-256 of the resolved config, the seed and
//! the hash of every emitted file. Nothing time- or path-dependent is written,
//! so equal configs give byte-identical files.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::besov::{
    besov_norm, bernstein_ratio, japanese_weight, log_grid, max_band_overlap, second_difference_integrand,
    second_difference_norm, weight_scan, DyadicBank, Verdict, WeightTrend,
};
use crate::commutator::{
    case1_operator, commutator_pairing_direct, commutator_via_balakrishnan, dilated_commutator_norms, prop2_family,
    potential_difference_ratio, triangle_wave, verify_dyadic_key_estimate, verify_fractional_leibniz,
    verify_kato_ponce, verify_lipschitz_commutator, verify_prop2_case1, EstimateRecord, FamilyReport,
    KatoPonceExponents, KeyEstimateReport, Ladder,
};
use crate::error::{ErrorKind, LabError};
use crate::evolve::{
    certificate_constant, evolve, gaussian, threshold_certificate, BlowupOde, Certificate, InequalityReport,
    Propagator, RescalingScan, SimulationConfig, Status,
};
use crate::grid::{Field, Grid};
use crate::operator::{
    check_a3, check_ellipticity, check_form_positivity, sobolev_equivalence_report, A3Report, CoefficientFamily,
    CoefficientField, EllipticOperator, EllipticityReport, FormReport, PotentialField, PotentialSpec,
    SobolevEquivalenceReport,
};
use crate::quadrature::{QuadratureRule, DEFAULT_PANEL_ORDER};
use crate::random::{band_limited_complex, band_limited_real, trial_rng};
use crate::spectral::{
    eigendecompose, frac_power_balakrishnan, frac_power_spectral, spectral_window, square_root,
    weighted_resolvent_bound, WeightedResolventReport, YosidaRow,
};
use crate::suite::{self, BlowupRun, PairingCheck, ThresholdSetup};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_SUITE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Fracpow,
    Besov,
    Commutator,
    Simulate,
    BlowupScan,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::Fracpow,
        Command::Besov,
        Command::Commutator,
        Command::Simulate,
        Command::BlowupScan,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Fracpow => "fracpow",
            Command::Besov => "besov",
            Command::Commutator => "commutator",
            Command::Simulate => "simulate",
            Command::BlowupScan => "blowup-scan",
            Command::Verify => "verify",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 128, length: 32.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FracSection {
    pub s: f64,
    pub quad_nodes: usize,
}

impl Default for FracSection {
    fn default() -> Self {
        FracSection { s: 1.0, quad_nodes: 400 }
    }
}

/// Gaussian initial data `amplitude * exp(-x^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub amplitude: f64,
    pub width: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            amplitude: 9.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub seed: u64,
    pub trials: usize,
    /// Grid sizes of the commutator refinement ladder, all on `grid.length`.
    pub ladder: Vec<usize>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        SuiteSection {
            seed: 7,
            trials: 100,
            ladder: vec![64, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesovSection {
    pub weights: Vec<f64>,
    pub lengths: Vec<f64>,
    pub spacing: f64,
}

impl Default for BesovSection {
    fn default() -> Self {
        BesovSection {
            weights: vec![0.5, 0.7, 1.0],
            lengths: vec![64.0, 128.0, 256.0, 512.0],
            spacing: 1.0 / 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Initial amplitudes as multiples of the certificate threshold.
    pub factors: Vec<f64>,
    pub exponents: Vec<f64>,
    pub dilations: Vec<usize>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            factors: vec![0.5, 1.0, 1.5, 2.0],
            exponents: vec![1.5, 2.0, 2.5, 3.0],
            dilations: vec![1, 2, 4, 8, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("hglk-out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub coeff: CoefficientFamily,
    pub potential: PotentialSpec,
    pub frac: FracSection,
    pub sim: SimulationConfig,
    pub initial: InitialSection,
    pub suite: SuiteSection,
    pub besov: BesovSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridSection::default(),
            coeff: suite::sine_metric(),
            potential: PotentialSpec::zero(4.0),
            frac: FracSection::default(),
            sim: SimulationConfig::default(),
            initial: InitialSection::default(),
            suite: SuiteSection::default(),
            besov: BesovSection::default(),
            scan: ScanSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Config(vec![format!("unparsable config: {}", e.message())]))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// Every violated precondition, each prefixed by its section.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match Grid::new(self.grid.n, self.grid.length) {
            Ok(g) => {
                if g.n() < 16 {
                    out.push(format!("grid.n: at least 16 points required, got {}", g.n()));
                }
                if let Err(e) = CoefficientField::from_family(&g, &self.coeff) {
                    out.push(format!("coeff: {e}"));
                }
                if let Err(e) = PotentialField::from_spec(&g, &self.potential) {
                    out.push(format!("potential: {e}"));
                }
            }
            Err(e) => out.push(format!("grid: {e}")),
        }
        if !(self.frac.s > 0.0 && self.frac.s < 2.0) {
            out.push(format!("frac.s: order must lie in (0, 2), got {}", self.frac.s));
        }
        if self.frac.quad_nodes < 16 || self.frac.quad_nodes % DEFAULT_PANEL_ORDER != 0 {
            out.push(format!(
                "frac.quad_nodes: need a multiple of {DEFAULT_PANEL_ORDER} and at least 16, got {}",
                self.frac.quad_nodes
            ));
        }
        out.extend(self.sim.problems());
        if self.sim.max_steps == 0 {
            out.push("sim.max_steps: at least one step required".into());
        }
        if !(self.initial.amplitude >= 0.0 && self.initial.amplitude.is_finite()) {
            out.push(format!("initial.amplitude: finite amplitude >= 0 required, got {}", self.initial.amplitude));
        }
        if !(self.initial.width > 0.0) {
            out.push(format!("initial.width: width > 0 required, got {}", self.initial.width));
        }
        if self.suite.trials == 0 {
            out.push("suite.trials: at least one trial required".into());
        }
        if self.suite.ladder.is_empty() || !increasing(&self.suite.ladder) {
            out.push("suite.ladder: sizes must be non-empty and increasing".into());
        }
        for &n in &self.suite.ladder {
            if n < 16 || Grid::new(n, self.grid.length).is_err() {
                out.push(format!("suite.ladder: {n} is not a power of two >= 16"));
            }
        }
        if let Some(a) = self.besov.weights.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            out.push(format!("besov.weights: exponents must lie in [0, 1], got {a}"));
        }
        if self.besov.lengths.is_empty() || !increasing(&self.besov.lengths) {
            out.push("besov.lengths: lengths must be non-empty and increasing".into());
        }
        if !(self.besov.spacing > 0.0) {
            out.push(format!("besov.spacing: spacing > 0 required, got {}", self.besov.spacing));
        } else {
            for &l in &self.besov.lengths {
                let n = (l / self.besov.spacing).round();
                if !(n >= 16.0 && (n as usize).is_power_of_two() && (n * self.besov.spacing - l).abs() <= 1e-9 * l) {
                    out.push(format!("besov.lengths: L = {l} is not a power-of-two multiple (>= 16) of the spacing"));
                }
            }
        }
        if self.scan.factors.is_empty() || self.scan.factors.iter().any(|f| !(*f > 0.0)) {
            out.push("scan.factors: positive amplitude factors required".into());
        }
        if let Some(p) = self.scan.exponents.iter().find(|p| !(**p > 1.0 && **p <= 3.0)) {
            out.push(format!("scan.exponents: p > 1 required and p <= 3, got {p}"));
        }
        if self.scan.dilations.len() < 3 || !increasing(&self.scan.dilations) || self.scan.dilations[0] == 0 {
            out.push("scan.dilations: at least three increasing positive factors required".into());
        }
        if self.output.formats.is_empty() {
            out.push("output.formats: at least one of \"csv\", \"json\" required".into());
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                out.push(format!("output.formats: unknown format {f:?}"));
            }
        }
        if self.output.dir.as_os_str().is_empty() {
            out.push("output.dir: empty path".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(AppError::Config(p))
        }
    }

    /// SHA-256 of the canonical JSON form with defaults filled in. The output
    /// directory is left out: where files land does not change them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn grid(&self) -> crate::Result<Grid> {
        Grid::new(self.grid.n, self.grid.length)
    }

    fn operator(&self) -> crate::Result<EllipticOperator> {
        EllipticOperator::from_families(self.grid()?, &self.coeff, &self.potential)
    }
}

#[derive(Debug)]
pub enum AppError {
    Config(Vec<String>),
    Lab(LabError),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => EXIT_CONFIG,
            AppError::Lab(e) if e.kind() == ErrorKind::Input => EXIT_CONFIG,
            AppError::Lab(_) => EXIT_NUMERICAL,
            AppError::Io(_) => EXIT_IO,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_NUMERICAL => "numerical",
            _ => "io",
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            AppError::Config(m) => m.clone(),
            AppError::Lab(e) => vec![e.to_string()],
            AppError::Io(m) => vec![m.clone()],
        }
    }

    /// `{"error": kind, "exit_code": n, "messages": [...]}` on one line.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "messages": self.messages(),
        })
        .to_string()
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.messages().join("; "))
    }
}

impl std::error::Error for AppError {}

impl From<LabError> for AppError {
    fn from(e: LabError) -> Self {
        AppError::Lab(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub trials: usize,
    pub passed: usize,
    pub pass: bool,
    /// The suite's worst measured quantity (error, ratio or margin).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    pub suites: Option<Vec<SuiteResult>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Single writer for a run's files.
struct Emitter {
    dir: PathBuf,
    csv: bool,
    json: bool,
    files: Vec<FileEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> AppError {
    AppError::Io(format!("{}: {e}", path.display()))
}

impl Emitter {
    fn new(dir: &Path, formats: &[String]) -> Result<Self, AppError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            csv: formats.iter().any(|f| f == "csv"),
            json: formats.iter().any(|f| f == "json"),
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), AppError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), AppError> {
        if !self.json {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| AppError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), AppError> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| AppError::Io(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| AppError::Io(e.to_string()))?;
        self.put(name, &bytes)
    }

    fn raw_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> Result<(), AppError> {
        if !self.csv {
            return Ok(());
        }
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.put(name, &bytes)
    }

    fn finish(mut self, cfg: &RunConfig, command: Command, suites: Option<Vec<SuiteResult>>) -> Result<Manifest, AppError> {
        let manifest = Manifest {
            tool: "hglk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            config_sha256: cfg.hash(),
            seed: cfg.suite.seed,
            files: std::mem::take(&mut self.files),
            suites,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| AppError::Io(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Load (or default), validate and run.
pub fn run_path(command: Command, config: Option<&Path>, out: Option<&Path>) -> Result<RunOutcome, AppError> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = out {
        cfg.output.dir = dir.to_path_buf();
    }
    run(command, &cfg)
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome, AppError> {
    cfg.validate()?;
    let mut em = Emitter::new(&cfg.output.dir, &cfg.output.formats)?;
    let suites = match command {
        Command::Spectrum => spectrum(cfg, &mut em).map(|_| None),
        Command::Fracpow => fracpow(cfg, &mut em).map(|_| None),
        Command::Besov => besov(cfg, &mut em).map(|_| None),
        Command::Commutator => commutator(cfg, &mut em).map(|_| None),
        Command::Simulate => simulate(cfg, &mut em).map(|_| None),
        Command::BlowupScan => blowup_scan(cfg, &mut em).map(|_| None),
        Command::Verify => verify(cfg, &mut em).map(Some),
    }?;
    let failed = suites.as_ref().is_some_and(|s| s.iter().any(|r| !r.pass));
    let manifest = em.finish(cfg, command, suites)?;
    Ok(RunOutcome {
        manifest,
        exit_code: if failed { EXIT_SUITE } else { EXIT_OK },
    })
}

#[derive(Debug, Serialize)]
struct SpectrumReport {
    n: usize,
    length: f64,
    eigenvalue_min: f64,
    eigenvalue_max: f64,
    reconstruction_error: f64,
    orthonormality_error: f64,
    ellipticity: EllipticityReport,
    lipschitz: f64,
    a3: A3Report,
    form: FormReport,
    potential_lorentz: f64,
    singular_lorentz: f64,
    bounded_sup: f64,
    sobolev: SobolevEquivalenceReport,
    yosida: Vec<YosidaRow>,
}

fn spectrum(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let op = cfg.operator()?;
    let spec = eigendecompose(&op)?;
    let seed = cfg.suite.seed;
    let f = band_limited_real(&mut trial_rng(seed, 0), op.grid);
    let report = SpectrumReport {
        n: op.grid.n(),
        length: op.grid.length(),
        eigenvalue_min: spec.eigenvalues[0],
        eigenvalue_max: spec.max_abs_eigenvalue(),
        reconstruction_error: spec.reconstruction_error(&op.matrix),
        orthonormality_error: spec.orthonormality_error(),
        ellipticity: check_ellipticity(&op.coeff),
        lipschitz: op.coeff.lip,
        a3: check_a3(&op.coeff, &op.grid, cfg.suite.trials, seed)?,
        form: check_form_positivity(&op, cfg.potential.theta)?,
        potential_lorentz: op.pot.lorentz_norm,
        singular_lorentz: op.pot.singular_lorentz,
        bounded_sup: op.pot.bounded_sup,
        sobolev: sobolev_equivalence_report(&op, cfg.suite.trials, seed)?,
        yosida: crate::spectral::yosida_decay_report(&spec, &f, &[1.0, 1e1, 1e2, 1e3, 1e4, 1e5])?,
    };
    em.csv(
        "spectrum.csv",
        &["k", "eigenvalue"],
        spec.eigenvalues.iter().enumerate().map(|(k, &l)| vec![k.to_string(), num(l)]).collect(),
    )?;
    em.json("assumptions.json", &report)
}

#[derive(Debug, Serialize)]
struct FracpowReport {
    s: f64,
    nodes: usize,
    solves: usize,
    rel_error: f64,
    rel_error_doubled: f64,
    reduction: f64,
    range_warning: Option<String>,
    square_identity_error: f64,
    resolvent: Vec<WeightedResolventReport>,
}

fn fracpow(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let op = cfg.operator()?;
    let spec = eigendecompose(&op)?;
    let s = cfg.frac.s;
    let nodes = cfg.frac.quad_nodes;
    let direct = frac_power_spectral(&spec, s)?;
    let (lo, hi) = spectral_window(&spec);
    let norm = crate::linalg::symmetric_spectral_norm(&direct)?;
    let quad = |count: usize| -> crate::Result<(f64, usize, Option<String>)> {
        let rule = QuadratureRule::for_fractional_power(lo, hi, s, count)?;
        let b = frac_power_balakrishnan(&op.matrix, s, &rule)?;
        let err = crate::linalg::symmetric_spectral_norm(&(&b.matrix - &direct))? / norm;
        Ok((err, b.solves, b.range_warning))
    };
    let (rel_error, solves, range_warning) = quad(nodes)?;
    let (rel_error_doubled, _, _) = quad(2 * nodes)?;
    let f = band_limited_complex(&mut trial_rng(cfg.suite.seed, 1), op.grid);
    let resolvent = [0.3, 0.5, 0.75, 1.0]
        .iter()
        .map(|&sigma| weighted_resolvent_bound(&spec, &f, sigma, &suite::resolvent_rule(lo, hi, sigma)?))
        .collect::<crate::Result<Vec<_>>>()?;
    let d = square_root(&spec)?;
    let report = FracpowReport {
        s,
        nodes,
        solves,
        rel_error,
        rel_error_doubled,
        reduction: rel_error / rel_error_doubled,
        range_warning,
        square_identity_error: (&d * &d - &op.matrix).norm() / op.matrix.norm(),
        resolvent,
    };
    em.json("fracpow.json", &report)
}

#[derive(Debug, Serialize)]
struct SecondDifferenceRow {
    t: f64,
    integrand: f64,
    lower: f64,
}

#[derive(Debug, Serialize)]
struct BesovSummary {
    coefficient_homogeneous: f64,
    coefficient_inhomogeneous: f64,
    coefficient_terms: Vec<(i32, f64)>,
    weight_trends: Vec<WeightTrend>,
    bracket_second_difference_min_margin: f64,
    weight_second_difference_norm: f64,
    bernstein_max: f64,
    max_band_overlap: f64,
}

fn besov(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let grid = cfg.grid()?;
    let bank = DyadicBank::new(grid);
    let a = Field::from_real(grid, &cfg.coeff.sample(&grid)?)?;
    let hom = besov_norm(&bank, &a, 1.0, f64::INFINITY, 1.0, true)?;
    let inhom = besov_norm(&bank, &a, 1.0, f64::INFINITY, 1.0, false)?;
    let scan = weight_scan(&cfg.besov.weights, &cfg.besov.lengths, cfg.besov.spacing)?;

    let bracket = japanese_weight(grid, 1.0);
    let h = grid.spacing();
    let ts = log_grid(1.0f64.max(2.0 * h), 0.25 * grid.length(), 40);
    let rows: Vec<SecondDifferenceRow> = ts
        .iter()
        .map(|&t| SecondDifferenceRow {
            t,
            integrand: second_difference_integrand(&bracket, t),
            lower: t / 8.0,
        })
        .collect();
    let margin = rows.iter().map(|r| r.integrand - r.lower).fold(f64::INFINITY, f64::min);
    let w = japanese_weight(grid, cfg.sim.weight_a);
    let wnorm = second_difference_norm(&w, &log_grid(2.0 * h, 0.45 * grid.length(), 60))?;

    let f = band_limited_real(&mut trial_rng(cfg.suite.seed, 2), grid);
    let mut bern: f64 = 0.0;
    for j in bank.bands() {
        if let Some(r) = bernstein_ratio(&bank, &f, j)? {
            bern = bern.max(r);
        }
    }
    let summary = BesovSummary {
        coefficient_homogeneous: hom.value,
        coefficient_inhomogeneous: inhom.value,
        coefficient_terms: hom.terms,
        weight_trends: scan.trends.clone(),
        bracket_second_difference_min_margin: margin,
        weight_second_difference_norm: wnorm,
        bernstein_max: bern,
        max_band_overlap: max_band_overlap(&bank),
    };
    em.raw_csv("weight_scan.csv", |out| scan.write_csv(out))?;
    em.csv(
        "second_difference.csv",
        &["t", "integrand", "t_over_8"],
        rows.iter().map(|r| vec![num(r.t), num(r.integrand), num(r.lower)]).collect(),
    )?;
    em.json("besov.json", &summary)
}

#[derive(Debug, Serialize)]
struct CommutatorSummary {
    records: Vec<EstimateRecord>,
    family: FamilyReport,
    key_estimates: Vec<KeyEstimateReport>,
    pairing: Vec<PairingCheck>,
    potential_difference_ratio: Option<f64>,
    dilation_factors: Vec<usize>,
    dilated_norms: Vec<f64>,
}

fn record(id: &str, n: usize, ratio: Option<f64>, seed: Option<u64>) -> EstimateRecord {
    EstimateRecord {
        estimate_id: id.into(),
        grid_n: n,
        ratio,
        bound_parts: None,
        seed,
    }
}

fn commutator(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let grid = cfg.grid()?;
    let length = grid.length();
    let seed = cfg.suite.seed;
    let ladder = Ladder::new(length, cfg.suite.ladder.clone())?;
    let family = prop2_family(&cfg.coeff, &cfg.potential, &ladder, cfg.suite.trials, ladder.sizes[0] / 4, seed)?;
    let mut records = Vec::new();
    for (&n, &r) in family.grid_n.iter().zip(&family.max_ratios) {
        records.push(record("case1_family_max", n, Some(r), Some(seed)));
    }
    let trig = move |x: f64| (2.0 * PI * x / length).cos() + 0.5 * (4.0 * PI * x / length).sin();
    records.extend(verify_prop2_case1(trig, &cfg.coeff, &cfg.potential, &ladder)?.records("case1_trig", None));
    records.extend(verify_lipschitz_commutator(triangle_wave(length), &ladder)?.records("lipschitz_triangle", None));

    let mut r = trial_rng(seed, 3);
    let f = band_limited_real(&mut r, grid);
    let g = band_limited_real(&mut r, grid);
    let n = grid.n();
    records.push(record("fractional_leibniz", n, verify_fractional_leibniz(&f, &g, 0.5)?.residual_ratio, Some(seed)));
    let e = KatoPonceExponents {
        r: 2.0,
        p1: 2.0,
        q1: f64::INFINITY,
        p2: f64::INFINITY,
        q2: 2.0,
    };
    records.push(record("kato_ponce", n, verify_kato_ponce(&f, &g, 0.5, e)?.ratio, Some(seed)));

    let (op, d) = case1_operator(grid, &cfg.coeff, &cfg.potential)?;
    let bank = DyadicBank::new(grid);
    let mut key_estimates = Vec::new();
    for j in bank.bands() {
        if let Some(k) = verify_dyadic_key_estimate(&bank, &f, &d, j)? {
            key_estimates.push(k);
        }
    }
    let spec = eigendecompose(&op)?;
    let (lo, hi) = spectral_window(&spec);
    let rule = QuadratureRule::balanced(lo, hi, 0.5, 0.5, suite::PAIRING_NODES)?;
    let pairing = (0..4)
        .map(|k| -> crate::Result<PairingCheck> {
            let mut r = trial_rng(seed, 10 + k);
            let g = band_limited_complex(&mut r, grid);
            let h = band_limited_complex(&mut r, grid);
            let fr = f.real_parts();
            let direct = commutator_pairing_direct(&fr, &d, &g, &h)?;
            let quad = commutator_via_balakrishnan(&fr, &op, &g, &h, &rule)?;
            Ok(PairingCheck {
                difference: (direct - quad).norm(),
                scale: hi.sqrt() * f.max_abs() * g.l2_norm() * h.l2_norm(),
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let potential_difference_ratio = if PotentialField::from_spec(&grid, &cfg.potential)?.is_zero() {
        None
    } else {
        potential_difference_ratio(grid, &cfg.coeff, &cfg.potential)?
    };
    let dilation_factors = vec![1, 2, 4];
    let bump = |x: f64| (-x * x).exp();
    let base = (n / 4).max(16);
    let dilated_norms = dilated_commutator_norms(bump, length / (n / base) as f64, base, &dilation_factors)?;
    let summary = CommutatorSummary {
        records,
        family,
        key_estimates,
        pairing,
        potential_difference_ratio,
        dilation_factors,
        dilated_norms,
    };
    em.json("commutator.json", &summary)
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    status: Status,
    t_obs: Option<f64>,
    steps: usize,
    a_emp: f64,
    b: f64,
    final_linf: f64,
    inequality: InequalityReport,
    certificate: Certificate,
    comparison_ode_t_bound: Option<f64>,
}

fn simulate(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let op = cfg.operator()?;
    let grid = op.grid;
    let u0 = gaussian(grid, cfg.initial.amplitude, cfg.initial.width);
    let trace = evolve(&op, &u0, cfg.sim.clone())?;
    let n = grid.n();
    let family = prop2_family(
        &cfg.coeff,
        &cfg.potential,
        &Ladder::new(grid.length(), vec![n])?,
        cfg.suite.trials,
        n / 4,
        cfg.suite.seed,
    )?;
    let d = square_root(&eigendecompose(&op)?)?;
    let w = japanese_weight(grid, cfg.sim.weight_a);
    let mut certificate = threshold_certificate(&u0, &w, cfg.sim.p, certificate_constant(&d, &w, family.max_ratios[0])?)?;
    certificate.t_obs = trace.t_obs();
    let f0 = trace.rows[0].weighted_mass;
    let q = 0.5 * (cfg.sim.p + 1.0);
    let comparison_ode_t_bound = if f0 > 0.0 && trace.a_emp > 0.0 {
        BlowupOde::new(trace.a_emp, trace.b, q, f0)?.t_bound()
    } else {
        None
    };
    let summary = SimulationSummary {
        status: trace.status,
        t_obs: trace.t_obs(),
        steps: trace.steps,
        a_emp: trace.a_emp,
        b: trace.b,
        final_linf: trace.rows.last().map_or(0.0, |r| r.linf),
        inequality: trace.inequality_check(1e-6),
        certificate,
        comparison_ode_t_bound,
    };
    em.raw_csv("trace.csv", |out| trace.write_csv(out))?;
    em.json("simulate.json", &summary)
}

#[derive(Debug, Serialize)]
struct BlowupScanSummary {
    c_emp: f64,
    threshold_amplitude: f64,
    runs: Vec<BlowupRun>,
    rescaling: Vec<RescalingScan>,
}

fn blowup_scan(cfg: &RunConfig, em: &mut Emitter) -> Result<(), AppError> {
    let setup = ThresholdSetup::new(
        cfg.grid()?,
        &cfg.coeff,
        &cfg.potential,
        cfg.sim.p,
        cfg.sim.weight_a,
        cfg.initial.width,
        cfg.suite.trials,
        cfg.suite.seed,
    )?;
    let runs = crate::par::map_slice(&cfg.scan.factors, |&f| {
        setup.run(f, cfg.sim.dt, Some(cfg.sim.t_max), cfg.sim.blowup_threshold)
    })
    .into_iter()
    .collect::<crate::Result<Vec<_>>>()?;
    let rescaling = cfg
        .scan
        .exponents
        .iter()
        .map(|&p| suite::standard_rescaling(p, cfg.sim.weight_a, &cfg.scan.dilations))
        .collect::<crate::Result<Vec<_>>>()?;
    em.csv(
        "threshold_sweep.csv",
        &["factor", "amplitude", "lhs", "rhs", "predicted", "t_bound", "T_obs", "status", "inequality_fraction"],
        runs.iter()
            .map(|r| {
                vec![
                    num(r.factor),
                    num(r.amplitude),
                    num(r.certificate.lhs),
                    num(r.certificate.rhs),
                    r.certificate.predicted.to_string(),
                    opt_num(r.certificate.t_bound),
                    opt_num(r.certificate.t_obs),
                    match r.status {
                        Status::BlownUp { .. } => "blown_up".into(),
                        s => s.label(),
                    },
                    num(r.inequality.fraction),
                ]
            })
            .collect(),
    )?;
    em.csv(
        "rescaling.csv",
        &["p", "R", "a_emp", "b", "ratio"],
        rescaling
            .iter()
            .flat_map(|s| s.rows.iter().map(move |r| vec![num(s.p), num(r.r), num(r.a_emp), num(r.b), num(r.ratio)]))
            .collect(),
    )?;
    em.json(
        "blowup_scan.json",
        &BlowupScanSummary {
            c_emp: setup.c_emp,
            threshold_amplitude: setup.threshold_amplitude,
            runs,
            rescaling,
        },
    )
}

fn tally(name: &str, outcomes: &[bool], worst: f64) -> SuiteResult {
    let passed = outcomes.iter().filter(|&&b| b).count();
    SuiteResult {
        name: name.into(),
        trials: outcomes.len(),
        passed,
        pass: passed == outcomes.len() && !outcomes.is_empty(),
        worst,
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// The property suite at desk scale, seeded from `suite.seed`.
pub fn property_suite(cfg: &RunConfig) -> crate::Result<Vec<SuiteResult>> {
    let seed = cfg.suite.seed;
    let mut out = Vec::new();
    let op = cfg.operator()?;

    let mut ops = vec![op.clone()];
    for k in 0..5 {
        ops.push(suite::rough_operator(seed + k, 64, 16.0)?);
    }
    let checks: Vec<bool> = ops
        .iter()
        .map(|o| Ok(check_ellipticity(&o.coeff).pass && check_form_positivity(o, 0.5)?.pass))
        .collect::<crate::Result<_>>()?;
    out.push(tally("operator_assumptions", &checks, 0.0));

    let cross = suite::cross_path_suite(5, 64, 16.0, 400, seed)?;
    out.push(tally(
        "fracpow_cross_path",
        &cross.iter().map(|c| c.rel_error <= 1e-6 && c.rel_error / c.rel_error_doubled >= 4.0).collect::<Vec<_>>(),
        max_of(cross.iter().map(|c| c.rel_error)),
    ));

    let sq = ops.iter().map(suite::square_identity_error).collect::<crate::Result<Vec<_>>>()?;
    out.push(tally("square_identity", &sq.iter().map(|&e| e <= 1e-10).collect::<Vec<_>>(), max_of(sq.iter().copied())));

    let res = ops
        .iter()
        .skip(1)
        .map(|o| suite::resolvent_identity_residual(o, &band_limited_real(&mut trial_rng(seed, 4), o.grid), 1.0))
        .collect::<crate::Result<Vec<_>>>()?;
    out.push(tally("resolvent_identity", &res.iter().map(|&e| e <= 1e-10).collect::<Vec<_>>(), max_of(res.iter().copied())));

    let sc = suite::scalar_balakrishnan_errors(&[0.25, 1.0, 4.0, 100.0], 800)?;
    out.push(tally("scalar_resolvent", &sc.iter().map(|&e| e <= 1e-8).collect::<Vec<_>>(), max_of(sc.iter().copied())));

    let wr = suite::weighted_resolvent_suite(10, &[0.3, 0.5, 1.0], seed)?;
    let wr_ok: Vec<bool> = wr
        .iter()
        .map(|r| {
            let exact = statrs::function::beta::beta(2.0 * r.sigma - 0.5, 0.5);
            r.lhs <= r.rhs * (1.0 + 1e-6) && (r.constant_sq - exact).abs() <= 1e-6 * exact
        })
        .collect();
    out.push(tally("weighted_resolvent", &wr_ok, max_of(wr.iter().map(|r| r.lhs / r.rhs))));

    let lw = suite::loewner_suite(50, &[0.25, 0.5, 0.75, 1.0], seed)?;
    let lw_ok: Vec<bool> = lw
        .iter()
        .map(|r| {
            r.min_gap_eig >= -1e-9 * r.scale
                && matches!((r.inverse_gap_eig, r.inverse_scale), (Some(g), Some(s)) if g >= -1e-9 * s)
        })
        .collect();
    out.push(tally("loewner", &lw_ok, min_of(lw.iter().map(|r| r.min_gap_eig / r.scale))));

    let pc = suite::commutator_identity_suite(10, 32, seed)?;
    out.push(tally(
        "commutator_pairing",
        &pc.iter().map(|c| c.difference <= 1e-6 * c.scale).collect::<Vec<_>>(),
        max_of(pc.iter().map(|c| c.difference / c.scale)),
    ));

    let fam = suite::commutator_stability(&Ladder::new(16.0, vec![32, 64, 128])?, 20, seed)?;
    out.push(tally(
        "commutator_refinement",
        &fam.refinement_ratios.iter().map(|&r| r > 0.5 && r < 2.0).collect::<Vec<_>>(),
        max_of(fam.refinement_ratios.iter().map(|&r| r.max(1.0 / r))),
    ));

    let zero = suite::constant_commutator_norm(64, 16.0)?;
    out.push(tally("constant_commutator", &[zero < 1e-10], zero));

    let grid = op.grid;
    let bank = DyadicBank::new(grid);
    let tele: Vec<f64> = (0..5)
        .map(|k| {
            let f = band_limited_complex(&mut trial_rng(seed, 20 + k), grid);
            let total = bank
                .decompose(&f)?
                .into_iter()
                .try_fold(bank.project(&f, crate::besov::Band::Lowpass)?, |acc, (j, pj)| {
                    if j >= 1 {
                        acc.add(&pj)
                    } else {
                        Ok(acc)
                    }
                })?;
            Ok(total.sub(&f)?.l2_norm() / f.l2_norm())
        })
        .collect::<crate::Result<_>>()?;
    let overlap = max_band_overlap(&bank);
    let mut tele_ok: Vec<bool> = tele.iter().map(|&e| e <= 1e-12).collect();
    tele_ok.push(overlap == 0.0);
    out.push(tally("dyadic_partition", &tele_ok, max_of(tele.iter().copied())));

    let scan = weight_scan(&[0.7, 1.0], &[64.0, 128.0, 256.0, 512.0], 1.0 / 32.0)?;
    let scan_ok: Vec<bool> = scan
        .trends
        .iter()
        .map(|t| {
            if t.a == 1.0 {
                t.verdict == Verdict::DivergentTrend && t.increments.iter().all(|&i| i >= 0.05)
            } else {
                t.verdict == Verdict::Convergent && t.max_tail_ratio <= 0.05
            }
        })
        .collect();
    out.push(tally("weight_regularity", &scan_ok, max_of(scan.trends.iter().map(|t| t.max_tail_ratio))));

    let margin = suite::second_difference_margin(4096, 128.0, 60);
    out.push(tally("second_difference", &[margin >= 0.0], margin));

    let ode: Vec<f64> = (0..20)
        .map(|k| suite::ode_max_error(&suite::ode_case(seed, k), 100_000))
        .collect::<crate::Result<_>>()?;
    out.push(tally("comparison_ode", &ode.iter().map(|&e| e <= 1e-6).collect::<Vec<_>>(), max_of(ode.iter().copied())));

    let gaps = suite::order_ladder(64, 0.01, 1.0, &[4, 8, 16])?;
    let factors: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    out.push(tally(
        "strang_order",
        &factors.iter().map(|f| (3.5..=4.5).contains(f)).collect::<Vec<_>>(),
        max_of(factors.iter().map(|f| (f - 4.0).abs())),
    ));

    let prop = Propagator::from_operator(&op)?;
    let unit: Vec<f64> = (0..5)
        .map(|k| {
            let u = band_limited_complex(&mut trial_rng(seed, 30 + k), grid);
            (prop.apply(&u, 0.37 * (k + 1) as f64).l2_norm() - u.l2_norm()).abs() / u.l2_norm()
        })
        .collect();
    out.push(tally("propagator_unitarity", &unit.iter().map(|&e| e <= 1e-12).collect::<Vec<_>>(), max_of(unit.iter().copied())));

    let small = gaussian(grid, 0.5, 1.0);
    let trace = evolve(
        &op,
        &small,
        SimulationConfig {
            t_max: 0.2,
            ..cfg.sim.clone()
        },
    )?;
    let mass_ok: Vec<bool> = trace.rows.windows(2).map(|w| w[1].mass >= w[0].mass * (1.0 - 1e-12)).collect();
    out.push(tally("mass_growth", &mass_ok, min_of(trace.rows.windows(2).map(|w| w[1].mass - w[0].mass))));

    let mut slopes = Vec::new();
    for p in [2.0, 3.0] {
        let s = suite::standard_rescaling(p, 0.75, &[1, 2, 4, 8, 16])?;
        let target = if p == 3.0 { 0.0 } else { s.expected_slope };
        slopes.push((s.slope - target).abs());
    }
    out.push(tally("rescaling_slope", &slopes.iter().map(|&d| d <= 0.15).collect::<Vec<_>>(), max_of(slopes.iter().copied())));

    let run = suite::blowup_run(128, 32.0, 2.0, 0.75, 1.5, 20, seed)?;
    let t_bound = run.certificate.t_bound.unwrap_or(f64::NAN);
    let blown = matches!(run.status, Status::BlownUp { t_obs } if t_obs <= 1.1 * t_bound);
    out.push(tally(
        "blowup_reproduction",
        &[blown, run.certificate.predicted, run.inequality.fraction >= 0.99],
        run.certificate.t_obs.unwrap_or(f64::NAN) / t_bound,
    ));
    Ok(out)
}

fn verify(cfg: &RunConfig, em: &mut Emitter) -> Result<Vec<SuiteResult>, AppError> {
    let results = property_suite(cfg)?;
    em.csv(
        "verify.csv",
        &["suite", "trials", "passed", "pass", "worst"],
        results
            .iter()
            .map(|r| vec![r.name.clone(), r.trials.to_string(), r.passed.to_string(), r.pass.to_string(), num(r.worst)])
            .collect(),
    )?;
    em.json("verify.json", &results)?;
    Ok(results)
}

/// Fully commented default config.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../configs/default.toml");
