//! Experiment configuration: a fixed JSON schema with decimal-string numeric
//! fields, resolved into a runnable scenario spec. Unknown keys are rejected;
//! every real-valued field round-trips through binary64 so the canonical echo
//! hashes identically on any platform.

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use fracbsde::{
    build_scenario, DelayedBsdeProblem, DependsFlags, DeterministicFn, Error, FbmModel, GenArgs,
    GeneratorSpec, HurstParam, KernelConstants, Result, ScenarioKind, ScenarioSpec, SolverConfig,
    TerminalMap, TimeGrid,
};

/// Finite binary64 value carried as its shortest round-trip decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dec(f64);

impl Dec {
    pub fn new(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::invalid(format!("non-finite numeric value {v}")));
        }
        Ok(Dec(v))
    }

    /// For schema defaults and echoes built from values already validated.
    pub fn of(v: f64) -> Self {
        debug_assert!(v.is_finite());
        Dec(v)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Dec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}", self.0))
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Dec, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Dec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string or a JSON number")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Dec, E> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| E::custom(format!("not a decimal number: {s:?}")))?;
                if !v.is_finite() {
                    return Err(E::custom(format!("non-finite numeric value {s:?}")));
                }
                Ok(Dec(v))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Dec, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite numeric value"));
                }
                Ok(Dec(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Dec, E> {
                Ok(Dec(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Dec, E> {
                Ok(Dec(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

/// Deterministic coefficient preset: a constant or `a + c t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoeffSpec {
    #[serde(rename = "const")]
    Const(Dec),
    #[serde(rename = "affine")]
    Affine(Dec, Dec),
}

impl CoeffSpec {
    pub fn build(&self) -> DeterministicFn<f64> {
        match self {
            CoeffSpec::Const(c) => DeterministicFn::constant(c.get()),
            CoeffSpec::Affine(a, c) => DeterministicFn::affine(a.get(), c.get()),
        }
    }
}

fn coeff_zero() -> CoeffSpec {
    CoeffSpec::Const(Dec::of(0.0))
}

fn coeff_one() -> CoeffSpec {
    CoeffSpec::Const(Dec::of(1.0))
}

/// Terminal map preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerminalSpec {
    #[serde(rename = "id")]
    Id,
    #[serde(rename = "square")]
    Square,
    #[serde(rename = "call")]
    Call(Dec),
}

impl TerminalSpec {
    pub fn build(&self) -> TerminalMap<f64> {
        match self {
            TerminalSpec::Id => TerminalMap::identity(),
            TerminalSpec::Square => TerminalMap::square(),
            TerminalSpec::Call(k) => TerminalMap::call(k.get()),
        }
    }
}

/// Generator preset. Custom drivers are lookup tables with multilinear
/// interpolation, not an expression language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorConfig {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "const")]
    Const(Dec),
    #[serde(rename = "linear_y")]
    LinearY(Dec),
    #[serde(rename = "linear_delay")]
    LinearDelay(Dec),
    #[serde(rename = "example43_minus")]
    Example43Minus,
    #[serde(rename = "example43_plus")]
    Example43Plus,
    #[serde(rename = "table")]
    Table(TableSpec),
}

/// Tabulated driver on a tensor grid over a subset of the generator
/// arguments. Values are row-major with the last axis fastest; evaluation
/// clamps to the grid hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub axes: Vec<String>,
    pub grids: Vec<Vec<Dec>>,
    pub values: Vec<Dec>,
    /// Declared constant for the weighted quadratic growth condition.
    pub lipschitz: Dec,
    #[serde(default)]
    pub monotone_in_y_delay: bool,
}

const AXIS_NAMES: [&str; 6] = ["t", "x", "y", "z", "y_delay", "z_delay"];

fn axis_value(args: &GenArgs<f64>, idx: usize) -> f64 {
    match idx {
        0 => args.t,
        1 => args.x,
        2 => args.y,
        3 => args.z,
        4 => args.y_delay,
        _ => args.z_delay,
    }
}

/// Clamped cell index and fractional position of `x` in an increasing grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    let j = (grid.partition_point(|&g| g <= x) - 1).min(last - 1);
    (j, (x - grid[j]) / (grid[j + 1] - grid[j]))
}

pub fn build_table_generator(spec: &TableSpec) -> Result<GeneratorSpec<f64>> {
    let d = spec.axes.len();
    if d == 0 || d > AXIS_NAMES.len() {
        return Err(Error::invalid("table generator needs between 1 and 6 axes"));
    }
    if spec.grids.len() != d {
        return Err(Error::invalid(format!(
            "table generator has {} axes but {} grids",
            d,
            spec.grids.len()
        )));
    }
    let mut axis_idx = Vec::with_capacity(d);
    for name in &spec.axes {
        let idx = AXIS_NAMES
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown table axis {name:?}; expected one of {}",
                    AXIS_NAMES.join(", ")
                ))
            })?;
        if axis_idx.contains(&idx) {
            return Err(Error::invalid(format!("duplicate table axis {name:?}")));
        }
        axis_idx.push(idx);
    }
    let mut grids: Vec<Vec<f64>> = Vec::with_capacity(d);
    for (a, g) in spec.grids.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::invalid(format!(
                "table axis {:?} needs at least two grid points",
                spec.axes[a]
            )));
        }
        let vals: Vec<f64> = g.iter().map(|v| v.get()).collect();
        if vals.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "table axis {:?} grid must be strictly increasing",
                spec.axes[a]
            )));
        }
        grids.push(vals);
    }
    let dims: Vec<usize> = grids.iter().map(|g| g.len()).collect();
    let expected: usize = dims.iter().product();
    if spec.values.len() != expected {
        return Err(Error::invalid(format!(
            "table needs {} values for grid shape {:?}, got {}",
            expected,
            dims,
            spec.values.len()
        )));
    }
    let values: Vec<f64> = spec.values.iter().map(|v| v.get()).collect();
    let lipschitz = spec.lipschitz.get();
    if lipschitz < 0.0 {
        return Err(Error::invalid("table lipschitz constant must be nonnegative"));
    }
    let depends = DependsFlags {
        y: axis_idx.contains(&2),
        z: axis_idx.contains(&3),
        y_delay: axis_idx.contains(&4),
        z_delay: axis_idx.contains(&5),
    };
    let axes = axis_idx.clone();
    let label = format!("table({})", spec.axes.join(","));
    Ok(GeneratorSpec::new(
        label,
        depends,
        lipschitz,
        spec.monotone_in_y_delay,
        move |args| {
            let locs: Vec<(usize, f64)> = axes
                .iter()
                .enumerate()
                .map(|(a, &idx)| locate(&grids[a], axis_value(&args, idx)))
                .collect();
            let mut acc = 0.0;
            for corner in 0..(1usize << locs.len()) {
                let mut w = 1.0;
                let mut flat = 0usize;
                for (a, &(j, frac)) in locs.iter().enumerate() {
                    let up = (corner >> a) & 1 == 1;
                    w *= if up { frac } else { 1.0 - frac };
                    flat = flat * dims[a] + j + up as usize;
                }
                acc += w * values[flat];
            }
            acc
        },
    ))
}

impl GeneratorConfig {
    pub fn build(&self, hurst: HurstParam<f64>, horizon: f64) -> Result<GeneratorSpec<f64>> {
        match self {
            GeneratorConfig::Zero => Ok(GeneratorSpec::zero()),
            GeneratorConfig::Const(c) => Ok(GeneratorSpec::constant(c.get())),
            GeneratorConfig::LinearY(a) => Ok(GeneratorSpec::linear_y(a.get())),
            GeneratorConfig::LinearDelay(a) => Ok(GeneratorSpec::linear_delay(a.get())),
            GeneratorConfig::Example43Minus => Ok(GeneratorSpec::example43(hurst, horizon, -1.0)),
            GeneratorConfig::Example43Plus => Ok(GeneratorSpec::example43(hurst, horizon, 1.0)),
            GeneratorConfig::Table(t) => build_table_generator(t),
        }
    }
}

/// Inline problem description; field names follow the published schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(rename = "H")]
    pub hurst: Dec,
    #[serde(rename = "T")]
    pub horizon: Dec,
    #[serde(rename = "N")]
    pub steps: usize,
    pub delta_steps: usize,
    pub eta0: Dec,
    #[serde(default = "coeff_zero")]
    pub b: CoeffSpec,
    #[serde(default = "coeff_one")]
    pub sigma: CoeffSpec,
    pub h: TerminalSpec,
    pub generator: GeneratorConfig,
    #[serde(default = "coeff_zero")]
    pub phi0: CoeffSpec,
    #[serde(default = "coeff_zero")]
    pub psi0: CoeffSpec,
    /// Ratio bound M > 2 for the admissibility constants.
    #[serde(default = "dec_m_default")]
    pub m_bound: Dec,
    /// Fallback norm weight when the run is not admissible.
    #[serde(default = "dec_beta_default")]
    pub beta: Dec,
    /// Overrides the generator's declared constant when present.
    #[serde(default)]
    pub lipschitz: Option<Dec>,
}

fn dec_m_default() -> Dec {
    Dec::of(2.5)
}

fn dec_beta_default() -> Dec {
    Dec::of(1.0)
}

impl ProblemSpec {
    pub fn build(&self) -> Result<(DelayedBsdeProblem<f64>, f64)> {
        let hurst = HurstParam::new(self.hurst.get())?;
        let grid = TimeGrid::new(self.horizon.get(), self.steps, self.delta_steps)?;
        let model = FbmModel::new(hurst, grid);
        let gen = self.generator.build(hurst, self.horizon.get())?;
        let lipschitz = self.lipschitz.map(Dec::get).unwrap_or_else(|| gen.lipschitz);
        let problem = DelayedBsdeProblem {
            model,
            eta0: self.eta0.get(),
            drift: self.b.build(),
            vol: self.sigma.build(),
            terminal: self.h.build(),
            gen,
            phi0: self.phi0.build(),
            psi0: self.psi0.build(),
            constants: KernelConstants::new(self.m_bound.get(), self.beta.get(), lipschitz)?,
        };
        Ok((problem, lipschitz))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Picard,
    Comparison,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Absolute tolerance on the squared iteration distance; null keeps the
    /// solver's resolution-scaled default.
    pub tol: Option<Dec>,
    pub max_iter: Option<usize>,
    pub basis_degree: Option<usize>,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub dir: Option<String>,
    #[serde(default)]
    pub emit_paths: bool,
    #[serde(default)]
    pub emit_fields: bool,
}

/// Top-level experiment description: a named scenario or an inline problem,
/// plus sampling, solver and output controls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    /// Dominating problem for comparison mode; must share the model and
    /// forward coefficients with `problem`.
    #[serde(default)]
    pub problem_upper: Option<ProblemSpec>,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Picard,
    Comparison,
    Battery,
}

impl Pipeline {
    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Picard => "picard",
            Pipeline::Comparison => "comparison",
            Pipeline::Battery => "battery",
        }
    }
}

/// A validated, fully resolved run: the scenario spec to execute, the
/// canonical config echo, and the output plumbing.
#[derive(Debug)]
pub struct RunPlan {
    pub spec: ScenarioSpec<f64>,
    pub pipeline: Pipeline,
    pub echo: ExperimentConfig,
    pub content_hash: String,
    pub out_dir: PathBuf,
    pub emit_paths: bool,
    pub emit_fields: bool,
}

/// Git blob hash of the canonical config bytes; `git hash-object` on the
/// echoed config file reproduces it.
pub fn git_blob_sha1(content: &[u8]) -> String {
    use sha1::{Digest, Sha1};
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn canonical_bytes(echo: &ExperimentConfig) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(echo).expect("config serialization is infallible");
    s.push('\n');
    s.into_bytes()
}

/// Hash of the experiment identity: the canonical echo with the outputs
/// section reset to defaults, so the destination directory and artifact
/// toggles do not change the hash.
pub fn experiment_hash(echo: &ExperimentConfig) -> String {
    let mut id = echo.clone();
    id.outputs = OutputsSection::default();
    git_blob_sha1(&canonical_bytes(&id))
}

const DEFAULT_OUT_DIR: &str = "out";
const DEFAULT_INLINE_PATHS: usize = 10_000;
const DEFAULT_INLINE_SEED: u64 = 1;

pub fn resolve(
    raw: ExperimentConfig,
    cli_out: Option<PathBuf>,
    cli_seed: Option<u64>,
) -> Result<RunPlan> {
    if raw.scenario.is_some() == raw.problem.is_some() {
        return Err(Error::invalid(
            "config needs exactly one of `scenario` and `problem`",
        ));
    }
    if let Some(n) = raw.n_paths {
        if n == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
    }
    let seed_override = cli_seed.or(raw.seed);

    let (mut spec, problem_echo, mode_echo) = if let Some(name) = &raw.scenario {
        if raw.solver.mode.is_some() {
            return Err(Error::invalid(
                "scenario runs fix their own pipeline; `solver.mode` applies to inline problems",
            ));
        }
        if raw.problem_upper.is_some() {
            return Err(Error::invalid("`problem_upper` applies to inline problems"));
        }
        (build_scenario::<f64>(name)?, None, None)
    } else {
        let pspec = raw.problem.clone().expect("checked above");
        let mode = raw.solver.mode.unwrap_or(Mode::Picard);
        let (problem, lipschitz) = pspec.build()?;
        let mut echo_p = pspec.clone();
        echo_p.lipschitz = Some(Dec::of(lipschitz));
        let kind = match mode {
            Mode::Picard => {
                if raw.problem_upper.is_some() {
                    return Err(Error::invalid(
                        "`problem_upper` needs `solver.mode = \"comparison\"`",
                    ));
                }
                ScenarioKind::Picard(Box::new(problem))
            }
            Mode::Comparison => {
                let upper_spec = raw.problem_upper.clone().ok_or_else(|| {
                    Error::invalid("comparison mode needs a `problem_upper` section")
                })?;
                let (upper, _) = upper_spec.build()?;
                ScenarioKind::Comparison {
                    lower: Box::new(problem),
                    upper: Box::new(upper),
                }
            }
        };
        (
            ScenarioSpec {
                name: "inline".into(),
                seed: DEFAULT_INLINE_SEED,
                n_paths: DEFAULT_INLINE_PATHS,
                solver: SolverConfig::default(),
                kind,
            },
            Some(echo_p),
            Some(mode),
        )
    };

    if let Some(s) = seed_override {
        spec.seed = s;
    }
    if let Some(n) = raw.n_paths {
        spec.n_paths = n;
    }
    if let Some(t) = raw.solver.tol {
        if t.get() <= 0.0 {
            return Err(Error::invalid("solver.tol must be positive"));
        }
        spec.solver.tol = Some(t.get());
    }
    if let Some(m) = raw.solver.max_iter {
        if m == 0 {
            return Err(Error::invalid("solver.max_iter must be positive"));
        }
        spec.solver.max_iter = m;
    }
    if let Some(d) = raw.solver.basis_degree {
        spec.solver.basis_degree = d;
    }

    let pipeline = match &spec.kind {
        ScenarioKind::Picard(_) => Pipeline::Picard,
        ScenarioKind::Comparison { .. } => Pipeline::Comparison,
        ScenarioKind::Battery { .. } => Pipeline::Battery,
    };

    if raw.outputs.emit_fields {
        let field_ok = match &spec.kind {
            ScenarioKind::Picard(p) => !p.gen.depends.any(),
            _ => false,
        };
        if !field_ok {
            return Err(Error::invalid(
                "emit_fields needs a solution-independent generator solved by the Picard pipeline",
            ));
        }
    }
    if raw.outputs.emit_paths && pipeline == Pipeline::Battery {
        return Err(Error::invalid(
            "emit_paths does not apply to the sampling battery; it has no forward ensemble",
        ));
    }

    let out_dir = cli_out.unwrap_or_else(|| {
        PathBuf::from(raw.outputs.dir.clone().unwrap_or_else(|| DEFAULT_OUT_DIR.into()))
    });

    let echo = ExperimentConfig {
        scenario: raw.scenario.clone(),
        problem: problem_echo,
        problem_upper: raw.problem_upper.clone(),
        n_paths: Some(spec.n_paths),
        seed: Some(spec.seed),
        solver: SolverSection {
            tol: spec.solver.tol.map(Dec::of),
            max_iter: Some(spec.solver.max_iter),
            basis_degree: Some(spec.solver.basis_degree),
            mode: mode_echo,
        },
        outputs: OutputsSection {
            dir: Some(out_dir.to_string_lossy().into_owned()),
            emit_paths: raw.outputs.emit_paths,
            emit_fields: raw.outputs.emit_fields,
        },
    };
    let content_hash = experiment_hash(&echo);

    Ok(RunPlan {
        spec,
        pipeline,
        echo,
        content_hash,
        out_dir,
        emit_paths: raw.outputs.emit_paths,
        emit_fields: raw.outputs.emit_fields,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
}
