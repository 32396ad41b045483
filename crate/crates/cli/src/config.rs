//! Run configuration: JSON document, dotted-path overrides, validation.
//!
//! A run is described by one JSON object. Defaults fill every field, a
//! config file deep-merges over them, `--set key=value` flags patch single
//! fields, and the fully resolved document is echoed into the report so a
//! regression fixture never depends on implicit defaults.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use stabcert_core::chain::{ChainParams, EvalSettings, Overrides};
use stabcert_core::cutoff::CutoffProfile;
use stabcert_core::lattice::{GaugeField, LatticeGrid};
use stabcert_core::quad::QuadratureConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Chain,
    Optimize,
    Verify,
    ReproducePaper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Lattice-exact identities: IMS, gauge invariance, diamagnetic domination.
    Exact,
    /// Discretized continuum inequalities: counting, transfer, Kato trend,
    /// localization, ball Riesz means.
    Continuum,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub chain: ChainSection,
    pub profile: ProfileSection,
    pub overrides: OverridesSection,
    pub quad: QuadSection,
    pub evaluation: EvaluationSection,
    pub lattice: LatticeSection,
    pub suite: Suite,
    pub output_path: String,
    pub emit_curves: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Chain,
            chain: ChainSection::default(),
            profile: ProfileSection::default(),
            overrides: OverridesSection::default(),
            quad: QuadSection::default(),
            evaluation: EvaluationSection::default(),
            lattice: LatticeSection::default(),
            suite: Suite::All,
            output_path: "stabcert-report".into(),
            emit_curves: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub sigma: f64,
    pub eps: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub q: u32,
    /// Report the critical coupling as the headline instead of the verdict
    /// at `alpha`; exit status then reflects whether any coupling certifies.
    pub solve: bool,
}

impl Default for ChainSection {
    fn default() -> Self {
        // A coupling the engine-computed chain certifies on its own, with no
        // imported override values.
        Self { sigma: 0.3, eps: 0.2077, lambda: 0.97, alpha: 0.001, q: 1, solve: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub sigma: f64,
    pub plateau: f64,
    pub h_exponent: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { sigma: 0.3, plateau: 0.4, h_exponent: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverridesSection {
    pub omega_over_eps: Option<f64>,
    pub theta_sup: Option<f64>,
    pub j_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evaluations: u64,
    pub tail_cut: f64,
}

impl Default for QuadSection {
    fn default() -> Self {
        let cfg = QuadratureConfig::default();
        Self {
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
            max_evaluations: cfg.max_evaluations,
            tail_cut: cfg.tail_cut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub theta_table_points: usize,
    pub refine_tol: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let s = EvalSettings::default();
        Self { theta_table_points: s.theta_table_points, refine_tol: s.refine_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub n: usize,
    pub extent: f64,
    pub field: FieldSection,
    pub ball_radius: f64,
    pub levels: LevelsSection,
    pub times: Vec<f64>,
    /// Extra random-field trials appended to the configured field in the
    /// exact-identity battery; their seeds derive from the run seed.
    pub random_trials: usize,
    /// Grid sides for the criticality trend. Sizes below 10 sit inside the
    /// Dirichlet-wall resolution transient where bottoms slide downward at
    /// any coupling.
    pub kato_sizes: Vec<usize>,
    /// Kato coupling in units of the critical 2/π; above 1 the trend check
    /// turns informational and expects the supercritical divergence.
    pub kato_coupling_factor: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            n: 8,
            extent: 2.5,
            field: FieldSection::default(),
            ball_radius: 1.0,
            levels: LevelsSection::default(),
            times: vec![0.5, 1.0, 2.0],
            random_trials: 3,
            kato_sizes: vec![10, 12, 14],
            kato_coupling_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub kind: FieldKind,
    pub strength: f64,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { kind: FieldKind::Uniform, strength: 1.0, seed: 1, amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    Uniform,
    Random,
    PureGauge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsSection {
    pub min: f64,
    /// Upper end of the Riesz level grid; absent means half the UV scale.
    pub max: Option<f64>,
    pub count: usize,
}

impl Default for LevelsSection {
    fn default() -> Self {
        Self { min: 0.5, max: None, count: 8 }
    }
}

impl FieldSection {
    pub fn to_field(&self) -> GaugeField {
        match self.kind {
            FieldKind::Zero => GaugeField::Zero,
            FieldKind::Uniform => GaugeField::Uniform { strength: self.strength },
            FieldKind::Random => {
                GaugeField::Random { seed: self.seed, amplitude: self.amplitude }
            }
            FieldKind::PureGauge => {
                GaugeField::PureGauge { seed: self.seed, amplitude: self.amplitude }
            }
        }
    }
}

/// Core-level objects a validated chain-side config materializes into.
#[derive(Debug)]
pub struct ChainInputs {
    pub params: ChainParams,
    pub profile: CutoffProfile,
    pub overrides: Overrides,
    pub quad: QuadratureConfig,
    pub settings: EvalSettings,
}

/// Core-level objects a validated lattice-side config materializes into.
#[derive(Debug)]
pub struct LatticeInputs {
    pub grid: LatticeGrid,
    pub field: GaugeField,
    pub levels: Vec<f64>,
}

impl RunConfig {
    pub fn chain_inputs(&self) -> Result<ChainInputs, CliError> {
        if self.chain.sigma != self.profile.sigma {
            return Err(CliError::Config(format!(
                "chain.sigma ({}) and profile.sigma ({}) disagree",
                self.chain.sigma, self.profile.sigma
            )));
        }
        let params = ChainParams::new(
            self.chain.sigma,
            self.chain.eps,
            self.chain.lambda,
            self.chain.alpha,
            self.chain.q,
        )
        .map_err(|e| CliError::Config(format!("chain: {e}")))?;
        let profile =
            CutoffProfile::new(self.profile.sigma, self.profile.plateau, self.profile.h_exponent)
                .map_err(|e| CliError::Config(format!("profile: {e}")))?;
        let overrides = Overrides {
            omega_over_eps: self.overrides.omega_over_eps,
            theta_sup: self.overrides.theta_sup,
            j_value: self.overrides.j_value,
        };
        for (name, v) in [
            ("overrides.omega_over_eps", overrides.omega_over_eps),
            ("overrides.theta_sup", overrides.theta_sup),
            ("overrides.j_value", overrides.j_value),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if !(self.quad.abs_tol > 0.0 && self.quad.rel_tol > 0.0 && self.quad.tail_cut > 0.0) {
            return Err(CliError::Config(
                "quad tolerances and tail_cut must be positive".into(),
            ));
        }
        let quad = QuadratureConfig {
            abs_tol: self.quad.abs_tol,
            rel_tol: self.quad.rel_tol,
            max_evaluations: self.quad.max_evaluations,
            tail_cut: self.quad.tail_cut,
        };
        let settings = EvalSettings {
            theta_table_points: self.evaluation.theta_table_points,
            refine_tol: self.evaluation.refine_tol,
        };
        Ok(ChainInputs { params, profile, overrides, quad, settings })
    }

    pub fn lattice_inputs(&self) -> Result<LatticeInputs, CliError> {
        let sec = &self.lattice;
        let grid = LatticeGrid::with_extent(sec.n, sec.extent)
            .map_err(|e| CliError::Config(format!("lattice: {e}")))?;
        if !(sec.ball_radius > 0.0 && sec.ball_radius.is_finite()) {
            return Err(CliError::Config(format!(
                "lattice.ball_radius must be positive, got {}",
                sec.ball_radius
            )));
        }
        if sec.times.is_empty() || sec.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(CliError::Config(
                "lattice.times must be a nonempty list of positive times".into(),
            ));
        }
        if sec.kato_sizes.len() < 3 || !sec.kato_sizes.windows(2).all(|w| w[1] > w[0]) {
            return Err(CliError::Config(
                "lattice.kato_sizes needs at least 3 strictly increasing entries".into(),
            ));
        }
        if !(sec.kato_coupling_factor > 0.0 && sec.kato_coupling_factor.is_finite()) {
            return Err(CliError::Config(format!(
                "lattice.kato_coupling_factor must be positive, got {}",
                sec.kato_coupling_factor
            )));
        }
        let window = 0.5 * grid.uv_scale();
        let max = sec.levels.max.unwrap_or(window);
        if !(sec.levels.min > 0.0 && max > sec.levels.min) {
            return Err(CliError::Config(format!(
                "lattice.levels must satisfy 0 < min < max, got [{}, {max}]",
                sec.levels.min
            )));
        }
        if max > window + 1e-12 {
            return Err(CliError::Config(format!(
                "lattice.levels.max ({max:.4}) exceeds half the UV scale ({window:.4})"
            )));
        }
        if sec.levels.count < 1 {
            return Err(CliError::Config("lattice.levels.count must be at least 1".into()));
        }
        let count = sec.levels.count;
        let levels = if count == 1 {
            vec![sec.levels.min]
        } else {
            (0..count)
                .map(|i| {
                    sec.levels.min
                        + (max - sec.levels.min) * i as f64 / (count - 1) as f64
                })
                .collect()
        };
        Ok(LatticeInputs { grid, field: sec.field.to_field(), levels })
    }
}

/// Deep-merges `patch` over `base`: objects merge key by key, everything
/// else replaces.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (key, value) in p {
                match b.get_mut(key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// Applies one `--set key=value` flag: the key is a dotted path, the value
/// parses as a JSON literal and falls back to a plain string.
pub fn apply_set(root: &mut Value, flag: &str) -> Result<(), CliError> {
    let (path, raw) = flag
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set needs key=value, got '{flag}'")))?;
    if path.is_empty() {
        return Err(CliError::Config(format!("--set key is empty in '{flag}'")));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut slot = root;
    let mut segments = path.split('.').peekable();
    while let Some(segment) = segments.next() {
        let object = slot.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("--set path '{path}' descends into a non-object"))
        })?;
        let entry = object
            .entry(segment.to_string())
            .or_insert(Value::Object(serde_json::Map::new()));
        if segments.peek().is_none() {
            *entry = value;
            return Ok(());
        }
        slot = entry;
    }
    unreachable!("split always yields at least one segment");
}

/// Resolves the final config document: defaults, then the optional file,
/// then `--set` patches, then the subcommand's mode and output overrides.
pub fn resolve(
    file: Option<&str>,
    sets: &[String],
    mode: Mode,
    output: Option<&str>,
) -> Result<RunConfig, CliError> {
    let mut doc = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config '{path}': {e}")))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config '{path}' is not valid JSON: {e}")))?;
        if !patch.is_object() {
            return Err(CliError::Config(format!("config '{path}' must be a JSON object")));
        }
        merge(&mut doc, &patch);
    }
    for flag in sets {
        apply_set(&mut doc, flag)?;
    }
    let mut config: RunConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    config.mode = mode;
    if let Some(path) = output {
        config.output_path = path.to_string();
    }
    Ok(config)
}

/// The pinned published-chain preset backing `stabcert reproduce-paper`.
pub fn reproduce_paper_config(output: Option<&str>) -> Result<RunConfig, CliError> {
    let preset = include_str!("reproduce_paper.json");
    let patch: Value = serde_json::from_str(preset).expect("preset is valid JSON");
    let mut doc = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    merge(&mut doc, &patch);
    let mut config: RunConfig = serde_json::from_value(doc).expect("preset matches the schema");
    config.mode = Mode::ReproducePaper;
    if let Some(path) = output {
        config.output_path = path.to_string();
    }
    Ok(config)
}
