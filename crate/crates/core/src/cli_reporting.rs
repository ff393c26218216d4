//! Scenario configs, runs, oracle batteries and their on-disk reports.
//!
//! `report.json` is a pure function of the effective config. Wall-clock data
//! goes to `metadata.json`.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::equilibrium_lab::{verify_equilibrium, DeviationClass, EquilibriumReport, Tolerance};
use crate::models::gbm::{discount_horizon, follower_lattice, follower_lattice_drift};
use crate::models::jump::stopped_leader_mean;
use crate::models::*;
use crate::outcome_kernel::{mu_l, mu_m, repeated_stage_oracle, StageMode};
use crate::payoff_engine::{stieltjes_changevar_oracle, PathModel, Subgame};
use crate::sampling::stream_rng;
use crate::stopping_solver::{drift_classify, Drift, DriftResult};
use crate::strategy_model::{StoppingRule, StrategyFamily};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    GbmEntry(GbmEntryParams),
    GrabDollar(GrabDollarParams),
    Jump(JumpModelParams),
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::GbmEntry(_) => "gbm_entry",
            ModelConfig::GrabDollar(_) => "grab_dollar",
            ModelConfig::Jump(_) => "jump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub steps: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    /// The model's equilibrium family.
    #[default]
    Spe,
    /// Both players wait for the jump (jump model only).
    WaitUntilT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorLevel {
    Xp,
    Xf,
    /// Midpoint of `x^P` and `x^F`.
    Mid,
}

/// Initial state as a multiple of a model threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub level: AnchorLevel,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgameConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
    #[serde(default = "start_rule")]
    pub rule: StoppingRule,
}

fn start_rule() -> StoppingRule {
    StoppingRule::Start
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationConfig {
    /// Number of model-specific pure rules.
    pub k: usize,
}

impl Default for DeviationConfig {
    fn default() -> Self {
        Self { k: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub steps: usize,
    /// Number of root states spread over `(0, 2 x^F)`.
    pub states: usize,
    /// Largest accepted relative error against the closed form.
    pub rel_tol: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { steps: 2000, states: 20, rel_tol: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Points per axis of the stage-probability grid.
    pub stage_grid: usize,
    pub stage_trials: u64,
    pub changevar_cases: usize,
    pub drift_paths: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { stage_grid: 101, stage_trials: 1_000_000, changevar_cases: 1000, drift_paths: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub mc: McConfig,
    #[serde(default)]
    pub family: FamilyChoice,
    pub subgames: Vec<SubgameConfig>,
    #[serde(default)]
    pub deviations: DeviationConfig,
    #[serde(default)]
    pub tolerances: Tolerance,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
}

impl ScenarioConfig {
    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
        if let Some(p) = o.paths {
            self.mc.paths = p;
        }
        if let Some(s) = o.steps {
            self.grid.steps = s;
        }
    }

    /// Field-level checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let model_err = match &self.model {
            ModelConfig::GbmEntry(p) => p.validate().err(),
            ModelConfig::GrabDollar(p) => p.validate().err(),
            ModelConfig::Jump(p) => p.validate().err(),
        };
        if let Some(e) = model_err {
            let msg = match e {
                Error::Model(m) => m,
                other => other.to_string(),
            };
            return Err(Error::Model(format!("model.params: {msg}")));
        }
        if self.grid.steps == 0 {
            errs.push("grid.steps: must be positive".to_string());
        }
        if !(self.grid.horizon > 0.0) {
            errs.push("grid.horizon: must be positive".to_string());
        }
        if self.mc.paths == 0 {
            errs.push("mc.paths: must be positive".to_string());
        }
        if self.subgames.is_empty() {
            errs.push("subgames: at least one subgame is required".to_string());
        }
        let mut ids: Vec<&str> = self.subgames.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            errs.push("subgames: ids must be unique".to_string());
        }
        for (i, s) in self.subgames.iter().enumerate() {
            if s.x0.is_some() && s.anchor.is_some() {
                errs.push(format!("subgames[{i}]: give x0 or anchor, not both"));
            }
            if s.anchor.is_some() && !matches!(self.model, ModelConfig::GbmEntry(_)) {
                errs.push(format!("subgames[{i}].anchor: only gbm_entry has thresholds"));
            }
            if let Some(x) = s.x0 {
                if !(x > 0.0) && !matches!(self.model, ModelConfig::Jump(_)) {
                    errs.push(format!("subgames[{i}].x0: must be positive"));
                }
            }
        }
        if self.family == FamilyChoice::WaitUntilT && !matches!(self.model, ModelConfig::Jump(_)) {
            errs.push("family: wait_until_t applies to the jump model only".to_string());
        }
        if !(self.tolerances.abs_tol >= 0.0) || !(self.tolerances.n_se >= 0.0) {
            errs.push("tolerances: must be nonnegative".to_string());
        }
        if self.lattice.steps == 0 || self.lattice.states == 0 {
            errs.push("lattice: steps and states must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    /// sha256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

const PRESETS: [(&str, &str); 3] = [
    ("gbm_entry", include_str!("../presets/gbm_entry.json")),
    ("grab_dollar", include_str!("../presets/grab_dollar.json")),
    ("jump", include_str!("../presets/jump.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

/// Config text from a file path, or from a bundled preset name.
pub fn load_scenario_text(spec: &str) -> Result<String> {
    let path = Path::new(spec);
    if path.is_file() {
        return fs::read_to_string(path).map_err(|e| Error::Config(format!("{spec}: {e}")));
    }
    preset(spec).map(str::to_string).ok_or_else(|| {
        Error::Config(format!("no scenario file or preset '{spec}' (presets: {})", preset_names().join(", ")))
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgameReport {
    pub x0: f64,
    pub rule: StoppingRule,
    pub equilibrium: EquilibriumReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub x: f64,
    pub lattice: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub steps: usize,
    pub horizon: f64,
    pub states: Vec<LatticeState>,
    pub max_rel_error: f64,
    /// Largest one-step relative drift of the discounted follower value below
    /// `x^F`, and largest drift from `x^F` on.
    pub drift_below: f64,
    pub drift_above: f64,
    #[serde(skip)]
    pub snapshot: Vec<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub process: String,
    pub expected: Drift,
    pub results: Vec<DriftResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    GbmEntry { closed_forms: GbmClosedForms },
    GrabDollar {},
    Jump { values: JumpDiagnostics, drift: Vec<DriftCheck> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub model: String,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub diagnostics: Diagnostics,
    pub subgames: Vec<SubgameReport>,
    pub lattice: Option<LatticeReport>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub seed: u64,
    pub batteries: Vec<Battery>,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

fn subgame_of(cfg: &SubgameConfig, default_x0: f64, cf: Option<&GbmClosedForms>) -> Subgame {
    let x0 = match (cfg.x0, cfg.anchor, cf) {
        (Some(x), _, _) => x,
        (None, Some(a), Some(cf)) => {
            a.scale
                * match a.level {
                    AnchorLevel::Xp => cf.x_p,
                    AnchorLevel::Xf => cf.x_f,
                    AnchorLevel::Mid => 0.5 * (cf.x_p + cf.x_f),
                }
        }
        _ => default_x0,
    };
    Subgame { id: cfg.id.clone(), x0, rule: cfg.rule.clone() }
}

fn verify_all<M: PathModel>(
    cfg: &ScenarioConfig,
    model: &M,
    family: &dyn StrategyFamily<M::Path>,
    subgames: &[Subgame],
    deviations: &DeviationClass,
    comparator: impl Fn(&Subgame) -> Option<[f64; 2]>,
) -> Result<Vec<SubgameReport>> {
    subgames
        .iter()
        .map(|sg| {
            let rep = verify_equilibrium(
                model,
                family,
                sg,
                deviations,
                cfg.mc.paths,
                cfg.mc.seed,
                cfg.tolerances,
                comparator(sg),
            )?;
            Ok(SubgameReport { x0: sg.x0, rule: sg.rule.clone(), equilibrium: rep })
        })
        .collect()
}

fn subgame_checks(reports: &[SubgameReport], checks: &mut Vec<Check>) {
    for r in reports {
        let eq = &r.equilibrium;
        let failing: Vec<String> = eq
            .gaps
            .iter()
            .filter(|g| !g.pass)
            .map(|g| format!("player {} {} gap {:.3e} (se {:.1e})", g.player, g.deviation, g.gap, g.std_error))
            .collect();
        let detail = if failing.is_empty() {
            let worst = eq.gaps.iter().map(|g| g.gap).fold(f64::NEG_INFINITY, f64::max);
            format!("{} deviations, largest gap {worst:.3e}", eq.gaps.len())
        } else {
            failing.join("; ")
        };
        checks.push(Check::new(format!("{}: no profitable deviation", eq.subgame), eq.verdict, detail));
        if let Some(c) = &eq.comparator {
            checks.push(Check::new(
                format!("{}: closed-form payoff", eq.subgame),
                c.pass,
                format!(
                    "mean {:.6e} / {:.6e} vs {:.6e} / {:.6e}",
                    eq.payoffs[0].mean, eq.payoffs[1].mean, c.value[0], c.value[1]
                ),
            ));
        }
    }
}

fn gbm_lattice(cfg: &ScenarioConfig, cf: &GbmClosedForms) -> Result<LatticeReport> {
    let lc = cfg.lattice;
    let horizon = discount_horizon(cf.params.r);
    let mut states = Vec::with_capacity(lc.states);
    for i in 1..=lc.states {
        let x = 2.0 * cf.x_f * i as f64 / (lc.states + 1) as f64;
        let (_, sol) = follower_lattice(cf, x, lc.steps, horizon)?;
        let exact = cf.follower(x);
        let v = sol.value[0][0];
        states.push(LatticeState { x, lattice: v, closed_form: exact, rel_error: (v - exact).abs() / exact.abs() });
    }
    let (lat, sol) = follower_lattice(cf, cf.params.x0, lc.steps, horizon)?;
    let (drift_below, drift_above) = follower_lattice_drift(cf, &lat);
    let slice_step = (lc.steps / 10).max(1);
    let mut snapshot = Vec::new();
    for k in (0..lat.slices()).step_by(slice_step) {
        let state_step = (lat.states[k].len() / 50).max(1);
        for j in (0..lat.states[k].len()).step_by(state_step) {
            let stop = if sol.stop[k][j] { 1.0 } else { 0.0 };
            snapshot.push([k as f64, lat.times[k], lat.states[k][j], sol.value[k][j], stop]);
        }
    }
    let max_rel_error = states.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Ok(LatticeReport { steps: lc.steps, horizon, states, max_rel_error, drift_below, drift_above, snapshot })
}

fn jump_drift_checks(cfg: &ScenarioConfig, model: &JumpModel) -> Result<Vec<DriftCheck>> {
    let n = model.grid().len();
    let pairs: Vec<(usize, usize)> = [n / 200, n / 20, n / 4].iter().map(|&t| (0, t.max(1))).collect();
    let seed = cfg.mc.seed;
    let paths = cfg.mc.paths.max(100);
    let l2 = drift_classify(|rng| model.sample_l2(rng), &pairs, paths, seed, 4.0)?;
    let mut out = vec![DriftCheck { process: "L2".into(), expected: Drift::Submartingale, results: l2 }];
    for i in 0..2 {
        let res = drift_classify(|rng| model.sample_stopped_leader(i, rng), &pairs, paths, seed, 4.0)?;
        out.push(DriftCheck { process: format!("stopped_leader_{}", i + 1), expected: Drift::Supermartingale, results: res });
    }
    Ok(out)
}

/// Run every check a scenario defines.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut checks = Vec::new();
    let (diagnostics, subgames, lattice) = match &cfg.model {
        ModelConfig::GbmEntry(p) => {
            let (model, family) = build_gbm_entry(p, cfg.grid.steps, cfg.grid.horizon)?;
            let cf = family.cf;
            let sgs: Vec<Subgame> = cfg.subgames.iter().map(|s| subgame_of(s, p.x0, Some(&cf))).collect();
            let dev = DeviationClass::standard(model.deviation_rules(cfg.deviations.k));
            let reps = verify_all(cfg, &model, &family, &sgs, &dev, |sg| {
                (sg.rule == StoppingRule::Start).then(|| [cf.hitting_comparator(sg.x0); 2])
            })?;
            let lat = gbm_lattice(cfg, &cf)?;
            checks.push(Check::new(
                "lattice follower value",
                lat.max_rel_error < cfg.lattice.rel_tol,
                format!("max relative error {:.3e} over {} states", lat.max_rel_error, lat.states.len()),
            ));
            checks.push(Check::new(
                "follower drift on lattice",
                lat.drift_below < 1e-3 && lat.drift_above < 0.0,
                format!("below x^F {:.2e}, from x^F on {:.2e}", lat.drift_below, lat.drift_above),
            ));
            (Diagnostics::GbmEntry { closed_forms: cf }, reps, Some(lat))
        }
        ModelConfig::GrabDollar(p) => {
            let (model, family) = build_grab_dollar(p, cfg.grid.steps, cfg.grid.horizon)?;
            let sgs: Vec<Subgame> = cfg.subgames.iter().map(|s| subgame_of(s, p.x0, None)).collect();
            let dev = DeviationClass::standard(model.deviation_rules(cfg.deviations.k));
            let reps = verify_all(cfg, &model, &family, &sgs, &dev, |_| Some([0.0, 0.0]))?;
            (Diagnostics::GrabDollar {}, reps, None)
        }
        ModelConfig::Jump(p) => {
            let (model, values) = build_jump_model(p, cfg.grid.steps, cfg.grid.horizon)?;
            let family = match cfg.family {
                FamilyChoice::Spe => JumpFamily::spe(),
                FamilyChoice::WaitUntilT => JumpFamily::wait_until_t(),
            };
            let sgs: Vec<Subgame> = cfg.subgames.iter().map(|s| subgame_of(s, 0.0, None)).collect();
            let dev = DeviationClass::standard(model.deviation_rules(cfg.deviations.k));
            let reps = verify_all(cfg, &model, &family, &sgs, &dev, |_| None)?;
            checks.push(Check::new(
                "waiting profile bound",
                values.wait_rejected,
                format!("{} < {}", values.wait_sum_bound, values.lead_now_sum),
            ));
            checks.push(Check::new(
                "L2 submartingale condition",
                values.submartingale_margin >= 0.0,
                format!("margin {}", values.submartingale_margin),
            ));
            checks.push(Check::new(
                "mixing leaves mass at infinity",
                values.mixing_ruled_out,
                format!("{} < {}", values.mixing_lhs, values.mixing_rhs),
            ));
            let drift = jump_drift_checks(cfg, &model)?;
            for d in &drift {
                let ok = d.results.iter().all(|r| r.verdict == d.expected && r.strict);
                let verdicts: Vec<String> = d.results.iter().map(|r| format!("({},{}) {:?}", r.s, r.t, r.verdict)).collect();
                checks.push(Check::new(format!("{} drift", d.process), ok, verdicts.join(", ")));
            }
            // closed-form cross-check of the stopped leader process at one pair
            let t = model.grid().time(model.grid().len() / 4);
            for i in 0..2 {
                let (mean, se) = crate::sampling::mean_se(
                    &crate::sampling::par_units(cfg.mc.paths, cfg.mc.seed, |_, rng| {
                        model.sample_stopped_leader(i, rng)[model.grid().len() / 4]
                    }),
                );
                let exact = stopped_leader_mean(p, i, 0.0, t);
                let bias = p.c * p.lambda * model.grid().time(1);
                checks.push(Check::new(
                    format!("stopped_leader_{} mean", i + 1),
                    (mean - exact).abs() <= 4.0 * se + bias,
                    format!("{mean:.6} vs {exact:.6} at t={t}"),
                ));
            }
            (Diagnostics::Jump { values, drift }, reps, None)
        }
    };
    subgame_checks(&subgames, &mut checks);
    let pass = checks.iter().all(|c| c.pass);
    Ok(RunReport {
        scenario: cfg.name.clone(),
        model: cfg.model.name().to_string(),
        config_hash: cfg.content_hash(),
        config: cfg.clone(),
        diagnostics,
        subgames,
        lattice,
        checks,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// A random step-function fixture: payoffs, a nondecreasing `G` in `[0,1]`
/// and an integration window `[a, b)`.
pub fn random_changevar_case(seed: u64) -> (Vec<f64>, Vec<f64>, usize, usize) {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(1..=64usize);
    let l: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut g = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        if rng.random::<f64>() < 0.4 {
            acc += rng.random::<f64>() * (1.0 - acc);
        }
        g.push(acc);
    }
    if rng.random::<f64>() < 0.3 {
        *g.last_mut().expect("n >= 1") = 1.0;
    }
    let a = rng.random_range(0..n);
    let b = rng.random_range(a..=n);
    (l, g, a, b)
}

pub fn oracle_suite(cfg: &ScenarioConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let oc = cfg.oracle;
    let seed = cfg.mc.seed;
    let mut batteries = Vec::new();

    let m = oc.stage_grid.max(2);
    let (mut worst_series, mut worst_norm, mut cases) = (0f64, 0f64, 0usize);
    for i in 0..m {
        for j in 0..m {
            if i == 0 && j == 0 {
                continue;
            }
            let (x, y) = (i as f64 / (m - 1) as f64, j as f64 / (m - 1) as f64);
            let (li, lj, mm) = repeated_stage_oracle(x, y, StageMode::ClosedForm)?;
            worst_series = worst_series
                .max((mu_l(x, y) - li).abs())
                .max((mu_l(y, x) - lj).abs())
                .max((mu_m(x, y) - mm).abs());
            worst_norm = worst_norm.max((mu_l(x, y) + mu_l(y, x) + mu_m(x, y) - 1.0).abs());
            cases += 1;
        }
    }
    batteries.push(Battery {
        name: "stage measures vs series".into(),
        cases,
        max_error: worst_series,
        tolerance: 1e-12,
        pass: worst_series < 1e-12,
        detail: format!("{m}x{m} grid without the origin"),
    });
    batteries.push(Battery {
        name: "stage measures sum to one".into(),
        cases,
        max_error: worst_norm,
        tolerance: 1e-12,
        pass: worst_norm < 1e-12,
        detail: format!("{m}x{m} grid without the origin"),
    });

    let (ai, aj) = (0.3, 0.5);
    let trials = oc.stage_trials.max(1);
    let emp = repeated_stage_oracle(ai, aj, StageMode::Simulate { trials, seed })?;
    let exact = [mu_l(ai, aj), mu_l(aj, ai), mu_m(ai, aj)];
    let got = [emp.0, emp.1, emp.2];
    let z = (0..3)
        .map(|k| {
            let se = (exact[k] * (1.0 - exact[k]) / trials as f64).sqrt();
            (got[k] - exact[k]).abs() / se
        })
        .fold(0.0, f64::max);
    batteries.push(Battery {
        name: "simulated stage game".into(),
        cases: trials as usize,
        max_error: z,
        tolerance: 4.0,
        pass: z <= 4.0,
        detail: format!("({ai},{aj}): {:.6} {:.6} {:.6} in standard errors", got[0], got[1], got[2]),
    });

    let mut worst = 0f64;
    for s in 0..oc.changevar_cases {
        let (l, g, a, b) = random_changevar_case(seed.wrapping_add(s as u64));
        let (d, inv) = stieltjes_changevar_oracle(&l, &g, a, b)?;
        worst = worst.max((d - inv).abs());
    }
    batteries.push(Battery {
        name: "change of variable".into(),
        cases: oc.changevar_cases,
        max_error: worst,
        tolerance: 1e-9,
        pass: worst < 1e-9,
        detail: "random step functions".into(),
    });

    let walk = |drift: f64| {
        move |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut x = 0.0;
            let mut out = vec![0.0];
            for _ in 0..20 {
                x += drift + if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(x);
            }
            out
        }
    };
    let pairs = [(0, 5), (5, 10), (10, 20)];
    let paths = oc.drift_paths.max(100);
    for (name, d, want) in [
        ("drift battery: up", 0.2, Drift::Submartingale),
        ("drift battery: down", -0.2, Drift::Supermartingale),
        ("drift battery: flat", 0.0, Drift::Martingale),
    ] {
        let res = drift_classify(walk(d), &pairs, paths, seed, 4.0)?;
        let ok = res.iter().all(|r| r.verdict == want);
        let verdicts: Vec<String> = res.iter().map(|r| format!("{:?}", r.verdict)).collect();
        batteries.push(Battery {
            name: name.into(),
            cases: pairs.len(),
            max_error: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
            detail: verdicts.join(", "),
        });
    }

    let pass = batteries.iter().all(|b| b.pass);
    Ok(OracleReport { config_hash: cfg.content_hash(), seed, batteries, pass })
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Runtime(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io_err)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    config_hash: &'a str,
    version: &'a str,
    unix_time: u64,
}

fn write_metadata(dir: &Path, command: &str, hash: &str) -> Result<()> {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &dir.join("metadata.json"),
        &Metadata { command, config_hash: hash, version: env!("CARGO_PKG_VERSION"), unix_time },
    )
}

/// Write `report.json`, the CSV tables and `metadata.json`.
pub fn write_run(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    write_json(&dir.join("report.json"), report)?;
    write_csv(
        &dir.join("payoffs.csv"),
        &["subgame", "player", "mean", "std_error", "comparator"],
        report.subgames.iter().flat_map(|s| {
            let eq = &s.equilibrium;
            (0..2).map(move |i| {
                vec![
                    eq.subgame.clone(),
                    (i + 1).to_string(),
                    num(eq.payoffs[i].mean),
                    num(eq.payoffs[i].std_error),
                    eq.comparator.as_ref().map(|c| num(c.value[i])).unwrap_or_default(),
                ]
            })
        }),
    )?;
    write_csv(
        &dir.join("outcomes.csv"),
        &["subgame", "path", "tau_hat", "case", "lambda_l_1", "lambda_l_2", "lambda_m", "reach", "residual"],
        report.subgames.iter().flat_map(|s| {
            s.equilibrium.outcomes.iter().enumerate().map(move |(p, o)| {
                vec![
                    s.equilibrium.subgame.clone(),
                    p.to_string(),
                    o.tau_hat.to_string(),
                    format!("{:?}", o.case).to_lowercase(),
                    num(o.lambda_l_i),
                    num(o.lambda_l_j),
                    num(o.lambda_m),
                    num(o.reach),
                    num(o.residual),
                ]
            })
        }),
    )?;
    write_csv(
        &dir.join("gaps.csv"),
        &["subgame", "player", "deviation", "gap", "std_error", "pass"],
        report.subgames.iter().flat_map(|s| {
            s.equilibrium.gaps.iter().map(move |g| {
                vec![
                    s.equilibrium.subgame.clone(),
                    g.player.to_string(),
                    g.deviation.clone(),
                    num(g.gap),
                    num(g.std_error),
                    g.pass.to_string(),
                ]
            })
        }),
    )?;
    if let Some(lat) = &report.lattice {
        write_csv(
            &dir.join("lattice.csv"),
            &["slice", "time", "state", "value", "stop"],
            lat.snapshot.iter().map(|r| {
                vec![(r[0] as usize).to_string(), num(r[1]), num(r[2]), num(r[3]), (r[4] as u8).to_string()]
            }),
        )?;
    }
    write_metadata(dir, "run", &report.config_hash)
}

pub fn write_oracle(report: &OracleReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err)?;
    write_json(&dir.join("report.json"), report)?;
    write_csv(
        &dir.join("oracles.csv"),
        &["battery", "cases", "max_error", "tolerance", "pass"],
        report.batteries.iter().map(|b| {
            vec![b.name.clone(), b.cases.to_string(), num(b.max_error), num(b.tolerance), b.pass.to_string()]
        }),
    )?;
    write_metadata(dir, "oracle", &report.config_hash)
}

/// One line per check for the terminal.
pub fn summary(report: &RunReport) -> String {
    let mut out = format!("{} ({}) config {}\n", report.scenario, report.model, &report.config_hash[..12]);
    for c in &report.checks {
        out.push_str(&format!("[{}] {}: {}\n", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail));
    }
    out.push_str(if report.pass { "overall: pass\n" } else { "overall: FAIL\n" });
    out
}

pub fn oracle_summary(report: &OracleReport) -> String {
    let mut out = String::new();
    for b in &report.batteries {
        out.push_str(&format!(
            "[{}] {}: {} cases, max error {:.3e} (tol {:.0e}) {}\n",
            if b.pass { "pass" } else { "FAIL" },
            b.name,
            b.cases,
            b.max_error,
            b.tolerance,
            b.detail
        ));
    }
    out.push_str(if report.pass { "overall: pass\n" } else { "overall: FAIL\n" });
    out
}
