//! Randomized measurement campaigns over kernels and weights.
//!
//! Every campaign is deterministic: trial `t` draws from a ChaCha8 stream
//! keyed by `(seed, t)`, so reports are byte-identical across runs and single
//! trials can be regenerated in isolation (used by the counterexample dumps).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    check_bilinear_embedding, check_lemma_be, check_littleoo, check_t1_implication,
    check_testing_implication, operator_constants, two_weight_battery, two_weight_battery_ainfty,
    buckley_sides_all, ConditionReport,
};
use crate::error::{Error, Result};
use crate::kernel::KernelCoeffs;
use crate::spectral::weighted_norm;
use crate::tree::CellVector;
use crate::weights::{generate_weight, CarlesonSequence, Weight, WeightKind, WeightPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DecomposeCheck,
    Constants,
    A2Linearity,
    TwoWeight,
    TwoWeightAinfty,
    Embedding,
    Lemmas,
    CounterexampleSearch,
}

/// Kernel source: `uniform`, `decay:C`, or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelGen {
    Uniform,
    Decay(f64),
    File(PathBuf),
}

impl FromStr for KernelGen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(KernelGen::Uniform);
        }
        if let Some(rest) = s.strip_prefix("decay:") {
            let c: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad decay magnitude {rest:?}")))?;
            return Ok(KernelGen::Decay(c));
        }
        if s == "decay" {
            return Ok(KernelGen::Decay(1.0));
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(KernelGen::File(PathBuf::from(rest)));
        }
        Err(Error::Config(format!(
            "unknown kernel generator {s:?} (expected uniform, decay[:C], or file:PATH)"
        )))
    }
}

impl fmt::Display for KernelGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelGen::Uniform => write!(f, "uniform"),
            KernelGen::Decay(c) => write!(f, "decay:{c}"),
            KernelGen::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Weight source: `constant`, `cascade:DELTA`, `power:ALPHA`, or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightGen {
    Constant,
    Cascade(f64),
    Power(f64),
    File(PathBuf),
}

impl FromStr for WeightGen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "constant" {
            return Ok(WeightGen::Constant);
        }
        if let Some(rest) = s.strip_prefix("cascade:") {
            let d: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad cascade delta {rest:?}")))?;
            return Ok(WeightGen::Cascade(d));
        }
        if let Some(rest) = s.strip_prefix("power:") {
            let a: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad power exponent {rest:?}")))?;
            return Ok(WeightGen::Power(a));
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(WeightGen::File(PathBuf::from(rest)));
        }
        Err(Error::Config(format!(
            "unknown weight generator {s:?} (expected constant, cascade:DELTA, power:ALPHA, or file:PATH)"
        )))
    }
}

impl fmt::Display for WeightGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightGen::Constant => write!(f, "constant"),
            WeightGen::Cascade(d) => write!(f, "cascade:{d}"),
            WeightGen::Power(a) => write!(f, "power:{a}"),
            WeightGen::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(
                &self,
                s: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(
                d: D,
            ) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(KernelGen);
string_serde!(WeightGen);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub depth: u32,
    pub trials: usize,
    pub seed: u64,
    pub kernel_gen: KernelGen,
    pub weight_gen: WeightGen,
    pub tol: f64,
    pub allow_unnormalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, depth: u32) -> Self {
        ExperimentConfig {
            experiment,
            depth,
            trials: 100,
            seed: 0,
            kernel_gen: KernelGen::Uniform,
            weight_gen: WeightGen::Cascade(0.5),
            tol: 1e-10,
            allow_unnormalized: false,
            dump_dir: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }

    fn kernel(&self, rng: &mut ChaCha8Rng) -> Result<KernelCoeffs> {
        match &self.kernel_gen {
            KernelGen::Uniform => KernelCoeffs::random_uniform(self.depth, rng),
            KernelGen::Decay(c) => KernelCoeffs::random_decay(self.depth, *c, rng),
            KernelGen::File(p) => {
                let k = KernelCoeffs::from_file(p, self.allow_unnormalized)?;
                if k.depth() != self.depth {
                    return Err(Error::DepthMismatch {
                        left: k.depth(),
                        right: self.depth,
                    });
                }
                Ok(k)
            }
        }
    }

    fn weight(&self, rng: &mut ChaCha8Rng) -> Result<Weight> {
        match &self.weight_gen {
            WeightGen::Constant => generate_weight(self.depth, WeightKind::Constant { value: 1.0 }, rng),
            WeightGen::Cascade(d) => generate_weight(self.depth, WeightKind::Cascade { delta: *d }, rng),
            WeightGen::Power(a) => generate_weight(self.depth, WeightKind::Power { alpha: *a }, rng),
            WeightGen::File(p) => {
                let w = Weight::from_file(p)?;
                if w.depth() != self.depth {
                    return Err(Error::DepthMismatch {
                        left: w.depth(),
                        right: self.depth,
                    });
                }
                Ok(w)
            }
        }
    }

    fn weight_pair(&self, rng: &mut ChaCha8Rng) -> Result<WeightPair> {
        let v_inv = self.weight(rng)?;
        let u = self.weight(rng)?;
        WeightPair::new(v_inv, u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<ConditionReport>,
}

impl TrialRecord {
    fn new(trial: usize) -> Self {
        TrialRecord {
            trial,
            metrics: BTreeMap::new(),
            reports: Vec::new(),
        }
    }

    fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub aggregates: BTreeMap<String, f64>,
    pub pass: bool,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Flat CSV: one row per trial, columns are the sorted union of metric
    /// names plus one `report:NAME` column per condition constant.
    pub fn to_csv(&self) -> String {
        let mut columns: Vec<String> = Vec::new();
        for t in &self.trials {
            for k in t.metrics.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
            for r in &t.reports {
                let c = format!("report:{}", r.name);
                if !columns.contains(&c) {
                    columns.push(c);
                }
            }
        }
        columns.sort();
        let mut out = String::from("trial");
        for c in &columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for t in &self.trials {
            out.push_str(&t.trial.to_string());
            for c in &columns {
                out.push(',');
                let v = if let Some(name) = c.strip_prefix("report:") {
                    t.reports.iter().find(|r| r.name == name).map(|r| r.constant)
                } else {
                    t.metrics.get(c).copied()
                };
                if let Some(v) = v {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, csv: bool) -> Result<()> {
        let body = if csv { self.to_csv() } else { self.to_json() };
        Ok(std::fs::write(path, body)?)
    }

    fn aggregate_minmax(&mut self, key: &str) {
        let values: Vec<f64> = self
            .trials
            .iter()
            .filter_map(|t| t.metrics.get(key))
            .copied()
            .collect();
        if values.is_empty() {
            return;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.aggregates.insert(format!("{key}.min"), min);
        self.aggregates.insert(format!("{key}.max"), max);
        self.aggregates.insert(format!("{key}.mean"), mean);
    }
}

pub fn run(config: &ExperimentConfig) -> Result<CampaignReport> {
    config.validate()?;
    match config.experiment {
        Experiment::DecomposeCheck => run_decompose_check(config),
        Experiment::Constants => run_constants(config),
        Experiment::A2Linearity => run_a2_linearity(config),
        Experiment::TwoWeight => run_two_weight(config),
        Experiment::TwoWeightAinfty => run_two_weight_ainfty(config),
        Experiment::Embedding => run_embedding(config),
        Experiment::Lemmas => run_lemma_suite(config),
        Experiment::CounterexampleSearch => run_counterexample_search(config),
    }
}

fn random_cells(depth: u32, rng: &mut ChaCha8Rng) -> CellVector {
    CellVector::new(
        depth,
        (0..(1usize << depth)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("generated cell vector is well-formed")
}

fn base_report(config: &ExperimentConfig) -> CampaignReport {
    CampaignReport {
        config: config.clone(),
        trials: Vec::new(),
        aggregates: BTreeMap::new(),
        pass: true,
    }
}

/// Residual of the four-operator identity `4 T = T1 - T2 + T3 - T4` on random
/// inputs, plus the adjoint pairing defect `<Tf, g> - <f, T*g>`.
pub fn run_decompose_check(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let f = random_cells(config.depth, &mut rng);
        let g = random_cells(config.depth, &mut rng);
        let residual = kernel.decomposition_residual(&f)?;
        let pairing = (kernel.apply(&f)?.inner_product(&g)?
            - f.inner_product(&kernel.apply_adjoint(&g)?)?)
        .abs();
        let mut t = TrialRecord::new(trial);
        t.metric("residual", residual).metric("adjoint_defect", pairing);
        if residual > config.tol || pairing > config.tol {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("residual");
    report.aggregate_minmax("adjoint_defect");
    Ok(report)
}

/// Operator constants plus both explicit-constant implications per kernel.
pub fn run_constants(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let c = operator_constants(&kernel);
        let mut t = TrialRecord::new(trial);
        t.metric("size_sum", c.size_sum)
            .metric("bmo_t1", c.bmo_t1)
            .metric("bmo_t1star", c.bmo_t1star)
            .metric("testing", c.testing)
            .metric("q", c.q);
        t.reports.push(check_t1_implication(&kernel));
        t.reports.extend(check_testing_implication(&kernel));
        if t.reports.iter().any(|r| !r.pass) {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("q");
    report.aggregate_minmax("testing");
    Ok(report)
}

const A2_ALPHA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// One-weight norm against `Q [w]_{A_2^d}` over the power-weight family.
/// One record per (trial, alpha); the aggregate `loglog_slope` is the
/// least-squares exponent of `norm/Q` against `[w]_{A_2^d}`.
pub fn run_a2_linearity(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let q = operator_constants(&kernel).q;
        for (i, &alpha) in A2_ALPHA_GRID.iter().enumerate() {
            let w = generate_weight(config.depth, WeightKind::Power { alpha }, &mut rng)?;
            let a2 = w.a2_constant();
            let norm = weighted_norm(&kernel, &w.inverse(), &w)?;
            let ratio = if q > 0.0 { norm / (q * a2) } else { 0.0 };
            let mut t = TrialRecord::new(trial * A2_ALPHA_GRID.len() + i);
            t.metric("alpha", alpha)
                .metric("a2", a2)
                .metric("q", q)
                .metric("norm", norm)
                .metric("ratio", ratio);
            if !ratio.is_finite() {
                report.pass = false;
            }
            report.trials.push(t);
            if q > 0.0 && norm > 0.0 {
                xs.push(a2.ln());
                ys.push((norm / q).ln());
            }
        }
    }
    report.aggregate_minmax("ratio");
    if xs.len() >= 2 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            report.aggregates.insert("loglog_slope".into(), slope);
            report
                .aggregates
                .insert("superlinear".into(), if slope > 1.1 { 1.0 } else { 0.0 });
        }
    }
    Ok(report)
}

/// Full nine-condition battery plus the measured weighted norm per trial.
pub fn run_two_weight(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let pair = config.weight_pair(&mut rng)?;
        let battery = two_weight_battery(&pair, &kernel)?;
        let norm = weighted_norm(&kernel, pair.v_inv(), pair.u())?;
        let mut t = TrialRecord::new(trial);
        t.metric("h", battery.h).metric("norm", norm).metric(
            "norm_over_h",
            if battery.h > 0.0 { norm / battery.h } else { 0.0 },
        );
        t.reports = battery.reports;
        if t.reports.iter().any(|r| !r.pass) {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("h");
    report.aggregate_minmax("norm_over_h");
    Ok(report)
}

/// Reduced battery for `A_infty^d` weights plus its reduction checks; the
/// dropped testing conditions must obey the explicit factor-4 bound.
pub fn run_two_weight_ainfty(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let pair = config.weight_pair(&mut rng)?;
        let r = two_weight_battery_ainfty(&pair, &kernel)?;
        let mut t = TrialRecord::new(trial);
        t.metric("h", r.battery.h);
        t.reports = r.battery.reports;
        t.reports.extend(r.reduction);
        if t.reports.iter().any(|rep| !rep.pass) {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("h");
    Ok(report)
}

/// Bilinear embedding hypotheses and measured conclusion constant.
pub fn run_embedding(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let a = CarlesonSequence::random(config.depth, &mut rng)?;
        let w = config.weight(&mut rng)?;
        let v = config.weight(&mut rng)?;
        let e = check_bilinear_embedding(&a, &w, &v)?;
        let mut t = TrialRecord::new(trial);
        t.metric("q27", e.q27)
            .metric("q28", e.q28)
            .metric("q29", e.q29)
            .metric("bilinear_norm", e.bilinear_norm)
            .metric("empirical_c", e.empirical_c);
        if !e.empirical_c.is_finite() {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("empirical_c");
    Ok(report)
}

/// Both factor-4 Carleson lemmas per trial, plus the per-interval square
/// function statistics (min/median/max of lhs/rhs where rhs is nonzero).
pub fn run_lemma_suite(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let w = config.weight(&mut rng)?;
        let lambda = CarlesonSequence::random(config.depth, &mut rng)?;
        let mut t = TrialRecord::new(trial);
        t.reports.push(check_lemma_be(&w, &lambda)?);
        t.reports.extend(check_littleoo(&w, &lambda)?);

        let mut ratios: Vec<f64> = buckley_sides_all(&w)
            .iter()
            .flatten()
            .filter(|(_, rhs)| *rhs > config.tol)
            .map(|(lhs, rhs)| lhs / rhs)
            .collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if !ratios.is_empty() {
            t.metric("buckley_ratio_min", ratios[0])
                .metric("buckley_ratio_median", ratios[ratios.len() / 2])
                .metric("buckley_ratio_max", *ratios.last().unwrap());
            if ratios[0] < -config.tol {
                report.pass = false;
            }
        }
        if t.reports.iter().any(|r| !r.pass) {
            report.pass = false;
        }
        report.trials.push(t);
    }
    report.aggregate_minmax("buckley_ratio_min");
    report.aggregate_minmax("buckley_ratio_median");
    report.aggregate_minmax("buckley_ratio_max");
    Ok(report)
}

const TOP_RATIOS: usize = 10;

/// Search for weight/kernel pairs maximizing `norm / H`. The top instances
/// are regenerated from their trial stream, dumped to `dump_dir` when set,
/// reloaded, and verified to reproduce the original data.
pub fn run_counterexample_search(config: &ExperimentConfig) -> Result<CampaignReport> {
    let mut report = base_report(config);
    let mut ranked: Vec<(f64, usize)> = Vec::new();
    for trial in 0..config.trials {
        let mut rng = config.trial_rng(trial);
        let kernel = config.kernel(&mut rng)?;
        let pair = config.weight_pair(&mut rng)?;
        let r = two_weight_battery_ainfty(&pair, &kernel)?;
        let h = r.battery.h;
        let norm = weighted_norm(&kernel, pair.v_inv(), pair.u())?;
        let ratio = if h > 0.0 { norm / h } else { 0.0 };
        let mut t = TrialRecord::new(trial);
        t.metric("h", h).metric("norm", norm).metric("ratio", ratio);
        if r.reduction.iter().any(|rep| !rep.pass) {
            report.pass = false;
        }
        report.trials.push(t);
        ranked.push((ratio, trial));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    ranked.truncate(TOP_RATIOS);
    for (rank, (ratio, trial)) in ranked.iter().enumerate() {
        report
            .aggregates
            .insert(format!("top{rank:02}.ratio"), *ratio);
        report
            .aggregates
            .insert(format!("top{rank:02}.trial"), *trial as f64);
    }
    report.aggregate_minmax("ratio");

    if let Some(dir) = &config.dump_dir {
        std::fs::create_dir_all(dir)?;
        let mut max_err = 0.0f64;
        for (_, trial) in &ranked {
            let mut rng = config.trial_rng(*trial);
            let kernel = config.kernel(&mut rng)?;
            let pair = config.weight_pair(&mut rng)?;
            let kp = dir.join(format!("trial{trial:05}_kernel.json"));
            let vp = dir.join(format!("trial{trial:05}_vinv.json"));
            let up = dir.join(format!("trial{trial:05}_u.json"));
            kernel.to_file(&kp)?;
            pair.v_inv().to_file(&vp)?;
            pair.u().to_file(&up)?;
            let k2 = KernelCoeffs::from_file(&kp, config.allow_unnormalized)?;
            let v2 = Weight::from_file(&vp)?;
            let u2 = Weight::from_file(&up)?;
            max_err = max_err
                .max(kernel.max_abs_diff(&k2))
                .max(cell_max_diff(pair.v_inv().cells(), v2.cells()))
                .max(cell_max_diff(pair.u().cells(), u2.cells()));
        }
        report.aggregates.insert("dump_reload_max_err".into(), max_err);
        if max_err > 1e-12 {
            report.pass = false;
        }
    }
    Ok(report)
}

fn cell_max_diff(a: &CellVector, b: &CellVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use tempfile::tempdir;

    fn cfg(experiment: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(experiment, 4);
        c.trials = 5;
        c.seed = 42;
        c
    }

    #[test]
    fn generator_strings_round_trip() {
        for s in ["uniform", "decay:0.5", "file:/tmp/k.json"] {
            let g: KernelGen = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        for s in ["constant", "cascade:0.3", "power:0.5", "file:/tmp/w.json"] {
            let g: WeightGen = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("gaussian".parse::<KernelGen>().is_err());
        assert!("cascade:x".parse::<WeightGen>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Experiment::DecomposeCheck);
        c.depth = 0;
        assert!(run(&c).is_err());
        let mut c = cfg(Experiment::DecomposeCheck);
        c.trials = 0;
        assert!(run(&c).is_err());
        let mut c = cfg(Experiment::DecomposeCheck);
        c.tol = -1.0;
        assert!(run(&c).is_err());
    }

    #[test]
    fn decompose_check_passes_and_is_deterministic() {
        let c = cfg(Experiment::DecomposeCheck);
        let r1 = run(&c).unwrap();
        let r2 = run(&c).unwrap();
        assert!(r1.pass);
        assert_eq!(r1.to_json(), r2.to_json());
        assert_eq!(r1.trials.len(), 5);
        assert!(r1.aggregates["residual.max"] <= c.tol);
    }

    #[test]
    fn seed_changes_results() {
        let c1 = cfg(Experiment::Constants);
        let mut c2 = c1.clone();
        c2.seed = 43;
        let r1 = run(&c1).unwrap();
        let r2 = run(&c2).unwrap();
        assert!(r1.pass && r2.pass);
        assert_ne!(r1.trials[0].metrics["q"], r2.trials[0].metrics["q"]);
    }

    #[test]
    fn constants_reports_implications() {
        let r = run(&cfg(Experiment::Constants)).unwrap();
        assert!(r.pass);
        for t in &r.trials {
            assert_eq!(t.reports.len(), 3);
            assert!(t.reports.iter().all(|rep| rep.pass));
        }
    }

    #[test]
    fn a2_linearity_grid_shape() {
        let mut c = cfg(Experiment::A2Linearity);
        c.trials = 2;
        let r = run(&c).unwrap();
        assert!(r.pass);
        assert_eq!(r.trials.len(), 2 * A2_ALPHA_GRID.len());
        assert!(r.aggregates.contains_key("loglog_slope"));
        for t in &r.trials {
            assert!(t.metrics["ratio"].is_finite());
            assert!(t.metrics["a2"] >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn two_weight_batteries_run() {
        let r = run(&cfg(Experiment::TwoWeight)).unwrap();
        assert!(r.pass);
        assert_eq!(r.trials[0].reports.len(), 9);
        let r = run(&cfg(Experiment::TwoWeightAinfty)).unwrap();
        assert!(r.pass, "{}", r.to_json());
    }

    #[test]
    fn embedding_and_lemmas_run() {
        let r = run(&cfg(Experiment::Embedding)).unwrap();
        assert!(r.pass);
        let r = run(&cfg(Experiment::Lemmas)).unwrap();
        assert!(r.pass);
        for t in &r.trials {
            assert!(t.metrics["buckley_ratio_min"] >= -1e-10);
        }
    }

    #[test]
    fn counterexample_search_dumps_and_reloads() {
        let dir = tempdir().unwrap();
        let mut c = cfg(Experiment::CounterexampleSearch);
        c.trials = 8;
        c.dump_dir = Some(dir.path().to_path_buf());
        let r = run(&c).unwrap();
        assert!(r.pass, "{}", r.to_json());
        assert_abs_diff_eq!(r.aggregates["dump_reload_max_err"], 0.0, epsilon = 1e-12);
        // 8 trials -> 8 dumped instances, 3 files each
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 24);
        // top ratios are sorted descending
        let top: Vec<f64> = (0..8)
            .map(|i| r.aggregates[&format!("top{i:02}.ratio")])
            .collect();
        assert!(top.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_has_stable_header_and_rows() {
        let r = run(&cfg(Experiment::DecomposeCheck)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "trial,adjoint_defect,residual");
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn kernel_file_generator_used_for_all_trials() {
        let dir = tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = KernelCoeffs::random_uniform(4, &mut rng).unwrap();
        let path = dir.path().join("k.json");
        k.to_file(&path).unwrap();
        let mut c = cfg(Experiment::Constants);
        c.kernel_gen = KernelGen::File(path);
        let r = run(&c).unwrap();
        let q0 = r.trials[0].metrics["q"];
        assert!(r.trials.iter().all(|t| t.metrics["q"] == q0));
    }

    #[test]
    fn report_json_round_trip() {
        let r = run(&cfg(Experiment::TwoWeight)).unwrap();
        let back: CampaignReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
