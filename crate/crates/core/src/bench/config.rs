//! Plain-text experiment configuration: one `key = value` pair per line,
//! `#` starts a comment, keys are namespaced (`blb.gamma`, `mc.rank`, ...).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::resampling::Weighting;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    BlbCurve,
    DfcAccuracy,
    DfcRuntime,
    TradeoffSparsePca,
    TradeoffCutMatrix,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::BlbCurve,
        Experiment::DfcAccuracy,
        Experiment::DfcRuntime,
        Experiment::TradeoffSparsePca,
        Experiment::TradeoffCutMatrix,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BlbCurve => "blb-curve",
            Experiment::DfcAccuracy => "dfc-accuracy",
            Experiment::DfcRuntime => "dfc-runtime",
            Experiment::TradeoffSparsePca => "tradeoff-sparse-pca",
            Experiment::TradeoffCutMatrix => "tradeoff-cut-matrix",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlbSettings {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub s: usize,
    pub r: usize,
    pub bootstrap_b: usize,
    pub truth_replicates: usize,
    pub alpha: f64,
    /// Every true regression coefficient takes this value.
    pub coefficient: f64,
    pub weighting: Weighting,
}

impl Default for BlbSettings {
    fn default() -> Self {
        BlbSettings {
            n: 20_000,
            d: 10,
            gamma: 0.7,
            s: 10,
            r: 50,
            bootstrap_b: 100,
            truth_replicates: 2000,
            alpha: 0.05,
            coefficient: 0.3,
            weighting: Weighting::Poisson,
        }
    }
}

/// How the completion problems in the DFC experiments are posed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McSolver {
    /// Fixed `lambda = lambda_scale * noise * sqrt(fraction) * (sqrt(m) + sqrt(n))`.
    Penalized,
    /// Residual budget `delta = noise * sqrt(|omega|)`.
    Constrained,
}

impl McSolver {
    pub fn name(&self) -> &'static str {
        match self {
            McSolver::Penalized => "penalized",
            McSolver::Constrained => "constrained",
        }
    }
}

impl FromStr for McSolver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "penalized" => Ok(McSolver::Penalized),
            "constrained" => Ok(McSolver::Constrained),
            _ => Err(format!("unknown solver `{s}` (expected penalized or constrained)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSettings {
    /// Square dimension for the accuracy experiment.
    pub dim: usize,
    pub rank: usize,
    /// Standard deviation of additive noise on the observed entries.
    pub noise: f64,
    /// Revealed percentages for the accuracy experiment.
    pub revealed: Vec<f64>,
    /// Square dimensions for the runtime experiment.
    pub dims: Vec<usize>,
    /// Revealed percentage for the runtime experiment.
    pub runtime_revealed: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub solver: McSolver,
    pub lambda_scale: f64,
    /// Cap the rank of every iterate at `rank`.
    pub cap_at_rank: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            dim: 400,
            rank: 5,
            noise: 0.1,
            revealed: vec![5.0, 10.0, 15.0, 25.0, 50.0],
            dims: vec![200, 400, 800],
            runtime_revealed: 25.0,
            max_iters: 500,
            tol: 1e-7,
            solver: McSolver::Penalized,
            lambda_scale: 0.1,
            cap_at_rank: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DfcSettings {
    pub t: usize,
}

impl Default for DfcSettings {
    fn default() -> Self {
        DfcSettings { t: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSettings {
    /// Signal dimensions; each must be a perfect square.
    pub p: Vec<usize>,
    /// Sparse-PCA block size.
    pub k: usize,
    pub sigma: f64,
    pub trials: usize,
    /// Dimension at which an infeasible-scale footnote row is attempted.
    pub footnote_p: usize,
    pub sampled_cones: bool,
    pub n_gen: usize,
}

impl Default for ConvexSettings {
    fn default() -> Self {
        ConvexSettings {
            p: vec![16],
            k: 2,
            sigma: 1.0,
            trials: 10_000,
            footnote_p: 400,
            sampled_cones: false,
            n_gen: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub threads: usize,
    pub blb: BlbSettings,
    pub mc: McSettings,
    pub dfc: DfcSettings,
    pub convex: ConvexSettings,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            seed,
            threads: 4,
            blb: BlbSettings::default(),
            mc: McSettings::default(),
            dfc: DfcSettings::default(),
            convex: ConvexSettings::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig {
            experiment: None,
            ..ExperimentConfig::new(Experiment::BlbCurve, 0)
        };
        let mut seen_seed = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "seed" {
                seen_seed = true;
            }
            cfg.set(key, value)?;
        }
        if !seen_seed {
            return Err(ConfigError::Missing("seed".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key. Values are parsed but not range-checked; see [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| invalid(key, format!("`{value}`: {e}")))
        }
        fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.split(',').map(|v| num(key, v.trim())).collect()
        }
        match key {
            "experiment" => self.experiment = Some(value.parse().map_err(|e: String| invalid(key, e))?),
            "seed" => self.seed = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "blb.n" => self.blb.n = num(key, value)?,
            "blb.d" => self.blb.d = num(key, value)?,
            "blb.gamma" => self.blb.gamma = num(key, value)?,
            "blb.s" => self.blb.s = num(key, value)?,
            "blb.r" => self.blb.r = num(key, value)?,
            "blb.bootstrap_b" => self.blb.bootstrap_b = num(key, value)?,
            "blb.truth_replicates" => self.blb.truth_replicates = num(key, value)?,
            "blb.alpha" => self.blb.alpha = num(key, value)?,
            "blb.coefficient" => self.blb.coefficient = num(key, value)?,
            "blb.weighting" => self.blb.weighting = value.parse().map_err(|e: crate::Error| invalid(key, e.to_string()))?,
            "mc.dim" => self.mc.dim = num(key, value)?,
            "mc.rank" => self.mc.rank = num(key, value)?,
            "mc.noise" => self.mc.noise = num(key, value)?,
            "mc.revealed" => self.mc.revealed = list(key, value)?,
            "mc.dims" => self.mc.dims = list(key, value)?,
            "mc.runtime_revealed" => self.mc.runtime_revealed = num(key, value)?,
            "mc.max_iters" => self.mc.max_iters = num(key, value)?,
            "mc.tol" => self.mc.tol = num(key, value)?,
            "mc.solver" => self.mc.solver = value.parse().map_err(|e: String| invalid(key, e))?,
            "mc.lambda_scale" => self.mc.lambda_scale = num(key, value)?,
            "mc.cap_at_rank" => self.mc.cap_at_rank = num(key, value)?,
            "dfc.t" => self.dfc.t = num(key, value)?,
            "convex.p" => self.convex.p = list(key, value)?,
            "convex.k" => self.convex.k = num(key, value)?,
            "convex.sigma" => self.convex.sigma = num(key, value)?,
            "convex.trials" => self.convex.trials = num(key, value)?,
            "convex.footnote_p" => self.convex.footnote_p = num(key, value)?,
            "convex.sampled_cones" => self.convex.sampled_cones = num(key, value)?,
            "convex.n_gen" => self.convex.n_gen = num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        }
        positive("threads", self.threads as f64)?;
        let b = &self.blb;
        positive("blb.n", b.n as f64)?;
        positive("blb.d", b.d as f64)?;
        if !(b.gamma > 0.0 && b.gamma <= 1.0) {
            return Err(invalid("blb.gamma", "must be in (0, 1]"));
        }
        positive("blb.s", b.s as f64)?;
        if b.r < 2 {
            return Err(invalid("blb.r", "needs at least 2 resamples"));
        }
        if b.bootstrap_b < 2 {
            return Err(invalid("blb.bootstrap_b", "needs at least 2 resamples"));
        }
        if b.truth_replicates < 2 {
            return Err(invalid("blb.truth_replicates", "needs at least 2 replicates"));
        }
        if !(b.alpha > 0.0 && b.alpha < 1.0) {
            return Err(invalid("blb.alpha", "must be in (0, 1)"));
        }
        if !b.coefficient.is_finite() {
            return Err(invalid("blb.coefficient", "must be finite"));
        }
        let m = &self.mc;
        positive("mc.dim", m.dim as f64)?;
        positive("mc.rank", m.rank as f64)?;
        if m.rank > m.dim {
            return Err(invalid("mc.rank", "exceeds mc.dim"));
        }
        if !(m.noise >= 0.0 && m.noise.is_finite()) {
            return Err(invalid("mc.noise", "must be nonnegative"));
        }
        for &pct in m.revealed.iter().chain([&m.runtime_revealed]) {
            if !(pct > 0.0 && pct <= 100.0) {
                return Err(invalid("mc.revealed", format!("percentage {pct} not in (0, 100]")));
            }
        }
        if m.dims.is_empty() || m.dims.iter().any(|&d| d < m.rank) {
            return Err(invalid("mc.dims", "needs dimensions of at least mc.rank"));
        }
        positive("mc.max_iters", m.max_iters as f64)?;
        positive("mc.tol", m.tol)?;
        if m.solver == McSolver::Penalized {
            positive("mc.lambda_scale", m.lambda_scale)?;
            if m.noise == 0.0 {
                return Err(invalid("mc.solver", "the penalized solver scales lambda by mc.noise, which is zero"));
            }
        }
        positive("dfc.t", self.dfc.t as f64)?;
        if m.dims.iter().chain([&m.dim]).any(|&d| self.dfc.t > d) {
            return Err(invalid("dfc.t", "exceeds a matrix dimension"));
        }
        let c = &self.convex;
        if c.p.is_empty() {
            return Err(invalid("convex.p", "needs at least one dimension"));
        }
        for &p in c.p.iter().chain([&c.footnote_p]) {
            let q = (p as f64).sqrt().round() as usize;
            if p == 0 || q * q != p {
                return Err(invalid("convex.p", format!("{p} is not a positive perfect square")));
            }
            if c.k == 0 || c.k > q {
                return Err(invalid("convex.k", format!("must be in [1, {q}] for p = {p}")));
            }
        }
        positive("convex.sigma", c.sigma)?;
        if c.trials < 2 {
            return Err(invalid("convex.trials", "needs at least 2 trials"));
        }
        positive("convex.n_gen", c.n_gen as f64)?;
        Ok(())
    }

    /// Every key in a fixed order; parsing the output reproduces `self`.
    pub fn serialize(&self) -> String {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        if let Some(e) = self.experiment {
            put("experiment", e.to_string());
        }
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        let b = &self.blb;
        put("blb.n", b.n.to_string());
        put("blb.d", b.d.to_string());
        put("blb.gamma", b.gamma.to_string());
        put("blb.s", b.s.to_string());
        put("blb.r", b.r.to_string());
        put("blb.bootstrap_b", b.bootstrap_b.to_string());
        put("blb.truth_replicates", b.truth_replicates.to_string());
        put("blb.alpha", b.alpha.to_string());
        put("blb.coefficient", b.coefficient.to_string());
        put("blb.weighting", b.weighting.name().to_string());
        let m = &self.mc;
        put("mc.dim", m.dim.to_string());
        put("mc.rank", m.rank.to_string());
        put("mc.noise", m.noise.to_string());
        put("mc.revealed", join(&m.revealed));
        put("mc.dims", join(&m.dims));
        put("mc.runtime_revealed", m.runtime_revealed.to_string());
        put("mc.max_iters", m.max_iters.to_string());
        put("mc.tol", m.tol.to_string());
        put("mc.solver", m.solver.name().to_string());
        put("mc.lambda_scale", m.lambda_scale.to_string());
        put("mc.cap_at_rank", m.cap_at_rank.to_string());
        put("dfc.t", self.dfc.t.to_string());
        let c = &self.convex;
        put("convex.p", join(&c.p));
        put("convex.k", c.k.to_string());
        put("convex.sigma", c.sigma.to_string());
        put("convex.trials", c.trials.to_string());
        put("convex.footnote_p", c.footnote_p.to_string());
        put("convex.sampled_cones", c.sampled_cones.to_string());
        put("convex.n_gen", c.n_gen.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_defaults() {
        let cfg = ExperimentConfig::parse("# desk run\nexperiment = blb-curve\nseed = 7 # fixed\nblb.s = 4\n").unwrap();
        assert_eq!(cfg.experiment, Some(Experiment::BlbCurve));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.blb.s, 4);
        assert_eq!(cfg.blb.r, 50);
    }

    #[test]
    fn named_errors() {
        assert_eq!(ExperimentConfig::parse("experiment = dfc-runtime\n"), Err(ConfigError::Missing("seed".into())));
        assert_eq!(ExperimentConfig::parse("seed = 1\nblb.q = 3\n"), Err(ConfigError::UnknownKey("blb.q".into())));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nblb.gamma = 1.5\n"), Err(ConfigError::Invalid { key, .. }) if key == "blb.gamma"));
        assert!(matches!(ExperimentConfig::parse("seed = x\n"), Err(ConfigError::Invalid { key, .. }) if key == "seed"));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nconvex.p = 15\n"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(ExperimentConfig::parse("seed 1\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nexperiment = plot\n"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nmc.noise = 0\n"), Err(ConfigError::Invalid { key, .. }) if key == "mc.solver"));
        assert!(ExperimentConfig::parse("seed = 1\nmc.noise = 0\nmc.solver = constrained\n").is_ok());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), gamma in 0.01f64..1.0, s in 1usize..50, noise in 0.01f64..2.0,
                      revealed in prop::collection::vec(0.5f64..100.0, 1..6), exp in 0usize..5, sampled: bool) {
            let mut cfg = ExperimentConfig::new(Experiment::ALL[exp], seed);
            cfg.blb.gamma = gamma;
            cfg.blb.s = s;
            cfg.mc.noise = noise;
            cfg.mc.revealed = revealed;
            cfg.convex.sampled_cones = sampled;
            cfg.mc.cap_at_rank = !sampled;
            cfg.mc.solver = if sampled { McSolver::Constrained } else { McSolver::Penalized };
            cfg.blb.weighting = if sampled { Weighting::Multinomial } else { Weighting::Poisson };
            let text = cfg.serialize();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.serialize(), text);
        }
    }
}
