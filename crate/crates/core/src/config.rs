//! Run configuration.
//!
//! A config file is a flat TOML document whose keys are exactly the
//! [`SimConfig`] field names. `rho_samples` accepts either an explicit
//! ascending array or the shorthand string `"geom(start, stop, ratio)"`.
//!
//! ```toml
//! epsilon = 0.5
//! beta = 1.0
//! half_length = 3276.8
//! n_points = 131072
//! dt = 0.02
//! t_end = 2000.0
//! rho_samples = "geom(20, 2000, 1.05)"
//! profile = "bump(c0=1, c1=0)"
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Time at which the Cauchy data is prescribed.
pub const T_START: f64 = 2.0;

/// Built-in initial-data family.
///
/// `b(x) = e · exp(1/(x² − 1))` on `|x| < 1` is the unit-peak bump; `c0` and
/// `c1` scale it for `u0` and `u1`. The asymmetric variant uses
/// `b((x − 0.3)/0.7)`, which still vanishes outside `[−0.4, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Zero,
    Bump { c0: f64, c1: f64 },
    AsymBump { c0: f64, c1: f64 },
}

impl Profile {
    pub fn id(&self) -> &'static str {
        match self {
            Profile::Zero => "zero",
            Profile::Bump { .. } => "bump",
            Profile::AsymBump { .. } => "asym_bump",
        }
    }

    /// `(u0(x), u1(x))` before scaling by ε.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Profile::Zero => (0.0, 0.0),
            Profile::Bump { c0, c1 } => {
                let b = unit_bump(x);
                (c0 * b, c1 * b)
            }
            Profile::AsymBump { c0, c1 } => {
                let b = unit_bump((x - 0.3) / 0.7);
                (c0 * b, c1 * b)
            }
        }
    }
}

/// `e · exp(1/(x² − 1))` for `|x| < 1`, exactly zero elsewhere. Peak value 1 at the origin.
pub fn unit_bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 / (x * x - 1.0) + 1.0).exp()
    } else {
        0.0
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Bump { c0, c1 } | Profile::AsymBump { c0, c1 } => {
                write!(f, "{}(c0={c0:?}, c1={c1:?})", self.id())
            }
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open && c == s.len() - 1)
                    .ok_or_else(|| Error::config(format!("malformed profile `{s}`")))?;
                (s[..open].trim(), &s[open + 1..close])
            }
            None => (s, ""),
        };
        let mut c0 = 1.0;
        let mut c1 = 0.0;
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (key, value) = arg
                .split_once('=')
                .ok_or_else(|| Error::config(format!("profile argument `{arg}` is not key=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("profile argument `{arg}` is not a number")))?;
            match key.trim() {
                "c" | "c0" => c0 = value,
                "c1" => c1 = value,
                other => return Err(Error::config(format!("unknown profile parameter `{other}`"))),
            }
        }
        match name {
            "zero" if args.trim().is_empty() => Ok(Profile::Zero),
            "zero" => Err(Error::config("profile `zero` takes no parameters")),
            "bump" => Ok(Profile::Bump { c0, c1 }),
            "asym_bump" => Ok(Profile::AsymBump { c0, c1 }),
            other => Err(Error::config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Geometric ladder `start · ratio^k` up to `stop`, with `stop` appended when the
/// ladder does not land on it.
pub fn geometric_ladder(start: f64, stop: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(start > 0.0 && stop >= start && ratio > 1.0) {
        return out;
    }
    let mut k = 0;
    loop {
        let rho = start * ratio.powi(k);
        if rho > stop * (1.0 + 1e-12) {
            break;
        }
        out.push(rho);
        k += 1;
    }
    if let Some(&last) = out.last() {
        if (stop - last).abs() > 1e-9 * stop {
            out.push(stop);
        }
    }
    out
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RhoSpec {
    List(Vec<f64>),
    Text(String),
}

impl RhoSpec {
    fn resolve(self) -> Result<Vec<f64>> {
        match self {
            RhoSpec::List(v) => Ok(v),
            RhoSpec::Text(s) => {
                let t = s.trim();
                let inner = t
                    .strip_prefix("geom(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::config(format!("rho_samples: expected geom(start, stop, ratio), got `{t}`")))?;
                let nums: Vec<f64> = inner
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::config(format!("rho_samples: non-numeric entry in `{t}`")))?;
                match nums[..] {
                    [start, stop, ratio] if start > 0.0 && stop >= start && ratio > 1.0 => {
                        Ok(geometric_ladder(start, stop, ratio))
                    }
                    _ => Err(Error::config(format!("rho_samples: need 0 < start <= stop and ratio > 1 in `{t}`"))),
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    epsilon: f64,
    beta: f64,
    half_length: f64,
    n_points: usize,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_start")]
    t_start: f64,
    t_end: f64,
    rho_samples: RhoSpec,
    #[serde(default = "default_y_spacing")]
    y_spacing: f64,
    #[serde(default = "default_profile")]
    profile: String,
    #[serde(default)]
    checkpoint_every: u64,
    #[serde(default)]
    seed: u64,
}

fn default_dt() -> f64 {
    0.02
}
fn default_t_start() -> f64 {
    T_START
}
fn default_y_spacing() -> f64 {
    0.01
}
fn default_profile() -> String {
    "bump".to_string()
}

/// Everything a run needs. Construct through [`SimConfig::from_toml_str`] or
/// build directly and call [`SimConfig::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub rho_samples: Vec<f64>,
    pub y_spacing: f64,
    pub profile: Profile,
    /// Steps between checkpoints; 0 disables checkpointing.
    pub checkpoint_every: u64,
    pub seed: u64,
}

/// Margin added to `ln ρ` when sizing a slice's y-grid.
pub const Y_MARGIN: f64 = 0.5;

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
        let mut problems = Vec::new();
        let profile = raw.profile.parse::<Profile>().unwrap_or_else(|e| {
            if let Error::Config(p) = e {
                problems.extend(p);
            }
            Profile::Zero
        });
        let rho_samples = raw.rho_samples.resolve().unwrap_or_else(|e| {
            if let Error::Config(p) = e {
                problems.extend(p);
            }
            Vec::new()
        });
        let cfg = SimConfig {
            epsilon: raw.epsilon,
            beta: raw.beta,
            half_length: raw.half_length,
            n_points: raw.n_points,
            dt: raw.dt,
            t_start: raw.t_start,
            t_end: raw.t_end,
            rho_samples,
            y_spacing: raw.y_spacing,
            profile,
            checkpoint_every: raw.checkpoint_every,
            seed: raw.seed,
        };
        if let Err(Error::Config(more)) = cfg.validate() {
            problems.extend(more);
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    /// Number of time steps from `t_start` to `t_end`.
    pub fn n_steps(&self) -> u64 {
        ((self.t_end - self.t_start) / self.dt).round() as u64
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let finite = [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("half_length", self.half_length),
            ("dt", self.dt),
            ("t_start", self.t_start),
            ("t_end", self.t_end),
            ("y_spacing", self.y_spacing),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                v.push(format!("{name} must be finite"));
            }
        }
        if self.epsilon < 0.0 {
            v.push("epsilon must be >= 0".into());
        }
        if self.beta < 0.0 {
            v.push("beta must be >= 0".into());
        }
        if self.n_points < 16 || !self.n_points.is_power_of_two() {
            v.push(format!("n_points = {} must be a power of two >= 16", self.n_points));
        }
        if self.t_start != T_START {
            v.push(format!("t_start must be {T_START}"));
        }
        if self.t_end <= self.t_start {
            v.push("t_end must exceed t_start".into());
        }
        if self.half_length <= self.t_end + 1.0 {
            v.push(format!(
                "half_length = {} must exceed t_end + 1 = {} so no signal reaches the boundary",
                self.half_length,
                self.t_end + 1.0
            ));
        }
        if !(self.dt > 0.0) {
            v.push("dt must be positive".into());
        } else {
            if self.n_points > 0 && self.dt > self.dx() * (1.0 + 1e-12) {
                v.push(format!("dt = {} must not exceed dx = {}", self.dt, self.dx()));
            }
            let steps = (self.t_end - self.t_start) / self.dt;
            if (steps - steps.round()).abs() > 1e-6 {
                v.push("t_end - t_start must be a whole number of time steps".into());
            } else if steps.round() < 3.0 {
                v.push("the run must span at least 3 time steps".into());
            }
        }
        if !(self.y_spacing > 0.0) {
            v.push("y_spacing must be positive".into());
        }
        if self.rho_samples.is_empty() {
            v.push("rho_samples must not be empty".into());
        }
        for w in self.rho_samples.windows(2) {
            if !(w[1] > w[0]) {
                v.push(format!("rho_samples must be strictly ascending ({} then {})", w[0], w[1]));
                break;
            }
        }
        for &rho in &self.rho_samples {
            if !(rho >= self.t_start && rho <= self.t_end) {
                v.push(format!("rho sample {rho} must lie in [t_start, t_end]"));
            }
        }
        // Consecutive slices must be close enough that the half-wave phase moves
        // by less than pi/2 between them (nearest-branch unwrapping).
        let amp = 4.0 * self.epsilon;
        for w in self.rho_samples.windows(2) {
            let step = 0.375 * self.beta * amp * amp * (w[1] / w[0]).ln() + 0.125 * (1.0 / w[0] - 1.0 / w[1]);
            if step >= std::f64::consts::FRAC_PI_2 {
                v.push(format!("rho samples {} -> {} too far apart for phase unwrapping", w[0], w[1]));
                break;
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Canonical text form; independent of key order in the source file.
    pub fn canonical(&self) -> String {
        let rhos: Vec<String> = self.rho_samples.iter().map(|r| format!("{r:?}")).collect();
        format!(
            "epsilon={:?}\nbeta={:?}\nhalf_length={:?}\nn_points={}\ndt={:?}\nt_start={:?}\nt_end={:?}\nrho_samples=[{}]\ny_spacing={:?}\nprofile={}\ncheckpoint_every={}\nseed={}\n",
            self.epsilon,
            self.beta,
            self.half_length,
            self.n_points,
            self.dt,
            self.t_start,
            self.t_end,
            rhos.join(","),
            self.y_spacing,
            self.profile,
            self.checkpoint_every,
            self.seed
        )
    }

    /// SHA-256 of [`SimConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// The canonical form as a TOML document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        let rhos: Vec<String> = self.rho_samples.iter().map(|r| format!("{r:?}")).collect();
        format!(
            "epsilon = {:?}\nbeta = {:?}\nhalf_length = {:?}\nn_points = {}\ndt = {:?}\nt_start = {:?}\nt_end = {:?}\nrho_samples = [{}]\ny_spacing = {:?}\nprofile = \"{}\"\ncheckpoint_every = {}\nseed = {}\n",
            self.epsilon,
            self.beta,
            self.half_length,
            self.n_points,
            self.dt,
            self.t_start,
            self.t_end,
            rhos.join(", "),
            self.y_spacing,
            self.profile,
            self.checkpoint_every,
            self.seed
        )
    }
}

impl SimConfig {
    /// A copy with one key replaced, validated like a config file. `value` is
    /// read as a TOML value, falling back to a plain string.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml())
            .map_err(|e| Error::Internal(format!("canonical config does not parse: {e}")))?;
        if !table.contains_key(key) {
            return Err(Error::config(format!("unknown config key `{key}`")));
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        Self::from_toml_str(&table.to_string())
    }
}

/// Serializable mirror of the config for the run manifest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigSummary {
    pub epsilon: f64,
    pub beta: f64,
    pub n_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub profile: String,
    pub n_slices: usize,
}

impl From<&SimConfig> for ConfigSummary {
    fn from(c: &SimConfig) -> Self {
        ConfigSummary {
            epsilon: c.epsilon,
            beta: c.beta,
            n_points: c.n_points,
            dx: c.dx(),
            dt: c.dt,
            t_end: c.t_end,
            profile: c.profile.to_string(),
            n_slices: c.rho_samples.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
        epsilon = 0.5
        beta = 1.0
        half_length = 3276.8
        n_points = 131072
        dt = 0.02
        t_end = 2000.0
        rho_samples = "geom(20, 2000, 1.05)"
        profile = "bump"
    "#;

    #[test]
    fn overrides_are_validated() {
        let cfg = SimConfig::from_toml_str(REFERENCE).unwrap();
        let c = cfg.with_override("beta", "0").unwrap();
        assert_eq!(c.beta, 0.0);
        assert_eq!(c.epsilon, cfg.epsilon);
        let c = cfg.with_override("profile", "asym_bump(c0=1, c1=0.5)").unwrap();
        assert_eq!(c.profile, Profile::AsymBump { c0: 1.0, c1: 0.5 });
        assert!(matches!(cfg.with_override("beta", "-1"), Err(Error::Config(_))));
        assert!(cfg.with_override("gamma", "1").is_err());
    }

    #[test]
    fn reference_ladder_has_96_slices() {
        let cfg = SimConfig::from_toml_str(REFERENCE).unwrap();
        // ceil(ln 100 / ln 1.05) + 1
        let expected = ((100f64).ln() / 1.05f64.ln()).ceil() as usize + 1;
        assert_eq!(cfg.rho_samples.len(), expected);
        assert_eq!(expected, 96);
        assert_eq!(*cfg.rho_samples.last().unwrap(), 2000.0);
        assert_eq!(cfg.rho_samples[0], 20.0);
    }

    #[test]
    fn all_violations_are_reported() {
        let text = r#"
            epsilon = -1.0
            beta = -2.0
            half_length = 10.0
            n_points = 1000
            dt = 0.5
            t_end = 100.0
            rho_samples = [5.0, 3.0]
        "#;
        match SimConfig::from_toml_str(text) {
            Err(Error::Config(v)) => {
                assert!(v.len() >= 5, "{v:?}");
                assert!(v.iter().any(|m| m.contains("epsilon")));
                assert!(v.iter().any(|m| m.contains("beta")));
                assert!(v.iter().any(|m| m.contains("power of two")));
                assert!(v.iter().any(|m| m.contains("half_length")));
                assert!(v.iter().any(|m| m.contains("ascending")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_profiles_are_rejected() {
        let text = REFERENCE.replace("profile = \"bump\"", "profile = \"gaussian\"");
        assert!(matches!(SimConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = format!("{REFERENCE}\nwibble = 3\n");
        assert!(matches!(SimConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_key_order() {
        let mut lines: Vec<&str> = REFERENCE.lines().filter(|l| !l.trim().is_empty()).collect();
        let a = SimConfig::from_toml_str(&lines.join("\n")).unwrap();
        lines.reverse();
        let b = SimConfig::from_toml_str(&lines.join("\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = SimConfig { beta: 2.0, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn canonical_toml_round_trips() {
        let a = SimConfig::from_toml_str(REFERENCE).unwrap();
        let b = SimConfig::from_toml_str(&a.to_toml()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("zero".parse::<Profile>().unwrap(), Profile::Zero);
        assert_eq!("bump".parse::<Profile>().unwrap(), Profile::Bump { c0: 1.0, c1: 0.0 });
        assert_eq!(
            "bump(c=2)".parse::<Profile>().unwrap(),
            Profile::Bump { c0: 2.0, c1: 0.0 }
        );
        assert_eq!(
            "asym_bump(c0=0.5, c1=-1)".parse::<Profile>().unwrap(),
            Profile::AsymBump { c0: 0.5, c1: -1.0 }
        );
        assert!("bump(c0=x)".parse::<Profile>().is_err());
        assert!("bump(q=1)".parse::<Profile>().is_err());
        let p = Profile::AsymBump { c0: 0.25, c1: 3.0 };
        assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
    }

    #[test]
    fn bump_values() {
        assert_eq!(unit_bump(0.0), 1.0);
        assert_eq!(unit_bump(1.0), 0.0);
        assert_eq!(unit_bump(-1.5), 0.0);
        // exp(1/(0.999^2 - 1) + 1) ~ exp(-499.25)
        assert!(unit_bump(0.999) < 1e-10);
        let (u0, _) = Profile::AsymBump { c0: 1.0, c1: 0.0 }.eval(0.3);
        assert_eq!(u0, 1.0);
        assert_eq!(Profile::AsymBump { c0: 1.0, c1: 0.0 }.eval(-0.4).0, 0.0);
    }
}
