//! Run configuration: a flat `key = value` file plus command-line overrides,
//! both applied through [`RunConfig::set`].

use std::collections::BTreeMap;
use std::path::Path;

use dagselect_core::sampler::{ChainControl, DagMove, Init};
use dagselect_core::{Hyperparameters, NoiseModel};

use crate::error::{Error, Result};

pub const KEYS: &[&str] = &[
    "a",
    "b",
    "tau2",
    "q",
    "R",
    "a0",
    "b0",
    "sigma2",
    "alpha_offset",
    "iters",
    "burnin",
    "seed",
    "workers",
    "init",
    "dag_move",
    "check_every",
    "scenario",
    "setting",
    "reps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub tau2: f64,
    pub q: f64,
    /// Complexity bound; `None` means `p`.
    pub r: Option<usize>,
    pub a0: f64,
    pub b0: f64,
    /// Known noise variance; `None` puts an inverse-gamma prior on it.
    pub sigma2: Option<f64>,
    pub alpha_offset: f64,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub workers: usize,
    /// `None` for the empty start, or a correlation threshold.
    pub init_threshold: Option<f64>,
    pub dag_move: DagMove,
    pub check_every: usize,
    pub scenario: u8,
    pub setting: u8,
    pub reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: 2.75,
            b: 0.5,
            tau2: 1.0,
            q: 0.005,
            r: None,
            a0: 0.1,
            b0: 0.01,
            sigma2: None,
            alpha_offset: 10.0,
            iters: 10_000,
            burnin: 5_000,
            seed: 1,
            workers: 1,
            init_threshold: None,
            dag_move: DagMove::PerColumn,
            check_every: 1_000,
            scenario: 1,
            setting: 1,
            reps: 10,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "a" => self.a = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "tau2" => self.tau2 = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "R" => {
                self.r = match value {
                    "p" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "a0" => self.a0 = parse(key, value)?,
            "b0" => self.b0 = parse(key, value)?,
            "sigma2" => {
                self.sigma2 = match value {
                    "unknown" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "alpha_offset" => self.alpha_offset = parse(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "burnin" => self.burnin = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "init" => {
                self.init_threshold = match value.split_once(':') {
                    None if value == "empty" => None,
                    None if value == "correlation" => Some(0.5),
                    Some(("correlation", t)) => Some(parse(key, t)?),
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected `empty` or `correlation[:t]`, got `{value}`"),
                        ))
                    }
                }
            }
            "dag_move" => {
                self.dag_move = match value {
                    "per-column" => DagMove::PerColumn,
                    "whole-dag" => DagMove::WholeDag,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected `per-column` or `whole-dag`, got `{value}`"),
                        ))
                    }
                }
            }
            "check_every" => self.check_every = parse(key, value)?,
            "scenario" => self.scenario = parse(key, value)?,
            "setting" => self.setting = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    line,
                    format!("line {}: expected `key = value`", lineno + 1),
                ));
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        if !self.a.is_finite() {
            return Err(Error::config("a", "must be finite"));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::config(
                "b",
                format!("must be nonnegative, got {}", self.b),
            ));
        }
        positive("tau2", self.tau2)?;
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config(
                "q",
                format!("must lie in (0, 1), got {}", self.q),
            ));
        }
        if self.r == Some(0) {
            return Err(Error::config("R", "must be at least 1"));
        }
        positive("a0", self.a0)?;
        positive("b0", self.b0)?;
        if let Some(s) = self.sigma2 {
            positive("sigma2", s)?;
        }
        if !(self.alpha_offset > 2.0) {
            return Err(Error::config(
                "alpha_offset",
                format!("must exceed 2, got {}", self.alpha_offset),
            ));
        }
        if self.iters <= self.burnin {
            return Err(Error::config(
                "iters",
                format!("must exceed burnin ({})", self.burnin),
            ));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if let Some(t) = self.init_threshold {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::config(
                    "init",
                    format!("threshold must lie in [0, 1), got {t}"),
                ));
            }
        }
        let settings = match self.scenario {
            1 | 2 => 4,
            3 => 2,
            s => {
                return Err(Error::config(
                    "scenario",
                    format!("must be 1, 2 or 3, got {s}"),
                ))
            }
        };
        if !(1..=settings).contains(&self.setting) {
            return Err(Error::config(
                "setting",
                format!(
                    "scenario {} has settings 1..={settings}, got {}",
                    self.scenario, self.setting
                ),
            ));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn hyperparameters(&self, p: usize) -> Hyperparameters {
        Hyperparameters {
            tau2: self.tau2,
            noise: match self.sigma2 {
                Some(sigma2) => NoiseModel::Known { sigma2 },
                None => NoiseModel::InverseGamma {
                    a0: self.a0,
                    b0: self.b0,
                },
            },
            a: self.a,
            b: self.b,
            q: self.q,
            r: self.r.unwrap_or(p),
            u: None,
            alpha_offset: self.alpha_offset,
        }
    }

    pub fn chain_control(&self) -> ChainControl {
        ChainControl {
            iters: self.iters,
            burnin: self.burnin,
            seed: self.seed,
            workers: self.workers,
            init: match self.init_threshold {
                None => Init::Empty,
                Some(threshold) => Init::Correlation { threshold },
            },
            dag_move: self.dag_move,
            check_every: self.check_every,
        }
    }

    /// Every key with its current value, in the file syntax.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let mut out = BTreeMap::new();
        out.insert("a", self.a.to_string());
        out.insert("b", self.b.to_string());
        out.insert("tau2", self.tau2.to_string());
        out.insert("q", self.q.to_string());
        out.insert(
            "R",
            self.r.map_or_else(|| "p".to_owned(), |r| r.to_string()),
        );
        out.insert("a0", self.a0.to_string());
        out.insert("b0", self.b0.to_string());
        out.insert(
            "sigma2",
            self.sigma2
                .map_or_else(|| "unknown".to_owned(), |s| s.to_string()),
        );
        out.insert("alpha_offset", self.alpha_offset.to_string());
        out.insert("iters", self.iters.to_string());
        out.insert("burnin", self.burnin.to_string());
        out.insert("seed", self.seed.to_string());
        out.insert("workers", self.workers.to_string());
        out.insert(
            "init",
            self.init_threshold
                .map_or_else(|| "empty".to_owned(), |t| format!("correlation:{t}")),
        );
        out.insert(
            "dag_move",
            match self.dag_move {
                DagMove::PerColumn => "per-column",
                DagMove::WholeDag => "whole-dag",
            }
            .to_owned(),
        );
        out.insert("check_every", self.check_every.to_string());
        out.insert("scenario", self.scenario.to_string());
        out.insert("setting", self.setting.to_string());
        out.insert("reps", self.reps.to_string());
        out
    }

    pub fn to_text(&self) -> String {
        self.echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("\n# nothing\n").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        let h = c.hyperparameters(240);
        assert_eq!((h.a, h.b, h.tau2, h.q, h.r), (2.75, 0.5, 1.0, 0.005, 240));
        assert_eq!(h.noise, NoiseModel::InverseGamma { a0: 0.1, b0: 0.01 });
        assert_eq!((c.iters, c.burnin), (10_000, 5_000));
    }

    #[test]
    fn overrides_and_errors() {
        let mut c = RunConfig::default();
        c.apply_text("b = 0\nsigma2 = 2.5 # known\nR = 7\ninit = correlation:0.3")
            .unwrap();
        assert_eq!(c.b, 0.0);
        assert_eq!(
            c.hyperparameters(10).noise,
            NoiseModel::Known { sigma2: 2.5 }
        );
        assert_eq!(c.hyperparameters(10).r, 7);
        assert_eq!(c.init_threshold, Some(0.3));
        c.validate().unwrap();

        c.set("q", "1.5").unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("`q`"), "{err}");

        let err = RunConfig::default().apply_text("bogus = 1").unwrap_err();
        assert!(err.to_string().contains("`bogus`"));
        let err = RunConfig::default().set("iters", "many").unwrap_err();
        assert!(err.to_string().contains("`iters`"));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("a = 3\nsetting = 2\ndag_move = whole-dag\nR = 5")
            .unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.echo().len(), KEYS.len());
    }
}
