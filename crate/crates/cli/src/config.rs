//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # L1 at three box sides
//! experiment = l1-poisson
//! dim = 2
//! param = 2.0
//! sides = 20, 40, 80
//! replicas = 2000
//! master_seed = 42
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use percolab_core::estimation::{Sign, MIN_CLT_SAMPLES};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const WORKERS_ENV: &str = "PERCOLAB_WORKERS";
pub const DEFAULT_EMBED_FACTOR: usize = 2;
pub const DEFAULT_TAIL_THRESHOLDS: [f64; 7] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    L1Poisson,
    L1Binomial,
    PInfinity,
    XiBoundary,
    XiSymmetry,
    GapL1C1,
    LatticeH,
    LatticeCount,
    Theta,
    Kappa,
    Fit,
    Clt,
    Tail,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::L1Poisson,
        Experiment::L1Binomial,
        Experiment::PInfinity,
        Experiment::XiBoundary,
        Experiment::XiSymmetry,
        Experiment::GapL1C1,
        Experiment::LatticeH,
        Experiment::LatticeCount,
        Experiment::Theta,
        Experiment::Kappa,
        Experiment::Fit,
        Experiment::Clt,
        Experiment::Tail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::L1Poisson => "l1-poisson",
            Experiment::L1Binomial => "l1-binomial",
            Experiment::PInfinity => "p-infinity",
            Experiment::XiBoundary => "xi-boundary",
            Experiment::XiSymmetry => "xi-symmetry",
            Experiment::GapL1C1 => "gap-l1-c1",
            Experiment::LatticeH => "lattice-h",
            Experiment::LatticeCount => "lattice-count",
            Experiment::Theta => "theta",
            Experiment::Kappa => "kappa",
            Experiment::Fit => "fit",
            Experiment::Clt => "clt",
            Experiment::Tail => "tail",
        }
    }

    /// Site percolation experiments; their parameter is `p` and sides are integers.
    pub fn is_lattice(self) -> bool {
        matches!(
            self,
            Experiment::LatticeH | Experiment::LatticeCount | Experiment::Theta | Experiment::Kappa
        )
    }

    pub fn is_sampling(self) -> bool {
        self != Experiment::Fit
    }

    /// Sign convention of the size expansion fitted to per-side means, if any.
    pub fn expansion_sign(self) -> Option<Sign> {
        match self {
            Experiment::L1Poisson | Experiment::Clt | Experiment::LatticeH => Some(Sign::Minus),
            Experiment::LatticeCount => Some(Sign::Plus),
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                CliError::invalid(
                    "experiment",
                    format!("unknown experiment `{s}`; expected one of {}", names.join(", ")),
                )
            })
    }
}

/// Input of the `fit` experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSource {
    pub summary: PathBuf,
    pub degree: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    /// `λ` for continuum experiments, `p` for lattice ones.
    pub param: f64,
    pub sides: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub embed_factor: usize,
    pub output_dir: PathBuf,
    /// Survival thresholds for `tail`.
    pub thresholds: Vec<f64>,
    pub fit: Option<FitSource>,
}

const KNOWN_KEYS: [&str; 13] = [
    "experiment",
    "dim",
    "param",
    "sides",
    "replicas",
    "master_seed",
    "workers",
    "embed_factor",
    "output_dir",
    "thresholds",
    "summary",
    "degree",
    "sign",
];

fn parse_pairs(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::invalid("line", format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::invalid(key, "unknown key"));
        }
        if pairs.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::invalid(key, "given more than once"));
        }
    }
    Ok(pairs)
}

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> CliResult<&str> {
        self.raw(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::invalid(key, "missing required key"))
    }

    fn parse<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::invalid(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }

    fn parse_required<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.required(key)?;
        Ok(self.parse(key)?.expect("checked present"))
    }

    fn list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|item| {
                let item = item.trim().trim_start_matches('[').trim_end_matches(']').trim();
                item.parse::<f64>()
                    .map_err(|_| CliError::invalid(key, format!("cannot parse list item `{item}`")))
            })
            .collect::<CliResult<Vec<f64>>>()
            .map(Some)
    }
}

fn check_increasing(key: &str, values: &[f64]) -> CliResult<()> {
    if values.is_empty() {
        return Err(CliError::invalid(key, "list is empty"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(CliError::invalid(key, format!("values must be positive, got {bad}")));
    }
    if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
        return Err(CliError::invalid(
            key,
            format!("values must be strictly increasing, got {} then {}", w[0], w[1]),
        ));
    }
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl ExperimentConfig {
    /// Parse and validate configuration text. `PERCOLAB_WORKERS` is not consulted.
    pub fn parse(text: &str) -> CliResult<Self> {
        let pairs = Pairs(parse_pairs(text)?);
        let experiment: Experiment = pairs.required("experiment")?.parse()?;

        let workers = match pairs.parse::<usize>("workers")? {
            Some(0) => return Err(CliError::invalid("workers", "need workers >= 1")),
            Some(w) => w,
            None => default_workers(),
        };
        let embed_factor = pairs.parse::<usize>("embed_factor")?.unwrap_or(DEFAULT_EMBED_FACTOR);
        if embed_factor == 0 {
            return Err(CliError::invalid("embed_factor", "need embed_factor >= 1"));
        }
        let output_dir = PathBuf::from(pairs.raw("output_dir").unwrap_or("."));

        if experiment == Experiment::Fit {
            let dim = pairs.parse::<usize>("dim")?;
            let degree = match (pairs.parse::<usize>("degree")?, dim) {
                (Some(d), _) | (None, Some(d)) => d,
                (None, None) => return Err(CliError::invalid("degree", "missing required key")),
            };
            let sign = match pairs.raw("sign") {
                Some(s) => s.parse::<Sign>().map_err(|e| CliError::invalid("sign", e.to_string()))?,
                None => Sign::Minus,
            };
            return Ok(ExperimentConfig {
                experiment,
                dim: dim.unwrap_or(degree),
                param: 0.0,
                sides: Vec::new(),
                replicas: 0,
                master_seed: 0,
                workers,
                embed_factor,
                output_dir,
                thresholds: Vec::new(),
                fit: Some(FitSource {
                    summary: PathBuf::from(pairs.required("summary")?),
                    degree,
                    sign,
                }),
            });
        }

        let dim: usize = pairs.parse_required("dim")?;
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(CliError::invalid("dim", format!("need 2 <= dim <= {MAX_DIM}, got {dim}")));
        }
        if experiment == Experiment::XiSymmetry && dim > 3 {
            return Err(CliError::invalid("dim", "xi-symmetry supports dim 2 or 3"));
        }

        let param: f64 = pairs.parse_required("param")?;
        if experiment.is_lattice() {
            if !(0.0..=1.0).contains(&param) {
                return Err(CliError::invalid("param", format!("need 0 <= p <= 1, got {param}")));
            }
        } else if !(param > 0.0 && param.is_finite()) {
            return Err(CliError::invalid("param", format!("need intensity > 0, got {param}")));
        }

        let sides = pairs
            .list("sides")?
            .ok_or_else(|| CliError::invalid("sides", "missing required key"))?;
        check_increasing("sides", &sides)?;
        if experiment.is_lattice() {
            if let Some(bad) = sides.iter().find(|s| s.fract() != 0.0) {
                return Err(CliError::invalid("sides", format!("lattice sides must be integers, got {bad}")));
            }
        }

        let replicas: usize = pairs.parse_required("replicas")?;
        if replicas == 0 {
            return Err(CliError::invalid("replicas", "need replicas >= 1"));
        }
        if experiment == Experiment::Clt && replicas < MIN_CLT_SAMPLES {
            return Err(CliError::invalid(
                "replicas",
                format!("clt needs at least {MIN_CLT_SAMPLES} replicas, got {replicas}"),
            ));
        }
        let master_seed: u64 = pairs.parse_required("master_seed")?;

        let thresholds = match pairs.list("thresholds")? {
            Some(t) => {
                check_increasing("thresholds", &t)?;
                t
            }
            None if experiment == Experiment::Tail => DEFAULT_TAIL_THRESHOLDS.to_vec(),
            None => Vec::new(),
        };

        Ok(ExperimentConfig {
            experiment,
            dim,
            param,
            sides,
            replicas,
            master_seed,
            workers,
            embed_factor,
            output_dir,
            thresholds,
            fit: None,
        })
    }

    /// Read, parse and validate a config file. Relative paths inside it are
    /// taken relative to the file's directory, and `PERCOLAB_WORKERS`
    /// overrides `workers`.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.output_dir = base.join(&config.output_dir);
        if let Some(fit) = config.fit.as_mut() {
            fit.summary = base.join(&fit.summary);
        }
        if let Ok(value) = std::env::var(WORKERS_ENV) {
            config.workers = match value.trim().parse::<usize>() {
                Ok(w) if w >= 1 => w,
                _ => return Err(CliError::invalid("workers", format!("{WORKERS_ENV}=`{value}` is not a positive integer"))),
            };
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "experiment = l1-poisson\ndim = 2\nparam = 2\nsides = 10, 20\nreplicas = 5\nmaster_seed = 1\n";

    fn key_of(err: CliError) -> String {
        match err {
            CliError::Validation { key, .. } => key,
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::L1Poisson);
        assert_eq!(c.sides, vec![10.0, 20.0]);
        assert_eq!(c.embed_factor, 2);
        assert_eq!(c.workers, default_workers());
        assert_eq!(c.output_dir, PathBuf::from("."));
        assert!(c.thresholds.is_empty());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{MINIMAL}workers = 3 # trailing\n");
        assert_eq!(ExperimentConfig::parse(&text).unwrap().workers, 3);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (MINIMAL.replace("replicas = 5", "replicas = 0"), "replicas"),
            (MINIMAL.replace("sides = 10, 20", "sides = 20, 20"), "sides"),
            (MINIMAL.replace("sides = 10, 20", "sides = 20, 10"), "sides"),
            (MINIMAL.replace("l1-poisson", "l2-poisson"), "experiment"),
            (MINIMAL.replace("param = 2", "param = -1"), "param"),
            (MINIMAL.replace("dim = 2\n", ""), "dim"),
            (MINIMAL.replace("master_seed = 1", "master_seed = x"), "master_seed"),
            (format!("{MINIMAL}colour = red\n"), "colour"),
            (format!("{MINIMAL}dim = 3\n"), "dim"),
            (format!("{MINIMAL}workers = 0\n"), "workers"),
        ];
        for (text, key) in cases {
            assert_eq!(key_of(ExperimentConfig::parse(&text).unwrap_err()), key, "{text}");
        }
    }

    #[test]
    fn lattice_constraints() {
        let base = "experiment = lattice-h\ndim = 2\nparam = 0.5\nsides = 4, 8\nreplicas = 3\nmaster_seed = 9\n";
        assert!(ExperimentConfig::parse(base).is_ok());
        let bad_p = base.replace("param = 0.5", "param = 1.5");
        assert_eq!(key_of(ExperimentConfig::parse(&bad_p).unwrap_err()), "param");
        let frac = base.replace("sides = 4, 8", "sides = 4.5, 8");
        assert_eq!(key_of(ExperimentConfig::parse(&frac).unwrap_err()), "sides");
    }

    #[test]
    fn clt_and_tail_specifics() {
        let clt = MINIMAL.replace("l1-poisson", "clt");
        assert_eq!(key_of(ExperimentConfig::parse(&clt).unwrap_err()), "replicas");
        let tail = MINIMAL.replace("l1-poisson", "tail");
        assert_eq!(ExperimentConfig::parse(&tail).unwrap().thresholds, DEFAULT_TAIL_THRESHOLDS);
        let sym = MINIMAL.replace("l1-poisson", "xi-symmetry").replace("dim = 2", "dim = 4");
        assert_eq!(key_of(ExperimentConfig::parse(&sym).unwrap_err()), "dim");
    }

    #[test]
    fn fit_config() {
        let c = ExperimentConfig::parse("experiment = fit\nsummary = s.json\ndim = 2\nsign = plus\n").unwrap();
        let fit = c.fit.unwrap();
        assert_eq!((fit.degree, fit.sign), (2, Sign::Plus));
        let missing = ExperimentConfig::parse("experiment = fit\ndim = 2\n").unwrap_err();
        assert_eq!(key_of(missing), "summary");
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
