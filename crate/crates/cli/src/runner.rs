use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use percolab_core::continuum::{
    self, decompose_boundary, defect_diameter_samples, gap_pair,
    p_infinity_ratio, sample_embedded, shell_unit_box, xi_corners, EmbeddingPlan, RegionSpec,
    SUBCRITICAL_GIANT_FRACTION,
};
use percolab_core::estimation::{
    clt_check, fit_expansion, replicate, summarize, survival_curve, tail_decay_rate,
    ExpansionFit, FitPoint, MonteCarloSummary, NormalityReport, Sign, TailFit,
};
use percolab_core::lattice::{
    sample_cluster_count, sample_kappa, sample_largest_cluster, sample_theta_indicator,
};
use percolab_core::point_process::{derive_substream, stream_label};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FIT_FILE: &str = "fit.json";
pub const CLT_FILE: &str = "clt.json";
pub const TAIL_FILE: &str = "tail.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub experiment: String,
    pub dim: usize,
    pub param: f64,
    pub side: f64,
    pub replica: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub side: f64,
    pub summary: MonteCarloSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub experiment: String,
    pub dim: usize,
    pub param: f64,
    pub sides: Vec<SideSummary>,
}

impl SummaryFile {
    pub fn fit_points(&self) -> Vec<FitPoint> {
        self.sides
            .iter()
            .map(|s| FitPoint {
                side: s.side,
                mean: s.summary.mean,
                stderr: s.summary.stderr,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSide {
    pub side: f64,
    /// `(n, P̂[D(R) ≥ n])` over the unit shell box `R`.
    pub survival: Vec<(f64, f64)>,
    pub fit: Option<TailFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: BTreeMap<String, PathBuf>,
    pub samples_sha256: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse `"1"`, `"0.5"` or `"1/2"`.
pub fn parse_exponent(text: &str) -> CliResult<f64> {
    let bad = || CliError::invalid("exponent", format!("cannot parse `{text}`"));
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if !value.is_finite() || value < 0.0 {
        return Err(bad());
    }
    Ok(value)
}

fn plan_for(config: &ExperimentConfig, side: f64) -> CliResult<EmbeddingPlan> {
    Ok(EmbeddingPlan::with_factor(config.dim, side, config.embed_factor as f64)?)
}

/// Per-replica values of the configured statistic at one side, in replica
/// order. Runs on the current rayon pool.
pub fn sample_side(config: &ExperimentConfig, side: f64) -> CliResult<Vec<f64>> {
    let (d, param, reps, seed) = (config.dim, config.param, config.replicas, config.master_seed);
    let stream = |name: &str| stream_label(name, d, param, side);
    let n = side as usize;
    let values = match config.experiment {
        Experiment::L1Poisson | Experiment::Clt => continuum::l1_samples(param, side, d, reps, seed)?,
        Experiment::L1Binomial => continuum::l1_binomial_samples(param, side, d, reps, seed)?,
        Experiment::PInfinity => {
            let plan = plan_for(config, side)?;
            let label = stream("p-infinity");
            let rows = replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                let rep = sample_embedded(param, &plan, &mut rng)?;
                Ok((p_infinity_ratio(&rep, param), rep.giant_fraction()))
            })?;
            let mean_fraction = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
            if mean_fraction < SUBCRITICAL_GIANT_FRACTION {
                warn!(
                    "side {side}: embedding giant holds {:.1}% of points; p_infinity estimate is unreliable",
                    100.0 * mean_fraction
                );
            }
            rows.into_iter().map(|r| r.0).collect()
        }
        Experiment::XiBoundary => {
            let plan = plan_for(config, side)?;
            let label = stream("xi-boundary");
            let whole = RegionSpec::whole(d, side);
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                let decomp = decompose_boundary(param, &plan, &mut rng)?;
                Ok(continuum::xi(&decomp, &whole)? as f64)
            })?
        }
        Experiment::XiSymmetry => {
            let plan = plan_for(config, side)?;
            let label = stream("xi-symmetry");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                let x = xi_corners(&decompose_boundary(param, &plan, &mut rng)?)?;
                if x.total != x.cell_sum {
                    return Err(percolab_core::Error::Invariant(format!(
                        "replica {r}: xi over the box is {} but the half-side cells sum to {}",
                        x.total, x.cell_sum
                    )));
                }
                Ok(x.corner_sum as f64 - x.total as f64)
            })?
        }
        Experiment::GapL1C1 => {
            let plan = plan_for(config, side)?;
            let label = stream("gap-l1-c1");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                let (l1, c1) = gap_pair(&sample_embedded(param, &plan, &mut rng)?);
                if l1 < c1 {
                    return Err(percolab_core::Error::Invariant(format!(
                        "replica {r}: L1 = {l1} is below |C1| = {c1}"
                    )));
                }
                Ok(l1 as f64 - c1 as f64)
            })?
        }
        Experiment::Tail => {
            let plan = plan_for(config, side)?;
            defect_diameter_samples(param, &plan, &shell_unit_box(d, side), reps, seed)?
        }
        Experiment::LatticeH => {
            let label = stream("lattice-h");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                Ok(sample_largest_cluster(&mut rng, d, n, param)? as f64)
            })?
        }
        Experiment::LatticeCount => {
            let label = stream("lattice-count");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                Ok(sample_cluster_count(&mut rng, d, n, param)? as f64)
            })?
        }
        Experiment::Theta => {
            let label = stream("theta");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                let hit = sample_theta_indicator(&mut rng, d, n, config.embed_factor, param)?;
                Ok(if hit { 1.0 } else { 0.0 })
            })?
        }
        Experiment::Kappa => {
            let label = stream("kappa");
            replicate(reps, |r| {
                let mut rng = derive_substream(seed, label.as_bytes(), r);
                sample_kappa(&mut rng, d, n, param)
            })?
        }
        Experiment::Fit => {
            return Err(CliError::invalid("experiment", "fit does not sample"));
        }
    };
    Ok(values)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_summary(path: &Path) -> CliResult<SummaryFile> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn encode_samples(rows: &[SampleRow]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory csv write");
    }
    writer.into_inner().expect("in-memory csv flush")
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleRow>> {
    let malformed = |reason: String| CliError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| malformed(e.to_string())))
        .collect()
}

/// Fit the size expansion to the per-side means of a summary file.
pub fn fit_summary(summary: &SummaryFile, degree: usize, sign: Sign) -> CliResult<ExpansionFit> {
    Ok(fit_expansion(&summary.fit_points(), degree, sign)?)
}

/// Normality report for the samples of one side.
pub fn clt_for_side(rows: &[SampleRow], side: f64, exponent: f64) -> CliResult<NormalityReport> {
    let values: Vec<f64> = rows.iter().filter(|r| r.side == side).map(|r| r.value).collect();
    if values.is_empty() {
        return Err(CliError::invalid("side", format!("no samples at side {side}")));
    }
    Ok(clt_check(&values, side, exponent)?)
}

fn build_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))
}

/// Run a validated configuration and write its artifacts into `output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> CliResult<RunManifest> {
    let started = Instant::now();
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut outputs = BTreeMap::new();
    let mut samples_sha256 = None;

    if let Some(source) = &config.fit {
        let summary = read_summary(&source.summary)?;
        let fit = fit_summary(&summary, source.degree, source.sign)?;
        let path = dir.join(FIT_FILE);
        write_json(&path, &fit)?;
        outputs.insert("fit".to_string(), path);
    } else {
        let pool = build_pool(config.workers)?;
        let mut rows = Vec::with_capacity(config.sides.len() * config.replicas);
        let mut sides = Vec::with_capacity(config.sides.len());
        let mut per_side = Vec::with_capacity(config.sides.len());
        for &side in &config.sides {
            info!("{} side {side}: {} replicas", config.experiment, config.replicas);
            let values = pool.install(|| sample_side(config, side))?;
            rows.extend(values.iter().enumerate().map(|(r, &value)| SampleRow {
                experiment: config.experiment.name().to_string(),
                dim: config.dim,
                param: config.param,
                side,
                replica: r as u64,
                value,
            }));
            if values.len() >= 2 {
                sides.push(SideSummary {
                    side,
                    summary: summarize(&values)?,
                });
            }
            per_side.push((side, values));
        }

        let bytes = encode_samples(&rows);
        let path = dir.join(SAMPLES_FILE);
        write_file(&path, &bytes)?;
        samples_sha256 = Some(sha256_hex(&bytes));
        outputs.insert("samples".to_string(), path);

        let summary = SummaryFile {
            experiment: config.experiment.name().to_string(),
            dim: config.dim,
            param: config.param,
            sides,
        };
        let path = dir.join(SUMMARY_FILE);
        write_json(&path, &summary)?;
        outputs.insert("summary".to_string(), path);

        if let Some(sign) = config.experiment.expansion_sign() {
            if summary.sides.len() >= config.dim + 2 {
                match fit_summary(&summary, config.dim, sign) {
                    Ok(fit) => {
                        let path = dir.join(FIT_FILE);
                        write_json(&path, &fit)?;
                        outputs.insert("fit".to_string(), path);
                    }
                    Err(e) => warn!("expansion fit skipped: {e}"),
                }
            }
        }

        if config.experiment == Experiment::Clt {
            let exponent = config.dim as f64 / 2.0;
            let reports = per_side
                .iter()
                .map(|(side, values)| Ok(clt_check(values, *side, exponent)?))
                .collect::<CliResult<Vec<NormalityReport>>>()?;
            let path = dir.join(CLT_FILE);
            write_json(&path, &reports)?;
            outputs.insert("clt".to_string(), path);
        }

        if config.experiment == Experiment::Tail {
            let tails: Vec<TailSide> = per_side
                .iter()
                .map(|(side, values)| {
                    let survival = survival_curve(values, &config.thresholds);
                    let (fit, fit_error) = match tail_decay_rate(&survival) {
                        Ok(f) => (Some(f), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    TailSide {
                        side: *side,
                        survival,
                        fit,
                        fit_error,
                    }
                })
                .collect();
            let path = dir.join(TAIL_FILE);
            write_json(&path, &tails)?;
            outputs.insert("tail".to_string(), path);
        }
    }

    let manifest_path = dir.join(MANIFEST_FILE);
    outputs.insert("manifest".to_string(), manifest_path.clone());
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
        samples_sha256,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_forms() {
        assert_eq!(parse_exponent("1").unwrap(), 1.0);
        assert_eq!(parse_exponent("3/2").unwrap(), 1.5);
        assert_eq!(parse_exponent(" 0.5 ").unwrap(), 0.5);
        assert!(parse_exponent("d/2").is_err());
        assert!(parse_exponent("1/0").is_err());
        assert!(parse_exponent("-1").is_err());
    }

    #[test]
    fn csv_encoding_is_plain() {
        let rows = vec![SampleRow {
            experiment: "kappa".into(),
            dim: 2,
            param: 0.5,
            side: 4.0,
            replica: 0,
            value: 0.1875,
        }];
        let text = String::from_utf8(encode_samples(&rows)).unwrap();
        assert_eq!(text, "experiment,dim,param,side,replica,value\nkappa,2,0.5,4.0,0,0.1875\n");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
