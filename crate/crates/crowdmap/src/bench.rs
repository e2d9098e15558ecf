//! Seeded localization benchmark over synthetic scenes.
//!
//! Trial `i` uses seed `seed + i` for both the scene and the KMeans
//! initialization, so serial and parallel runs produce identical rows.

use std::collections::BTreeMap;
use std::io::Write;

use crowdmap_core::eval::{counting_metrics, match_and_ap, EvalConfig};
use crowdmap_core::gtgen::{synth_scene, SceneConfig};
use crowdmap_core::localize::{
    build_point_set, global_cluster_count, isolated_kmeans, kmeans, DbscanParams, KMeansParams,
    LocalizationResult,
};
use crowdmap_core::{DensityMap, ExpansionFactor};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    KMeans,
    Isolated,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Isolated => "isolated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Method::KMeans),
            "isolated" => Ok(Method::Isolated),
            other => Err(Error::Usage(format!("unknown method `{other}` (expected kmeans or isolated)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Scene template; its seed is replaced per trial.
    pub scene: SceneConfig,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub expansion: ExpansionFactor,
    pub dbscan: DbscanParams,
    pub kmeans: KMeansParams,
    pub eval: EvalConfig,
}

/// One method on one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub n_gt: usize,
    pub k: usize,
    pub ap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub ap: BTreeMap<String, f64>,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub trials: usize,
    pub seed: u64,
    pub methods: BTreeMap<String, MethodSummary>,
}

/// Formats a window size as a report key (`10.0 -> "10"`).
pub fn delta_key(delta: f64) -> String {
    if delta.fract() == 0.0 {
        format!("{}", delta as i64)
    } else {
        format!("{delta}")
    }
}

/// Runs one localizer on a map. Plain KMeans caps `K` at the number of
/// distinct points so it can always run.
pub fn localize(
    method: Method,
    map: &DensityMap,
    expansion: ExpansionFactor,
    dbscan: &DbscanParams,
    kmeans_params: &KMeansParams,
) -> Result<LocalizationResult> {
    Ok(match method {
        Method::KMeans => {
            let pts = build_point_set(map, expansion);
            let k = global_cluster_count(map).min(pts.len());
            kmeans(&pts, k, kmeans_params)?
        }
        Method::Isolated => isolated_kmeans(map, expansion, dbscan, kmeans_params)?,
    })
}

fn run_trial(cfg: &BenchConfig, trial: usize) -> Result<Vec<TrialRow>> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let scene = synth_scene(&SceneConfig { seed, ..cfg.scene.clone() })?;
    cfg.methods
        .iter()
        .map(|&method| {
            let kp = KMeansParams { seed, ..cfg.kmeans };
            let result = localize(method, &scene.noisy, cfg.expansion, &cfg.dbscan, &kp)?;
            let reports = match_and_ap(&result, &scene.annotations, &cfg.eval)?;
            Ok(TrialRow {
                trial,
                seed,
                method,
                n_gt: scene.annotations.len(),
                k: result.k(),
                ap: reports.iter().map(|r| r.ap).collect(),
            })
        })
        .collect()
}

/// Runs every trial (in parallel) and returns rows in trial order.
pub fn run_trials(cfg: &BenchConfig) -> Result<Vec<TrialRow>> {
    if cfg.trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Usage("at least one method is required".into()));
    }
    cfg.eval.validate()?;
    let per_trial: Vec<Vec<TrialRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn summarize(cfg: &BenchConfig, rows: &[TrialRow]) -> Result<BenchReport> {
    let mut methods = BTreeMap::new();
    for &m in &cfg.methods {
        let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.method == m).collect();
        let n = mine.len() as f64;
        let ap = cfg
            .eval
            .deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| (delta_key(d), mine.iter().map(|r| r.ap[i]).sum::<f64>() / n))
            .collect();
        let pairs: Vec<(f64, f64)> = mine.iter().map(|r| (r.k as f64, r.n_gt as f64)).collect();
        let counts = counting_metrics(&pairs)?;
        methods.insert(
            m.name().to_string(),
            MethodSummary {
                ap,
                mae: counts.mae,
                rmse: counts.rmse,
            },
        );
    }
    Ok(BenchReport {
        trials: cfg.trials,
        seed: cfg.seed,
        methods,
    })
}

pub fn write_csv<W: Write>(cfg: &BenchConfig, rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial".to_string(), "seed".into(), "method".into(), "n_gt".into(), "k".into()];
    header.extend(cfg.eval.deltas.iter().map(|&d| format!("ap@{}", delta_key(d))));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.method.name().to_string(),
            r.n_gt.to_string(),
            r.k.to_string(),
        ];
        rec.extend(r.ap.iter().map(|a| a.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
