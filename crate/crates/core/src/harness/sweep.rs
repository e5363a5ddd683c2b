use std::path::Path;

use serde::Deserialize;

use super::config::{ExperimentConfig, PolicySpec};
use super::corpus::Sample;
use super::experiment::{run_on_corpus, ExperimentReport};
use super::HarnessError;
use crate::params::LATENCY_LADDER;

/// Axes of a sweep. Every present axis is crossed with every other; `range`
/// pairs `L` and `U` and is crossed as one axis.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub delta: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    #[serde(alias = "L")]
    pub pre_read: Option<Vec<usize>>,
    #[serde(alias = "U")]
    pub autonomy: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub range: Option<Vec<(usize, usize)>>,
    /// Shorthand for `range` set to the four-rung latency ladder.
    #[serde(default)]
    pub ladder: bool,
}

/// Overrides for one grid point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridPoint {
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub pre_read: Option<usize>,
    pub autonomy: Option<usize>,
    pub k: Option<usize>,
}

impl Grid {
    pub fn ladder() -> Self {
        Self {
            ladder: true,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn points(&self) -> Result<Vec<GridPoint>, HarnessError> {
        let range = match (&self.range, self.ladder) {
            (Some(_), true) => return Err(HarnessError::Config("give either range or ladder, not both".into())),
            (Some(r), false) => Some(r.clone()),
            (None, true) => Some(LATENCY_LADDER.to_vec()),
            (None, false) => None,
        };
        let axes_present = [
            range.is_some(),
            self.pre_read.is_some(),
            self.autonomy.is_some(),
            self.delta.is_some(),
            self.alpha.is_some(),
            self.k.is_some(),
        ];
        if !axes_present.iter().any(|p| *p) {
            return Err(HarnessError::EmptyGrid);
        }

        let mut points = vec![GridPoint::default()];
        fn cross<T: Copy>(
            points: Vec<GridPoint>,
            axis: &Option<Vec<T>>,
            set: impl Fn(&mut GridPoint, T),
        ) -> Vec<GridPoint> {
            match axis {
                None => points,
                Some(values) => points
                    .iter()
                    .flat_map(|p| {
                        values.iter().map(|&v| {
                            let mut q = *p;
                            set(&mut q, v);
                            q
                        })
                    })
                    .collect(),
            }
        }
        points = cross(points, &range, |p, (l, u)| {
            p.pre_read = Some(l);
            p.autonomy = Some(u);
        });
        points = cross(points, &self.pre_read, |p, v| p.pre_read = Some(v));
        points = cross(points, &self.autonomy, |p, v| p.autonomy = Some(v));
        points = cross(points, &self.delta, |p, v| p.delta = Some(v));
        points = cross(points, &self.alpha, |p, v| p.alpha = Some(v));
        points = cross(points, &self.k, |p, v| p.k = Some(v));
        if points.is_empty() {
            return Err(HarnessError::EmptyGrid);
        }
        Ok(points)
    }
}

impl GridPoint {
    pub fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig, HarnessError> {
        let mut c = base.clone();
        c.report = None;
        if let Some(v) = self.delta {
            c.hp.delta = v;
        }
        if let Some(v) = self.alpha {
            c.hp.alpha = v;
        }
        if let Some(v) = self.pre_read {
            c.hp.pre_read = v;
        }
        if let Some(v) = self.autonomy {
            c.hp.autonomy = v;
        }
        if let Some(v) = self.k {
            c.hp.k = v;
        }
        c.hp.validate()?;
        Ok(c)
    }
}

/// One configuration and its corpus-level results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: PolicySpec,
    pub delta: f64,
    pub alpha: f64,
    pub pre_read: usize,
    pub autonomy: usize,
    pub k: usize,
    pub n_ok: usize,
    pub n_err: usize,
    pub mean_al: Option<f64>,
    pub mean_al_ca: Option<f64>,
    pub bleu: Option<f64>,
    pub wer: Option<f64>,
    pub sufficiency: Option<f64>,
}

impl SweepRow {
    pub fn from_report(report: &ExperimentReport) -> Self {
        let hp = &report.config.hp;
        let a = &report.aggregate;
        Self {
            policy: report.config.policy,
            delta: hp.delta,
            alpha: hp.alpha,
            pre_read: hp.pre_read,
            autonomy: hp.autonomy,
            k: hp.k,
            n_ok: a.n_ok,
            n_err: a.n_err,
            mean_al: a.mean_al,
            mean_al_ca: a.mean_al_ca,
            bleu: a.bleu,
            wer: a.wer,
            sufficiency: a.sufficiency,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

const HEADER: &str = "policy\tdelta\talpha\tL\tU\tk\tn_ok\tn_err\tmean_al\tmean_al_ca\tbleu\twer\tsufficiency";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl SweepTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.rows {
            let policy = match r.policy {
                PolicySpec::Lsg => "lsg",
                PolicySpec::WaitK => "waitk",
                PolicySpec::Offline => "offline",
            };
            out.push_str(&format!(
                "{policy}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.delta,
                r.alpha,
                r.pre_read,
                r.autonomy,
                r.k,
                r.n_ok,
                r.n_err,
                opt(r.mean_al),
                opt(r.mean_al_ca),
                opt(r.bleu),
                opt(r.wer),
                opt(r.sufficiency),
            ));
        }
        out
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.n_err > 0)
    }
}

/// Runs `base` once per grid point over `samples`.
pub fn sweep(base: &ExperimentConfig, grid: &Grid, samples: &[Sample]) -> Result<SweepTable, HarnessError> {
    let points = grid.points()?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let config = p.apply(base)?;
        rows.push(SweepRow::from_report(&run_on_corpus(&config, samples)?));
    }
    Ok(SweepTable { rows })
}
