use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Metric, MetricReport};
use crate::pipeline::{PointOutcome, SweepResult};
use crate::{Error, Result};

/// One sweep fraction; reports are `None` where the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub sp_model: Option<MetricReport>,
    pub full_model: Option<MetricReport>,
    pub full_model_on_sp: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub sp: String,
    /// Strictly increasing fractions, starting at 0.
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn baseline(&self) -> &CurvePoint {
        &self.points[0]
    }
}

/// One curve per swept subpopulation, points sorted by fraction.
pub fn build_curves(sweep: &SweepResult) -> Result<Vec<Curve>> {
    if sweep.points.is_empty() {
        return Err(Error::Pipeline("sweep has no points".into()));
    }
    let mut curves = Vec::new();
    for sp in &sweep.targets {
        let mut points: Vec<CurvePoint> = sweep
            .points_for(sp)
            .map(|p| match &p.outcome {
                PointOutcome::Completed {
                    sp_model,
                    full_model,
                    full_model_on_sp,
                } => CurvePoint {
                    fraction: p.fraction,
                    sp_model: Some(*sp_model),
                    full_model: Some(*full_model),
                    full_model_on_sp: Some(*full_model_on_sp),
                },
                PointOutcome::Failed { .. } => CurvePoint {
                    fraction: p.fraction,
                    sp_model: None,
                    full_model: None,
                    full_model_on_sp: None,
                },
            })
            .collect();
        points.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
        if points.first().is_none_or(|p| p.fraction != 0.0) {
            return Err(Error::Pipeline(format!("sweep for `{sp}` has no 0-fraction point")));
        }
        if points.windows(2).any(|w| w[0].fraction >= w[1].fraction) {
            return Err(Error::Pipeline(format!("sweep for `{sp}` repeats a fraction")));
        }
        curves.push(Curve { sp: sp.clone(), points });
    }
    Ok(curves)
}

/// Long-format export: `sp,fraction,model_scope,metric,value`. Failed
/// points and undefined metrics leave `value` empty.
pub fn write_curves_csv<W: Write>(curves: &[Curve], metrics: &[Metric], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Pipeline(format!("cannot write curves: {e}"));
    w.write_record(["sp", "fraction", "model_scope", "metric", "value"]).map_err(io)?;
    for c in curves {
        for p in &c.points {
            let scopes = [
                ("sp_model", &p.sp_model),
                ("full_population", &p.full_model),
                ("full_population_on_sp", &p.full_model_on_sp),
            ];
            for (scope, report) in scopes {
                for &m in metrics {
                    let value = report.and_then(|r| r.get(m)).map(|v| v.to_string()).unwrap_or_default();
                    w.write_record([c.sp.as_str(), &p.fraction.to_string(), scope, m.name(), &value])
                        .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Pipeline(format!("cannot write curves: {e}")))?;
    Ok(())
}
