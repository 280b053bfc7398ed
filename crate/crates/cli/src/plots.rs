use std::collections::BTreeMap;

use plotters::prelude::*;
use subpop_core::evaluation::{Metric, MetricReport};
use subpop_core::pipeline::{PointOutcome, SweepResult};

use crate::report::percent;

const SIZE: (u32, u32) = (900, 500);

/// Contiguous runs of defined values, so failed points show as gaps.
fn runs(values: &[Option<f64>]) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for (i, v) in values.iter().enumerate() {
        match v {
            Some(v) => out.last_mut().unwrap().push((i as f64, *v)),
            None => out.push(Vec::new()),
        }
    }
    out.into_iter().filter(|r| !r.is_empty()).collect()
}

/// Metric against synthetic amount for one subpopulation: its own model and
/// the full-population model, one x position per swept fraction.
pub fn plot_curve(sweep: &SweepResult, sp: &str, metric: Metric) -> String {
    let fractions = &sweep.fractions;
    let series = |f: fn(&PointOutcome) -> Option<&MetricReport>| -> Vec<Option<f64>> {
        fractions
            .iter()
            .map(|&x| sweep.point(sp, x).and_then(|p| f(&p.outcome)).and_then(|r| r.get(metric)))
            .collect()
    };
    let sp_model = series(|o| match o {
        PointOutcome::Completed { sp_model, .. } => Some(sp_model),
        PointOutcome::Failed { .. } => None,
    });
    let full = series(|o| match o {
        PointOutcome::Completed { full_model, .. } => Some(full_model),
        PointOutcome::Failed { .. } => None,
    });
    let full_on_sp = series(|o| match o {
        PointOutcome::Completed { full_model_on_sp, .. } => Some(full_model_on_sp),
        PointOutcome::Failed { .. } => None,
    });
    let all: Vec<f64> = sp_model.iter().chain(&full).chain(&full_on_sp).flatten().copied().collect();
    let lo = all.iter().copied().fold(1.0f64, f64::min);
    let hi = all.iter().copied().fold(0.0f64, f64::max);
    let (lo, hi) = if lo > hi { (0.0, 1.0) } else { ((lo - 0.05).max(0.0), (hi + 0.05).min(1.0)) };

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).unwrap();
        let n = fractions.len().max(1);
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{sp}: {metric} vs synthetic samples added"), ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(55)
            .build_cartesian_2d(-0.5f64..(n as f64 - 0.5), lo..hi)
            .unwrap();
        chart
            .configure_mesh()
            .x_labels(n)
            .x_label_formatter(&|x| {
                let i = x.round();
                if (x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < fractions.len() {
                    percent(fractions[i as usize])
                } else {
                    String::new()
                }
            })
            .x_desc("synthetic samples added (% of subpopulation training size)")
            .y_desc(metric.name())
            .draw()
            .unwrap();
        let styles: [(&str, &[Option<f64>], RGBColor); 3] = [
            ("subpopulation model", &sp_model, RGBColor(31, 119, 180)),
            ("full population (full test)", &full, RGBColor(214, 39, 40)),
            ("full population (subpopulation test)", &full_on_sp, RGBColor(44, 160, 44)),
        ];
        for (name, values, color) in styles {
            let mut first = true;
            for run in runs(values) {
                let s = chart.draw_series(LineSeries::new(run, color.stroke_width(2))).unwrap();
                if first {
                    s.label(name)
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
                    first = false;
                }
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerRight)
            .draw()
            .unwrap();
        root.present().unwrap();
    }
    svg
}

/// Bar chart of subpopulation sizes, largest first.
pub fn plot_sizes(sizes: &BTreeMap<String, usize>) -> String {
    let mut bars: Vec<(&String, usize)> = sizes.iter().map(|(k, v)| (k, *v)).collect();
    bars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let top = bars.first().map_or(1, |b| b.1).max(1) as f64 * 1.1;
    let names: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).unwrap();
        let n = bars.len().max(1);
        let mut chart = ChartBuilder::on(&root)
            .caption("Subpopulation sizes", ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(60)
            .build_cartesian_2d(-0.5f64..(n as f64 - 0.5), 0f64..top)
            .unwrap();
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(n)
            .x_label_formatter(&|x| {
                let i = x.round();
                if (x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < names.len() {
                    names[i as usize].clone()
                } else {
                    String::new()
                }
            })
            .y_desc("rows")
            .draw()
            .unwrap();
        chart
            .draw_series(bars.iter().enumerate().map(|(i, (_, v))| {
                let x = i as f64;
                Rectangle::new([(x - 0.35, 0.0), (x + 0.35, *v as f64)], RGBColor(31, 119, 180).filled())
            }))
            .unwrap();
        root.present().unwrap();
    }
    svg
}
