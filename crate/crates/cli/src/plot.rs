//! Static SVG tracking plot.

use std::path::Path;

use plotters::prelude::*;
use ptpb_core::SimResult;

use crate::Failure;

type Series = (Vec<(f64, f64)>, RGBColor);

fn draw_err<E: std::fmt::Debug>(e: E) -> Failure {
    Failure::Io(format!("plot: {e:?}"))
}

/// One panel per joint with `q` and `q_r` in degrees, then `|e|` in degrees; the dashed
/// vertical line marks `t0 + T`.
pub fn tracking_svg(path: &Path, r: &SimResult, settle: f64) -> Result<(), Failure> {
    let n = r.dim();
    let s = &r.samples;
    if s.is_empty() {
        return Ok(());
    }
    let (t_lo, t_hi) = (s[0].t, s[s.len() - 1].t.max(s[0].t + 1e-9));
    let root = SVGBackend::new(path, (900, 260 * (n as u32 + 1))).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let panels = root.split_evenly((n + 1, 1));
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    for (j, area) in panels.iter().enumerate() {
        let (title, series): (String, Vec<Series>) = if j < n {
            (
                format!("joint {}: q and q_r (deg)", j + 1),
                vec![
                    (s.iter().map(|x| (x.t, x.q[j].to_degrees())).collect(), BLUE),
                    (
                        s.iter().map(|x| (x.t, x.q_ref[j].to_degrees())).collect(),
                        RED,
                    ),
                ],
            )
        } else {
            (
                "|e| (deg)".into(),
                vec![(
                    s.iter().map(|x| (x.t, x.e.norm().to_degrees())).collect(),
                    BLACK,
                )],
            )
        };
        let (y_lo, y_hi) = span(&mut series.iter().flat_map(|(p, _)| p.iter().map(|x| x.1)));
        let mut chart = ChartBuilder::on(area)
            .caption(title, ("sans-serif", 16))
            .margin(8)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(t_lo..t_hi, y_lo..y_hi)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc("t (s)")
            .draw()
            .map_err(draw_err)?;
        for (points, color) in series {
            chart
                .draw_series(LineSeries::new(points, &color))
                .map_err(draw_err)?;
        }
        if (t_lo..=t_hi).contains(&settle) {
            chart
                .draw_series(DashedLineSeries::new(
                    vec![(settle, y_lo), (settle, y_hi)],
                    6,
                    4,
                    GREEN.into(),
                ))
                .map_err(draw_err)?;
        }
    }
    root.present().map_err(draw_err)
}
