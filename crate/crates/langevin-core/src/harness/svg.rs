//! Hand-rolled SVG plots. Presentation only: nothing downstream parses these.

/// One polyline.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#d68910", "#34495e"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if log && !(v > 0.0) {
                continue;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = if log { 0.1 } else { 0.0 };
            hi = 1.0;
        }
        if lo == hi {
            if log {
                lo /= 2.0;
                hi *= 2.0;
            } else {
                lo -= 0.5;
                hi += 0.5;
            }
        }
        Axis { lo, hi, log }
    }

    fn t(&self, v: f64) -> Option<f64> {
        if self.log {
            if !(v > 0.0) {
                return None;
            }
            Some((v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln()))
        } else {
            Some((v - self.lo) / (self.hi - self.lo))
        }
    }

    /// Tick positions: decades when logarithmic, five even stops otherwise.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let lo = self.lo.log10().ceil() as i32;
            let hi = self.hi.log10().floor() as i32;
            if lo > hi {
                return vec![self.lo, self.hi];
            }
            let mut t: Vec<f64> = (lo..=hi).map(|e| 10f64.powi(e)).collect();
            if t.len() == 1 {
                t = vec![self.lo, t[0], self.hi];
            }
            t
        } else {
            (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
        }
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Multi-series line plot with optional log axes and a legend.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    log_x: bool,
    log_y: bool,
) -> String {
    let xs = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), log_x);
    let ys = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log_y);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |t: f64| MARGIN_L + t * pw;
    let py = |t: f64| MARGIN_T + (1.0 - t) * ph;

    let mut svg = header(title);
    svg.push_str(&frame_and_labels(xlabel, ylabel));

    for v in xs.ticks() {
        if let Some(t) = xs.t(v) {
            let x = px(t);
            svg.push_str(&format!(
                "<line x1='{x:.1}' y1='{:.1}' x2='{x:.1}' y2='{:.1}' stroke='#ccc'/>\n\
                 <text x='{x:.1}' y='{:.1}' text-anchor='middle' font-size='11'>{}</text>\n",
                MARGIN_T,
                MARGIN_T + ph,
                MARGIN_T + ph + 16.0,
                tick_label(v)
            ));
        }
    }
    for v in ys.ticks() {
        if let Some(t) = ys.t(v) {
            let y = py(t);
            svg.push_str(&format!(
                "<line x1='{:.1}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='#ccc'/>\n\
                 <text x='{:.1}' y='{:.1}' text-anchor='end' font-size='11'>{}</text>\n",
                MARGIN_L,
                MARGIN_L + pw,
                MARGIN_L - 6.0,
                y + 4.0,
                tick_label(v)
            ));
        }
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(x, y)| match (xs.t(x), ys.t(y)) {
                (Some(tx), Some(ty)) => Some(format!("{:.1},{:.1}", px(tx), py(ty))),
                _ => None,
            })
            .collect();
        if pts.len() >= 2 {
            svg.push_str(&format!(
                "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.8'/>\n",
                pts.join(" ")
            ));
        }
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted pair");
            svg.push_str(&format!("<circle cx='{x}' cy='{y}' r='2.4' fill='{color}'/>\n"));
        }
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1='{:.1}' y1='{ly:.1}' x2='{:.1}' y2='{ly:.1}' stroke='{color}' stroke-width='2'/>\n\
             <text x='{:.1}' y='{:.1}' font-size='12'>{}</text>\n",
            MARGIN_L + pw + 10.0,
            MARGIN_L + pw + 34.0,
            MARGIN_L + pw + 40.0,
            ly + 4.0,
            esc(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Quartile box plot with whiskers at the data range.
pub fn box_plot(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let ys = Axis::fit(groups.iter().flat_map(|(_, v)| v.iter().copied()), false);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let py = |v: f64| MARGIN_T + (1.0 - ys.t(v).unwrap_or(0.0)) * ph;

    let mut svg = header(title);
    svg.push_str(&frame_and_labels("", ""));
    for v in ys.ticks() {
        let y = py(v);
        svg.push_str(&format!(
            "<line x1='{:.1}' y1='{y:.1}' x2='{:.1}' y2='{y:.1}' stroke='#ccc'/>\n\
             <text x='{:.1}' y='{:.1}' text-anchor='end' font-size='11'>{}</text>\n",
            MARGIN_L,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y + 4.0,
            tick_label(v)
        ));
    }

    let slot = pw / groups.len() as f64;
    for (i, (name, values)) in groups.iter().enumerate() {
        let mut v = values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            let t = p * (v.len() - 1) as f64;
            let j = t.floor() as usize;
            let f = t - j as f64;
            if j + 1 < v.len() {
                v[j] * (1.0 - f) + v[j + 1] * f
            } else {
                v[j]
            }
        };
        let (lo, q1, med, q3, hi) = (v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]);
        let cx = MARGIN_L + slot * (i as f64 + 0.5);
        let bw = (slot * 0.5).min(48.0);
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&format!(
            "<line x1='{cx:.1}' y1='{:.1}' x2='{cx:.1}' y2='{:.1}' stroke='{color}'/>\n",
            py(lo),
            py(hi)
        ));
        svg.push_str(&format!(
            "<rect x='{:.1}' y='{:.1}' width='{bw:.1}' height='{:.1}' fill='{color}' fill-opacity='0.25' stroke='{color}'/>\n",
            cx - bw / 2.0,
            py(q3),
            (py(q1) - py(q3)).max(0.5)
        ));
        svg.push_str(&format!(
            "<line x1='{:.1}' y1='{:.1}' x2='{:.1}' y2='{:.1}' stroke='{color}' stroke-width='2'/>\n",
            cx - bw / 2.0,
            py(med),
            cx + bw / 2.0,
            py(med)
        ));
        svg.push_str(&format!(
            "<text x='{cx:.1}' y='{:.1}' text-anchor='middle' font-size='11'>{}</text>\n",
            MARGIN_T + ph + 16.0,
            esc(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{HEIGHT}' \
         viewBox='0 0 {WIDTH} {HEIGHT}' font-family='sans-serif'>\n\
         <rect width='100%' height='100%' fill='white'/>\n\
         <text x='{:.1}' y='22' font-size='14' font-weight='bold'>{}</text>\n",
        MARGIN_L,
        esc(title)
    )
}

fn frame_and_labels(xlabel: &str, ylabel: &str) -> String {
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let mut s = format!(
        "<rect x='{MARGIN_L}' y='{MARGIN_T}' width='{pw}' height='{ph}' fill='none' stroke='#333'/>\n"
    );
    if !xlabel.is_empty() {
        s.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' text-anchor='middle' font-size='12'>{}</text>\n",
            MARGIN_L + pw / 2.0,
            HEIGHT - 12.0,
            esc(xlabel)
        ));
    }
    if !ylabel.is_empty() {
        s.push_str(&format!(
            "<text x='16' y='{:.1}' text-anchor='middle' font-size='12' transform='rotate(-90 16 {:.1})'>{}</text>\n",
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            esc(ylabel)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_valid_svg_with_all_series() {
        let series = vec![
            Series { name: "a".into(), points: vec![(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)] },
            Series { name: "b<c>".into(), points: vec![(1.0, 2.0), (100.0, 0.5)] },
        ];
        let svg = line_plot("t", "x", "y", &series, true, true);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c&gt;"));
    }

    #[test]
    fn log_axis_drops_nonpositive_points() {
        let series =
            vec![Series { name: "a".into(), points: vec![(1.0, 0.0), (10.0, 1.0), (100.0, 2.0)] }];
        let svg = line_plot("t", "x", "y", &series, true, true);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn box_plot_handles_single_value_groups() {
        let svg = box_plot("t", &[("g".into(), vec![1.0]), ("h".into(), vec![1.0, 2.0, 3.0])]);
        assert!(svg.contains("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 1 + 2); // background, frame, two boxes
    }
}
