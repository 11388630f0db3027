//! Static SVG charts. Every renderer is a pure function of its input, so
//! the same artifact always produces the same bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use steelfault::explain::{Breakdown, Profile, ProfileKind};
use steelfault::schema::{FaultLabel, Row, Steel, FEATURE_NAMES, N_CLASSES, STEEL_FEATURE};
use steelfault::ConfusionMatrix;

/// One fixed stroke color per fault class, in report order.
pub const CLASS_COLORS: [&str; N_CLASSES] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#b5a100",
];

const POSITIVE_BAR: &str = "#4e79c4";
const NEGATIVE_BAR: &str = "#c44e4e";

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"Helvetica, Arial, sans-serif\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n"
    );
}

fn text(out: &mut String, x: f64, y: f64, size: u32, anchor: &str, fill: &str, body: &str) {
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"{size}\" text-anchor=\"{anchor}\" \
         fill=\"{fill}\">{}</text>\n",
        px(x),
        px(y),
        esc(body)
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
    let _ = write!(
        out,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" \
         stroke-width=\"{width}\"/>\n",
        px(x1),
        px(y1),
        px(x2),
        px(y2)
    );
}

fn legend(out: &mut String, x: f64, mut y: f64) {
    for (c, &label) in FaultLabel::ALL.iter().enumerate() {
        line(out, x, y - 4.0, x + 18.0, y - 4.0, CLASS_COLORS[c], 2.5);
        text(out, x + 24.0, y, 11, "start", "#333333", label.name());
        y += 20.0;
    }
}

/// Per-class probability curves over the profile grid with a rug of the
/// observed feature values along the horizontal axis.
pub fn profile_svg(profile: &Profile, title: &str) -> String {
    let (w, h) = (660.0, 420.0);
    let (x0, y0, pw, ph) = (60.0, 40.0, 440.0, 300.0);
    let y_axis = y0 + ph;
    let mut out = String::new();
    header(&mut out, w, h);
    text(&mut out, x0, 24.0, 13, "start", "#111111", title);

    let lo = *profile.grid.first().expect("non-empty grid");
    let hi = *profile.grid.last().expect("non-empty grid");
    let span = hi - lo;
    let x_of = |v: f64| {
        if span > 0.0 {
            x0 + (v - lo) / span * pw
        } else {
            x0 + pw / 2.0
        }
    };
    let y_of = |p: f64| y0 + (1.0 - p) * ph;

    for i in 0..=4 {
        let p = i as f64 * 0.25;
        let y = y_of(p);
        line(&mut out, x0 - 4.0, y, x0, y, "#333333", 1.0);
        line(&mut out, x0, y, x0 + pw, y, "#eeeeee", 1.0);
        text(&mut out, x0 - 8.0, y + 3.5, 10, "end", "#333333", &tick(p));
    }
    line(&mut out, x0, y0, x0, y_axis, "#333333", 1.0);
    line(&mut out, x0, y_axis, x0 + pw, y_axis, "#333333", 1.0);

    let mut rug_x = BTreeSet::new();
    for &v in &profile.rug {
        if v >= lo && v <= hi || span == 0.0 {
            rug_x.insert(px(x_of(v)));
        }
    }
    for x in &rug_x {
        let _ = write!(
            out,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#888888\" \
             stroke-width=\"1\" stroke-opacity=\"0.35\"/>\n",
            px(y_axis + 2.0),
            px(y_axis + 9.0)
        );
    }

    match profile.level_names() {
        Some(levels) => {
            for (&g, name) in profile.grid.iter().zip(&levels) {
                text(&mut out, x_of(g), y_axis + 24.0, 10, "middle", "#333333", name);
            }
        }
        None => {
            text(&mut out, x0, y_axis + 24.0, 10, "middle", "#333333", &tick(lo));
            if span > 0.0 {
                let mid = lo + span / 2.0;
                text(&mut out, x0 + pw / 2.0, y_axis + 24.0, 10, "middle", "#333333", &tick(mid));
                text(&mut out, x0 + pw, y_axis + 24.0, 10, "middle", "#333333", &tick(hi));
            }
        }
    }

    for c in 0..N_CLASSES {
        let points: Vec<String> = if profile.grid.len() == 1 {
            let y = px(y_of(profile.values[0][c]));
            vec![format!("{},{y}", px(x0)), format!("{},{y}", px(x0 + pw))]
        } else {
            profile
                .grid
                .iter()
                .zip(&profile.values)
                .map(|(&g, v)| format!("{},{}", px(x_of(g)), px(y_of(v[c]))))
                .collect()
        };
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            points.join(" "),
            CLASS_COLORS[c]
        );
    }

    if let (Some(anchor), ProfileKind::Cp) = (&profile.anchor, profile.kind) {
        let x = x_of(anchor.values[profile.feature]);
        line(&mut out, x, y0, x, y_axis, "#999999", 1.0);
        text(&mut out, x, y0 - 6.0, 9, "middle", "#666666", "anchor");
    }

    legend(&mut out, 516.0, 64.0);
    text(&mut out, x0 + pw / 2.0, h - 8.0, 10, "middle", "#555555", FEATURE_NAMES[profile.feature]);
    out.push_str("</svg>\n");
    out
}

fn bd_value_label(feature: usize, value: f64) -> String {
    if feature == STEEL_FEATURE {
        format!("TypeOfSteel = {}", Steel::from_encoded(value).name())
    } else {
        format!("{} = {}", FEATURE_NAMES[feature], tick(value))
    }
}

/// Signed horizontal bars, one per contribution in replacement order;
/// positive and negative bars use distinct fills.
pub fn breakdown_svg(bd: &Breakdown) -> String {
    let rows = bd.contributions.len() + 2;
    let (row_h, top, label_w) = (22.0, 64.0, 280.0);
    let (axis_x, half) = (label_w + 210.0, 200.0);
    let w = axis_x + half + 30.0;
    let h = top + rows as f64 * row_h + 30.0;
    let mut out = String::new();
    header(&mut out, w, h);
    text(
        &mut out,
        16.0,
        26.0,
        13,
        "start",
        "#111111",
        &format!("Breakdown: {} at the {} medoid", bd.target.name(), bd.anchor.fault.name()),
    );
    text(
        &mut out,
        16.0,
        44.0,
        10,
        "start",
        "#555555",
        &format!(
            "intercept {} + contributions {} = prediction {}",
            tick(bd.intercept),
            tick(bd.final_prediction - bd.intercept),
            tick(bd.final_prediction)
        ),
    );
    let max_abs = bd
        .contributions
        .iter()
        .map(|c| c.contribution.abs())
        .fold(0.0f64, f64::max);
    let scale = if max_abs > 0.0 { half / max_abs } else { 0.0 };

    let mut y = top;
    text(&mut out, label_w - 10.0, y + 15.0, 11, "end", "#333333", "intercept");
    text(&mut out, axis_x + 6.0, y + 15.0, 11, "start", "#333333", &tick(bd.intercept));
    y += row_h;
    for c in &bd.contributions {
        let bar = c.contribution.abs() * scale;
        let (x, fill) = if c.contribution >= 0.0 {
            (axis_x, POSITIVE_BAR)
        } else {
            (axis_x - bar, NEGATIVE_BAR)
        };
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{:.3}\" height=\"14\" fill=\"{fill}\"/>\n",
            px(x),
            px(y + 4.0),
            bar
        );
        text(
            &mut out,
            label_w - 10.0,
            y + 15.0,
            11,
            "end",
            "#333333",
            &bd_value_label(c.feature, c.value),
        );
        let (vx, anchor) = if c.contribution >= 0.0 {
            (axis_x + bar + 6.0, "start")
        } else {
            (axis_x - bar - 6.0, "end")
        };
        text(&mut out, vx, y + 15.0, 10, anchor, "#333333", &format!("{:+.4}", c.contribution));
        y += row_h;
    }
    text(&mut out, label_w - 10.0, y + 15.0, 11, "end", "#333333", "prediction");
    text(&mut out, axis_x + 6.0, y + 15.0, 11, "start", "#333333", &tick(bd.final_prediction));
    line(&mut out, axis_x, top - 6.0, axis_x, y + row_h, "#333333", 1.0);
    out.push_str("</svg>\n");
    out
}

/// Closed polygon per class over the 26 feature axes; values must be
/// pre-scaled to [0, 1].
pub fn radar_svg(entries: &[(FaultLabel, Row)]) -> String {
    let (w, h) = (760.0, 700.0);
    let (cx, cy, r) = (330.0, 360.0, 240.0);
    let n = FEATURE_NAMES.len();
    let point = |axis: usize, v: f64| -> (f64, f64) {
        let angle = -std::f64::consts::FRAC_PI_2
            + std::f64::consts::TAU * axis as f64 / n as f64;
        (cx + r * v * angle.cos(), cy + r * v * angle.sin())
    };
    let mut out = String::new();
    header(&mut out, w, h);
    text(&mut out, 16.0, 26.0, 13, "start", "#111111", "Medoid radar (scaled 0 to 1)");
    for ring in 1..=4 {
        let f = ring as f64 * 0.25;
        let pts: Vec<String> = (0..n)
            .map(|a| {
                let (x, y) = point(a, f);
                format!("{},{}", px(x), px(y))
            })
            .collect();
        let _ = write!(
            out,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            pts.join(" ")
        );
    }
    for a in 0..n {
        let (x, y) = point(a, 1.0);
        line(&mut out, cx, cy, x, y, "#eeeeee", 1.0);
        let (lx, ly) = point(a, 1.13);
        let anchor = if lx < cx - 1.0 {
            "end"
        } else if lx > cx + 1.0 {
            "start"
        } else {
            "middle"
        };
        text(&mut out, lx, ly + 3.0, 9, anchor, "#555555", FEATURE_NAMES[a]);
    }
    for (label, values) in entries {
        let c = label.index();
        let pts: Vec<String> = (0..n)
            .map(|a| {
                let (x, y) = point(a, values[a].clamp(0.0, 1.0));
                format!("{},{}", px(x), px(y))
            })
            .collect();
        let _ = write!(
            out,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.08\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            color = CLASS_COLORS[c]
        );
    }
    legend(&mut out, 620.0, 64.0);
    out.push_str("</svg>\n");
    out
}

/// Annotated 7x7 grid; cell shading scales with count.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str) -> String {
    let cell = 56.0;
    let (left, top) = (120.0, 96.0);
    let w = left + N_CLASSES as f64 * cell + 24.0;
    let h = top + N_CLASSES as f64 * cell + 56.0;
    let mut out = String::new();
    header(&mut out, w, h);
    text(&mut out, 16.0, 26.0, 13, "start", "#111111", title);
    let max = cm
        .counts
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    for (j, &label) in FaultLabel::ALL.iter().enumerate() {
        let x = left + (j as f64 + 0.5) * cell;
        let _ = write!(
            out,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"start\" fill=\"#333333\" \
             transform=\"rotate(-40 {x} {y})\">{name}</text>\n",
            x = px(x),
            y = px(top - 8.0),
            name = esc(label.name())
        );
        text(
            &mut out,
            left - 10.0,
            top + (j as f64 + 0.5) * cell + 4.0,
            10,
            "end",
            "#333333",
            label.name(),
        );
    }
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let x = left + j as f64 * cell;
            let y = top + i as f64 * cell;
            let opacity = count as f64 / max;
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"#4e79a7\" \
                 fill-opacity=\"{:.3}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
                px(x),
                px(y),
                opacity
            );
            let text_fill = if opacity > 0.55 { "#ffffff" } else { "#222222" };
            text(
                &mut out,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                11,
                "middle",
                text_fill,
                &count.to_string(),
            );
        }
    }
    text(&mut out, 16.0, top + 3.5 * cell, 10, "start", "#555555", "truth");
    text(
        &mut out,
        left + 3.5 * cell,
        h - 36.0,
        10,
        "middle",
        "#555555",
        "predicted",
    );
    text(
        &mut out,
        left + 3.5 * cell,
        h - 16.0,
        11,
        "middle",
        "#111111",
        &format!("accuracy {:.4}", cm.accuracy()),
    );
    out.push_str("</svg>\n");
    out
}
