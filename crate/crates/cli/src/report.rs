//! Run artifacts: trace CSV, summary JSON and the convergence chart.

use std::fmt::Write as _;

use maml_lqr::engine::MamlResult;
use maml_lqr::matrix::vec;
use serde::Serialize;

pub fn trace_header(mn: usize) -> String {
    let mut cols = vec![
        "iter",
        "F",
        "grad_F_fro",
        "eta",
        "beta",
        "rad_max_task",
        "rad_max_inner",
        "descent_slack",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend((1..=mn).map(|k| format!("w_{k}")));
    cols.join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per recorded iterate, `W` flattened column by column.
pub fn trace_csv(result: &MamlResult) -> String {
    let mn = result.w_final.len();
    let mut out = trace_header(mn);
    out.push('\n');
    for r in &result.trace {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.f,
            r.grad_f_fro,
            r.eta,
            opt(r.beta),
            r.rad_max_task,
            r.rad_max_inner,
            opt(r.descent_slack)
        );
        for w in vec(&r.w).iter() {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub w0: Vec<Vec<f64>>,
    pub w_final: Vec<Vec<f64>>,
    #[serde(rename = "F_final")]
    pub f_final: f64,
    pub final_grad_norm: f64,
    pub eta_final: f64,
    pub reached_epsilon: bool,
    pub iterations_used: usize,
    pub total_halvings: usize,
    pub oracle_distance: Option<f64>,
    pub oracle_eta: Option<f64>,
    pub generated_at: String,
}

/// Log-scale chart of `F` and `‖∇F‖_F` against iteration.
pub fn convergence_svg(result: &MamlResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let series: [Vec<f64>; 2] = [
        result.trace.iter().map(|r| r.f).collect(),
        result.trace.iter().map(|r| r.grad_f_fro).collect(),
    ];
    let logs: Vec<Vec<f64>> = series
        .iter()
        .map(|s| s.iter().map(|v| v.max(1e-300).log10()).collect())
        .collect();
    let (mut lo, mut hi) = logs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let last = result.trace.len().saturating_sub(1).max(1) as f64;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / last;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">iteration</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">log10 value</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{lo:.2}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{hi:.2}</text>"#, PAD - 4.0, PAD + 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, W - PAD, H - PAD + 14.0, last as usize);
    for (k, (vals, (color, name))) in logs
        .iter()
        .zip([("steelblue", "F"), ("darkorange", "grad_F_fro")])
        .enumerate()
    {
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            W - PAD - 80.0,
            PAD + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
