use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentReport;
use super::metrics::ClassificationReport;
use super::{EvalError, REPORT_VERSION};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |e| EvalError::Io(path.display().to_string(), e)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// Load a report, checking its version header.
pub fn load_report(path: &Path) -> Result<ExperimentReport, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| EvalError::Data(e.to_string()))?;
    let found = v.get("report_version").and_then(|x| x.as_str()).unwrap_or("");
    if found != REPORT_VERSION {
        return Err(EvalError::Data(format!(
            "{}: report version {found:?}, expected {REPORT_VERSION}",
            path.display()
        )));
    }
    serde_json::from_value(v).map_err(|e| EvalError::Data(e.to_string()))
}

/// Write `report.json` into `dir`.
pub fn write_report_json(report: &ExperimentReport, dir: &Path) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("report.json");
    write(&path, report.to_json().as_bytes())?;
    Ok(path)
}

fn per_class_rows(r: &ClassificationReport) -> Vec<Vec<String>> {
    r.per_class
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                format!("{:.6}", c.precision),
                format!("{:.6}", c.recall),
                format!("{:.6}", c.f1),
                c.support.to_string(),
            ]
        })
        .collect()
}

/// Render CSV tables and SVG plots for a report into `dir`. Returns the files written.
pub fn render_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<(), EvalError> {
        let p = dir.join(name);
        write(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    let blocks = [
        ("app_windows", &report.app_windows),
        ("activity", &report.activity),
        ("sessions", &report.sessions),
    ];
    for (name, block) in blocks {
        let Some(r) = block else { continue };
        let mut buf = Vec::new();
        r.confusion.write_csv(&mut buf).map_err(io_err(dir))?;
        emit(&format!("confusion_{name}.csv"), buf)?;
        emit(
            &format!("metrics_{name}.csv"),
            csv_bytes(&["class", "precision", "recall", "f1", "support"], &per_class_rows(r)),
        )?;
    }
    let fold_rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            vec![
                f.id.clone(),
                f.train_windows.to_string(),
                f.test_windows.to_string(),
                opt(f.app_accuracy),
                opt(f.app_weighted_f1),
                opt(f.activity_accuracy),
                opt(f.session_accuracy),
            ]
        })
        .collect();
    emit(
        "folds.csv",
        csv_bytes(
            &["fold", "train_windows", "test_windows", "app_accuracy", "app_weighted_f1", "activity_accuracy", "session_accuracy"],
            &fold_rows,
        ),
    )?;
    if let Some(r) = &report.app_windows {
        let labels: Vec<String> = r.per_class.iter().map(|c| c.label.clone()).collect();
        let f1: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
        emit("per_app_f1.svg", bar_chart("Per-app F1 (window level)", &labels, &f1).into_bytes())?;
    }
    if let Some(imp) = &report.importance {
        let n = imp.grid.n;
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| (0..n).map(|j| format!("{:.6}", imp.grid.cells[i * n + j])).collect())
            .collect();
        let header: Vec<String> = (0..n).map(|j| format!("col{j}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        emit("importance_grid.csv", csv_bytes(&header, &rows))?;
        emit("importance_grid.svg", heatmap("Feature importance per grid cell", n, &imp.grid.cells).into_bytes())?;
    }
    Ok(written)
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 56.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, y_max: f64) {
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>",
        H - PAD,
        W - PAD / 2.0,
        H - PAD,
        H - PAD
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = H - PAD - (H - 2.0 * PAD) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>",
            PAD - 6.0,
            y + 4.0
        );
    }
}

/// Vertical bars on a 0..1 scale (values above 1 stretch the axis).
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = svg_open(title);
    let y_max = values.iter().copied().filter(|v| v.is_finite()).fold(1.0, f64::max);
    axes(&mut s, y_max);
    let n = labels.len().max(1) as f64;
    let slot = (W - 1.5 * PAD) / n;
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let v = if v.is_finite() { *v } else { 0.0 };
        let h = (H - 2.0 * PAD) * v / y_max;
        let x = PAD + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"#4477aa\"><title>{}: {v:.4}</title></rect>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            H - PAD - h,
            slot * 0.7,
            escape(l),
            x + slot * 0.35,
            H - PAD + 16.0,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over shared x values.
pub fn line_chart(title: &str, x_label: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> String {
    const COLORS: [&str; 6] = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377"];
    let mut s = svg_open(title);
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    axes(&mut s, y_max);
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD + (W - 1.5 * PAD) * (x - x0) / span;
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * y / y_max;
    for &x in xs {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x}</text>", px(x), H - PAD + 16.0);
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(x_label));
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("point");
            let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            W - 1.4 * PAD,
            PAD + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Row-major n x n grid shaded from white (0) to dark (max).
pub fn heatmap(title: &str, n: usize, cells: &[f64]) -> String {
    let mut s = svg_open(title);
    let max = cells.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let side = (H - 1.5 * PAD) / n.max(1) as f64;
    let left = (W - side * n as f64) / 2.0;
    for i in 0..n {
        for j in 0..n {
            let v = cells[i * n + j];
            let t = if max > 0.0 && v.is_finite() { v / max } else { 0.0 };
            let c = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{side:.1}\" height=\"{side:.1}\" fill=\"rgb({c},{c},255)\"><title>({i},{j}) {v:.5}</title></rect>",
                left + side * j as f64,
                PAD * 0.75 + side * i as f64
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
