//! CSV, JSON and SVG output of experiment results.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{ExperimentSpec, ResultRecord, SummaryTable};
use crate::error::{Error, Result};

const RECORD_HEADER: &str = "method,m,trial,error,iterations,max_abs_weight,residual,stop_reason";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Records without timings, so equal runs give identical bytes.
pub fn write_records<W: Write>(records: &[ResultRecord], mut w: W) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.m,
            r.trial,
            num(r.error),
            r.iterations,
            opt(r.max_abs_weight),
            opt(r.residual),
            r.stop_reason
        )?;
    }
    Ok(())
}

fn write_timings<W: Write>(records: &[ResultRecord], mut w: W) -> Result<()> {
    writeln!(w, "method,m,trial,wall_seconds")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.method, r.m, r.trial, num(r.wall_seconds))?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(cell: &str, what: &str) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::Parse(format!("bad {what}: {cell:?}")))
}

fn parse_opt(cell: &str) -> Result<Option<f64>> {
    if cell.trim().is_empty() {
        Ok(None)
    } else {
        parse(cell, "number").map(Some)
    }
}

fn read_records_csv<R: BufRead>(r: R) -> Result<Vec<ResultRecord>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty records file".into()))??;
    if header.trim() != RECORD_HEADER {
        return Err(Error::Parse(format!("unexpected records header {header:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 8 {
            return Err(Error::Parse(format!("expected 8 fields, got {}", c.len())));
        }
        out.push(ResultRecord {
            method: c[0].to_string(),
            m: parse(c[1], "m")?,
            trial: parse(c[2], "trial")?,
            error: parse(c[3], "error")?,
            wall_seconds: 0.0,
            iterations: parse(c[4], "iterations")?,
            max_abs_weight: parse_opt(c[5])?,
            residual: parse_opt(c[6])?,
            stop_reason: c[7].to_string(),
        });
    }
    Ok(out)
}

/// Reads `records.csv` from `dir`, with wall times from `timings.csv` when present.
pub fn read_records(dir: &Path) -> Result<Vec<ResultRecord>> {
    let mut records = read_records_csv(BufReader::new(fs::File::open(dir.join("records.csv"))?))?;
    if let Ok(f) = fs::File::open(dir.join("timings.csv")) {
        for (line, rec) in BufReader::new(f).lines().skip(1).zip(records.iter_mut()) {
            let line = line?;
            let c: Vec<&str> = line.split(',').collect();
            if c.len() == 4 && c[0] == rec.method && parse::<usize>(c[1], "m")? == rec.m && parse::<usize>(c[2], "trial")? == rec.trial {
                rec.wall_seconds = parse(c[3], "wall time")?;
            }
        }
    }
    Ok(records)
}

pub fn write_summary<W: Write>(summary: &SummaryTable, mut w: W) -> Result<()> {
    writeln!(w, "method,m,count,diverged,mean,q25,median,q75,min,max,outliers,mean_wall_seconds")?;
    for r in &summary.rows {
        let outliers: Vec<String> = r.outliers.iter().map(|v| num(*v)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.m,
            r.count,
            r.diverged,
            num(r.mean),
            num(r.q25),
            num(r.median),
            num(r.q75),
            num(r.min),
            num(r.max),
            outliers.join(";"),
            num(r.mean_wall_seconds)
        )?;
    }
    Ok(())
}

/// Creates `dir` and checks that files can be written there.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)?;
    Ok(())
}

/// Writes `records.csv`, `timings.csv`, `summary.csv`, `spec.json`,
/// `environment.json` and, when there is data, `errors.svg`. Returns the
/// paths written.
pub fn export_report(records: &[ResultRecord], summary: &SummaryTable, spec: &ExperimentSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_writable(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    put("records.csv", buf)?;
    let mut buf = Vec::new();
    write_timings(records, &mut buf)?;
    put("timings.csv", buf)?;
    let mut buf = Vec::new();
    write_summary(summary, &mut buf)?;
    put("summary.csv", buf)?;
    put("spec.json", serde_json::to_vec_pretty(spec)?)?;
    let env = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "threads": rayon::current_num_threads(),
        "warnings": summary.warnings,
    });
    put("environment.json", serde_json::to_vec_pretty(&env)?)?;
    if !summary.rows.is_empty() {
        put("errors.svg", error_plot(summary, &format!("{:?}", spec.target)).into_bytes())?;
    }
    Ok(written)
}

/// Log-scale error against m: a polyline of means per method and a box from
/// the quartiles with min/max whiskers at every m.
pub fn error_plot(summary: &SummaryTable, title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 160.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

    let mut methods: Vec<&str> = summary.rows.iter().map(|r| r.method.as_str()).collect();
    methods.dedup();
    methods.sort_unstable();
    methods.dedup();

    let positive = |v: f64| if v > 0.0 { v } else { 1e-17 };
    let ys: Vec<f64> = summary.rows.iter().flat_map(|r| [positive(r.min), positive(r.max), positive(r.mean)]).collect();
    let ylo = ys.iter().fold(f64::INFINITY, |a, b| a.min(*b)).log10().floor();
    let mut yhi = ys.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)).log10().ceil();
    if yhi <= ylo {
        yhi = ylo + 1.0;
    }
    let xs: Vec<f64> = summary.rows.iter().map(|r| r.m as f64).collect();
    let xlo = xs.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let mut xhi = xs.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    if xhi <= xlo {
        xhi = xlo + 1.0;
    }
    let px = |m: f64| LEFT + (m - xlo) / (xhi - xlo) * (W - LEFT - RIGHT);
    let py = |e: f64| TOP + (yhi - positive(e).log10()) / (yhi - ylo) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(title));
    // axes
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - BOTTOM, W - RIGHT, H - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM);
    let mut e = ylo;
    while e <= yhi {
        let y = py(10f64.powf(e));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, LEFT - 8.0, y + 4.0);
        e += 1.0;
    }
    let mut ms: Vec<usize> = summary.rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    for m in &ms {
        let x = px(*m as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - BOTTOM, H - BOTTOM + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{m}</text>"#, H - BOTTOM + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">m</text>"#, (LEFT + W - RIGHT) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">relative L2 error</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0
    );

    for (k, method) in methods.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let rows: Vec<_> = summary.rows.iter().filter(|r| r.method == *method).collect();
        let points: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.m as f64), py(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        for r in &rows {
            let x = px(r.m as f64);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#, py(r.min), py(r.max));
            let (top, bottom) = (py(r.q75), py(r.q25));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{top:.2}" width="8" height="{:.2}" fill="{color}" fill-opacity="0.3" stroke="{color}"/>"#,
                x - 4.0,
                (bottom - top).max(0.5)
            );
        }
        let ly = TOP + 18.0 * k as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 25.0, ly + 4.0, xml_escape(method));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{summarize, QuadratureChoice};
    use crate::targets::TargetSpec;

    fn rec(method: &str, m: usize, trial: usize, error: f64) -> ResultRecord {
        ResultRecord {
            method: method.into(),
            m,
            trial,
            error,
            wall_seconds: 0.25 * (trial + 1) as f64,
            iterations: 17,
            max_abs_weight: if method.starts_with("dnn") { Some(1.0 / 3.0) } else { None },
            residual: Some(std::f64::consts::PI * 1e-9),
            stop_reason: "converged".into(),
        }
    }

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            target: TargetSpec::ExpCos { d: 2 },
            methods: vec![],
            sample_grid: vec![10, 20],
            trials: 2,
            base_seed: 0,
            noise_sigma: 0.0,
            quadrature: QuadratureChoice::Default,
            output: None,
        }
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![rec("wqcbp", 10, 0, 0.1 + 0.2), rec("wqcbp", 10, 1, 1e-300), rec("dnn-1x4", 20, 0, f64::NAN)];
        export_report(&records, &summarize(&records), &spec(), dir.path()).unwrap();
        let back = read_records(dir.path()).unwrap();
        assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.error.to_bits(), b.error.to_bits());
            let same = ResultRecord { error: 0.0, ..a.clone() } == ResultRecord { error: 0.0, ..b.clone() };
            assert!(same, "{a:?} vs {b:?}");
        }
        let spec_back: ExperimentSpec = serde_json::from_slice(&fs::read(dir.path().join("spec.json")).unwrap()).unwrap();
        assert_eq!(spec_back, spec());
    }

    #[test]
    fn empty_records_give_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let written = export_report(&[], &summarize(&[]), &spec(), dir.path()).unwrap();
        assert!(!written.iter().any(|p| p.extension().is_some_and(|e| e == "svg")));
        let text = fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn one_polyline_per_method() {
        let records: Vec<_> = ["a", "b", "c"]
            .iter()
            .flat_map(|m| [10, 20, 40].into_iter().flat_map(move |n| (0..3).map(move |t| rec(m, n, t, 0.1 / (n * (t + 1)) as f64))))
            .collect();
        let svg = error_plot(&summarize(&records), "test");
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches("<rect").count(), 1 + 9);
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert!(export_report(&[], &summarize(&[]), &spec(), &file.join("sub")).is_err());
    }
}
