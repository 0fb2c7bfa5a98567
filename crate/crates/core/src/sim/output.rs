//! CSV log writer and steady-state metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::harness::SimLog;

/// Column header for two outputs and two inputs.
pub const CSV_HEADER: &str =
    "t,x,theta,x_meas,theta_meas,x_hat,theta_hat,x_d,theta_d,ex,etheta,F1,F2,Fhat1,Fhat2,eF1,eF2,u1,u2";

/// Header for arbitrary dimensions; equals [`CSV_HEADER`] for `n = m = 2`.
pub fn csv_header(n: usize, m: usize) -> String {
    if n == 2 && m == 2 {
        return CSV_HEADER.to_string();
    }
    let mut cols = vec!["t".to_string()];
    for prefix in ["y", "y_meas", "y_hat", "y_d", "e"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    for prefix in ["F", "Fhat", "eF"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.join(",")
}

/// 17 significant digits, scientific notation; exact round trip for every finite `f64`.
fn fmt_real(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn write_csv<W: Write>(log: &SimLog, mut w: W) -> Result<()> {
    let mut buf = csv_header(log.output_dim(), log.input_dim());
    buf.push('\n');
    for r in &log.records {
        fmt_real(&mut buf, r.t);
        for v in [&r.y, &r.y_meas, &r.y_hat, &r.y_d, &r.e_y, &r.f, &r.f_hat, &r.e_f, &r.u] {
            for x in v.iter() {
                buf.push(',');
                fmt_real(&mut buf, *x);
            }
        }
        buf.push('\n');
        if buf.len() > 1 << 16 {
            w.write_all(buf.as_bytes())?;
            buf.clear();
        }
    }
    w.write_all(buf.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(log: &SimLog, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    write_csv(log, std::io::BufWriter::new(f))
}

/// Flat metric table, ordered by key.
pub type Metrics = BTreeMap<String, f64>;

fn channel_names(n: usize) -> (Vec<String>, Vec<String>) {
    if n == 2 {
        (
            vec!["ex".into(), "etheta".into()],
            vec!["eF1".into(), "eF2".into()],
        )
    } else {
        (
            (1..=n).map(|i| format!("e{i}")).collect(),
            (1..=n).map(|i| format!("eF{i}")).collect(),
        )
    }
}

/// Steady-state metrics over records with `t > settle_time`.
///
/// Per tracking channel: `max_abs`, `rms`, and `band_entry_time`, the first time
/// after which `|e|` stays within `band` for the rest of the run (NaN if it never
/// does). Per estimation channel: `max_abs` and `rms`, skipping samples where the
/// estimate is not defined yet.
pub fn compute_metrics(log: &SimLog, settle_time: f64, band: &[f64]) -> Result<Metrics> {
    let n = log.output_dim();
    if band.len() != n {
        return Err(Error::Config(format!("band needs {n} entries, got {}", band.len())));
    }
    let window: Vec<_> = log.records.iter().filter(|r| r.t > settle_time).collect();
    if window.is_empty() {
        return Err(Error::Domain(format!(
            "no records after settle time {settle_time} (log ends at {})",
            log.records.last().map_or(f64::NAN, |r| r.t)
        )));
    }
    let (track, est) = channel_names(n);
    let mut m = Metrics::new();
    m.insert("records".into(), log.len() as f64);
    m.insert("window_records".into(), window.len() as f64);
    m.insert("settle_time".into(), settle_time);
    m.insert("t_end".into(), log.records.last().map_or(f64::NAN, |r| r.t));

    let stats = |vals: &mut dyn Iterator<Item = f64>| {
        let (mut max, mut sq, mut cnt) = (0.0f64, 0.0, 0usize);
        for v in vals.filter(|v| !v.is_nan()) {
            max = max.max(v.abs());
            sq += v * v;
            cnt += 1;
        }
        let rms = if cnt > 0 { (sq / cnt as f64).sqrt() } else { f64::NAN };
        (if cnt > 0 { max } else { f64::NAN }, rms)
    };

    for i in 0..n {
        let (max, rms) = stats(&mut window.iter().map(|r| r.e_y[i]));
        m.insert(format!("{}.max_abs", track[i]), max);
        m.insert(format!("{}.rms", track[i]), rms);
        // scan backwards for the last excursion outside the band
        let entry = match log.records.iter().rposition(|r| !(r.e_y[i].abs() <= band[i])) {
            None => log.records[0].t,
            Some(k) if k + 1 < log.len() => log.records[k + 1].t,
            Some(_) => f64::NAN,
        };
        m.insert(format!("{}.band", track[i]), band[i]);
        m.insert(format!("{}.band_entry_time", track[i]), entry);

        let (max, rms) = stats(&mut window.iter().map(|r| r.e_f[i]));
        m.insert(format!("{}.max_abs", est[i]), max);
        m.insert(format!("{}.rms", est[i]), rms);
    }
    Ok(m)
}

/// `key = value` lines, one per metric.
pub fn format_metrics(m: &Metrics) -> String {
    let mut s = String::new();
    for (k, v) in m {
        let _ = writeln!(s, "{k} = {}", fmt_metric(*v));
    }
    s
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_metrics_file(m: &Metrics, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format_metrics(m))
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}
