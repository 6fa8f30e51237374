//! File emission: JSON documents, flat binary fields, CSV tables, SVG plots.

use std::fs;
use std::path::PathBuf;

use homog_core::rates::{RateReport, SlopeFit};
use homog_core::solver::{BoundaryTag, DiscreteField};
use serde_json::{json, Value};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Collects output files and writes them once computation has finished.
pub struct Writer {
    dir: PathBuf,
    digest: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Writer {
    pub fn new(dir: impl Into<PathBuf>, digest: String) -> Self {
        Writer {
            dir: dir.into(),
            digest,
            files: Vec::new(),
        }
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn provenance(&self) -> Value {
        json!({"config_digest": self.digest, "tool_version": VERSION})
    }

    /// Adds the digest and version to a JSON object.
    pub fn json(&mut self, name: &str, mut body: Value) {
        if let Value::Object(map) = &mut body {
            map.insert("provenance".into(), self.provenance());
        }
        let mut bytes = serde_json::to_vec_pretty(&body).expect("json serializes");
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
    }

    /// Header JSON plus `<name>.f64`, row-major little-endian.
    pub fn field(&mut self, name: &str, u: &DiscreteField) {
        let g = u.grid();
        let data = format!("{name}.f64");
        let boundary = match u.boundary() {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Periodic => "periodic",
            BoundaryTag::Free => "free",
        };
        self.json(
            &format!("{name}.json"),
            json!({
                "origin": g.origin,
                "spacing": g.spacing,
                "cells": g.cells,
                "nodes": [g.cells[0] + 1, g.cells[1] + 1],
                "boundary": boundary,
                "layout": "row-major, x fastest, f64 little-endian",
                "data_file": data,
                "len": u.values().len(),
            }),
        );
        let bytes: Vec<u8> = u.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        self.files.push((data, bytes));
    }

    /// A CSV table preceded by a `#` comment line carrying the provenance.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut buf = format!("# config_digest={} tool_version={VERSION}\n", self.digest).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.files.push((name.into(), buf));
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: String) {
        self.files.push((name.into(), body.into_bytes()));
    }

    pub fn finish(self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.dir)?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
pub fn read_f64(path: &std::path::Path) -> Result<Vec<f64>, CliError> {
    let bytes = fs::read(path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn fit_json(f: &Option<SlopeFit>) -> Value {
    match f {
        Some(f) => json!({"slope": f.slope, "prefactor": f.prefactor, "r_squared": f.r_squared}),
        None => Value::Null,
    }
}

/// Log-log plot of the three error columns with their fitted lines.
pub fn rates_svg(report: &RateReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    let series: [(&str, &str, Vec<(f64, f64)>, &Option<SlopeFit>); 3] = [
        (
            "L2 zero order",
            "#1f77b4",
            report.rows.iter().map(|r| (r.eps, r.err_l2_zero_order)).collect(),
            &report.slope_l2,
        ),
        (
            "H1 first order",
            "#d62728",
            report.rows.iter().map(|r| (r.eps, r.err_h1_first_order)).collect(),
            &report.slope_h1,
        ),
        (
            "H1 plain",
            "#2ca02c",
            report.rows.iter().map(|r| (r.eps, r.err_h1_plain)).collect(),
            &report.slope_h1_plain,
        ),
    ];
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 0.0, -1.0, 0.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{tb}\" text-anchor=\"middle\" font-size=\"14\">eps</text>\n\
         <text x=\"15\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 {cy})\">error</text>\n",
        b = H - PAD,
        r = W - PAD,
        cx = W / 2.0,
        tb = H - 15.0,
        cy = H / 2.0,
    );
    for k in (x0 as i32)..=(x1 as i32) {
        let x = sx(k as f64);
        s += &format!(
            "<line x1=\"{x:.1}\" y1=\"{b}\" x2=\"{x:.1}\" y2=\"{t}\" stroke=\"black\"/>\n<text x=\"{x:.1}\" y=\"{l}\" text-anchor=\"middle\" font-size=\"12\">1e{k}</text>\n",
            b = H - PAD,
            t = H - PAD + 5.0,
            l = H - PAD + 20.0
        );
    }
    for k in (y0 as i32)..=(y1 as i32) {
        let y = sy(k as f64);
        s += &format!(
            "<line x1=\"{a}\" y1=\"{y:.1}\" x2=\"{PAD}\" y2=\"{y:.1}\" stroke=\"black\"/>\n<text x=\"{l}\" y=\"{y:.1}\" text-anchor=\"end\" font-size=\"12\">1e{k}</text>\n",
            a = PAD - 5.0,
            l = PAD - 8.0
        );
    }
    for (i, (label, color, data, fit)) in series.iter().enumerate() {
        for &(e, v) in data.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
            s += &format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{color}\"/>\n",
                sx(e.log10()),
                sy(v.log10())
            );
        }
        let mut legend = label.to_string();
        if let Some(f) = fit {
            if f.prefactor > 0.0 {
                let line = |x: f64| f.prefactor.log10() + f.slope * x;
                s += &format!(
                    "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-dasharray=\"6 4\"/>\n",
                    sx(x0),
                    sy(line(x0)),
                    sx(x1),
                    sy(line(x1))
                );
            }
            legend += &format!(" (slope {:.2})", f.slope);
        }
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{legend}</text>\n",
            PAD + 10.0,
            PAD + 15.0 * i as f64
        );
    }
    s + "</svg>\n"
}
