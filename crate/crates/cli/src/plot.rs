use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use relugen_core::{NetworkFile, Samples};

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Counts indexed `[y][x]`; one-dimensional samples give a single row.
pub fn bin_counts(samples: &Samples, bins: usize) -> Vec<Vec<u64>> {
    let rows = if samples.dim() == 1 { 1 } else { bins };
    let mut counts = vec![vec![0u64; bins]; rows];
    for p in samples.iter() {
        let x = bin(p[0], bins);
        let y = if samples.dim() == 1 { 0 } else { bin(p[1], bins) };
        counts[y][x] += 1;
    }
    counts
}

/// Binary graymap, brightest at the fullest bin, `y` increasing upwards.
fn pgm(counts: &[Vec<u64>]) -> Vec<u8> {
    let (w, h) = (counts[0].len(), counts.len());
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for row in counts.iter().rev() {
        out.extend(row.iter().map(|&c| ((c as f64 / max as f64) * 255.0).round() as u8));
    }
    out
}

fn counts_csv(counts: &[Vec<u64>]) -> String {
    let mut out = String::new();
    for row in counts {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn run(samples: &Path, bins: usize, out: &Path, network: Option<&Path>, points: usize) -> Result<()> {
    if bins == 0 {
        bail!("--bins must be at least 1");
    }
    let data = Samples::read_csv_path(samples).with_context(|| format!("reading {}", samples.display()))?;
    if data.dim() > 2 {
        bail!("can only plot 1- or 2-dimensional samples, got {}", data.dim());
    }
    let counts = bin_counts(&data, bins);
    let image = with_suffix(out, ".pgm");
    std::fs::write(&image, pgm(&counts)).with_context(|| format!("writing {}", image.display()))?;
    let table = with_suffix(out, "_counts.csv");
    std::fs::write(&table, counts_csv(&counts)).with_context(|| format!("writing {}", table.display()))?;
    println!("wrote {} and {}", image.display(), table.display());

    if let Some(path) = network {
        if points < 2 {
            bail!("--points must be at least 2");
        }
        let net = NetworkFile::read(path).with_context(|| format!("reading {}", path.display()))?.network()?;
        let header: Vec<String> =
            std::iter::once("x".to_string()).chain((0..net.output_dim()).map(|k| format!("y{k}"))).collect();
        let mut text = header.join(",") + "\n";
        for k in 0..points {
            let x = k as f64 / (points - 1) as f64;
            let y = net.eval(&[x])?;
            write!(text, "{x:.16e}").unwrap();
            for v in y {
                write!(text, ",{v:.16e}").unwrap();
            }
            text.push('\n');
        }
        let curve = with_suffix(out, "_curve.csv");
        std::fs::write(&curve, text).with_context(|| format!("writing {}", curve.display()))?;
        println!("wrote {}", curve.display());
    }
    Ok(())
}
