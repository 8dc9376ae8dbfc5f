//! On-disk formats owned by the command-line tool.
//!
//! A dataset directory holds `manifest.csv` plus, per example, a point file
//! `shape_NNN.xyz` and a silhouette `shape_NNN.raster` (one text row of `0`/`1`
//! per image row).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hofnet::funcnets::{Activation, LvcSpec};
use hofnet::geometry::PointCloud;
use hofnet::seeding::{rng_for, Stream};
use hofnet::training::{write_atomic, Sample, ShapeKind, SynthShape};

pub const MANIFEST: &str = "manifest.csv";

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn raster_to_text(raster: &[f64], side: usize) -> String {
    let mut s = String::with_capacity(side * (side + 1));
    for row in raster.chunks(side) {
        s.extend(row.iter().map(|&v| if v > 0.5 { '1' } else { '0' }));
        s.push('\n');
    }
    s
}

pub fn parse_raster(text: &str) -> Result<Vec<f64>> {
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let side = rows.len();
    let mut out = Vec::with_capacity(side * side);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != side {
            bail!("raster row {} has {} pixels, expected {side}", i + 1, r.len());
        }
        for c in r.chars() {
            out.push(match c {
                '0' => 0.0,
                '1' => 1.0,
                _ => bail!("raster row {}: unexpected character {c:?}", i + 1),
            });
        }
    }
    if side == 0 {
        bail!("empty raster");
    }
    Ok(out)
}

pub fn save_dataset(dir: &Path, data: &[Sample], side: usize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from("index,kind,shape_seed,points\n");
    for (i, s) in data.iter().enumerate() {
        write_file(&dir.join(format!("shape_{i:03}.xyz")), s.gt.to_text().as_bytes())?;
        write_file(&dir.join(format!("shape_{i:03}.raster")), raster_to_text(&s.raster, side).as_bytes())?;
        manifest.push_str(&format!("{i},{},{},{}\n", s.shape.kind, s.shape.seed, s.gt.len()));
    }
    write_file(&dir.join(MANIFEST), manifest.as_bytes())
}

pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let path = dir.join(MANIFEST);
    let mut rdr = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
        if rec.len() != 4 {
            bail!("{}: expected 4 columns, got {}", path.display(), rec.len());
        }
        let i: usize = rec[0].parse().context("manifest index")?;
        let kind: ShapeKind = rec[1].parse()?;
        let seed: u64 = rec[2].parse().context("manifest shape_seed")?;
        let xyz = dir.join(format!("shape_{i:03}.xyz"));
        let gt =
            PointCloud::parse_text(&fs::read_to_string(&xyz).with_context(|| format!("reading {}", xyz.display()))?)
                .with_context(|| format!("parsing {}", xyz.display()))?
                .with_label(format!("{kind}-{i}"));
        let ras = dir.join(format!("shape_{i:03}.raster"));
        let raster = parse_raster(&fs::read_to_string(&ras).with_context(|| format!("reading {}", ras.display()))?)
            .with_context(|| format!("parsing {}", ras.display()))?;
        out.push(Sample { shape: SynthShape::random(kind, seed), raster, gt });
    }
    if out.is_empty() {
        bail!("{} lists no examples", path.display());
    }
    Ok(out)
}

fn parse_usizes(v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| t.trim().parse::<usize>().with_context(|| format!("bad integer {t:?}"))).collect()
}

pub fn parse_f64s(v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}"))).collect()
}

/// Key=value LVC description. Keys: `layer_sizes`, `codeword_len`,
/// `injection`, `activation`, and either `seed` (random weights) or
/// `weights` (comma-separated, in the library's layout).
pub fn parse_lvc_spec(text: &str) -> Result<LvcSpec> {
    let (mut sizes, mut m, mut inj, mut act, mut seed, mut weights) = (None, None, None, Activation::Relu, None, None);
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').with_context(|| format!("line {}: expected key=value", no + 1))?;
        let v = v.trim();
        match k.trim() {
            "layer_sizes" => sizes = Some(parse_usizes(v)?),
            "codeword_len" => m = Some(v.parse::<usize>().context("codeword_len")?),
            "injection" => inj = Some(parse_usizes(v)?.into_iter().collect::<BTreeSet<_>>()),
            "activation" => act = v.parse()?,
            "seed" => seed = Some(v.parse::<u64>().context("seed")?),
            "weights" => weights = Some(parse_f64s(v)?),
            other => bail!("line {}: unknown key {other:?}", no + 1),
        }
    }
    let sizes = sizes.context("missing layer_sizes")?;
    let m = m.context("missing codeword_len")?;
    let inj = inj.unwrap_or_else(|| [0].into());
    Ok(match (seed, weights) {
        (_, Some(w)) => LvcSpec::new(sizes, m, inj, act, w)?,
        (Some(s), None) => LvcSpec::random(sizes, m, inj, act, &mut rng_for(s, Stream::Dataset))?,
        (None, None) => bail!("LVC spec needs either seed or weights"),
    })
}
