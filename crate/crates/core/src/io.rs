//! Wire formats: `%.17g` numbers, versioned CSV tables and JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GlabError, Result};
use crate::operators::{LinearMap, NetReport};
use crate::polytope::{HPolytope, VPolytope};
use crate::rng::RngSeed;
use crate::sampling::SampleSet;

/// First line of every CSV table.
pub const CSV_HEADER: &str = "# schema_version=1";
pub const SCHEMA_VERSION: u32 = 1;

/// C's `%.17g`: 17 significant digits, trailing zeros removed, exponent form outside `[1e-4, 1e17)`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(what: &str, detail: impl std::fmt::Display) -> GlabError {
    GlabError::Usage(format!("malformed {what}: {detail}"))
}

fn row_line(row: &[f64]) -> String {
    row.iter().map(|&x| fmt_g17(x)).collect::<Vec<_>>().join(",")
}

fn parse_row(line: &str, what: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| parse_err(what, format!("{t:?}: {e}"))))
        .collect()
}

/// Data lines of a CSV, skipping `#` comments and blank lines.
fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// `n,m,family,seed` header, its value line (seed written as `seed:stream`), then `m` rows.
pub fn sample_set_to_csv(s: &SampleSet) -> String {
    let mut out = format!("n,m,family,seed\n{},{},{},{}:{}\n", s.n, s.m, s.family, s.seed.seed, s.seed.stream_index);
    for r in s.rows() {
        out.push_str(&row_line(r));
        out.push('\n');
    }
    out
}

pub fn sample_set_from_csv(text: &str) -> Result<SampleSet> {
    let mut lines = data_lines(text);
    let header = lines.next().ok_or_else(|| parse_err("sample set", "empty file"))?;
    if header != "n,m,family,seed" {
        return Err(parse_err("sample set", format!("unexpected header {header:?}")));
    }
    let meta: Vec<&str> = lines.next().ok_or_else(|| parse_err("sample set", "missing metadata"))?.split(',').collect();
    if meta.len() != 4 {
        return Err(parse_err("sample set", "metadata needs four fields"));
    }
    let n: usize = meta[0].parse().map_err(|e| parse_err("sample set", e))?;
    let m: usize = meta[1].parse().map_err(|e| parse_err("sample set", e))?;
    let (seed, stream) = meta[3].split_once(':').unwrap_or((meta[3], "0"));
    let seed = RngSeed {
        seed: seed.parse().map_err(|e| parse_err("sample set", e))?,
        stream_index: stream.parse().map_err(|e| parse_err("sample set", e))?,
    };
    let rows = lines.map(|l| parse_row(l, "sample set")).collect::<Result<Vec<_>>>()?;
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(parse_err("sample set", format!("expected {m} rows of {n} values")));
    }
    SampleSet::from_rows(&rows, meta[2], seed)
}

/// One matrix row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        out.push_str(&row_line(&row));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows = data_lines(text).map(|l| parse_row(l, "matrix")).collect::<Result<Vec<_>>>()?;
    let c = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != c) {
        return Err(parse_err("matrix", "ragged or empty"));
    }
    Ok(DMatrix::from_row_slice(rows.len(), c, &rows.concat()))
}

/// Sidecar manifest of a persisted polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeManifest {
    pub schema_version: u32,
    /// `"v"` (generators) or `"h"` (normals).
    pub kind: String,
    pub label: String,
    pub n: usize,
    pub rows: usize,
    pub csv: String,
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_polytope(csv: &Path, kind: &str, label: &str, n: usize, flat: &[f64]) -> Result<()> {
    let m = DMatrix::from_row_slice(flat.len() / n, n, flat);
    fs::write(csv, matrix_to_csv(&m))?;
    let manifest = PolytopeManifest {
        schema_version: SCHEMA_VERSION,
        kind: kind.into(),
        label: label.into(),
        n,
        rows: m.nrows(),
        csv: file_name(csv),
    };
    fs::write(sidecar(csv), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn read_polytope(csv: &Path, kind: &str) -> Result<(usize, Vec<f64>, String)> {
    let m = matrix_from_csv(&fs::read_to_string(csv)?)?;
    let label = match fs::read_to_string(sidecar(csv)) {
        Ok(text) => {
            let man: PolytopeManifest = serde_json::from_str(&text)?;
            if man.kind != kind || man.n != m.ncols() || man.rows != m.nrows() {
                return Err(parse_err("polytope manifest", "does not match the CSV"));
            }
            man.label
        }
        Err(_) => csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    Ok((m.ncols(), m.transpose().as_slice().to_vec(), label))
}

/// Writes `path` (one generator per row) and the manifest next to it.
pub fn save_vpolytope(p: &VPolytope, path: &Path) -> Result<()> {
    write_polytope(path, "v", &p.label, p.n, &p.generators)
}

pub fn load_vpolytope(path: &Path) -> Result<VPolytope> {
    let (n, flat, label) = read_polytope(path, "v")?;
    VPolytope::new(n, flat, label)
}

pub fn save_hpolytope(p: &HPolytope, path: &Path) -> Result<()> {
    write_polytope(path, "h", &p.label, p.n, &p.normals)
}

pub fn load_hpolytope(path: &Path) -> Result<HPolytope> {
    let (n, flat, label) = read_polytope(path, "h")?;
    HPolytope::new(n, flat, label)
}

pub fn save_operator(t: &LinearMap, path: &Path) -> Result<()> {
    fs::write(path, matrix_to_csv(&t.matrix))?;
    Ok(())
}

pub fn load_operator(path: &Path) -> Result<LinearMap> {
    LinearMap::new(matrix_from_csv(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetManifest {
    pub schema_version: u32,
    pub t: f64,
    pub seed: RngSeed,
    pub budget: usize,
    pub members: Vec<String>,
}

/// `dir/manifest.json` plus one `member_XXXXX.csv` per net point.
pub fn save_net(net: &NetReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut members = Vec::with_capacity(net.net.len());
    for (i, t) in net.net.iter().enumerate() {
        let name = format!("member_{i:05}.csv");
        save_operator(t, &dir.join(&name))?;
        members.push(name);
    }
    let manifest = NetManifest { schema_version: SCHEMA_VERSION, t: net.t, seed: net.seed, budget: net.budget, members };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_net(dir: &Path) -> Result<(NetManifest, Vec<LinearMap>)> {
    let man: NetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let maps = man.members.iter().map(|f| load_operator(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    Ok((man, maps))
}

/// A CSV table with the schema comment, a header and `%.17g` cells.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = format!("{CSV_HEADER}\n{}\n", header.join(","));
    for r in rows {
        out.push_str(&row_line(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(123456789.0), "123456789");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        assert_eq!(fmt_g17(1e300), "1.0000000000000001e+300");
    }

    #[test]
    fn round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, -7.25e-9, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sample_set_round_trip() {
        let s = SampleSet::from_rows(&[vec![0.1, -2.0], vec![1e-7, 3.5]], "gaussian", RngSeed::new(42).with_stream(3)).unwrap();
        let text = sample_set_to_csv(&s);
        assert!(text.starts_with("n,m,family,seed\n2,2,gaussian,42:3\n0.10000000000000001,-2\n"));
        assert_eq!(sample_set_from_csv(&text).unwrap(), s);
        assert!(sample_set_from_csv("n,m,family,seed\n2,3,g,1:0\n1,2\n").is_err());
    }

    #[test]
    fn polytope_and_net_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = VPolytope::from_rows(&[vec![1.0, 0.5], vec![-0.25, 2.0]], "fixture").unwrap();
        let path = dir.path().join("b.csv");
        save_vpolytope(&p, &path).unwrap();
        assert_eq!(load_vpolytope(&path).unwrap(), p);
        let h = HPolytope::new(2, vec![1.0, 0.0, 0.0, 1.0], "box").unwrap();
        let hp = dir.path().join("h.csv");
        save_hpolytope(&h, &hp).unwrap();
        assert_eq!(load_hpolytope(&hp).unwrap(), h);
        assert!(load_vpolytope(&hp).is_err());

        let net = NetReport {
            t: 0.5,
            seed: RngSeed::new(1),
            budget: 10,
            members_sampled: 2,
            net: vec![LinearMap::identity(2), LinearMap::from_rows(&[vec![2.0, 1.0], vec![0.0, 0.5]]).unwrap()],
            heldout: 0,
            heldout_covered: 0,
            max_heldout_distance: 0.0,
            covering_pass: true,
        };
        save_net(&net, &dir.path().join("net")).unwrap();
        let (man, maps) = load_net(&dir.path().join("net")).unwrap();
        assert_eq!(man.budget, 10);
        assert_eq!(maps, net.net);
    }

    #[test]
    fn tables_carry_the_schema_line() {
        let t = table_csv(&["a", "b"], &[vec![1.0, 0.5]]);
        assert_eq!(t, "# schema_version=1\na,b\n1,0.5\n");
    }
}
