//! CSV rendering and output plumbing: stable column layouts, an atomic
//! writer, and a provenance manifest dropped beside every artifact.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::ep::{LocusRow, SplitRow};
use crate::error::{Error, Result};
use crate::integrate::{DstRow, Trajectory};
use crate::lindblad::OracleRow;
use crate::params::ModelParams;
use crate::spectrum::SpectrumRow;

/// Shortest round-trip decimal form; reruns are byte-identical because
/// the same bits always print the same way.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn render_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("t,n,D,phi,s\n");
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!("{},{},{},{},{}\n", num(*t), num(x.n), num(x.d), num(x.phi), num(x.s)));
    }
    out
}

pub fn render_dst(rows: &[DstRow]) -> String {
    let mut out = String::from("pump_ratio,D_st,D_0,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(r.pump_ratio),
            num(r.d_st),
            num(r.d0),
            r.converged
        ));
    }
    out
}

pub fn render_spectrum(rows: &[SpectrumRow]) -> String {
    let mut out = String::from("d0,re1,im1,re2,im2,re3,im3,ov12,ov13,ov23,disc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            num(r.d0),
            num(r.lambdas[0].re),
            num(r.lambdas[0].im),
            num(r.lambdas[1].re),
            num(r.lambdas[1].im),
            num(r.lambdas[2].re),
            num(r.lambdas[2].im),
            num(r.overlaps[0]),
            num(r.overlaps[1]),
            num(r.overlaps[2]),
            num(r.discriminant),
        ));
    }
    out
}

pub fn render_locus(rows: &[LocusRow]) -> String {
    let mut out = String::from("gamma_cor,d0_ep,gamma_p_ep,overlap_ep,bracket_width\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(r.gamma_cor),
            num(r.d0_ep),
            num(r.gamma_p_ep),
            num(r.overlap_ep),
            num(r.bracket_width),
        ));
    }
    out
}

pub fn render_splitting(rows: &[SplitRow]) -> String {
    let mut out = String::from("d0,dim,dre\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", num(r.d0), num(r.dim), num(r.dre)));
    }
    out
}

pub fn render_oracle(rows: &[OracleRow]) -> String {
    let mut out = String::from("dissipator,observable,fitted_rate,analytic_rate,rel_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dissipator,
            r.observable,
            num(r.fitted_rate),
            num(r.analytic_rate),
            num(r.rel_err),
        ));
    }
    out
}

/// Write `content` to `path` atomically (temp file in the same
/// directory, then rename), so readers never observe a partial file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("creating {}: {e}", dir.display())))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path has no file name: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::Config(format!("creating {}: {e}", tmp.display())))?;
    f.write_all(content.as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::Config(format!("writing {}: {e}", tmp.display())))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::Config(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}

/// Manifest path for an artifact: `<output>.manifest.txt`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.push_str(".manifest.txt");
    output.with_file_name(name)
}

/// Plain-text provenance manifest: the invocation, the full parameter
/// set, and any extra run-specific facts.
pub fn render_manifest(invocation: &str, p: &ModelParams, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("tool = eplab {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("invocation = {invocation}\n"));
    out.push_str(&format!("gamma_a = {}\n", num(p.gamma_a)));
    out.push_str(&format!("gamma_ph = {}\n", num(p.gamma_ph)));
    out.push_str(&format!("gamma_d = {}\n", num(p.gamma_d)));
    out.push_str(&format!("gamma_p = {}\n", num(p.gamma_p)));
    out.push_str(&format!("gamma_cor = {}\n", num(p.gamma_cor)));
    out.push_str(&format!("omega_r = {}\n", num(p.omega_r)));
    out.push_str(&format!("n_mol = {}\n", p.n_mol));
    for (k, v) in extra {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

/// Write an artifact plus its manifest.
pub fn write_with_manifest(
    path: &Path,
    content: &str,
    invocation: &str,
    p: &ModelParams,
    extra: &[(&str, String)],
) -> Result<()> {
    write_atomic(path, content)?;
    write_atomic(&manifest_path(path), &render_manifest(invocation, p, extra))
}
