//! Drivers for the three experiment batches: κ-continuation on a fixed mesh,
//! nested mesh refinement with κ tied to h, and indentation with contact
//! area reports.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::{assemble_linear, Discretization, LoadProfile, ModelParams, SystemMatrices};
use crate::error::{Error, Result};
use crate::mesh::{family_mesh, refine, TriMesh, FAMILY_BASE_H, FIELDS};
use crate::solver::{h1_error, kappa_continuation, newton_solve, ContinuationOptions, ContinuationStep, NewtonOptions};
use crate::vtk::export_vtk;

/// Radius of the parameter disk.
pub const DOMAIN_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    /// κ → 0 on a fixed mesh.
    Kappa,
    /// Nested refinement with `κ = h^q_exp`.
    Refinement,
    /// Indentation loads at fixed `h` and `κ`.
    Indentation,
}

impl Batch {
    pub fn number(self) -> u8 {
        match self {
            Batch::Kappa => 1,
            Batch::Refinement => 2,
            Batch::Indentation => 3,
        }
    }
}

/// Resolved settings of one batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub batch: Batch,
    /// Refinement level of the fixed mesh (batches 1 and 3).
    pub mesh_level: usize,
    pub kappa0: f64,
    pub shrink: f64,
    /// Cauchy-error threshold ending batches 1 and 2.
    pub stop_tol: f64,
    /// Cap on the number of κ values in batch 1.
    pub max_steps: usize,
    pub q_exp: f64,
    /// Coarsest and finest refinement levels of batch 2.
    pub min_level: usize,
    pub max_level: usize,
    pub ell: Vec<u32>,
    /// Gap below which a quadrature point counts as in contact; `None`
    /// means zero.
    pub contact_tol: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(batch: Batch) -> Self {
        let newton = NewtonOptions::default();
        ExperimentConfig {
            batch,
            mesh_level: match batch {
                Batch::Indentation => 3,
                _ => 5,
            },
            kappa0: 1e-2,
            shrink: 0.5,
            stop_tol: match batch {
                Batch::Refinement => 6.0e-5,
                _ => 5.0e-8,
            },
            max_steps: 60,
            q_exp: match batch {
                Batch::Refinement => 0.4,
                _ => 0.5,
            },
            min_level: 0,
            max_level: 6,
            ell: vec![0, 4, 9, 15, 23, 28],
            contact_tol: None,
            newton_tol: newton.tol,
            newton_max_iter: newton.max_iter,
            out: PathBuf::from("."),
        }
    }

    /// Sets one `key=value` setting; dashes and underscores in keys are
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "mesh_level" => self.mesh_level = parse(&key, value)?,
            "kappa0" => self.kappa0 = parse(&key, value)?,
            "shrink" => self.shrink = parse(&key, value)?,
            "stop_tol" => self.stop_tol = parse(&key, value)?,
            "max_steps" => self.max_steps = parse(&key, value)?,
            "q_exp" => self.q_exp = parse(&key, value)?,
            "min_level" => self.min_level = parse(&key, value)?,
            "max_level" => self.max_level = parse(&key, value)?,
            "ell" => {
                self.ell = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse("ell", s.trim()))
                    .collect::<Result<_>>()?
            }
            "contact_tol" => self.contact_tol = Some(parse(&key, value)?),
            "newton_tol" => self.newton_tol = parse(&key, value)?,
            "newton_max_iter" => self.newton_max_iter = parse(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Parse(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies flat `key=value` lines; blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return bad(format!("kappa0 must be positive, got {}", self.kappa0));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if self.stop_tol.is_nan() || self.stop_tol < 0.0 {
            return bad(format!("stop_tol must be nonnegative, got {}", self.stop_tol));
        }
        if !(self.q_exp > 0.0 && self.q_exp < 4.0 / 3.0) {
            return bad(format!("q_exp must lie in (0, 4/3), got {}", self.q_exp));
        }
        if self.min_level >= self.max_level && self.batch == Batch::Refinement {
            return bad(format!("need min_level < max_level, got {} and {}", self.min_level, self.max_level));
        }
        if let Some(t) = self.contact_tol {
            if t.is_nan() || t < 0.0 {
                return bad(format!("contact_tol must be nonnegative, got {t}"));
            }
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.batch == Batch::Indentation && self.ell.is_empty() {
            return bad("at least one load index is required".into());
        }
        Ok(())
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
        }
    }

    /// One-line record of every setting and model constant.
    pub fn describe(&self) -> String {
        let p = ModelParams::reference(self.kappa0, LoadProfile::None);
        let s = p.surface;
        let mut out = format!(
            "batch={} eps={} lambda={} mu={} R={} offset={} domain_radius={} q={},{},{} newton_tol={:e} newton_max_iter={}",
            self.batch.number(),
            p.eps,
            p.lambda,
            p.mu,
            s.radius,
            s.vertical_offset,
            s.domain_radius,
            p.q.x,
            p.q.y,
            p.q.z,
            self.newton_tol,
            self.newton_max_iter
        );
        match self.batch {
            Batch::Kappa => out += &format!(
                " mesh_level={} kappa_schedule=kappa0*shrink^k kappa0={:e} shrink={} stop_tol={:e} max_steps={}",
                self.mesh_level, self.kappa0, self.shrink, self.stop_tol, self.max_steps
            ),
            Batch::Refinement => out += &format!(
                " kappa_schedule=h^q_exp q_exp={} min_level={} max_level={} stop_tol={:e} base_h={}",
                self.q_exp, self.min_level, self.max_level, self.stop_tol, FAMILY_BASE_H
            ),
            Batch::Indentation => {
                let ells: Vec<String> = self.ell.iter().map(|l| l.to_string()).collect();
                out += &format!(
                    " mesh_level={} kappa_schedule=h^q_exp q_exp={} ell={} contact_tol={}",
                    self.mesh_level,
                    self.q_exp,
                    ells.join(","),
                    self.contact_tol.map_or("0".to_string(), |t| format!("{t:e}"))
                )
            }
        }
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("bad value `{value}` for {key}: {e}")))
}

/// Formats a float for CSV output with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV file that is flushed after every row, so that an aborted run leaves
/// the rows computed so far.
struct CsvSink {
    path: PathBuf,
    w: BufWriter<File>,
}

impl CsvSink {
    fn create(path: PathBuf, comment: &str, header: &[&str]) -> Result<Self> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut sink = CsvSink {
            path,
            w: BufWriter::new(f),
        };
        sink.line(&format!("# {comment}"))?;
        sink.line(&header.join(","))?;
        Ok(sink)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.w, "{text}")
            .and_then(|_| self.w.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.line(&fields.join(","))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Area of the elements in contact: each element contributes its area times
/// the fraction of its obstacle quadrature points with gap `≤ tol`.
pub fn contact_area(disc: &Discretization, sys: &SystemMatrices, state: &[f64], tol: f64) -> f64 {
    let gaps = sys.gaps(disc, state);
    let nt = disc.mesh.num_triangles();
    let mut hit = vec![0usize; nt];
    let mut total = vec![0usize; nt];
    for (p, g) in sys.obstacle.iter().zip(&gaps) {
        total[p.element] += 1;
        if *g <= tol {
            hit[p.element] += 1;
        }
    }
    (0..nt)
        .filter(|&t| hit[t] > 0)
        .fold(0.0, |acc, t| acc + disc.mesh.area(t) * hit[t] as f64 / total[t] as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaRow {
    pub kappa: f64,
    pub kappa_prev: f64,
    pub cauchy_error: f64,
    pub newton_iters: usize,
    pub active_set_size: usize,
}

#[derive(Debug, Clone)]
pub struct KappaOutcome {
    pub h: f64,
    pub mesh_hash: String,
    pub rows: Vec<KappaRow>,
    pub reached_tol: bool,
    pub csv: PathBuf,
    /// Every solve of the continuation, in order.
    pub steps: Vec<ContinuationStep>,
    pub disc: Discretization,
}

/// Batch 1: halves κ on a fixed mesh until consecutive displacements are
/// closer than `stop_tol` in H¹. Writes `batch1_level<L>.csv`.
pub fn run_batch1(cfg: &ExperimentConfig) -> Result<KappaOutcome> {
    cfg.validate()?;
    ensure_dir(&cfg.out)?;
    let disc = Discretization::new(family_mesh(DOMAIN_RADIUS, cfg.mesh_level)?);
    let hash = disc.mesh.content_hash();
    let comment = format!("{} h={} mesh_hash={hash}", cfg.describe(), fmt_float(disc.mesh.h));
    let path = cfg.out.join(format!("batch1_level{}.csv", cfg.mesh_level));
    let mut csv = CsvSink::create(
        path.clone(),
        &comment,
        &["kappa", "kappa_prev", "cauchy_error", "newton_iters", "active_set_size"],
    )?;
    let mut sys = assemble_linear(&disc, &ModelParams::reference(cfg.kappa0, LoadProfile::Dome))?;
    let opts = ContinuationOptions {
        newton: cfg.newton(),
        max_steps: cfg.max_steps,
        cold_start: false,
    };
    let mut rows = Vec::new();
    let mut prev_kappa = f64::NAN;
    let steps = kappa_continuation(&disc, &mut sys, cfg.kappa0, cfg.shrink, cfg.stop_tol, opts, |s| {
        if let Some(e) = s.cauchy_error {
            let row = KappaRow {
                kappa: s.kappa,
                kappa_prev: prev_kappa,
                cauchy_error: e,
                newton_iters: s.report.newton_iters,
                active_set_size: s.report.active_set_size,
            };
            csv.row(&[
                fmt_float(row.kappa),
                fmt_float(row.kappa_prev),
                fmt_float(row.cauchy_error),
                row.newton_iters.to_string(),
                row.active_set_size.to_string(),
            ])?;
            rows.push(row);
        }
        prev_kappa = s.kappa;
        Ok(())
    })?;
    let reached_tol = rows.last().is_some_and(|r: &KappaRow| r.cauchy_error < cfg.stop_tol);
    Ok(KappaOutcome {
        h: disc.mesh.h,
        mesh_hash: hash,
        rows,
        reached_tol,
        csv: path,
        steps,
        disc,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub level_coarse: usize,
    pub level_fine: usize,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub kappa_coarse: f64,
    pub kappa_fine: f64,
    pub cauchy_error: f64,
    pub newton_iters: usize,
    pub active_set_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOutcome {
    pub rows: Vec<RefinementRow>,
    /// Mesh pairs computed.
    pub iterations: usize,
    pub reached_tol: bool,
    pub csv: PathBuf,
}

/// Per-vertex blocks of a state, in vertex order.
fn vertex_blocks(disc: &Discretization, state: &[f64]) -> Vec<[f64; FIELDS]> {
    (0..disc.mesh.num_vertices())
        .map(|v| {
            let b = disc.dofs.base(v);
            std::array::from_fn(|f| state[b + f])
        })
        .collect()
}

/// Carries a full state (both fields) onto a refined mesh.
fn prolongate_state(coarse: &Discretization, state: &[f64], fine: &Discretization) -> Result<Vec<f64>> {
    let blocks = fine.mesh.prolongate(&coarse.mesh, &vertex_blocks(coarse, state))?;
    let mut out = vec![0.0; fine.len()];
    for (v, blk) in blocks.iter().enumerate() {
        let b = fine.dofs.base(v);
        out[b..b + FIELDS].copy_from_slice(blk);
    }
    Ok(out)
}

fn solve_at(disc: &Discretization, kappa: f64, load: LoadProfile, init: &[f64], opts: NewtonOptions) -> Result<(Vec<f64>, crate::solver::SolveReport, SystemMatrices)> {
    let sys = assemble_linear(disc, &ModelParams::reference(kappa, load))?;
    let wrap = |e| Error::AtKappa {
        kappa,
        source: Box::new(e),
    };
    let (state, report) = newton_solve(disc, &sys, init, opts).map_err(wrap)?;
    if !report.converged {
        return Err(wrap(Error::NotConverged {
            iterations: report.newton_iters,
            residual: report.final_residual_inf,
        }));
    }
    Ok((state, report, sys))
}

/// Batch 2: solves on nested meshes with `κ = h^q_exp` and stops once the
/// H¹ distance between consecutive levels drops below `stop_tol` or the
/// finest level is reached. Writes `batch2_q<q_exp>.csv`.
pub fn run_batch2(cfg: &ExperimentConfig) -> Result<RefinementOutcome> {
    cfg.validate()?;
    ensure_dir(&cfg.out)?;
    let mut coarse = Discretization::new(family_mesh(DOMAIN_RADIUS, cfg.min_level)?);
    let comment = format!("{} mesh_hash={}", cfg.describe(), coarse.mesh.content_hash());
    let path = cfg.out.join(format!("batch2_q{}.csv", cfg.q_exp));
    let mut csv = CsvSink::create(
        path.clone(),
        &comment,
        &[
            "level_coarse",
            "level_fine",
            "h_coarse",
            "h_fine",
            "kappa_coarse",
            "kappa_fine",
            "cauchy_error",
            "newton_iters",
            "active_set_size",
        ],
    )?;
    let kappa_of = |m: &TriMesh| m.h.powf(cfg.q_exp);
    let mut k_coarse = kappa_of(&coarse.mesh);
    let (mut s_coarse, _, _) = solve_at(&coarse, k_coarse, LoadProfile::Dome, &vec![0.0; coarse.len()], cfg.newton())?;
    let mut rows = Vec::new();
    let mut reached_tol = false;
    for level in cfg.min_level + 1..=cfg.max_level {
        let fine = Discretization::new(refine(&coarse.mesh)?);
        let k_fine = kappa_of(&fine.mesh);
        let init = prolongate_state(&coarse, &s_coarse, &fine)?;
        let (s_fine, report, _) = solve_at(&fine, k_fine, LoadProfile::Dome, &init, cfg.newton())?;
        let err = h1_error(&coarse, &s_coarse, &fine, &s_fine)?;
        let row = RefinementRow {
            level_coarse: level - 1,
            level_fine: level,
            h_coarse: coarse.mesh.h,
            h_fine: fine.mesh.h,
            kappa_coarse: k_coarse,
            kappa_fine: k_fine,
            cauchy_error: err,
            newton_iters: report.newton_iters,
            active_set_size: report.active_set_size,
        };
        csv.row(&[
            row.level_coarse.to_string(),
            row.level_fine.to_string(),
            fmt_float(row.h_coarse),
            fmt_float(row.h_fine),
            fmt_float(row.kappa_coarse),
            fmt_float(row.kappa_fine),
            fmt_float(row.cauchy_error),
            row.newton_iters.to_string(),
            row.active_set_size.to_string(),
        ])?;
        rows.push(row);
        (coarse, s_coarse, k_coarse) = (fine, s_fine, k_fine);
        if err < cfg.stop_tol {
            reached_tol = true;
            break;
        }
    }
    Ok(RefinementOutcome {
        iterations: rows.len(),
        rows,
        reached_tol,
        csv: path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndentationRow {
    pub ell: u32,
    pub h: f64,
    pub kappa: f64,
    pub contact_area: f64,
    pub min_gap: f64,
    pub newton_iters: usize,
    pub active_set_size: usize,
    pub vtk: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndentationOutcome {
    pub rows: Vec<IndentationRow>,
    pub csv: PathBuf,
}

/// Batch 3: one solve per load index at fixed `h` and `κ = h^q_exp`, each
/// reported as a contact area and a deformed-surface VTK file. Writes
/// `batch3_contact.csv` and `batch3_ell<ℓ>.vtk`.
pub fn run_batch3(cfg: &ExperimentConfig) -> Result<IndentationOutcome> {
    cfg.validate()?;
    ensure_dir(&cfg.out)?;
    let disc = Discretization::new(family_mesh(DOMAIN_RADIUS, cfg.mesh_level)?);
    let kappa = disc.mesh.h.powf(cfg.q_exp);
    let tol = cfg.contact_tol.unwrap_or(0.0);
    let comment = format!(
        "{} h={} kappa={} mesh_hash={}",
        cfg.describe(),
        fmt_float(disc.mesh.h),
        fmt_float(kappa),
        disc.mesh.content_hash()
    );
    let path = cfg.out.join("batch3_contact.csv");
    let mut csv = CsvSink::create(
        path.clone(),
        &comment,
        &["ell", "h", "kappa", "contact_area", "min_gap", "newton_iters", "active_set_size"],
    )?;
    let mut rows = Vec::new();
    for &ell in &cfg.ell {
        let load = LoadProfile::Indenter { ell };
        let (state, report, sys) = solve_at(&disc, kappa, load, &vec![0.0; disc.len()], cfg.newton())?;
        let area = contact_area(&disc, &sys, &state, tol);
        let min_gap = sys.gaps(&disc, &state).into_iter().fold(f64::INFINITY, f64::min);
        let vtk = cfg.out.join(format!("batch3_ell{ell}.vtk"));
        export_vtk(&disc, sys.params(), &state, &vtk)?;
        let row = IndentationRow {
            ell,
            h: disc.mesh.h,
            kappa,
            contact_area: area,
            min_gap,
            newton_iters: report.newton_iters,
            active_set_size: report.active_set_size,
            vtk,
        };
        csv.row(&[
            ell.to_string(),
            fmt_float(row.h),
            fmt_float(row.kappa),
            fmt_float(row.contact_area),
            fmt_float(row.min_gap),
            row.newton_iters.to_string(),
            row.active_set_size.to_string(),
        ])?;
        rows.push(row);
    }
    Ok(IndentationOutcome { rows, csv: path })
}
