//! Running a config and writing its artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mbeseg::levelset::{extract_zero_contour, init_level_set, Polyline};
use mbeseg::solver::{EnergyTrace, SegmentationResult, Solver};
use mbeseg::{fixture, ScalarField2D};

use crate::config::{Emit, RunConfig};
use crate::error::{CliError, CliResult};
use crate::imageio;

pub const MASK_FILE: &str = "mask.png";
pub const GRADMAP_FILE: &str = "gradmap.png";
pub const GRADMAP_SCALE_FILE: &str = "gradmap_scale.txt";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const CONTOURS_FILE: &str = "contours.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const PHI_FILE: &str = "final_phi.txt";
pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Run-time overrides that do not belong in a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub quiet: bool,
    /// Caps `iter_max` (used for quick suite runs).
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: SegmentationResult,
    pub image: ScalarField2D,
    pub truth: Option<ScalarField2D>,
    pub dice: Option<f64>,
    pub wall_time: f64,
    pub files: Vec<PathBuf>,
}

/// Loads the input image (and ground truth for fixtures).
pub fn load_input(cfg: &RunConfig) -> CliResult<(ScalarField2D, Option<ScalarField2D>)> {
    if let Some(spec) = cfg.fixture_spec() {
        let (img, truth) = fixture::generate(&spec)?;
        Ok((img, Some(truth)))
    } else {
        let path = cfg.input.image.as_ref().expect("validated input");
        Ok((imageio::load_image(path)?, None))
    }
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs `cfg` and writes the requested artifacts into its output directory.
/// On a numerical failure the trace so far and the manifest are still written.
pub fn run_config(cfg: &RunConfig, opts: &RunOptions) -> CliResult<RunOutcome> {
    let dir = cfg.output.dir.clone().expect("resolved output dir");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (image, truth) = load_input(cfg)?;
    let init = cfg.init_spec(image.width(), image.height())?;
    let phi0 = init_level_set(image.width(), image.height(), &init)?;
    let mut model = cfg.model_spec();
    if let Some(cap) = opts.max_iter {
        model.iter_max = model.iter_max.min(cap);
    }

    let mut manifest = Manifest::default();
    write(&dir.join(CONFIG_FILE), &cfg.dump())?;
    manifest.add(CONFIG_FILE, "resolved configuration");

    let emit = cfg.output.emit.clone().unwrap_or_default();
    let start = Instant::now();
    let solver = Solver::new(&model, &image)?;
    let mut trace = EnergyTrace::default();
    let result = match solver.run_with_trace(&phi0, &mut trace) {
        Ok(r) => r,
        Err(e) => {
            if emit.contains(&Emit::Trace) {
                write(&dir.join(TRACE_FILE), &trace.to_csv())?;
                manifest.add(TRACE_FILE, "energy trace up to the failure");
            }
            manifest.note = Some(format!("run failed: {e}"));
            manifest.write(&dir)?;
            return Err(e.into());
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    if !opts.quiet {
        eprintln!(
            "{} iterations{}, E_mod {:.6e}",
            result.iterations,
            if result.converged { " (converged)" } else { "" },
            result.trace.rows.last().map_or(f64::NAN, |r| r.e_mod)
        );
    }

    write_artifacts(&dir, &image, &result, &emit, &mut manifest)?;
    let dice = match &truth {
        Some(t) => Some(fixture::dice(&result.mask, t)?),
        None => None,
    };
    if let Some(d) = dice {
        manifest.note = Some(format!("dice vs fixture truth: {d:.6}"));
    }
    manifest.write(&dir)?;
    let files = manifest.entries.keys().map(|k| dir.join(k)).collect();
    Ok(RunOutcome {
        result,
        image,
        truth,
        dice,
        wall_time,
        files,
    })
}

#[derive(Debug, Default)]
struct Manifest {
    entries: BTreeMap<String, String>,
    note: Option<String>,
}

impl Manifest {
    fn add(&mut self, file: &str, what: &str) {
        self.entries.insert(file.to_string(), what.to_string());
    }

    fn write(&mut self, dir: &Path) -> CliResult<()> {
        self.add(MANIFEST_FILE, "this file");
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k}\t{v}").unwrap();
        }
        if let Some(n) = &self.note {
            writeln!(s, "# {n}").unwrap();
        }
        write(&dir.join(MANIFEST_FILE), &s)
    }
}

fn write_artifacts(
    dir: &Path,
    image: &ScalarField2D,
    result: &SegmentationResult,
    emit: &[Emit],
    manifest: &mut Manifest,
) -> CliResult<()> {
    for e in emit {
        match e {
            Emit::Mask => {
                imageio::save_gray8(&dir.join(MASK_FILE), &result.mask.scaled(255.0))?;
                manifest.add(MASK_FILE, "segmentation mask, 255 where phi > 0");
            }
            Emit::Gradmap => {
                let (img, max) = gradmap(&result.phi);
                imageio::save_gray8(&dir.join(GRADMAP_FILE), &img)?;
                write(&dir.join(GRADMAP_SCALE_FILE), &format!("min = 0\nmax = {max:?}\n"))?;
                manifest.add(GRADMAP_FILE, "|grad phi| scaled linearly from [min, max] to [0, 255]");
                manifest.add(GRADMAP_SCALE_FILE, "gradmap scale bounds");
            }
            Emit::ContourOverlay => {
                let lines = extract_zero_contour(&result.phi);
                let rgb = overlay(image, &lines);
                imageio::save_rgb8(&dir.join(OVERLAY_FILE), &rgb, image.width(), image.height())?;
                write(&dir.join(CONTOURS_FILE), &contours_text(&lines))?;
                manifest.add(OVERLAY_FILE, "input image with the zero contour in red");
                manifest.add(CONTOURS_FILE, "zero-contour polylines, `x y` per line, blank line between polylines");
            }
            Emit::Trace => {
                write(&dir.join(TRACE_FILE), &result.trace.to_csv())?;
                manifest.add(TRACE_FILE, "per-iteration energy trace");
            }
            Emit::FinalPhi => {
                write(&dir.join(PHI_FILE), &matrix_text(&result.phi))?;
                manifest.add(PHI_FILE, "final level set, one image row per line");
            }
        }
    }
    Ok(())
}

/// `|grad phi|` mapped linearly from `[0, max]` to `[0, 255]`, and `max`.
pub fn gradmap(phi: &ScalarField2D) -> (ScalarField2D, f64) {
    let g = mbeseg::field::gradient_magnitude(phi, 0.0).expect("grid checked by the solver");
    let max = g.max();
    let s = if max > 0.0 { 255.0 / max } else { 0.0 };
    (g.scaled(s), max)
}

pub fn contours_text(lines: &[Polyline]) -> String {
    let mut s = String::new();
    for (n, line) in lines.iter().enumerate() {
        if n > 0 {
            s.push('\n');
        }
        for &(x, y) in &line.points {
            writeln!(s, "{x} {y}").unwrap();
        }
        if line.closed {
            if let Some(&(x, y)) = line.points.first() {
                writeln!(s, "{x} {y}").unwrap();
            }
        }
    }
    s
}

pub fn matrix_text(f: &ScalarField2D) -> String {
    let mut s = String::with_capacity(f.len() * 24);
    for j in 0..f.height() {
        for i in 0..f.width() {
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{:.16e}", f.get(i, j)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Grayscale rendition of `image` with contour pixels painted red.
pub fn overlay(image: &ScalarField2D, lines: &[Polyline]) -> Vec<u8> {
    let (w, h) = image.dims();
    let mut rgb = Vec::with_capacity(3 * w * h);
    for &x in image.as_slice() {
        let v = imageio::to_u8(x);
        rgb.extend_from_slice(&[v, v, v]);
    }
    let mut paint = |x: f64, y: f64| {
        let (i, j) = (x.round(), y.round());
        if i >= 0.0 && j >= 0.0 && (i as usize) < w && (j as usize) < h {
            let k = 3 * (j as usize * w + i as usize);
            rgb[k..k + 3].copy_from_slice(&[255, 0, 0]);
        }
    };
    for line in lines {
        let n = line.points.len();
        let segs = if line.closed { n } else { n.saturating_sub(1) };
        for s in 0..segs {
            let (a, b) = (line.points[s], line.points[(s + 1) % n]);
            let steps = ((b.0 - a.0).hypot(b.1 - a.1) * 4.0).ceil().max(1.0) as usize;
            for t in 0..=steps {
                let u = t as f64 / steps as f64;
                paint(a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1));
            }
        }
        if n == 1 {
            paint(line.points[0].0, line.points[0].1);
        }
    }
    rgb
}
