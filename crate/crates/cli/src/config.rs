//! TOML run configuration.
//!
//! A config has four sections. Only `[input]` and `model.fidelity` are
//! required; everything else has a default that is written out in the
//! resolved dump, so `parse(dump(cfg)) == cfg`.
//!
//! ```toml
//! [input.fixture]
//! kind = "ring"
//! inner = 20.0
//! outer = 40.0
//! noise_std = 10.0
//!
//! [init]
//! shape = "rectangle"
//! x0 = 24.0
//! y0 = 24.0
//! x1 = 103.0
//! y1 = 103.0
//!
//! [model]
//! fidelity = "rsf"
//! regularizer = "mbe"
//! alpha = 15.0
//! iter_max = 4000
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mbeseg::fixture::{Bias, FixtureKind, FixtureSpec};
use mbeseg::levelset::{DiracKind, DiracSpec, InitMode, InitSpec, Shape};
use mbeseg::model::{CurvatureForm, Fidelity, ModelSpec, Regularizer, Scheme};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKindName {
    TwoShapes,
    Ring,
    StarCorners,
    BlurredBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasName {
    None,
    Linear,
    RadialGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    pub kind: FixtureKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    /// Rectangle inset `margin` pixels from the image border.
    Inset,
    Rectangle,
    Disk,
    Ring,
    Polygon,
    /// Nonzero pixels of a mask image.
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitModeName {
    BinaryStep,
    SignedDistance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<InitModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityName {
    Gac,
    Rsf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerName {
    Mbe,
    Dr1,
    Dr2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiracName {
    Rational,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureName {
    Literal,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Sav,
    Fdm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<RegularizerName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_edge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirac: Option<DiracName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iter_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Mask,
    ContourOverlay,
    Gradmap,
    Trace,
    FinalPhi,
}

impl Emit {
    pub const ALL: [Emit; 5] = [
        Emit::Mask,
        Emit::ContourOverlay,
        Emit::Gradmap,
        Emit::Trace,
        Emit::FinalPhi,
    ];

    pub fn parse(s: &str) -> Option<Emit> {
        Some(match s.trim() {
            "mask" => Emit::Mask,
            "contour_overlay" => Emit::ContourOverlay,
            "gradmap" => Emit::Gradmap,
            "trace" => Emit::Trace,
            "final_phi" => Emit::FinalPhi,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit: Option<Vec<Emit>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Default iteration count when `iter_max` is not given.
pub const DEFAULT_ITER_MAX: usize = 1000;
pub const DEFAULT_FIXTURE_SIZE: usize = 128;
pub const DEFAULT_INSET_MARGIN: f64 = 10.0;

/// Locates the line of `key` inside `[section]`.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = key_line(self.text, section, key).map_or_else(String::new, |n| format!(" (line {n})"));
        CliError::Config(format!("`{key}`{line}: {msg}"))
    }

    fn require<T: Copy>(&self, section: &str, key: &str, v: Option<T>) -> CliResult<T> {
        v.ok_or_else(|| self.err(section, key, format!("missing in [{section}]")))
    }

    fn forbid<T>(&self, section: &str, key: &str, v: &Option<T>, why: &str) -> CliResult<()> {
        if v.is_some() {
            return Err(self.err(section, key, format!("does not apply {why}")));
        }
        Ok(())
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> CliResult<f64> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.err(section, key, format!("must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn nonnegative(&self, section: &str, key: &str, v: f64) -> CliResult<f64> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(self.err(section, key, format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }
}

fn absolutize(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses `text`, resolving relative paths against `base`.
    pub fn from_str_with_base(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.resolve(text, base)?;
        Ok(cfg)
    }

    /// Resolved config as TOML.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, text: &str, base: &Path) -> CliResult<()> {
        let ctx = Ctx { text };
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };

        // input
        match (&mut self.input.image, &mut self.input.fixture) {
            (Some(_), Some(_)) => return Err(ctx.err("input", "image", "give either `image` or `[input.fixture]`, not both")),
            (None, None) => {
                return Err(CliError::Config(
                    "`input`: missing; set `image` or an `[input.fixture]` table".into(),
                ))
            }
            (Some(path), None) => {
                *path = absolutize(base, path);
                if !path.is_file() {
                    return Err(ctx.err("input", "image", format!("{} does not exist", path.display())));
                }
            }
            (None, Some(fx)) => resolve_fixture(fx, &ctx)?,
        }

        resolve_init(&mut self.init, &ctx, base)?;
        resolve_model(&mut self.model, &ctx)?;

        let out = self.output.dir.get_or_insert_with(|| PathBuf::from("out"));
        *out = absolutize(base, out);
        let emit = self.output.emit.get_or_insert_with(|| Emit::ALL.to_vec());
        emit.sort();
        emit.dedup();
        Ok(())
    }

    pub fn fixture_spec(&self) -> Option<FixtureSpec> {
        self.input.fixture.as_ref().map(fixture_spec)
    }

    pub fn model_spec(&self) -> ModelSpec {
        model_spec(&self.model)
    }

    /// Initial shape and mode for a `width x height` image.
    pub fn init_spec(&self, width: usize, height: usize) -> CliResult<InitSpec> {
        let i = &self.init;
        let shape = match i.shape.unwrap() {
            ShapeName::Inset => {
                let m = i.margin.unwrap();
                Shape::Rectangle {
                    x0: m,
                    y0: m,
                    x1: width as f64 - 1.0 - m,
                    y1: height as f64 - 1.0 - m,
                }
            }
            ShapeName::Rectangle => Shape::Rectangle {
                x0: i.x0.unwrap(),
                y0: i.y0.unwrap(),
                x1: i.x1.unwrap(),
                y1: i.y1.unwrap(),
            },
            ShapeName::Disk => Shape::Disk {
                cx: i.cx.unwrap(),
                cy: i.cy.unwrap(),
                radius: i.radius.unwrap(),
            },
            ShapeName::Ring => Shape::Ring {
                cx: i.cx.unwrap(),
                cy: i.cy.unwrap(),
                inner: i.inner.unwrap(),
                outer: i.outer.unwrap(),
            },
            ShapeName::Polygon => Shape::Polygon(i.points.as_ref().unwrap().iter().map(|p| (p[0], p[1])).collect()),
            ShapeName::Mask => {
                let path = i.path.as_ref().unwrap();
                let img = crate::imageio::load_image(path)?;
                if img.dims() != (width, height) {
                    return Err(CliError::Config(format!(
                        "`path`: init mask {} is {}x{} but the image is {width}x{height}",
                        path.display(),
                        img.width(),
                        img.height()
                    )));
                }
                Shape::Mask(img.map(|x| if x > 127.5 { 1.0 } else { 0.0 }))
            }
        };
        let mode = match i.mode.unwrap() {
            InitModeName::BinaryStep => InitMode::BinaryStep { c: i.c.unwrap() },
            InitModeName::SignedDistance => InitMode::SignedDistance,
        };
        Ok(InitSpec { shape, mode })
    }
}

fn resolve_fixture(fx: &mut FixtureConfig, ctx: &Ctx) -> CliResult<()> {
    const S: &str = "input.fixture";
    let w = *fx.width.get_or_insert(DEFAULT_FIXTURE_SIZE);
    let h = *fx.height.get_or_insert(DEFAULT_FIXTURE_SIZE);
    for (key, v) in [("width", w), ("height", h)] {
        if v < 8 {
            return Err(ctx.err(S, key, format!("must be at least 8, got {v}")));
        }
    }
    if fx.kind == FixtureKindName::Ring {
        let inner = ctx.positive(S, "inner", ctx.require(S, "inner", fx.inner)?)?;
        let outer = ctx.positive(S, "outer", ctx.require(S, "outer", fx.outer)?)?;
        if outer <= inner {
            return Err(ctx.err(S, "outer", format!("must exceed inner = {inner}")));
        }
    } else {
        ctx.forbid(S, "inner", &fx.inner, "to non-ring fixtures")?;
        ctx.forbid(S, "outer", &fx.outer, "to non-ring fixtures")?;
    }
    match *fx.bias.get_or_insert(BiasName::None) {
        BiasName::None => {
            ctx.forbid(S, "gain", &fx.gain, "without a linear bias")?;
            ctx.forbid(S, "sigma_b", &fx.sigma_b, "without a radial_gaussian bias")?;
            ctx.forbid(S, "amplitude", &fx.amplitude, "without a radial_gaussian bias")?;
        }
        BiasName::Linear => {
            ctx.require(S, "gain", fx.gain)?;
            ctx.forbid(S, "sigma_b", &fx.sigma_b, "to a linear bias")?;
            ctx.forbid(S, "amplitude", &fx.amplitude, "to a linear bias")?;
        }
        BiasName::RadialGaussian => {
            ctx.positive(S, "sigma_b", ctx.require(S, "sigma_b", fx.sigma_b)?)?;
            ctx.require(S, "amplitude", fx.amplitude)?;
            ctx.forbid(S, "gain", &fx.gain, "to a radial_gaussian bias")?;
        }
    }
    ctx.nonnegative(S, "noise_std", *fx.noise_std.get_or_insert(0.0))?;
    fx.seed.get_or_insert(0);
    fixture_spec(fx)
        .validate()
        .map_err(|e| ctx.err(S, if fx.kind == FixtureKindName::Ring { "outer" } else { "kind" }, e))
}

fn fixture_spec(fx: &FixtureConfig) -> FixtureSpec {
    let kind = match fx.kind {
        FixtureKindName::TwoShapes => FixtureKind::TwoShapes,
        FixtureKindName::Ring => FixtureKind::Ring {
            inner: fx.inner.unwrap(),
            outer: fx.outer.unwrap(),
        },
        FixtureKindName::StarCorners => FixtureKind::StarCorners,
        FixtureKindName::BlurredBoundary => FixtureKind::BlurredBoundary,
    };
    let bias = match fx.bias.unwrap_or(BiasName::None) {
        BiasName::None => Bias::None,
        BiasName::Linear => Bias::Linear { gain: fx.gain.unwrap() },
        BiasName::RadialGaussian => Bias::RadialGaussian {
            sigma_b: fx.sigma_b.unwrap(),
            amplitude: fx.amplitude.unwrap(),
        },
    };
    FixtureSpec {
        kind,
        width: fx.width.unwrap(),
        height: fx.height.unwrap(),
        bias,
        noise_std: fx.noise_std.unwrap(),
        seed: fx.seed.unwrap(),
    }
}

fn resolve_init(i: &mut InitConfig, ctx: &Ctx, base: &Path) -> CliResult<()> {
    const S: &str = "init";
    let shape = *i.shape.get_or_insert(ShapeName::Inset);
    let uses = |k: &str| -> bool {
        match shape {
            ShapeName::Inset => k == "margin",
            ShapeName::Rectangle => matches!(k, "x0" | "y0" | "x1" | "y1"),
            ShapeName::Disk => matches!(k, "cx" | "cy" | "radius"),
            ShapeName::Ring => matches!(k, "cx" | "cy" | "inner" | "outer"),
            ShapeName::Polygon => k == "points",
            ShapeName::Mask => k == "path",
        }
    };
    let present: [(&str, bool); 12] = [
        ("margin", i.margin.is_some()),
        ("x0", i.x0.is_some()),
        ("y0", i.y0.is_some()),
        ("x1", i.x1.is_some()),
        ("y1", i.y1.is_some()),
        ("cx", i.cx.is_some()),
        ("cy", i.cy.is_some()),
        ("radius", i.radius.is_some()),
        ("inner", i.inner.is_some()),
        ("outer", i.outer.is_some()),
        ("points", i.points.is_some()),
        ("path", i.path.is_some()),
    ];
    for (k, set) in present {
        if set && !uses(k) {
            return Err(ctx.err(S, k, format!("does not apply to shape {shape:?}")));
        }
        if !set && uses(k) && !(k == "margin") {
            return Err(ctx.err(S, k, format!("missing in [init] for shape {shape:?}")));
        }
    }
    match shape {
        ShapeName::Inset => {
            ctx.nonnegative(S, "margin", *i.margin.get_or_insert(DEFAULT_INSET_MARGIN))?;
        }
        ShapeName::Disk => {
            ctx.positive(S, "radius", i.radius.unwrap())?;
        }
        ShapeName::Ring => {
            let inner = ctx.nonnegative(S, "inner", i.inner.unwrap())?;
            if i.outer.unwrap() <= inner {
                return Err(ctx.err(S, "outer", "must exceed inner"));
            }
        }
        ShapeName::Polygon => {
            if i.points.as_ref().unwrap().len() < 3 {
                return Err(ctx.err(S, "points", "a polygon needs at least 3 vertices"));
            }
        }
        ShapeName::Mask => {
            let p = i.path.as_mut().unwrap();
            *p = absolutize(base, p);
            if !p.is_file() {
                return Err(ctx.err(S, "path", format!("{} does not exist", p.display())));
            }
        }
        ShapeName::Rectangle => {}
    }
    match *i.mode.get_or_insert(InitModeName::BinaryStep) {
        InitModeName::BinaryStep => {
            ctx.positive(S, "c", *i.c.get_or_insert(2.0))?;
        }
        InitModeName::SignedDistance => ctx.forbid(S, "c", &i.c, "to signed_distance initialization")?,
    }
    Ok(())
}

fn resolve_model(m: &mut ModelConfig, ctx: &Ctx) -> CliResult<()> {
    const S: &str = "model";
    let fidelity = m
        .fidelity
        .ok_or_else(|| CliError::Config("`fidelity`: missing in [model]; use \"gac\" or \"rsf\"".into()))?;
    let regularizer = *m.regularizer.get_or_insert(RegularizerName::Mbe);
    m.mu.get_or_insert(1.0);
    if regularizer == RegularizerName::Mbe {
        m.alpha.get_or_insert(15.0);
    } else {
        ctx.forbid(S, "alpha", &m.alpha, "to distance regularizers")?;
    }
    match fidelity {
        FidelityName::Gac => {
            for (k, v) in [("lambda1", m.lambda1), ("lambda2", m.lambda2), ("sigma", m.sigma), ("nu", m.nu)] {
                ctx.forbid(S, k, &v, "to the gac fidelity")?;
            }
            m.lambda.get_or_insert(1.0);
            m.gamma.get_or_insert(mbeseg::model::DEFAULT_GAMMA);
            m.sigma_edge.get_or_insert(1.5);
        }
        FidelityName::Rsf => {
            for (k, v) in [("lambda", m.lambda), ("gamma", m.gamma), ("sigma_edge", m.sigma_edge)] {
                ctx.forbid(S, k, &v, "to the rsf fidelity")?;
            }
            m.lambda1.get_or_insert(0.33);
            m.lambda2.get_or_insert(0.67);
            m.sigma.get_or_insert(5.0);
            m.nu.get_or_insert(10.0);
        }
    }
    m.dirac.get_or_insert(DiracName::Rational);
    m.epsilon.get_or_insert(1.0);
    m.curvature.get_or_insert(CurvatureName::Literal);
    m.scheme.get_or_insert(SchemeName::Sav);
    m.tau.get_or_insert(0.01);
    m.iter_max.get_or_insert(DEFAULT_ITER_MAX);
    m.c0.get_or_insert(mbeseg::model::DEFAULT_C0);

    let spec = model_spec(m);
    spec.validate().map_err(|e| match e {
        mbeseg::Error::InvalidParameter { name, reason } => ctx.err(S, name, reason),
        other => CliError::Config(other.to_string()),
    })?;
    if spec.scheme == Scheme::Fdm {
        if let Regularizer::Mbe { mu, alpha } = spec.regularizer {
            if spec.tau * mu >= 3.0 * alpha {
                return Err(ctx.err(
                    S,
                    "tau",
                    format!("the fdm scheme needs tau * mu < 3 alpha, got {} >= {}", spec.tau * mu, 3.0 * alpha),
                ));
            }
        }
    }
    Ok(())
}

fn model_spec(m: &ModelConfig) -> ModelSpec {
    let mu = m.mu.unwrap();
    let regularizer = match m.regularizer.unwrap() {
        RegularizerName::Mbe => Regularizer::Mbe {
            mu,
            alpha: m.alpha.unwrap(),
        },
        RegularizerName::Dr1 => Regularizer::Dr1 { mu },
        RegularizerName::Dr2 => Regularizer::Dr2 { mu },
    };
    let fidelity = match m.fidelity.unwrap() {
        FidelityName::Gac => Fidelity::Gac {
            lambda: m.lambda.unwrap(),
            gamma: m.gamma.unwrap(),
            sigma_edge: m.sigma_edge.unwrap(),
        },
        FidelityName::Rsf => Fidelity::Rsf {
            lambda1: m.lambda1.unwrap(),
            lambda2: m.lambda2.unwrap(),
            sigma: m.sigma.unwrap(),
            nu: m.nu.unwrap(),
        },
    };
    let scheme = match m.scheme.unwrap() {
        SchemeName::Sav => Scheme::Sav,
        SchemeName::Fdm => Scheme::Fdm,
    };
    let mut spec = ModelSpec::new(fidelity, regularizer, scheme, m.tau.unwrap(), m.iter_max.unwrap());
    spec.dirac = DiracSpec {
        kind: match m.dirac.unwrap() {
            DiracName::Rational => DiracKind::Rational,
            DiracName::Compact => DiracKind::Compact,
        },
        epsilon: m.epsilon.unwrap(),
    };
    spec.curvature = match m.curvature.unwrap() {
        CurvatureName::Literal => CurvatureForm::Literal,
        CurvatureName::Variational => CurvatureForm::Variational,
    };
    spec.tol = m.tol;
    spec.c0 = m.c0.unwrap();
    spec
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::from_str_with_base(&text, base).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a standalone fixture description (the keys of `[input.fixture]`).
pub fn parse_fixture(path: &Path) -> CliResult<FixtureConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut fx: FixtureConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
    // reuse the section-aware line lookup by prefixing a header
    let mut shifted = String::from("[input.fixture]\n");
    shifted.push_str(&text);
    resolve_fixture(&mut fx, &Ctx { text: &shifted }).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {}", path.display(), shift_line(&msg))),
        other => other,
    })?;
    Ok(fx)
}

fn shift_line(msg: &str) -> String {
    // undo the one-line header offset in "(line N)"
    if let Some(start) = msg.find("(line ") {
        let rest = &msg[start + 6..];
        if let Some(end) = rest.find(')') {
            if let Ok(n) = rest[..end].parse::<usize>() {
                let mut s = String::new();
                write!(s, "{}(line {}){}", &msg[..start], n - 1, &rest[end + 1..]).unwrap();
                return s;
            }
        }
    }
    msg.to_string()
}

pub fn dump_fixture(fx: &FixtureConfig) -> String {
    toml::to_string(fx).expect("fixture serializes")
}

pub fn fixture_config_spec(fx: &FixtureConfig) -> FixtureSpec {
    fixture_spec(fx)
}
