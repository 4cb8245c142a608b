//! Fixed experiment matrices and their parallel runner.
//!
//! Every member is an ordinary [`RunConfig`] writing into its own
//! subdirectory, so any member can be rerun alone with `mbeseg run`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{
    FidelityName, FixtureConfig, FixtureKindName, InitConfig, InitModeName, InputConfig, ModelConfig, OutputConfig,
    RegularizerName, RunConfig, ShapeName,
};
use crate::emit::{run_config, RunOptions, RunOutcome};
use crate::error::{CliError, CliResult};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const SUMMARY_HEADER: &str = "member,dice,grad_max,monotone,iterations,wall_time_s";

/// Fixture edge length used by every suite.
pub const SUITE_SIZE: usize = 128;
pub const RING_INNER: f64 = 20.0;
pub const RING_OUTER: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    InitIndependence,
    SmoothnessSweep,
    NoiseSweep,
    SavStability,
}

impl SuiteName {
    pub const ALL: [SuiteName; 4] = [
        SuiteName::InitIndependence,
        SuiteName::SmoothnessSweep,
        SuiteName::NoiseSweep,
        SuiteName::SavStability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::InitIndependence => "init_independence",
            SuiteName::SmoothnessSweep => "smoothness_sweep",
            SuiteName::NoiseSweep => "noise_sweep",
            SuiteName::SavStability => "sav_stability",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                format!("unknown suite `{s}`; expected one of {}", names.join(", "))
            })
    }
}

/// Parameters shared by member-config builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsfRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma: f64,
    pub regularizer: RegularizerName,
    pub mu: f64,
    /// Only used by the MBE regularizer.
    pub alpha: f64,
    pub nu: f64,
    pub tau: f64,
    pub iter_max: usize,
}

impl RsfRow {
    pub const fn mbe(lambda: (f64, f64), sigma: f64, mu: f64, alpha: f64, nu: f64, tau: f64, iter_max: usize) -> Self {
        Self {
            lambda1: lambda.0,
            lambda2: lambda.1,
            sigma,
            regularizer: RegularizerName::Mbe,
            mu,
            alpha,
            nu,
            tau,
            iter_max,
        }
    }

    pub const fn dr2(lambda: (f64, f64), sigma: f64, mu: f64, nu: f64, tau: f64, iter_max: usize) -> Self {
        Self {
            lambda1: lambda.0,
            lambda2: lambda.1,
            sigma,
            regularizer: RegularizerName::Dr2,
            mu,
            alpha: 0.0,
            nu,
            tau,
            iter_max,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            fidelity: Some(FidelityName::Rsf),
            regularizer: Some(self.regularizer),
            mu: Some(self.mu),
            alpha: (self.regularizer == RegularizerName::Mbe).then_some(self.alpha),
            lambda1: Some(self.lambda1),
            lambda2: Some(self.lambda2),
            sigma: Some(self.sigma),
            nu: Some(self.nu),
            tau: Some(self.tau),
            iter_max: Some(self.iter_max),
            ..Default::default()
        }
    }

    fn tag(&self) -> String {
        match self.regularizer {
            RegularizerName::Mbe => format!("mbe_a{}_nu{}", self.alpha, self.nu),
            other => format!("{}_mu{}_nu{}", format!("{other:?}").to_lowercase(), self.mu, self.nu),
        }
    }
}

const L_RING: (f64, f64) = (0.33, 0.67);

/// Noisy ring, noise 10: MBE-RSF rows then DR2-RSF rows.
pub const NOISE_10_ROWS: [RsfRow; 6] = [
    RsfRow::mbe(L_RING, 5.0, 1.0, 15.0, 10.0, 0.01, 4000),
    RsfRow::mbe(L_RING, 5.0, 1.0, 15.0, 20.0, 0.01, 4000),
    RsfRow::mbe(L_RING, 5.0, 1.0, 20.0, 0.0, 0.01, 4000),
    RsfRow::dr2(L_RING, 5.0, 6.6, 20.0, 0.015, 2000),
    RsfRow::dr2(L_RING, 5.0, 6.6, 100.0, 0.015, 2000),
    RsfRow::dr2(L_RING, 5.0, 8.0, 150.0, 0.013, 4000),
];

/// Noisy ring, noise 15. The MBE column headed by a delta is read as alpha.
pub const NOISE_15_ROWS: [RsfRow; 6] = [
    RsfRow::mbe((0.4, 0.6), 6.0, 10.0, 10.0, 0.0, 0.001, 20000),
    RsfRow::mbe((0.4, 0.6), 6.0, 10.0, 20.0, 0.0, 0.001, 20000),
    RsfRow::mbe((0.4, 0.6), 6.0, 10.0, 30.0, 0.0, 0.001, 20000),
    RsfRow::dr2((0.4, 0.6), 6.0, 7.0, 1.0, 0.012, 8000),
    RsfRow::dr2((0.4, 0.6), 6.0, 200.0, 1.0, 0.0005, 30000),
    RsfRow::dr2((0.4, 0.6), 6.0, 50.0, 100.0, 0.002, 10000),
];

/// Blurred-boundary disk.
pub const BLURRED_ROWS: [RsfRow; 6] = [
    RsfRow::mbe((1.0, 2.0), 3.0, 1.0, 50.0, 0.0, 0.01, 3000),
    RsfRow::mbe((1.0, 2.0), 3.0, 1.0, 100.0, 0.0, 0.01, 3000),
    RsfRow::mbe((1.0, 2.0), 3.0, 1.0, 200.0, 0.0, 0.01, 3000),
    RsfRow::mbe((1.0, 3.0), 3.0, 1.0, 1.0, 10.0, 0.01, 10000),
    RsfRow::mbe((1.0, 3.0), 3.0, 1.0, 5.0, 10.0, 0.01, 10000),
    RsfRow::mbe((1.0, 3.0), 3.0, 1.0, 20.0, 10.0, 0.01, 10000),
];

/// Clean ring, varying alpha and nu.
pub const CLEAN_RING_ROWS: [RsfRow; 6] = [
    RsfRow::mbe(L_RING, 3.0, 1.0, 1.0, 0.0, 0.01, 2000),
    RsfRow::mbe(L_RING, 3.0, 1.0, 1.0, 10.0, 0.01, 2000),
    RsfRow::mbe(L_RING, 3.0, 1.0, 10.0, 10.0, 0.01, 2000),
    RsfRow::mbe(L_RING, 3.0, 1.0, 100.0, 0.0, 0.01, 2000),
    RsfRow::mbe(L_RING, 3.0, 1.0, 100.0, 10.0, 0.01, 2000),
    RsfRow::mbe(L_RING, 3.0, 1.0, 1.0, 500.0, 0.01, 2000),
];

/// Star with sharp corners.
pub const STAR_ROWS: [RsfRow; 6] = [
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 10.0, 0.0, 0.01, 600),
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 30.0, 100.0, 0.01, 600),
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 200.0, 0.0, 0.01, 600),
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 10.0, 1000.0, 0.01, 600),
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 100.0, 100.0, 0.01, 600),
    RsfRow::mbe((1.0, 3.5), 3.0, 1.0, 200.0, 100.0, 0.01, 600),
];

/// Default MBE-RSF row on the two-shape fixture.
pub const TWO_SHAPES_ROW: RsfRow = RsfRow::mbe(L_RING, 5.0, 1.0, 15.0, 10.0, 0.01, 2000);

/// Time steps swept by the stability suite.
pub const SAV_TAUS: [f64; 4] = [0.01, 0.1, 0.5, 1.0];
pub const SAV_ITERATIONS: usize = 1000;

pub fn fixture(kind: FixtureKindName, noise_std: f64, seed: u64) -> FixtureConfig {
    let ring = kind == FixtureKindName::Ring;
    FixtureConfig {
        kind,
        width: Some(SUITE_SIZE),
        height: Some(SUITE_SIZE),
        inner: ring.then_some(RING_INNER),
        outer: ring.then_some(RING_OUTER),
        bias: None,
        gain: None,
        sigma_b: None,
        amplitude: None,
        noise_std: Some(noise_std),
        seed: Some(seed),
    }
}

pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, mode: InitModeName) -> InitConfig {
    InitConfig {
        shape: Some(ShapeName::Rectangle),
        mode: Some(mode),
        x0: Some(x0),
        y0: Some(y0),
        x1: Some(x1),
        y1: Some(y1),
        ..Default::default()
    }
}

/// Initial rectangle per fixture: a few pixels outside the object, not so far
/// that the homogeneous background becomes the cheaper interior.
pub fn default_init(kind: FixtureKindName, mode: InitModeName) -> InitConfig {
    match kind {
        FixtureKindName::Ring => rectangle(24.0, 24.0, 103.0, 103.0, mode),
        FixtureKindName::TwoShapes => rectangle(10.0, 26.0, 117.0, 101.0, mode),
        FixtureKindName::BlurredBoundary => rectangle(20.0, 20.0, 107.0, 107.0, mode),
        FixtureKindName::StarCorners => rectangle(8.0, 8.0, 119.0, 119.0, mode),
    }
}

/// Validates a config assembled in code, writing into `dir`.
pub fn assemble(fixture: FixtureConfig, init: InitConfig, model: ModelConfig, dir: &Path) -> CliResult<RunConfig> {
    let raw = RunConfig {
        input: InputConfig {
            image: None,
            fixture: Some(fixture),
        },
        init,
        model,
        output: OutputConfig {
            dir: Some(dir.to_path_buf()),
            emit: None,
        },
    };
    RunConfig::from_str_with_base(&raw.dump(), dir)
}

#[derive(Debug, Clone)]
pub struct Member {
    pub name: String,
    pub config: RunConfig,
}

/// Noise seed shared by all noisy members unless overridden.
pub const DEFAULT_SEED: u64 = 1;

fn rsf_members(
    prefix: &str,
    kind: FixtureKindName,
    noise: f64,
    seed: u64,
    rows: &[RsfRow],
    out: &Path,
    members: &mut Vec<Member>,
) -> CliResult<()> {
    for (n, row) in rows.iter().enumerate() {
        let name = format!("{prefix}_{}_{}", n + 1, row.tag());
        let config = assemble(
            fixture(kind, noise, seed),
            default_init(kind, InitModeName::BinaryStep),
            row.model(),
            &out.join(&name),
        )?;
        members.push(Member { name, config });
    }
    Ok(())
}

/// The fixed config matrix of `suite`, with outputs under `out/<member>`.
pub fn members(suite: SuiteName, out: &Path, seed: Option<u64>) -> CliResult<Vec<Member>> {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let mut members = Vec::new();
    match suite {
        SuiteName::InitIndependence => {
            for (tag, mode) in [
                ("binary_step", InitModeName::BinaryStep),
                ("signed_distance", InitModeName::SignedDistance),
            ] {
                let name = format!("two_shapes_{tag}");
                let config = assemble(
                    fixture(FixtureKindName::TwoShapes, 0.0, seed),
                    default_init(FixtureKindName::TwoShapes, mode),
                    TWO_SHAPES_ROW.model(),
                    &out.join(&name),
                )?;
                members.push(Member { name, config });
            }
        }
        SuiteName::SmoothnessSweep => {
            rsf_members("blurred", FixtureKindName::BlurredBoundary, 0.0, seed, &BLURRED_ROWS, out, &mut members)?;
            rsf_members("ring", FixtureKindName::Ring, 0.0, seed, &CLEAN_RING_ROWS, out, &mut members)?;
            rsf_members("star", FixtureKindName::StarCorners, 0.0, seed, &STAR_ROWS, out, &mut members)?;
        }
        SuiteName::NoiseSweep => {
            rsf_members("noise10", FixtureKindName::Ring, 10.0, seed, &NOISE_10_ROWS, out, &mut members)?;
            rsf_members("noise15", FixtureKindName::Ring, 15.0, seed, &NOISE_15_ROWS, out, &mut members)?;
        }
        SuiteName::SavStability => {
            for tau in SAV_TAUS {
                let name = format!("ring_tau{tau}");
                let mut row = NOISE_10_ROWS[0];
                row.tau = tau;
                row.iter_max = SAV_ITERATIONS;
                let config = assemble(
                    fixture(FixtureKindName::Ring, 10.0, seed),
                    default_init(FixtureKindName::Ring, InitModeName::BinaryStep),
                    row.model(),
                    &out.join(&name),
                )?;
                members.push(Member { name, config });
            }
        }
    }
    Ok(members)
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub emit: Option<Vec<crate::config::Emit>>,
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub member: String,
    pub dice: Option<f64>,
    pub grad_max: f64,
    pub monotone: bool,
    pub iterations: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub rows: Vec<SummaryRow>,
    /// Suite-level verdicts, e.g. the pairwise Dice of the init members.
    pub checks: Vec<(String, bool)>,
    pub dir: PathBuf,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let dice = r.dice.map_or_else(String::new, |d| format!("{d:.6}"));
            writeln!(
                s,
                "{},{dice},{:.6},{},{},{:.3}",
                r.member, r.grad_max, r.monotone, r.iterations, r.wall_time
            )
            .unwrap();
        }
        s
    }

    pub fn report_text(&self) -> String {
        let mut s = format!("suite {}\n", self.suite);
        for (what, ok) in &self.checks {
            writeln!(s, "{} {what}", if *ok { "PASS" } else { "FAIL" }).unwrap();
        }
        s
    }
}

fn summary_row(name: &str, o: &RunOutcome) -> SummaryRow {
    SummaryRow {
        member: name.to_string(),
        dice: o.dice,
        grad_max: o.result.trace.rows.last().map_or(f64::NAN, |r| r.grad_max),
        monotone: o.result.trace.is_monotone(),
        iterations: o.result.iterations,
        wall_time: o.wall_time,
    }
}

/// Pairwise Dice threshold for the initialization suite.
pub const INIT_PAIR_DICE: f64 = 0.99;
/// Ring Dice threshold for the first noise-10 row.
pub const NOISE_RING_DICE: f64 = 0.95;

fn suite_checks(suite: SuiteName, members: &[Member], outcomes: &[RunOutcome]) -> CliResult<Vec<(String, bool)>> {
    let mut checks = Vec::new();
    match suite {
        SuiteName::InitIndependence => {
            let d = mbeseg::dice(&outcomes[0].result.mask, &outcomes[1].result.mask)?;
            checks.push((format!("pairwise dice {d:.6} >= {INIT_PAIR_DICE}"), d >= INIT_PAIR_DICE));
        }
        SuiteName::SavStability => {
            for (m, o) in members.iter().zip(outcomes) {
                let inc = o.result.trace.max_relative_increase();
                checks.push((
                    format!("{} modified energy non-increasing (max relative step {inc:.3e})", m.name),
                    o.result.trace.is_monotone(),
                ));
            }
        }
        SuiteName::NoiseSweep => {
            let mbe = outcomes[0].dice.unwrap_or(0.0);
            let dr2 = outcomes[3].dice.unwrap_or(0.0);
            checks.push((format!("{} dice {mbe:.6} >= {NOISE_RING_DICE}", members[0].name), mbe >= NOISE_RING_DICE));
            checks.push((format!("{} dice {dr2:.6} < {mbe:.6}", members[3].name), dr2 < mbe));
        }
        SuiteName::SmoothnessSweep => {}
    }
    Ok(checks)
}

/// Runs every member of `suite` under `out`, up to `opts.jobs` at a time, and
/// writes `summary.csv` and `report.txt`. A failing member fails the suite.
pub fn run_suite(suite: SuiteName, out: &Path, opts: &SuiteOptions) -> CliResult<SuiteReport> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut members = members(suite, out, opts.seed)?;
    for m in &mut members {
        if opts.tol.is_some() {
            m.config.model.tol = opts.tol;
        }
        if let Some(e) = &opts.emit {
            m.config.output.emit = Some(e.clone());
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<RunOutcome>> =
        pool.install(|| members.par_iter().map(|m| run_config(&m.config, &opts.run)).collect());

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    let mut failure = None;
    for (m, r) in members.iter().zip(results) {
        match r {
            Ok(o) => {
                rows.push(summary_row(&m.name, &o));
                outcomes.push(o);
            }
            Err(e) => {
                failure.get_or_insert((m.name.clone(), e));
            }
        }
    }
    let mut report = SuiteReport {
        suite,
        rows,
        checks: Vec::new(),
        dir: out.to_path_buf(),
    };
    let summary = out.join(SUMMARY_FILE);
    std::fs::write(&summary, report.summary_csv()).map_err(|e| CliError::io(&summary, e))?;
    if let Some((member, source)) = failure {
        return Err(CliError::Suite {
            member,
            source: Box::new(source),
        });
    }
    report.checks = suite_checks(suite, &members, &outcomes)?;
    let path = out.join(REPORT_FILE);
    std::fs::write(&path, report.report_text()).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in SuiteName::ALL {
            assert_eq!(n.as_str().parse::<SuiteName>().unwrap(), n);
        }
        assert!("nope".parse::<SuiteName>().is_err());
    }

    #[test]
    fn every_member_config_validates() {
        let dir = tempfile::tempdir().unwrap();
        let counts = [2, 18, 12, 4];
        for (suite, n) in SuiteName::ALL.into_iter().zip(counts) {
            let ms = members(suite, dir.path(), None).unwrap();
            assert_eq!(ms.len(), n, "{suite}");
            let mut names: Vec<_> = ms.iter().map(|m| m.name.clone()).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), n);
            for m in &ms {
                let dumped = m.config.dump();
                let back = RunConfig::from_str_with_base(&dumped, dir.path()).unwrap();
                assert_eq!(back, m.config);
            }
        }
    }

    #[test]
    fn first_noise_row_matches_table_defaults() {
        let ms = members(SuiteName::NoiseSweep, Path::new("/tmp/x"), None).unwrap();
        let spec = ms[0].config.model_spec();
        assert_eq!(spec.iter_max, 4000);
        assert_eq!(spec.tau, 0.01);
        assert_eq!(
            spec.regularizer,
            mbeseg::Regularizer::Mbe { mu: 1.0, alpha: 15.0 }
        );
        assert_eq!(ms[0].config.fixture_spec().unwrap().noise_std, 10.0);
    }
}
