//! Run configuration, command implementations, and file artifacts for the
//! command-line binary.
//!
//! Every command produces a versioned CSV table plus a JSON manifest that
//! embeds the fully resolved configuration, so a run can be reproduced from
//! its manifest alone.  All randomness is keyed by (seed, stream); CSV
//! bytes are a pure function of the configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    lemma_suite, png_height, png_nucleations, sample_position, simulate_png, simulate_tasep,
    RngSpec,
};
use crate::fredholm::{
    airy1_determinant, joint_prob_airy1, joint_prob_png_meta, joint_prob_tasep_meta, PngKernel,
    TasepKernel,
};
use crate::png_kernels::{AiryObservation, PNGObservation, PNGPoint};
use crate::scaling::{
    convergence_experiment, scaling_coeffs, ExperimentKind, SpaceLikePathSpec,
};
use crate::tasep_kernels::{InitialCondition, ModelParams, ObservationPath, SpaceTimePoint};
use crate::{Error, Result};

pub const CSV_VERSION_HEADER: &str = "# kpz-exactlab v1";

/// One run, fully described.  Every field is optional here; each command
/// validates the fields it needs and names the missing one on failure.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// "tasep", "png", or "airy1"
    pub model: Option<String>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// single observation point
    pub t: Option<f64>,
    pub n: Option<i64>,
    pub x: Option<f64>,
    pub h: Option<i64>,
    /// joint observation points
    pub ns: Option<Vec<i64>>,
    pub ts: Option<Vec<f64>>,
    pub xs: Option<Vec<f64>>,
    pub cuts: Option<Vec<f64>>,
    /// cut grid for one-point tables
    pub cut_min: Option<i64>,
    pub cut_max: Option<i64>,
    /// limit-process observation
    pub taus: Option<Vec<f64>>,
    pub s_grid: Option<Vec<f64>>,
    /// convergence experiment
    pub t_list: Option<Vec<f64>>,
    pub u_list: Option<Vec<f64>>,
    pub samples_list: Option<Vec<usize>>,
    pub gamma0: Option<f64>,
    pub gamma0_prime: Option<f64>,
    pub gamma0_second: Option<f64>,
    /// path slope for particle-system scaling: "fixed-time" or "tagged"
    pub path: Option<String>,
    pub alpha: Option<f64>,
}

impl RunConfig {
    /// Read a configuration from a TOML file, or from the `config` field of
    /// a previously written JSON manifest.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if let Ok(manifest) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(cfg) = manifest.get("config") {
                return serde_json::from_value(cfg.clone())
                    .map_err(|e| Error::Config(format!("bad manifest config: {e}")));
            }
        }
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad config file: {e}")))
    }

    /// Overlay another configuration on top of this one; fields set in
    /// `over` win.  Used for "flags override the config file".
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            model, q, seed, samples, tol, out, threads, t, n, x, h, ns, ts, xs, cuts, cut_min,
            cut_max, taus, s_grid, t_list, u_list, samples_list, gamma0, gamma0_prime,
            gamma0_second, path, alpha
        );
        self
    }

    fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("missing required field `{name}`")))
    }

    pub fn model(&self) -> Result<&str> {
        self.model
            .as_deref()
            .ok_or_else(|| Error::Config("missing required field `model`".into()))
    }

    pub fn q(&self) -> Result<f64> {
        Self::need(self.q, "q")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(10_000)
    }

    fn path_spec(&self) -> Result<SpaceLikePathSpec> {
        match self.path.as_deref().unwrap_or("fixed-time") {
            "fixed-time" => Ok(SpaceLikePathSpec::fixed_time()),
            "tagged" => Ok(SpaceLikePathSpec::tagged_particle(
                self.alpha.unwrap_or(1.0),
            )),
            other => Err(Error::Config(format!(
                "unknown path `{other}` (expected fixed-time or tagged)"
            ))),
        }
    }
}

/// The product of one command: a CSV table, its manifest, and whether any
/// statistical flag was raised (nonzero exit).
#[derive(Debug)]
pub struct Artifact {
    pub csv: String,
    pub manifest: serde_json::Value,
    pub flagged: bool,
}

impl Artifact {
    fn new(command: &str, cfg: &RunConfig, csv: String, started: Instant) -> Result<Self> {
        let rows = csv.lines().count().saturating_sub(2);
        Ok(Artifact {
            csv,
            manifest: serde_json::json!({
                "version": CSV_VERSION_HEADER.trim_start_matches("# "),
                "command": command,
                "config": serde_json::to_value(cfg)
                    .map_err(|e| Error::Config(e.to_string()))?,
                "seed": cfg.seed(),
                "rows": rows,
                "wall_time_s": started.elapsed().as_secs_f64(),
            }),
            flagged: false,
        })
    }

    /// Write the CSV to `out` and the manifest next to it; with no output
    /// path the CSV goes to stdout and the manifest is skipped.
    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        match out {
            Some(path) => {
                std::fs::write(path, &self.csv)?;
                let manifest = serde_json::to_string_pretty(&self.manifest)
                    .map_err(|e| Error::Config(e.to_string()))?;
                std::fs::write(sidecar(path), manifest)?;
            }
            None => print!("{}", self.csv),
        }
        Ok(())
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn table(columns: &str) -> String {
    format!("{CSV_VERSION_HEADER}\n{columns}\n")
}

fn cut_grid(cfg: &RunConfig) -> Result<Vec<i64>> {
    let lo = RunConfig::need(cfg.cut_min, "cut_min")?;
    let hi = RunConfig::need(cfg.cut_max, "cut_max")?;
    if lo > hi {
        return Err(Error::Config(format!("cut_min {lo} > cut_max {hi}")));
    }
    Ok((lo..=hi).collect())
}

// ---------------------------------------------------------------------------
// exact
// ---------------------------------------------------------------------------

pub fn cmd_exact(cfg: &RunConfig) -> Result<Artifact> {
    let started = Instant::now();
    let csv = match cfg.model()? {
        "tasep" => exact_tasep(cfg)?,
        "png" => exact_png(cfg)?,
        "airy1" => exact_airy1(cfg)?,
        other => return Err(Error::Config(format!("unknown model `{other}`"))),
    };
    Artifact::new("exact", cfg, csv, started)
}

fn exact_tasep(cfg: &RunConfig) -> Result<String> {
    let params = ModelParams::new(cfg.q()?)?;
    if let (Some(ns), Some(ts), Some(cuts)) = (&cfg.ns, &cfg.ts, &cfg.cuts) {
        // joint probability at an explicit list of points
        let points = ns
            .iter()
            .zip(ts)
            .map(|(&n, &t)| SpaceTimePoint { n, t: t as i64 })
            .collect();
        let path = ObservationPath::new(points, cuts.iter().map(|&a| a as i64).collect())?;
        let (prob, widths) = joint_prob_tasep_meta(&path, &params, TasepKernel::Flat)?;
        let mut csv = table("cuts,probability,window");
        let _ = writeln!(
            csv,
            "\"{}\",{prob},{}",
            join(cuts.iter()),
            join(widths.iter())
        );
        return Ok(csv);
    }
    // one-point table over a cut grid
    let n = RunConfig::need(cfg.n, "n")?;
    let t = RunConfig::need(cfg.t, "t")? as i64;
    let mut csv = table("a,probability,window");
    for a in cut_grid(cfg)? {
        let path = ObservationPath::new(vec![SpaceTimePoint { n, t }], vec![a])?;
        let (prob, widths) = joint_prob_tasep_meta(&path, &params, TasepKernel::Flat)?;
        let _ = writeln!(csv, "{a},{prob},{}", widths[0]);
    }
    Ok(csv)
}

fn exact_png(cfg: &RunConfig) -> Result<String> {
    if let (Some(xs), Some(ts), Some(cuts)) = (&cfg.xs, &cfg.ts, &cfg.cuts) {
        let points = xs
            .iter()
            .zip(ts)
            .map(|(&x, &t)| PNGPoint::new(x, t))
            .collect::<Result<Vec<_>>>()?;
        let obs = PNGObservation::new(points, cuts.iter().map(|&h| h as i64).collect())?;
        let (prob, widths) = joint_prob_png_meta(&obs, PngKernel::Spacelike)?;
        let mut csv = table("cuts,probability,window");
        let _ = writeln!(
            csv,
            "\"{}\",{prob},{}",
            join(cuts.iter()),
            join(widths.iter())
        );
        return Ok(csv);
    }
    let t = RunConfig::need(cfg.t, "t")?;
    let x = cfg.x.unwrap_or(0.0);
    let cuts = match (&cfg.cut_min, &cfg.cut_max) {
        (Some(_), Some(_)) => cut_grid(cfg)?,
        _ => vec![RunConfig::need(cfg.h, "h (or cut_min/cut_max)")?],
    };
    let mut csv = table("x,t,H,probability,window");
    for h in cuts {
        let obs = PNGObservation::new(vec![PNGPoint::new(x, t)?], vec![h])?;
        let (prob, widths) = joint_prob_png_meta(&obs, PngKernel::Spacelike)?;
        let _ = writeln!(csv, "{x},{t},{h},{prob},{}", widths[0]);
    }
    Ok(csv)
}

fn exact_airy1(cfg: &RunConfig) -> Result<String> {
    let taus = cfg
        .taus
        .clone()
        .ok_or_else(|| Error::Config("missing required field `taus`".into()))?;
    let grid = cfg
        .s_grid
        .clone()
        .ok_or_else(|| Error::Config("missing required field `s_grid`".into()))?;
    let mut csv = table("cuts,probability");
    match taus.len() {
        1 => {
            for &s in &grid {
                let p = joint_prob_airy1(&AiryObservation::new(taus.clone(), vec![s])?)?;
                let _ = writeln!(csv, "\"{s}\",{p}");
            }
        }
        2 => {
            for &s1 in &grid {
                for &s2 in &grid {
                    let p =
                        joint_prob_airy1(&AiryObservation::new(taus.clone(), vec![s1, s2])?)?;
                    let _ = writeln!(csv, "\"{s1},{s2}\",{p}");
                }
            }
        }
        m => {
            return Err(Error::Config(format!(
                "airy1 tables support one or two observation times, got {m}"
            )))
        }
    }
    Ok(csv)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Artifact> {
    let started = Instant::now();
    let csv = match cfg.model()? {
        "tasep" => simulate_tasep_cmd(cfg)?,
        "png" => simulate_png_cmd(cfg)?,
        other => return Err(Error::Config(format!("cannot simulate model `{other}`"))),
    };
    let mut art = Artifact::new("simulate", cfg, csv, started)?;
    art.manifest["streams"] = serde_json::json!([0, cfg.samples()]);
    Ok(art)
}

fn simulate_tasep_cmd(cfg: &RunConfig) -> Result<String> {
    let params = ModelParams::new(cfg.q()?)?;
    let n = RunConfig::need(cfg.n, "n")?;
    let t = RunConfig::need(cfg.t, "t")? as i64;
    let seed = cfg.seed();
    let mut csv = table("sample,stream,x");
    for i in 0..cfg.samples() {
        let mut rng = RngSpec::new(seed, i as u64).rng();
        let x = sample_position(&params, n, t, &mut rng)?;
        let _ = writeln!(csv, "{i},{i},{x}");
    }
    Ok(csv)
}

fn simulate_png_cmd(cfg: &RunConfig) -> Result<String> {
    let t = RunConfig::need(cfg.t, "t")?;
    let x = cfg.x.unwrap_or(0.0);
    let seed = cfg.seed();
    let mut hist: Vec<usize> = Vec::new();
    for i in 0..cfg.samples() {
        let mut rng = RngSpec::new(seed, i as u64).rng();
        let pts = png_nucleations(t, (x, x), &mut rng);
        let h = png_height(&pts, t + x, t - x) as usize;
        if h >= hist.len() {
            hist.resize(h + 1, 0);
        }
        hist[h] += 1;
    }
    let mut csv = table("h,count");
    for (h, c) in hist.iter().enumerate() {
        let _ = writeln!(csv, "{h},{c}");
    }
    Ok(csv)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn cmd_compare(cfg: &RunConfig) -> Result<Artifact> {
    let started = Instant::now();
    let samples = cfg.samples();
    let seed = cfg.seed();
    let cuts = cut_grid(cfg)?;
    // (cut, exact, count of samples satisfying the event)
    let mut rows: Vec<(i64, f64, usize)> = Vec::new();
    match cfg.model()? {
        "tasep" => {
            let params = ModelParams::new(cfg.q()?)?;
            let n = RunConfig::need(cfg.n, "n")?;
            let t = RunConfig::need(cfg.t, "t")? as i64;
            let xs: Vec<i64> = (0..samples)
                .map(|i| {
                    let mut rng = RngSpec::new(seed, i as u64).rng();
                    sample_position(&params, n, t, &mut rng)
                })
                .collect::<Result<_>>()?;
            for a in cuts {
                let path = ObservationPath::new(vec![SpaceTimePoint { n, t }], vec![a])?;
                let (exact, _) = joint_prob_tasep_meta(&path, &params, TasepKernel::Flat)?;
                let hits = xs.iter().filter(|&&x| x >= a).count();
                rows.push((a, exact, hits));
            }
        }
        "png" => {
            let t = RunConfig::need(cfg.t, "t")?;
            let x = cfg.x.unwrap_or(0.0);
            let hs: Vec<i64> = (0..samples)
                .map(|i| {
                    let mut rng = RngSpec::new(seed, i as u64).rng();
                    let pts = png_nucleations(t, (x, x), &mut rng);
                    png_height(&pts, t + x, t - x)
                })
                .collect();
            for hcut in cuts {
                let obs = PNGObservation::new(vec![PNGPoint::new(x, t)?], vec![hcut])?;
                let (exact, _) = joint_prob_png_meta(&obs, PngKernel::Spacelike)?;
                let hits = hs.iter().filter(|&&h| h <= hcut).count();
                rows.push((hcut, exact, hits));
            }
        }
        other => return Err(Error::Config(format!("cannot compare model `{other}`"))),
    }
    let mut csv = table("cut,exact,empirical,z,flag");
    let mut flagged = false;
    for (cut, exact, hits) in rows {
        let emp = hits as f64 / samples as f64;
        let sigma = (exact * (1.0 - exact) / samples as f64).sqrt();
        let z = if sigma > 0.0 {
            (emp - exact) / sigma
        } else if emp == exact {
            0.0
        } else {
            f64::INFINITY
        };
        let flag = !(z.abs() <= 4.0);
        flagged |= flag;
        let _ = writeln!(csv, "{cut},{exact},{emp},{z},{}", flag as u8);
    }
    let mut art = Artifact::new("compare", cfg, csv, started)?;
    art.flagged = flagged;
    art.manifest["flagged"] = serde_json::json!(flagged);
    Ok(art)
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

pub fn cmd_converge(cfg: &RunConfig) -> Result<Artifact> {
    let started = Instant::now();
    let kind = match cfg.model()? {
        "tasep" => ExperimentKind::Tasep {
            q: cfg.q()?,
            spec: cfg.path_spec()?,
        },
        "png" => ExperimentKind::Png {
            gamma0: cfg.gamma0.unwrap_or(1.0),
            gamma0_prime: cfg.gamma0_prime.unwrap_or(0.0),
            gamma0_second: cfg.gamma0_second.unwrap_or(0.0),
        },
        other => return Err(Error::Config(format!("cannot converge model `{other}`"))),
    };
    let t_list = cfg
        .t_list
        .clone()
        .ok_or_else(|| Error::Config("missing required field `t_list`".into()))?;
    let u_list = cfg.u_list.clone().unwrap_or_else(|| vec![0.0]);
    let s_grid = cfg
        .s_grid
        .clone()
        .unwrap_or_else(|| (-8..=4).map(|k| k as f64 / 2.0).collect());
    let samples = cfg
        .samples_list
        .clone()
        .unwrap_or_else(|| vec![cfg.samples()]);
    let report = convergence_experiment(
        &kind,
        &t_list,
        &u_list,
        &s_grid,
        &samples,
        RngSpec::new(cfg.seed(), 0),
    )?;
    let mut csv = table("T,u,s,empirical,exact,abs_diff");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.t_scale, r.u, r.s, r.empirical, r.exact, r.ks
        );
    }
    let mut art = Artifact::new("converge", cfg, csv, started)?;
    art.manifest["ks_by_scale"] = serde_json::json!(report.ks_by_scale);
    art.manifest["monotone_within_band"] = serde_json::json!(report.monotone_within_band);
    Ok(art)
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

pub fn cmd_selftest(cfg: &RunConfig) -> Result<Artifact> {
    let started = Instant::now();
    let mut csv = table("check,passed,detail");
    let mut all = true;
    for c in lemma_suite().checks {
        all &= c.passed;
        let _ = writeln!(csv, "{},{},{}", c.name, c.passed as u8, c.detail);
    }
    for (name, outcome) in invariant_suite() {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        all &= passed;
        let _ = writeln!(csv, "{name},{},{detail}", passed as u8);
    }
    let mut art = Artifact::new("selftest", cfg, csv, started)?;
    art.flagged = !all;
    art.manifest["all_passed"] = serde_json::json!(all);
    Ok(art)
}

fn invariant_suite() -> Vec<(&'static str, Result<String>)> {
    vec![
        ("scaling_identities", (|| {
            for q in [0.1, 0.25, 0.5, 0.9] {
                scaling_coeffs(&SpaceLikePathSpec::fixed_time(), q)?;
                scaling_coeffs(&SpaceLikePathSpec::tagged_particle(1.0), q)?;
            }
            Ok("coefficient identities hold to 1e-12".into())
        })()),
        ("png_void_probability", (|| {
            let obs = PNGObservation::new(vec![PNGPoint::new(0.0, 1.0)?], vec![0])?;
            let (p, _) = joint_prob_png_meta(&obs, PngKernel::Spacelike)?;
            let target = (-2.0f64).exp();
            if (p - target).abs() > 1e-6 * target {
                return Err(Error::NumericalInconsistency(format!(
                    "void probability {p} vs {target}"
                )));
            }
            Ok(format!("P(h(0,1) = 0) = {p}"))
        })()),
        ("airy1_discretizations", (|| {
            let obs = AiryObservation::new(vec![0.0], vec![0.0])?;
            let a = airy1_determinant(&obs, 10)?;
            let b = airy1_determinant(&obs, 16)?;
            if (a - b).abs() > 1e-6 {
                return Err(Error::NumericalInconsistency(format!(
                    "discretizations disagree: {a} vs {b}"
                )));
            }
            Ok(format!("one-point value {a}"))
        })()),
        ("flat_vs_finite_n", (|| {
            let params = ModelParams::new(0.5)?;
            let path = ObservationPath::new(
                vec![SpaceTimePoint { n: 1, t: 2 }, SpaceTimePoint { n: 2, t: 2 }],
                vec![-1, -3],
            )?;
            let (a, _) = joint_prob_tasep_meta(&path, &params, TasepKernel::Flat)?;
            let (b, _) = joint_prob_tasep_meta(&path, &params, TasepKernel::FiniteN(40))?;
            if (a - b).abs() > 1e-7 {
                return Err(Error::NumericalInconsistency(format!(
                    "kernel forms disagree: {a} vs {b}"
                )));
            }
            Ok(format!("two-point joint probability {a}"))
        })()),
        ("simulation_smoke", (|| {
            let params = ModelParams::new(0.5)?;
            let traj = simulate_tasep(
                &params,
                &InitialCondition::AlternatingInfinite,
                (-20, 20),
                5,
                RngSpec::new(7, 0),
            )?;
            if traj.len() != 6 {
                return Err(Error::NumericalInconsistency(format!(
                    "expected 6 configurations, got {}",
                    traj.len()
                )));
            }
            let prof = simulate_png(2.0, &[0.0], RngSpec::new(7, 1))?;
            Ok(format!("t=5 trajectory ok, png height {}", prof.heights[0]))
        })()),
    ]
}

fn join<'a, I: Iterator<Item = &'a T>, T: std::fmt::Display + 'a>(items: I) -> String {
    items
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
