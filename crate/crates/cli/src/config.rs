//! Run configuration: a flat TOML file layered over an optional preset, with
//! command-line overrides on top.

use anyhow::{anyhow, bail, Context, Result};
use mcms_core::refine::SolveOptions;
use mcms_core::scheme::{penrose_example2_nu, NuPolicy, SchemeSpec, WindowWeight};
use mcms_core::verify::VerifyOptions;
use mcms_core::{BoundaryMode, CycInt, Region, Vec2};
use nalgebra::DMatrix;
use serde::Deserialize;

pub const ARTIFACTS: &[&str] = &[
    "windows", "areas", "points", "nu", "density-grids", "density-csv", "summary", "report",
];

/// Raw file contents. Every key is optional; missing keys fall back to the
/// preset and then to the built-in defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub scheme: Option<String>,
    pub nu_policy: Option<String>,
    pub area_weight: Option<String>,
    pub nu: Option<Vec<Vec<f64>>>,
    pub gamma: Option<[f64; 2]>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub tol: Option<f64>,
    pub maxit: Option<usize>,
    pub boundary: Option<String>,
    pub outputs: Option<Vec<String>>,
    pub grid_half_width: Option<f64>,
    pub supersample: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub closure_s: Option<f64>,
    /// Custom scheme: one vertex list per window.
    pub windows: Option<Vec<Vec<[f64; 2]>>>,
    /// Custom scheme: coset representatives as coefficient 4-tuples.
    pub cosets: Option<Vec<[i64; 4]>>,
    /// Custom scheme: the multiplier q as a coefficient 4-tuple.
    pub q: Option<[i64; 4]>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("config: {e}"))
    }

    fn preset(name: &str) -> Result<Self> {
        let mut c = RawConfig { scheme: Some("penrose".into()), ..Default::default() };
        match name {
            "penrose-example1" => {
                c.nu_policy = Some("area-markov".into());
                c.area_weight = Some("scale".into());
            }
            "penrose-example2" => {
                c.nu_policy = Some("explicit".into());
                let nu = penrose_example2_nu();
                c.nu = Some((0..4).map(|j| nu.row(j).iter().copied().collect()).collect());
            }
            other => bail!("unknown preset {other:?} (expected penrose-example1 or penrose-example2)"),
        }
        Ok(c)
    }

    /// Keys set in `top` replace those of `self`.
    fn overlay(self, top: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            preset, scheme, nu_policy, area_weight, nu, gamma, s, h, tol, maxit, boundary, outputs,
            grid_half_width, supersample, samples, seed, closure_s, windows, cosets, q
        )
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: SchemeSpec,
    pub nu_policy: NuPolicy,
    pub s: f64,
    pub solve: SolveOptions,
    pub samples: usize,
    pub seed: u64,
    pub closure_s: f64,
    pub outputs: Vec<String>,
}

impl RunConfig {
    /// Layers preset, file and overrides, then validates everything.
    pub fn resolve(file: Option<&str>, ov: &Overrides) -> Result<Self> {
        let raw = match file {
            Some(text) => RawConfig::parse(text)?,
            None => RawConfig::default(),
        };
        let preset = ov.preset.clone().or_else(|| raw.preset.clone());
        if file.is_none() && preset.is_none() {
            bail!("either --config or --preset is required");
        }
        let base = match &preset {
            Some(p) => RawConfig::preset(p)?,
            None => RawConfig::default(),
        };
        let mut merged = base.overlay(raw);
        merged.s = ov.s.or(merged.s);
        merged.h = ov.h.or(merged.h);
        merged.tol = ov.tol.or(merged.tol);
        Self::from_raw(merged)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let defaults = SolveOptions::default();
        let s = raw.s.unwrap_or(40.0);
        let h = raw.h.unwrap_or(defaults.h);
        let tol = raw.tol.unwrap_or(defaults.tol);
        let maxit = raw.maxit.unwrap_or(defaults.maxit);
        let half_width = raw.grid_half_width.unwrap_or(defaults.half_width);
        let supersample = raw.supersample.unwrap_or(defaults.supersample);
        if !(s > 0.0) {
            bail!("config: s must be positive, got {s}");
        }
        if !(h > 0.0) {
            bail!("config: h must be positive, got {h}");
        }
        if !(tol > 0.0) {
            bail!("config: tol must be positive, got {tol}");
        }
        if maxit == 0 || supersample == 0 {
            bail!("config: maxit and supersample must be at least 1");
        }

        let mut spec = match raw.scheme.as_deref().unwrap_or("penrose") {
            "penrose" => {
                if raw.windows.is_some() || raw.cosets.is_some() || raw.q.is_some() {
                    bail!("config: windows/cosets/q only apply to scheme = \"custom\"");
                }
                SchemeSpec::penrose()
            }
            "custom" => custom_scheme(&raw)?,
            other => bail!("config: unknown scheme {other:?} (expected penrose or custom)"),
        };
        if let Some([x, y]) = raw.gamma {
            spec = spec.with_gamma(Vec2::new(x, y));
        }
        spec = spec.with_boundary_mode(match raw.boundary.as_deref().unwrap_or("closed") {
            "closed" => BoundaryMode::Closed,
            "open" => BoundaryMode::Open,
            other => bail!("config: boundary must be closed or open, got {other:?}"),
        });
        spec.validate().context("config: scheme")?;

        let r = spec.r();
        let nu_policy = match raw.nu_policy.as_deref().unwrap_or("area-markov") {
            "area-markov" => {
                if raw.nu.is_some() {
                    bail!("config: nu is only used with nu_policy = \"explicit\"");
                }
                NuPolicy::AreaMarkov(match raw.area_weight.as_deref().unwrap_or("scale") {
                    "scale" => WindowWeight::Scale,
                    "area" => WindowWeight::Area,
                    other => bail!("config: area_weight must be scale or area, got {other:?}"),
                })
            }
            "explicit" => {
                let rows = raw.nu.as_ref().ok_or_else(|| anyhow!("config: explicit nu_policy needs nu"))?;
                if rows.len() != r || rows.iter().any(|row| row.len() != r) {
                    bail!("config: nu must be {r}x{r}");
                }
                if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    bail!("config: nu entries must be finite and non-negative");
                }
                NuPolicy::Explicit(DMatrix::from_fn(r, r, |j, i| rows[j][i]))
            }
            other => bail!("config: nu_policy must be area-markov or explicit, got {other:?}"),
        };

        let outputs = raw.outputs.unwrap_or_else(|| ARTIFACTS.iter().map(|s| s.to_string()).collect());
        if let Some(bad) = outputs.iter().find(|o| !ARTIFACTS.contains(&o.as_str())) {
            bail!("config: unknown output {bad:?} (known: {})", ARTIFACTS.join(", "));
        }
        let verify_defaults = VerifyOptions::default();
        Ok(RunConfig {
            spec,
            nu_policy,
            s,
            solve: SolveOptions { h, half_width, supersample, tol, maxit },
            samples: raw.samples.unwrap_or(verify_defaults.samples),
            seed: raw.seed.unwrap_or(verify_defaults.seed),
            closure_s: raw.closure_s.unwrap_or(verify_defaults.closure_s),
            outputs,
        })
    }

    pub fn wants(&self, artifact: &str) -> bool {
        self.outputs.iter().any(|o| o == artifact)
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions { s: self.s, samples: self.samples, seed: self.seed, closure_s: self.closure_s, solve: self.solve }
    }
}

fn custom_scheme(raw: &RawConfig) -> Result<SchemeSpec> {
    let windows = raw.windows.as_ref().ok_or_else(|| anyhow!("config: custom scheme needs windows"))?;
    let cosets = raw.cosets.as_ref().ok_or_else(|| anyhow!("config: custom scheme needs cosets"))?;
    let q = raw.q.ok_or_else(|| anyhow!("config: custom scheme needs q"))?;
    let regions = windows
        .iter()
        .enumerate()
        .map(|(k, w)| {
            Region::polygon(w.iter().map(|&[x, y]| Vec2::new(x, y)).collect())
                .with_context(|| format!("config: window {}", k + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let cosets = cosets.iter().map(|&c| CycInt(c)).collect();
    SchemeSpec::new(regions, cosets, CycInt(q)).context("config: scheme")
}
