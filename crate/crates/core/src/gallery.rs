//! Named measures with known compactness behaviour, used as a regression
//! suite for the diagnostics.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{cross_check, CrossCheck, Decision, DiagnoseConfig};
use crate::error::{Error, Result};
use crate::geometry::{Grid, Region, SlitSequence, SlitStrip};
use crate::measure::MeasureSpec;

/// Registered preset names, in listing order.
pub const NAMES: [&str; 11] = [
    "bounded_domain",
    "two_balls",
    "plain_strip",
    "vanishing_volume",
    "finite_measure",
    "slit_strip_log",
    "slit_strip_tuned",
    "growing_potential",
    "axes_potential",
    "inverse_summable",
    "zero",
];

/// Expected decision per embedding; `None` where no claim is made.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub l2: Option<Decision>,
    pub l1: Option<Decision>,
}

/// Optional overrides of a preset's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Half edge of the square box centered at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Slit exponent (`slit_strip_tuned`) or width decay (`finite_measure`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Exponents of `|x₁|^α |x₂|^β` (`axes_potential`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub measure: MeasureSpec,
    pub expected: Expected,
    /// Why the expected decisions hold.
    pub rationale: String,
    pub dim: usize,
    pub half_width: f64,
    pub h: f64,
}

impl Preset {
    /// The documented default grid `[-L, L]^dim` with spacing `h`.
    pub fn grid(&self) -> Result<Grid> {
        let lo = vec![-self.half_width; self.dim];
        let hi = vec![self.half_width; self.dim];
        Grid::new(&lo, &hi, self.h)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("preset parameter {name} must be positive, got {v}")))
    }
}

const STRIP_END: f64 = 1e9;

fn strip() -> Region {
    Region::boxed(vec![0.0, 0.0], vec![STRIP_END, 1.0])
}

fn slit_strip(slits: SlitSequence) -> Region {
    Region::SlitStrip(SlitStrip { dim: 2, start: 0.0, width: 1.0, slits, slit_width: None })
}

/// Number of boxes in the comb-like presets; enough to cover any box used here.
const PIECES: usize = 256;

/// Builds a preset, applying `params` over its defaults.
pub fn preset(name: &str, params: &PresetParams) -> Result<Preset> {
    use Decision::{Compact, NotCompact};
    let both = |d| Expected { l2: Some(d), l1: Some(d) };
    let l2_only = |d| Expected { l2: Some(d), l1: None };
    let (measure, expected, rationale, half_width, h): (MeasureSpec, Expected, &str, f64, f64) = match name {
        "bounded_domain" => (
            MeasureSpec::inf_outside(Region::origin_ball(2, 1.0)),
            both(Compact),
            "unit disk: bounded domains embed compactly",
            4.0,
            1.0 / 8.0,
        ),
        "two_balls" => (
            MeasureSpec::inf_outside(Region::Union {
                parts: vec![Region::ball(vec![-1.5, 0.0], 1.0), Region::ball(vec![1.5, 0.0], 1.0)],
            }),
            both(Compact),
            "two disjoint unit disks: a bounded open set",
            10.0,
            1.0 / 8.0,
        ),
        "plain_strip" => (
            MeasureSpec::inf_outside(strip()),
            both(NotCompact),
            "half strip (0,∞)×(0,1): translated bumps have constant energy, tail abscissa stays at 1+π²",
            16.0,
            1.0 / 8.0,
        ),
        "vanishing_volume" => {
            let parts = (0..PIECES)
                .map(|n| Region::boxed(vec![n as f64, 0.0], vec![n as f64 + 1.0 / (n as f64 + 1.0), 1.0]))
                .collect();
            (
                MeasureSpec::inf_outside(Region::Union { parts }),
                l2_only(Compact),
                "teeth [n, n+1/(n+1)]×[0,1]: the volume of Ω in unit balls tends to zero",
                16.0,
                1.0 / 8.0,
            )
        }
        "finite_measure" => {
            let decay = positive("exponent", params.exponent.unwrap_or(2.0))?;
            if decay <= 1.0 {
                return Err(Error::InvalidArgument("finite_measure needs exponent > 1".into()));
            }
            let parts = (0..PIECES)
                .map(|n| {
                    let a = 0.5 * (n as f64 + 1.0).powf(-decay);
                    Region::boxed(vec![n as f64, -a], vec![n as f64 + 1.0, a])
                })
                .collect();
            (
                MeasureSpec::inf_outside(Region::Union { parts }),
                both(Compact),
                "boxes [n,n+1]×[-a_n,a_n] with summable widths: Ω has finite volume",
                8.0,
                1.0 / 8.0,
            )
        }
        "slit_strip_log" => (
            MeasureSpec::inf_outside(slit_strip(SlitSequence::Log)),
            l2_only(Compact),
            "half strip cut at x_n = ln(1+n): the gaps between slits shrink to zero",
            16.0,
            1.0 / 8.0,
        ),
        "slit_strip_tuned" => {
            let exponent = positive("exponent", params.exponent.unwrap_or(0.75))?;
            if exponent >= 1.0 {
                return Err(Error::InvalidArgument("slit_strip_tuned needs exponent < 1".into()));
            }
            (
                MeasureSpec::inf_outside(slit_strip(SlitSequence::Power { scale: 1.0, exponent })),
                Expected { l2: Some(Compact), l1: Some(NotCompact) },
                "half strip cut at x_n = n^s, s < 1: gaps shrink so the L² embedding is compact, \
                 but the cubed gaps are not summable so w is not integrable",
                16.0,
                1.0 / 8.0,
            )
        }
        "growing_potential" => (
            MeasureSpec::potential("r^2")?,
            l2_only(Compact),
            "V = |x|²: a potential diverging at infinity",
            8.0,
            1.0 / 4.0,
        ),
        "axes_potential" => {
            let alpha = positive("alpha", params.alpha.unwrap_or(1.0))?;
            let beta = positive("beta", params.beta.unwrap_or(1.0))?;
            (
                MeasureSpec::potential(&format!("abs(x1)^{alpha} * abs(x2)^{beta}"))?,
                l2_only(Compact),
                "V = |x₁|^α|x₂|^β vanishes on the axes yet every unit ball far out sees large V",
                32.0,
                1.0 / 2.0,
            )
        }
        "inverse_summable" => (
            MeasureSpec::potential("exp(r)")?,
            both(Compact),
            "V = e^{|x|}: 1/V is integrable, which gives compactness into L¹ and hence L²",
            32.0,
            1.0 / 2.0,
        ),
        "zero" => (
            MeasureSpec::Zero,
            both(NotCompact),
            "μ = 0: w ≡ 1, translation invariant",
            24.0,
            1.0 / 2.0,
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(Preset {
        name: name.to_string(),
        measure,
        expected,
        rationale: rationale.to_string(),
        dim: 2,
        half_width: positive("half_width", params.half_width.unwrap_or(half_width))?,
        h: positive("h", params.h.unwrap_or(h))?,
    })
}

/// All presets at their defaults.
pub fn list() -> Vec<Preset> {
    NAMES.iter().map(|n| preset(n, &PresetParams::default()).expect("registered preset")).collect()
}

/// Outcome of diagnosing one preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalleryRun {
    pub preset: Preset,
    pub cross: CrossCheck,
    /// Observed decisions match every expected one.
    pub matches: bool,
    /// Cross-check on the refined grid (`h/2`, box ×2), if requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined: Option<CrossCheck>,
    /// Both resolutions give the same L² decision, and the same L¹ decision
    /// where one is expected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
}

fn agrees(expected: Option<Decision>, observed: Decision) -> bool {
    expected.is_none_or(|e| e == observed)
}

fn matches(expected: &Expected, cross: &CrossCheck) -> bool {
    agrees(expected.l2, cross.l2.decision) && agrees(expected.l1, cross.l1.decision)
}

/// Cross-checks a preset at its default grid and optionally at the refined one.
pub fn run(preset: &Preset, config: &DiagnoseConfig, refine: bool) -> Result<GalleryRun> {
    let grid = preset.grid()?;
    let cross = cross_check(&preset.measure, &grid, config)?;
    let refined = if refine { Some(cross_check(&preset.measure, &grid.refined(2.0)?, config)?) } else { None };
    let stable = refined
        .as_ref()
        .map(|r| {
            r.l2.decision == cross.l2.decision
                && (preset.expected.l1.is_none() || r.l1.decision == cross.l1.decision)
        });
    let ok = matches(&preset.expected, &cross) && refined.as_ref().is_none_or(|r| matches(&preset.expected, r));
    Ok(GalleryRun { preset: preset.clone(), cross, matches: ok, refined, stable })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_and_round_trips() {
        for p in list() {
            let json = serde_json::to_string(&p).unwrap();
            let back: Preset = serde_json::from_str(&json).unwrap();
            assert_eq!(back, p);
            p.measure.check_dim(p.dim).unwrap();
            p.grid().unwrap();
        }
    }

    #[test]
    fn unknown_and_bad_parameters_are_rejected() {
        assert!(matches!(preset("nope", &PresetParams::default()), Err(Error::UnknownPreset(_))));
        let bad = PresetParams { exponent: Some(1.5), ..Default::default() };
        assert!(preset("slit_strip_tuned", &bad).is_err());
        let bad = PresetParams { h: Some(-1.0), ..Default::default() };
        assert!(preset("zero", &bad).is_err());
    }

    #[test]
    fn params_override_defaults() {
        let p = preset("axes_potential", &PresetParams { alpha: Some(2.0), h: Some(0.5), ..Default::default() })
            .unwrap();
        assert_eq!(p.h, 0.5);
        assert_ne!(p.measure, preset("axes_potential", &PresetParams::default()).unwrap().measure);
    }
}
