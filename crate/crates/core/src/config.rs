//! `key=value` pipeline configuration.
//!
//! One assignment per line; `#` starts a comment. Recognized keys:
//!
//! | key | value |
//! |-----|-------|
//! | `ntheta` | orientation samples |
//! | `tau`, `epsilon`, `sigma` | flow regularization |
//! | `dt` | number or `auto` (`h²/10`) |
//! | `steps` | number or `auto` (pipeline default) |
//! | `sigma_smooth` | orientation smoothing scale, pixels |
//! | `sigma_theta` | angular width or `auto` (`1.5·dθ`) |
//! | `concentration_every` | steps between concentrations, `0` = off |
//! | `concentration_power` | concentration exponent |
//! | `projection` | `argmax` or `weighted_mean` |
//! | `mixed_upwind` | `central`, `product_sign` or `transport_sign` |

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{MixedUpwind, TimeStep};
use crate::lifting::Projection;
use crate::pipelines::{Concentration, PipelineConfig};

fn number<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a number"))
}

fn auto_or<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        number(value).map(Some)
    }
}

fn apply(cfg: &mut PipelineConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "ntheta" => cfg.ntheta = number(value)?,
        "tau" => cfg.flow.tau = number(value)?,
        "epsilon" => cfg.flow.eps = number(value)?,
        "sigma" => cfg.flow.sigma = number(value)?,
        "dt" => cfg.flow.dt = auto_or(value)?.map_or(TimeStep::Auto, TimeStep::Fixed),
        "steps" => cfg.steps = auto_or(value)?,
        "sigma_smooth" => cfg.sigma_s = number(value)?,
        "sigma_theta" => cfg.sigma_theta = auto_or(value)?,
        "concentration_every" => {
            let n: usize = number(value)?;
            cfg.concentration = match (n, cfg.concentration) {
                (0, _) => None,
                (n, Some(c)) => Some(Concentration { every_n: n, ..c }),
                (n, None) => Some(Concentration {
                    every_n: n,
                    ..Default::default()
                }),
            };
        }
        "concentration_power" => {
            let power = number(value)?;
            let c = cfg.concentration.get_or_insert_with(Default::default);
            c.power = power;
        }
        "projection" => {
            cfg.projection = match value {
                "argmax" => Projection::Argmax,
                "weighted_mean" => Projection::WeightedMean,
                _ => return Err(format!("unknown projection `{value}`")),
            }
        }
        "mixed_upwind" => {
            cfg.flow.mixed_upwind = match value {
                "central" => MixedUpwind::Central,
                "product_sign" => MixedUpwind::ProductSign,
                "transport_sign" => MixedUpwind::TransportSign,
                _ => return Err(format!("unknown mixed_upwind `{value}`")),
            }
        }
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Applies one `key=value` assignment, rejecting it if the result is invalid.
fn assign(cfg: &mut PipelineConfig, line: &str, origin: &str) -> Result<()> {
    let fail = |reason: String| Error::config(format!("{origin} `{line}`: {reason}"));
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| fail("expected key=value".into()))?;
    let mut next = cfg.clone();
    apply(&mut next, key.trim(), value.trim()).map_err(fail)?;
    next.validate().map_err(|e| fail(e.to_string()))?;
    *cfg = next;
    Ok(())
}

/// Parses configuration text, then applies `overrides` (each `key=value`) on
/// top of it.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            assign(&mut cfg, line, &format!("line {}", n + 1))?;
        }
    }
    for o in overrides {
        assign(&mut cfg, o.trim(), "override")?;
    }
    Ok(cfg)
}

/// Reads an optional configuration file and applies `overrides`.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
