use crate::analytics::Roi;
use crate::error::{Error, Result};
use crate::imaging::NoiseModel;

use super::NoiseKind;

fn number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Argument(format!("{what}: not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Argument(format!("{what}: not finite")))
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or `a,b,c`.
pub fn parse_cutoffs(spec: &str) -> Result<Vec<f64>> {
    let values = if let Some((start, rest)) = spec.split_once(':') {
        let (stop, step) = rest
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("cutoffs {spec:?}: expected start:stop:step")))?;
        let (start, stop, step) = (number(start, "start")?, number(stop, "stop")?, number(step, "step")?);
        if !(step > 0.0) || stop < start {
            return Err(Error::Argument(format!("cutoffs {spec:?}: empty range")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round12(start + i as f64 * step)).collect()
    } else {
        spec.split(',').map(|s| number(s, "cutoff")).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Argument(format!("cutoffs {spec:?} must lie in [0, 1]")));
    }
    Ok(values)
}

/// `lo:hi:count`.
pub fn parse_bins(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(Error::Argument(format!("bins {spec:?}: expected lo:hi:count")));
    };
    let n: usize = n.trim().parse().map_err(|_| Error::Argument(format!("bins {spec:?}: bad count")))?;
    let (lo, hi) = (number(lo, "lo")?, number(hi, "hi")?);
    if n == 0 || !(hi > lo) {
        return Err(Error::Argument(format!("bins {spec:?}: need hi > lo and count >= 1")));
    }
    Ok((lo, hi, n))
}

/// `x0:x1,y0:y1`.
pub fn parse_roi(spec: &str) -> Result<Roi> {
    let bad = || Error::Argument(format!("roi {spec:?}: expected x0:x1,y0:y1"));
    let (x, y) = spec.split_once(',').ok_or_else(bad)?;
    let range = |s: &str| -> Result<(f64, f64)> {
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok((number(a, "roi")?, number(b, "roi")?))
    };
    Roi::new(range(x)?, range(y)?)
}

/// Builds a noise model from `key=value` pairs; unset keys take defaults
/// (variance 0.01, amount 0.05, ratio 0.5, peak 30).
pub fn parse_noise_model(kind: NoiseKind, params: &str) -> Result<NoiseModel> {
    let mut pairs = Vec::new();
    for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("noise parameter {item:?}: expected key=value")))?;
        let v = if v.trim().eq_ignore_ascii_case("inf") { f64::INFINITY } else { number(v, k)? };
        pairs.push((k.trim().to_string(), v));
    }
    let allowed: &[&str] = match kind {
        NoiseKind::Gaussian => &["variance"],
        NoiseKind::Saltpepper => &["amount", "ratio"],
        NoiseKind::Poisson => &["peak"],
    };
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::Argument(format!("noise parameter {k:?} not valid here; expected {allowed:?}")));
    }
    let get = |k: &str, default: f64| pairs.iter().rev().find(|(key, _)| key == k).map_or(default, |p| p.1);
    let model = match kind {
        NoiseKind::Gaussian => NoiseModel::Gaussian { variance: get("variance", 0.01) },
        NoiseKind::Saltpepper => NoiseModel::SaltPepper { amount: get("amount", 0.05), ratio: get("ratio", 0.5) },
        NoiseKind::Poisson => NoiseModel::Poisson { peak: get("peak", 30.0) },
    };
    model.validate()?;
    Ok(model)
}
