//! Parameter scans: locking-zone maps in the (δL, δT) plane, thresholds on
//! resonance and zone widths.
//!
//! Every cell is an independent pure evaluation; results are assembled by
//! index so the output does not depend on the execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity::{OperatingPoint, Opo};
use crate::solver::{solve_point, solve_point_with, SolverError};

/// Golden-section tolerance on the cavity length, meters.
pub const LENGTH_TOL: f64 = 1e-12;
/// Minimum number of coarse samples across one free spectral range.
pub const MIN_COARSE_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("length window {window:e} m is narrower than one free spectral range ({fsr:e} m)")]
    WindowTooNarrow { window: f64, fsr: f64 },
    #[error("pump level {sigma} is below the minimum threshold {minimum} at this temperature")]
    NotInZone { sigma: f64, minimum: f64 },
    #[error("no oscillation anywhere along the length window")]
    NoResonance,
    #[error("locking zone is unbounded along {axis} within the search range")]
    Unbounded { axis: &'static str },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Evenly spaced samples `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count.max(2) - 1) as f64
    }

    fn validate(&self, name: &str) -> Result<(), SweepError> {
        if self.count < 2 {
            return Err(SweepError::InvalidGrid(format!("{name}: count must be at least 2")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max <= self.min {
            return Err(SweepError::InvalidGrid(format!(
                "{name}: need finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// A rectangular (δL, δT) grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cavity length offsets, meters.
    pub dl: Range,
    /// Temperature offsets, kelvin.
    pub dt: Range,
    /// Linear-cavity `ξ` override, radians.
    pub xi: Option<f64>,
}

impl GridSpec {
    /// 401×401 over ±30 nm and ±0.5 K.
    pub fn default_map() -> Self {
        Self {
            dl: Range::new(-30e-9, 30e-9, 401),
            dt: Range::new(-0.5, 0.5, 401),
            xi: None,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.dl.validate("dl")?;
        self.dt.validate("dt")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneCell {
    /// Lower normalized threshold; `None` where no steady state exists.
    pub sigma_th: Option<f64>,
    /// The solver failed on this cell (reported, scan continued).
    pub flagged: bool,
}

/// Locking-zone map, row-major with δT as the outer index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneMap {
    pub dl: Vec<f64>,
    pub dt: Vec<f64>,
    pub sigma: f64,
    pub cells: Vec<ZoneCell>,
}

impl ZoneMap {
    pub fn cell(&self, i_dt: usize, i_dl: usize) -> &ZoneCell {
        &self.cells[i_dt * self.dl.len() + i_dl]
    }

    pub fn in_zone(&self, i_dt: usize, i_dl: usize) -> bool {
        matches!(self.cell(i_dt, i_dl).sigma_th, Some(s) if s <= self.sigma)
    }

    pub fn in_zone_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.sigma_th, Some(s) if s <= self.sigma))
            .count()
    }

    pub fn in_zone_fraction(&self) -> f64 {
        self.in_zone_count() as f64 / self.cells.len() as f64
    }

    /// In-zone cells along one δT row.
    pub fn row_mask(&self, i_dt: usize) -> Vec<bool> {
        (0..self.dl.len()).map(|j| self.in_zone(i_dt, j)).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.cells.iter().filter(|c| c.flagged).count()
    }
}

/// Number of maximal runs of `true` in a mask.
pub fn count_segments(mask: &[bool]) -> usize {
    let mut n = 0;
    let mut inside = false;
    for &m in mask {
        if m && !inside {
            n += 1;
        }
        inside = m;
    }
    n
}

fn lower_sigma(opo: &Opo, op: &OperatingPoint, polish: bool) -> Result<Option<f64>, SolverError> {
    Ok(solve_point_with(opo, op, polish)?.lower())
}

/// Lower threshold at every grid cell.
pub fn zone_scan(opo: &Opo, grid: &GridSpec, sigma: f64) -> Result<ZoneMap, SweepError> {
    grid.validate()?;
    let dl = grid.dl.values();
    let dt = grid.dt.values();
    let n_dl = dl.len();
    let cells: Vec<ZoneCell> = (0..dl.len() * dt.len())
        .into_par_iter()
        .map(|idx| {
            let mut op = OperatingPoint::new(dl[idx % n_dl], dt[idx / n_dl]);
            op.xi = grid.xi;
            op.sigma = sigma;
            match solve_point(opo, &op) {
                Ok(res) => ZoneCell {
                    sigma_th: res.lower(),
                    flagged: false,
                },
                Err(_) => ZoneCell {
                    sigma_th: None,
                    flagged: true,
                },
            }
        })
        .collect();
    Ok(ZoneMap {
        dl,
        dt,
        sigma,
        cells,
    })
}

/// Golden-section minimization of `f` on `[a, b]` down to width `tol`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse samples per free spectral range for the given configuration:
/// at least [`MIN_COARSE_SAMPLES`], and enough to put several samples across
/// a resonance of width `~(1 − r′)` in round-trip phase.
pub fn coarse_samples(opo: &Opo) -> usize {
    let r = opo.mirrors.effective_reflectivity();
    let needed = (4.0 * std::f64::consts::PI / (1.0 - r)).ceil();
    if needed.is_finite() {
        MIN_COARSE_SAMPLES.max(needed as usize)
    } else {
        MIN_COARSE_SAMPLES
    }
}

/// Minimum of the lower threshold over the cavity length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonancePoint {
    pub scan_value: f64,
    pub sigma_res: Option<f64>,
    pub argmin_dl: Option<f64>,
}

/// Minimizes `σ^th` over `δL` at fixed temperature (and `ξ`).
///
/// The window is centered on the length where `δ ≡ 0`; by default it spans
/// one free spectral range, over which `σ^th` is periodic.
pub fn resonance_at(
    opo: &Opo,
    dt: f64,
    xi: Option<f64>,
    window: Option<f64>,
) -> Result<(Option<f64>, Option<f64>), SweepError> {
    let fsr = opo.free_spectral_range();
    let window = window.unwrap_or(fsr);
    if window < fsr * (1.0 - 1e-9) {
        return Err(SweepError::WindowTooNarrow { window, fsr });
    }
    let center = opo.resonant_dl(dt);
    let n = ((coarse_samples(opo) as f64) * window / fsr).ceil() as usize;
    let step = window / n as f64;
    let start = center - window / 2.0;

    let eval = |dl: f64, polish: bool| -> Result<f64, SolverError> {
        let mut op = OperatingPoint::new(dl, dt);
        op.xi = xi;
        Ok(lower_sigma(opo, &op, polish)?.unwrap_or(f64::INFINITY))
    };

    let mut best = (f64::INFINITY, 0usize);
    for i in 0..n {
        let v = eval(start + step * i as f64, false)?;
        if v < best.0 {
            best = (v, i);
        }
    }
    if !best.0.is_finite() {
        return Ok((None, None));
    }
    let x0 = start + step * best.1 as f64;
    let mut err = None;
    let (x_min, _) = golden_section(
        |dl| match eval(dl, false) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        x0 - step,
        x0 + step,
        LENGTH_TOL,
    );
    if let Some(e) = err {
        return Err(e.into());
    }
    let refined = eval(x_min, true)?;
    // The golden search never returns worse than the coarse optimum.
    let coarse = eval(x0, true)?;
    if coarse < refined {
        Ok((Some(coarse), Some(x0)))
    } else {
        Ok((Some(refined), Some(x_min)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    /// Crystal temperature offset, kelvin.
    #[serde(rename = "dT")]
    Temperature,
    /// Linear-cavity phase `ξ`, radians.
    #[serde(rename = "xi")]
    Xi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceCurve {
    pub axis: ScanAxis,
    pub points: Vec<ResonancePoint>,
}

/// Threshold on resonance along one axis; the other coordinate is held at
/// `fixed_dt` (K) or `fixed_xi` (rad).
pub fn resonance_curve(
    opo: &Opo,
    axis: ScanAxis,
    values: &[f64],
    fixed_dt: f64,
    fixed_xi: Option<f64>,
    window: Option<f64>,
) -> Result<ResonanceCurve, SweepError> {
    let points = values
        .par_iter()
        .map(|&v| {
            let (dt, xi) = match axis {
                ScanAxis::Temperature => (v, fixed_xi),
                ScanAxis::Xi => (fixed_dt, Some(v)),
            };
            let (sigma_res, argmin_dl) = resonance_at(opo, dt, xi, window)?;
            Ok(ResonancePoint {
                scan_value: v,
                sigma_res,
                argmin_dl,
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(ResonanceCurve { axis, points })
}

/// Threshold on resonance over a (ξ, δT) grid, row-major with ξ outer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceSurface {
    pub xi: Vec<f64>,
    pub dt: Vec<f64>,
    pub sigma_res: Vec<Option<f64>>,
}

impl ResonanceSurface {
    pub fn at(&self, i_xi: usize, i_dt: usize) -> Option<f64> {
        self.sigma_res[i_xi * self.dt.len() + i_dt]
    }

    /// Minimum over δT for each ξ row (`None` where the row never oscillates).
    pub fn row_minima(&self) -> Vec<Option<(usize, f64)>> {
        (0..self.xi.len())
            .map(|i| {
                (0..self.dt.len())
                    .filter_map(|j| self.at(i, j).map(|s| (j, s)))
                    .fold(None, |best: Option<(usize, f64)>, (j, s)| match best {
                        Some((_, b)) if b <= s => best,
                        _ => Some((j, s)),
                    })
            })
            .collect()
    }
}

pub fn resonance_surface(
    opo: &Opo,
    xi: &Range,
    dt: &Range,
    window: Option<f64>,
) -> Result<ResonanceSurface, SweepError> {
    xi.validate("xi")?;
    dt.validate("dt")?;
    let xs = xi.values();
    let ts = dt.values();
    let n_dt = ts.len();
    let sigma_res = (0..xs.len() * n_dt)
        .into_par_iter()
        .map(|idx| Ok(resonance_at(opo, ts[idx % n_dt], Some(xs[idx / n_dt]), window)?.0))
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(ResonanceSurface {
        xi: xs,
        dt: ts,
        sigma_res,
    })
}

/// `σ^th` along a line of constant temperature.
pub fn length_cut(
    opo: &Opo,
    dl: &Range,
    dt: f64,
    xi: Option<f64>,
) -> Result<Vec<(f64, Option<f64>)>, SweepError> {
    dl.validate("dl")?;
    dl.values()
        .par_iter()
        .map(|&x| {
            let mut op = OperatingPoint::new(x, dt);
            op.xi = xi;
            Ok((x, solve_point(opo, &op)?.lower()))
        })
        .collect()
}

/// Locking-zone extent through its minimum-threshold point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneWidths {
    /// Extent along δL at fixed δT, meters.
    pub dl_width: f64,
    /// Extent along δT at fixed δL, kelvin.
    pub dt_width: f64,
    /// Location and value of the minimum threshold.
    pub center_dl: f64,
    pub center_dt: f64,
    pub sigma_min: f64,
}

/// Widths of the zone `{σ^th ≤ σ}` through its lowest point on the line
/// `δT = at_dt`, measured along δL and along δT.
pub fn zone_widths(
    opo: &Opo,
    sigma: f64,
    at_dt: f64,
    xi: Option<f64>,
) -> Result<ZoneWidths, SweepError> {
    let (sigma_min, dl0) = match resonance_at(opo, at_dt, xi, None)? {
        (Some(s), Some(x)) => (s, x),
        _ => return Err(SweepError::NoResonance),
    };
    if sigma_min > sigma {
        return Err(SweepError::NotInZone {
            sigma,
            minimum: sigma_min,
        });
    }
    let inside = |dl: f64, dt: f64| -> Result<bool, SolverError> {
        let mut op = OperatingPoint::new(dl, dt);
        op.xi = xi;
        Ok(matches!(lower_sigma(opo, &op, true)?, Some(s) if s <= sigma))
    };

    let fsr = opo.free_spectral_range();
    let n = coarse_samples(opo) * 4;
    let dl_step = fsr / n as f64;
    let along_l = |dir: f64| -> Result<f64, SweepError> {
        edge(|x| inside(dl0 + dir * x, at_dt), dl_step, n, LENGTH_TOL)
            .ok_or(SweepError::Unbounded { axis: "dL" })?
            .map_err(SweepError::from)
    };
    let right = along_l(1.0)?;
    let left = along_l(-1.0)?;

    // Temperature step matching the length step in round-trip phase.
    let phase_step = 2.0 * std::f64::consts::PI / n as f64;
    let rate = opo.delta_per_kelvin().abs().max(opo.theta_per_kelvin().abs());
    let mut dt_step = if rate > 0.0 { phase_step / rate } else { 1e-3 };
    if opo.phase_match.enabled {
        dt_step = dt_step.min(opo.phase_match.fwhm / n as f64);
    }
    // One full period in both phases bounds the search.
    let max_steps = n * 4;
    let along_t = |dir: f64| -> Result<f64, SweepError> {
        edge(|x| inside(dl0, at_dt + dir * x), dt_step, max_steps, 1e-9)
            .ok_or(SweepError::Unbounded { axis: "dT" })?
            .map_err(SweepError::from)
    };
    let up = along_t(1.0)?;
    let down = along_t(-1.0)?;

    Ok(ZoneWidths {
        dl_width: right + left,
        dt_width: up + down,
        center_dl: dl0,
        center_dt: at_dt,
        sigma_min,
    })
}

/// Distance from 0 to the first boundary of `{x ≥ 0 : inside(x)}` assuming
/// `inside(0)`: walk in steps of `step`, then bisect to `tol`.
fn edge<F>(mut inside: F, step: f64, max_steps: usize, tol: f64) -> Option<Result<f64, SolverError>>
where
    F: FnMut(f64) -> Result<bool, SolverError>,
{
    let mut last_in = 0.0;
    for k in 1..=max_steps {
        let x = step * k as f64;
        match inside(x) {
            Ok(true) => last_in = x,
            Ok(false) => {
                let (mut lo, mut hi) = (last_in, x);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    match inside(mid) {
                        Ok(true) => lo = mid,
                        Ok(false) => hi = mid,
                        Err(e) => return Some(Err(e)),
                    }
                }
                return Some(Ok(0.5 * (lo + hi)));
            }
            Err(e) => return Some(Err(e)),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_values_hit_endpoints() {
        let r = Range::new(-1.0, 1.0, 5);
        assert_eq!(r.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(Range::new(0.0, 1.0, 1).validate("x").is_err());
        assert!(Range::new(1.0, 0.0, 3).validate("x").is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-11);
        assert!(fx < 1e-22);
    }

    #[test]
    fn golden_section_tolerates_infinite_shoulders() {
        let f = |x: f64| if x.abs() > 0.5 { f64::INFINITY } else { x * x };
        let (x, _) = golden_section(f, -0.6, 0.6, 1e-10);
        assert!(x.abs() < 1e-6);
    }

    #[test]
    fn segments() {
        assert_eq!(count_segments(&[false, true, true, false, true]), 2);
        assert_eq!(count_segments(&[]), 0);
        assert_eq!(count_segments(&[true, true]), 1);
    }

    #[test]
    fn edge_bisects_boundary() {
        let r = edge(|x| Ok(x < 0.37), 0.1, 100, 1e-12).unwrap().unwrap();
        assert!((r - 0.37).abs() < 1e-11);
        assert!(edge(|_| Ok(true), 0.1, 10, 1e-12).is_none());
    }
}
