//! Radial ground state of `−ΔU + U = U^{p−1}` in ℝ^d by shooting.
//!
//! The radial ODE `U'' + ((d−1)/r)U' − U + U^{p−1} = 0`, `U'(0) = 0` is
//! integrated with fixed-step RK4. The shooting height `U(0)` is bisected
//! between undershoot (U' turns positive while U > 0) and overshoot (U
//! crosses zero). The tabulated profile is kept only as far as the two final
//! bracketing trajectories agree; beyond that an exponential tail
//! `c·r^{−(d−1)/2}·e^{−a r}` is attached.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};

/// Default RK4 step.
pub const DEFAULT_DR: f64 = 1e-3;
const R_CAP: f64 = 40.0;
const U_FLOOR: f64 = 1e-8;
const BRACKET_AGREEMENT: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;

/// Tabulated ground state with its tail asymptotics and energy level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub d: usize,
    pub p: f64,
    pub dr: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    pub r_max: f64,
    /// `‖U‖²_{H¹(ℝ^d)}`
    pub mh1sq: f64,
    /// `|U|_p^p`
    pub lpp: f64,
    pub m_inf: f64,
    pub decay_c: f64,
    pub decay_a: f64,
    pub nehari_residual: f64,
    #[serde(skip)]
    samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Overshoot,
    Undershoot,
    Reached,
}

struct Trajectory {
    u: Vec<f64>,
    v: Vec<f64>,
    outcome: Outcome,
}

fn nonlinearity(u: f64, p: f64) -> f64 {
    u.abs().powf(p - 2.0) * u
}

/// Integrates from `r = 0`; stops at the first overshoot or undershoot event
/// unless `keep_going` (then runs to `r_end` regardless, storing samples).
fn integrate(u0: f64, p: f64, d: usize, dr: f64, r_end: f64, store: bool, keep_going: bool) -> Trajectory {
    let dm1 = (d - 1) as f64;
    let rhs = |r: f64, u: f64, v: f64| -> (f64, f64) { (v, -dm1 / r * v + u - nonlinearity(u, p)) };
    let curv = u0 - nonlinearity(u0, p);
    let mut u = u0 + curv * dr * dr / (2.0 * d as f64);
    let mut v = curv * dr / d as f64;
    let mut us = Vec::new();
    let mut vs = Vec::new();
    if store {
        us.extend([u0, u]);
        vs.extend([0.0, v]);
    }
    let steps = (r_end / dr).round() as usize;
    let mut outcome = Outcome::Reached;
    for k in 1..steps {
        let r = k as f64 * dr;
        let (k1u, k1v) = rhs(r, u, v);
        let (k2u, k2v) = rhs(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
        let (k3u, k3v) = rhs(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
        let (k4u, k4v) = rhs(r + dr, u + dr * k3u, v + dr * k3v);
        u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if store {
            us.push(u);
            vs.push(v);
        }
        if outcome == Outcome::Reached {
            if u < 0.0 {
                outcome = Outcome::Overshoot;
            } else if v > 0.0 {
                outcome = Outcome::Undershoot;
            }
            if outcome != Outcome::Reached && !keep_going {
                break;
            }
        }
    }
    Trajectory { u: us, v: vs, outcome }
}

fn surface_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Composite Simpson rule on a uniform grid (3/8 rule on the last panel when
/// the number of intervals is odd).
fn simpson(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * dx * (f[0] + f[1]);
    }
    if n == 3 {
        return dx / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
    }
    let intervals = n - 1;
    let (even_end, tail) = if intervals % 2 == 0 { (n - 1, None) } else { (n - 4, Some(n - 4)) };
    let mut s = f[0] + f[even_end];
    for (i, &fi) in f.iter().enumerate().take(even_end).skip(1) {
        s += if i % 2 == 1 { 4.0 * fi } else { 2.0 * fi };
    }
    let mut total = dx / 3.0 * s;
    if let Some(t) = tail {
        total += 3.0 * dx / 8.0 * (f[t] + 3.0 * f[t + 1] + 3.0 * f[t + 2] + f[t + 3]);
    }
    total
}

/// Shoots the ground state with the default step.
pub fn shoot_ground_state(p: f64, d: usize, tol: f64) -> Result<RadialProfile> {
    if !(p > 4.0 && p < 6.0) {
        return Err(SmsError::ExponentOutOfRange(p));
    }
    shoot_ground_state_with(p, d, tol, DEFAULT_DR)
}

/// Shooting with an explicit step; the exponent check is limited to the
/// range where a decaying positive solution exists (`2 < p < 2d/(d−2)`).
pub fn shoot_ground_state_with(p: f64, d: usize, tol: f64, dr: f64) -> Result<RadialProfile> {
    if !(1..=3).contains(&d) {
        return Err(SmsError::Shooting(format!("dimension must be 1, 2 or 3, got {d}")));
    }
    let critical = if d <= 2 { f64::INFINITY } else { 2.0 * d as f64 / (d as f64 - 2.0) };
    if !(p > 2.0 && p < critical) {
        return Err(SmsError::ExponentOutOfRange(p));
    }
    if !(tol > 0.0 && dr > 0.0) {
        return Err(SmsError::Shooting("tolerance and step must be positive".into()));
    }
    let classify = |a: f64| integrate(a, p, d, dr, R_CAP, false, false).outcome;

    let mut lo = 1.0;
    if classify(lo) == Outcome::Overshoot {
        return Err(SmsError::Shooting("bisection bracket not found (U0 = 1 overshoots)".into()));
    }
    let mut hi = 2.0;
    while classify(hi) != Outcome::Overshoot {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(SmsError::Shooting("bisection bracket not found".into()));
        }
    }
    let mut iterations = 0;
    while (hi - lo) > tol * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(mid) {
            Outcome::Overshoot => hi = mid,
            _ => lo = mid,
        }
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(SmsError::Shooting(format!("tolerance {tol} not reached in {MAX_BISECTIONS} bisections")));
        }
    }

    let under = integrate(lo, p, d, dr, R_CAP, true, true);
    let over = integrate(hi, p, d, dr, R_CAP, true, true);
    debug_assert!(under.outcome != Outcome::Overshoot);

    // trust the table while the bracketing trajectories agree
    let mut end = under.u.len() - 1;
    for k in 1..under.u.len() {
        let (ul, uh) = (under.u[k], over.u[k]);
        if ul < U_FLOOR || under.v[k] >= 0.0 || uh <= 0.0 || (uh - ul).abs() > BRACKET_AGREEMENT * ul {
            end = k - 1;
            break;
        }
    }
    if end < 20 {
        return Err(SmsError::Shooting("profile table too short".into()));
    }
    let samples: Vec<f64> = under.u[..=end].to_vec();
    let slopes: Vec<f64> = under.v[..=end].to_vec();
    let r_max = end as f64 * dr;

    // tail fit over the last decade of values
    let half_dm1 = 0.5 * (d as f64 - 1.0);
    let u_end = samples[end];
    let start = samples.iter().position(|&u| u <= 10.0 * u_end).unwrap_or(0).min(end - 10);
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &u) in samples.iter().enumerate().take(end + 1).skip(start.max(1)) {
        let r = k as f64 * dr;
        let y = (r.powf(half_dm1) * u).ln();
        sx += r;
        sy += y;
        sxx += r * r;
        sxy += r * y;
        n += 1.0;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let decay_a = -slope;
    // anchor the amplitude at the splice for continuity
    let decay_c = u_end * r_max.powf(half_dm1) * (decay_a * r_max).exp();

    let measure = surface_measure(d);
    let weight = |r: f64| if d == 1 { 1.0 } else { r.powi(d as i32 - 1) };
    let mut h1: Vec<f64> = Vec::with_capacity(samples.len());
    let mut lp: Vec<f64> = Vec::with_capacity(samples.len());
    for k in 0..=end {
        let r = k as f64 * dr;
        let (u, v) = (samples[k], slopes[k]);
        h1.push((v * v + u * u) * weight(r));
        lp.push(u.powf(p) * weight(r));
    }
    let mut mh1sq = simpson(&h1, dr);
    let mut lpp = simpson(&lp, dr);
    // tail contribution, integrated from the fitted asymptotics
    let tail_len = ((30.0 / dr) as usize).max(2);
    let mut th1 = Vec::with_capacity(tail_len);
    let mut tlp = Vec::with_capacity(tail_len);
    for k in 0..tail_len {
        let r = r_max + k as f64 * dr;
        let u = decay_c * r.powf(-half_dm1) * (-decay_a * r).exp();
        let du = -u * (decay_a + half_dm1 / r);
        th1.push((du * du + u * u) * weight(r));
        tlp.push(u.powf(p) * weight(r));
    }
    mh1sq = measure * (mh1sq + simpson(&th1, dr));
    lpp = measure * (lpp + simpson(&tlp, dr));

    let nehari_residual = (mh1sq - lpp).abs() / mh1sq;
    let profile = RadialProfile {
        d,
        p,
        dr,
        u0: lo,
        r_max,
        mh1sq,
        lpp,
        m_inf: (0.5 - 1.0 / p) * mh1sq,
        decay_c,
        decay_a,
        nehari_residual,
        samples,
    };
    profile.check_invariants()?;
    Ok(profile)
}

impl RadialProfile {
    fn check_invariants(&self) -> Result<()> {
        if !(self.u0 > 0.0) {
            return Err(SmsError::Shooting("U(0) must be positive".into()));
        }
        if self.samples.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
            return Err(SmsError::Shooting("profile is not positive and strictly decreasing".into()));
        }
        if self.nehari_residual > 1e-6 {
            return Err(SmsError::Shooting(format!(
                "Nehari identity violated: relative residual {:.3e}",
                self.nehari_residual
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// `U(s)`: linear interpolation on the table, exponential tail beyond.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        if s <= self.r_max {
            let x = s / self.dr;
            let k = (x.floor() as usize).min(self.samples.len() - 1);
            if k + 1 >= self.samples.len() {
                return self.samples[k];
            }
            let frac = x - k as f64;
            self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac
        } else {
            self.tail(s)
        }
    }

    pub fn tail(&self, s: f64) -> f64 {
        self.decay_c * s.powf(-0.5 * (self.d as f64 - 1.0)) * (-self.decay_a * s).exp()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "r,U")?;
        for (k, u) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", k as f64 * self.dr, u)?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn export(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?);
        self.write_csv(&mut csv)?;
        csv.flush()?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// `m_∞ = (1/2 − 1/p)·‖U‖²_{H¹}`.
pub fn m_infinity(profile: &RadialProfile) -> f64 {
    (0.5 - 1.0 / profile.p) * profile.mh1sq
}

/// `U(s)` for `s ≥ 0`.
pub fn eval_profile(profile: &RadialProfile, s: f64) -> f64 {
    profile.eval(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubic_exactly() {
        for n in [5usize, 6, 7, 8] {
            let dx = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|k| (k as f64 * dx).powi(3)).collect();
            assert!((simpson(&f, dx) - 0.25).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn rejects_out_of_range_exponent() {
        assert!(matches!(shoot_ground_state(6.5, 3, 1e-12), Err(SmsError::ExponentOutOfRange(_))));
        assert!(matches!(shoot_ground_state(3.0, 3, 1e-12), Err(SmsError::ExponentOutOfRange(_))));
    }

    #[test]
    fn splice_is_continuous() {
        let prof = shoot_ground_state(5.0, 1, 1e-13).unwrap();
        let table = prof.samples().last().copied().unwrap();
        let tail = prof.tail(prof.r_max);
        assert!(((table - tail) / table).abs() < 1e-6);
        assert!((prof.eval(0.0) - prof.u0).abs() < 1e-15);
    }
}
