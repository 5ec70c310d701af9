//! Fixed points of the reverse drift and their bifurcations.
//!
//! At a fixed noise level the drift residual is `g(x) = c·x − ∇ log p_t(x)`
//! with drift coefficient `c` (0.5 by default). Its roots are the fixed
//! points of the reverse dynamics; a root is stable when `g′ > 0`. As noise
//! decreases, roots are born in pairs and the sequence of these births is the
//! bifurcation diagram.
//!
//! Roots are located by scanning a grid for sign changes of `g`, after first
//! splitting the search interval at the extrema of `g` so that every piece is
//! monotone. Each bracket is then polished by a safeguarded Newton iteration.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixture::DiffusedMixture;
use crate::model::{MixtureModel, NoiseSchedule, TimeGrid};

pub const DEFAULT_DRIFT_COEFFICIENT: f64 = 0.5;

/// Local behaviour of the reverse dynamics around a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x_star: f64,
    pub alpha_bar: f64,
    /// `|g(x_star)|`.
    pub residual: f64,
    /// `g′(x_star)`.
    pub slope: f64,
    pub stability: Stability,
}

/// Root-finder settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub drift_coefficient: f64,
    /// Grid points used to seed brackets.
    pub n_starts: usize,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub dedup_radius: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            drift_coefficient: DEFAULT_DRIFT_COEFFICIENT,
            n_starts: 8192,
            step_tolerance: 1e-12,
            max_iterations: 200,
            dedup_radius: 1e-6,
        }
    }
}

/// Closed interval searched for roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub lo: f64,
    pub hi: f64,
}

impl SearchBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::ParameterDomain {
                name: "search box",
                value: hi - lo,
                reason: "bounds must be finite with lo < hi",
            });
        }
        Ok(Self { lo, hi })
    }

    /// Hull of the diffused means and the origin, widened by five of the
    /// largest component standard deviations. For a positive drift
    /// coefficient every root lies inside the hull itself.
    pub fn covering(field: &DriftField) -> Self {
        let means = field.mixture.means();
        let sd = field
            .mixture
            .variances()
            .iter()
            .fold(0.0_f64, |a, &v| a.max(v))
            .sqrt();
        let lo = means.iter().fold(0.0_f64, |a, &m| a.min(m));
        let hi = means.iter().fold(0.0_f64, |a, &m| a.max(m));
        Self {
            lo: lo - 5.0 * sd,
            hi: hi + 5.0 * sd,
        }
    }

    pub fn point(&self, i: usize, n: usize) -> f64 {
        if i + 1 == n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64
        }
    }
}

/// The drift residual of one mixture at one noise level.
#[derive(Debug, Clone)]
pub struct DriftField {
    mixture: DiffusedMixture,
    all: Vec<usize>,
    coefficient: f64,
}

impl DriftField {
    pub fn new(mixture: &MixtureModel, alpha_bar: f64, coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::ParameterDomain {
                name: "drift_coefficient",
                value: coefficient,
                reason: "must be finite",
            });
        }
        let mixture = DiffusedMixture::new(mixture, alpha_bar)?;
        let all = (0..mixture.len()).collect();
        Ok(Self {
            mixture,
            all,
            coefficient,
        })
    }

    pub fn alpha_bar(&self) -> f64 {
        self.mixture.alpha_bar()
    }

    pub fn diffused(&self) -> &DiffusedMixture {
        &self.mixture
    }

    /// `g(x) = c·x − score(x)`.
    pub fn residual(&self, x: f64) -> f64 {
        self.coefficient * x - self.mixture.score_subset(x, &self.all)
    }

    /// `(g(x), g′(x))`.
    pub fn residual_with_derivative(&self, x: f64) -> (f64, f64) {
        let (s, ds) = self.mixture.score_with_derivative(x, &self.all);
        (self.coefficient * x - s, self.coefficient - ds)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.residual_with_derivative(x).1
    }
}

/// `0.5·x − ∇ log p_t(x)` for the mixture diffused to `alpha_bar`.
pub fn drift_residual(mixture: &MixtureModel, alpha_bar: f64, x: f64) -> Result<f64> {
    Ok(DriftField::new(mixture, alpha_bar, DEFAULT_DRIFT_COEFFICIENT)?.residual(x))
}

/// Fixed points at one noise level, sorted by location.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSet {
    pub alpha_bar: f64,
    pub points: Vec<FixedPoint>,
    /// Brackets whose refinement did not converge within the iteration cap.
    /// They are reported here rather than as errors.
    pub unconverged: Vec<(f64, f64)>,
}

impl FixedPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|p| p.stability == Stability::Stable)
    }

    /// Index of the basin containing `x`: the number of unstable points to
    /// its left.
    pub fn basin(&self, x: f64) -> usize {
        self.points
            .iter()
            .filter(|p| p.stability == Stability::Unstable && p.x_star < x)
            .count()
    }
}

/// All roots of the drift residual inside `search_box` (or the covering box
/// when `None`).
pub fn find_fixed_points(
    mixture: &MixtureModel,
    alpha_bar: f64,
    search_box: Option<SearchBox>,
    options: &FixedPointOptions,
) -> Result<FixedPointSet> {
    let field = DriftField::new(mixture, alpha_bar, options.drift_coefficient)?;
    fixed_points_of(&field, search_box, options)
}

pub fn fixed_points_of(
    field: &DriftField,
    search_box: Option<SearchBox>,
    options: &FixedPointOptions,
) -> Result<FixedPointSet> {
    if options.n_starts < 2 {
        return Err(Error::ParameterDomain {
            name: "n_starts",
            value: options.n_starts as f64,
            reason: "at least two grid points are needed",
        });
    }
    let bx = search_box.unwrap_or_else(|| SearchBox::covering(field));
    let n = options.n_starts;
    let xs: Vec<f64> = (0..n).map(|i| bx.point(i, n)).collect();
    let dg: Vec<f64> = xs.iter().map(|&x| field.derivative(x)).collect();

    // breakpoints: every grid point plus every extremum of g found between
    // grid points, so that g is monotone or nearly so on each piece
    let mut knots = Vec::with_capacity(n + 16);
    for i in 0..n - 1 {
        knots.push(xs[i]);
        if (dg[i] > 0.0) != (dg[i + 1] > 0.0) {
            let e = bisect(|x| field.derivative(x) > 0.0, xs[i], xs[i + 1], dg[i] > 0.0);
            if e > xs[i] && e < xs[i + 1] {
                knots.push(e);
            }
        }
    }
    knots.push(xs[n - 1]);

    let mut points: Vec<FixedPoint> = Vec::new();
    let mut unconverged = Vec::new();
    let mut values: Vec<f64> = knots.iter().map(|&x| field.residual(x)).collect();
    for (k, v) in values.iter_mut().enumerate() {
        if *v == 0.0 {
            points.push(classify(field, knots[k]));
        }
    }
    for k in 0..knots.len() - 1 {
        let (a, b) = (knots[k], knots[k + 1]);
        let (ga, gb) = (values[k], values[k + 1]);
        if ga == 0.0 || gb == 0.0 || (ga > 0.0) == (gb > 0.0) {
            continue;
        }
        match refine(field, a, b, ga, options) {
            Some(x) => points.push(classify(field, x)),
            None => unconverged.push((a, b)),
        }
    }
    points.sort_by(|p, q| p.x_star.total_cmp(&q.x_star));
    points.dedup_by(|later, earlier| {
        if later.x_star - earlier.x_star < options.dedup_radius {
            if later.residual < earlier.residual {
                *earlier = *later;
            }
            true
        } else {
            false
        }
    });
    Ok(FixedPointSet {
        alpha_bar: field.alpha_bar(),
        points,
        unconverged,
    })
}

/// Locates the switch of a monotone predicate between `a` and `b` to full
/// floating-point resolution.
fn bisect(pred: impl Fn(f64) -> bool, mut a: f64, mut b: f64, at_a: bool) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) == at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Safeguarded Newton on a bracket `[a, b]` where `g` changes sign once.
/// A Newton step is kept when it stays inside the bracket and reduces `|g|`;
/// otherwise the step is halved, and after a few halvings the iteration falls
/// back to bisection. Converges when an accepted Newton step is below the
/// step tolerance or the bracket has shrunk to a few ulps.
fn refine(field: &DriftField, mut a: f64, mut b: f64, ga: f64, options: &FixedPointOptions) -> Option<f64> {
    let neg_at_a = ga < 0.0;
    let mut x = 0.5 * (a + b);
    let (mut gx, mut dgx) = field.residual_with_derivative(x);
    let mut best = (x, gx);
    for _ in 0..options.max_iterations {
        if gx.abs() < best.1.abs() {
            best = (x, gx);
        }
        if gx == 0.0 {
            return Some(x);
        }
        if (gx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        let tolerance = options.step_tolerance * x.abs().max(1.0);
        if b - a <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Some(polish(field, best.0, best.1));
        }
        let newton = -gx / dgx;
        let mut step = newton;
        let mut accepted = None;
        if step.is_finite() {
            for _ in 0..8 {
                let cand = x + step;
                if cand > a && cand < b {
                    let (gc, dgc) = field.residual_with_derivative(cand);
                    if gc.abs() < gx.abs() {
                        accepted = Some((cand, gc, dgc));
                        break;
                    }
                }
                step *= 0.5;
            }
        }
        match accepted {
            Some((next, gn, dgn)) => {
                let moved = (next - x).abs();
                x = next;
                gx = gn;
                dgx = dgn;
                if moved <= tolerance {
                    if gx.abs() < best.1.abs() {
                        best = (x, gx);
                    }
                    return Some(polish(field, best.0, best.1));
                }
            }
            // a correction below tolerance that cannot reduce |g| means g is
            // at its rounding floor
            None if newton.abs() <= tolerance => return Some(polish(field, best.0, best.1)),
            None => {
                x = 0.5 * (a + b);
                (gx, dgx) = field.residual_with_derivative(x);
            }
        }
    }
    None
}

/// Picks the float next to `x` with the smallest residual.
fn polish(field: &DriftField, x: f64, gx: f64) -> f64 {
    let mut best = (x, gx.abs());
    let mut down = x;
    let mut up = x;
    for _ in 0..4 {
        down = next_toward(down, f64::NEG_INFINITY);
        up = next_toward(up, f64::INFINITY);
        for c in [down, up] {
            let g = field.residual(c).abs();
            if g < best.1 {
                best = (c, g);
            }
        }
    }
    best.0
}

fn next_toward(x: f64, dir: f64) -> f64 {
    if x == 0.0 {
        return if dir > 0.0 { f64::from_bits(1) } else { -f64::from_bits(1) };
    }
    let bits = x.to_bits();
    let up = (dir > x) == (x > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

fn classify(field: &DriftField, x: f64) -> FixedPoint {
    let (g, dg) = field.residual_with_derivative(x);
    FixedPoint {
        x_star: x,
        alpha_bar: field.alpha_bar(),
        residual: g.abs(),
        slope: dg,
        stability: if dg > 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        },
    }
}

/// Fixed points at one step of the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramLevel {
    pub t: usize,
    pub s: f64,
    pub set: FixedPointSet,
}

/// A change in the number of fixed points between steps `t` and `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalLevel {
    /// Lower-noise side of the change.
    pub t: usize,
    pub s: f64,
    pub alpha_bar: f64,
    pub count_below: usize,
    pub count_above: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub levels: Vec<DiagramLevel>,
    pub critical: Vec<CriticalLevel>,
    pub total_steps: usize,
}

impl BifurcationDiagram {
    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.set.len()).collect()
    }

    /// Number of stable points at each level.
    pub fn stable_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.set.stable().count()).collect()
    }
}

fn level_set(
    mixture: &MixtureModel,
    schedule: &NoiseSchedule,
    t: usize,
    options: &FixedPointOptions,
) -> Result<FixedPointSet> {
    find_fixed_points(mixture, schedule.alpha_bar(t), None, options).map_err(|e| e.at_step(t))
}

/// Fixed points at every `stride`-th step with count changes refined to
/// single steps.
pub fn trace_bifurcations(
    mixture: &MixtureModel,
    schedule: &NoiseSchedule,
    stride: usize,
    options: &FixedPointOptions,
) -> Result<BifurcationDiagram> {
    let grid = TimeGrid::strided(schedule.steps(), stride)?;
    let total = schedule.steps();
    let levels = grid
        .steps()
        .par_iter()
        .map(|&t| {
            Ok(DiagramLevel {
                t,
                s: t as f64 / total as f64,
                set: level_set(mixture, schedule, t, options)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut critical = Vec::new();
    for w in levels.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        refine_count_change(
            mixture,
            schedule,
            options,
            (lo.t, lo.set.len()),
            (hi.t, hi.set.len()),
            &mut critical,
        )?;
    }
    Ok(BifurcationDiagram {
        levels,
        critical,
        total_steps: total,
    })
}

fn refine_count_change(
    mixture: &MixtureModel,
    schedule: &NoiseSchedule,
    options: &FixedPointOptions,
    (a, ca): (usize, usize),
    (b, cb): (usize, usize),
    out: &mut Vec<CriticalLevel>,
) -> Result<()> {
    if ca == cb {
        return Ok(());
    }
    if b - a == 1 {
        out.push(CriticalLevel {
            t: a,
            s: a as f64 / schedule.steps() as f64,
            alpha_bar: schedule.alpha_bar(a),
            count_below: ca,
            count_above: cb,
        });
        return Ok(());
    }
    let m = a + (b - a) / 2;
    let cm = level_set(mixture, schedule, m, options)?.len();
    refine_count_change(mixture, schedule, options, (a, ca), (m, cm), out)?;
    refine_count_change(mixture, schedule, options, (m, cm), (b, cb), out)
}

/// The step at which two groups of components first fall into different
/// basins of attraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// Largest step at which the groups occupy disjoint sets of basins.
    pub t: usize,
    pub s: f64,
    pub count: usize,
}

fn separated(set: &FixedPointSet, field: &DiffusedMixture, a: &[usize], b: &[usize]) -> bool {
    let basins_a: Vec<usize> = a.iter().map(|&k| set.basin(field.means()[k])).collect();
    b.iter()
        .all(|&k| !basins_a.contains(&set.basin(field.means()[k])))
}

/// Scans from the noisiest step downwards for the first step at which every
/// diffused mean of `a` sits in a different basin from every diffused mean
/// of `b`. Returns `None` if the groups never separate.
pub fn separation_time(
    mixture: &MixtureModel,
    schedule: &NoiseSchedule,
    a: &[usize],
    b: &[usize],
    options: &FixedPointOptions,
) -> Result<Option<Separation>> {
    for k in a.iter().chain(b) {
        if *k >= mixture.len() {
            return Err(Error::Partition {
                index: Some(*k),
                reason: "component index out of range",
            });
        }
    }
    for t in (1..=schedule.steps()).rev() {
        let field = DriftField::new(mixture, schedule.alpha_bar(t), options.drift_coefficient)
            .map_err(|e| e.at_step(t))?;
        let set = fixed_points_of(&field, None, options)?;
        if separated(&set, field.diffused(), a, b) {
            return Ok(Some(Separation {
                t,
                s: t as f64 / schedule.steps() as f64,
                count: set.len(),
            }));
        }
    }
    Ok(None)
}
