use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_pipeline, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::DeviceGeometry;
use crate::metrics::collection_efficiency;

/// Geometry parameters searched by [`optimize_geometry`], in vector order.
pub const PARAMETER_NAMES: [&str; 8] = ["r_d", "h", "a1", "a2", "d1", "d2", "r_h1", "r_h2"];

fn to_vector(g: &DeviceGeometry) -> Vec<f64> {
    vec![g.r_d, g.h, g.a1, g.a2, g.d1, g.d2, g.r_h1, g.r_h2]
}

fn from_vector(base: &DeviceGeometry, x: &[f64]) -> DeviceGeometry {
    DeviceGeometry {
        r_d: x[0],
        h: x[1],
        a1: x[2],
        a2: x[3],
        d1: x[4],
        d2: x[5],
        r_h1: x[6],
        r_h2: x[7],
        ..base.clone()
    }
}

/// Box constraints on the searched parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBounds {
    pub lower: DeviceGeometry,
    pub upper: DeviceGeometry,
}

impl GeometryBounds {
    /// `center` scaled by `1 - fraction` and `1 + fraction`.
    pub fn relative(center: &DeviceGeometry, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!("fraction must lie in (0, 1), got {fraction}")));
        }
        let c = to_vector(center);
        let lo: Vec<f64> = c.iter().map(|v| v * (1.0 - fraction)).collect();
        let hi: Vec<f64> = c.iter().map(|v| v * (1.0 + fraction)).collect();
        Ok(GeometryBounds {
            lower: from_vector(center, &lo),
            upper: from_vector(center, &hi),
        })
    }

    fn vectors(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = (to_vector(&self.lower), to_vector(&self.upper));
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::invalid(format!(
                    "bounds for {} are not finite and ordered: [{l}, {h}]",
                    PARAMETER_NAMES[i]
                )));
            }
        }
        Ok((lo, hi))
    }
}

/// Settings of the bounded simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Initial simplex edge as a fraction of each bound width.
    pub initial_step: f64,
    /// Restarts allowed after the simplex collapses.
    pub restarts: usize,
    /// Collapse threshold on the spread of objective values.
    pub f_tol: f64,
    /// Collapse threshold on the simplex diameter in unit-box coordinates.
    pub x_tol: f64,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            budget: 200,
            initial_step: 0.1,
            restarts: 3,
            f_tol: 1e-9,
            x_tol: 1e-6,
            seed: 0,
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub params: Vec<f64>,
    pub objective: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<TraceEntry>,
    pub restarts_used: usize,
}

/// Evaluation counter that records the trace and stops at the budget.
struct Evaluator<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    budget: usize,
    trace: Vec<TraceEntry>,
    best: Vec<f64>,
    best_value: f64,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Objective at unit-box point `u`; `None` once the budget is spent.
    fn eval(&mut self, u: &[f64]) -> Option<f64> {
        let x: Vec<f64> = u
            .iter()
            .zip(self.lower.iter().zip(self.upper))
            .map(|(t, (l, h))| l + t.clamp(0.0, 1.0) * (h - l))
            .collect();
        self.eval_at(x)
    }

    /// Objective at `x`, clamped into the box.
    fn eval_at(&mut self, mut x: Vec<f64>) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        for (v, (l, h)) in x.iter_mut().zip(self.lower.iter().zip(self.upper)) {
            *v = v.clamp(*l, *h);
        }
        let mut v = (self.f)(&x);
        if !v.is_finite() {
            v = f64::NEG_INFINITY;
        }
        if self.trace.is_empty() || v > self.best_value {
            self.best_value = v;
            self.best = x.clone();
        }
        self.trace.push(TraceEntry {
            params: x,
            objective: v,
            best_so_far: self.best_value,
        });
        Some(v)
    }

    fn unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(self.upper))
            .map(|(v, (l, h))| if h > l { (v - l) / (h - l) } else { 0.0 })
            .collect()
    }
}

/// Maximises `f` over the box `[lower, upper]` with a clamped Nelder-Mead
/// simplex, restarting from the incumbent with a seeded random simplex each
/// time the simplex collapses.
pub fn nelder_mead(
    f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &NelderMeadOptions,
) -> Result<NelderMeadResult> {
    let d = x0.len();
    if d == 0 || lower.len() != d || upper.len() != d {
        return Err(Error::invalid("x0 and bounds must have the same nonzero length"));
    }
    if lower.iter().zip(upper).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
        return Err(Error::invalid("bounds must be finite and ordered"));
    }
    if options.budget < 1 {
        return Err(Error::invalid("budget must be at least one evaluation"));
    }
    let mut ev = Evaluator {
        f,
        lower,
        upper,
        budget: options.budget,
        trace: Vec::with_capacity(options.budget),
        best: x0.to_vec(),
        best_value: f64::NEG_INFINITY,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut origin_x = x0.to_vec();
    let mut restarts_used = 0;

    // Simplex vertices in unit-box coordinates, each with its value.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut directions: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = options.initial_step;
            e
        })
        .collect();
    'outer: loop {
        simplex.clear();
        let origin: Vec<f64> = ev.unit(&origin_x).into_iter().map(|t| t.clamp(0.0, 1.0)).collect();
        match ev.eval_at(origin_x.clone()) {
            Some(v) => simplex.push((origin.clone(), v)),
            None => break,
        }
        for dir in &directions {
            let p: Vec<f64> = origin
                .iter()
                .zip(dir)
                .map(|(o, s)| {
                    let t = o + s;
                    if !(0.0..=1.0).contains(&t) {
                        o - s
                    } else {
                        t
                    }
                    .clamp(0.0, 1.0)
                })
                .collect();
            match ev.eval(&p) {
                Some(v) => simplex.push((p, v)),
                None => break 'outer,
            }
        }

        loop {
            // Best first.
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let spread = simplex[0].1 - simplex[d].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let tol = options.f_tol * simplex[0].1.abs().max(1.0);
            if spread.is_finite() && (spread <= tol || diameter <= options.x_tol) {
                break;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|j| simplex[..d].iter().map(|(p, _)| p[j]).sum::<f64>() / d as f64)
                .collect();
            let worst = simplex[d].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| (c + t * (c - w)).clamp(0.0, 1.0))
                    .collect()
            };
            let xr = along(1.0);
            let Some(fr) = ev.eval(&xr) else { break 'outer };
            if fr > simplex[0].1 {
                let xe = along(2.0);
                let Some(fe) = ev.eval(&xe) else { break 'outer };
                simplex[d] = if fe > fr { (xe, fe) } else { (xr, fr) };
            } else if fr > simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                let t = if fr > worst.1 { 0.5 } else { -0.5 };
                let xc = along(t);
                let Some(fc) = ev.eval(&xc) else { break 'outer };
                if fc > worst.1.max(if t > 0.0 { fr } else { f64::NEG_INFINITY }) {
                    simplex[d] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let p: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                        let Some(v) = ev.eval(&p) else { break 'outer };
                        *vertex = (p, v);
                    }
                }
            }
        }

        if restarts_used >= options.restarts || ev.exhausted() {
            break;
        }
        restarts_used += 1;
        origin_x = ev.best.clone();
        directions = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                e[i] = sign * options.initial_step * rng.gen_range(0.5..1.5);
                e
            })
            .collect();
    }

    Ok(NelderMeadResult {
        best: ev.best,
        best_value: ev.best_value,
        trace: ev.trace,
        restarts_used,
    })
}

/// `eta_col(0.7) * gaussian_overlap` of a configuration; zero for
/// geometries the pipeline rejects.
pub fn geometry_objective(config: &RunConfig) -> f64 {
    match run_pipeline(config) {
        Ok(out) => match collection_efficiency(&out.map, 0.7, config.eta_ex) {
            Ok(eta) => eta * out.report.overlap_gauss,
            Err(_) => 0.0,
        },
        Err(e) => {
            log::debug!("infeasible geometry scores zero: {e}");
            0.0
        }
    }
}

/// Best geometry found and the full evaluation history.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub geometry: DeviceGeometry,
    pub objective: f64,
    pub trace: Vec<TraceEntry>,
}

/// Maximises [`geometry_objective`] over `bounds`, starting from
/// `config.geometry`, within `budget` pipeline runs. Deterministic for a given
/// `config.seed`.
pub fn optimize_geometry(config: &RunConfig, bounds: &GeometryBounds, budget: usize) -> Result<OptimizeResult> {
    let (lower, upper) = bounds.vectors()?;
    let x0 = to_vector(&config.geometry);
    let options = NelderMeadOptions {
        budget,
        seed: config.seed,
        ..NelderMeadOptions::default()
    };
    let objective = |x: &[f64]| geometry_objective(&config.with_geometry(from_vector(&config.geometry, x)));
    let res = nelder_mead(objective, &x0, &lower, &upper, &options)?;
    Ok(OptimizeResult {
        geometry: config.with_geometry(from_vector(&config.geometry, &res.best)).geometry,
        objective: res.best_value,
        trace: res.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rosen(x: &[f64]) -> f64 {
        -x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum::<f64>()
    }

    #[test]
    fn finds_bowl_maximum() {
        let opts = NelderMeadOptions {
            budget: 2000,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(
            |x| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.2).powi(2),
            &[0.9, 0.9],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &opts,
        )
        .unwrap();
        assert!((r.best[0] - 0.3).abs() < 1e-3 && (r.best[1] + 0.2).abs() < 1e-3, "{:?}", r.best);
    }

    #[test]
    fn respects_bounds() {
        let r = nelder_mead(|x| x[0] + x[1], &[0.0, 0.0], &[-1.0, -1.0], &[0.5, 0.25], &NelderMeadOptions::default())
            .unwrap();
        assert!(r.trace.iter().all(|t| t.params[0] <= 0.5 && t.params[1] <= 0.25));
        assert!((r.best_value - 0.75).abs() < 1e-6);
    }

    #[test]
    fn budget_one_returns_start() {
        let opts = NelderMeadOptions {
            budget: 1,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(rosen, &[0.2, 0.4, 0.1], &[-2.0; 3], &[2.0; 3], &opts).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best, vec![0.2, 0.4, 0.1]);
    }

    #[test]
    fn rejects_bad_bounds() {
        let o = NelderMeadOptions::default();
        assert!(nelder_mead(rosen, &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &o).is_err());
        assert!(nelder_mead(rosen, &[0.0], &[f64::NEG_INFINITY], &[1.0], &o).is_err());
        let g = DeviceGeometry::default();
        let bounds = GeometryBounds {
            lower: DeviceGeometry { a1: 0.6, ..g.clone() },
            upper: g.clone(),
        };
        assert!(optimize_geometry(&RunConfig::default(), &bounds, 5).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let run = |seed| {
            let opts = NelderMeadOptions {
                budget: 300,
                seed,
                ..NelderMeadOptions::default()
            };
            nelder_mead(rosen, &[0.5, -0.5, 0.5], &[-2.0; 3], &[2.0; 3], &opts).unwrap()
        };
        assert_eq!(run(7), run(7));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn best_so_far_is_monotone(x0 in prop::collection::vec(-2.0f64..2.0, 3), seed in 0u64..100, budget in 1usize..150) {
            let opts = NelderMeadOptions { budget, seed, ..NelderMeadOptions::default() };
            let r = nelder_mead(rosen, &x0, &[-2.0; 3], &[2.0; 3], &opts).unwrap();
            prop_assert!(r.trace.len() <= budget);
            prop_assert!(r.best_value >= r.trace[0].objective);
            for w in r.trace.windows(2) {
                prop_assert!(w[1].best_so_far >= w[0].best_so_far);
            }
            prop_assert_eq!(r.trace.last().unwrap().best_so_far, r.best_value);
        }
    }
}
