//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate (flat index into the checked vector) with the largest error.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Coordinates sitting on a kink, excluded from the comparison.
    pub skipped: Vec<usize>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }

    fn merge(&mut self, other: GradCheckReport, offset: usize) {
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst.map(|w| w + offset);
        }
        self.checked += other.checked;
        self.skipped.extend(other.skipped.into_iter().map(|s| s + offset));
    }
}

fn finite(v: f64, at: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("objective is {v} while perturbing coordinate {at}")))
    }
}

/// Relative error with a floor so near-zero gradients compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against `(f(θ+h eᵢ) − f(θ−h eᵢ)) / 2h` on the coordinates in `coords`
/// (all coordinates when `None`).
///
/// A coordinate is reported as skipped when the one-sided slopes disagree by an amount that
/// does not shrink with the step, which marks a kink inside the stencil.
pub fn finite_diff_check(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    analytic: &[f64],
    h: f64,
    coords: Option<&[usize]>,
) -> Result<GradCheckReport> {
    if h <= 0.0 {
        return Err(Error::Contract("finite-difference step must be positive".into()));
    }
    if analytic.len() != theta.len() {
        return Err(Error::dim("analytic gradient length differs from θ"));
    }
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = 1e-6 * scale.max(1.0);
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..theta.len()).collect();
            &all
        }
    };
    let mut report = GradCheckReport::default();
    let mut x = theta.to_vec();
    let f0 = finite(f(&x)?, usize::MAX)?;
    for &i in coords {
        let orig = x[i];
        let mut eval = |x: &mut Vec<f64>, d: f64| -> Result<f64> {
            x[i] = orig + d;
            let v = finite(f(x)?, i);
            x[i] = orig;
            v
        };
        let fp = eval(&mut x, h)?;
        let fm = eval(&mut x, -h)?;
        let numeric = (fp - fm) / (2.0 * h);
        let gap = (fp - f0) / h - (f0 - fm) / h;
        if gap.abs() > 1e-6 * (1.0 + numeric.abs()) {
            let fph = eval(&mut x, h / 2.0)?;
            let fmh = eval(&mut x, -h / 2.0)?;
            let gap_half = (fph - f0) / (h / 2.0) - (f0 - fmh) / (h / 2.0);
            if gap_half.abs() > 0.75 * gap.abs() {
                report.skipped.push(i);
                continue;
            }
        }
        let err = relative_error(analytic[i], numeric, floor);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err;
            report.worst = Some(i);
        }
    }
    Ok(report)
}

/// Checks every parameter of `store` (at most `max_coords` random coordinates per tensor)
/// against the gradient of the scalar produced by `loss`.
pub fn check_store<F>(store: &mut ParamStore<f64>, mut loss: F, h: f64, max_coords: Option<usize>, seed: u64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<'_, f64>) -> Result<Var>,
{
    let grads = {
        let mut tape = Tape::new(&*store, true);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    let mut offset = 0;
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let theta = store.tensor(id).data().to_vec();
        let analytic = grads.dense(id);
        let coords: Vec<usize> = match max_coords {
            Some(m) if m < theta.len() => {
                let mut c = sample(&mut rng, theta.len(), m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..theta.len()).collect(),
        };
        let r = finite_diff_check(
            |th| {
                store.tensor_mut(id).data_mut().copy_from_slice(th);
                let mut tape = Tape::new(&*store, true);
                let l = loss(&mut tape)?;
                let v = tape.value_of(l);
                Ok(v)
            },
            &theta,
            &analytic,
            h,
            Some(&coords),
        );
        store.tensor_mut(id).data_mut().copy_from_slice(&theta);
        report.merge(r?, offset);
        offset += theta.len();
    }
    Ok(report)
}
