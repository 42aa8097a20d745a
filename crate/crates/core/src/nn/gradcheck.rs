use super::{GradientSet, NetworkParams};

/// Relative discrepancy with a small absolute floor so that entries whose
/// true gradient is zero do not divide by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / scale
}

/// Worst relative error between `analytic` and a central-difference
/// estimate of `loss_fn` around `params`, over every parameter.
pub fn gradient_check<F>(
    params: &NetworkParams,
    analytic: &GradientSet,
    loss_fn: F,
    step: f64,
) -> f64
where
    F: FnMut(&NetworkParams) -> f64,
{
    gradient_check_report(params, analytic, loss_fn, step, 1e-4).max_relative
}

/// Breakdown of a finite-difference comparison that separates entries the
/// difference quotient can resolve at `rel_tol` from those it cannot.
///
/// A central difference of a loss of magnitude `L` carries round-off of
/// about `eps * L / step`. Entries smaller than that scale divided by
/// `rel_tol` cannot be checked to `rel_tol` relative in double precision,
/// so for them the report gives the discrepancy in units of that round-off
/// scale instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    /// Plain per-entry worst relative error over all parameters.
    pub max_relative: f64,
    /// Worst relative error over resolvable entries.
    pub max_relative_resolved: f64,
    /// Worst |analytic - numeric| / (eps * |L| / step) over the rest.
    pub max_roundoff_ratio: f64,
    pub resolved: usize,
    pub unresolved: usize,
}

pub fn gradient_check_report<F>(
    params: &NetworkParams,
    analytic: &GradientSet,
    mut loss_fn: F,
    step: f64,
    rel_tol: f64,
) -> GradientCheckReport
where
    F: FnMut(&NetworkParams) -> f64,
{
    let mut probe = params.clone();
    let mut report = GradientCheckReport {
        max_relative: 0.0,
        max_relative_resolved: 0.0,
        max_roundoff_ratio: 0.0,
        resolved: 0,
        unresolved: 0,
    };
    for (idx, a) in analytic.iter().enumerate() {
        let original = probe.get(idx);
        probe.set(idx, original + step);
        let plus = loss_fn(&probe);
        probe.set(idx, original - step);
        let minus = loss_fn(&probe);
        probe.set(idx, original);
        let numeric = (plus - minus) / (2.0 * step);
        let rel = relative_error(a, numeric);
        report.max_relative = report.max_relative.max(rel);
        let roundoff = f64::EPSILON * plus.abs().max(minus.abs()) / step;
        if a.abs().max(numeric.abs()) * rel_tol >= roundoff {
            report.resolved += 1;
            report.max_relative_resolved = report.max_relative_resolved.max(rel);
        } else {
            report.unresolved += 1;
            let ratio = (a - numeric).abs() / roundoff.max(f64::MIN_POSITIVE);
            report.max_roundoff_ratio = report.max_roundoff_ratio.max(ratio);
        }
    }
    report
}
