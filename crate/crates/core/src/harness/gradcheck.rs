use crate::depth::{DepthGrad, DepthImage, Pixel};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_pixel: Option<Pixel>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub h: f64,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e−12)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

pub fn finite_diff_check<L, G>(
    loss_fn: L,
    grad_fn: G,
    depth: &DepthImage,
    h: f64,
    pixels: Option<&[Pixel]>,
) -> Result<GradCheckReport>
where
    L: Fn(&DepthImage) -> Result<f64> + Sync + Send,
    G: Fn(&DepthImage) -> Result<DepthGrad>,
{
    finite_diff_check_with(loss_fn, grad_fn, depth, h, pixels, Exec::default())
}

/// Compare `grad_fn` against central differences of `loss_fn`, one pixel at a
/// time. `pixels` defaults to every valid pixel; invalid pixels in an explicit
/// list are rejected since perturbing them is meaningless.
pub fn finite_diff_check_with<L, G>(
    loss_fn: L,
    grad_fn: G,
    depth: &DepthImage,
    h: f64,
    pixels: Option<&[Pixel]>,
    exec: Exec,
) -> Result<GradCheckReport>
where
    L: Fn(&DepthImage) -> Result<f64> + Sync + Send,
    G: Fn(&DepthImage) -> Result<DepthGrad>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
    }
    let pixels: Vec<Pixel> = match pixels {
        Some(p) => p.to_vec(),
        None => depth.valid_pixels().collect(),
    };
    for px in &pixels {
        if px.u as usize >= depth.width() || px.v as usize >= depth.height() {
            return Err(Error::InvalidArgument(format!(
                "pixel ({}, {}) outside image",
                px.u, px.v
            )));
        }
        if depth.get(px.u as usize, px.v as usize).is_none() {
            return Err(Error::InvalidArgument(format!(
                "pixel ({}, {}) has no depth",
                px.u, px.v
            )));
        }
    }
    let analytic = grad_fn(depth)?;

    let numeric = exec::map_slice(exec, &pixels, |px| -> Result<f64> {
        let i = depth.index(px.u as usize, px.v as usize);
        let mut z = depth.clone();
        z.nudge(i, h);
        let plus = loss_fn(&z)?;
        let mut z = depth.clone();
        z.nudge(i, -h);
        let minus = loss_fn(&z)?;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFiniteLoss {
                value: if plus.is_finite() { minus } else { plus },
                context: format!("at pixel ({}, {})", px.u, px.v),
            });
        }
        Ok((plus - minus) / (2.0 * h))
    });

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_pixel: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        h,
        checked: pixels.len(),
    };
    for (px, n) in pixels.iter().zip(numeric) {
        let n = n?;
        let a = analytic.get(px.u as usize, px.v as usize);
        let e = relative_error(a, n);
        if report.worst_pixel.is_none() || e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst_pixel = Some(*px);
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    Ok(report)
}
