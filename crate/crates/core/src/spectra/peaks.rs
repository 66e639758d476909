//! Peak detection for sampled spectra.

/// A local maximum refined by a parabola through its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub position: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima of `y(x)` whose topographic prominence is at least
/// `min_prominence` times the global maximum, sorted by position.
pub fn find_peaks(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = x.len().min(y.len());
    if n < 3 {
        return Vec::new();
    }
    let top = y[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // handle flat tops by walking to the end of the plateau
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let centre = (i + j) / 2;
                let prominence = prominence(y, centre, n);
                if prominence >= min_prominence * top {
                    let (position, height) = refine(x, y, centre, n);
                    peaks.push(Peak { index: centre, position, height, prominence });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(y: &[f64], i: usize, n: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    let mut k = i;
    while k > 0 {
        k -= 1;
        if y[k] > h {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = h;
    for &v in &y[i + 1..n] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn refine(x: &[f64], y: &[f64], i: usize, n: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= n {
        return (x[i], y[i]);
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xm = (-b / (2.0 * a)).clamp(x0, x2);
    let ym = y1 + (xm - x1) * (d01 + a * (xm - x0));
    (xm, ym)
}

/// Full width at half maximum around the global maximum by linear
/// interpolation; `None` if the curve does not fall below half on both sides.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    let (imax, &top) = y[..n].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(top > 0.0) {
        return None;
    }
    let half = 0.5 * top;
    let mut left = None;
    for k in (0..imax).rev() {
        if y[k] < half {
            left = Some(x[k] + (half - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k]));
            break;
        }
    }
    let mut right = None;
    for k in imax + 1..n {
        if y[k] < half {
            right = Some(x[k - 1] + (half - y[k - 1]) * (x[k] - x[k - 1]) / (y[k] - y[k - 1]));
            break;
        }
    }
    Some(right? - left?)
}
