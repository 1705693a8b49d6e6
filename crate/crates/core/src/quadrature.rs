//! Small quadrature utilities: Gauss–Legendre rules on [0,1] and the exact
//! overlap area between a grid cell and a disc (used for boundary-cell
//! weights in the Cauchy transform).

/// 8-point Gauss–Legendre nodes/weights on [0,1].
#[allow(clippy::excessive_precision)]
pub const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (1.98550717512319119e-02, 5.06142681451883444e-02),
    (1.01666761293186636e-01, 1.11190517226687172e-01),
    (2.37233795041835505e-01, 1.56853322938943524e-01),
    (4.08282678752175110e-01, 1.81341891689180884e-01),
    (5.91717321247824835e-01, 1.81341891689180884e-01),
    (7.62766204958164495e-01, 1.56853322938943524e-01),
    (8.98333238706813364e-01, 1.11190517226687172e-01),
    (9.80144928248768088e-01, 5.06142681451883444e-02),
];

/// 16-point Gauss–Legendre nodes/weights on [0,1].
#[allow(clippy::excessive_precision)]
pub const GAUSS_LEGENDRE_16: [(f64, f64); 16] = [
    (5.29953250417503074e-03, 1.35762297058770187e-02),
    (2.77124884633836999e-02, 3.11267619693238531e-02),
    (6.71843988060841224e-02, 4.75792558412462957e-02),
    (1.22297795822498501e-01, 6.23144856277670148e-02),
    (1.91061877798678115e-01, 7.47979944082883819e-02),
    (2.70991611171386315e-01, 8.45782596975013096e-02),
    (3.59198224610370542e-01, 9.13017075224618058e-02),
    (4.52493745081181287e-01, 9.47253052275342927e-02),
    (5.47506254918818769e-01, 9.47253052275342927e-02),
    (6.40801775389629458e-01, 9.13017075224618058e-02),
    (7.29008388828613629e-01, 8.45782596975013096e-02),
    (8.08938122201321885e-01, 7.47979944082883819e-02),
    (8.77702204177501555e-01, 6.23144856277670148e-02),
    (9.32815601193915933e-01, 4.75792558412462957e-02),
    (9.72287511536616300e-01, 3.11267619693238531e-02),
    (9.94700467495824969e-01, 1.35762297058770187e-02),
];

/// Area of the square cell [cx−half, cx+half] × [cy−half, cy+half]
/// intersected with the open disc of radius `r` centered at the origin.
///
/// The vertical extent of the overlap is integrated in x; the integrand is
/// piecewise smooth with kinks where the circle crosses the cell's top or
/// bottom edge or leaves the strip, so the x-interval is split at those
/// abscissae and each smooth piece gets a 16-point Gauss rule.
pub fn disc_cell_overlap(cx: f64, cy: f64, half: f64, r: f64) -> f64 {
    let (x0, x1) = (cx - half, cx + half);
    let (y0, y1) = (cy - half, cy + half);
    // quick exits
    let corner_far = |x: f64, y: f64| x * x + y * y >= r * r;
    let fx = if x0.abs() > x1.abs() { x0 } else { x1 };
    let fy = if y0.abs() > y1.abs() { y0 } else { y1 };
    if !corner_far(fx, fy) {
        return 4.0 * half * half; // farthest corner inside: full cell
    }
    // nearest point of the cell to the origin
    let px = 0.0f64.clamp(x0, x1);
    let py = 0.0f64.clamp(y0, y1);
    if px * px + py * py >= r * r {
        return 0.0; // cell entirely outside the closed disc
    }

    let lo = x0.max(-r);
    let hi = x1.min(r);
    if lo >= hi {
        return 0.0;
    }
    // split points: circle meets y = y0, y = y1
    let mut cuts = vec![lo, hi];
    for y in [y0, y1] {
        let d = r * r - y * y;
        if d > 0.0 {
            let x = d.sqrt();
            for cand in [-x, x] {
                if cand > lo && cand < hi {
                    cuts.push(cand);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ylen = |x: f64| -> f64 {
        let g = (r * r - x * x).max(0.0).sqrt();
        let top = y1.min(g);
        let bot = y0.max(-g);
        (top - bot).max(0.0)
    };
    let gauss = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        let mut acc = 0.0;
        for &(t, wt) in &GAUSS_LEGENDRE_16 {
            acc += wt * f(a + t * (b - a));
        }
        acc * (b - a)
    };
    // pieces whose endpoint approaches ±r carry the sqrt tangency of the
    // arc; the substitution x = ±(r − u²) makes those integrands smooth
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let right_tangent = (r - b) < (b - a);
        let left_tangent = (a + r) < (b - a);
        area += if right_tangent && left_tangent {
            let mid = 0.5 * (a + b);
            gauss(
                &|u| 2.0 * u * ylen(-r + u * u),
                (a + r).max(0.0).sqrt(),
                (mid + r).sqrt(),
            ) + gauss(
                &|u| 2.0 * u * ylen(r - u * u),
                (r - b).max(0.0).sqrt(),
                (r - mid).sqrt(),
            )
        } else if right_tangent {
            gauss(
                &|u| 2.0 * u * ylen(r - u * u),
                (r - b).max(0.0).sqrt(),
                (r - a).sqrt(),
            )
        } else if left_tangent {
            gauss(
                &|u| 2.0 * u * ylen(-r + u * u),
                (a + r).max(0.0).sqrt(),
                (b + r).sqrt(),
            )
        } else {
            gauss(&ylen, a, b)
        };
    }
    area
}
