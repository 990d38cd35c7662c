//! Nelder–Mead minimization in a box. Trial points are projected onto the
//! box before evaluation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop once `f_worst - f_best` across the simplex falls below this.
    pub ftol: f64,
    /// ... or once every vertex lies within this distance of the best one.
    pub xtol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 0.5,
            max_iterations: 2000,
            ftol: 1e-10,
            xtol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn along(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimizes `f` from `x0` inside `[lower, upper]`.
///
/// The initial simplex steps `initial_step` along each axis, away from the
/// nearer bound. Non-finite objective values count as `+∞`.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0 && lower.len() == n && upper.len() == n);
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let mut pts = vec![start.clone()];
    for k in 0..n {
        let mut p = start.clone();
        let room_up = upper[k] - start[k];
        let room_down = start[k] - lower[k];
        let step = opts.initial_step.min(room_up.max(room_down));
        p[k] += if room_up >= room_down { step } else { -step };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.ftol) || diameter <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let worst = pts[n].clone();

        let mut reflected = along(&centroid, &worst, -1.0);
        project(&mut reflected, lower, upper);
        let fr = eval(&reflected);

        if fr < vals[0] {
            let mut expanded = along(&centroid, &worst, -2.0);
            project(&mut expanded, lower, upper);
            let fe = eval(&expanded);
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[n] {
            let c = along(&centroid, &reflected, 0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(&centroid, &worst, 0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = contracted;
            vals[n] = fc;
            continue;
        }
        let best = pts[0].clone();
        for k in 1..=n {
            pts[k] = along(&best, &pts[k], 0.5);
            vals[k] = eval(&pts[k]);
        }
    }

    let (best, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex has vertices");
    SimplexResult {
        x: pts[best].clone(),
        f: vals[best],
        iterations,
        evaluations,
        converged,
    }
}
