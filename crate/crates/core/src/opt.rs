//! Deterministic scalar and simplex optimizers.
//!
//! The chain code needs two things: tight suprema of smooth radial profiles
//! (grid scan plus golden-section refinement) and a derivative-free
//! parameter search over a low-dimensional box (Nelder-Mead with clamped
//! reflections). Both are exact-arithmetic deterministic: no randomness, and
//! ties resolve toward the lower index.

/// Golden-section maximum of a unimodal `f` on `[a, b]` to abscissa
/// tolerance `tol_x`. Returns `(argmax, max)`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol_x: f64,
) -> (f64, f64) {
    assert!(a <= b, "bad bracket [{a}, {b}]");
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol_x {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if f1 >= f2 && f1 >= fm {
        (x1, f1)
    } else if f2 >= fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// Maximum of `f` on `[a, b]` by an `n`-point scan followed by
/// golden-section refinement around the best sample. Handles multimodal
/// profiles as long as the grid resolves the global peak's basin.
pub fn grid_then_golden_max<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
) -> (f64, f64) {
    assert!(n >= 2, "need at least two grid points");
    assert!(a <= b, "bad bracket [{a}, {b}]");
    let h = (b - a) / n as f64;
    let mut best_i = 0;
    let mut best_f = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = a + h * i as f64;
        let v = f(x);
        if v > best_f {
            best_f = v;
            best_i = i;
        }
    }
    let lo = a + h * best_i.saturating_sub(1) as f64;
    let hi = (a + h * (best_i + 1) as f64).min(b);
    let (x, v) = golden_section_max(&mut f, lo, hi, 1e-12 * (b - a).max(1.0));
    if v >= best_f {
        (x, v)
    } else {
        (a + h * best_i as f64, best_f)
    }
}

/// Outcome of a Nelder-Mead minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization over the box `lo × hi`; reflected points clamp
/// onto the box faces. Terminates when the simplex value spread drops below
/// `f_tol` or after `max_iterations`.
pub fn nelder_mead_min<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    lo: &[f64],
    hi: &[f64],
    f_tol: f64,
    max_iterations: usize,
) -> SimplexOutcome {
    let n = start.len();
    assert!(n > 0 && steps.len() == n && lo.len() == n && hi.len() == n);
    for i in 0..n {
        assert!(lo[i] < hi[i], "empty box in dimension {i}");
        assert!(start[i] >= lo[i] && start[i] <= hi[i], "start outside box");
    }
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] = (v[i] + steps[i]).clamp(lo[i], hi[i]);
        if v[i] == start[i] {
            v[i] = (start[i] - steps[i]).clamp(lo[i], hi[i]);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    loop {
        // Stable sort: equal values keep insertion order, so runs replay.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        let spread = values[n] - values[0];
        if spread <= f_tol {
            return SimplexOutcome {
                x: simplex[0].clone(),
                value: values[0],
                iterations,
                converged: true,
            };
        }
        if iterations >= max_iterations {
            return SimplexOutcome {
                x: simplex[0].clone(),
                value: values[0],
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }

        let mut reflected = vec![0.0; n];
        for i in 0..n {
            reflected[i] = centroid[i] + alpha * (centroid[i] - simplex[n][i]);
        }
        clamp(&mut reflected);
        let fr = f(&reflected);

        if fr < values[0] {
            let mut expanded = vec![0.0; n];
            for i in 0..n {
                expanded[i] = centroid[i] + gamma * (reflected[i] - centroid[i]);
            }
            clamp(&mut expanded);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let mut contracted = vec![0.0; n];
            let (base, towards) = if fr < values[n] {
                (&reflected, fr)
            } else {
                (&simplex[n], values[n])
            };
            for i in 0..n {
                contracted[i] = centroid[i] + rho * (base[i] - centroid[i]);
            }
            clamp(&mut contracted);
            let fc = f(&contracted);
            if fc < towards {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for (v, val) in simplex.iter_mut().zip(values.iter_mut()).skip(1) {
                    for i in 0..n {
                        v[i] = best[i] + shrink * (v[i] - best[i]);
                    }
                    *val = f(v);
                }
            }
        }
    }
}
