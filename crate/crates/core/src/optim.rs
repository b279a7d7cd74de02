//! Derivative-free simplex minimizer shared by the logistic fitters.

/// Standard Nelder-Mead coefficients: reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2.
const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iters: usize,
    /// Converged when the spread of simplex values drops below
    /// `rel_tol * (|best| + rel_tol)`.
    pub rel_tol: f64,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0`. The initial simplex perturbs each
/// coordinate by 5% (or a small absolute step where it is zero).
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let dim = x0.len();
    assert!(dim > 0, "empty parameter vector");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        if v[i] != 0.0 {
            v[i] *= 1.05;
        } else {
            v[i] = 0.00025;
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;

        // Order by value; NaNs sort worst so they get replaced first.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or_else(|| values[b].is_nan().cmp(&values[a].is_nan()))
        });
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        if (values[worst] - values[best]).abs()
            <= opts.rel_tol * (values[best].abs() + opts.rel_tol)
        {
            converged = true;
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; dim];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for d in 0..dim {
                centroid[d] += v[d];
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let blend = |t: f64| -> Vec<f64> {
            (0..dim)
                .map(|d| centroid[d] + t * (centroid[d] - simplex[worst][d]))
                .collect()
        };

        let reflected = blend(REFLECT);
        let f_reflected = f(&reflected);
        if f_reflected < values[best] {
            let expanded = blend(EXPAND);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }
        // Contract toward the better of worst/reflected.
        let contracted = if f_reflected < values[worst] {
            blend(CONTRACT)
        } else {
            blend(-CONTRACT)
        };
        let f_contracted = f(&contracted);
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }
        // Shrink everything toward the best vertex.
        let anchor = simplex[best].clone();
        for (i, v) in simplex.iter_mut().enumerate() {
            if i == best {
                continue;
            }
            for d in 0..dim {
                v[d] = anchor[d] + SHRINK * (v[d] - anchor[d]);
            }
            values[i] = f(v);
        }
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    SimplexResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}
