//! Batch-mean binary and categorical cross-entropy on clamped
//! probabilities, with their derivatives on the probabilities.

fn clamp(p: f64, eps: f64) -> (f64, bool) {
    if p < eps {
        (eps, true)
    } else if p > 1.0 - eps {
        (1.0 - eps, true)
    } else {
        (p, false)
    }
}

/// `-(1/N) Σ [y log p + (1-y) log(1-p)]`, `p` the probability of label 1
/// (die), clamped to `[eps, 1-eps]`. Panics on an empty batch or a label
/// other than 0/1.
pub fn bce(p_die: &[f64], labels: &[usize], eps: f64) -> f64 {
    assert!(!p_die.is_empty(), "empty batch");
    assert_eq!(p_die.len(), labels.len());
    let n = p_die.len() as f64;
    p_die
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp(p, eps).0;
            match y {
                1 => -p.ln(),
                0 => -(1.0 - p).ln(),
                _ => panic!("binary label {y}"),
            }
        })
        .sum::<f64>()
        / n
}

/// `∂ bce / ∂ p_i` for one sample of a batch of `n`; zero where the clamp is
/// active.
pub fn bce_grad(p_die: f64, label: usize, n: usize, eps: f64) -> f64 {
    let (p, clamped) = clamp(p_die, eps);
    if clamped {
        return 0.0;
    }
    let g = match label {
        1 => -1.0 / p,
        0 => 1.0 / (1.0 - p),
        _ => panic!("binary label {label}"),
    };
    g / n as f64
}

/// Batch mean of `-log p[label]` over clamped distributions. Panics on an
/// empty batch or a label outside the distribution.
pub fn ce(probs: &[Vec<f64>], labels: &[usize], eps: f64) -> f64 {
    assert!(!probs.is_empty(), "empty batch");
    assert_eq!(probs.len(), labels.len());
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            assert!(y < p.len(), "class label {y} outside 0..{}", p.len());
            -clamp(p[y], eps).0.ln()
        })
        .sum::<f64>()
        / probs.len() as f64
}

/// `∂ ce / ∂ p` for one sample of a batch of `n`.
pub fn ce_grad(probs: &[f64], label: usize, n: usize, eps: f64) -> Vec<f64> {
    assert!(label < probs.len(), "class label {label} outside 0..{}", probs.len());
    let mut g = vec![0.0; probs.len()];
    let (p, clamped) = clamp(probs[label], eps);
    if !clamped {
        g[label] = -1.0 / (p * n as f64);
    }
    g
}
