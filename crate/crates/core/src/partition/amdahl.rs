use std::fmt::Write as _;

/// Least-squares fit of `T(P) = a + b / P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmdahlFit {
    /// Serial and latency share, s.
    pub a: f64,
    /// Parallelizable work, s.
    pub b: f64,
    pub r2: f64,
}

/// Fits `(ranks, seconds)` samples; needs at least two distinct rank counts.
pub fn amdahl_fit(samples: &[(usize, f64)]) -> Option<AmdahlFit> {
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|&(p, _)| 1.0 / p as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, t)| t).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if samples.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(AmdahlFit { a, b, r2 })
}

/// CSV with one row per sample followed by the fit.
pub fn amdahl_csv(samples: &[(usize, f64)]) -> String {
    let mut s = String::from("ranks,seconds_per_step\n");
    for (p, t) in samples {
        let _ = writeln!(s, "{p},{t:.9}");
    }
    s.push_str("fit_a,fit_b,r2\n");
    match amdahl_fit(samples) {
        Some(f) => {
            let _ = writeln!(s, "{:.9},{:.9},{:.6}", f.a, f.b, f.r2);
        }
        None => s.push_str("nan,nan,nan\n"),
    }
    s
}
