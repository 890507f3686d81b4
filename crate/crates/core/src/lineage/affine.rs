// SPDX-License-Identifier: Apache-2.0

use super::LineageError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

/// Least-squares fit of `y ≈ a·x + b` over `(x, y)` pairs.
pub fn fit_affine(points: &[(f64, f64)]) -> Result<AffineFit, LineageError> {
    let n = points.len();
    if n < 2 {
        return Err(LineageError::InsufficientData(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(LineageError::DegenerateFit);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = points.iter().map(|&(x, y)| (y - (a * x + b)).powi(2)).sum();
    let r2 = if syy == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(AffineFit { a, b, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_lines() {
        let id: Vec<_> = (1..=10).map(|x| (x as f64, x as f64)).collect();
        assert_eq!(
            fit_affine(&id).unwrap(),
            AffineFit {
                a: 1.0,
                b: 0.0,
                r2: 1.0
            }
        );
        let line: Vec<_> = (1..=10).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        let f = fit_affine(&line).unwrap();
        assert!((f.a - 2.0).abs() < 1e-9 && (f.b - 1.0).abs() < 1e-9 && f.r2 == 1.0);
        let mean_residual: f64 = line.iter().map(|&(x, y)| y - (f.a * x + f.b)).sum::<f64>() / 10.0;
        assert!(mean_residual.abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_affine(&[(1.0, 2.0)]), Err(LineageError::InsufficientData(1)));
        assert_eq!(fit_affine(&[(1.0, 2.0), (1.0, 3.0)]), Err(LineageError::DegenerateFit));
    }
}
