//! Continuous piecewise-linear least squares on the hinge basis.
//!
//! For changepoint times `tau_1 < .. < tau_{k-1}` the design has columns
//! `[1, t, (t - tau_1)_+, .., (t - tau_{k-1})_+]`; every dimension shares the
//! same design, so one Householder factorization serves all `d` right-hand
//! sides.

use crate::error::{Error, Result};
use crate::model::{ChangepointVector, Segmentation, Trajectory};

/// Relative threshold on `|R_jj| / max |R_ii|` below which the design is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Column-major `n x (k + 1)` hinge design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n..(col + 1) * self.n]
    }
}

fn validate_taus(traj: &Trajectory, taus: &[f64]) -> Result<()> {
    let start = traj.t0();
    let end = traj.grid_time(traj.n());
    for (j, &t) in taus.iter().enumerate() {
        if !t.is_finite() || t <= start || t >= end {
            return Err(Error::InvalidChangepoints(format!(
                "changepoint {t} outside the open window ({start}, {end})"
            )));
        }
        if j > 0 && t <= taus[j - 1] {
            return Err(Error::InvalidChangepoints(format!(
                "changepoint times must be strictly increasing ({} then {t})",
                taus[j - 1]
            )));
        }
    }
    Ok(())
}

pub fn build_design(traj: &Trajectory, taus: &[f64]) -> Result<DesignMatrix> {
    validate_taus(traj, taus)?;
    let n = traj.n();
    let cols = taus.len() + 2;
    let mut data = Vec::with_capacity(n * cols);
    data.extend(std::iter::repeat_n(1.0, n));
    data.extend((0..n).map(|i| traj.time(i)));
    for &tau in taus {
        data.extend((0..n).map(|i| {
            let t = traj.time(i);
            if t > tau {
                t - tau
            } else {
                0.0
            }
        }));
    }
    Ok(DesignMatrix { n, cols, data })
}

/// Householder least squares for all coordinate columns of `traj`.
/// Returns `cols x d` coefficients.
fn solve_least_squares(design: &DesignMatrix, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let n = design.n;
    let p = design.cols;
    let d = traj.d();
    if n < p {
        return Err(Error::DegenerateFit { rank: n, cols: p });
    }
    let mut a = design.data.clone();
    let mut b: Vec<f64> = (0..d).flat_map(|l| traj.column(l)).collect();
    let mut diag = vec![0.0; p];

    for j in 0..p {
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let col = &mut head[j * n..];
        let norm = col[j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        col[j] -= alpha;
        let vnorm2: f64 = col[j..].iter().map(|x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let v = &col[j..];
        let reflect = |target: &mut [f64]| {
            let s: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * s / vnorm2;
            for (t, vi) in target.iter_mut().zip(v) {
                *t -= f * vi;
            }
        };
        for c in 0..p - j - 1 {
            reflect(&mut tail[c * n + j..(c + 1) * n]);
        }
        for l in 0..d {
            reflect(&mut b[l * n + j..(l + 1) * n]);
        }
    }

    let max_diag = diag.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let rank = diag.iter().filter(|x| x.abs() > RANK_TOLERANCE * max_diag).count();
    if max_diag == 0.0 || rank < p {
        return Err(Error::DegenerateFit { rank, cols: p });
    }

    let mut coef = vec![vec![0.0; d]; p];
    for l in 0..d {
        for j in (0..p).rev() {
            let mut s = b[l * n + j];
            for (c, row) in coef.iter().enumerate().skip(j + 1) {
                s -= a[c * n + j] * row[l];
            }
            coef[j][l] = s / diag[j];
        }
    }
    Ok(coef)
}

fn residual_sum_of_squares(design: &DesignMatrix, traj: &Trajectory, coef: &[Vec<f64>]) -> f64 {
    let n = design.n;
    let mut rss = 0.0;
    for l in 0..traj.d() {
        for i in 0..n {
            let fitted: f64 = (0..design.cols).map(|c| design.data[c * n + i] * coef[c][l]).sum();
            let r = traj.row(i)[l] - fitted;
            rss += r * r;
        }
    }
    rss
}

/// Maximum-likelihood continuous piecewise-linear fit with changepoints at
/// the given times.
pub fn fit_with_times(traj: &Trajectory, taus: &[f64]) -> Result<Segmentation> {
    let design = build_design(traj, taus)?;
    let coef = solve_least_squares(&design, traj)?;
    let rss = residual_sum_of_squares(&design, traj, &coef);
    let mut coef = coef.into_iter();
    let intercept = coef.next().expect("design has an intercept column");
    Ok(Segmentation::from_coefficients(traj, taus.to_vec(), intercept, coef.collect(), rss))
}

pub fn fit_given_changepoints(traj: &Trajectory, r: &ChangepointVector) -> Result<Segmentation> {
    if r.n() != traj.n() {
        return Err(Error::DimensionMismatch(format!(
            "changepoint vector for n = {} applied to a trajectory with n = {}",
            r.n(),
            traj.n()
        )));
    }
    let k = r.num_segments();
    if traj.n() < k + 1 {
        return Err(Error::DegenerateFit { rank: traj.n(), cols: k + 1 });
    }
    let taus: Vec<f64> = r.indices().into_iter().map(|m| traj.grid_time(m)).collect();
    fit_with_times(traj, &taus)
}

/// Residual sum of squares of `seg`'s signal against `traj`.
pub fn rss_of(traj: &Trajectory, seg: &Segmentation) -> Result<f64> {
    if seg.n != traj.n() || seg.d != traj.d() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation is {}x{}, trajectory is {}x{}",
            seg.n,
            seg.d,
            traj.n(),
            traj.d()
        )));
    }
    if (seg.dt - traj.dt()).abs() > 1e-12 * traj.dt() || (seg.t0 - traj.t0()).abs() > 1e-12 * traj.dt() {
        return Err(Error::DimensionMismatch("segmentation and trajectory grids differ".into()));
    }
    let mut rss = 0.0;
    for i in 0..traj.n() {
        let f = seg.evaluate(traj.time(i));
        for (y, fi) in traj.row(i).iter().zip(&f) {
            rss += (y - fi) * (y - fi);
        }
    }
    Ok(rss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_1d(dt: f64, ys: &[f64]) -> Trajectory {
        Trajectory::new(dt, 1, ys.to_vec()).unwrap()
    }

    #[test]
    fn design_without_changepoints_is_linear_regression() {
        let traj = traj_1d(1.0, &[0.0, 0.0, 0.0]);
        let m = build_design(&traj, &[]).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 2));
        assert_eq!(m.column(0), &[1.0, 1.0, 1.0]);
        assert_eq!(m.column(1), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn hinge_column_is_zero_before_changepoint() {
        let traj = traj_1d(1.0, &[0.0; 4]);
        let m = build_design(&traj, &[2.0]).unwrap();
        assert_eq!(m.column(2), &[0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn hinge_columns_match_indicator_formula() {
        let traj = traj_1d(0.5, &[0.0; 6]);
        let taus = [1.0, 2.0];
        let m = build_design(&traj, &taus).unwrap();
        for i in 0..6 {
            // t_i = 0.5 * (i + 1), evaluated independently of Trajectory::time
            let t = 0.5 * (i as f64 + 1.0);
            assert_eq!(m.get(i, 0), 1.0);
            assert_eq!(m.get(i, 1), t);
            for (j, tau) in taus.iter().enumerate() {
                let want = if t > *tau { t - tau } else { 0.0 };
                assert_eq!(m.get(i, j + 2), want, "entry ({i}, {})", j + 2);
            }
        }
    }

    #[test]
    fn design_rejects_unordered_times() {
        let traj = traj_1d(1.0, &[0.0; 6]);
        assert!(matches!(build_design(&traj, &[3.0, 2.0]), Err(Error::InvalidChangepoints(_))));
        assert!(matches!(build_design(&traj, &[2.0, 2.0]), Err(Error::InvalidChangepoints(_))));
        assert!(matches!(build_design(&traj, &[6.0]), Err(Error::InvalidChangepoints(_))));
    }

    #[test]
    fn noiseless_line_is_interpolated() {
        let ys: Vec<f64> = (1..=20).map(|i| 2.0 + 0.3 * (i as f64 * 0.1)).collect();
        let traj = traj_1d(0.1, &ys);
        let seg = fit_given_changepoints(&traj, &ChangepointVector::empty(20)).unwrap();
        assert!((seg.intercept[0] - 2.0).abs() < 1e-12);
        assert!((seg.velocities[0][0] - 0.3).abs() < 1e-12);
        assert!(seg.rss <= 1e-18, "rss = {}", seg.rss);
    }

    #[test]
    fn noiseless_two_segment_path_recovers_velocities() {
        let dt = 0.1;
        let n = 60;
        let rows: Vec<Vec<f64>> = (1..=n)
            .map(|i| {
                let t = i as f64 * dt;
                let s = t.min(3.0);
                let u = (t - 3.0).max(0.0);
                vec![1.0 + 0.1 * s - 0.1 * u, -0.5 - 0.1 * s + 0.1 * u]
            })
            .collect();
        let traj = Trajectory::from_rows(dt, &rows).unwrap();
        let r = ChangepointVector::from_indices(n, &[30]).unwrap();
        let seg = fit_given_changepoints(&traj, &r).unwrap();
        let want = [[0.1, -0.1], [-0.1, 0.1]];
        for (v, w) in seg.velocities.iter().zip(want) {
            assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12, "{v:?}");
        }
        assert!(seg.rss < 1e-24);
    }

    #[test]
    fn sigma_identity_holds() {
        let ys = [0.3, 0.1, 0.7, 0.2, 0.9, 1.4, 0.8, 1.1];
        let traj = traj_1d(0.25, &ys);
        let r = ChangepointVector::from_indices(8, &[3]).unwrap();
        let seg = fit_given_changepoints(&traj, &r).unwrap();
        assert_eq!(seg.sigma2_hat * 8.0, seg.rss);
    }

    #[test]
    fn too_many_changepoints_is_degenerate() {
        let traj = traj_1d(1.0, &[0.0, 1.0, 0.5, 2.0]);
        let r = ChangepointVector::from_indices(4, &[1, 2, 3]).unwrap();
        assert!(matches!(fit_given_changepoints(&traj, &r), Err(Error::DegenerateFit { .. })));
    }

    #[test]
    fn rss_recomputed_from_segmentation_matches() {
        let ys = [0.3, 0.1, 0.7, 0.2, 0.9, 1.4, 0.8, 1.1, 0.4, 0.0];
        let traj = traj_1d(0.5, &ys);
        let r = ChangepointVector::from_indices(10, &[4, 7]).unwrap();
        let seg = fit_given_changepoints(&traj, &r).unwrap();
        let again = rss_of(&traj, &seg).unwrap();
        assert!((again - seg.rss).abs() <= 1e-10 * seg.rss);
    }

    #[test]
    fn rss_of_rejects_mismatched_dimensions() {
        let traj = traj_1d(0.5, &[0.0, 1.0, 2.0]);
        let other = Trajectory::new(0.5, 2, vec![0.0; 6]).unwrap();
        let seg = fit_given_changepoints(&other, &ChangepointVector::empty(3)).unwrap();
        assert!(matches!(rss_of(&traj, &seg), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn fitted_signal_is_continuous_at_changepoints() {
        let ys = [0.3, 0.1, 0.7, 0.2, 0.9, 1.4, 0.8, 1.1, 0.4, 0.0, 0.2, -0.3];
        let traj = traj_1d(0.5, &ys);
        let r = ChangepointVector::from_indices(12, &[3, 8]).unwrap();
        let seg = fit_given_changepoints(&traj, &r).unwrap();
        for &tau in &seg.tau {
            let left = seg.evaluate(tau);
            let right = seg.evaluate(tau + 1e-12);
            assert!((left[0] - right[0]).abs() < 1e-10);
            // one-sided limits of the piece formulas
            let j = seg.tau.iter().position(|t| *t == tau).unwrap();
            let before = seg.evaluate(seg.tau.get(j.wrapping_sub(1)).copied().unwrap_or(seg.t0) + 1e-9);
            let slope_left = (left[0] - before[0]) / (tau - seg.tau.get(j.wrapping_sub(1)).copied().unwrap_or(seg.t0) - 1e-9);
            assert!((slope_left - seg.velocities[j][0]).abs() < 1e-5);
        }
    }
}
