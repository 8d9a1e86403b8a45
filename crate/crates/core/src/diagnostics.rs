//! Numerical checks and figure data: K–S uniformity, analytic radial
//! curves, transformed concentric circles and hexagonal binning.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::sample_ball;
use crate::sage::{radial_transform, relative_p_volume, relative_projected_volume};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("empty sample")]
    Empty,
    #[error("value {0} outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("unknown curve kind {0:?} (expected projected, full or transform)")]
    UnknownKind(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample K–S statistic against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64, DiagnosticsError> {
    if values.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let xs = sorted(values);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    }))
}

/// Sup distance between the empirical CDF of `values` and Uniform(0, 1).
pub fn ks_uniformity(values: &[f64]) -> Result<f64, DiagnosticsError> {
    if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DiagnosticsError::OutOfUnitInterval(bad));
    }
    ks_statistic(values, |x| x)
}

/// Two-sample K–S distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, DiagnosticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let xs = sorted(a);
    let ys = sorted(b);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Which radial curve to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Relative projected volume `v2(r; p, R)`.
    Projected,
    /// Relative p-volume `(r/R)^p`.
    Full,
    /// The radial transform `r -> r'`.
    Transform,
}

impl FromStr for CurveKind {
    type Err = DiagnosticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projected" => Ok(CurveKind::Projected),
            "full" => Ok(CurveKind::Full),
            "transform" => Ok(CurveKind::Transform),
            other => Err(DiagnosticsError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialCdfTable {
    pub kind: CurveKind,
    pub p: f64,
    pub radius: f64,
    pub r_grid: Vec<f64>,
    pub analytic: Vec<f64>,
    pub empirical: Option<MonteCarlo>,
}

/// Tabulates a curve on `grid_size` evenly spaced radii covering `[0, R]`.
pub fn curve_table(kind: CurveKind, p: f64, radius: f64, grid_size: usize) -> Result<RadialCdfTable, DiagnosticsError> {
    if grid_size < 2 {
        return Err(DiagnosticsError::Invalid(format!("grid size {grid_size} < 2")));
    }
    let r_grid: Vec<f64> = (0..grid_size)
        .map(|i| if i + 1 == grid_size { radius } else { radius * i as f64 / (grid_size - 1) as f64 })
        .collect();
    let f = |r: f64| match kind {
        CurveKind::Projected => relative_projected_volume(r, p, radius),
        CurveKind::Full => relative_p_volume(r, p, radius),
        CurveKind::Transform => radial_transform(r, p, radius),
    };
    let analytic = r_grid
        .iter()
        .map(|&r| f(r).map_err(|e| DiagnosticsError::Invalid(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(RadialCdfTable { kind, p, radius, r_grid, analytic, empirical: None })
}

impl RadialCdfTable {
    /// Fills in Monte-Carlo estimates from `samples` uniform p-ball points.
    /// Needs an integer `p >= 2`. For `projected` and `full` the estimate is
    /// the fraction of points within each radius (projected onto the first
    /// two axes, resp. in full space); for `transform` it is `R * sqrt` of the
    /// projected fraction.
    pub fn with_monte_carlo(mut self, samples: usize, seed: u64) -> Result<Self, DiagnosticsError> {
        if self.p.fract() != 0.0 || self.p < 2.0 {
            return Err(DiagnosticsError::Invalid(format!("Monte-Carlo needs integer p >= 2, got {}", self.p)));
        }
        if samples == 0 {
            return Err(DiagnosticsError::Empty);
        }
        let d = sample_ball(samples, self.p as usize, self.radius, seed);
        let radii: Vec<f64> = match self.kind {
            CurveKind::Full => d.values().row_iter().map(|r| r.norm()).collect(),
            _ => d.values().row_iter().map(|r| r[0].hypot(r[1])).collect(),
        };
        let radii = sorted(&radii);
        let n = samples as f64;
        let values = self
            .r_grid
            .iter()
            .map(|&r| {
                let frac = radii.partition_point(|&x| x <= r) as f64 / n;
                match self.kind {
                    CurveKind::Transform => self.radius * frac.sqrt(),
                    _ => frac,
                }
            })
            .collect();
        self.empirical = Some(MonteCarlo { samples, seed, values });
        Ok(self)
    }

    /// CSV with columns `r,value[,empirical]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiagnosticsError> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| DiagnosticsError::Io(e.into());
        match &self.empirical {
            Some(_) => w.write_record(["r", "value", "empirical"]).map_err(to_io)?,
            None => w.write_record(["r", "value"]).map_err(to_io)?,
        }
        for (i, (r, v)) in self.r_grid.iter().zip(&self.analytic).enumerate() {
            let mut rec = vec![r.to_string(), v.to_string()];
            if let Some(mc) = &self.empirical {
                rec.push(mc.values[i].to_string());
            }
            w.write_record(&rec).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Radial transform applied to `k` equidistant radii `iR/k`, `i = 1..=k`.
pub fn transformed_circles(p_eff: f64, radius: f64, k: usize) -> Result<Vec<f64>, DiagnosticsError> {
    if k == 0 {
        return Err(DiagnosticsError::Invalid("need at least one circle".into()));
    }
    (1..=k)
        .map(|i| {
            let r = if i == k { radius } else { radius * i as f64 / k as f64 };
            radial_transform(r, p_eff, radius).map_err(|e| DiagnosticsError::Invalid(e.to_string()))
        })
        .collect()
}

/// Axial coordinate of a pointy-top hexagon.
pub type Axial = (i64, i64);

/// Hexagonal 2-D histogram on a pointy-top lattice with a hexagon centred at
/// the origin. `bin_width` is the distance between centres of horizontally
/// adjacent hexagons (`sqrt(3)` times the circumradius).
#[derive(Debug, Clone, PartialEq)]
pub struct HexbinGrid {
    pub bin_width: f64,
    pub counts: BTreeMap<Axial, u64>,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

impl HexbinGrid {
    fn size(&self) -> f64 {
        self.bin_width / SQRT3
    }

    pub fn center(&self, (q, r): Axial) -> [f64; 2] {
        let s = self.size();
        [s * SQRT3 * (q as f64 + r as f64 / 2.0), s * 1.5 * r as f64]
    }

    /// Lattice cell containing `(x, y)`; cube-coordinate rounding, ties broken
    /// by discarding the component with the largest rounding error.
    pub fn locate(&self, x: f64, y: f64) -> Axial {
        let s = self.size();
        let qf = (SQRT3 / 3.0 * x - y / 3.0) / s;
        let rf = (2.0 / 3.0 * y) / s;
        let sf = -qf - rf;
        let (mut q, mut r, s_) = (qf.round(), rf.round(), sf.round());
        let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s_ - sf).abs());
        if dq > dr && dq > ds {
            q = -r - s_;
        } else if dr > ds {
            r = -q - s_;
        }
        (q as i64, r as i64)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn nonempty(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_centers(&self) -> Vec<[f64; 2]> {
        self.counts.keys().map(|&a| self.center(a)).collect()
    }

    pub fn log_counts(&self) -> Vec<f64> {
        self.counts.values().map(|&c| (c as f64).ln()).collect()
    }

    /// Bin with the highest count; ties go to the smallest axial key.
    pub fn max_bin(&self) -> Option<(Axial, u64)> {
        self.counts
            .iter()
            .fold(None, |best: Option<(Axial, u64)>, (&k, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((k, c)),
            })
    }

    /// `ln(max count) - median(ln count)` over nonempty bins.
    pub fn peak_contrast(&self) -> f64 {
        let mut logs = self.log_counts();
        if logs.is_empty() {
            return 0.0;
        }
        logs.sort_by(f64::total_cmp);
        let m = logs.len();
        let median = if m % 2 == 1 { logs[m / 2] } else { 0.5 * (logs[m / 2 - 1] + logs[m / 2]) };
        logs[m - 1] - median
    }

    /// CSV with columns `q,r,count`, in axial-key order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiagnosticsError> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| DiagnosticsError::Io(e.into());
        w.write_record(["q", "r", "count"]).map_err(to_io)?;
        for (&(q, r), c) in &self.counts {
            w.write_record([q.to_string(), r.to_string(), c.to_string()]).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts points per hexagon. Non-finite points are ignored.
pub fn hexbin(points: &[[f64; 2]], bin_width: f64) -> HexbinGrid {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut grid = HexbinGrid { bin_width, counts: BTreeMap::new() };
    for &[x, y] in points {
        if x.is_finite() && y.is_finite() {
            *grid.counts.entry(grid.locate(x, y)).or_insert(0) += 1;
        }
    }
    grid
}

/// One fortieth of the larger coordinate extent; `1.0` for degenerate input.
pub fn default_bin_width(points: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if extent.is_finite() && extent > 0.0 { extent / 40.0 } else { 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_on_exact_grid() {
        let n = 1000;
        let grid: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        assert!(ks_uniformity(&grid).unwrap() <= 1.0 / n as f64 + 1e-15);
    }

    #[test]
    fn ks_point_mass() {
        assert_abs_diff_eq!(ks_uniformity(&[0.5; 20]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert!(matches!(ks_uniformity(&[]), Err(DiagnosticsError::Empty)));
        assert!(matches!(ks_uniformity(&[0.2, 1.2]), Err(DiagnosticsError::OutOfUnitInterval(_))));
    }

    #[test]
    fn ks_on_uniform_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        assert!(ks_uniformity(&xs).unwrap() < 1.358 / (100_000f64).sqrt());
    }

    #[test]
    fn ks_two_sample_values() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(ks_two_sample(&[1.0, 1.0, 4.0, 4.0], &[1.0, 1.0, 1.0, 4.0]).unwrap(), 0.25, epsilon = 1e-15);
        let xs = [0.42, 0.24, 0.86, 0.85, 0.82, 0.82, 0.25, 0.78, 0.13, 0.27];
        let ys = [0.24, 0.27, 0.87, 0.29, 0.57, 0.44, 0.5, 0.00, 0.56, 0.03];
        assert_abs_diff_eq!(ks_two_sample(&xs, &ys).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn unknown_curve_kind() {
        assert!(matches!("radial".parse::<CurveKind>(), Err(DiagnosticsError::UnknownKind(_))));
    }

    #[test]
    fn transform_table_identity_at_two() {
        let t = curve_table(CurveKind::Transform, 2.0, 1.0, 101).unwrap();
        for (r, v) in t.r_grid.iter().zip(&t.analytic) {
            assert_abs_diff_eq!(r, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn table_endpoints_agree() {
        for p in [3.0, 10.0, 100.0] {
            let a = curve_table(CurveKind::Projected, p, 2.0, 11).unwrap();
            let b = curve_table(CurveKind::Full, p, 2.0, 11).unwrap();
            assert_eq!((a.analytic[0], a.analytic[10]), (0.0, 1.0));
            assert_eq!((b.analytic[0], b.analytic[10]), (0.0, 1.0));
            assert!(a.analytic.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn projected_table_value_at_p100() {
        let t = curve_table(CurveKind::Projected, 100.0, 1.0, 11).unwrap();
        assert_abs_diff_eq!(t.analytic[2], 0.870_1, epsilon = 1e-4);
        let t = curve_table(CurveKind::Full, 3.0, 1.0, 3).unwrap();
        assert_abs_diff_eq!(t.analytic[1], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn monte_carlo_column() {
        let t = curve_table(CurveKind::Full, 3.0, 1.0, 3)
            .unwrap()
            .with_monte_carlo(200_000, 5)
            .unwrap();
        let mc = t.empirical.as_ref().unwrap();
        assert_eq!((mc.samples, mc.seed), (200_000, 5));
        assert_abs_diff_eq!(mc.values[1], 0.125, epsilon = 0.005);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,value,empirical\n0,0,0\n"));
        assert!(curve_table(CurveKind::Full, 2.5, 1.0, 3).unwrap().with_monte_carlo(10, 1).is_err());
    }

    #[test]
    fn circles() {
        let c = transformed_circles(2.0, 1.0, 5).unwrap();
        for (got, want) in c.iter().zip([0.2, 0.4, 0.6, 0.8, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let c = transformed_circles(100.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(c[2], 0.9955, epsilon = 1e-4);
        assert!(c.windows(2).all(|w| w[0] <= w[1]));
        let c = transformed_circles(10.0, 1.0, 20).unwrap();
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finer_bins_on_dense_data_are_never_fewer() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<[f64; 2]> = (0..20_000).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        for w in [0.4, 0.2, 0.1, 0.05] {
            let coarse = hexbin(&pts, w);
            let fine = hexbin(&pts, w / 2.0);
            assert!(fine.nonempty() >= coarse.nonempty(), "width {w}");
            assert_eq!(fine.total(), 20_000);
        }
    }

    proptest::proptest! {
        #[test]
        fn hexbin_counts_every_finite_point(
            pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 0..200),
            w in 0.01f64..10.0,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let g = hexbin(&pts, w);
            proptest::prop_assert_eq!(g.total(), pts.len() as u64);
            proptest::prop_assert_eq!(g.log_counts().len(), g.nonempty());
        }
    }

    #[test]
    fn hexbin_single_bin() {
        let g = hexbin(&[[0.3, -0.2]; 17], 0.1);
        assert_eq!(g.nonempty(), 1);
        assert_eq!(g.max_bin().unwrap().1, 17);
    }

    #[test]
    fn hexbin_centers_round_trip() {
        let g = HexbinGrid { bin_width: 0.37, counts: BTreeMap::new() };
        for q in -5..5 {
            for r in -5..5 {
                let [x, y] = g.center((q, r));
                assert_eq!(g.locate(x, y), (q, r));
            }
        }
        assert_eq!(g.center((1, 0)), [0.37, 0.0]);
    }

    #[test]
    fn hexbin_assigns_nearest_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = HexbinGrid { bin_width: 0.5, counts: BTreeMap::new() };
        for _ in 0..10_000 {
            let (x, y) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let own = g.center(g.locate(x, y));
            let d_own = (own[0] - x).hypot(own[1] - y);
            let (q, r) = g.locate(x, y);
            for (dq, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)] {
                let c = g.center((q + dq, r + dr));
                assert!(d_own <= (c[0] - x).hypot(c[1] - y) + 1e-12);
            }
        }
    }

    #[test]
    fn peak_contrast_of_flat_grid_is_zero() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 0.0]).collect();
        assert_eq!(hexbin(&pts, 1.0).peak_contrast(), 0.0);
    }

    #[test]
    fn hexbin_csv() {
        let g = hexbin(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], 1.0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "q,r,count\n0,0,2\n1,0,1\n");
    }
}
