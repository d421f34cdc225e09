//! Test-matrix generators, backward errors and ratio studies of the
//! tournament-pivoting LU variants against GEPP.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calu::{calu, mlcalu_1d, mlcalu_2d, pivot_quality, PivotQuality};
use crate::dense::{gepp, householder_qr, norms, trsm_lower_unit, trsm_upper, Mat, Perm};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::platform::Platform;
use crate::schedule::BlockSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    RandomUniform,
    RandomNormal,
    Hadamard,
    Circulant,
    Lotkin,
    Kms { rho: f64 },
    Moler,
    Fiedler,
    Minij,
    /// Singular values geometrically spaced between 1 and `1/kappa`.
    Randsvd { kappa: f64 },
    /// Unit diagonal, -1 below, last column of ones: GEPP growth `2^(n-1)`.
    GfppGrowth,
    OrthogonalRandom,
    Identity,
}

impl Generator {
    /// The twelve generators of the default study.
    pub fn standard() -> Vec<Generator> {
        vec![
            Generator::RandomUniform,
            Generator::RandomNormal,
            Generator::Hadamard,
            Generator::Circulant,
            Generator::Lotkin,
            Generator::Kms { rho: 0.5 },
            Generator::Moler,
            Generator::Fiedler,
            Generator::Minij,
            Generator::Randsvd { kappa: 1e7 },
            Generator::GfppGrowth,
            Generator::OrthogonalRandom,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::RandomUniform => "random_uniform",
            Generator::RandomNormal => "random_normal",
            Generator::Hadamard => "hadamard",
            Generator::Circulant => "circulant",
            Generator::Lotkin => "lotkin",
            Generator::Kms { .. } => "kms",
            Generator::Moler => "moler",
            Generator::Fiedler => "fiedler",
            Generator::Minij => "minij",
            Generator::Randsvd { .. } => "randsvd",
            Generator::GfppGrowth => "gfpp_growth",
            Generator::OrthogonalRandom => "orthogonal_random",
            Generator::Identity => "identity",
        }
    }

    /// Deterministic `n x n` matrix for `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Mat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match *self {
            Generator::RandomUniform => Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
            Generator::RandomNormal => gaussian(n, &mut rng),
            Generator::Hadamard => {
                if !n.is_power_of_two() {
                    return Err(Error::UnsupportedOrder {
                        name: self.name().into(),
                        n,
                    });
                }
                Mat::from_fn(n, n, |i, j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
            }
            Generator::Circulant => {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                Mat::from_fn(n, n, |i, j| v[(j + n - i) % n])
            }
            Generator::Lotkin => Mat::from_fn(n, n, |i, j| if i == 0 { 1.0 } else { 1.0 / (i + j + 1) as f64 }),
            Generator::Kms { rho } => Mat::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32)),
            Generator::Moler => {
                let t = Mat::from_fn(n, n, |i, j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => -1.0,
                    std::cmp::Ordering::Greater => 0.0,
                });
                t.transpose().matmul(&t)
            }
            Generator::Fiedler => Mat::from_fn(n, n, |i, j| i.abs_diff(j) as f64),
            Generator::Minij => Mat::from_fn(n, n, |i, j| (i.min(j) + 1) as f64),
            Generator::Randsvd { kappa } => {
                let u = orthogonal(n, &mut rng);
                let v = orthogonal(n, &mut rng);
                let d = n.saturating_sub(1).max(1) as f64;
                let sigma = Mat::from_fn(n, n, |i, j| if i == j { kappa.powf(-(i as f64) / d) } else { 0.0 });
                u.matmul(&sigma).matmul(&v.transpose())
            }
            Generator::GfppGrowth => Mat::from_fn(n, n, |i, j| {
                if j == n - 1 || i == j {
                    1.0
                } else if i > j {
                    -1.0
                } else {
                    0.0
                }
            }),
            Generator::OrthogonalRandom => orthogonal(n, &mut rng),
            Generator::Identity => Mat::identity(n),
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::standard()
            .into_iter()
            .chain([Generator::Identity])
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGenerator(s.into()))
    }
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    householder_qr(&gaussian(n, rng)).wy.to_q()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardErrors {
    pub normwise: f64,
    pub componentwise: f64,
    pub factor_relative: f64,
    /// Rows left out of the componentwise maximum for a zero denominator.
    pub skipped_rows: usize,
}

/// Solves `A x = b` through `P A = L U`.
pub fn lu_solve(perm: &Perm, l: &Mat, u: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let pb = perm.apply_vec(b);
    let y = trsm_lower_unit(l, &Mat::from_vec(pb.len(), 1, pb)?)?;
    Ok(trsm_upper(u, &y)?.as_slice().to_vec())
}

pub fn backward_errors(a: &Mat, perm: &Perm, l: &Mat, u: &Mat, x: &[f64], b: &[f64]) -> Result<BackwardErrors> {
    let n = a.rows();
    if a.cols() != n || x.len() != n || b.len() != n || perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "system of order {n} with |x| = {}, |b| = {}, |perm| = {}",
            x.len(),
            b.len(),
            perm.len()
        )));
    }
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let denom = norms(a).inf * inf(x) + inf(b);
    let normwise = if denom > 0.0 { inf(&r) / denom } else { 0.0 };

    let abs_x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let mut componentwise = 0.0f64;
    let mut skipped_rows = 0;
    for i in 0..n {
        let d: f64 = a.row(i).iter().zip(&abs_x).map(|(aij, xj)| aij.abs() * xj).sum::<f64>() + b[i].abs();
        if d > 0.0 {
            componentwise = componentwise.max(r[i].abs() / d);
        } else {
            skipped_rows += 1;
        }
    }
    let fa = a.frobenius();
    let factor_relative = if fa > 0.0 {
        perm.apply_rows(a).sub(&l.matmul(u)).frobenius() / fa
    } else {
        0.0
    };
    Ok(BackwardErrors {
        normwise,
        componentwise,
        factor_relative,
        skipped_rows,
    })
}

/// Growth factor, backward errors of one factorization and solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub growth: f64,
    pub errors: BackwardErrors,
}

fn quality(a: &Mat, perm: &Perm, l: &Mat, u: &Mat, growth_trace: &[f64], b: &[f64]) -> Result<Quality> {
    let a_max = a.max_abs();
    let peak = growth_trace.iter().copied().fold(a_max.max(u.max_abs()), f64::max);
    let x = lu_solve(perm, l, u, b)?;
    Ok(Quality {
        growth: if a_max > 0.0 { peak / a_max } else { 1.0 },
        errors: backward_errors(a, perm, l, u, &x, b)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyAlgorithm {
    Calu,
    Mlcalu1d,
    Mlcalu2d,
}

impl StudyAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            StudyAlgorithm::Calu => "calu",
            StudyAlgorithm::Mlcalu1d => "mlcalu1d",
            StudyAlgorithm::Mlcalu2d => "mlcalu2d",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub n: usize,
    pub seed: u64,
    pub algorithm: StudyAlgorithm,
    pub platform: Platform,
    pub schedule: BlockSchedule,
}

impl StudyConfig {
    /// Three levels with row counts `(2, 2, 4)` and blocks `(8, 16, 32)`
    /// at `n = 256`.
    pub fn desk() -> Self {
        StudyConfig {
            n: 256,
            seed: 2024,
            algorithm: StudyAlgorithm::Mlcalu2d,
            platform: Platform::synthetic(&[(2, 2), (2, 2), (4, 4)]).expect("desk platform is valid"),
            schedule: BlockSchedule::new(vec![8, 16, 32]).expect("desk schedule is valid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub matrix: String,
    pub n: usize,
    pub algo: String,
    pub tested: Quality,
    pub gepp: Quality,
    pub growth_ratio: f64,
    pub nwise_ratio: f64,
    pub cwise_ratio: f64,
    pub rel_ratio: f64,
    pub pivots: PivotQuality,
}

impl StudyRow {
    pub fn ratios(&self) -> [f64; 4] {
        [self.growth_ratio, self.nwise_ratio, self.cwise_ratio, self.rel_ratio]
    }

    pub fn ratios_within(&self, lo: f64, hi: f64) -> bool {
        self.ratios().iter().all(|r| (lo..=hi).contains(r))
    }
}

/// `x / y` with both sides floored at machine epsilon, so two exact
/// results compare as 1.
pub fn floored_ratio(x: f64, y: f64) -> f64 {
    x.max(f64::EPSILON) / y.max(f64::EPSILON)
}

pub fn study_row(g: &Generator, cfg: &StudyConfig) -> Result<StudyRow> {
    let a = g.generate(cfg.n, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let x_true: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = a.matvec(&x_true);

    let f = match cfg.algorithm {
        StudyAlgorithm::Calu => calu(&a, &cfg.platform, cfg.schedule.block(1))?,
        StudyAlgorithm::Mlcalu1d => mlcalu_1d(&a, &cfg.platform, &cfg.schedule)?,
        StudyAlgorithm::Mlcalu2d => mlcalu_2d(&a, &cfg.platform, &cfg.schedule)?,
    };
    let tested = quality(&a, &f.perm, &f.l, &f.u, &f.growth_trace, &b)?;
    let ge = gepp(&a)?;
    let reference = quality(&a, &ge.perm, &ge.l, &ge.u, &ge.growth_trace, &b)?;
    Ok(StudyRow {
        matrix: g.name().into(),
        n: cfg.n,
        algo: cfg.algorithm.name().into(),
        growth_ratio: floored_ratio(tested.growth, reference.growth),
        nwise_ratio: floored_ratio(tested.errors.normwise, reference.errors.normwise),
        cwise_ratio: floored_ratio(tested.errors.componentwise, reference.errors.componentwise),
        rel_ratio: floored_ratio(tested.errors.factor_relative, reference.errors.factor_relative),
        tested,
        gepp: reference,
        pivots: pivot_quality(&f),
    })
}

pub fn ratio_study(gens: &[Generator], cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    ratio_study_with(gens, cfg, Exec::default())
}

pub fn ratio_study_with(gens: &[Generator], cfg: &StudyConfig, exec: Exec) -> Result<Vec<StudyRow>> {
    exec.map(gens, |g| study_row(g, cfg)).into_iter().collect()
}

/// Order-of-magnitude bucket of a ratio: 0 when within `[1/10, 10]`,
/// otherwise the signed number of decades beyond.
pub fn decade_bucket(ratio: f64) -> i32 {
    let d = ratio.log10();
    if d.abs() <= 1.0 {
        0
    } else {
        (d.signum() * d.abs().ceil()) as i32 - d.signum() as i32
    }
}

/// Pooled pivot statistics over a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub steps: usize,
    pub tau_min: f64,
    pub fraction_tau_eq_one: f64,
}

pub fn tau_summary(rows: &[StudyRow]) -> TauSummary {
    let steps: usize = rows.iter().map(|r| r.pivots.steps).sum();
    let ones: f64 = rows
        .iter()
        .map(|r| r.pivots.fraction_tau_eq_one * r.pivots.steps as f64)
        .sum();
    TauSummary {
        steps,
        tau_min: rows.iter().map(|r| r.pivots.tau_min).fold(1.0, f64::min),
        fraction_tau_eq_one: if steps == 0 { 1.0 } else { ones / steps as f64 },
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    matrix: &'a str,
    n: usize,
    algo: &'a str,
    growth: f64,
    nwise: f64,
    cwise: f64,
    rel: f64,
    growth_ratio: f64,
    nwise_ratio: f64,
    cwise_ratio: f64,
    rel_ratio: f64,
    tau_min: f64,
    frac_tau_one: f64,
}

pub fn write_csv<W: Write>(out: W, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            matrix: &r.matrix,
            n: r.n,
            algo: &r.algo,
            growth: r.tested.growth,
            nwise: r.tested.errors.normwise,
            cwise: r.tested.errors.componentwise,
            rel: r.tested.errors.factor_relative,
            growth_ratio: r.growth_ratio,
            nwise_ratio: r.nwise_ratio,
            cwise_ratio: r.cwise_ratio,
            rel_ratio: r.rel_ratio,
            tau_min: r.pivots.tau_min,
            frac_tau_one: r.pivots.fraction_tau_eq_one,
        })
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_generators() {
        let m = Generator::Minij.generate(3, 0).unwrap();
        assert_eq!(m, Mat::from_rows(&[&[1.0, 1.0, 1.0], &[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]]));
        let h = Generator::Hadamard.generate(2, 0).unwrap();
        assert_eq!(h, Mat::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]));
        let h8 = Generator::Hadamard.generate(8, 0).unwrap();
        assert!(h8.transpose().matmul(&h8).sub(&Mat::identity(8).scale(8.0)).max_abs() == 0.0);
        assert!(matches!(
            Generator::Hadamard.generate(6, 0),
            Err(Error::UnsupportedOrder { n: 6, .. })
        ));
        let mo = Generator::Moler.generate(3, 0).unwrap();
        assert_eq!(mo, Mat::from_rows(&[&[1.0, -1.0, -1.0], &[-1.0, 2.0, 0.0], &[-1.0, 0.0, 3.0]]));
    }

    #[test]
    fn generation_is_deterministic() {
        for g in Generator::standard() {
            assert_eq!(g.generate(16, 7).unwrap(), g.generate(16, 7).unwrap(), "{}", g.name());
            assert_eq!(g.name().parse::<Generator>().unwrap().name(), g.name());
        }
        assert!(matches!("nope".parse::<Generator>(), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn growth_trigger_doubles() {
        let a = Generator::GfppGrowth.generate(10, 0).unwrap();
        let f = gepp(&a).unwrap();
        assert_eq!(f.u[(9, 9)], 512.0);
    }

    #[test]
    fn identity_system_is_exact() {
        let n = 8;
        let i = Mat::identity(n);
        let p = Perm::identity(n);
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let x = lu_solve(&p, &i, &i, &b).unwrap();
        let e = backward_errors(&i, &p, &i, &i, &x, &b).unwrap();
        assert_eq!(e.normwise, 0.0);
        assert_eq!(e.factor_relative, 0.0);
        assert_eq!(e.skipped_rows, n - 1);
    }

    #[test]
    fn gepp_backward_error_on_random() {
        let a = Generator::RandomUniform.generate(128, 3).unwrap();
        let b = a.matvec(&vec![1.0; 128]);
        let f = gepp(&a).unwrap();
        let x = lu_solve(&f.perm, &f.l, &f.u, &b).unwrap();
        let e = backward_errors(&a, &f.perm, &f.l, &f.u, &x, &b).unwrap();
        assert!(e.normwise <= 1e-13);
        assert!(e.componentwise <= 1e-12);
    }

    #[test]
    fn identity_row_has_unit_ratios() {
        let cfg = StudyConfig {
            n: 64,
            ..StudyConfig::desk()
        };
        let cfg = StudyConfig {
            schedule: BlockSchedule::new(vec![2, 4, 8]).unwrap(),
            ..cfg
        };
        let row = study_row(&Generator::Identity, &cfg).unwrap();
        assert_eq!(row.ratios(), [1.0; 4]);
        assert_eq!(floored_ratio(0.3, 0.3), 1.0);
    }

    #[test]
    fn buckets() {
        assert_eq!(decade_bucket(1.0), 0);
        assert_eq!(decade_bucket(9.0), 0);
        assert_eq!(decade_bucket(50.0), 1);
        assert_eq!(decade_bucket(1e-3), -2);
    }
}
