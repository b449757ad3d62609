//! Population correlation matrices with and without minor-factor model
//! error, and seeded multivariate normal samples drawn from them.
//!
//! Model error follows the minor-factor construction: a `p x 50` matrix of
//! standard normal draws, with column `k` scaled by `decay^k`, is added to
//! the error-free model and the result is restandardized. The overall scale
//! of the minor block is solved for so that, after restandardization, the
//! minor factors account for the target share of the total variance
//! (`trace(W W') / p`). Major loadings, minor loadings and uniquenesses are
//! all divided by the same per-variable standard deviation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::{correlation_from_data, LoadingMatrix, SymMatrix};

pub type SimRng = ChaCha20Rng;

pub const MINOR_FACTOR_COUNT: usize = 50;
const MINOR_REDRAW_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelError {
    None,
    Moderate,
    Large,
}

impl ModelError {
    /// Geometric decay of successive minor-factor loading columns.
    pub fn decay(self) -> f64 {
        match self {
            ModelError::None => 0.0,
            ModelError::Moderate => 0.85,
            ModelError::Large => 0.95,
        }
    }

    /// Share of total variance carried by the minor factors.
    pub fn minor_share(self) -> f64 {
        match self {
            ModelError::None => 0.0,
            ModelError::Moderate => 0.20,
            ModelError::Large => 0.30,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelError::None => "none",
            ModelError::Moderate => "moderate",
            ModelError::Large => "large",
        }
    }
}

impl std::str::FromStr for ModelError {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ModelError::None),
            "moderate" => Ok(ModelError::Moderate),
            "large" => Ok(ModelError::Large),
            other => Err(Error::InvalidArgument(format!("unknown model error level '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub q: usize,
    pub p: usize,
    /// Loading of every non-zero variable except the first of each block.
    pub base_loading: f64,
    /// Loading of the first variable of each block.
    pub max_loading: f64,
    pub model_error: ModelError,
    pub minor_count: usize,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn new(q: usize, p: usize, base_loading: f64, max_loading: f64) -> Self {
        Self {
            q,
            p,
            base_loading,
            max_loading,
            model_error: ModelError::None,
            minor_count: MINOR_FACTOR_COUNT,
            seed: 0,
        }
    }

    pub fn with_model_error(mut self, model_error: ModelError, seed: u64) -> Self {
        self.model_error = model_error;
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.q == 0 || !self.p.is_multiple_of(self.q) || self.p / self.q < 2 {
            return Err(Error::InvalidArgument(format!("p = {} must be a multiple (>= 2) of q = {}", self.p, self.q)));
        }
        if !(self.base_loading >= 0.0 && self.max_loading >= self.base_loading && self.max_loading <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= base ({}) <= max ({}) <= 1",
                self.base_loading, self.max_loading
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Unit-diagonal population correlation matrix.
    pub sigma: SymMatrix,
    /// Loadings of the major factors in `sigma` (after restandardization).
    pub major_loadings: LoadingMatrix,
    /// The error-free pattern the population was built from; the rotation
    /// target in the studies.
    pub initial_loadings: LoadingMatrix,
    /// `p x minor_count`; zero without model error.
    pub minor_loadings: DMatrix<f64>,
    pub uniqueness: Vec<f64>,
}

impl Population {
    /// Major-factor correlations (the major factors are orthogonal).
    pub fn phi(&self) -> SymMatrix {
        SymMatrix::identity(self.major_loadings.q())
    }

    pub fn minor_share(&self) -> f64 {
        self.minor_loadings.norm_squared() / self.sigma.dim() as f64
    }
}

/// Independent-cluster pattern: variables `j*m .. (j+1)*m` load on factor
/// `j`, the first of them with `max`, the rest with `base`.
pub fn loading_pattern(q: usize, p: usize, base: f64, max: f64) -> Result<LoadingMatrix> {
    if q == 0 || !p.is_multiple_of(q) {
        return Err(Error::InvalidArgument(format!("p = {p} is not a multiple of q = {q}")));
    }
    let m = p / q;
    let mut l = DMatrix::zeros(p, q);
    for j in 0..q {
        for k in 0..m {
            l[(j * m + k, j)] = if k == 0 { max } else { base };
        }
    }
    LoadingMatrix::new(l)
}

/// `Sigma = L L' + diag(1 - diag(L L'))`.
pub fn error_free_population(loadings: &LoadingMatrix) -> Result<Population> {
    let communalities = loadings.communalities();
    if let Some((variable, &communality)) = communalities.iter().enumerate().find(|(_, h)| **h > 1.0 + 1e-12) {
        return Err(Error::InfeasiblePopulation { variable, communality });
    }
    let mut sigma = loadings.outer().into_matrix();
    for i in 0..loadings.p() {
        sigma[(i, i)] = 1.0;
    }
    Ok(Population {
        sigma: SymMatrix::symmetrized(sigma),
        major_loadings: loadings.clone(),
        initial_loadings: loadings.clone(),
        minor_loadings: DMatrix::zeros(loadings.p(), 0),
        uniqueness: communalities.iter().map(|h| (1.0 - h).max(0.0)).collect(),
    })
}

/// Error-free populations whose leading loading drops from 1.00 in steps of
/// 0.01 down to `base + 0.01`.
pub fn ladder_populations(q: usize, p: usize, base: f64) -> Result<Vec<Population>> {
    if !(base > 0.0 && base < 1.0) {
        return Err(Error::InvalidArgument(format!("base loading {base} is not in (0, 1)")));
    }
    ladder_maxima(base).into_iter().map(|max| error_free_population(&loading_pattern(q, p, base, max)?)).collect()
}

/// `1.00, 0.99, ...` while strictly above `base`.
pub fn ladder_maxima(base: f64) -> Vec<f64> {
    (0..100).map(|k| (100 - k) as f64 / 100.0).take_while(|m| *m > base + 1e-9).collect()
}

/// SplitMix64 finalizer over a master seed and a stream of keys.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    keys.iter().fold(mix(master), |acc, k| mix(acc ^ mix(*k)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// The stream that minor factors are drawn from. It depends only on the
/// seed, `q`, `p` and the minor-factor count, so every loading pattern in a
/// grid shares the same minor factors.
fn minor_factor_rng(spec: &PopulationSpec) -> SimRng {
    rng_from_seed(derive_seed(spec.seed, &[0x6d_696e_6f72, spec.q as u64, spec.p as u64, spec.minor_count as u64]))
}

/// Solves `mean(c w_i / (1 + c w_i)) = share` for `c > 0`.
fn minor_scale(raw_variance: &[f64], share: f64) -> Result<f64> {
    let f = |c: f64| raw_variance.iter().map(|w| c * w / (1.0 + c * w)).sum::<f64>() / raw_variance.len() as f64;
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) < share {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::InvalidArgument(format!("minor share {share} is not attainable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < share {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn build_model_error_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let initial = loading_pattern(spec.q, spec.p, spec.base_loading, spec.max_loading)?;
    if spec.model_error == ModelError::None || spec.minor_count == 0 {
        return error_free_population(&initial);
    }
    let communalities = initial.communalities();
    if let Some((variable, &communality)) = communalities.iter().enumerate().find(|(_, h)| **h > 1.0 + 1e-12) {
        return Err(Error::InfeasiblePopulation { variable, communality });
    }
    let p = spec.p;
    let decay = spec.model_error.decay();
    let share = spec.model_error.minor_share();
    let mut rng = minor_factor_rng(spec);

    for _ in 0..MINOR_REDRAW_LIMIT {
        let mut raw = DMatrix::from_fn(p, spec.minor_count, |_, _| rng.sample::<f64, _>(StandardNormal));
        for (k, mut col) in raw.column_iter_mut().enumerate() {
            col *= decay.powi(k as i32 + 1);
        }
        let raw_variance: Vec<f64> = raw.row_iter().map(|r| r.norm_squared()).collect();
        if raw_variance.iter().any(|w| !(*w > 0.0)) {
            continue;
        }
        let c = minor_scale(&raw_variance, share)?;
        let sd: Vec<f64> = raw_variance.iter().map(|w| (1.0 + c * w).sqrt()).collect();
        let mut minor = raw * c.sqrt();
        for (i, mut row) in minor.row_iter_mut().enumerate() {
            row /= sd[i];
        }
        if minor.iter().any(|v| v.abs() > 1.0) {
            continue;
        }
        let major = initial.rows_divided(&sd);
        let uniqueness: Vec<f64> = communalities.iter().zip(&sd).map(|(h, s)| (1.0 - h).max(0.0) / (s * s)).collect();
        let mut sigma = major.as_matrix() * major.as_matrix().transpose() + &minor * minor.transpose();
        for i in 0..p {
            sigma[(i, i)] = 1.0;
        }
        return Ok(Population {
            sigma: SymMatrix::symmetrized(sigma),
            major_loadings: major,
            initial_loadings: initial,
            minor_loadings: minor,
            uniqueness,
        });
    }
    Err(Error::MinorLoadingsOutOfRange { attempts: MINOR_REDRAW_LIMIT })
}

/// `n` rows of `N(0, Sigma)` data.
pub fn draw_data<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = pop.sigma.dim();
    let factor = psd_factor(&pop.sigma)?;
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(z * factor.transpose())
}

/// Sample correlation matrix of `n` multivariate normal draws.
pub fn draw_sample<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<SymMatrix> {
    let p = pop.sigma.dim();
    if n <= p {
        return Err(Error::InvalidArgument(format!("need n > p, got n = {n}, p = {p}")));
    }
    correlation_from_data(&draw_data(pop, n, rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen_desc;

    #[test]
    fn ladder_endpoints_match_eq18() {
        let pops = ladder_populations(3, 9, 0.5).unwrap();
        assert_eq!(pops.len(), 50);
        let first = &pops[0].major_loadings;
        let last = &pops[49].major_loadings;
        for f in 0..3 {
            assert_eq!(first.get(3 * f, f), 1.0);
            assert_eq!(first.get(3 * f + 1, f), 0.5);
            assert_eq!(first.get(3 * f + 2, f), 0.5);
            assert_eq!(last.get(3 * f, f), 0.51);
            assert_eq!(last.get(3 * f + 1, (f + 1) % 3), 0.0);
        }
        for pop in &pops {
            assert!(pop.sigma.has_unit_diagonal(0.0));
            assert!(eigen_desc(&pop.sigma).unwrap().values.min() > -1e-12);
        }
    }

    #[test]
    fn ladder_with_five_indicators() {
        let pops = ladder_populations(3, 15, 0.5).unwrap();
        let l = &pops[10].major_loadings;
        assert_eq!(l.p(), 15);
        let per_factor = (0..15).filter(|i| l.get(*i, 0) != 0.0).count();
        assert_eq!(per_factor, 5);
        assert_eq!(l.get(0, 0), 0.9);
    }

    #[test]
    fn no_model_error_means_no_minor_factors() {
        let pop = build_model_error_population(&PopulationSpec::new(3, 9, 0.5, 0.8)).unwrap();
        assert_eq!(pop.minor_loadings.ncols(), 0);
        let direct = error_free_population(&loading_pattern(3, 9, 0.5, 0.8).unwrap()).unwrap();
        assert_eq!(pop, direct);
    }

    #[test]
    fn minor_share_and_reconstruction() {
        for level in [ModelError::Moderate, ModelError::Large] {
            let spec = PopulationSpec::new(3, 15, 0.5, 0.95).with_model_error(level, 11);
            let pop = build_model_error_population(&spec).unwrap();
            let w = &pop.minor_loadings;
            let share = (w * w.transpose()).trace() / 15.0;
            assert!((share - level.minor_share()).abs() < 1e-6, "{share}");
            assert!(w.iter().all(|v| v.abs() <= 1.0));
            let l = pop.major_loadings.as_matrix();
            let mut rebuilt = l * l.transpose() + w * w.transpose();
            for i in 0..15 {
                rebuilt[(i, i)] += pop.uniqueness[i];
            }
            assert!((rebuilt - pop.sigma.as_matrix()).amax() < 1e-12);
            assert!(pop.sigma.has_unit_diagonal(0.0));
            assert!(eigen_desc(&pop.sigma).unwrap().values.min() > 0.0);
        }
    }

    #[test]
    fn minor_factors_do_not_depend_on_loading_levels() {
        let a = build_model_error_population(
            &PopulationSpec::new(3, 15, 0.35, 0.35).with_model_error(ModelError::Moderate, 5),
        )
        .unwrap();
        let b = build_model_error_population(
            &PopulationSpec::new(3, 15, 0.5, 0.95).with_model_error(ModelError::Moderate, 5),
        )
        .unwrap();
        assert_eq!(a.minor_loadings, b.minor_loadings);
        let c = build_model_error_population(
            &PopulationSpec::new(3, 15, 0.5, 0.95).with_model_error(ModelError::Moderate, 6),
        )
        .unwrap();
        assert_ne!(a.minor_loadings, c.minor_loadings);
    }

    #[test]
    fn infeasible_and_invalid_specs() {
        let l = LoadingMatrix::from_rows(&[vec![0.9, 0.6], vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(matches!(error_free_population(&l), Err(Error::InfeasiblePopulation { variable: 0, .. })));
        assert!(build_model_error_population(&PopulationSpec::new(3, 10, 0.5, 0.6)).is_err());
        assert!(build_model_error_population(&PopulationSpec::new(3, 9, 0.6, 0.5)).is_err());
        assert!(ladder_populations(3, 9, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let pop = build_model_error_population(&PopulationSpec::new(3, 9, 0.5, 0.7)).unwrap();
        let a = draw_sample(&pop, 150, &mut rng_from_seed(42)).unwrap();
        let b = draw_sample(&pop, 150, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
        let c = draw_sample(&pop, 150, &mut rng_from_seed(43)).unwrap();
        assert_ne!(a, c);
        assert!(a.has_unit_diagonal(1e-12));
        assert!(draw_sample(&pop, 9, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn large_samples_approach_sigma() {
        let pop = build_model_error_population(&PopulationSpec::new(3, 9, 0.5, 0.8)).unwrap();
        let s = draw_sample(&pop, 1_000_000, &mut rng_from_seed(7)).unwrap();
        assert!(s.max_abs_diff(&pop.sigma) < 0.005);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, &[0, 1]);
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 1]));
        assert_eq!(a, derive_seed(1, &[0, 1]));
    }
}
