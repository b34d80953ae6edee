//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use thetageo::legendre::NewtonOptions;
use thetageo::nalgebra::DMatrix;
use thetageo::num_complex::Complex64;
use thetageo::{FourierTerm, KahlerPotential, Lattice, TrigPolynomial, TruncationPolicy};

/// Name that always resolves to the zero potential.
pub const FLAT: &str = "flat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub potentials: BTreeMap<String, PotentialSpec>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub geodesic: Option<GeodesicConfig>,
    #[serde(rename = "expansion-fit")]
    pub expansion_fit: Option<ExpansionConfig>,
    pub bernstein: Option<BernsteinConfig>,
    #[serde(rename = "riemann-sum")]
    pub riemann_sum: Option<RiemannConfig>,
    pub density: Option<DensityConfig>,
    #[serde(rename = "gram-check")]
    pub gram_check: Option<GramConfig>,
    pub regularity: Option<RegularityConfig>,
    pub harmonic: Option<HarmonicConfig>,
}

/// Period matrix `Z`; entries are `[re, im]` pairs, row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub m: usize,
    pub period: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { m: 1, period: None }
    }
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        ensure!(self.m >= 1, "lattice dimension must be positive");
        let Some(rows) = &self.period else {
            return Ok(Lattice::square(self.m));
        };
        ensure!(
            rows.len() == self.m && rows.iter().all(|r| r.len() == self.m),
            "period matrix must be {m}x{m}",
            m = self.m
        );
        let z = DMatrix::from_fn(self.m, self.m, |a, b| {
            Complex64::new(rows[a][b][0], rows[a][b][1])
        });
        Lattice::new(z).context("invalid period matrix")
    }
}

/// A real trigonometric polynomial as `amplitude * cos(2 pi n.y + phase)` terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub freq: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl PotentialSpec {
    pub fn polynomial(&self, m: usize) -> Result<TrigPolynomial> {
        let terms: Vec<FourierTerm> = self
            .terms
            .iter()
            .map(|t| FourierTerm::new(t.freq.clone(), t.amplitude, t.phase))
            .collect();
        Ok(TrigPolynomial::from_terms(m, &terms)?)
    }
}

/// A named test function for Bernstein and Riemann sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: String,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

impl FunctionSpec {
    pub fn polynomial(&self, m: usize) -> Result<TrigPolynomial> {
        PotentialSpec {
            terms: self.terms.clone(),
        }
        .polynomial(m)
        .with_context(|| format!("function {:?}", self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_max_radius")]
    pub max_radius: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            tail_tol: default_tail_tol(),
            max_radius: default_max_radius(),
        }
    }
}

impl TruncationConfig {
    pub fn policy(&self) -> Result<TruncationPolicy> {
        let p = TruncationPolicy {
            tail_tol: self.tail_tol,
            max_radius: self.max_radius,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    #[serde(default = "default_newton_tol")]
    pub tol: f64,
    #[serde(default = "default_newton_iter")]
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: default_newton_tol(),
            max_iter: default_newton_iter(),
        }
    }
}

impl NewtonConfig {
    pub fn options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// File names inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_report")]
    pub report: String,
    /// Prefix for CSV files; defaults to the experiment kind.
    pub prefix: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            report: default_report(),
            prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    #[serde(default = "flat_name")]
    pub psi0: String,
    pub psi1: String,
    pub ladder: Vec<u32>,
    #[serde(default = "default_t_grid")]
    pub t: Vec<f64>,
    /// Lattice coordinates `y` of the sample points.
    pub y: Vec<Vec<f64>>,
    /// Lattice coordinate `x` shared by all sample points; zero by default.
    pub x: Option<Vec<f64>>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_derivative_max")]
    pub derivative_max: f64,
    /// Times at which norming constants are tabulated.
    #[serde(default = "default_norming_t")]
    pub norming_t: Vec<f64>,
    #[serde(default = "default_pde_step")]
    pub pde_step: f64,
    #[serde(default = "default_pde_tol")]
    pub pde_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePoint {
    pub t: f64,
    pub y: Vec<f64>,
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    #[serde(default = "flat_name")]
    pub psi0: String,
    pub psi1: String,
    pub ladder: Vec<u32>,
    pub points: Vec<SamplePoint>,
    #[serde(default = "default_coeff_tol")]
    pub coeff_tol: f64,
    #[serde(default = "default_constant_tol")]
    pub constant_tol: f64,
    #[serde(default = "default_residual_slope")]
    pub residual_slope: f64,
    #[serde(default = "default_residual_slope_tol")]
    pub residual_slope_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinConfig {
    pub potential: String,
    pub ladder: Vec<u32>,
    pub y: Vec<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub functions: Vec<FunctionSpec>,
    #[serde(default = "default_bernstein_slope")]
    pub max_slope: f64,
    #[serde(default = "default_consistency_tol")]
    pub consistency_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannConfig {
    #[serde(default = "one_usize")]
    pub m: usize,
    pub functions: Vec<FunctionSpec>,
    pub k_min: u32,
    pub k_max: u32,
    #[serde(default = "default_riemann_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub potential: String,
    pub ladder: Vec<u32>,
    /// Grid points per lattice direction; the z-grid has `points^(2m)` nodes.
    pub points: usize,
    #[serde(default = "default_density_constant")]
    pub constant: f64,
    #[serde(default)]
    pub flat_ladder: Vec<u32>,
    #[serde(default = "default_flat_density_tol")]
    pub flat_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramCase {
    pub name: String,
    #[serde(default)]
    pub lattice: LatticeSpec,
    pub potential: String,
    pub ks: Vec<u32>,
    /// Quadrature points per dimension; `max(64, 8 sqrt k)` by default.
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatCase {
    #[serde(default)]
    pub lattice: LatticeSpec,
    pub ks: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramConfig {
    #[serde(default)]
    pub cases: Vec<GramCase>,
    #[serde(default = "default_gram_tol")]
    pub off_diagonal_tol: f64,
    #[serde(default)]
    pub flat: Vec<FlatCase>,
    #[serde(default = "default_flat_tol")]
    pub flat_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    #[serde(default = "flat_name")]
    pub psi0: String,
    pub psi1: String,
    pub ladder: Vec<u32>,
    #[serde(default = "half")]
    pub t: f64,
    /// Moment cell points `nu*` tracked by the secondary fit.
    #[serde(default)]
    pub nu_star: Vec<Vec<f64>>,
    #[serde(default = "default_regularity_slope")]
    pub slope: f64,
    #[serde(default = "default_regularity_slope_tol")]
    pub slope_tol: f64,
    #[serde(default = "default_r_squared")]
    pub r_squared_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalCheck {
    #[serde(default = "flat_name")]
    pub psi0: String,
    pub psi1: String,
    pub k: u32,
    pub points: usize,
    #[serde(default = "default_interval_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskCheck {
    /// Boundary data is `s(theta) psi` with the smoothed half-disk step `s`.
    pub psi: String,
    #[serde(default = "default_disk_samples")]
    pub samples: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub ladder: Vec<u32>,
    /// Interior points as `[re, im]`.
    pub q: Vec<[f64; 2]>,
    pub y: Vec<Vec<f64>>,
    #[serde(default = "default_coeff_tol")]
    pub coeff_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub interval: Option<IntervalCheck>,
    pub disk: Option<DiskCheck>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("config parse error")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.quadrature.scale.is_finite() && self.quadrature.scale > 0.0,
            "quadrature scale must be positive"
        );
        self.truncation.policy()?;
        self.newton.options().validate()?;
        let ladders = [
            self.geodesic.as_ref().map(|c| ("geodesic", &c.ladder)),
            self.expansion_fit
                .as_ref()
                .map(|c| ("expansion-fit", &c.ladder)),
            self.bernstein.as_ref().map(|c| ("bernstein", &c.ladder)),
            self.density.as_ref().map(|c| ("density", &c.ladder)),
            self.density
                .as_ref()
                .map(|c| ("density flat", &c.flat_ladder)),
            self.regularity.as_ref().map(|c| ("regularity", &c.ladder)),
            self.harmonic
                .as_ref()
                .and_then(|h| h.disk.as_ref())
                .map(|c| ("harmonic disk", &c.ladder)),
        ];
        for (name, ladder) in ladders.into_iter().flatten() {
            check_ladder(name, ladder)?;
        }
        if let Some(g) = &self.gram_check {
            for case in &g.cases {
                check_ladder(&case.name, &case.ks)?;
            }
            for case in &g.flat {
                check_ladder("flat", &case.ks)?;
            }
        }
        if let Some(r) = &self.riemann_sum {
            ensure!(
                r.k_min >= 1 && r.k_min <= r.k_max,
                "riemann-sum needs 1 <= k_min <= k_max"
            );
        }
        Ok(())
    }

    /// Resolves a named potential on the config lattice and certifies it.
    pub fn potential(&self, name: &str) -> Result<KahlerPotential> {
        self.potential_on(name, &self.lattice.build()?)
    }

    pub fn potential_on(&self, name: &str, lattice: &Lattice) -> Result<KahlerPotential> {
        let poly = match self.potentials.get(name) {
            Some(spec) => spec
                .polynomial(lattice.dim())
                .with_context(|| format!("potential {name:?}"))?,
            None if name == FLAT => TrigPolynomial::zero(lattice.dim()),
            None => bail!("unknown potential {name:?}"),
        };
        KahlerPotential::new(lattice.clone(), poly)
            .with_context(|| format!("potential {name:?} is not admissible"))
    }

    /// Copy with every resolution doubled, for `--verify`.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.quadrature.scale *= 2.0;
        c.truncation.tail_tol *= 0.5;
        c.newton.tol *= 0.5;
        if let Some(h) = c.harmonic.as_mut() {
            if let Some(d) = h.disk.as_mut() {
                d.samples *= 2;
            }
        }
        c
    }
}

fn check_ladder(name: &str, ladder: &[u32]) -> Result<()> {
    ensure!(
        ladder.iter().all(|&k| k >= 1),
        "{name}: ladder levels must be positive"
    );
    ensure!(
        ladder.windows(2).all(|w| w[0] < w[1]),
        "{name}: ladder {ladder:?} is not strictly increasing"
    );
    Ok(())
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn flat_name() -> String {
    FLAT.to_string()
}
fn default_tail_tol() -> f64 {
    TruncationPolicy::default().tail_tol
}
fn default_max_radius() -> usize {
    TruncationPolicy::default().max_radius
}
fn default_newton_tol() -> f64 {
    NewtonOptions::default().tol
}
fn default_newton_iter() -> usize {
    NewtonOptions::default().max_iter
}
fn default_report() -> String {
    "report.json".to_string()
}
fn default_t_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_norming_t() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_fd_step() -> f64 {
    1e-3
}
fn default_derivative_max() -> f64 {
    1e-3
}
fn default_pde_step() -> f64 {
    1e-3
}
fn default_pde_tol() -> f64 {
    1e-5
}
fn default_coeff_tol() -> f64 {
    5e-4
}
fn default_constant_tol() -> f64 {
    1e-6
}
fn default_residual_slope() -> f64 {
    -2.0
}
fn default_residual_slope_tol() -> f64 {
    0.2
}
fn default_bernstein_slope() -> f64 {
    -0.8
}
fn default_consistency_tol() -> f64 {
    1e-12
}
fn default_riemann_tol() -> f64 {
    1e-13
}
fn default_density_constant() -> f64 {
    10.0
}
fn default_flat_density_tol() -> f64 {
    1e-8
}
fn default_gram_tol() -> f64 {
    1e-10
}
fn default_flat_tol() -> f64 {
    1e-11
}
fn default_regularity_slope() -> f64 {
    -1.0
}
fn default_regularity_slope_tol() -> f64 {
    0.15
}
fn default_r_squared() -> f64 {
    0.99
}
fn default_interval_tol() -> f64 {
    1e-10
}
fn default_disk_samples() -> usize {
    64
}
fn default_kappa() -> f64 {
    3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_gram_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [gram-check]
            cases = [{ name = "flat", potential = "flat", ks = [2] }]
            "#,
        )
        .unwrap();
        let g = cfg.gram_check.unwrap();
        assert_eq!(g.cases[0].ks, vec![2]);
        assert_eq!(g.off_diagonal_tol, 1e-10);
    }

    #[test]
    fn rejects_unsorted_ladder_and_unknown_keys() {
        let bad = ExperimentConfig::from_toml(
            r#"
            [density]
            potential = "flat"
            ladder = [32, 16]
            points = 4
            "#,
        );
        assert!(bad.is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn floats_round_trip() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [potentials.psi1]
            terms = [{ freq = [1], amplitude = 0.1000000000000000055511151231257827 }]
            "#,
        )
        .unwrap();
        let back = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&back).unwrap(), cfg);
        assert_eq!(cfg.potentials["psi1"].terms[0].amplitude, 0.1);
    }

    #[test]
    fn resolves_potentials() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [potentials.big]
            terms = [{ freq = [1], amplitude = 0.05 }]
            "#,
        )
        .unwrap();
        assert!(cfg.potential("flat").unwrap().is_flat());
        assert!(cfg.potential("missing").is_err());
        let err = cfg.potential("big").unwrap_err();
        assert!(format!("{err:#}").contains("not admissible"));
    }
}
