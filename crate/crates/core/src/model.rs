//! Game instances, noise models, structured gains and the lifted compact form.
//!
//! A game with horizon `N` has states in `R^m`, minimizer inputs in `R^d` and
//! maximizer inputs in `R^n`. Gains are kept as per-stage blocks; the compact
//! block matrices are only materialized by [`build_compact`].

use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::linalg::{self, from_rows, is_psd, is_symmetric, lambda_max, to_rows, BlockDiag, Mat};

const BENCHMARK_JSON: &str = include_str!("../benchmarks/finite_horizon_benchmark.json");

/// Row-major stage block of the benchmark's initial gain.
pub const BENCHMARK_K0: [f64; 9] = [-0.08, 0.35, 0.62, -0.21, 0.19, 0.32, -0.06, 0.10, 0.41];

/// Upper-tail mass left outside the truncation radius of the default sampler.
pub const TRUNCATION_MASS: f64 = 1e-8;

/// Per-stage system and cost matrices for `h < N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub a: Mat,
    pub b: Mat,
    pub d: Mat,
    pub q: Mat,
    pub ru: Mat,
    pub rw: Mat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    TruncatedGaussian,
    ScaledUniform,
    DeterministicZero,
}

/// Distribution of the initial state `x_0` and the additive noise `xi_h`.
///
/// Block `0` of the covariance is `cov(x_0)`, block `h + 1` is `cov(xi_h)`.
/// The deterministic kind draws `x_0 = initial_state` and `xi_h = 0`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    kind: NoiseKind,
    covariance: Vec<Mat>,
    bound: f64,
    initial_state: Option<DVector<f64>>,
    factors: Vec<Mat>,
}

impl PartialEq for NoiseModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.covariance == other.covariance
            && self.bound == other.bound
            && self.initial_state == other.initial_state
    }
}

/// Squared radius `q` with `P(chi2_m > q) <= mass` (Laurent-Massart tail bound).
fn chi2_radius_sq(dim: usize, mass: f64) -> f64 {
    let t = (1.0 / mass).ln();
    let m = dim as f64;
    m + 2.0 * (m * t).sqrt() + 2.0 * t
}

impl NoiseModel {
    /// Builds a random noise model. `bound` defaults to the truncation radius for
    /// the Gaussian kind and to the support radius for the uniform kind.
    pub fn new(kind: NoiseKind, covariance: Vec<Mat>, bound: Option<f64>) -> Result<Self> {
        if kind == NoiseKind::DeterministicZero {
            return Err(GameError::Invalid(
                "use NoiseModel::deterministic for the deterministic kind".into(),
            ));
        }
        let dim = covariance
            .first()
            .map(Mat::nrows)
            .ok_or_else(|| GameError::Invalid("noise covariance has no blocks".into()))?;
        let mut factors = Vec::with_capacity(covariance.len());
        for (h, c) in covariance.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(GameError::Dimension {
                    stage: h,
                    what: format!("noise covariance is {}x{}, expected {dim}x{dim}", c.nrows(), c.ncols()),
                });
            }
            if !is_symmetric(c, 1e-12) {
                return Err(GameError::Dimension {
                    stage: h,
                    what: "noise covariance is not symmetric".into(),
                });
            }
            let chol = c.clone().cholesky().ok_or_else(|| GameError::Dimension {
                stage: h,
                what: "noise covariance is not positive definite".into(),
            })?;
            factors.push(chol.l());
        }
        let top = covariance.iter().map(lambda_max).fold(0.0, f64::max);
        let natural = match kind {
            NoiseKind::TruncatedGaussian => (top * chi2_radius_sq(dim, TRUNCATION_MASS)).sqrt(),
            NoiseKind::ScaledUniform => (3.0 * dim as f64 * top).sqrt(),
            NoiseKind::DeterministicZero => unreachable!(),
        };
        let bound = bound.unwrap_or(natural);
        if !(bound > 0.0) {
            return Err(GameError::Invalid(format!("noise bound must be positive, got {bound}")));
        }
        if kind == NoiseKind::ScaledUniform && bound < natural * (1.0 - 1e-12) {
            return Err(GameError::Invalid(format!(
                "bound {bound} is below the uniform support radius {natural}"
            )));
        }
        Ok(Self {
            kind,
            covariance,
            bound,
            initial_state: None,
            factors,
        })
    }

    /// Truncated Gaussian with the given covariance blocks and default radius.
    pub fn truncated_gaussian(covariance: Vec<Mat>) -> Result<Self> {
        Self::new(NoiseKind::TruncatedGaussian, covariance, None)
    }

    /// `x_0 = initial_state` and zero process noise over `horizon` stages.
    pub fn deterministic(initial_state: DVector<f64>, horizon: usize) -> Self {
        let m = initial_state.len();
        let mut covariance = vec![Mat::zeros(m, m); horizon + 1];
        covariance[0] = &initial_state * initial_state.transpose();
        let bound = initial_state.norm().max(f64::MIN_POSITIVE);
        Self {
            kind: NoiseKind::DeterministicZero,
            covariance,
            bound,
            initial_state: Some(initial_state),
            factors: Vec::new(),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn covariance(&self) -> &[Mat] {
        &self.covariance
    }

    pub fn sigma0(&self) -> BlockDiag {
        BlockDiag::new(self.covariance.clone())
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn initial_state(&self) -> Option<&DVector<f64>> {
        self.initial_state.as_ref()
    }

    /// Smallest eigenvalue of the block-diagonal noise covariance.
    pub fn phi(&self) -> f64 {
        self.covariance
            .iter()
            .map(linalg::lambda_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dim(&self) -> usize {
        self.covariance[0].nrows()
    }

    /// Draws block `h` (`0` = initial state, `h >= 1` = `xi_{h-1}`) into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, h: usize, rng: &mut R, out: &mut DVector<f64>) {
        let m = self.dim();
        match self.kind {
            NoiseKind::DeterministicZero => {
                if h == 0 {
                    out.copy_from(self.initial_state.as_ref().unwrap());
                } else {
                    out.fill(0.0);
                }
            }
            NoiseKind::TruncatedGaussian => loop {
                let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
                out.gemv(1.0, &self.factors[h], &z, 0.0);
                if out.norm() <= self.bound {
                    break;
                }
            },
            NoiseKind::ScaledUniform => {
                let half = 3f64.sqrt();
                let u = DVector::from_fn(m, |_, _| rng.random_range(-half..half));
                out.gemv(1.0, &self.factors[h], &u, 0.0);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.sample_into(h, rng, &mut out);
        out
    }
}

/// A finite-horizon zero-sum LQ game.
#[derive(Clone, Debug, PartialEq)]
pub struct LqGame {
    stages: Vec<Stage>,
    terminal_q: Mat,
    noise: NoiseModel,
}

impl LqGame {
    pub fn new(stages: Vec<Stage>, terminal_q: Mat, noise: NoiseModel) -> Result<Self> {
        let game = Self {
            stages,
            terminal_q,
            noise,
        };
        game.validate()?;
        Ok(game)
    }

    /// Replicates one set of stage matrices over the whole horizon.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        horizon: usize,
        a: Mat,
        b: Mat,
        d: Mat,
        q: Mat,
        ru: Mat,
        rw: Mat,
        noise: NoiseModel,
    ) -> Result<Self> {
        let stage = Stage {
            a,
            b,
            d,
            q: q.clone(),
            ru,
            rw,
        };
        Self::new(vec![stage; horizon], q, noise)
    }

    /// The bundled 3-state, horizon-5 benchmark instance.
    pub fn benchmark() -> Self {
        Self::from_json_str(BENCHMARK_JSON).expect("bundled benchmark parses")
    }

    /// Initial gain used with the benchmark: the same 3x3 block at every stage.
    pub fn benchmark_initial_gain(&self) -> StructuredGain {
        self.constant_gain(GainSide::K, &Mat::from_row_slice(3, 3, &BENCHMARK_K0))
            .expect("benchmark gain shape")
    }

    /// Scalar demo: `N = 1`, `A = B = 1`, `D = 0.5`, `Q = Ru = 1`, `Rw = 5`,
    /// unit noise covariances.
    pub fn scalar_demo() -> Self {
        Self::scalar(1.0, 1.0, 0.5, 1.0, 1.0, 5.0)
    }

    /// Horizon-1 scalar game with unit noise covariances.
    pub fn scalar(a: f64, b: f64, d: f64, q: f64, ru: f64, rw: f64) -> Self {
        let s = |v: f64| Mat::from_element(1, 1, v);
        let noise = NoiseModel::truncated_gaussian(vec![s(1.0), s(1.0)]).unwrap();
        Self::time_invariant(1, s(a), s(b), s(d), s(q), s(ru), s(rw), noise).unwrap()
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        Self::new(self.stages.clone(), self.terminal_q.clone(), noise)
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn state_dim(&self) -> usize {
        self.terminal_q.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.stages[0].b.ncols()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.stages[0].d.ncols()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, h: usize) -> &Stage {
        &self.stages[h]
    }

    pub fn terminal_q(&self) -> &Mat {
        &self.terminal_q
    }

    /// `Q_h` for `h = 0..=N`.
    pub fn q(&self, h: usize) -> &Mat {
        if h == self.horizon() {
            &self.terminal_q
        } else {
            &self.stages[h].q
        }
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// `d_K = d m N`.
    pub fn dim_k(&self) -> usize {
        self.control_dim() * self.state_dim() * self.horizon()
    }

    /// `d_L = n m N`.
    pub fn dim_l(&self) -> usize {
        self.disturbance_dim() * self.state_dim() * self.horizon()
    }

    /// Largest spectral norm of the disturbance blocks, i.e. `|D|` of the compact form.
    pub fn disturbance_norm(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| linalg::op_norm(&s.d))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(GameError::Invalid("horizon must be positive".into()));
        }
        let m = self.terminal_q.nrows();
        let d = self.stages[0].b.ncols();
        let n = self.stages[0].d.ncols();
        let shape = |stage: usize, name: &str, mat: &Mat, r: usize, c: usize| -> Result<()> {
            if mat.nrows() != r || mat.ncols() != c {
                return Err(GameError::Dimension {
                    stage,
                    what: format!("{name} is {}x{}, expected {r}x{c}", mat.nrows(), mat.ncols()),
                });
            }
            Ok(())
        };
        let sym_psd = |stage: usize, name: &str, mat: &Mat, definite: bool| -> Result<()> {
            if !is_symmetric(mat, 1e-12) {
                return Err(GameError::Dimension {
                    stage,
                    what: format!("{name} is not symmetric"),
                });
            }
            let ok = if definite {
                linalg::lambda_min(mat) > 0.0
            } else {
                is_psd(mat)
            };
            if !ok {
                let kind = if definite { "positive definite" } else { "positive semidefinite" };
                return Err(GameError::Dimension {
                    stage,
                    what: format!("{name} is not {kind}"),
                });
            }
            Ok(())
        };
        for (h, s) in self.stages.iter().enumerate() {
            shape(h, "A", &s.a, m, m)?;
            shape(h, "B", &s.b, m, d)?;
            shape(h, "D", &s.d, m, n)?;
            shape(h, "Q", &s.q, m, m)?;
            shape(h, "Ru", &s.ru, d, d)?;
            shape(h, "Rw", &s.rw, n, n)?;
            sym_psd(h, "Q", &s.q, false)?;
            sym_psd(h, "Ru", &s.ru, true)?;
            sym_psd(h, "Rw", &s.rw, true)?;
        }
        let big_n = self.horizon();
        shape(big_n, "terminal Q", &self.terminal_q, m, m)?;
        sym_psd(big_n, "terminal Q", &self.terminal_q, false)?;
        if self.noise.covariance.len() != big_n + 1 {
            return Err(GameError::Invalid(format!(
                "noise has {} covariance blocks, expected {}",
                self.noise.covariance.len(),
                big_n + 1
            )));
        }
        if self.noise.dim() != m {
            return Err(GameError::Invalid(format!(
                "noise dimension {} does not match state dimension {m}",
                self.noise.dim()
            )));
        }
        Ok(())
    }

    /// Checks shape and count of per-stage blocks and wraps them as a gain.
    pub fn gain_from_blocks(&self, side: GainSide, blocks: Vec<Mat>) -> Result<StructuredGain> {
        let rows = self.input_dim(side);
        if blocks.len() != self.horizon() {
            return Err(GameError::Invalid(format!(
                "expected {} gain blocks, got {}",
                self.horizon(),
                blocks.len()
            )));
        }
        for (h, b) in blocks.iter().enumerate() {
            if b.nrows() != rows || b.ncols() != self.state_dim() {
                return Err(GameError::Dimension {
                    stage: h,
                    what: format!(
                        "{side:?}-side block is {}x{}, expected {rows}x{}",
                        b.nrows(),
                        b.ncols(),
                        self.state_dim()
                    ),
                });
            }
        }
        Ok(StructuredGain {
            side,
            state_dim: self.state_dim(),
            blocks,
        })
    }

    /// Same block replicated over every stage.
    pub fn constant_gain(&self, side: GainSide, block: &Mat) -> Result<StructuredGain> {
        self.gain_from_blocks(side, vec![block.clone(); self.horizon()])
    }

    pub fn zero_gain(&self, side: GainSide) -> StructuredGain {
        StructuredGain {
            side,
            state_dim: self.state_dim(),
            blocks: vec![Mat::zeros(self.input_dim(side), self.state_dim()); self.horizon()],
        }
    }

    pub fn input_dim(&self, side: GainSide) -> usize {
        match side {
            GainSide::K => self.control_dim(),
            GainSide::L => self.disturbance_dim(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GameFile =
            serde_json::from_str(text).map_err(|e| GameError::Config(format!("game file: {e}")))?;
        file.into_game()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GameError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
            .map_err(|e| GameError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from_game(self)).unwrap()
    }
}

#[derive(Serialize, Deserialize)]
struct StageFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "Ru")]
    ru: Vec<Vec<f64>>,
    #[serde(rename = "Rw")]
    rw: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct NoiseFile {
    kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    covariance: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_state: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    horizon: usize,
    stages: Vec<StageFile>,
    #[serde(rename = "terminal_Q")]
    terminal_q: Vec<Vec<f64>>,
    noise: NoiseFile,
}

impl GameFile {
    fn into_game(self) -> Result<LqGame> {
        if self.stages.len() != self.horizon {
            return Err(GameError::Invalid(format!(
                "horizon is {} but {} stages are listed",
                self.horizon,
                self.stages.len()
            )));
        }
        let stages = self
            .stages
            .iter()
            .map(|s| {
                Ok(Stage {
                    a: from_rows(&s.a)?,
                    b: from_rows(&s.b)?,
                    d: from_rows(&s.d)?,
                    q: from_rows(&s.q)?,
                    ru: from_rows(&s.ru)?,
                    rw: from_rows(&s.rw)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = match self.noise.kind {
            NoiseKind::DeterministicZero => {
                let x0 = self.noise.initial_state.ok_or_else(|| {
                    GameError::Invalid("deterministic noise requires initial_state".into())
                })?;
                NoiseModel::deterministic(DVector::from_vec(x0), self.horizon)
            }
            kind => {
                let cov = self
                    .noise
                    .covariance
                    .iter()
                    .map(|c| from_rows(c))
                    .collect::<Result<Vec<_>>>()?;
                NoiseModel::new(kind, cov, self.noise.bound)?
            }
        };
        LqGame::new(stages, from_rows(&self.terminal_q)?, noise)
    }

    fn from_game(game: &LqGame) -> Self {
        let noise = game.noise();
        let deterministic = noise.kind == NoiseKind::DeterministicZero;
        GameFile {
            horizon: game.horizon(),
            stages: game
                .stages
                .iter()
                .map(|s| StageFile {
                    a: to_rows(&s.a),
                    b: to_rows(&s.b),
                    d: to_rows(&s.d),
                    q: to_rows(&s.q),
                    ru: to_rows(&s.ru),
                    rw: to_rows(&s.rw),
                })
                .collect(),
            terminal_q: to_rows(&game.terminal_q),
            noise: NoiseFile {
                kind: noise.kind,
                covariance: if deterministic {
                    Vec::new()
                } else {
                    noise.covariance.iter().map(to_rows).collect()
                },
                bound: (!deterministic).then_some(noise.bound),
                initial_state: noise.initial_state.as_ref().map(|x| x.iter().copied().collect()),
            },
        }
    }
}

/// Which player a gain belongs to: `K` (minimizer, pattern S1) or `L` (maximizer, S2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GainSide {
    K,
    L,
}

/// A gain `[diag(G_0, ..., G_{N-1}) | 0]` stored as its diagonal blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredGain {
    side: GainSide,
    state_dim: usize,
    blocks: Vec<Mat>,
}

impl StructuredGain {
    pub fn side(&self) -> GainSide {
        self.side
    }

    pub fn horizon(&self) -> usize {
        self.blocks.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn rows_per_block(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn block(&self, h: usize) -> &Mat {
        &self.blocks[h]
    }

    pub fn into_blocks(self) -> Vec<Mat> {
        self.blocks
    }

    /// Number of in-pattern coordinates.
    pub fn dim(&self) -> usize {
        self.blocks.len() * self.rows_per_block() * self.state_dim
    }

    /// Materializes the lifted `(rows * N) x m(N + 1)` matrix.
    pub fn lift(&self) -> Mat {
        let r = self.rows_per_block();
        let m = self.state_dim;
        let n = self.blocks.len();
        let mut out = Mat::zeros(r * n, m * (n + 1));
        for (h, b) in self.blocks.iter().enumerate() {
            out.view_mut((h * r, h * m), (r, m)).copy_from(b);
        }
        out
    }

    /// Frobenius norm; equals the Frobenius norm of the lift.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// Frobenius inner product `Tr(self^T other)`.
    pub fn dot(&self, other: &StructuredGain) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &StructuredGain) -> StructuredGain {
        debug_assert_eq!(self.side, other.side);
        StructuredGain {
            side: self.side,
            state_dim: self.state_dim,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b * alpha)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> StructuredGain {
        self.map_blocks(|b| b * alpha)
    }

    pub fn map_blocks(&self, f: impl Fn(&Mat) -> Mat) -> StructuredGain {
        StructuredGain {
            side: self.side,
            state_dim: self.state_dim,
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    /// Same side and shape with new blocks; panics on a shape mismatch.
    pub fn with_blocks(&self, blocks: Vec<Mat>) -> StructuredGain {
        assert_eq!(blocks.len(), self.blocks.len(), "block count");
        for (a, b) in blocks.iter().zip(&self.blocks) {
            assert_eq!(a.shape(), b.shape(), "block shape");
        }
        StructuredGain {
            side: self.side,
            state_dim: self.state_dim,
            blocks,
        }
    }

    /// In-pattern coordinates, stage by stage, column-major inside each block.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    /// Inverse of [`StructuredGain::to_flat`] using `self` as the shape template.
    pub fn with_flat(&self, flat: &[f64]) -> StructuredGain {
        let r = self.rows_per_block();
        let m = self.state_dim;
        StructuredGain {
            side: self.side,
            state_dim: m,
            blocks: (0..self.blocks.len())
                .map(|h| Mat::from_column_slice(r, m, &flat[h * r * m..(h + 1) * r * m]))
                .collect(),
        }
    }
}

/// Wraps per-stage blocks into a gain (see [`LqGame::gain_from_blocks`]).
pub fn lift_gain(game: &LqGame, blocks: Vec<Mat>, side: GainSide) -> Result<StructuredGain> {
    game.gain_from_blocks(side, blocks)
}

/// Accepts a full lifted matrix iff every entry outside the block pattern is
/// exactly zero.
pub fn validate_gain(game: &LqGame, candidate: &Mat, side: GainSide) -> Result<StructuredGain> {
    let r = game.input_dim(side);
    let m = game.state_dim();
    let n = game.horizon();
    let (rows, cols) = (r * n, m * (n + 1));
    if candidate.nrows() != rows || candidate.ncols() != cols {
        return Err(GameError::GainShape {
            rows: candidate.nrows(),
            cols: candidate.ncols(),
            expected_rows: rows,
            expected_cols: cols,
        });
    }
    for j in 0..cols {
        for i in 0..rows {
            let value = candidate[(i, j)];
            let in_pattern = j / m == i / r && j / m < n;
            if !in_pattern && value != 0.0 {
                return Err(GameError::OffPattern { row: i, col: j, value });
            }
        }
    }
    let blocks = (0..n)
        .map(|h| candidate.view((h * r, h * m), (r, m)).into_owned())
        .collect();
    game.gain_from_blocks(side, blocks)
}

/// Dense block operators of the compact reformulation.
#[derive(Clone, Debug)]
pub struct CompactOperators {
    pub a: Mat,
    pub b: Mat,
    pub d: Mat,
    pub q: Mat,
    pub ru: Mat,
    pub rw: Mat,
    pub sigma0: Mat,
    pub d_k: usize,
    pub d_l: usize,
}

impl CompactOperators {
    /// `A - B K - D L`.
    pub fn closed_loop(&self, k: &StructuredGain, l: &StructuredGain) -> Mat {
        &self.a - &self.b * k.lift() - &self.d * l.lift()
    }

    /// `Q + K^T Ru K - L^T Rw L`.
    pub fn stage_cost(&self, k: &StructuredGain, l: &StructuredGain) -> Mat {
        let kl = k.lift();
        let ll = l.lift();
        &self.q + kl.transpose() * &self.ru * &kl - ll.transpose() * &self.rw * &ll
    }
}

fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Lifts the per-stage matrices to the compact block form.
pub fn build_compact(game: &LqGame) -> Result<CompactOperators> {
    game.validate()?;
    let n = game.horizon();
    let m = game.state_dim();
    let d = game.control_dim();
    let w = game.disturbance_dim();
    let stages = game.stages();
    let mut a = Mat::zeros(m * (n + 1), m * (n + 1));
    let mut b = Mat::zeros(m * (n + 1), d * n);
    let mut dd = Mat::zeros(m * (n + 1), w * n);
    for (h, s) in stages.iter().enumerate() {
        a.view_mut(((h + 1) * m, h * m), (m, m)).copy_from(&s.a);
        b.view_mut(((h + 1) * m, h * d), (m, d)).copy_from(&s.b);
        dd.view_mut(((h + 1) * m, h * w), (m, w)).copy_from(&s.d);
    }
    let qs: Vec<&Mat> = (0..=n).map(|h| game.q(h)).collect();
    let rus: Vec<&Mat> = stages.iter().map(|s| &s.ru).collect();
    let rws: Vec<&Mat> = stages.iter().map(|s| &s.rw).collect();
    let sig: Vec<&Mat> = game.noise().covariance().iter().collect();
    Ok(CompactOperators {
        a,
        b,
        d: dd,
        q: block_diag(&qs),
        ru: block_diag(&rus),
        rw: block_diag(&rws),
        sigma0: block_diag(&sig),
        d_k: game.dim_k(),
        d_l: game.dim_l(),
    })
}
