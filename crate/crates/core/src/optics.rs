//! Lossless beam-splitter coupling of bosonic modes on a truncated Fock space.
//!
//! Convention: the transmitted output is `c = sqrt(eta) a + sqrt(1-eta) b` and
//! the complementary output is `d = -sqrt(1-eta) a + sqrt(eta) b`. The unitary
//! acting on states is `U = exp(theta (a^dag b - a b^dag))`, `theta = acos(sqrt(eta))`,
//! so that `U^dag a U = c`. It conserves total photon number and is synthesized
//! block by block on each fixed-total-number subspace.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::fock::{self, embedding_map, strides, total_dim, DensityOperator};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::{Error, Result};

/// Largest joint input space propagated by the product engine.
pub const MAX_JOINT_DIM: usize = 1 << 20;

/// Boundary weight above which an output is flagged as truncation-affected.
pub const BOUNDARY_WARNING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    eta: f64,
}

impl BeamSplitter {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("transmissivity must lie in [0, 1], got {eta}")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn reflectivity(&self) -> f64 {
        1.0 - self.eta
    }

    pub fn mixing_angle(&self) -> f64 {
        self.eta.sqrt().acos()
    }
}

/// One invariant subspace of fixed total photon number.
#[derive(Debug, Clone)]
pub struct PhotonBlock {
    pub total: usize,
    /// Photon number in the first arm for each basis vector of the block.
    pub first_arm: Vec<usize>,
    /// Flat two-mode indices `k * d_b + (total - k)`.
    pub indices: Vec<usize>,
    pub matrix: CMatrix,
    /// Every split `k + (total - k)` fits inside the truncation.
    pub complete: bool,
}

/// Beam-splitter unitary on `d_a x d_b` levels, stored as its photon-number blocks.
#[derive(Debug, Clone)]
pub struct TwoModeUnitary {
    dims: (usize, usize),
    blocks: Vec<PhotonBlock>,
    /// For each flat index: (block, position in block).
    locator: Vec<(usize, usize)>,
}

impl TwoModeUnitary {
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn blocks(&self) -> &[PhotonBlock] {
        &self.blocks
    }

    /// Blocks with total photon number below this value are reproduced exactly.
    pub fn safe_threshold(&self) -> usize {
        self.dims.0.min(self.dims.1)
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dims.0 * self.dims.1;
        let mut out = CMatrix::zeros(n, n);
        for b in &self.blocks {
            for (c, &gc) in b.indices.iter().enumerate() {
                for (r, &gr) in b.indices.iter().enumerate() {
                    out[(gr, gc)] = b.matrix[(r, c)];
                }
            }
        }
        out
    }

    /// Largest entry of `U^dag U - I` over the blocks that are complete.
    pub fn unitarity_residual_on_safe_blocks(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.complete)
            .map(|b| {
                let n = b.matrix.nrows();
                linalg::max_abs(&(b.matrix.adjoint() * &b.matrix - CMatrix::identity(n, n)))
            })
            .fold(0.0, f64::max)
    }

    /// Amplitudes of `U |k, l>` as `(m, amplitude)` pairs for the first-arm count `m`.
    pub fn column(&self, k: usize, l: usize) -> Vec<(usize, C64)> {
        let (block, pos) = self.locator[k * self.dims.1 + l];
        let b = &self.blocks[block];
        b.first_arm
            .iter()
            .enumerate()
            .map(|(r, &m)| (m, b.matrix[(r, pos)]))
            .collect()
    }

    /// Applies the unitary in place to modes `(mode_a, mode_b)` of a
    /// multi-mode amplitude vector laid out by `mode_dims`.
    pub(crate) fn apply_to_modes(&self, state: &mut [C64], mode_dims: &[usize], mode_a: usize, mode_b: usize) {
        debug_assert_eq!((mode_dims[mode_a], mode_dims[mode_b]), self.dims);
        let s = strides(mode_dims);
        let (sa, sb) = (s[mode_a], s[mode_b]);
        let rest: Vec<usize> = (0..state.len())
            .filter(|&x| (x / sa) % self.dims.0 == 0 && (x / sb) % self.dims.1 == 0)
            .collect();
        let mut scratch = Vec::new();
        let mut out = Vec::new();
        for &r in &rest {
            for b in &self.blocks {
                let t = b.total;
                scratch.clear();
                scratch.extend(b.first_arm.iter().map(|&k| state[r + k * sa + (t - k) * sb]));
                if scratch.iter().all(|z| *z == ZERO) {
                    continue;
                }
                out.clear();
                out.extend((0..scratch.len()).map(|i| {
                    scratch
                        .iter()
                        .enumerate()
                        .map(|(j, z)| b.matrix[(i, j)] * z)
                        .sum::<C64>()
                }));
                for (&k, z) in b.first_arm.iter().zip(&out) {
                    state[r + k * sa + (t - k) * sb] = *z;
                }
            }
        }
    }
}

fn synthesize(theta: f64, d_a: usize, d_b: usize) -> TwoModeUnitary {
    let mut blocks = Vec::with_capacity(d_a + d_b - 1);
    let mut locator = vec![(0, 0); d_a * d_b];
    for total in 0..(d_a + d_b - 1) {
        let lo = total.saturating_sub(d_b - 1);
        let hi = total.min(d_a - 1);
        let first_arm: Vec<usize> = (lo..=hi).collect();
        let n = first_arm.len();
        // a^dag b |k, t-k> = sqrt((k+1)(t-k)) |k+1, t-k-1>; the generator is
        // theta (a^dag b - a b^dag), real and antisymmetric in this basis.
        let mut generator = CMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            let k = first_arm[i];
            let amp = theta * (((k + 1) * (total - k)) as f64).sqrt();
            generator[(i + 1, i)] = C64::new(amp, 0.0);
            generator[(i, i + 1)] = C64::new(-amp, 0.0);
        }
        let matrix = if n == 1 {
            CMatrix::identity(1, 1)
        } else {
            linalg::exp_anti_hermitian(&generator)
        };
        let indices: Vec<usize> = first_arm.iter().map(|&k| k * d_b + (total - k)).collect();
        for (pos, &idx) in indices.iter().enumerate() {
            locator[idx] = (blocks.len(), pos);
        }
        blocks.push(PhotonBlock {
            total,
            first_arm,
            indices,
            matrix,
            complete: total < d_a.min(d_b),
        });
    }
    TwoModeUnitary {
        dims: (d_a, d_b),
        blocks,
        locator,
    }
}

const CACHE_CAPACITY: usize = 64;

type UnitaryCache = RwLock<HashMap<(u64, usize, usize), Arc<TwoModeUnitary>>>;

fn cache() -> &'static UnitaryCache {
    static CACHE: OnceLock<UnitaryCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Beam-splitter unitary on `d_a x d_b` levels. Results are cached by
/// `(eta, d_a, d_b)`; insertion is idempotent.
pub fn beamsplitter_unitary(bs: BeamSplitter, d_a: usize, d_b: usize) -> Result<Arc<TwoModeUnitary>> {
    total_dim(&[d_a, d_b])?;
    let key = (bs.eta.to_bits(), d_a, d_b);
    if let Some(u) = cache().read().expect("unitary cache poisoned").get(&key) {
        return Ok(Arc::clone(u));
    }
    let u = Arc::new(synthesize(bs.mixing_angle(), d_a, d_b));
    let mut guard = cache().write().expect("unitary cache poisoned");
    if guard.len() >= CACHE_CAPACITY {
        guard.clear();
    }
    Ok(Arc::clone(guard.entry(key).or_insert(u)))
}

/// How the output arms are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputArm {
    /// Unitary synthesized on the input truncation; `rho_c` keeps `d_a` levels.
    /// Blocks with total photon number `>= min(d_a, d_b)` are only approximate.
    #[default]
    MatchInput,
    /// Both arms padded to `d_a + d_b - 1` levels so every input block is
    /// complete and the output is exact for the given inputs.
    Lossless,
}

/// Output of a beam-splitter combination.
#[derive(Debug, Clone)]
pub struct BeamSplitterOutput {
    pub state: DensityOperator,
    /// Largest per-pair input weight in incomplete photon-number blocks.
    pub boundary_mass: f64,
}

impl BeamSplitterOutput {
    pub fn truncation_warning(&self) -> bool {
        self.boundary_mass > BOUNDARY_WARNING
    }
}

/// Weighted pure-state decomposition of a density operator.
fn ensemble(rho: &DensityOperator) -> Vec<(f64, CVector)> {
    let dim = rho.dim();
    if rho.is_diagonal() {
        return rho
            .populations()
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p != 0.0)
            .map(|(i, p)| {
                let mut v = CVector::zeros(dim);
                v[i] = linalg::ONE;
                (p, v)
            })
            .collect();
    }
    let (vals, vecs) = linalg::hermitian_eigen(rho.matrix());
    vals.into_iter()
        .enumerate()
        .filter(|(_, p)| p.abs() > 1e-15)
        .map(|(k, p)| (p, vecs.column(k).into_owned()))
        .collect()
}

/// Precomputed layout for propagating product inputs through `n` pairwise beam splitters.
struct ProductPlan {
    n: usize,
    a_map: Vec<usize>,
    b_map: Vec<usize>,
    a_dim: usize,
    b_dim: usize,
    joint_dims: Vec<usize>,
    c_dims: Vec<usize>,
    d_dim: usize,
    unitaries: Vec<Arc<TwoModeUnitary>>,
}

impl ProductPlan {
    fn new(a_dims: &[usize], b_dims: &[usize], bs: BeamSplitter, arm: OutputArm) -> Result<Self> {
        if a_dims.len() != b_dims.len() {
            return Err(Error::invalid(format!(
                "inputs have {} and {} modes; beam splitters pair them one to one",
                a_dims.len(),
                b_dims.len()
            )));
        }
        let (pa, pb): (Vec<usize>, Vec<usize>) = match arm {
            OutputArm::MatchInput => (a_dims.to_vec(), b_dims.to_vec()),
            OutputArm::Lossless => {
                let e: Vec<usize> = a_dims.iter().zip(b_dims).map(|(a, b)| a + b - 1).collect();
                (e.clone(), e)
            }
        };
        let (a_dim, b_dim) = (total_dim(&pa)?, total_dim(&pb)?);
        if a_dim > fock::DEFAULT_MAX_TOTAL_DIM {
            return Err(Error::ResourceLimit {
                requested: a_dim,
                limit: fock::DEFAULT_MAX_TOTAL_DIM,
            });
        }
        if a_dim.saturating_mul(b_dim) > MAX_JOINT_DIM {
            return Err(Error::ResourceLimit {
                requested: a_dim.saturating_mul(b_dim),
                limit: MAX_JOINT_DIM,
            });
        }
        let unitaries = pa
            .iter()
            .zip(&pb)
            .map(|(&x, &y)| beamsplitter_unitary(bs, x, y))
            .collect::<Result<Vec<_>>>()?;
        let mut joint_dims = pa.clone();
        joint_dims.extend_from_slice(&pb);
        Ok(Self {
            n: a_dims.len(),
            a_map: embedding_map(a_dims, &pa)?,
            b_map: embedding_map(b_dims, &pb)?,
            a_dim,
            b_dim,
            joint_dims,
            c_dims: pa,
            d_dim: b_dim,
            unitaries,
        })
    }

    fn c_dim(&self) -> usize {
        self.a_dim
    }

    /// `U (u (x) v)` on the padded joint space.
    fn propagate(&self, u: &CVector, v: &CVector) -> Vec<C64> {
        let mut joint = vec![ZERO; self.a_dim * self.b_dim];
        for (i, &ai) in self.a_map.iter().enumerate() {
            if u[i] == ZERO {
                continue;
            }
            for (j, &bj) in self.b_map.iter().enumerate() {
                joint[ai * self.b_dim + bj] = u[i] * v[j];
            }
        }
        for (i, u) in self.unitaries.iter().enumerate() {
            u.apply_to_modes(&mut joint, &self.joint_dims, i, self.n + i);
        }
        joint
    }

    /// Transposed output-arm factor `T` with `rho_c = (T^T)(T^T)^dag` for a pure joint state.
    fn factor(&self, joint: &[C64]) -> CMatrix {
        CMatrix::from_column_slice(self.d_dim, self.c_dim(), joint)
    }
}

/// Largest per-pair probability that an input pair `(k, l)` lands in a block
/// with `k + l >= min(d_a, d_b)`, the region where the truncated unitary is inexact.
pub fn boundary_mass(rho_a: &DensityOperator, rho_b: &DensityOperator) -> Result<f64> {
    if rho_a.n_modes() != rho_b.n_modes() {
        return Err(Error::invalid("inputs must have the same number of modes"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..rho_a.n_modes() {
        let pa = rho_a.marginal_populations(i)?;
        let pb = rho_b.marginal_populations(i)?;
        let threshold = pa.len().min(pb.len());
        let mut mass = 0.0;
        for (k, x) in pa.iter().enumerate() {
            for (l, y) in pb.iter().enumerate() {
                if k + l >= threshold {
                    mass += x.max(0.0) * y.max(0.0);
                }
            }
        }
        worst = worst.max(mass);
    }
    Ok(worst)
}

/// Output `rho_c` for the product input `rho_a (x) rho_b`, with mode `i` of
/// `rho_a` meeting mode `i` of `rho_b` at its own beam splitter.
pub fn combine_product(
    rho_a: &DensityOperator,
    rho_b: &DensityOperator,
    bs: BeamSplitter,
    arm: OutputArm,
) -> Result<BeamSplitterOutput> {
    let plan = ProductPlan::new(rho_a.mode_dims(), rho_b.mode_dims(), bs, arm)?;
    let boundary = match arm {
        OutputArm::MatchInput => boundary_mass(rho_a, rho_b)?,
        OutputArm::Lossless => 0.0,
    };
    let state = if rho_a.is_diagonal() && rho_b.is_diagonal() {
        combine_diagonal(rho_a, rho_b, &plan)?
    } else {
        let ea = ensemble(rho_a);
        let eb = ensemble(rho_b);
        let c_dim = plan.c_dim();
        let mut acc_t = CMatrix::zeros(c_dim, c_dim);
        for (wa, u) in &ea {
            for (wb, v) in &eb {
                let t = plan.factor(&plan.propagate(u, v));
                // (T^dag T) = conj(M M^dag) for M = T^T.
                acc_t.gemm_ad(C64::new(wa * wb, 0.0), &t, &t, linalg::ONE);
            }
        }
        DensityOperator::new(acc_t.transpose(), plan.c_dims.clone())?
    };
    Ok(BeamSplitterOutput {
        state: state.with_kept_mass(rho_a.kept_mass() * rho_b.kept_mass()),
        boundary_mass: boundary,
    })
}

/// Fock-diagonal inputs give a Fock-diagonal output: only the block
/// transition probabilities `|<m, t-m| U |k, l>|^2` are needed.
fn combine_diagonal(rho_a: &DensityOperator, rho_b: &DensityOperator, plan: &ProductPlan) -> Result<DensityOperator> {
    let pa = rho_a.populations();
    let pb = rho_b.populations();
    let a_dims = rho_a.mode_dims();
    let b_dims = rho_b.mode_dims();
    let c_strides = strides(&plan.c_dims);
    // transitions[i][k][l] = [(m, prob)]
    let transitions: Vec<Vec<Vec<Vec<(usize, f64)>>>> = plan
        .unitaries
        .iter()
        .enumerate()
        .map(|(i, u)| {
            (0..a_dims[i])
                .map(|k| {
                    (0..b_dims[i])
                        .map(|l| u.column(k, l).into_iter().map(|(m, z)| (m, z.norm_sqr())).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; plan.c_dim()];
    let mut partial: Vec<(usize, f64)> = Vec::new();
    let mut next: Vec<(usize, f64)> = Vec::new();
    for (xa, &wa) in pa.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let ka = fock_digits(xa, a_dims);
        for (xb, &wb) in pb.iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            let lb = fock_digits(xb, b_dims);
            partial.clear();
            partial.push((0, wa * wb));
            for i in 0..plan.n {
                next.clear();
                for &(offset, w) in &partial {
                    for &(m, p) in &transitions[i][ka[i]][lb[i]] {
                        next.push((offset + m * c_strides[i], w * p));
                    }
                }
                std::mem::swap(&mut partial, &mut next);
            }
            for &(idx, w) in &partial {
                out[idx] += w;
            }
        }
    }
    DensityOperator::from_populations(&out, plan.c_dims.clone())
}

fn fock_digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        digits[i] = index % dims[i];
        index /= dims[i];
    }
    digits
}

/// Single-mode `rho_c` for inputs `rho_a`, `rho_b`, returned on `d_a` levels.
pub fn apply_beamsplitter(rho_a: &DensityOperator, rho_b: &DensityOperator, bs: BeamSplitter) -> Result<DensityOperator> {
    apply_beamsplitter_with(rho_a, rho_b, bs, OutputArm::MatchInput).map(|o| o.state)
}

pub fn apply_beamsplitter_with(
    rho_a: &DensityOperator,
    rho_b: &DensityOperator,
    bs: BeamSplitter,
    arm: OutputArm,
) -> Result<BeamSplitterOutput> {
    if rho_a.n_modes() != 1 || rho_b.n_modes() != 1 {
        return Err(Error::invalid("apply_beamsplitter takes single-mode inputs"));
    }
    let out = combine_product(rho_a, rho_b, bs, arm)?;
    if out.truncation_warning() {
        log::warn!(
            "beam-splitter input puts weight {:.3e} in truncated photon-number blocks",
            out.boundary_mass
        );
    }
    Ok(out)
}

/// `rho_c` for a general (possibly entangled) joint state over `2n` modes.
///
/// `pairing[i] = (a_i, b_i)` names the modes meeting at beam splitter `i`;
/// the output modes follow the pairing order. Each pair uses the unitary on
/// its own input truncation, so `rho_c` keeps `d_{a_i}` levels per mode.
pub fn apply_beamsplitter_vector(
    rho_ab: &DensityOperator,
    bs: BeamSplitter,
    pairing: &[(usize, usize)],
) -> Result<DensityOperator> {
    let m = rho_ab.n_modes();
    let mut used = vec![false; m];
    if pairing.is_empty() || 2 * pairing.len() != m {
        return Err(Error::invalid(format!(
            "{} pairs cannot cover a {m}-mode state",
            pairing.len()
        )));
    }
    for &(a, b) in pairing {
        for k in [a, b] {
            if k >= m || std::mem::replace(&mut used[k], true) {
                return Err(Error::invalid(format!("pairing {pairing:?} is not a perfect matching of {m} modes")));
            }
        }
    }
    let dims = rho_ab.mode_dims().to_vec();
    let mut work = rho_ab.matrix().clone();
    for &(a, b) in pairing {
        let u = beamsplitter_unitary(bs, dims[a], dims[b])?;
        // U rho, then (U (U rho)^dag)^dag = U rho U^dag.
        for _ in 0..2 {
            for mut col in work.column_iter_mut() {
                u.apply_to_modes(col.as_mut_slice(), &dims, a, b);
            }
            work.adjoint_mut();
        }
    }
    let evolved = DensityOperator::new(work, dims)?.with_kept_mass(rho_ab.kept_mass());
    let a_modes: Vec<usize> = pairing.iter().map(|p| p.0).collect();
    let reduced = fock::partial_trace(&evolved, &a_modes)?;
    let mut sorted = a_modes.clone();
    sorted.sort_unstable();
    let order: Vec<usize> = a_modes
        .iter()
        .map(|a| sorted.iter().position(|s| s == a).expect("kept mode"))
        .collect();
    reduced.permute_modes(&order)
}

/// `rho_c` as a linear function of one input with the other input held fixed.
///
/// Stores the images of the basis operators `|i><j|` of the variable arm, so
/// repeated evaluation costs one weighted sum of matrices.
#[derive(Debug, Clone)]
pub struct LinearOutputMap {
    input_dim: usize,
    output_dims: Vec<usize>,
    images: Vec<CMatrix>,
}

/// Which input port the fixed state occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPort {
    A,
    B,
}

impl LinearOutputMap {
    /// Single-mode map: `fixed` sits on `port`, the variable input has `variable_dim` levels.
    pub fn new(
        fixed: &DensityOperator,
        port: FixedPort,
        variable_dim: usize,
        bs: BeamSplitter,
        arm: OutputArm,
    ) -> Result<Self> {
        if fixed.n_modes() != 1 {
            return Err(Error::invalid("linear output maps are single-mode"));
        }
        total_dim(&[variable_dim])?;
        let (a_dims, b_dims) = match port {
            FixedPort::A => (fixed.mode_dims().to_vec(), vec![variable_dim]),
            FixedPort::B => (vec![variable_dim], fixed.mode_dims().to_vec()),
        };
        let plan = ProductPlan::new(&a_dims, &b_dims, bs, arm)?;
        let fixed_ensemble = ensemble(fixed);
        let basis = |i: usize| {
            let mut e = CVector::zeros(variable_dim);
            e[i] = linalg::ONE;
            e
        };
        // factors[i][l] = M for variable basis i and fixed component l.
        let factors: Vec<Vec<CMatrix>> = (0..variable_dim)
            .map(|i| {
                let e = basis(i);
                fixed_ensemble
                    .iter()
                    .map(|(_, v)| {
                        let joint = match port {
                            FixedPort::A => plan.propagate(v, &e),
                            FixedPort::B => plan.propagate(&e, v),
                        };
                        plan.factor(&joint).transpose()
                    })
                    .collect()
            })
            .collect();
        let c_dim = plan.c_dim();
        let mut images = vec![CMatrix::zeros(c_dim, c_dim); variable_dim * variable_dim];
        for i in 0..variable_dim {
            for j in i..variable_dim {
                let mut img = CMatrix::zeros(c_dim, c_dim);
                for (l, (w, _)) in fixed_ensemble.iter().enumerate() {
                    let mj_adj = factors[j][l].adjoint();
                    img.gemm(C64::new(*w, 0.0), &factors[i][l], &mj_adj, linalg::ONE);
                }
                if i != j {
                    images[j * variable_dim + i] = img.adjoint();
                }
                images[i * variable_dim + j] = img;
            }
        }
        Ok(Self {
            input_dim: variable_dim,
            output_dims: plan.c_dims.clone(),
            images,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dims(&self) -> &[usize] {
        &self.output_dims
    }

    fn image(&self, i: usize, j: usize) -> &CMatrix {
        &self.images[i * self.input_dim + j]
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.mode_dims() != [self.input_dim] {
            return Err(Error::invalid(format!(
                "map expects a {}-level input, got {:?}",
                self.input_dim,
                rho.mode_dims()
            )));
        }
        let c = self.images[0].nrows();
        let mut out = CMatrix::zeros(c, c);
        for i in 0..self.input_dim {
            for j in 0..self.input_dim {
                let w = rho.matrix()[(i, j)];
                if w != ZERO {
                    accumulate(&mut out, w, self.image(i, j));
                }
            }
        }
        Ok(DensityOperator::new(out, self.output_dims.clone())?.with_kept_mass(rho.kept_mass()))
    }

    pub fn apply_pure(&self, psi: &fock::PureState) -> Result<DensityOperator> {
        if psi.mode_dims() != [self.input_dim] {
            return Err(Error::invalid("pure input has the wrong dimension for this map"));
        }
        let a = psi.amplitudes();
        let c = self.images[0].nrows();
        let mut out = CMatrix::zeros(c, c);
        for i in 0..self.input_dim {
            if a[i] == ZERO {
                continue;
            }
            for j in 0..self.input_dim {
                let w = a[i] * a[j].conj();
                if w != ZERO {
                    accumulate(&mut out, w, self.image(i, j));
                }
            }
        }
        DensityOperator::new(out, self.output_dims.clone())
    }
}

fn accumulate(out: &mut CMatrix, w: C64, m: &CMatrix) {
    for (o, x) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *o += w * x;
    }
}
