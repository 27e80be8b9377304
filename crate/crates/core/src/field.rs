//! Spatial discretization of the normalized contact patch `[0, 1]`.
//!
//! The distributed state is sampled on a uniform grid of `N + 1` nodes. The
//! inflow node `xi = 0` carries the boundary condition `z(0) = 0`; the
//! remaining `N` nodes are the free unknowns. Transport is discretized with
//! first-order upwind differences (flow is towards `+xi`) and all nonlocal
//! functionals use composite trapezoidal quadrature on the same nodes.
//!
//! Every kernel of the tire model is diagonal, so the two axles decouple in
//! the distributed part. [`AxleOperator`] exploits this: per axle the
//! discrete operator is a lower-bidiagonal matrix plus a rank-one term, and
//! it is applied and inverted in `O(N)`.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};

use crate::error::{Error, Result};
use crate::model::Vehicle;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_intervals: usize,
    dxi: f64,
    xi: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn uniform(n_intervals: usize) -> Result<Self> {
        if n_intervals < 2 {
            return Err(crate::error::invalid(
                "grid.n_intervals",
                format!("{n_intervals} (need at least 2)"),
            ));
        }
        let dxi = 1.0 / n_intervals as f64;
        let xi = (0..=n_intervals).map(|k| k as f64 * dxi).collect();
        let weights = (0..=n_intervals)
            .map(|k| if k == 0 || k == n_intervals { 0.5 * dxi } else { dxi })
            .collect();
        Ok(Self {
            n_intervals,
            dxi,
            xi,
            weights,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_nodes(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoidal integral of nodal samples.
    pub fn integrate(&self, samples: impl IntoIterator<Item = f64>) -> f64 {
        self.weights.iter().zip(samples).map(|(w, s)| w * s).sum()
    }
}

/// Nodal samples of a 2-vector field on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedField {
    values: Vec<Vector2<f64>>,
}

impl DistributedField {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            values: vec![Vector2::zeros(); n_nodes],
        }
    }

    pub fn from_values(values: Vec<Vector2<f64>>) -> Self {
        Self { values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Vector2<f64>) -> Self {
        Self {
            values: grid.xi().iter().map(|&x| f(x)).collect(),
        }
    }

    /// Constant profile on the free nodes with the inflow node pinned to zero.
    pub fn constant_state(grid: &Grid, c: Vector2<f64>) -> Self {
        let mut f = Self::from_fn(grid, |_| c);
        f.pin_inflow();
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vector2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vector2<f64>] {
        &mut self.values
    }

    pub fn pin_inflow(&mut self) {
        if let Some(v) = self.values.first_mut() {
            *v = Vector2::zeros();
        }
    }

    pub fn set_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = Vector2::zeros());
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.values.copy_from_slice(&other.values);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }

    /// Squared trapezoidal `L2` norm.
    pub fn l2_norm_sq(&self, grid: &Grid) -> f64 {
        grid.integrate(self.values.iter().map(|v| v.norm_squared()))
    }

    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        self.l2_norm_sq(grid).sqrt()
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v[i])
    }
}

/// Nodal samples of the diagonal kernels `K1..K4` and of the weight
/// `Q = K1 H^-1`. Each per-node entry stores the diagonal as a 2-vector.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub k1: Vec<Vector2<f64>>,
    pub k2: Vec<Vector2<f64>>,
    pub k3: Vec<Vector2<f64>>,
    pub k4: Vector2<f64>,
    pub q: Vec<Vector2<f64>>,
}

impl KernelSet {
    pub fn new(vehicle: &Vehicle, grid: &Grid) -> Self {
        let vx = vehicle.body.vx;
        let [a1, a2] = &vehicle.axles;
        let per_node = |f: &dyn Fn(&crate::model::AxleTireParams, f64) -> f64| -> Vec<Vector2<f64>> {
            grid.xi()
                .iter()
                .map(|&x| Vector2::new(f(a1, x), f(a2, x)))
                .collect()
        };
        let k1 = per_node(&|a, x| a.fz * a.sigma * a.pressure(x));
        let k2 = per_node(&|a, x| -a.psi * a.pressure(x));
        let k3 = per_node(&|a, x| -vx * a.psi / a.length * a.pressure_slope(x));
        let q = per_node(&|a, x| a.fz * a.sigma * a.pressure(x) / (2.0 * a.phi));
        let k4 = Vector2::new(
            vx * a1.psi / a1.length * a1.pressure(1.0),
            vx * a2.psi / a2.length * a2.pressure(1.0),
        );
        Self { k1, k2, k3, k4, q }
    }

    pub fn n_nodes(&self) -> usize {
        self.k1.len()
    }

    fn check(&self, z: &DistributedField) -> Result<()> {
        if z.len() != self.n_nodes() {
            return Err(Error::SizeMismatch {
                expected: self.n_nodes(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Axle forces `[F_y1, F_y2]`.
    pub fn k1_functional(&self, z: &DistributedField, grid: &Grid) -> Result<Vector2<f64>> {
        self.check(z)?;
        Ok(weighted(&self.k1, z, grid))
    }

    pub fn k2_functional(&self, z: &DistributedField, grid: &Grid) -> Result<Vector2<f64>> {
        self.check(z)?;
        Ok(weighted(&self.k2, z, grid))
    }

    /// Integral term with kernel `K3` plus the outflow boundary term `K4 z(1)`.
    pub fn k3_functional(&self, z: &DistributedField, grid: &Grid) -> Result<Vector2<f64>> {
        self.check(z)?;
        let last = z.values()[z.len() - 1];
        Ok(weighted(&self.k3, z, grid) + self.k4.component_mul(&last))
    }

    /// Quadrature-weighted inner product `int a^T Q b`.
    pub fn q_inner(&self, a: &DistributedField, b: &DistributedField, grid: &Grid) -> f64 {
        grid.weights()
            .iter()
            .zip(&self.q)
            .zip(a.values().iter().zip(b.values()))
            .map(|((w, q), (x, y))| w * x.dot(&q.component_mul(y)))
            .sum()
    }

    /// `sup_xi lambda_max(Q(xi))`
    pub fn q_max(&self) -> f64 {
        self.q.iter().map(|q| q.max()).fold(0.0, f64::max)
    }

    pub fn q_min(&self) -> f64 {
        self.q.iter().map(|q| q.min()).fold(f64::INFINITY, f64::min)
    }
}

fn weighted(kernel: &[Vector2<f64>], z: &DistributedField, grid: &Grid) -> Vector2<f64> {
    grid.weights()
        .iter()
        .zip(kernel)
        .zip(z.values())
        .fold(Vector2::zeros(), |acc, ((w, k), v)| acc + *w * k.component_mul(v))
}

/// First-order upwind derivative; zero at the inflow node.
pub fn upwind_derivative(z: &DistributedField, grid: &Grid) -> DistributedField {
    let inv = 1.0 / grid.dxi();
    let vals = z.values();
    let mut out = DistributedField::zeros(vals.len());
    for k in 1..vals.len() {
        out.values_mut()[k] = (vals[k] - vals[k - 1]) * inv;
    }
    out
}

/// Discrete `A + theta Sigma(y) (I + K2)` for one axle, restricted to the
/// free nodes `1..=N`.
///
/// Structure: lower-bidiagonal part `B` (diagonal `diag`, sub-diagonal
/// `sub`) plus the rank-one term `1 c^T` collecting every nonlocal
/// functional.
#[derive(Debug, Clone)]
pub struct AxleOperator {
    diag: f64,
    sub: f64,
    row: Vec<f64>,
}

impl AxleOperator {
    /// `source` is the diagonal entry `theta * Sigma_ii(y)` (non-positive).
    pub fn new(axle: usize, source: f64, kernels: &KernelSet, grid: &Grid, lambda: f64) -> Self {
        let n = grid.n_intervals();
        let inv = lambda / grid.dxi();
        let w = grid.weights();
        let mut row: Vec<f64> = (1..=n)
            .map(|k| w[k] * (kernels.k3[k][axle] + source * kernels.k2[k][axle]))
            .collect();
        row[n - 1] += kernels.k4[axle];
        Self {
            diag: -inv + source,
            sub: inv,
            row,
        }
    }

    pub fn dim(&self) -> usize {
        self.row.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let nonlocal: f64 = self.row.iter().zip(x).map(|(c, v)| c * v).sum();
        (0..x.len())
            .map(|k| {
                let prev = if k == 0 { 0.0 } else { x[k - 1] };
                self.diag * x[k] + self.sub * prev + nonlocal
            })
            .collect()
    }

    fn solve_bidiagonal(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(rhs.len());
        let mut prev = 0.0;
        for r in rhs {
            prev = (r - self.sub * prev) / self.diag;
            x.push(prev);
        }
        x
    }

    /// Solves `(B + 1 c^T) x = rhs` by Sherman-Morrison.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.diag.abs() < f64::MIN_POSITIVE || !self.diag.is_finite() {
            return Err(Error::Singular("zero diagonal in transport operator".into()));
        }
        let y = self.solve_bidiagonal(rhs);
        let ones = vec![1.0; rhs.len()];
        let u = self.solve_bidiagonal(&ones);
        let cu: f64 = self.row.iter().zip(&u).map(|(c, v)| c * v).sum();
        let cy: f64 = self.row.iter().zip(&y).map(|(c, v)| c * v).sum();
        let denom = 1.0 + cu;
        if denom.abs() < 1e-12 {
            return Err(Error::Singular(format!(
                "nonlocal coupling makes the operator singular (1 + c^T B^-1 1 = {denom:.3e})"
            )));
        }
        let s = cy / denom;
        Ok(y.iter().zip(&u).map(|(yk, uk)| yk - s * uk).collect())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = self.row[j];
            if i == j {
                v += self.diag;
            } else if i == j + 1 {
                v += self.sub;
            }
            v
        })
    }
}

/// Both axle blocks of the discrete operator for a frozen source argument.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub axles: [AxleOperator; 2],
}

impl DiscreteOperator {
    /// Discrete `A_Sigma(y)`; pass `y = None` (or `theta = 0`) for the bare
    /// transport-plus-nonlocal operator `A`.
    pub fn new(vehicle: &Vehicle, kernels: &KernelSet, grid: &Grid, y: Option<&Vector2<f64>>) -> Self {
        let source = match y {
            Some(y) => vehicle.theta() * vehicle.sigma_diag(y),
            None => Vector2::zeros(),
        };
        let lam = vehicle.mats.lambda;
        Self {
            axles: [
                AxleOperator::new(0, source[0], kernels, grid, lam[(0, 0)]),
                AxleOperator::new(1, source[1], kernels, grid, lam[(1, 1)]),
            ],
        }
    }

    /// Applies the operator to a field (inflow node ignored, output pinned).
    pub fn apply(&self, z: &DistributedField) -> DistributedField {
        let mut out = DistributedField::zeros(z.len());
        for (i, op) in self.axles.iter().enumerate() {
            let x: Vec<f64> = z.component(i).skip(1).collect();
            for (k, v) in op.apply(&x).into_iter().enumerate() {
                out.values_mut()[k + 1][i] = v;
            }
        }
        out
    }

    /// Returns `w` with `w(0) = 0` solving `A_Sigma w = rhs` on the free nodes.
    pub fn solve(&self, rhs: &DistributedField) -> Result<DistributedField> {
        let mut out = DistributedField::zeros(rhs.len());
        for (i, op) in self.axles.iter().enumerate() {
            let r: Vec<f64> = rhs.component(i).skip(1).collect();
            for (k, v) in op.solve(&r)?.into_iter().enumerate() {
                out.values_mut()[k + 1][i] = v;
            }
        }
        Ok(out)
    }

    /// Dense `2N x 2N` matrix, unknowns ordered axle-major
    /// (`[z_1(xi_1..xi_N), z_2(xi_1..xi_N)]`).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.axles[0].dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (i, op) in self.axles.iter().enumerate() {
            m.view_mut((i * n, i * n), (n, n)).copy_from(&op.to_dense());
        }
        m
    }
}

/// Matrix of the discrete transport-plus-nonlocal operator `A`.
pub fn assemble_discrete_a(vehicle: &Vehicle, kernels: &KernelSet, grid: &Grid) -> DMatrix<f64> {
    DiscreteOperator::new(vehicle, kernels, grid, None).to_dense()
}

/// Largest `omega` with `<A z, Q z>_h <= -omega ||z||_h^2` for every discrete
/// field with `z(0) = 0`. Computed as minus the largest eigenvalue of the
/// symmetric part of the `Q`-weighted operator, normalized by the quadrature
/// weights. Pass `y` to certify `A_Sigma(y)` instead of `A`.
pub fn dissipativity_constant(
    vehicle: &Vehicle,
    kernels: &KernelSet,
    grid: &Grid,
    y: Option<&Vector2<f64>>,
) -> f64 {
    let op = DiscreteOperator::new(vehicle, kernels, grid, y);
    let w = grid.weights();
    let n = grid.n_intervals();
    let mut worst = f64::NEG_INFINITY;
    for (i, axle_op) in op.axles.iter().enumerate() {
        let a = axle_op.to_dense();
        let wq = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                w[r + 1] * kernels.q[r + 1][i]
            } else {
                0.0
            }
        });
        let s = &wq * &a;
        let sym = (&s + s.transpose()) * 0.5;
        let scaled = DMatrix::from_fn(n, n, |r, c| sym[(r, c)] / (w[r + 1] * w[c + 1]).sqrt());
        let eig = SymmetricEigen::new(scaled);
        worst = worst.max(eig.eigenvalues.max());
    }
    -worst
}

/// Diagonal 2x2 matrix from a stored kernel diagonal.
pub fn diag(v: &Vector2<f64>) -> Matrix2<f64> {
    Matrix2::from_diagonal(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (Vehicle, Grid, KernelSet) {
        let veh = Vehicle::reference();
        let grid = Grid::uniform(n).unwrap();
        let k = KernelSet::new(&veh, &grid);
        (veh, grid, k)
    }

    fn no_carcass(mut veh: Vehicle) -> Vehicle {
        for a in veh.axles.iter_mut() {
            a.phi = 1.0;
            a.psi = 0.0;
        }
        Vehicle::new(veh.body, veh.axles).unwrap()
    }

    #[test]
    fn grid_weights() {
        let g = Grid::uniform(50).unwrap();
        assert_eq!(g.n_nodes(), 51);
        assert_relative_eq!(g.dxi(), 0.02);
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert!(g.weights().iter().all(|w| *w > 0.0));
        assert!(Grid::uniform(1).is_err());
    }

    #[test]
    fn functionals_vanish_on_zero() {
        let (_, g, k) = setup(50);
        let z = DistributedField::zeros(g.n_nodes());
        assert_eq!(k.k1_functional(&z, &g).unwrap(), Vector2::zeros());
        assert_eq!(k.k2_functional(&z, &g).unwrap(), Vector2::zeros());
        assert_eq!(k.k3_functional(&z, &g).unwrap(), Vector2::zeros());
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let (_, g, k) = setup(50);
        let z = DistributedField::zeros(g.n_nodes() + 1);
        assert!(matches!(
            k.k1_functional(&z, &g),
            Err(Error::SizeMismatch { expected: 51, got: 52 })
        ));
    }

    #[test]
    fn k1_of_constant_field() {
        // Brute-force oracle: fine trapezoid grid.
        let (veh, g, k) = setup(10_000);
        let c = 0.003;
        let z = DistributedField::from_fn(&g, |_| Vector2::new(c, c));
        let f = k.k1_functional(&z, &g).unwrap();
        for i in 0..2 {
            let a = &veh.axles[i];
            assert_relative_eq!(f[i], a.fz * a.sigma * c, max_relative = 1e-8);
        }
    }

    #[test]
    fn k1_second_order_in_dxi() {
        let smooth = |x: f64| Vector2::new((3.0 * x).sin(), x * x);
        let err = |n: usize| {
            let (veh, g, k) = setup(n);
            let z = DistributedField::from_fn(&g, smooth);
            let (_, gf, kf) = setup(20_000);
            let zf = DistributedField::from_fn(&gf, smooth);
            let _ = veh;
            (k.k1_functional(&z, &g).unwrap() - kf.k1_functional(&zf, &gf).unwrap()).norm()
        };
        let ratio = err(25) / err(50);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn k2_of_unit_field() {
        let (_, g, k) = setup(10_000);
        let z = DistributedField::from_fn(&g, |_| Vector2::new(1.0, 1.0));
        let r = k.k2_functional(&z, &g).unwrap();
        assert_relative_eq!(r[0], -0.08, epsilon = 1e-9);
        assert_relative_eq!(r[1], -0.08, epsilon = 1e-9);

        let veh = no_carcass(Vehicle::reference());
        let k0 = KernelSet::new(&veh, &g);
        assert_eq!(k0.k2_functional(&z, &g).unwrap(), Vector2::zeros());
        assert_eq!(k0.k3_functional(&z, &g).unwrap(), Vector2::zeros());
    }

    #[test]
    fn k3_of_unit_field() {
        let (veh, g, k) = setup(10_000);
        let z = DistributedField::from_fn(&g, |_| Vector2::new(1.0, 1.0));
        let r = k.k3_functional(&z, &g).unwrap();
        for i in 0..2 {
            let a = &veh.axles[i];
            let expected = veh.body.vx * a.psi / a.length * a.pressure(0.0);
            assert_relative_eq!(r[i], expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn pure_transport_operator_is_bidiagonal() {
        let veh = no_carcass(Vehicle::reference());
        let g = Grid::uniform(10).unwrap();
        let k = KernelSet::new(&veh, &g);
        let a = assemble_discrete_a(&veh, &k, &g);
        let lam = veh.mats.lambda;
        for blk in 0..2 {
            let l = lam[(blk, blk)] / g.dxi();
            for r in 0..10 {
                for c in 0..10 {
                    let v = a[(blk * 10 + r, blk * 10 + c)];
                    let expected = if r == c {
                        -l
                    } else if r == c + 1 {
                        l
                    } else {
                        0.0
                    };
                    assert_relative_eq!(v, expected, epsilon = 1e-9);
                }
            }
        }
        // Cross-axle blocks vanish.
        assert_eq!(a.view((0, 10), (10, 10)).amax(), 0.0);
    }

    #[test]
    fn assembled_matrix_matches_separate_terms() {
        let (veh, g, k) = setup(50);
        let z = DistributedField::constant_state(&g, Vector2::zeros());
        let mut z = z;
        for (j, v) in z.values_mut().iter_mut().enumerate().skip(1) {
            *v = Vector2::new((j as f64).sin(), (0.3 * j as f64).cos());
        }
        let op = DiscreteOperator::new(&veh, &k, &g, None);
        let applied = op.apply(&z);
        let dz = upwind_derivative(&z, &g);
        let k3 = k.k3_functional(&z, &g).unwrap();
        let dense = op.to_dense();
        let n = g.n_intervals();
        let flat = nalgebra::DVector::from_fn(2 * n, |r, _| z.values()[r % n + 1][r / n]);
        let via_dense = dense * flat;
        for kk in 1..=n {
            let expected = -veh.mats.lambda * dz.values()[kk] + k3;
            assert_relative_eq!(applied.values()[kk], expected, max_relative = 1e-12);
            for i in 0..2 {
                assert_relative_eq!(via_dense[i * n + kk - 1], expected[i], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn sherman_morrison_matches_dense_lu() {
        let (veh, g, k) = setup(40);
        let y = Vector2::new(0.7, -1.3);
        let op = DiscreteOperator::new(&veh, &k, &g, Some(&y));
        for (i, ax) in op.axles.iter().enumerate() {
            let rhs: Vec<f64> = (0..ax.dim()).map(|j| (j as f64 * 0.37 + i as f64).cos()).collect();
            let fast = ax.solve(&rhs).unwrap();
            let lu = ax.to_dense().lu();
            let dense = lu.solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
            for (a, b) in fast.iter().zip(dense.iter()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-9, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn reference_operator_is_strictly_dissipative() {
        for n in [50, 100, 200] {
            let (veh, g, k) = setup(n);
            let omega = dissipativity_constant(&veh, &k, &g, None);
            assert!(omega > 0.0, "N = {n}: omega_h = {omega}");
        }
    }

    #[test]
    fn omega_settles_under_refinement() {
        // Upwind dissipation inflates the constant on coarse grids; it must
        // decrease monotonically with contracting increments toward a
        // positive limit.
        let w: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&n| {
                let (veh, g, k) = setup(n);
                dissipativity_constant(&veh, &k, &g, None)
            })
            .collect();
        for pair in w.windows(2) {
            assert!(pair[1] < pair[0] && pair[1] > 0.0, "{w:?}");
        }
        let steps: Vec<f64> = w.windows(2).map(|p| p[0] - p[1]).collect();
        for pair in steps.windows(2) {
            assert!(pair[1] < 0.75 * pair[0], "{w:?}");
        }
    }

    #[test]
    fn friction_source_preserves_dissipativity() {
        let (veh, g, k) = setup(50);
        let omega = dissipativity_constant(&veh, &k, &g, None);
        for y in [
            Vector2::new(0.1, -0.2),
            Vector2::new(5.0, 3.0),
            Vector2::new(-40.0, 12.0),
        ] {
            let o = dissipativity_constant(&veh, &k, &g, Some(&y));
            assert!(o >= omega * (1.0 - 1e-9), "y = {y:?}: {o} < {omega}");
        }
    }

    #[test]
    fn quadrature_reproduces_unit_pressure() {
        let (veh, g, _) = setup(50);
        for a in &veh.axles {
            let s = g.integrate(g.xi().iter().map(|&x| a.pressure(x)));
            assert!((s - 1.0).abs() < 1e-4);
        }
    }
}
