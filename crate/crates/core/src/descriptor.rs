//! Local octant descriptors and the Saab transform.
//!
//! Each point gets a 24-D raw descriptor: the centroids of its neighbors in
//! the eight octants around it, in local coordinates. A Saab transform (one
//! constant DC kernel plus 23 PCA-derived AC kernels) then maps it to 24
//! decorrelated filter responses.

use nalgebra::{SMatrix, SymmetricEigen};

use crate::cloud::{sub, PointCloud};
use crate::error::{Error, Result};
use crate::knn::NeighborIndex;

pub const DIM: usize = 24;
pub const AC_DIM: usize = DIM - 1;

/// Octant centroids, eight slots of (x, y, z).
///
/// Slot `7 - b` holds octant `b = 4·[x≥0] + 2·[y≥0] + [z≥0]`, so (+,+,+)
/// comes first and (−,−,−) last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDescriptor(pub [f64; DIM]);

/// Saab filter responses for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDescriptor(pub [f64; DIM]);

#[inline]
pub fn octant_slot(local: [f64; 3]) -> usize {
    let code = (usize::from(local[0] >= 0.0) << 2)
        | (usize::from(local[1] >= 0.0) << 1)
        | usize::from(local[2] >= 0.0);
    7 - code
}

/// Raw descriptor of `query`. Neighbors are summed in ascending index order.
pub fn octant_descriptor(cloud: &PointCloud, neighbors: &NeighborIndex, query: usize) -> RawDescriptor {
    let pts = cloud.points();
    let origin = pts[query];
    let mut order: Vec<u32> = neighbors.neighbors(query).to_vec();
    order.sort_unstable();

    let mut sums = [[0.0f64; 3]; 8];
    let mut counts = [0usize; 8];
    for j in order {
        let local = sub(pts[j as usize], origin);
        let slot = octant_slot(local);
        counts[slot] += 1;
        for a in 0..3 {
            sums[slot][a] += local[a];
        }
    }
    let mut out = [0.0; DIM];
    for slot in 0..8 {
        if counts[slot] > 0 {
            let n = counts[slot] as f64;
            for a in 0..3 {
                out[slot * 3 + a] = sums[slot][a] / n;
            }
        }
    }
    RawDescriptor(out)
}

pub fn raw_descriptors(cloud: &PointCloud, neighbors: &NeighborIndex) -> Vec<RawDescriptor> {
    (0..cloud.len())
        .map(|q| octant_descriptor(cloud, neighbors, q))
        .collect()
}

/// Running second-moment statistics of DC-removed descriptors.
///
/// Partial accumulators can be built independently and merged; merging in a
/// fixed order gives a deterministic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    sum: SMatrix<f64, DIM, DIM>,
    dc_energy: f64,
    count: u64,
}

impl Default for SecondMoment {
    fn default() -> Self {
        SecondMoment {
            sum: SMatrix::zeros(),
            dc_energy: 0.0,
            count: 0,
        }
    }
}

impl SecondMoment {
    pub fn add(&mut self, d: &RawDescriptor) {
        let mean = d.0.iter().sum::<f64>() / DIM as f64;
        let dc = mean * (DIM as f64).sqrt();
        self.dc_energy += dc * dc;
        let r: [f64; DIM] = d.0.map(|v| v - mean);
        for i in 0..DIM {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..DIM {
                self.sum[(i, j)] += r[i] * r[j];
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SecondMoment) {
        self.sum += other.sum;
        self.dc_energy += other.dc_energy;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn mean_matrix(&self) -> SMatrix<f64, DIM, DIM> {
        let mut m = self.sum / self.count as f64;
        for i in 0..DIM {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }
}

impl<'a> FromIterator<&'a RawDescriptor> for SecondMoment {
    fn from_iter<I: IntoIterator<Item = &'a RawDescriptor>>(iter: I) -> Self {
        let mut acc = SecondMoment::default();
        for d in iter {
            acc.add(d);
        }
        acc
    }
}

/// 24×24 orthonormal filter bank. Row 0 is the DC kernel; rows 1..24 are AC
/// kernels in descending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct SaabTransform {
    matrix: [[f64; DIM]; DIM],
    energies: [f64; DIM],
}

impl SaabTransform {
    /// Rebuilds a transform from stored parts (used by model loading).
    pub fn from_parts(matrix: [[f64; DIM]; DIM], energies: [f64; DIM]) -> Self {
        SaabTransform { matrix, energies }
    }

    pub fn matrix(&self) -> &[[f64; DIM]; DIM] {
        &self.matrix
    }

    /// Energy per kernel: mean squared DC response, then AC eigenvalues.
    pub fn energies(&self) -> &[f64; DIM] {
        &self.energies
    }

    pub fn parameter_count(&self) -> usize {
        DIM * DIM
    }

    pub fn fit(descriptors: &[RawDescriptor]) -> Result<Self> {
        Self::from_moments(&descriptors.iter().collect())
    }

    pub fn from_moments(moments: &SecondMoment) -> Result<Self> {
        if moments.count == 0 {
            return Err(Error::DegenerateSaab { rank: 0 });
        }
        let basis = ac_basis();
        let restricted: SMatrix<f64, AC_DIM, AC_DIM> =
            basis.transpose() * moments.mean_matrix() * basis;
        let eig = SymmetricEigen::new(restricted);

        let mut order: Vec<usize> = (0..AC_DIM).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let top = eig.eigenvalues[order[0]].max(0.0);
        let rank = eig
            .eigenvalues
            .iter()
            .filter(|&&l| top > f64::MIN_POSITIVE && l > top * 1e-12)
            .count();
        if rank < AC_DIM {
            return Err(Error::DegenerateSaab { rank });
        }

        let mut matrix = [[0.0; DIM]; DIM];
        let mut energies = [0.0; DIM];
        matrix[0] = [1.0 / (DIM as f64).sqrt(); DIM];
        energies[0] = moments.dc_energy / moments.count as f64;
        for (row, &k) in order.iter().enumerate() {
            let v = basis * eig.eigenvectors.column(k);
            let norm = v.norm();
            let mut kernel = [0.0; DIM];
            for i in 0..DIM {
                kernel[i] = v[i] / norm;
            }
            if let Some(first) = kernel.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    kernel.iter_mut().for_each(|x| *x = -*x);
                }
            }
            matrix[row + 1] = kernel;
            energies[row + 1] = eig.eigenvalues[k].max(0.0);
        }
        Ok(SaabTransform { matrix, energies })
    }

    pub fn apply(&self, d: &RawDescriptor) -> SpectralDescriptor {
        let mut out = [0.0; DIM];
        for (o, row) in out.iter_mut().zip(&self.matrix) {
            *o = row.iter().zip(&d.0).map(|(a, b)| a * b).sum();
        }
        SpectralDescriptor(out)
    }

    /// Maps responses back through the transpose.
    pub fn invert(&self, s: &SpectralDescriptor) -> RawDescriptor {
        let mut out = [0.0; DIM];
        for (row, &coef) in self.matrix.iter().zip(&s.0) {
            for i in 0..DIM {
                out[i] += row[i] * coef;
            }
        }
        RawDescriptor(out)
    }
}

/// Orthonormal basis (as columns) of the complement of the constant vector,
/// built by Gram-Schmidt over the standard basis.
fn ac_basis() -> SMatrix<f64, DIM, AC_DIM> {
    let dc = [1.0 / (DIM as f64).sqrt(); DIM];
    let mut kept: Vec<[f64; DIM]> = vec![dc];
    for e in 0..DIM {
        if kept.len() == DIM {
            break;
        }
        let mut v = [0.0; DIM];
        v[e] = 1.0;
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for u in &kept {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for i in 0..DIM {
                    v[i] -= dot * u[i];
                }
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.5 {
            kept.push(v.map(|x| x / n));
        }
    }
    SMatrix::from_fn(|i, j| kept[j + 1][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::knn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_descriptors(n: usize, seed: u64) -> Vec<RawDescriptor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| RawDescriptor([0.0; DIM].map(|_: f64| rng.random_range(-1.0..1.0))))
            .collect()
    }

    fn gram_error(t: &SaabTransform) -> f64 {
        let m = t.matrix();
        let mut worst: f64 = 0.0;
        for i in 0..DIM {
            for j in 0..DIM {
                let dot: f64 = (0..DIM).map(|k| m[i][k] * m[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    fn cloud_with_neighbors(local: &[[f64; 3]]) -> (PointCloud, NeighborIndex) {
        let mut pts = vec![[0.0; 3]];
        pts.extend_from_slice(local);
        let cloud = PointCloud::new(pts).unwrap();
        let k = local.len();
        let mut rows = vec![(1..=k as u32).collect::<Vec<_>>()];
        for _ in 0..k {
            rows.push((0..k as u32).collect());
        }
        (cloud, NeighborIndex::from_rows(k, rows))
    }

    #[test]
    fn single_neighbor_lands_in_first_slot() {
        let (cloud, nn) = cloud_with_neighbors(&[[0.1, 0.2, 0.3]]);
        let d = octant_descriptor(&cloud, &nn, 0);
        assert_eq!(&d.0[..3], &[0.1, 0.2, 0.3]);
        assert!(d.0[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn opposite_neighbors_fill_opposite_slots() {
        let (cloud, nn) = cloud_with_neighbors(&[[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]]);
        let d = octant_descriptor(&cloud, &nn, 0);
        assert_eq!(&d.0[..3], &[1.0, 1.0, 1.0]);
        assert_eq!(&d.0[21..], &[-1.0, -1.0, -1.0]);
        assert!(d.0[3..21].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_coordinate_counts_as_positive() {
        assert_eq!(octant_slot([0.0, 0.0, 0.0]), 0);
        assert_eq!(octant_slot([-0.1, 0.0, 0.0]), 4);
        assert_eq!(octant_slot([-1.0, -1.0, -1.0]), 7);
        assert_eq!(octant_slot([1.0, -1.0, 1.0]), 2);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cloud = PointCloud::new(
            (0..200)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
                .collect(),
        )
        .unwrap();
        let nn = knn(&cloud, 32).unwrap();
        for q in [0, 17, 199] {
            let got = octant_descriptor(&cloud, &nn, q);
            // oracle: per-octant scan by sign pattern, written independently
            let p = cloud.points()[q];
            let mut want = [0.0; DIM];
            let signs = [
                (true, true, true),
                (true, true, false),
                (true, false, true),
                (true, false, false),
                (false, true, true),
                (false, true, false),
                (false, false, true),
                (false, false, false),
            ];
            for (slot, &(sx, sy, sz)) in signs.iter().enumerate() {
                let mut idx: Vec<u32> = nn.neighbors(q).to_vec();
                idx.sort_unstable();
                let mut acc = [0.0; 3];
                let mut n = 0.0;
                for j in idx {
                    let o = cloud.points()[j as usize];
                    let l = [o[0] - p[0], o[1] - p[1], o[2] - p[2]];
                    if (l[0] >= 0.0) == sx && (l[1] >= 0.0) == sy && (l[2] >= 0.0) == sz {
                        acc[0] += l[0];
                        acc[1] += l[1];
                        acc[2] += l[2];
                        n += 1.0;
                    }
                }
                if n > 0.0 {
                    for a in 0..3 {
                        want[slot * 3 + a] = acc[a] / n;
                    }
                }
            }
            assert_eq!(got.0, want);
            // centroid norms bounded by the farthest neighbor
            let far = nn
                .neighbors(q)
                .iter()
                .map(|&j| crate::cloud::dist2(cloud.points()[j as usize], p).sqrt())
                .fold(0.0, f64::max);
            for slot in 0..8 {
                let c = &got.0[slot * 3..slot * 3 + 3];
                assert!((c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() <= far + 1e-12);
            }
        }
    }

    #[test]
    fn neighbor_order_does_not_matter() {
        let (cloud, nn) = cloud_with_neighbors(&[[0.3, -0.2, 0.1], [0.5, -0.1, 0.7], [-0.4, 0.4, 0.4]]);
        let a = octant_descriptor(&cloud, &nn, 0);
        let rows = vec![vec![3, 1, 2], vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]];
        let nn2 = NeighborIndex::from_rows(3, rows);
        assert_eq!(a, octant_descriptor(&cloud, &nn2, 0));
    }

    #[test]
    fn constant_inputs_are_rank_deficient() {
        let ds = vec![RawDescriptor([1.0; DIM]); 50];
        match SaabTransform::fit(&ds) {
            Err(Error::DegenerateSaab { rank }) => assert_eq!(rank, 0),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn partial_rank_is_reported() {
        let mut ds = Vec::new();
        for i in 0..10 {
            let mut v = [0.0; DIM];
            v[i] = 1.0 + i as f64;
            ds.push(RawDescriptor(v));
        }
        // 10 vectors c_i(e_i - 1/24) span 10 dimensions
        match SaabTransform::fit(&ds) {
            Err(Error::DegenerateSaab { rank }) => assert_eq!(rank, 10),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn scaled_standard_basis_fit_is_orthonormal() {
        let ds: Vec<_> = (0..DIM)
            .map(|i| {
                let mut v = [0.0; DIM];
                v[i] = 0.5 + 3.0 * i as f64;
                RawDescriptor(v)
            })
            .collect();
        let t = SaabTransform::fit(&ds).unwrap();
        assert!(gram_error(&t) < 1e-8);
        let c = 1.0 / (DIM as f64).sqrt();
        assert!(t.matrix()[0].iter().all(|&v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn random_fit_properties() {
        let ds = random_descriptors(500, 3);
        let t = SaabTransform::fit(&ds).unwrap();
        assert!(gram_error(&t) < 1e-8);
        let e = t.energies();
        assert!(e[1..].windows(2).all(|w| w[0] >= w[1]));
        assert!(e.iter().all(|&v| v >= 0.0));
        for row in &t.matrix()[1..] {
            let first = row.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn fit_is_order_invariant() {
        let ds = random_descriptors(300, 8);
        let mut rev = ds.clone();
        rev.reverse();
        let a = SaabTransform::fit(&ds).unwrap();
        let b = SaabTransform::fit(&rev).unwrap();
        for i in 0..DIM {
            for j in 0..DIM {
                assert!((a.matrix()[i][j] - b.matrix()[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_vector_is_pure_dc() {
        let t = SaabTransform::fit(&random_descriptors(100, 4)).unwrap();
        let out = t.apply(&RawDescriptor([1.0; DIM]));
        assert!((out.0[0] - 24f64.sqrt()).abs() < 1e-9);
        assert!(out.0[1..].iter().all(|v| v.abs() < 1e-9));
        assert_eq!(t.apply(&RawDescriptor([0.0; DIM])).0, [0.0; DIM]);
    }

    #[test]
    fn energy_preserved_and_invertible() {
        let t = SaabTransform::fit(&random_descriptors(200, 5)).unwrap();
        for d in random_descriptors(100, 6) {
            let s = t.apply(&d);
            let n_in = d.0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let n_out = s.0.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n_in - n_out).abs() < 1e-8);
            let back = t.invert(&s);
            let err: f64 = back.0.iter().zip(&d.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-8);
        }
    }

    #[test]
    fn merged_moments_match_single_pass() {
        let ds = random_descriptors(90, 12);
        let whole: SecondMoment = ds.iter().collect();
        let mut merged: SecondMoment = ds[..40].iter().collect();
        merged.merge(&ds[40..].iter().collect());
        assert_eq!(whole.count(), merged.count());
        let a = SaabTransform::from_moments(&whole).unwrap();
        let b = SaabTransform::from_moments(&merged).unwrap();
        for i in 0..DIM {
            for j in 0..DIM {
                assert!((a.matrix()[i][j] - b.matrix()[i][j]).abs() < 1e-9);
            }
        }
    }
}
