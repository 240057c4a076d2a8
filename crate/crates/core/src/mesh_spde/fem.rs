use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::scalar::Real;

use super::mesh::{orient, Mesh};

/// Lumped mass and stiffness matrices of piecewise-linear elements.
#[derive(Debug, Clone)]
pub struct FemMatrices<T> {
    /// Diagonal of the lumped mass matrix.
    pub c_diag: Vec<T>,
    /// Lumped mass matrix `C` (diagonal).
    pub c: CscMatrix<T>,
    /// Stiffness matrix `G`.
    pub g: CscMatrix<T>,
}

/// Assembles `C` (node entry = adjacent triangle area / 3) and `G`.
pub fn fem_matrices<T: Real>(mesh: &Mesh<T>) -> Result<FemMatrices<T>> {
    let m = mesh.n_nodes();
    let mut c_diag = vec![0.0f64; m];
    let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(9 * mesh.n_triangles());
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let p = t.map(|v| mesh.node_f64(v));
        let twice_area = orient(p[0], p[1], p[2]);
        if !(twice_area > 0.0) {
            return Err(Error::Geometry(format!("triangle {ti} has non-positive area")));
        }
        let area = 0.5 * twice_area;
        // Edge opposite vertex k, rotated: gradient of basis k times 2A.
        let grad: [[f64; 2]; 3] = std::array::from_fn(|k| {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            [a[1] - b[1], b[0] - a[0]]
        });
        for i in 0..3 {
            c_diag[t[i]] += area / 3.0;
            for j in 0..3 {
                let v = (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]) / (4.0 * area);
                trip.push((t[i], t[j], T::lit(v)));
            }
        }
    }
    if let Some(i) = c_diag.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::Geometry(format!("node {i} belongs to no triangle")));
    }
    let c_diag: Vec<T> = c_diag.into_iter().map(T::lit).collect();
    Ok(FemMatrices {
        c: CscMatrix::from_diagonal(&c_diag),
        c_diag,
        g: CscMatrix::from_triplets(m, m, &trip),
    })
}
