use nalgebra::{DMatrix, DVector};

use crate::image::Image;

/// Symmetric eigendecomposition, eigenvalues descending.
///
/// Each eigenvector is signed so its largest-magnitude component (first one on
/// ties) is positive.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        canonical_sign(&mut v);
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Row-major pixel vector of a grayscale image.
pub fn image_vector(img: &Image) -> DVector<f64> {
    DVector::from_iterator(img.data().len(), img.data().iter().map(|&p| f64::from(p)))
}

/// Grayscale image as a height x width matrix.
pub fn image_matrix(img: &Image) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        img.height(),
        img.width(),
        img.data().iter().map(|&p| f64::from(p)),
    )
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_signed() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals, vec![3.0, 1.0]);
        assert_eq!(vecs.column(0).as_slice(), &[0.0, 1.0]);
        assert_eq!(vecs.column(1).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
