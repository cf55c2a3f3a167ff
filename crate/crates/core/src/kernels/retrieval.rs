use ndarray::ArrayView2;

/// Fraction of queries whose paired target (same row) is among the `k`
/// most cosine-similar targets. Ties go to the lower target index.
pub fn recall_at_k(queries: ArrayView2<f64>, targets: ArrayView2<f64>, k: usize) -> f64 {
    let n = queries.nrows().min(targets.nrows());
    if n == 0 || k == 0 {
        return 0.0;
    }
    let norm = |r: ndarray::ArrayView1<f64>| r.dot(&r).sqrt();
    let tnorm: Vec<f64> = targets.rows().into_iter().take(n).map(norm).collect();
    let cos = |i: usize, j: usize| {
        let den = norm(queries.row(i)) * tnorm[j];
        if den > 0.0 {
            queries.row(i).dot(&targets.row(j)) / den
        } else {
            0.0
        }
    };
    let hits = (0..n)
        .filter(|&i| {
            let own = cos(i, i);
            let ahead = (0..n).filter(|&j| j != i && (cos(i, j) > own || (cos(i, j) == own && j < i))).count();
            ahead < k
        })
        .count();
    hits as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{s, Array2};

    #[test]
    fn identical_targets_recall_everything() {
        let q = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 + 1.0);
        assert_eq!(recall_at_k(q.view(), q.view(), 1), 1.0);
    }

    #[test]
    fn reversed_orthonormal_targets_recall_nothing() {
        let q = Array2::<f64>::eye(4);
        let t = q.slice(s![..;-1, ..]).to_owned();
        assert_eq!(recall_at_k(q.view(), t.view(), 1), 0.0);
        assert_eq!(recall_at_k(q.view(), t.view(), 4), 1.0);
    }

    #[test]
    fn ties_favour_lower_index() {
        // All targets identical: query i ranks behind the i targets before it.
        let q = Array2::<f64>::ones((4, 2));
        assert_eq!(recall_at_k(q.view(), q.view(), 1), 0.25);
        assert_eq!(recall_at_k(q.view(), q.view(), 2), 0.5);
    }
}
