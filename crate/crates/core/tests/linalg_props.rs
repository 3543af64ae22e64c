use std::sync::Arc;

use blocksolve::linalg::{dot, BlockLinearMap, BlockPartition, BlockVector, DenseMatrix};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..6)
}

/// Block dims, row count, row-major map data, two domain vectors and one
/// range vector.
type Case = (Vec<usize>, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

fn map_and_vectors() -> impl Strategy<Value = Case> {
    (dims(), 1usize..6).prop_flat_map(|(d, rows)| {
        let total: usize = d.iter().sum();
        (
            Just(d),
            Just(rows),
            prop::collection::vec(-3.0f64..3.0, rows * total),
            prop::collection::vec(-3.0f64..3.0, total),
            prop::collection::vec(-3.0f64..3.0, total),
            prop::collection::vec(-3.0f64..3.0, rows),
        )
    })
}

fn build(d: &[usize], rows: usize, data: Vec<f64>) -> (Arc<BlockPartition>, BlockLinearMap) {
    let part = Arc::new(BlockPartition::new(d.to_vec()).unwrap());
    let total = part.total_dim();
    let m = DenseMatrix::from_row_major(rows, total, data).unwrap();
    let map = BlockLinearMap::from_dense(part.clone(), &m).unwrap();
    (part, map)
}

proptest! {
    #[test]
    fn partition_ranges_tile_the_vector(d in dims()) {
        let p = BlockPartition::new(d.clone()).unwrap();
        let mut next = 0;
        for (i, &di) in d.iter().enumerate() {
            let r = p.range(i);
            prop_assert_eq!(r.start, next);
            prop_assert_eq!(r.len(), di);
            next = r.end;
        }
        prop_assert_eq!(next, p.total_dim());
    }

    #[test]
    fn block_map_is_linear((d, rows, data, u, v, _) in map_and_vectors(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (part, map) = build(&d, rows, data);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = map.apply(&BlockVector::from_vec(part.clone(), mix).unwrap()).unwrap();
        let au = map.apply(&BlockVector::from_vec(part.clone(), u).unwrap()).unwrap();
        let av = map.apply(&BlockVector::from_vec(part, v).unwrap()).unwrap();
        for k in 0..rows {
            prop_assert!((lhs[k] - (a * au[k] + b * av[k])).abs() <= 1e-10);
        }
    }

    #[test]
    fn adjoint_identity((d, rows, data, u, _, w) in map_and_vectors()) {
        let (part, map) = build(&d, rows, data);
        let au = map.apply(&BlockVector::from_vec(part, u.clone()).unwrap()).unwrap();
        let mut atw = vec![0.0; u.len()];
        map.t_apply_acc(&w, &mut atw);
        let lhs = dot(&au, &w);
        let rhs = dot(&u, &atw);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn block_sum_equals_full_apply((d, rows, data, u, _, w) in map_and_vectors()) {
        let (part, map) = build(&d, rows, data);
        let full = map.apply(&BlockVector::from_vec(part.clone(), u.clone()).unwrap()).unwrap();
        let mut acc = vec![0.0; rows];
        for i in 0..part.num_blocks() {
            map.apply_block_acc(i, &u[part.range(i)], &mut acc);
            let adj = map.apply_adjoint_block(i, &w).unwrap();
            let mut atw = vec![0.0; u.len()];
            map.t_apply_acc(&w, &mut atw);
            for (a, b) in adj.iter().zip(&atw[part.range(i)]) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        for k in 0..rows {
            prop_assert!((acc[k] - full[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn block_norm_bounds_block_action((d, rows, data, u, _, _) in map_and_vectors()) {
        let (part, map) = build(&d, rows, data);
        for i in 0..part.num_blocks() {
            let ui = &u[part.range(i)];
            let mut out = vec![0.0; rows];
            map.apply_block_acc(i, ui, &mut out);
            let lhs = dot(&out, &out);
            let rhs = map.spectral_norm_sq(i).unwrap() * dot(ui, ui);
            prop_assert!(lhs <= rhs * (1.0 + 1e-8) + 1e-12);
        }
    }
}

#[test]
fn rejects_mismatched_shapes() {
    assert!(BlockPartition::new(vec![2, 0]).is_err());
    let part = Arc::new(BlockPartition::new(vec![2, 1]).unwrap());
    assert!(BlockVector::from_vec(part.clone(), vec![1.0; 4]).is_err());
    let m = DenseMatrix::zeros(2, 4);
    assert!(BlockLinearMap::from_dense(part, &m).is_err());
}
