//! Entry-level diagnostics of the raw collocation matrix.

use knudsen::collision::LinearizedOperator;
use knudsen::velocity::VelocityGrid;
use std::sync::Arc;

fn main() {
    let grid = Arc::new(VelocityGrid::build(6.0, 16, 24).unwrap());
    let op = LinearizedOperator::assemble_unsymmetrized(grid.clone(), 1.0, 10);
    let k = op.kmat();
    let w = grid.weights();
    let n = grid.len();
    // Largest |W K - (W K)^T| entries.
    let mut worst: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (w[i] * k[(i, j)] - w[j] * k[(j, i)]).abs();
            worst.push((d, i, j));
        }
    }
    worst.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for &(d, i, j) in worst.iter().take(8) {
        let (ri, si) = grid.ring_angle(i);
        let (rj, sj) = grid.ring_angle(j);
        println!(
            "asym {d:.3e} at (ring {ri} slot {si} r={:.2}) x (ring {rj} slot {sj} r={:.2}):\
             K_ij={:.3e} K_ji={:.3e} w_i={:.2e} w_j={:.2e}",
            grid.radii()[ri],
            grid.radii()[rj],
            k[(i, j)],
            k[(j, i)],
            w[i],
            w[j]
        );
    }
}
