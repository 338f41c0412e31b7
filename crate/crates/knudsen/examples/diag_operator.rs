//! Assembly diagnostics for the collocation operator.

use knudsen::collision::{collision_frequency, LinearizedOperator};
use knudsen::velocity::VelocityGrid;
use std::sync::Arc;

fn main() {
    let grid = Arc::new(VelocityGrid::build(6.0, 16, 24).unwrap());
    for sym in [false, true] {
        let op = if sym {
            LinearizedOperator::assemble_with_omega(grid.clone(), 1.0, 10)
        } else {
            LinearizedOperator::assemble_unsymmetrized(grid.clone(), 1.0, 10)
        };
        println!("--- symmetrize = {sym} ---");
        for (i, psi) in op.psi().iter().enumerate() {
            println!("||L psi_{i}|| = {:.3e}", grid.norm(&op.apply_l(psi)));
        }
        let lpsi0 = op.apply_l(&op.psi()[1].clone());
        let mut worst: Vec<(f64, usize)> = lpsi0
            .iter()
            .enumerate()
            .map(|(k, &x)| (x.abs(), k))
            .collect();
        worst.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for &(mag, k) in worst.iter().take(3) {
            let (ring, slot) = grid.ring_angle(k);
            println!(
                "  node {k} ring {ring} slot {slot} r={:.3}: |L psi1| = {mag:.3e}",
                grid.radii()[ring]
            );
        }
        let kpsi0 = op.apply_k(&op.psi()[0].clone());
        for ring in [0usize, 8, 15] {
            let i = grid.node_index(ring, 0);
            let nu = collision_frequency(grid.nodes()[i], 1.0);
            println!(
                "ring {ring}: K[psi0]/psi0 = {:.8}, nu_acc = {:.8}, nu_grid = {:.8}",
                kpsi0[i] / op.psi()[0][i],
                nu,
                op.nu()[i]
            );
        }
    }
}
