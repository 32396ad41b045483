use stabcert_core::lattice::{
    add_coulomb, build_magnetic_kinetic, critical_coupling, dirichlet_compress, GaugeField,
    LatticeGrid,
};

fn main() {
    let sizes: Vec<usize> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("size"))
        .collect();
    let sizes = if sizes.is_empty() { vec![10, 12, 14] } else { sizes };
    let couplings = [0.0, critical_coupling(), 1.2 * critical_coupling()];
    for &n in &sizes {
        let grid = LatticeGrid::with_extent(n, 2.5).unwrap();
        let t = std::time::Instant::now();
        let kinetic = build_magnetic_kinetic(&grid, &GaugeField::Zero).unwrap();
        for coupling in couplings {
            let h = add_coulomb(&kinetic, coupling).unwrap();
            let full = h.lowest_eigenvalue();
            let ball = dirichlet_compress(&h, 1.0).unwrap().lowest_eigenvalue();
            println!(
                "n={n:2} coupling={coupling:.4}: full={full:+.6} ball={ball:+.6} ({:.0?})",
                t.elapsed()
            );
        }
    }
}
