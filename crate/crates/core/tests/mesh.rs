use approx::assert_relative_eq;
use porous_opt::mesh::{
    read_triangle_mesh, structured_rectangle, structured_unit_square, write_triangle_mesh, BarycentricDualMesh,
    DiamondDualMesh,
};
use porous_opt::verify::operator_identity_suite;
use proptest::prelude::*;

#[test]
fn triangle_files_round_trip() {
    let mesh = structured_rectangle(3, 5, [0.0, -1.0], [2.0, 1.0])
        .unwrap()
        .refine_uniform()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("rect");
    write_triangle_mesh(&mesh, &base).unwrap();
    let back = read_triangle_mesh(&base).unwrap();
    assert_eq!(back.triangles(), mesh.triangles());
    assert_eq!(back.vertices(), mesh.vertices());
    assert_relative_eq!(back.domain_area(), 4.0, epsilon = 1e-14);
}

#[test]
fn missing_mesh_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_triangle_mesh(&dir.path().join("absent")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dual_meshes_tile_the_domain(nx in 1usize..10, ny in 1usize..10) {
        let mesh = structured_rectangle(nx, ny, [0.0, 0.0], [1.0, 2.0]).unwrap();
        prop_assert_eq!(mesh.n_edges() + 1, mesh.n_vertices() + mesh.n_triangles());
        prop_assert!((DiamondDualMesh::new(&mesh).total_area() - 2.0).abs() < 1e-12);
        prop_assert!((BarycentricDualMesh::new(&mesh).total_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn operator_identities_hold_for_any_seed(n in 2usize..7, seed in any::<u64>()) {
        let mesh = structured_unit_square(n).unwrap();
        let report = operator_identity_suite(&mesh, 5, seed).unwrap();
        prop_assert!(report.passed(1e-12), "{:?}", report);
        prop_assert!(report.contraction_ratio <= 1.0 + 1e-14);
    }
}
