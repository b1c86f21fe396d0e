use std::time::Instant;

use causal_geometry::catalog;
use causal_geometry::curvature::{connection, connection_homogeneity_defect, curvature, curvature_homogeneity_defect, identity_suite};

#[test]
fn pointwise_residuals_for_every_geometry() {
    for g in catalog::builtins() {
        for p in catalog::cone_points(&g, 30, 4).unwrap() {
            let c = connection(&g, &p).unwrap();
            assert!(c.contraction_residual <= 1e-9, "{} Ug {:e}", g.name, c.contraction_residual);
            assert!(c.euler_residual <= 1e-9, "{} vU {:e}", g.name, c.euler_residual);
            let k = curvature(&g, &p).unwrap();
            let r = &k.residuals;
            assert!(r.rg <= 1e-8 && r.vs <= 1e-8 && r.vr_s <= 1e-8 && r.t_s <= 1e-8 && r.t_vr <= 1e-8, "{} {r:?}", g.name);
            assert!(r.s_symmetry_defect <= 1e-9 && r.r_antisymmetry_defect <= 1e-9, "{} {r:?}", g.name);
            assert!(connection_homogeneity_defect(&g, &p).unwrap() <= 1e-9, "{}", g.name);
            assert!(curvature_homogeneity_defect(&g, &p).unwrap() <= 1e-8, "{}", g.name);
        }
    }
}

#[test]
fn identity_suite_for_every_geometry() {
    for g in catalog::builtins() {
        let pts = catalog::cone_points(&g, 100, 8).unwrap();
        let t = Instant::now();
        let rep = identity_suite(&g, &pts).unwrap();
        println!("{:<24} {:?} {:.2?}", g.name, rep.worst, t.elapsed());
        assert!(rep.worst.max() <= 1e-7, "{}: {:?}", g.name, rep.worst);
    }
}
