use causal_geometry::catalog::{self, DefiningFunction};
use causal_geometry::oracle::christoffel_oracle;
use causal_geometry::pipeline::{values, values2, Series};

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

fn check(g: &DefiningFunction, count: usize, seed: u64) -> (f64, f64, f64) {
    let metric = g.metric.as_ref().expect("quadratic entry");
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for p in catalog::cone_points(g, count, seed).unwrap() {
        let lc = christoffel_oracle(metric, &p.x).unwrap();
        let s = Series::new(&g.g, &p, 2, 4).unwrap();
        let n = p.dim();
        let u = values(&s.u);
        let want_u = lc.geodesic_acceleration(&p.v);
        let su = want_u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for a in 0..n {
            worst.0 = worst.0.max(rel(u[a], want_u[a], su));
        }
        let uu = values2(&s.uu);
        for b in 0..n {
            let mut eb = vec![0.0; n];
            eb[b] = 1.0;
            let want = lc.gamma_apply(&eb, &p.v);
            for a in 0..n {
                worst.1 = worst.1.max(rel(uu[b][a], want[a], 1.0));
            }
        }
        let st = values2(&s.tidal().unwrap());
        let want_s = lc.tidal_matrix(&p.v);
        let ss = want_s.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for a in 0..n {
            for b in 0..n {
                worst.2 = worst.2.max(rel(st[a][b], want_s[a][b], ss));
            }
        }
    }
    worst
}

#[test]
fn quadratic_metrics_match_levi_civita() {
    for g in [catalog::minkowski4(), catalog::kapadia(), catalog::diag_poly(), catalog::frw_like()] {
        let (u, uu, s) = check(&g, 100, 7);
        assert!(u <= 1e-8 && uu <= 1e-8 && s <= 1e-8, "{}: u {u:e} U {uu:e} S {s:e}", g.name);
    }
}
