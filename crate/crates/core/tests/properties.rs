use correspondence::degree::{degree, twice_degree};
use correspondence::diagram::{
    conservation_residual, load_diagram, loop_count, save_diagram, validate_diagram, Diagram, ExternalLine, InternalLine,
    KConfiguration, Orientation, ParticleSpec,
};
use correspondence::displacement::{gauge_basis, GaugeProjector};
use correspondence::experiment::{emit_plotdata, parse_plotdata, Cell, Table};
use correspondence::fixtures::{pole_diagram, pole_kinematics, random_two_to_two};
use correspondence::kinematics::FourVector;
use correspondence::landau::{solve_landau, SolverOptions};
use correspondence::classical::propagate_free;
use correspondence::transform::{forward_t, hefer_factor, MuForm, ScatteringModel, TransformOptions};
use correspondence::wavepacket::{evaluate_position, Bump, MomentumWavePacket};
use num_complex::Complex64 as C;
use num_rational::Rational64;
use proptest::prelude::*;

fn four() -> impl Strategy<Value = FourVector> {
    prop::array::uniform4(-3.0..3.0f64).prop_map(|[t, x, y, z]| FourVector::new(t, x, y, z))
}

fn particle(mass: f64, label: String) -> ParticleSpec {
    ParticleSpec { mass, label }
}

/// Connected diagram: a random spanning tree plus extra lines, two external
/// lines per vertex.
fn diagram() -> impl Strategy<Value = Diagram> {
    (1usize..6)
        .prop_flat_map(|nv| {
            let parents: Vec<_> = (1..nv).map(|v| 0..v).collect();
            (Just(nv), parents, prop::collection::vec((0..nv, 0..nv), 0..4), prop::collection::vec(0.1..5.0f64, 20))
        })
        .prop_map(|(nv, parents, extra, masses)| {
            let mut internal = Vec::new();
            for (child, parent) in parents.into_iter().enumerate() {
                internal.push((parent as u32, child as u32 + 1));
            }
            internal.extend(extra.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a as u32, b as u32)));
            let mut mi = masses.into_iter().cycle();
            Diagram {
                vertices: (0..nv as u32).collect(),
                internal: internal
                    .into_iter()
                    .enumerate()
                    .map(|(i, (from, to))| InternalLine { from, to, particle: particle(mi.next().unwrap(), format!("l{i}")) })
                    .collect(),
                external: (0..nv as u32)
                    .flat_map(|v| [(v, Orientation::Initial), (v, Orientation::Final)])
                    .map(|(vertex, orientation)| ExternalLine {
                        vertex,
                        particle: particle(mi.next().unwrap(), format!("e{vertex}")),
                        orientation,
                    })
                    .collect(),
                allow_leaves: false,
            }
        })
}

/// Cycle rank by union-find: lines that close a cycle.
fn independent_cycles(d: &Diagram) -> usize {
    let mut parent: Vec<usize> = (0..d.vertices.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut closing = 0;
    for l in &d.internal {
        let (a, b) = (root(&mut parent, l.from as usize), root(&mut parent, l.to as usize));
        if a == b {
            closing += 1;
        } else {
            parent[a] = b;
        }
    }
    closing
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degree_forms_agree(nl in 0u32..40, nv in 1u32..40) {
        let d = degree(nl, nv).d;
        prop_assert_eq!(d * 2, Rational64::from_integer(twice_degree(nl, nv)));
    }

    #[test]
    fn diagram_persistence_round_trips(d in diagram()) {
        prop_assert!(validate_diagram(&d).is_valid());
        let bytes = save_diagram(&d);
        let back = load_diagram(&bytes).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(save_diagram(&back), bytes);
    }

    #[test]
    fn loop_count_is_cycle_rank(d in diagram()) {
        let l = loop_count(&d).unwrap();
        prop_assert_eq!(l, d.internal.len() + 1 - d.vertices.len());
        prop_assert_eq!(l, independent_cycles(&d));
        prop_assert_eq!(validate_diagram(&d).loops, Some(l));
    }

    #[test]
    fn kconfiguration_json_round_trips(k in prop::collection::vec(four(), 0..8)) {
        let k = KConfiguration::new(k);
        prop_assert_eq!(KConfiguration::from_json(&k.to_json()).unwrap(), k);
    }

    #[test]
    fn conservation_residual_is_linear(
        k1 in prop::collection::vec(four(), 6),
        k2 in prop::collection::vec(four(), 6),
        q1 in four(),
        q2 in four(),
        a in -2.0..2.0f64,
    ) {
        let d = pole_diagram(1.0, 1.5);
        let r = |k: &[FourVector], q: FourVector| conservation_residual(&d, &KConfiguration::new(k.to_vec()), &[q]).unwrap();
        let mix: Vec<FourVector> = k1.iter().zip(&k2).map(|(&x, &y)| x + a * y).collect();
        let lhs = r(&mix, q1 + a * q2);
        let (r1, r2) = (r(&k1, q1), r(&k2, q2));
        for v in 0..2 {
            prop_assert!((lhs[v] - (r1[v] + a * r2[v])).euclidean_norm() < 1e-12);
        }
    }

    #[test]
    fn realizations_survive_translation_and_scaling(seed in 0u64..200, a in four(), lambda in 0.1..10.0f64) {
        let d = pole_diagram(1.0, 1.5);
        let k = pole_kinematics(1.0, 1.5, seed);
        let r = solve_landau(&d, &k, &SolverOptions::default()).unwrap().realization.unwrap();
        prop_assert!(r.translated(a).satisfies(&d, &k));
        prop_assert!(r.scaled(lambda).satisfies(&d, &k));
    }

    #[test]
    fn gauge_projector_is_idempotent(seed in 0u64..500, u in prop::collection::vec(four(), 4)) {
        let k = random_two_to_two(1.0, seed);
        let p = GaugeProjector::new(&gauge_basis(&k)).unwrap();
        prop_assert_eq!(p.reduced_dimension(), 3 * k.len() - 4);
        let u = correspondence::displacement::DisplacementVector { components: u };
        let once = p.project(&u);
        let twice = p.project(&once);
        for (x, y) in once.flatten().iter().zip(twice.flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hefer_identity(
        coefs in prop::collection::vec((-1.0..1.0f64, 0u32..4, 0u32..4), 1..6),
        z in prop::array::uniform8(-1.0..1.0f64),
    ) {
        let terms: Vec<(f64, Vec<u32>)> = coefs.into_iter().filter(|t| t.1 + t.2 > 0).map(|(c, a, b)| (c, vec![a, b])).collect();
        let mu = MuForm { l: 2, terms };
        let q = [C::new(z[0], z[1]), C::new(z[2], z[3])];
        let q2 = [C::new(z[4], z[5]), C::new(z[6], z[7])];
        let rho = hefer_factor(&mu, &q, &q2);
        let rhs: C = rho.iter().zip(q.iter().zip(&q2)).map(|(r, (a, b))| r * (a - b)).sum();
        prop_assert!((mu.eval(&q) - mu.eval(&q2) - rhs).norm() < 1e-12);
    }

    #[test]
    fn packet_is_conjugate_symmetric(x in four(), pbar in prop::array::uniform3(-0.3..0.3f64)) {
        let packet = MomentumWavePacket {
            mass: 1.0,
            pbar: FourVector::on_shell(1.0, pbar),
            gamma: 0.0,
            chi: Bump::new(0.5, 1.5),
            spatial_dim: 3,
        };
        let a = evaluate_position(&packet, x, 1.0).unwrap();
        let b = evaluate_position(&packet, -x, 1.0).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-10 * a.norm().max(1e-12));
    }

    #[test]
    fn forward_transform_is_conjugate_symmetric(v in -20.0..20.0f64, r in 0.0..2.0f64) {
        let m = ScatteringModel::bump(1, 0.8, 1.8);
        let mu = MuForm::quadratic(&[1.0]);
        let o = TransformOptions::default();
        let a = forward_t(&m, &mu, &[v], r, &o).unwrap();
        let b = forward_t(&m, &mu, &[-v], r, &o).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-13);
    }

    #[test]
    fn free_propagation_is_affine(
        x in prop::array::uniform3(-5.0..5.0f64),
        p in prop::array::uniform3(-1.0..1.0f64),
        t1 in 0.0..50.0f64,
        t2 in 0.0..50.0f64,
        m in 0.1..5.0f64,
    ) {
        let direct = propagate_free(x, p, t1 + t2, m);
        let stepped = propagate_free(propagate_free(x, p, t1, m), p, t2, m);
        for i in 0..3 {
            prop_assert!((direct[i] - stepped[i]).abs() < 1e-12 * (1.0 + direct[i].abs()));
            prop_assert!((direct[i] - (x[i] + (t1 + t2) * p[i] / m)).abs() < 1e-12 * (1.0 + direct[i].abs()));
        }
    }

    #[test]
    fn plotdata_round_trips(rows in prop::collection::vec((any::<f64>(), "[a-z ,\"]{0,8}"), 0..10)) {
        let mut t = Table::new(&["value", "label"]);
        for (v, s) in &rows {
            t.push(vec![Cell::Num(*v), Cell::Text(s.clone())]);
        }
        let back = parse_plotdata(&emit_plotdata(&t)).unwrap();
        prop_assert_eq!(&back.header, &t.header);
        prop_assert_eq!(back.rows.len(), t.rows.len());
        for (a, b) in back.rows.iter().zip(&t.rows) {
            match (&a[0], &b[0]) {
                (Cell::Num(x), Cell::Num(y)) => prop_assert!(x == y || (x.is_nan() && y.is_nan())),
                _ => prop_assert!(false, "numeric column lost"),
            }
            prop_assert_eq!(&a[1], &b[1]);
        }
    }
}
