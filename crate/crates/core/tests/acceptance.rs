//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release --test acceptance`.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use correspondence::classical::{correspondence_compare, region_probability, AxisProfile, PhaseSpaceDensity, COMPARISON_TOL};
use correspondence::degree::degree;
use correspondence::diagram::save_diagram;
use correspondence::displacement::{compute_u, gauge_basis, normality_check, surface_tangents, GaugeProjector, ReducedU};
use correspondence::experiment::{run, ExperimentKind, ExperimentSpec};
use correspondence::fit::{fit_falloff, fit_falloff_with_errors, geometric_grid, FitKind, FitOptions};
use correspondence::fixtures::{pole_diagram, pole_kinematics, pole_kinematics_shifted};
use correspondence::kinematics::FourVector;
use correspondence::landau::{channel_momentum, sample_surface, solve_landau, SolverOptions, Status};
use correspondence::transform::{
    boundary_value, cone_split, hefer_factor, inverse_f, sample_t0, split_f, ConeOptions, HoleSpec, MuForm, ScatteringModel,
    TransformOptions,
};
use correspondence::wavepacket::{contour_certificate, falloff_fit, oncone_limit_check, MomentumWavePacket};
use num_complex::Complex64 as C;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const M_C: f64 = 1.5;

fn degree_table() -> Outcome {
    let cases = [((1, 2), Rational64::from_integer(-1)), ((3, 3), Rational64::from_integer(0)), ((2, 2), Rational64::new(1, 2))];
    let bad: Vec<_> = cases.iter().filter(|((nl, nv), d)| degree(*nl, *nv).d != *d).collect();
    check(bad.is_empty(), format!("{} of 3 exact", 3 - bad.len()))
}

fn landau_vs_oracle() -> Outcome {
    let d = pole_diagram(1.0, M_C);
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = 0;
    for i in 0..100u64 {
        let on = i < 50;
        let k = if on {
            pole_kinematics(1.0, M_C, 1000 + i)
        } else {
            let delta = rng.random_range(0.05..1.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
            pole_kinematics_shifted(1.0, M_C, delta, 1000 + i)
        };
        let status = solve_landau(&d, &k, &opts).map_err(|e| e.to_string())?.status;
        if status == if on { Status::Feasible } else { Status::Infeasible } {
            agree += 1;
        }
    }
    check(agree == 100, format!("{agree}/100 agree"))
}

fn surface_round_trip() -> Outcome {
    let d = pole_diagram(1.0, M_C);
    let s = sample_surface(&d, 100, 3).map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut feasible = 0;
    for k in &s.samples {
        worst = worst.max((channel_momentum(&d, k, 0).lorentz_square() - M_C * M_C).abs());
        if solve_landau(&d, k, &opts).map_err(|e| e.to_string())?.feasible {
            feasible += 1;
        }
    }
    check(
        s.samples.len() == 100 && worst < 1e-8 && feasible == 100,
        format!("{} samples, max |s − m²| {worst:.1e}, {feasible} re-solved feasible", s.samples.len()),
    )
}

fn normality() -> Outcome {
    let d = pole_diagram(1.0, M_C);
    let k = pole_kinematics(1.0, M_C, 11);
    let res = solve_landau(&d, &k, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let r = res.realization.ok_or("pole point not realized")?;
    let tangents = surface_tangents(&d, &k, &r, 20, 4).map_err(|e| e.to_string())?;
    let basis = gauge_basis(&k);
    let mut worst: f64 = 0.0;
    for g in &basis.generators {
        worst = worst.max(normality_check(g, &tangents).map_err(|e| e.to_string())?);
    }
    let p = GaugeProjector::new(&basis).map_err(|e| e.to_string())?;
    let reduced_u = p.lift(&p.reduce(&compute_u(&r, &d)));
    worst = worst.max(normality_check(&reduced_u, &tangents).map_err(|e| e.to_string())?);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exceed = 0;
    for _ in 0..100 {
        let coords: Vec<f64> = (0..p.reduced_dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dir = p.lift(&ReducedU { coordinates: coords, fingerprint: String::new() });
        if normality_check(&dir, &tangents).map_err(|e| e.to_string())? > 0.1 {
            exceed += 1;
        }
    }
    check(worst <= 1e-5 && exceed >= 95, format!("max pairing {worst:.1e}, random directions above 0.1: {exceed}/100"))
}

fn rest_packet(gamma: f64) -> MomentumWavePacket {
    MomentumWavePacket::at_rest(1.0, 0.8, 3.0, gamma)
}

fn oncone_exponent() -> Outcome {
    let p = rest_packet(0.0);
    let v = FourVector::new(1.0, 0.0, 0.0, 0.0);
    let taus = geometric_grid(20.0, 200.0, 12);
    let good = oncone_limit_check(&p, v, &taus, 1.5).map_err(|e| e.to_string())?;
    let bad = oncone_limit_check(&p, v, &taus, 2.0 / 3.0).map_err(|e| e.to_string())?;
    let run = falloff_fit(&p, v, &taus, 0.0).map_err(|e| e.to_string())?;
    let power = run.fit.exponent_or_rate;
    check(
        good.converged && !bad.converged && run.fit.kind == FitKind::Power && (power - 1.5).abs() <= 0.1,
        format!(
            "3/2: error {:.3} ({}), 2/3: error {:.3} ({}), fitted power {power:.3}",
            good.final_error,
            if good.converged { "converged" } else { "diverged" },
            bad.final_error,
            if bad.converged { "converged" } else { "diverged" },
        ),
    )
}

fn offcone_decay() -> Outcome {
    let p = rest_packet(0.0);
    let u = FourVector::new(1.0, 1.5, 0.0, 0.0);
    let taus = geometric_grid(10.0, 150.0, 24);
    let run = falloff_fit(&p, u, &taus, 0.0).map_err(|e| e.to_string())?;
    let by_100 = run.fit.windowed.iter().filter(|(t, _)| *t <= 110.0).map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    // off the line through the packet momentum, inside the velocity cone
    let w = FourVector::new(1.0, 0.3, 0.0, 0.0);
    let mut alphas = Vec::new();
    for g in [0.1, 0.2] {
        let r = falloff_fit(&p, w, &taus, g).map_err(|e| e.to_string())?;
        if r.fit.kind != FitKind::Exponential {
            return Err(format!("gamma {g}: kind {:?}", r.fit.kind));
        }
        alphas.push(r.fit.alpha.unwrap_or(0.0));
    }
    let spread = (alphas[0] - alphas[1]).abs() / alphas[0].max(alphas[1]);
    check(
        run.fit.kind == FitKind::Superpoly && by_100 > 6.0 && alphas.iter().all(|&a| a > 0.0) && spread <= 0.2,
        format!(
            "gamma 0: {:?}, local exponent {by_100:.2} by tau 100; alpha {:.4} / {:.4}, spread {:.0}%",
            run.fit.kind,
            alphas[0],
            alphas[1],
            100.0 * spread
        ),
    )
}

fn certificates() -> Outcome {
    let taus = geometric_grid(10.0, 150.0, 16);
    let mut granted = 0;
    let mut worst = f64::INFINITY;
    'outer: for g in [0.1, 0.2] {
        for ux in [0.5, 1.0, 1.5, 2.0, 3.0] {
            for alpha in [0.02, 0.05] {
                let p = rest_packet(g);
                let u = FourVector::new(1.0, ux, 0.0, 0.0);
                let Ok(c) = contour_certificate(&p, u, alpha) else { continue };
                let run = falloff_fit(&p, u, &taus, g).map_err(|e| e.to_string())?;
                let measured = run.fit.rate();
                worst = worst.min(measured / c.rate);
                if measured < 0.9 * c.rate {
                    return Err(format!("u_x {ux}, gamma {g}, alpha {alpha}: measured {measured:.4} < 0.9 × {:.4}", c.rate));
                }
                granted += 1;
                if granted == 10 {
                    break 'outer;
                }
            }
        }
    }
    check(granted == 10, format!("{granted} certificates, smallest measured/bound {worst:.2}"))
}

fn transform_identities() -> Outcome {
    let o = TransformOptions::default();
    let m = ScatteringModel::bump(1, 0.8, 1.8);
    let mu = MuForm::quadratic(&[1.0]);
    let tab = sample_t0(&m, &mu, &o).map_err(|e| e.to_string())?;
    let mut round: f64 = 0.0;
    for i in 0..=80 {
        let q = -2.0 + 4.0 * i as f64 / 80.0;
        round = round.max((inverse_f(&tab, &[q]).value - m.eval(&[q])).norm());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut hefer: f64 = 0.0;
    for trial in 0..1000 {
        let l = 1 + trial % 2;
        let mut terms = Vec::new();
        for _ in 0..5 {
            let e: Vec<u32> = (0..l).map(|_| rng.random_range(0..=3u32)).collect();
            if e.iter().sum::<u32>() > 0 {
                terms.push((rng.random_range(-1.0..1.0), e));
            }
        }
        let mu = MuForm { l, terms };
        let mut z = || C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let q: Vec<C> = (0..l).map(|_| z()).collect();
        let q2: Vec<C> = (0..l).map(|_| z()).collect();
        let rho = hefer_factor(&mu, &q, &q2);
        let rhs: C = rho.iter().zip(q.iter().zip(&q2)).map(|(r, (a, b))| r * (a - b)).sum();
        hefer = hefer.max((mu.eval(&q) - mu.eval(&q2) - rhs).norm());
    }

    let mut split: f64 = 0.0;
    for x in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        let s = split_f(&m, &mu, 0.5, &[C::new(x, 0.0)], &o).map_err(|e| e.to_string())?;
        split = split.max((s.total() - inverse_f(&tab, &[x]).value).norm());
        let z = C::new(x, 0.05);
        let s = split_f(&m, &mu, 0.5, &[z], &o).map_err(|e| e.to_string())?;
        split = split.max((s.total() - m.eval_complex(&[z]).ok_or("no continuation")?).norm());
    }

    let pole = ScatteringModel::pole(0.3, 0.05);
    let t = |v: &[f64]| pole.closed_form_t0(v).unwrap();
    let hole = HoleSpec { center: vec![1.0], theta: 0.3 };
    let co = ConeOptions { bandwidth: 2.0, ..Default::default() };
    let mut iff = true;
    for im in [-0.3, -0.1, 0.1, 0.3] {
        let s = cone_split(&t, 1, &hole, &[C::new(0.1, im)], &co).map_err(|e| e.to_string())?;
        iff &= s.convergent == (im > 0.0);
    }
    let mut bv: f64 = 0.0;
    for q in [-0.5, 0.0, 0.25, 0.3, 0.35, 0.5] {
        let b = boundary_value(&t, 1, &hole, &[q], 1e-5, &co).map_err(|e| e.to_string())?;
        bv = bv.max((b - pole.eval(&[q])).norm());
    }
    check(
        round <= 1e-6 && hefer <= 1e-12 && split <= 1e-5 && iff && bv <= 1e-3,
        format!(
            "round trip {round:.1e}, Hefer {hefer:.1e}, split {split:.1e}, cone iff {iff}, boundary value {bv:.1e}"
        ),
    )
}

fn correspondence() -> Outcome {
    // on-cone: classical probability against twice the amplitude exponent
    let p = rest_packet(0.0);
    let taus = geometric_grid(20.0, 200.0, 10);
    let quantum = falloff_fit(&p, FourVector::new(1.0, 0.0, 0.0, 0.0), &taus, 0.0).map_err(|e| e.to_string())?;
    let probs: Vec<f64> = taus
        .iter()
        .map(|&t| {
            let rho = PhaseSpaceDensity::from_packet(&p, t, [AxisProfile::Gaussian { sigma: 1.0 }; 3]);
            region_probability(&rho, [0.0; 3], 1.0, t, 20_000, 9).map(|e| e.probability)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let classical = fit_falloff(&taus, &probs, 0.0, &FitOptions::default()).map_err(|e| e.to_string())?;
    let ce = classical.exponent_or_rate;
    let qe = 2.0 * quantum.fit.exponent_or_rate;
    let on_ok = classical.kind == FitKind::Power && (ce - 3.0).abs() <= 0.2 && (ce - qe).abs() <= 0.2;

    // off-cone at gamma = 0.1
    let g = 0.1;
    let p = rest_packet(g);
    let u = FourVector::new(1.0, 0.3, 0.0, 0.0);
    let taus = geometric_grid(10.0, 150.0, 16);
    let quantum = falloff_fit(&p, u, &taus, g).map_err(|e| e.to_string())?;
    let est: Vec<_> = taus
        .iter()
        .map(|&t| {
            let rho = PhaseSpaceDensity::from_packet(&p, t, [AxisProfile::Gaussian { sigma: 1.0 }; 3]);
            region_probability(&rho, [0.3 * t, 0.0, 0.0], 1.0, t, 20_000, 10)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let probs: Vec<f64> = est.iter().map(|e| e.probability).collect();
    let errs: Vec<f64> = est.iter().map(|e| e.statistical_error).collect();
    let classical = fit_falloff_with_errors(&taus, &probs, Some(&errs), g, &FitOptions::default()).map_err(|e| e.to_string())?;
    let cmp = correspondence_compare(&classical, &quantum.fit, COMPARISON_TOL).map_err(|e| e.to_string())?;
    check(
        on_ok && cmp.corresponds,
        format!(
            "on-cone classical {ce:.3} vs 2×quantum {qe:.3}; off-cone classical rate {:.4} vs 2×quantum {:.4} ({})",
            classical.rate(),
            2.0 * quantum.fit.rate(),
            if cmp.corresponds { "corresponds" } else { "differs" }
        ),
    )
}

fn write_inputs(dir: &Path) -> std::io::Result<()> {
    std::fs::write(dir.join("pole.diagram"), save_diagram(&pole_diagram(1.0, M_C)))?;
    std::fs::write(dir.join("off.k.json"), pole_kinematics_shifted(1.0, M_C, 0.5, 1).to_json())?;
    std::fs::write(dir.join("packet.kv"), "mass = 1\nr1 = 0.8\nr2 = 3.0\ngamma = 0.1\n")?;
    std::fs::write(dir.join("model.kv"), "l = 1\nform = bump\n")?;
    Ok(())
}

fn determinism() -> Outcome {
    let inputs = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_inputs(inputs.path()).map_err(|e| e.to_string())?;
    let at = |f: &str| inputs.path().join(f);
    let specs = [
        ExperimentSpec::new("degree", ExperimentKind::Degree).option("nl", 3).option("nv", 3),
        ExperimentSpec::new("analyze", ExperimentKind::Analyze).input("diagram", at("pole.diagram")).input("k", at("off.k.json")),
        ExperimentSpec::new("scan", ExperimentKind::ScanSurface).input("diagram", at("pole.diagram")).option("count", 20),
        ExperimentSpec::new("falloff", ExperimentKind::Falloff)
            .input("packet", at("packet.kv"))
            .option("u", "1,0.5,0,0")
            .option("alpha", 0.05),
        ExperimentSpec::new("transform", ExperimentKind::Transform).input("model", at("model.kv")).option("experiment", "split"),
        ExperimentSpec::new("mc", ExperimentKind::McCompare)
            .input("packet", at("packet.kv"))
            .input("diagram", at("pole.diagram"))
            .option("u", "1,0.3,0,0")
            .option("count", 4000),
    ];
    let mut same = 0;
    for spec in &specs {
        let mut bytes = Vec::new();
        for _ in 0..2 {
            let out = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut s = spec.clone();
            s.seed = 17;
            s.out_dir = out.path().into();
            let o = run(&s).map_err(|e| format!("{}: {e}", s.name))?;
            bytes.push((std::fs::read(o.report_path).unwrap(), std::fs::read(o.csv_path).unwrap()));
        }
        if bytes[0] == bytes[1] {
            same += 1;
        }
    }
    check(same == specs.len(), format!("{same}/{} experiments byte-identical", specs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("degree table", degree_table),
        ("landau feasibility vs kinematics", landau_vs_oracle),
        ("surface round trip", surface_round_trip),
        ("normality", normality),
        ("on-cone exponent", oncone_exponent),
        ("off-cone decay", offcone_decay),
        ("contour certificates", certificates),
        ("transform identities", transform_identities),
        ("classical correspondence", correspondence),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1)
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
