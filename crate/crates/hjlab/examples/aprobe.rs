//! Scratch measurement run for the acceptance gate constants.

use std::sync::Arc;
use std::time::Instant;

use hjlab::experiments::{
    run_counterexample_1d, run_counterexample_saddle, run_smoothing_argument, section_count,
};
use hjlab::grid::Axis;
use hjlab::hamiltonian::{
    check_entropy_condition, check_lax_condition, cubic_wave, half_square, poly_1d, saddle,
};
use hjlab::initial_data::{localized_kink, neg_abs, polynomial_pieces, separable_tilt};
use hjlab::variational::{
    check_local_estimate, check_operator_axioms, conjugated_hamiltonian, envelope_solve,
    reduced_hamiltonian, saddle_closed_form, saddle_family, transformed_data,
    AffineTransformParams, AxiomSamples, EnvelopeFamily, FamilyParams, variational_solve,
};
use hjlab::viscosity::{
    component_gradient_bounds, lax_oleinik, shock_viscosity_verdict, subsolution_residual,
    viscosity_solve, GridScheme, TestFunctionSlope,
};
use hjlab::wavefront::{
    branch_convexity_sign, branch_slope, build_front_1d, minimal_section, BranchSource,
    ShockPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let want = |s: &str| which.is_empty() || which.iter().any(|w| w == s);

    if want("c3") {
        let t0 = Instant::now();
        let h = cubic_wave();
        let bar = hjlab::experiments::normalize_to_wave(&h)?.0;
        let u0 = localized_kink(0.25)?;
        for n in [39usize, 77, 96, 153, 191, 381] {
            let axis = Axis::span(-0.45, 0.31, n)?;
            for t in [0.1, 0.05, 0.025] {
                match section_count(&bar, &u0, t, &axis) {
                    Ok(c) => println!("c3 n={n} dx={:.4e} t={t}: {c} sections", axis.step),
                    Err(e) => println!("c3 n={n} dx={:.4e} t={t}: ERR {e}", axis.step),
                }
            }
        }
        for n in [39usize, 77, 96, 153, 191, 381] {
            let axis = Axis::span(-0.45, 0.31, n)?;
            for t in [0.1, 0.05, 0.025] {
                match run_counterexample_1d(&h, &[t], &axis, None) {
                    Ok(reports) => {
                        let rep = &reports[0];
                        println!(
                            "c3 n={n} t={t}: lax={:.3e} sup={:.6e} min={:.6e} witness gap={:.6e} at q={:.4}",
                            rep.margins.lax,
                            rep.gaps.sup_abs_gap,
                            rep.gaps.min_signed_gap,
                            rep.witness.gap,
                            rep.witness.q[0]
                        );
                    }
                    Err(e) => println!("c3 n={n} t={t}: driver ERR {e}"),
                }
            }
        }
        println!("c3 done in {:?}", t0.elapsed());
    }

    if want("c4") {
        let t0 = Instant::now();
        let h = half_square(1)?;
        let u0 = neg_abs();
        let exact = |q: f64| -q.abs() - 0.25;
        let mut prev = f64::NAN;
        for n in [101usize, 201, 401, 801] {
            let axis = Axis::span(-1.0, 1.0, n)?;
            let scheme = GridScheme::for_problem(&h, &u0, 0.5, std::slice::from_ref(&axis))?;
            let sol = viscosity_solve(&h, &u0, 0.5, &scheme)?;
            let mut err = 0.0f64;
            for (k, q) in axis.coords().enumerate() {
                err = err.max((sol.values[k] - exact(q)).abs());
            }
            println!("c4 viscosity n={n} dx={:.4}: err={:.6e} ratio={:.3}", axis.step, err, err / prev);
            prev = err;
        }
        let axis = Axis::span(-1.0, 1.0, 201)?;
        let front = build_front_1d(&h, &u0, 0.5, (-3.0, 3.0))?;
        let ms = minimal_section(&front, std::slice::from_ref(&axis))?;
        let lo = lax_oleinik(&h, &u0, 0.5, &axis)?;
        let mut e_ms = 0.0f64;
        let mut e_lo = 0.0f64;
        for (k, q) in axis.coords().enumerate() {
            e_ms = e_ms.max((ms.values[k] - exact(q)).abs());
            e_lo = e_lo.max((lo.values[k] - exact(q)).abs());
        }
        println!("c4 minimal_section err={e_ms:.3e} lax_oleinik err={e_lo:.3e}");
        println!("c4 done in {:?}", t0.elapsed());
    }

    if want("c6") {
        let t0 = Instant::now();
        // Affine equivariance of the grid scheme (n = 0), two draws.
        for (a, lam, b, alpha) in [(1.3, 0.7, 0.25, 0.4), (0.6, 1.6, -0.35, -0.8)] {
            let h = cubic_wave();
            let u0 = localized_kink(0.25)?;
            let tr = AffineTransformParams {
                a_diag: vec![a],
                b: vec![b],
                n: vec![0.0],
                alpha,
                lambda: lam,
            };
            let v0 = transformed_data(&u0, &tr)?;
            let hbar = conjugated_hamiltonian(&h, &tr)?;
            let t = 0.1;
            let ax_v = Axis::span(-1.0, 1.0, 101)?;
            let ax_u = Axis::span(a * -1.0, a * 1.0, 101)?;
            let bound_v = component_gradient_bounds(&h, v0.lipschitz() + 1.0)?[0];
            let bound_u = component_gradient_bounds(&hbar, u0.lipschitz() + 1.0)?[0];
            let theta_v = 1.1 * bound_v.max(lam / a * bound_u);
            let theta_u = theta_v * a / lam;
            let n_steps = (t * theta_v / (0.9 * ax_v.step)).ceil().max(1.0);
            let dt_v = t / n_steps;
            let dt_u = lam * t / n_steps;
            let pad = (t * theta_v / ax_v.step).ceil() as usize + 2;
            let sv = GridScheme {
                axes: vec![ax_v.clone()],
                dt: dt_v,
                theta: vec![theta_v],
                pad_cells: vec![pad],
            };
            let su = GridScheme {
                axes: vec![ax_u.clone()],
                dt: dt_u,
                theta: vec![theta_u],
                pad_cells: vec![pad],
            };
            let gv = viscosity_solve(&h, &v0, t, &sv)?;
            let gu = viscosity_solve(&hbar, &u0, lam * t, &su)?;
            let mut worst = 0.0f64;
            for (k, q) in ax_v.coords().enumerate() {
                let rhs = gu.values[k] + b * q + alpha * lam * t;
                worst = worst.max((gv.values[k] - rhs).abs());
            }
            println!("c6 viscosity affine a={a} lam={lam}: residual {worst:.3e}");
        }
        // Reduction equivariance, two draws.
        for p2 in [0.35, -0.8] {
            let h2 = saddle();
            let u0 = localized_kink(0.25)?;
            let v0 = separable_tilt(u0.clone(), p2, (-3.0, 3.0))?;
            let hbar = reduced_hamiltonian(&h2, p2)?;
            let t = 0.1;
            let ax1 = Axis::span(-1.0, 1.0, 101)?;
            let ax2 = Axis::span(-0.8, 0.8, 41)?;
            let b2 = component_gradient_bounds(&h2, v0.lipschitz() + 1.0)?;
            let b1 = component_gradient_bounds(&hbar, u0.lipschitz() + 1.0)?[0];
            let theta1 = 1.1 * b2[0].max(b1);
            let theta2 = 1.1 * b2[1];
            let n_steps =
                (t * (theta1 / ax1.step + theta2 / ax2.step) / 0.9).ceil().max(1.0);
            let dt = t / n_steps;
            let px = (t * theta1 / ax1.step).ceil() as usize + 2;
            let py = (t * theta2 / ax2.step).ceil() as usize + 2;
            let s2 = GridScheme {
                axes: vec![ax1.clone(), ax2.clone()],
                dt,
                theta: vec![theta1, theta2],
                pad_cells: vec![px, py],
            };
            let s1 = GridScheme {
                axes: vec![ax1.clone()],
                dt,
                theta: vec![theta1],
                pad_cells: vec![px],
            };
            let g2 = viscosity_solve(&h2, &v0, t, &s2)?;
            let g1 = viscosity_solve(&hbar, &u0, t, &s1)?;
            let mut worst = 0.0f64;
            for i in 0..ax1.n {
                for (j, q2) in ax2.coords().enumerate() {
                    let rhs = g1.values[i] + p2 * q2;
                    worst = worst.max((g2.values[i * ax2.n + j] - rhs).abs());
                }
            }
            println!("c6 viscosity reduction p2={p2}: residual {worst:.3e}");
        }
        println!("c6 done in {:?}", t0.elapsed());
    }

    if want("c2") {
        let t0 = Instant::now();
        let axes = [Axis::span(-0.35, -0.05, 151)?, Axis::span(-0.12, 0.06, 91)?];
        println!("c2 steps: {:.6e} {:.6e}", axes[0].step, axes[1].step);
        let rep = run_counterexample_saddle(0.75, 1.0, 0.1, &axes, None)?;
        println!(
            "c2 lax={:.3e} entropy={:.3e} sup={:.6e} min={:.6e} witness gap={:.6e} at ({:.4},{:.4})",
            rep.margins.lax,
            rep.margins.entropy,
            rep.gaps.sup_abs_gap,
            rep.gaps.min_signed_gap,
            rep.witness.gap,
            rep.witness.q[0],
            rep.witness.q[1]
        );
        println!("c2 saddle report in {:?}", t0.elapsed());
        if want("c8") {
            let t8 = Instant::now();
            let eps: Vec<f64> =
                [9, 10, 11].iter().map(|k| 0.1 * 2f64.powi(-*k)).collect();
            let tbl = run_smoothing_argument(&saddle(), &rep, &eps)?;
            println!("c8 alpha={:.6e} witness_q=({:.4},{:.4})", tbl.alpha, tbl.witness_q[0], tbl.witness_q[1]);
            for row in &tbl.rows {
                println!(
                    "c8 eps={:.3e}: sup_u={:.3e} grad_graph={:.3e} front={:.3e} sup_v={:.3e} gap={:.6e} pred_lb={:.3e} ete {:.3e} <= {:.3e}",
                    row.eps,
                    row.sup_u_diff,
                    row.grad_graph_dist,
                    row.front_dist,
                    row.sup_v_diff,
                    row.witness_gap,
                    row.predicted_lower_bound,
                    row.psi_same_graph_dist,
                    row.psi_same_graph_bound
                );
            }
            println!("c8 done in {:?}", t8.elapsed());
        }
    }

    if want("c1") {
        let t0 = Instant::now();
        let (a, b, t) = (0.75, 1.0, 0.1);
        let axes = [Axis::span(-1.0, -0.16, 421)?, Axis::span(-0.5, 0.5, 501)?];
        let (fam, u0) = saddle_family(a, b, 0.25)?;
        let fam_arc = fam.clone();
        let fam101 = EnvelopeFamily::new(
            FamilyParams::Interval { a, b, samples: 101 },
            Arc::new(move |c| fam_arc.member(c)),
            fam.lipschitz(),
            fam.semiconcavity(),
        )?;
        let h = saddle();
        let tv = Instant::now();
        let rv = variational_solve(&h, &u0, t, &axes)?;
        println!("c1 variational in {:?}", tv.elapsed());
        let te = Instant::now();
        let re = envelope_solve(&h, &fam101, t, &axes)?;
        println!("c1 envelope(101) in {:?}", te.elapsed());
        let (mut d_ve, mut d_vc, mut d_ec) = (0.0f64, 0.0f64, 0.0f64);
        let mut k = 0;
        for q1 in axes[0].coords() {
            for q2 in axes[1].coords() {
                let c = saddle_closed_form(a, b, t, q1, q2)?;
                d_ve = d_ve.max((rv.values[k] - re.values[k]).abs());
                d_vc = d_vc.max((rv.values[k] - c).abs());
                d_ec = d_ec.max((re.values[k] - c).abs());
                k += 1;
            }
        }
        println!("c1 pairwise: var-env={d_ve:.3e} var-closed={d_vc:.3e} env-closed={d_ec:.3e}");
        println!("c1 done in {:?}", t0.elapsed());
    }

    if want("c7") {
        let t0 = Instant::now();
        let kink = localized_kink(0.25)?;
        let cubic_data = polynomial_pieces(
            (-2.0, 2.0),
            &[0.0],
            &[vec![0.0, 0.5, 0.4], vec![0.0, 0.5, -0.3]],
        )?;
        let configs: Vec<(hjlab::hamiltonian::IntegrableHamiltonian, hjlab::initial_data::PiecewiseInitialCondition, f64)> = vec![
            (cubic_wave(), kink.clone(), 0.05),
            (cubic_wave(), localized_kink(0.3)?.tilted(&[0.2], 0.1), 0.1),
            (half_square(1)?, cubic_data.clone(), 0.3),
            (poly_1d(&[0.0, 0.4, -0.15, 0.08, 0.03], 12.0)?, kink.clone(), 0.05),
        ];
        let mut n_slope = 0usize;
        let mut worst_slope = 0.0f64;
        let mut n_sign = 0usize;
        let mut sign_mismatch = 0usize;
        for (h, u0, t) in &configs {
            let dom = u0.domain();
            let front = build_front_1d(h, u0, *t, (dom.lo(0) + 0.5, dom.hi(0) - 0.5))?;
            for br in front.branches() {
                let (a, b) = br.range();
                for i in 0..80 {
                    let s = a + (b - a) * (i as f64 + 0.5) / 80.0;
                    if br.xprime(s).abs() < 1e-3 {
                        continue;
                    }
                    let slope = branch_slope(br, s)?;
                    let hstep = 1e-6 * (b - a);
                    let (plo, phi) = (br.point(s - hstep), br.point(s + hstep));
                    let fd = (phi.s - plo.s) / (phi.q - plo.q);
                    worst_slope = worst_slope.max((slope - fd).abs() / (1.0 + slope.abs()));
                    n_slope += 1;

                    if !br.source().is_fan() {
                        let d = 1e-4 * (b - a);
                        let (p0, p1, p2) = (br.point(s - d), br.point(s), br.point(s + d));
                        let dd = 2.0
                            * (p0.s / ((p0.q - p1.q) * (p0.q - p2.q))
                                + p1.s / ((p1.q - p0.q) * (p1.q - p2.q))
                                + p2.s / ((p2.q - p0.q) * (p2.q - p1.q)));
                        let orient = (p2.q - p0.q).signum();
                        let expected = branch_convexity_sign(br, s)?;
                        if expected != 0 && dd.abs() > 1e-3 {
                            n_sign += 1;
                            if (dd.signum() * orient) as i8 != expected {
                                sign_mismatch += 1;
                            }
                        }
                    }
                }
            }
        }
        println!(
            "c7 slopes: {n_slope} samples worst rel dev {worst_slope:.3e}; signs: {n_sign} strict samples {sign_mismatch} mismatches"
        );
        println!("c7 done in {:?}", t0.elapsed());
    }

    if want("c5") {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = [0.0f64; 3];
        let mut worst_visc = [0.0f64; 3];
        for fixture in 0..20 {
            let w = 0.15 + 0.2 * rng.gen::<f64>();
            let kink = localized_kink(w)?;
            let m = rng.gen_range(-0.25..0.25);
            let base = kink.tilted(&[m], rng.gen_range(-0.5..0.5));
            let coeffs = [
                0.0,
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.25..0.25),
                rng.gen_range(-0.15..0.15),
                rng.gen_range(-0.08..0.08),
            ];
            let h = poly_1d(&coeffs, 20.0)?;
            let c = hjlab::hamiltonian::hessian_norm_bound(&h, base.lipschitz() + 1.5)?;
            let horizon = hjlab::characteristics::validity_time(1.0, c)?;
            let t = (0.4 * horizon).min(0.03);
            let samples = AxiomSamples {
                monotone_pairs: vec![
                    (base.clone(), base.offset(rng.gen_range(0.1..1.0))),
                    (
                        base.tilted(&[rng.gen_range(-0.2..0.2)], -0.3),
                        base.tilted(&[0.0], rng.gen_range(0.0..0.8)).offset(0.31),
                    ),
                ],
                shift_cases: vec![
                    (base.clone(), rng.gen_range(-2.0..2.0)),
                    (kink.clone(), rng.gen_range(-2.0..2.0)),
                ],
                contraction_pairs: vec![
                    (base.clone(), base.tilted(&[rng.gen_range(-0.2..0.2)], rng.gen_range(-0.5..0.5))),
                    (kink.clone(), base.offset(rng.gen_range(-1.0..1.0))),
                ],
                t,
                axes: vec![Axis::span(-1.8, 1.8, 101)?],
            };
            let rep = check_operator_axioms(
                &|hh, uu, tt, aa| variational_solve(hh, uu, tt, aa),
                &h,
                &samples,
            )?;
            worst[0] = worst[0].max(rep.monotonicity_worst);
            worst[1] = worst[1].max(rep.additivity_worst);
            worst[2] = worst[2].max(rep.contraction_excess);
            if !rep.passes() {
                println!("c5 fixture {fixture} variational violations: {:?}", rep.violations);
            }
            let repv = check_operator_axioms(
                &|hh, uu, tt, aa| {
                    let scheme = GridScheme::for_problem(hh, uu, tt, aa)?;
                    viscosity_solve(hh, uu, tt, &scheme)
                },
                &h,
                &samples,
            )?;
            worst_visc[0] = worst_visc[0].max(repv.monotonicity_worst);
            worst_visc[1] = worst_visc[1].max(repv.additivity_worst);
            worst_visc[2] = worst_visc[2].max(repv.contraction_excess);
        }
        println!("c5 variational worst mono/add/contr: {:.3e} {:.3e} {:.3e}", worst[0], worst[1], worst[2]);
        println!("c5 viscosity worst mono/add/contr: {:.3e} {:.3e} {:.3e}", worst_visc[0], worst_visc[1], worst_visc[2]);
        let mut worst_margin = f64::INFINITY;
        for _ in 0..10 {
            let c1 = [
                0.0,
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.05..0.05),
            ];
            let mut c2 = c1;
            for v in c2.iter_mut() {
                *v += rng.gen_range(-0.08..0.08);
            }
            let h1 = poly_1d(&c1, 20.0)?;
            let h2 = poly_1d(&c2, 20.0)?;
            let kink = localized_kink(0.25)?;
            let margin = check_local_estimate(
                &h1,
                &h2,
                &kink,
                0.02,
                &[Axis::span(-0.5, 0.5, 121)?],
            )?;
            worst_margin = worst_margin.min(margin);
        }
        println!("c5 local estimate worst margin: {worst_margin:.6e}");
        println!("c5 done in {:?}", t0.elapsed());
    }

    if want("c9") {
        let t0 = Instant::now();
        let catalog = [
            cubic_wave(),
            half_square(1)?,
            poly_1d(&[0.0, 0.3, -0.5, 0.1, 0.05], 14.0)?,
            poly_1d(&[0.1, -0.2, 0.3, -0.05, 0.02], 14.0)?,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut n_strict = 0usize;
        let mut n_violation = 0usize;
        let mut n_refined_away = 0usize;
        for _ in 0..1000 {
            let h = &catalog[rng.gen_range(0..catalog.len())];
            let p1: f64 = rng.gen_range(-2.5..2.5);
            let p2: f64 = rng.gen_range(-2.5..2.5);
            if (p1 - p2).abs() < 1e-3 {
                continue;
            }
            let v = check_entropy_condition(h, p1, p2, 1001)?;
            if v.strict {
                n_strict += 1;
                let lax = check_lax_condition(h, p1, p2)?;
                if !lax.holds {
                    let refined = check_entropy_condition(h, p1, p2, 100_001)?;
                    if refined.strict {
                        n_violation += 1;
                        println!("c9 VIOLATION at p1={p1} p2={p2}");
                    } else {
                        n_refined_away += 1;
                    }
                }
            }
        }
        println!("c9 strict draws: {n_strict}, violations: {n_violation}, refined away: {n_refined_away}");

        let mut kept = 0usize;
        let mut disagree = 0usize;
        let mut attempts = 0usize;
        while kept < 50 && attempts < 10_000 {
            attempts += 1;
            let h = &catalog[rng.gen_range(0..catalog.len())];
            let x: f64 = rng.gen_range(-2.2..2.2);
            let y: f64 = rng.gen_range(-2.2..2.2);
            if (x - y).abs() < 0.05 {
                continue;
            }
            let (p_left, p_right) = if x > y { (x, y) } else { (y, x) };
            let shock = ShockPoint {
                t: 0.2,
                q: rng.gen_range(-1.0..1.0),
                p_left,
                p_right,
                left_source: BranchSource::LeftPiece(0),
                right_source: BranchSource::RightPiece(1),
            };
            let verdict = shock_viscosity_verdict(h, &shock)?;
            if verdict.entropy_margin.abs() < 1e-3 {
                continue;
            }
            kept += 1;
            let (hl, hr) = (h.eval(&[p_left]), h.eval(&[p_right]));
            let mut brute = f64::NEG_INFINITY;
            for i in 0..11 {
                let lam = i as f64 / 10.0;
                let m = lam * p_left + (1.0 - lam) * p_right;
                let sigma = -(lam * hl + (1.0 - lam) * hr);
                for j in 0..11 {
                    let dtau = (j as f64 - 5.0) * 0.01;
                    let _touch = shock.q + dtau * (hl - hr) / (p_left - p_right);
                    let phi = TestFunctionSlope { dt: sigma, dq: vec![m] };
                    brute = brute.max(subsolution_residual(h, &phi));
                }
            }
            let brute_ok = brute <= 1e-12;
            if brute_ok != verdict.is_viscosity {
                disagree += 1;
                println!(
                    "c9 shock disagree: p=({p_left},{p_right}) margin={:.3e} brute={brute:.3e}",
                    verdict.entropy_margin
                );
            }
        }
        println!("c9 shocks kept={kept} attempts={attempts} disagreements={disagree}");
        println!("c9 done in {:?}", t0.elapsed());
    }

    Ok(())
}
