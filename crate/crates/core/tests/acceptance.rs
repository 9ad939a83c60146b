//! End-to-end acceptance run: one line per criterion, non-zero exit on any failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vprep::initial::GridSpec;
use vprep::propagator::evolve;
use vprep::scattering::s_matrix;
use vprep::*;

// Reference values and tolerances.
const E_RES: (f64, f64) = (134.509, -1.217);
const E_RES_TOL: f64 = 1e-3;
const TAU: f64 = 0.411;
const TAU_TOL: f64 = 3e-3;
const DECAY_SUDDEN_TOL: f64 = 0.02;
const DECAY_SWITCHED_TOL: f64 = 0.03;
const DELAY_FIT_TOL: f64 = 0.02;
const ISO_TARGETS: [f64; 2] = [53.391, 7.422];
const ISO_TOL: f64 = 1e-3;
const NORMALIZATION_TOL: f64 = 1e-3;
const LORENTZIAN_BRACKET: (f64, f64) = (0.029, 0.116);
const EXPONENTIAL_BRACKET: (f64, f64) = (0.065, 0.26);
const DISTORTION_FACTOR: f64 = 3.0;
const UNITARITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-8;
const REVERSAL_TOL: f64 = 1e-6;
const ABSORBER_TOL: f64 = 1e-4;
const PROJECTION_TOL: f64 = 1e-4;
const STATIONARITY_TOL: f64 = 1e-4;
const EIGEN_TOL: f64 = 1e-4;

type R<T> = std::result::Result<T, String>;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn unit() -> UnitSystem<f64> {
    UnitSystem::sodium23()
}

fn initial() -> PotentialConfig<f64> {
    PotentialConfig::new(350.0, 400.0, 5.0, 10.0).unwrap()
}

fn target() -> PotentialConfig<f64> {
    PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap()
}

fn lowest_resonance() -> R<Resonance<f64>> {
    let poles = find_poles(&target(), &unit(), SearchRegion::resonances(1.2, 0.2), 10).map_err(|e| e.to_string())?;
    poles.into_iter().find(|p| p.kind == PoleKind::Resonance).ok_or_else(|| "no resonance".to_string())
}

fn criterion_1() -> R<(bool, String)> {
    let p = lowest_resonance()?;
    let (dr, di) = (rel(p.e_complex.re, E_RES.0), rel(p.e_complex.im, E_RES.1));
    Ok((
        dr <= E_RES_TOL && di <= E_RES_TOL,
        format!("E_res = {:.5} {:+.5}i, relative errors {dr:.1e}/{di:.1e} (tol {E_RES_TOL:.0e})", p.e_complex.re, p.e_complex.im),
    ))
}

fn criterion_2(study: &SwitchStudy<f64>) -> R<(bool, String)> {
    let tau = study.resonance.tau;
    let mut ok = rel(tau, TAU) <= TAU_TOL && (tau * study.resonance.gamma - 1.0).abs() < 1e-12;
    let mut detail = format!("pole τ = {tau:.5} s ({:.1e} vs 0.411);", rel(tau, TAU));
    // (T/τ, t_end, fit start, tolerance)
    let runs = [(0.0, 2.5, 0.5, DECAY_SUDDEN_TOL), (0.058, 2.5, 0.5, DECAY_SWITCHED_TOL), (0.13, 2.5, 0.5, DECAY_SWITCHED_TOL), (1.0, 3.5, 2.0, DECAY_SWITCHED_TOL)];
    for (t_rel, t_end, t_min, tol) in runs {
        let record = study.decay(t_rel * tau, t_end).map_err(|e| e.to_string())?;
        let fit = fit_exponential_decay(&record, t_min).map_err(|e| e.to_string())?;
        let d = rel(fit.tau, tau);
        ok &= d <= tol;
        detail.push_str(&format!(" T={t_rel}τ: {:.5} ({d:.1e}, tol {tol});", fit.tau));
    }
    Ok((ok, detail))
}

fn criterion_3(res: &Resonance<f64>) -> R<(bool, String)> {
    let (u, cfg) = (unit(), target());
    let (lo, hi) = (res.e_r - 10.0 * res.gamma, res.e_r + 10.0 * res.gamma);
    let energies: Vec<f64> = (0..801).map(|i| lo + (hi - lo) * i as f64 / 800.0).collect();
    let delays = energies
        .iter()
        .map(|e| delay_time(&cfg, &u, u.wavenumber(*e)))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    let fit = fit_lorentzian_with_background(&energies, &delays, (lo, hi)).map_err(|e| e.to_string())?;
    let (de, dg) = (rel(fit.e_r, res.e_r), rel(fit.gamma, res.gamma));
    Ok((
        de <= DELAY_FIT_TOL && dg <= DELAY_FIT_TOL,
        format!("fit E_R = {:.4}, Γ = {:.4}; relative errors {de:.1e}/{dg:.1e} (tol {DELAY_FIT_TOL})", fit.e_r, fit.gamma),
    ))
}

fn criterion_4() -> R<(bool, String)> {
    let u = unit();
    let search = IsoSearch::new(5.0, 10.0);
    let mut ok = true;
    let mut detail = String::new();
    for target in ISO_TARGETS {
        let curve = trace_iso_resonance(target, &search, &u).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for s in &curve.samples {
            // independent re-verification: fresh pole search in a box around the traced pole
            let k = s.pole.k_res;
            let cfg = PotentialConfig::new(s.v_well, s.v_barrier, 5.0, 10.0).map_err(|e| e.to_string())?;
            let region = SearchRegion::Rectangle { re: (0.98 * k.re, 1.02 * k.re), im: (3.0 * k.im, 0.3 * k.im) };
            let found = find_poles(&cfg, &u, region, 4).map_err(|e| format!("V_w = {}: {e}", s.v_well))?;
            let e = found.first().map_or(f64::INFINITY, |p| p.e_r);
            worst = worst.max(rel(e, target));
        }
        let (g, vb) = curve.shallow_variation(search.v_well_range, 1.0 / 3.0).unwrap_or((0.0, f64::INFINITY));
        let pass = !curve.samples.is_empty() && worst <= ISO_TOL && g > vb;
        ok &= pass;
        detail.push_str(&format!(
            " E_R={target}: {} points, max rel err {worst:.1e}, shallow spread Γ {g:.3} > V_b {vb:.3};",
            curve.samples.len()
        ));
    }
    Ok((ok, detail.trim_start().to_string()))
}

fn criterion_5(study: &SwitchStudy<f64>) -> R<(bool, String)> {
    let res = study.resonance;
    let dist = study.spectrum(0.0).map_err(|e| e.to_string())?;
    let (peak, _) = dist.peak();
    let weight = dist.weight_in(res.e_r - 10.0 * res.gamma, res.e_r + 10.0 * res.gamma);
    let ok = (dist.total - 1.0).abs() <= NORMALIZATION_TOL && (peak - res.e_r).abs() <= res.gamma / 2.0 && weight < 1.0;
    Ok((ok, format!("∫P = {:.6}, peak at {peak:.3} (E_R {:.3}, Γ/2 {:.3}), weight in E_R±10Γ = {weight:.4}", dist.total, res.e_r, res.gamma / 2.0)))
}

struct Scan {
    lorentzian: ScanResult<f64>,
    exponential: ScanResult<f64>,
}

fn criterion_6(study: &SwitchStudy<f64>) -> R<((bool, String), Scan)> {
    let tau = study.resonance.tau;
    let spec = ScanSpec::default();
    let l = optimal_switch_time(study, Objective::LorentzianDeviation, (0.005 * tau, 0.5 * tau), spec).map_err(|e| e.to_string())?;
    let e = optimal_switch_time(study, Objective::ExponentialDeviation, (0.01 * tau, tau), spec).map_err(|e| e.to_string())?;
    let (lt, et) = (l.t_star / tau, e.t_star / tau);
    let in_l = lt >= LORENTZIAN_BRACKET.0 && lt <= LORENTZIAN_BRACKET.1;
    let in_e = et >= EXPONENTIAL_BRACKET.0 && et <= EXPONENTIAL_BRACKET.1;
    let detail = format!(
        "lorentzian t* = {lt:.4}τ (dev {:.4}) in {LORENTZIAN_BRACKET:?}: {in_l}; exponential t* = {et:.4}τ (dev {:.4}) in {EXPONENTIAL_BRACKET:?}: {in_e}; ordering: {}",
        l.value,
        e.value,
        lt < et
    );
    Ok(((in_l && in_e && lt < et, detail), Scan { lorentzian: l, exponential: e }))
}

fn criterion_7(study: &SwitchStudy<f64>, scan: Option<&Scan>) -> R<(bool, String)> {
    let res = study.resonance;
    let dist = study.spectrum(res.tau).map_err(|e| e.to_string())?;
    let median = dist.median();
    let dev = study.lorentzian_deviation_of(&dist).map_err(|e| e.to_string())?;
    let optimum = match scan {
        Some(s) => s.lorentzian.value,
        None => return Ok((false, "no optimum available (scan failed)".into())),
    };
    let ok = median < res.e_r && dev >= DISTORTION_FACTOR * optimum;
    Ok((ok, format!("T=τ: median {median:.3} < E_R {:.3}; deviation {dev:.4} vs {DISTORTION_FACTOR}× optimum {optimum:.4}", res.e_r)))
}

/// Winding number of `Ω` around a rectangle by adaptive arg tracking along
/// the boundary. A segment is accepted once its phase step is small and
/// agrees with the sum over its two halves, so full turns between samples
/// are not lost.
fn winding(cfg: &PotentialConfig<f64>, u: &UnitSystem<f64>, re: (f64, f64), im: (f64, f64)) -> i64 {
    let corners = [
        Complex::new(re.0, im.0),
        Complex::new(re.1, im.0),
        Complex::new(re.1, im.1),
        Complex::new(re.0, im.1),
    ];
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let mut stack: Vec<(f64, f64)> = (0..64).map(|j| (j as f64 / 64.0, (j + 1) as f64 / 64.0)).collect();
        while let Some((s0, s1)) = stack.pop() {
            let m = 0.5 * (s0 + s1);
            let w0 = omega(cfg, u, a + (b - a) * s0);
            let wm = omega(cfg, u, a + (b - a) * m);
            let w1 = omega(cfg, u, a + (b - a) * s1);
            let d = (w1 / w0).arg();
            let halves = (wm / w0).arg() + (w1 / wm).arg();
            if (d.abs() > 0.1 || (halves - d).abs() > 1e-6) && s1 - s0 > 1e-12 {
                stack.push((m, s1));
                stack.push((s0, m));
            } else {
                total += d;
            }
        }
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

fn criterion_8(study: &SwitchStudy<f64>) -> R<(bool, String)> {
    let u = unit();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut parts = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, pass: bool, what: String| {
        ok &= pass;
        parts.push(format!("{name} {} ({what})", if pass { "ok" } else { "FAIL" }));
    };

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let cfg = PotentialConfig::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..800.0), rng.gen_range(0.5..10.0), rng.gen_range(0.5..20.0)).unwrap();
        let k = rng.gen_range(0.01..2.0);
        worst = worst.max((s_matrix(&cfg, &u, Complex::new(k, 0.0)).norm() - 1.0).abs());
    }
    record("unitarity", worst <= UNITARITY_TOL, format!("max ||S|-1| = {worst:.1e}"));

    let res = study.resonance;
    let schedule = study.schedule(0.058 * res.tau).map_err(|e| e.to_string())?;
    let mut setup = PropagationSetup::spectrum_profile(schedule.clone(), u, 0.1);
    setup.snapshot_times.clear();
    let gs = ground_state(&initial(), &u, &setup.initial_grid(), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let run = propagate(&gs.wavefunction, &setup).map_err(|e| e.to_string())?;
    let n0 = run.record.norm[0];
    let drift = run.record.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max);
    record("norm", drift <= NORM_TOL, format!("max drift {drift:.1e} over {} steps", run.record.norm.len() - 1));

    let steps = 250;
    let fwd = evolve(&gs.wavefunction, &setup, setup.dt, steps, 0.0).map_err(|e| e.to_string())?;
    let back = evolve(&fwd, &setup, -setup.dt, steps, setup.dt * steps as f64).map_err(|e| e.to_string())?;
    let err = back.l2_distance_on_common_nodes(&gs.wavefunction) / gs.wavefunction.norm_sq().sqrt();
    record("time reversal", err <= REVERSAL_TOL, format!("relative L² {err:.1e}"));

    let sudden = SwitchingSchedule::sudden(initial(), target());
    let mut decay = PropagationSetup::decay_profile(sudden.clone(), u);
    decay.t_end = 1.0;
    let gs_decay = ground_state(&initial(), &u, &decay.initial_grid(), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let absorbed = propagate(&gs_decay.wavefunction, &decay).map_err(|e| e.to_string())?;
    let mut big = PropagationSetup::spectrum_profile(sudden.clone(), u, 1.0);
    big.snapshot_times.clear();
    let gs_big = ground_state(&initial(), &u, &big.initial_grid(), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let reference = propagate(&gs_big.wavefunction, &big).map_err(|e| e.to_string())?;
    let diff = absorbed.record.p_w.iter().zip(&reference.record.p_w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    record("absorber", diff <= ABSORBER_TOL, format!("max |ΔP_W| {diff:.1e} against a {:.0} µm hard-wall box", big.grid.length.unwrap()));

    let direct = study.spectrum(0.0).map_err(|e| e.to_string())?;
    let mut later = PropagationSetup::spectrum_profile(sudden, u, 0.05);
    later.dt = study.dt;
    let gs_later = ground_state(&initial(), &u, &later.initial_grid(), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let snap = propagate(&gs_later.wavefunction, &later).map_err(|e| e.to_string())?;
    let s = &snap.snapshots[0];
    let moved = energy_distribution(&s.state, &target(), &u, &study.energy_grid, s.time).map_err(|e| e.to_string())?;
    let l1 = direct.l1_distance(&moved).map_err(|e| e.to_string())?;
    record("T=0 projection", l1 <= PROJECTION_TOL, format!("L¹ {l1:.1e}"));

    let t_switch = 0.058 * res.tau;
    let t_star = study.projection_time(t_switch).map_err(|e| e.to_string())?;
    let mut two = study.spectrum_setup(t_switch, t_star + 0.1).map_err(|e| e.to_string())?;
    two.snapshot_times = vec![t_star, t_star + 0.1];
    let gs_two = ground_state(&initial(), &u, &two.initial_grid(), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let run = propagate(&gs_two.wavefunction, &two).map_err(|e| e.to_string())?;
    let dists = run
        .snapshots
        .iter()
        .map(|s| energy_distribution(&s.state, &target(), &u, &study.energy_grid, s.time))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let l1 = dists[0].l1_distance(&dists[1]).map_err(|e| e.to_string())?;
    record("stationarity", l1 <= STATIONARITY_TOL, format!("L¹ {l1:.1e} between t* and t*+0.1 s"));

    let gs = ground_state(&initial(), &u, &GridSpec::new(0.05), GroundStateSelection::RequireUnique).map_err(|e| e.to_string())?;
    let residual = gs.eigen_residual(&initial(), &u);
    record("eigen-residual", residual < EIGEN_TOL, format!("{residual:.1e}"));

    let mut matched = 0;
    let mut total_poles = 0;
    let mut failures = Vec::new();
    for i in 0..20 {
        let cfg = PotentialConfig::new(rng.gen_range(20.0..400.0), rng.gen_range(50.0..600.0), rng.gen_range(2.0..8.0), rng.gen_range(5.0..15.0)).unwrap();
        let (re, im) = ((0.05, 1.0), (-0.3, -1e-7));
        match find_poles(&cfg, &u, SearchRegion::Rectangle { re, im }, usize::MAX) {
            Ok(p) => {
                let n = winding(&cfg, &u, re, im);
                total_poles += p.len();
                if p.len() as i64 == n {
                    matched += 1;
                } else {
                    failures.push(format!("#{i}: found {} vs winding {n}", p.len()));
                }
            }
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    record("completeness", matched == 20, format!("{matched}/20 configs, {total_poles} poles{}", if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }));
    Ok((ok, parts.join("; ")))
}

fn report(id: usize, name: &str, started: Instant, outcome: R<(bool, String)>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {id} [{}] {name}: {detail} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "pole reproduction", t, criterion_1());
    let study = SwitchStudy::new(initial(), target(), unit()).expect("final configuration has a resonance");
    let t = Instant::now();
    all &= report(2, "lifetime consistency", t, criterion_2(&study));
    let t = Instant::now();
    all &= report(3, "delay-time/pole equivalence", t, criterion_3(&study.resonance));
    let t = Instant::now();
    all &= report(4, "iso-resonance curves", t, criterion_4());
    let t = Instant::now();
    all &= report(5, "sudden-switch spectrum", t, criterion_5(&study));
    let t = Instant::now();
    let (c6, scan) = match criterion_6(&study) {
        Ok((c, s)) => (Ok(c), Some(s)),
        Err(e) => (Err(e), None),
    };
    all &= report(6, "optimal switching times", t, c6);
    if let Some(s) = &scan {
        let curve = |r: &ScanResult<f64>| {
            r.curve.iter().map(|(t, v)| format!("{:.4}:{v:.4}", t / study.resonance.tau)).collect::<Vec<_>>().join(" ")
        };
        println!("    lorentzian scan (T/τ:value) {}", curve(&s.lorentzian));
        println!("    exponential scan (T/τ:value) {}", curve(&s.exponential));
    }
    let t = Instant::now();
    all &= report(7, "large-T distortion", t, criterion_7(&study, scan.as_ref()));
    let t = Instant::now();
    all &= report(8, "property suites", t, criterion_8(&study));
    println!("acceptance: {}", if all { "all criteria passed" } else { "FAILED" });
    if !all {
        std::process::exit(1);
    }
}
