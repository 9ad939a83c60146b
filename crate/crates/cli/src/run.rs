//! Experiment orchestration.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use vprep::initial::GridSpec;
use vprep::spectral::{EnergyGrid, ScanSpec, SwitchStudy};
use vprep::{
    delay_time, find_poles, fit_exponential_decay, fit_lorentzian, fit_lorentzian_with_background, ground_state, lorentzian_reference,
    minimize_switch_time, phase_shift_curve, trace_iso_resonance, GroundStateSelection, IsoSearch, Objective,
    PoleKind, Resonance, SearchRegion,
};

use crate::output::{Cell, Stamp, Staging, Summary, Table};
use crate::spec::{diagnostics, Experiment, ExperimentSpec, ObjectiveName, TimeUnit};

/// Outcome of [`run_experiments`].
#[derive(Debug)]
pub struct RunReport {
    pub output: PathBuf,
    pub summary: Summary,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.summary.all_passed()
    }
}

/// The spec failed validation.
#[derive(Debug)]
pub struct InvalidSpec(pub Vec<crate::spec::Diagnostic>);

impl std::fmt::Display for InvalidSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "spec has {} problem(s):", self.0.len())?;
        for d in &self.0 {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for InvalidSpec {}

struct Context_<'a> {
    spec: &'a ExperimentSpec,
    staging: &'a Staging,
    summary: Summary,
    study: Option<SwitchStudy<f64>>,
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

impl Context_<'_> {
    fn study(&mut self) -> Result<&SwitchStudy<f64>> {
        if self.study.is_none() {
            let spec = self.spec;
            let mut s = SwitchStudy::new(spec.initial()?, spec.target()?, spec.unit()?)?;
            let n = &spec.numerics;
            s.dx = n.dx;
            s.dt = n.dt;
            s.e_cut = n.e_cut;
            s.eps_v = n.eps_v;
            s.energy_grid =
                EnergyGrid::around_resonance(s.resonance.e_r, s.resonance.gamma, n.e_cut, n.energy_points)?;
            self.study = Some(s);
        }
        Ok(self.study.as_ref().expect("just set"))
    }

    fn resonance(&mut self) -> Result<Resonance<f64>> {
        Ok(self.study()?.resonance)
    }

    fn times(&mut self, list: &[f64], unit: TimeUnit) -> Result<Vec<f64>> {
        let tau = self.resonance()?.tau;
        Ok(list.iter().map(|t| if unit == TimeUnit::Tau { t * tau } else { *t }).collect())
    }

    fn write(&mut self, exp: Experiment, table: &Table) -> Result<String> {
        self.staging.write_table(exp.name(), table)
    }

    fn plot(&self, exp: Experiment, script: &str) -> Result<()> {
        self.staging.write_text(&format!("{}/plot.gp", exp.name()), script)
    }

    fn run(&mut self, exp: Experiment) -> Result<()> {
        match exp {
            Experiment::Poles => self.poles(),
            Experiment::GroundState => self.ground_state(),
            Experiment::IsoCurves => self.iso_curves(),
            Experiment::DelaySpectrum => self.delay_spectrum(),
            Experiment::DecayCurves => self.decay_curves(),
            Experiment::SpectrumVsT => self.spectrum_vs_t(),
            Experiment::TScan => self.t_scan(),
        }
    }

    fn poles(&mut self) -> Result<()> {
        let exp = Experiment::Poles;
        let spec = self.spec;
        let unit = spec.unit()?;
        let p = &spec.poles;
        let mut t = Table::new(
            "poles",
            &[
                ("config", ""),
                ("kind", ""),
                ("k_re", "1/um"),
                ("k_im", "1/um"),
                ("e_re", "hbar/s"),
                ("e_im", "hbar/s"),
                ("gamma", "hbar/s"),
                ("tau", "s"),
                ("residual", ""),
            ],
        );
        let region = SearchRegion::resonances(p.re_k_max, p.im_k_depth);
        let mut first_resonance = None;
        for (label, cfg) in [("initial", spec.initial()?), ("final", spec.target()?)] {
            let mut poles = find_poles(&cfg, &unit, SearchRegion::BoundStates, p.max_count)?;
            poles.extend(find_poles(&cfg, &unit, region, p.max_count)?);
            for pole in poles.iter().take(p.max_count) {
                if label == "final" && pole.kind == PoleKind::Resonance && first_resonance.is_none() {
                    first_resonance = Some(t.rows.len());
                }
                t.push(vec![
                    label.into(),
                    pole.kind.to_string().into(),
                    num(pole.k_res.re),
                    num(pole.k_res.im),
                    num(pole.e_complex.re),
                    num(pole.e_complex.im),
                    num(pole.gamma),
                    num(pole.tau),
                    num(pole.residual),
                ]);
            }
        }
        let file = self.write(exp, &t)?;
        let row = first_resonance.context("final configuration has no resonance in the searched region")?;
        for (key, col) in [("pole.e_re", "e_re"), ("pole.e_im", "e_im"), ("pole.gamma", "gamma"), ("pole.tau", "tau")] {
            self.summary.cite(key, &file, &t, col, row);
        }
        let get = |col: &str| match &t.rows[row][t.column_index(col).unwrap()] {
            Cell::Num(v) => *v,
            Cell::Text(_) => f64::NAN,
        };
        let c = &spec.checks;
        if let Some([re, im]) = c.e_res {
            let (dr, di) = (rel(get("e_re"), re), rel(get("e_im"), im));
            self.summary.check(
                "pole_energy",
                dr <= c.e_res_rel_tol && di <= c.e_res_rel_tol,
                format!("relative errors {dr:.2e} (Re), {di:.2e} (Im) against tolerance {:.1e}", c.e_res_rel_tol),
            );
        }
        if let Some(tau) = c.tau {
            let d = rel(get("tau"), tau);
            self.summary.check("pole_lifetime", d <= c.tau_rel_tol, format!("relative error {d:.2e}, tolerance {:.1e}", c.tau_rel_tol));
        }
        self.plot(
            exp,
            "set datafile separator ','\nset xlabel 'Re E (hbar/s)'\nset ylabel 'Im E (hbar/s)'\n\
             plot 'poles.csv' every ::1 using 5:6 with points pt 7 title 'poles'\n",
        )
    }

    fn ground_state(&mut self) -> Result<()> {
        let exp = Experiment::GroundState;
        let spec = self.spec;
        let (cfg, unit) = (spec.initial()?, spec.unit()?);
        let gs = ground_state(&cfg, &unit, &GridSpec::new(spec.numerics.dx), GroundStateSelection::RequireUnique)?;
        let wf = &gs.wavefunction;
        let mut t = Table::new("ground_state", &[("x", "um"), ("psi", "um^-1/2"), ("dpsi", "um^-3/2"), ("density", "1/um")]);
        for ((x, v), s) in wf.nodes().iter().zip(wf.values()).zip(wf.slopes()) {
            t.push(vec![num(*x), num(v.re), num(s.re), num(v.norm_sqr())]);
        }
        let file = self.write(exp, &t)?;
        let mut info = Table::new("ground_state_info", &[("energy", "hbar/s"), ("kappa0", "1/um"), ("p_well", ""), ("box", "um"), ("eigen_residual", "")]);
        let p_w = vprep::probability_in_well(wf, cfg.well_width())?;
        let residual = gs.eigen_residual(&cfg, &unit);
        info.push(vec![num(gs.energy), num(gs.pole.k_res.im), num(p_w), num(wf.right_edge()), num(residual)]);
        let info_file = self.write(exp, &info)?;
        self.summary.cite("ground_state.energy", &info_file, &info, "energy", 0);
        self.summary.cite("ground_state.p_well", &info_file, &info, "p_well", 0);
        self.summary.cite("ground_state.eigen_residual", &info_file, &info, "eigen_residual", 0);
        self.summary.note("ground_state.nodes", format!("{} rows in {file}", t.rows.len()));
        self.summary.check("ground_state_residual", residual < 1e-4, format!("eigen-residual {residual:.2e} < 1e-4"));
        self.plot(
            exp,
            "set datafile separator ','\nset xlabel 'x (um)'\nset ylabel '|psi|^2 (1/um)'\n\
             plot 'ground_state.csv' every ::1 using 1:4 with lines title 'ground state'\n",
        )
    }

    fn iso_curves(&mut self) -> Result<()> {
        let exp = Experiment::IsoCurves;
        let spec = self.spec;
        let unit = spec.unit()?;
        let iso = &spec.iso_curves;
        let mut search = IsoSearch::new(spec.physics.d, spec.physics.b);
        search.v_well_range = (iso.v_well_min, iso.v_well_max);
        search.samples = iso.samples;
        search.v_barrier_max = iso.v_barrier_max;
        let mut plot = String::from("set datafile separator ','\nset xlabel 'V_w (hbar/s)'\nset ylabel 'V_b (hbar/s)'\nplot ");
        for (i, &target) in iso.targets.iter().enumerate() {
            let curve = trace_iso_resonance(target, &search, &unit)?;
            let mut t = Table::new(
                &format!("iso_{i}"),
                &[("v_well", "hbar/s"), ("v_barrier", "hbar/s"), ("e_r", "hbar/s"), ("gamma", "hbar/s"), ("tau", "s")],
            );
            let mut worst = (0.0f64, 0usize);
            for (j, s) in curve.samples.iter().enumerate() {
                let d = rel(s.pole.e_r, target);
                if d > worst.0 {
                    worst = (d, j);
                }
                t.push(vec![num(s.v_well), num(s.v_barrier), num(s.pole.e_r), num(s.gamma()), num(s.pole.tau)]);
            }
            let file = self.write(exp, &t)?;
            self.summary.note(&format!("iso.{i}.target"), target);
            self.summary.note(&format!("iso.{i}.samples"), curve.samples.len());
            if let Some(reason) = &curve.truncated {
                self.summary.note(&format!("iso.{i}.truncated"), reason);
            }
            if !curve.samples.is_empty() {
                self.summary.cite(&format!("iso.{i}.worst_e_r"), &file, &t, "e_r", worst.1);
            }
            self.summary.check(
                &format!("iso_{i}_energy"),
                !curve.samples.is_empty() && worst.0 <= spec.checks.iso_rel_tol,
                format!("max relative E_R error {:.2e} over {} points, tolerance {:.1e}", worst.0, curve.samples.len(), spec.checks.iso_rel_tol),
            );
            match curve.shallow_variation(search.v_well_range, 1.0 / 3.0) {
                Some((g, vb)) => self.summary.check(
                    &format!("iso_{i}_shallow"),
                    g > vb,
                    format!("relative spread over the shallow third: Γ {g:.3}, V_b {vb:.3}"),
                ),
                None => self.summary.check(&format!("iso_{i}_shallow"), false, "fewer than two shallow samples".into()),
            }
            if i > 0 {
                plot.push_str(", ");
            }
            plot.push_str(&format!("'iso_{i}.csv' every ::1 using 1:2 with linespoints title 'E_R = {target}'"));
        }
        plot.push('\n');
        self.plot(exp, &plot)
    }

    fn delay_spectrum(&mut self) -> Result<()> {
        let exp = Experiment::DelaySpectrum;
        let spec = self.spec;
        let (cfg, unit) = (spec.target()?, spec.unit()?);
        let res = self.resonance()?;
        let ds = &spec.delay_spectrum;
        let (lo, hi) = (res.e_r - ds.half_width_gamma * res.gamma, res.e_r + ds.half_width_gamma * res.gamma);
        let energies: Vec<f64> =
            (0..ds.points).map(|i| lo + (hi - lo) * i as f64 / (ds.points - 1) as f64).filter(|e| *e > 0.0).collect();
        let ks: Vec<f64> = energies.iter().map(|e| unit.wavenumber(*e)).collect();
        let delta = phase_shift_curve(&cfg, &unit, &ks)?;
        let delays = ks.iter().map(|k| delay_time(&cfg, &unit, *k)).collect::<vprep::Result<Vec<f64>>>()?;
        let mut t = Table::new("delay", &[("energy", "hbar/s"), ("k", "1/um"), ("delay", "s"), ("delta", "rad")]);
        for i in 0..energies.len() {
            t.push(vec![num(energies[i]), num(ks[i]), num(delays[i]), num(delta[i])]);
        }
        self.write(exp, &t)?;
        let fit = fit_lorentzian_with_background(&energies, &delays, (lo, hi))?;
        let mut f = Table::new("delay_fit", &[("e_r", "hbar/s"), ("gamma", "hbar/s"), ("amplitude", "s"), ("background", "s"), ("pole_e_r", "hbar/s"), ("pole_gamma", "hbar/s")]);
        f.push(vec![num(fit.e_r), num(fit.gamma), num(fit.amplitude), num(fit.background), num(res.e_r), num(res.gamma)]);
        let file = self.write(exp, &f)?;
        self.summary.cite("delay_fit.e_r", &file, &f, "e_r", 0);
        self.summary.cite("delay_fit.gamma", &file, &f, "gamma", 0);
        let (de, dg) = (rel(fit.e_r, res.e_r), rel(fit.gamma, res.gamma));
        let tol = spec.checks.delay_fit_rel_tol;
        self.summary.check(
            "delay_fit_matches_pole",
            de <= tol && dg <= tol,
            format!("relative errors E_R {de:.2e}, Γ {dg:.2e}, tolerance {tol:.1e}"),
        );
        self.plot(
            exp,
            "set datafile separator ','\nset xlabel 'E (hbar/s)'\nset ylabel 'delay (s)'\n\
             plot 'delay.csv' every ::1 using 1:3 with lines title 'delay time'\n",
        )
    }

    fn decay_curves(&mut self) -> Result<()> {
        let exp = Experiment::DecayCurves;
        let spec = self.spec;
        let dc = &spec.decay_curves;
        let times = self.times(&dc.t_switch, dc.t_switch_unit)?;
        let tau = self.resonance()?.tau;
        let mut records = Vec::new();
        for &t_switch in &times {
            let study = self.study()?;
            let mut study = study.clone();
            study.dx = spec.numerics.dx;
            records.push(decay_with_box(&study, t_switch, dc.t_end, spec.numerics.decay_box)?);
        }
        let mut cols: Vec<(String, String)> = vec![("t".into(), "s".into())];
        for i in 0..times.len() {
            cols.push((format!("p_w_{i}"), String::new()));
        }
        let col_refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let mut t = Table::new("decay", &col_refs);
        let n = records.iter().map(|r| r.times.len()).min().unwrap_or(0);
        for j in (0..n).step_by(dc.stride) {
            let mut row = vec![num(records[0].times[j])];
            row.extend(records.iter().map(|r| num(r.p_w[j])));
            t.push(row);
        }
        self.write(exp, &t)?;
        let mut f = Table::new(
            "decay_fits",
            &[("t_switch", "s"), ("t_switch_tau", ""), ("fit_t_min", "s"), ("tau_fit", "s"), ("quality", ""), ("tau_pole", "s")],
        );
        for (i, (&t_switch, rec)) in times.iter().zip(&records).enumerate() {
            let t_min = if dc.fit_t_min.len() == 1 { dc.fit_t_min[0] } else { dc.fit_t_min[i] };
            let fit = fit_exponential_decay(rec, t_min).with_context(|| format!("fit of run {i}"))?;
            f.push(vec![num(t_switch), num(t_switch / tau), num(t_min), num(fit.tau), num(fit.quality), num(tau)]);
        }
        let file = self.write(exp, &f)?;
        let tol = spec.checks.decay_tau_rel_tol;
        for i in 0..times.len() {
            self.summary.cite(&format!("decay.{i}.tau_fit"), &file, &f, "tau_fit", i);
            let Cell::Num(v) = f.rows[i][3] else { unreachable!() };
            let d = rel(v, tau);
            self.summary.check(
                &format!("decay_{i}_lifetime"),
                d <= tol,
                format!("fitted τ {v:.5} s against pole τ {tau:.5} s, relative error {d:.2e}, tolerance {tol:.1e}"),
            );
        }
        let mut plot = String::from("set datafile separator ','\nset logscale y\nset xlabel 't (s)'\nset ylabel 'P_W'\nplot ");
        for (i, ts) in times.iter().enumerate() {
            if i > 0 {
                plot.push_str(", ");
            }
            plot.push_str(&format!("'decay.csv' every ::1 using 1:{} with lines title 'T = {:.4} s'", i + 2, ts));
        }
        plot.push('\n');
        self.plot(exp, &plot)
    }

    fn spectrum_vs_t(&mut self) -> Result<()> {
        let exp = Experiment::SpectrumVsT;
        let spec = self.spec;
        let sv = &spec.spectrum_vs_t;
        let times = self.times(&sv.t_switch, sv.t_switch_unit)?;
        let study = self.study()?.clone();
        let res = study.resonance;
        let mut dists = Vec::new();
        for &ts in &times {
            dists.push(study.spectrum(ts).with_context(|| format!("spectrum for T = {ts} s"))?);
        }
        let energies = study.energy_grid.energies().to_vec();
        let reference = lorentzian_reference(&res, &energies)?;
        let mut cols: Vec<(String, String)> = vec![("energy".into(), "hbar/s".into()), ("reference".into(), "s".into())];
        for i in 0..times.len() {
            cols.push((format!("p_{i}"), "s".into()));
        }
        let col_refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let mut t = Table::new("spectra", &col_refs);
        for j in 0..energies.len() {
            let mut row = vec![num(energies[j]), num(reference.density[j])];
            row.extend(dists.iter().map(|d| num(d.p[j])));
            t.push(row);
        }
        self.write(exp, &t)?;
        let mut s = Table::new(
            "spectrum_stats",
            &[
                ("t_switch", "s"),
                ("t_switch_tau", ""),
                ("projection_time", "s"),
                ("total", ""),
                ("peak_energy", "hbar/s"),
                ("peak_density", "s"),
                ("median", "hbar/s"),
                ("weight_10_gamma", ""),
                ("lorentzian_deviation", ""),
                ("fit_e_r", "hbar/s"),
                ("fit_gamma", "hbar/s"),
                ("fit_amplitude", "s"),
            ],
        );
        let (lo, hi) = (res.e_r - 10.0 * res.gamma, res.e_r + 10.0 * res.gamma);
        for (&ts, d) in times.iter().zip(&dists) {
            let (pe, pp) = d.peak();
            let fit = fit_lorentzian(&d.energies, &d.p, (lo, hi)).ok();
            let f = |g: fn(&vprep::LorentzianFit<f64>) -> f64| fit.as_ref().map_or(f64::NAN, g);
            s.push(vec![
                num(ts),
                num(ts / res.tau),
                num(d.projection_time),
                num(d.total),
                num(pe),
                num(pp),
                num(d.median()),
                num(d.weight_in(lo, hi)),
                num(study.lorentzian_deviation_of(d)?),
                num(f(|x| x.e_r)),
                num(f(|x| x.gamma)),
                num(f(|x| x.amplitude)),
            ]);
        }
        let file = self.write(exp, &s)?;
        let tol = spec.checks.normalization_tol;
        for (i, d) in dists.iter().enumerate() {
            self.summary.cite(&format!("spectrum.{i}.total"), &file, &s, "total", i);
            self.summary.cite(&format!("spectrum.{i}.median"), &file, &s, "median", i);
            self.summary.cite(&format!("spectrum.{i}.lorentzian_deviation"), &file, &s, "lorentzian_deviation", i);
            let dev = (d.total - 1.0).abs();
            self.summary.check(
                &format!("spectrum_{i}_normalization"),
                dev <= tol,
                format!("|∫P dE - 1| = {dev:.2e}, tolerance {tol:.1e}"),
            );
        }
        let mut plot = String::from(
            "set datafile separator ','\nset xlabel 'E (hbar/s)'\nset ylabel 'P(E) (s)'\nset xrange [",
        );
        plot.push_str(&format!("{}:{}]\nplot 'spectra.csv' every ::1 using 1:2 with lines title 'pole Lorentzian'", lo, hi));
        for (i, ts) in times.iter().enumerate() {
            plot.push_str(&format!(", 'spectra.csv' every ::1 using 1:{} with lines title 'T = {:.4} s'", i + 3, ts));
        }
        plot.push('\n');
        self.plot(exp, &plot)
    }

    fn t_scan(&mut self) -> Result<()> {
        let exp = Experiment::TScan;
        let spec = self.spec;
        let sc = &spec.t_scan;
        let study = self.study()?.clone();
        let tau = study.resonance.tau;
        let scale = if sc.range_unit == TimeUnit::Tau { tau } else { 1.0 };
        let scan = ScanSpec { points: sc.points, relative_precision: sc.relative_precision, max_refinements: sc.max_refinements };
        let mut result = Table::new(
            "t_star",
            &[("objective", ""), ("t_star", "s"), ("t_star_tau", ""), ("value", ""), ("multimodal", "")],
        );
        let mut stars = Vec::new();
        for &obj in &sc.objectives {
            let (range, name) = match obj {
                ObjectiveName::LorentzianDeviation => (sc.lorentzian_range, "lorentzian"),
                ObjectiveName::ExponentialDeviation => (sc.exponential_range, "exponential"),
            };
            let objective: Objective = obj.into();
            let r = minimize_switch_time(|t| study.objective(objective, t), (range[0] * scale, range[1] * scale), scan)
                .with_context(|| format!("{objective} scan"))?;
            let mut curve = Table::new(&format!("scan_{name}"), &[("t_switch", "s"), ("t_switch_tau", ""), ("value", "")]);
            for (t, v) in &r.curve {
                curve.push(vec![num(*t), num(t / tau), num(*v)]);
            }
            self.write(exp, &curve)?;
            result.push(vec![
                objective.to_string().into(),
                num(r.t_star),
                num(r.t_star / tau),
                num(r.value),
                if r.multimodal { "yes" } else { "no" }.into(),
            ]);
            stars.push((obj, r.t_star / tau));
        }
        let file = self.write(exp, &result)?;
        for (i, (obj, star)) in stars.iter().enumerate() {
            let name = match obj {
                ObjectiveName::LorentzianDeviation => "lorentzian",
                ObjectiveName::ExponentialDeviation => "exponential",
            };
            self.summary.cite(&format!("t_scan.{name}.t_star_tau"), &file, &result, "t_star_tau", i);
            let bracket = match obj {
                ObjectiveName::LorentzianDeviation => spec.checks.lorentzian_t_star,
                ObjectiveName::ExponentialDeviation => spec.checks.exponential_t_star,
            };
            if let Some([lo, hi]) = bracket {
                self.summary.check(
                    &format!("t_star_{name}"),
                    *star >= lo && *star <= hi,
                    format!("t_star = {star:.4} τ, accepted [{lo}, {hi}] τ"),
                );
            }
        }
        let l = stars.iter().find(|s| s.0 == ObjectiveName::LorentzianDeviation);
        let e = stars.iter().find(|s| s.0 == ObjectiveName::ExponentialDeviation);
        if let (Some(l), Some(e)) = (l, e) {
            self.summary.check(
                "t_star_ordering",
                l.1 < e.1,
                format!("lorentzian {:.4} τ < exponential {:.4} τ", l.1, e.1),
            );
        }
        self.plot(
            exp,
            "set datafile separator ','\nset logscale x\nset xlabel 'T / tau'\nset ylabel 'objective'\n\
             plot for [f in 'scan_lorentzian.csv scan_exponential.csv'] f every ::1 using 2:3 with linespoints title f\n",
        )
    }
}

fn decay_with_box(study: &SwitchStudy<f64>, t_switch: f64, t_end: f64, length: f64) -> Result<vprep::DecayRecord<f64>> {
    let mut setup = vprep::PropagationSetup::decay_profile(study.schedule(t_switch)?, study.unit);
    setup.t_end = t_end;
    setup.dt = study.dt;
    setup.grid.dx = study.dx;
    setup.e_cut = study.e_cut;
    setup.grid.length = Some(length);
    if let vprep::Absorber::ComplexScaling { strength, .. } = setup.absorber {
        setup.absorber = vprep::Absorber::ComplexScaling { width: 0.25 * length, strength };
    }
    let gs = ground_state(&study.initial, &study.unit, &setup.initial_grid(), GroundStateSelection::RequireUnique)?;
    Ok(vprep::propagate(&gs.wavefunction, &setup)?.record)
}

/// Runs the requested experiments (all of the spec's when `only` is `None`)
/// into a staging directory, then moves it to the output path.
pub fn run_experiments(spec: &ExperimentSpec, only: Option<&[Experiment]>, output: Option<&Path>) -> Result<RunReport> {
    let problems = diagnostics(spec);
    if !problems.is_empty() {
        return Err(InvalidSpec(problems).into());
    }
    let target = output.map_or_else(|| PathBuf::from(&spec.output), Path::to_path_buf);
    if let Some(parent) = target.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let stamp = Stamp { spec_name: spec.name.clone(), spec_hash: spec.hash(), version: env!("CARGO_PKG_VERSION").into() };
    let staging = Staging::new(&target, stamp)?;
    let mut ctx = Context_ { spec, staging: &staging, summary: Summary::default(), study: None };
    ctx.summary.note("spec.name", &spec.name);
    ctx.summary.note("spec.sha256", spec.hash());
    ctx.summary.note("version", env!("CARGO_PKG_VERSION"));
    let mut list: Vec<Experiment> = only.map_or_else(|| spec.experiments.clone(), <[_]>::to_vec);
    list.sort();
    list.dedup();
    for exp in list {
        log::info!("running {exp}");
        ctx.run(exp).with_context(|| format!("stage {exp}"))?;
    }
    let summary = ctx.summary;
    staging.write_text("summary.txt", &summary.render())?;
    staging.write_text("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    staging.write_text("spec.toml", &spec.to_toml())?;
    let output = staging.commit()?;
    Ok(RunReport { output, summary })
}
