//! Scenario dispatch and CSV emission.

use std::path::{Path, PathBuf};

use fvlab_core::claw::{solve_claw, ClawSolution, ScalarIBVP};
use fvlab_core::kk::{KKData, KKState};
use fvlab_core::transport::{solve_transport, DensityFluxRecord, TransportIBVP, TransportSolution};

use crate::config::{DataPreset, ExperimentConfig, Scenario, Values};
use crate::csv::{write_atomic, Table};
use crate::error::HarnessError;
use crate::scenarios::{self, Settings};
use crate::studies::{self, Diagnostics, Perturbation, TransportStudy};

/// The four tables of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub snapshots: Table,
    pub traces: Table,
    pub diagnostics: Table,
    pub summary: Table,
}

pub const FILES: [&str; 4] = ["snapshots.csv", "traces.csv", "diagnostics.csv", "summary.csv"];

impl Outputs {
    fn new(seed: u64) -> Self {
        let mut out = Outputs::default();
        for table in out.tables_mut() {
            table.push(0.0, "run", "seed", seed as f64);
        }
        out
    }

    fn tables_mut(&mut self) -> [&mut Table; 4] {
        [&mut self.snapshots, &mut self.traces, &mut self.diagnostics, &mut self.summary]
    }

    pub fn tables(&self) -> [&Table; 4] {
        [&self.snapshots, &self.traces, &self.diagnostics, &self.summary]
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        for (name, table) in FILES.iter().zip(self.tables()) {
            write_atomic(&dir.join(name), &table.render())?;
        }
        Ok(())
    }

    fn diagnostics(&mut self, t: f64, id: &str, d: &Diagnostics) {
        for (q, v) in d.rows() {
            self.diagnostics.push(t, id, q, v);
        }
    }
}

/// Levels written as snapshots: every `stride`-th plus the last.
fn levels(count: usize, stride: Option<usize>) -> Vec<usize> {
    let steps = count.saturating_sub(1);
    let stride = stride.unwrap_or((steps / 10).max(1));
    let mut out: Vec<usize> = (0..count).step_by(stride).collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

fn snapshot_claw(table: &mut Table, sol: &ClawSolution, stride: Option<usize>) {
    for n in levels(sol.times.len(), stride) {
        for (c, v) in sol.snapshots[n].values().iter().enumerate() {
            table.push(sol.times[n], format!("c{c}"), "rho", *v);
        }
    }
}

fn snapshot_transport(table: &mut Table, record: &DensityFluxRecord, sol: &TransportSolution, stride: Option<usize>, name: &str) {
    let m = sol.components();
    for n in levels(sol.times.len(), stride) {
        let t = sol.times[n];
        let cells = record.grid().cell_count();
        let rho = record.density(n).values();
        let recovered = sol.recovered(record, n);
        for c in 0..cells {
            table.push(t, format!("c{c}"), "rho", rho[c]);
            for j in 0..m {
                table.push(t, format!("c{c}"), &format!("q{j}"), sol.q[n].get(j, c));
                if let Some(u) = recovered[j * cells + c] {
                    table.push(t, format!("c{c}"), &format!("{name}{j}"), u);
                }
            }
        }
    }
}

fn trace_rows(table: &mut Table, record: &DensityFluxRecord, sol: &TransportSolution, stride: Option<usize>) {
    let m = sol.components();
    for n in levels(record.steps(), stride) {
        let t = record.times()[n];
        for (b, mass) in record.step(n).boundary_flux.iter().enumerate() {
            let id = format!("f{b}");
            table.push(t, &id, "mass_flux", *mass);
            let class = match sol.classes[n][b] {
                fvlab_core::transport::FaceClass::Inflow => -1.0,
                fvlab_core::transport::FaceClass::Outflow => 1.0,
                fvlab_core::transport::FaceClass::Characteristic => 0.0,
            };
            table.push(t, &id, "class", class);
            for j in 0..m {
                table.push(t, &id, &format!("trace{j}"), sol.boundary_flux[n][b * m + j]);
            }
        }
    }
}

fn flag(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

/// Runs a scenario and collects its tables.
pub fn execute(settings: &Settings) -> Result<Outputs, HarnessError> {
    let mut out = Outputs::new(settings.seed);
    let dim = settings.scenario.dim();
    let seed = settings.seed;
    let t_end = settings.final_time;
    match settings.scenario {
        Scenario::Constant1d => {
            let grid = settings.grid()?;
            let flux = scenarios::flux_family(&settings.flux, dim)?;
            let rho = scenarios::data_or(&settings.initial, DataPreset::Constant { value: Values::One(0.5) }, dim, seed, 1)?;
            let rho_b = scenarios::data_or(&settings.boundary, DataPreset::Constant { value: Values::One(0.5) }, dim, seed, 1)?;
            let problem = ScalarIBVP::new(flux, scenarios::cell_field(&rho, grid, 1)?, scenarios::face_data(&rho_b, dim, 1), t_end)?;
            let claw = solve_claw(&problem, settings.cfl)?;
            let record = DensityFluxRecord::from_claw(&claw)?;
            let value = scenarios::preset_fn(&DataPreset::Constant { value: Values::One(0.7) }, dim, seed)?.1;
            let tp = TransportIBVP::new(&record, scenarios::cell_field(&value, grid, 1)?, scenarios::face_data(&value, dim, 1))?;
            let sol = solve_transport(&tp)?;
            let drift = (0..=record.steps())
                .flat_map(|n| sol.recovered(&record, n))
                .flatten()
                .fold(0.0, |m: f64, u| m.max((u - 0.7).abs()));
            snapshot_transport(&mut out.snapshots, &record, &sol, settings.stride, "u");
            trace_rows(&mut out.traces, &record, &sol, settings.stride);
            out.diagnostics(t_end, "density", &studies::claw_diagnostics(&problem, &claw)?);
            out.diagnostics(t_end, "transport", &studies::transport_diagnostics(&record, &sol)?);
            out.summary.push(t_end, "transport", "max_drift", drift);
        }
        Scenario::RiemannShock1d | Scenario::RiemannRarefaction1d => {
            let flux = scenarios::flux_family(&settings.flux, dim)?;
            let fallback = if settings.scenario == Scenario::RiemannShock1d { (1.0, 0.0) } else { (0.0, 1.0) };
            let (left, right, at) = match &settings.initial {
                None => (fallback.0, fallback.1, 0.25),
                Some(DataPreset::Step { left: Values::One(l), right: Values::One(r), at, .. }) => (*l, *r, *at),
                Some(_) => return Err(HarnessError::Config("Riemann scenarios take a scalar step as initial data".into())),
            };
            let (rows, finest) = studies::riemann_study(&flux, left, right, at, t_end, settings.cfl, &settings.refinements)?;
            for r in &rows {
                let id = format!("n{}", r.n);
                out.summary.push(t_end, &id, "dx", r.dx);
                out.summary.push(t_end, &id, "l1_error", r.l1_error);
                if let Some(e) = r.front_error {
                    out.summary.push(t_end, &id, "front_error", e);
                }
                out.diagnostics(t_end, &id, &r.diagnostics);
            }
            let decreasing = studies::strictly_decreasing(rows.iter().map(|r| r.l1_error));
            out.summary.push(t_end, "study", "l1_strictly_decreasing", flag(decreasing));
            if let Some((_, sol)) = finest {
                snapshot_claw(&mut out.snapshots, &sol, settings.stride);
                trace_claw(&mut out.traces, &sol, settings.stride);
            }
        }
        Scenario::AdvectionStep1d | Scenario::Shear2d | Scenario::Rotation2d => {
            let (initial, boundary) = match settings.scenario {
                Scenario::AdvectionStep1d => (
                    DataPreset::Step { left: Values::One(1.0), right: Values::One(0.0), at: 0.4, axis: 0 },
                    DataPreset::Constant { value: Values::One(0.5) },
                ),
                Scenario::Shear2d => (
                    DataPreset::Step { left: Values::One(1.0), right: Values::One(0.0), at: 0.5, axis: 0 },
                    DataPreset::Constant { value: Values::One(0.5) },
                ),
                _ => (
                    DataPreset::Bump { center: vec![0.5, 0.75], radius: 0.15, height: Values::One(1.0), base: None },
                    DataPreset::Constant { value: Values::One(0.0) },
                ),
            };
            let u0 = scenarios::data_or(&settings.initial, initial, dim, seed, 1)?;
            let g = scenarios::data_or(&settings.boundary, boundary, dim, seed, 1)?;
            let refs = &settings.refinements;
            let study: TransportStudy = match settings.scenario {
                Scenario::AdvectionStep1d => studies::advection_study(&u0, &g, t_end, settings.cfl, refs)?,
                Scenario::Shear2d => studies::shear_study(&u0, &g, t_end, settings.cfl, refs)?,
                _ => studies::rotation_study(&u0, &g, t_end, settings.cfl, refs)?,
            };
            for r in &study.rows {
                let id = format!("n{}", r.n);
                out.summary.push(t_end, &id, "l1_error", r.l1_error);
                if let Some(w) = r.weak_residual {
                    out.summary.push(t_end, &id, "weak_residual", w);
                }
                out.diagnostics(t_end, &id, &r.diagnostics);
            }
            for w in study.rows.windows(2) {
                if let (Some(a), Some(b)) = (w[0].weak_residual, w[1].weak_residual) {
                    out.summary.push(t_end, format!("n{}", w[1].n), "weak_ratio", b / a);
                }
            }
            out.summary.push(t_end, "study", "l1_strictly_decreasing", flag(studies::strictly_decreasing(study.rows.iter().map(|r| r.l1_error))));
            if let Some((record, sol)) = &study.finest {
                if settings.scenario != Scenario::Rotation2d {
                    let rows = studies::hyperplane_study(record, sol, 0, 0.5, 4)?;
                    for r in &rows {
                        out.summary.push(t_end, format!("plane{:+}", r.offset), "hyperplane_l1", r.l1_distance);
                    }
                    out.summary.push(t_end, "study", "hyperplane_monotone", flag(studies::hyperplane_monotone(&rows)));
                }
                snapshot_transport(&mut out.snapshots, record, sol, settings.stride, "u");
                trace_rows(&mut out.traces, record, sol, settings.stride);
            }
        }
        Scenario::Kk1d | Scenario::Kk2d => {
            let flux = scenarios::flux_family(&settings.flux, dim)?;
            let build = |n: usize| kk_data(settings, &flux, n);
            let (rows, finest) = studies::kk_study(build, settings.cfl, &settings.refinements, seed)?;
            for r in &rows {
                let id = format!("n{}", r.n);
                for (q, v) in [
                    ("modulus_min", r.modulus_min),
                    ("modulus_max", r.modulus_max),
                    ("modulus_bound", r.modulus_bound),
                    ("direction_max", r.direction_max),
                    ("unit_defect", r.unit_defect),
                    ("entropy_pair", r.entropy_pair),
                ] {
                    out.summary.push(t_end, &id, q, v);
                }
                out.diagnostics(t_end, &format!("{id}/modulus"), &r.modulus);
                out.diagnostics(t_end, &format!("{id}/direction"), &r.direction);
            }
            if let Some(state) = &finest {
                snapshot_kk(&mut out.snapshots, state, settings.stride);
                trace_rows(&mut out.traces, &state.record, &state.direction, settings.stride);
            }
        }
        Scenario::Regularize1d | Scenario::Regularize2d => {
            let n = settings.cells[0];
            let record = if dim == 1 {
                scenarios::regularize_1d_record(n, t_end, settings.cfl)?
            } else {
                scenarios::regularize_2d_record(n, t_end, settings.cfl)?
            };
            let center = vec![0.5; dim];
            let u0 = scenarios::data_or(
                &settings.initial,
                DataPreset::Bump { center, radius: 0.3, height: Values::One(1.0), base: None },
                dim,
                seed,
                1,
            )?;
            let g = scenarios::data_or(&settings.boundary, DataPreset::Constant { value: Values::One(0.5) }, dim, seed, 1)?;
            let (rows, sol) = studies::regularize_study(&record, &u0, &g, settings.eps0, &settings.regularization)?;
            for r in &rows {
                let id = format!("m{}", r.m);
                for (q, v) in [
                    ("scale", r.scale),
                    ("under_resolved", flag(r.under_resolved)),
                    ("defect_l1", r.defect_l1),
                    ("control_defect_l1", r.control_l1),
                    ("momentum_ratio", r.momentum_ratio),
                    ("floor_margin", r.floor_margin),
                    ("inflow_disagreement", r.inflow_disagreement),
                    ("outflow_disagreement", r.outflow_disagreement),
                    ("characteristics_gap", r.characteristics_gap),
                ] {
                    out.summary.push(t_end, &id, q, v);
                }
            }
            out.summary.push(t_end, "study", "defect_non_increasing", flag(studies::non_increasing(rows.iter().map(|r| r.defect_l1))));
            out.diagnostics(t_end, "transport", &studies::transport_diagnostics(&record, &sol)?);
            snapshot_transport(&mut out.snapshots, &record, &sol, settings.stride, "u");
            trace_rows(&mut out.traces, &record, &sol, settings.stride);
        }
        Scenario::StabilityShear2d => {
            let n = settings.cells[0];
            let mollify = studies::stability_study(n, t_end, settings.cfl, settings.ladder, Perturbation::Mollify)?;
            let shift = studies::stability_study(n, t_end, settings.cfl, settings.ladder, Perturbation::BoundaryShift)?;
            for (name, report) in [("mollify", &mollify), ("shift", &shift)] {
                for r in &report.rows {
                    let id = format!("{name}/rung{}", r.rung);
                    out.summary.push(t_end, &id, "eps", r.eps);
                    out.summary.push(t_end, &id, "solution_l1", r.solution_l1);
                    out.summary.push(t_end, &id, "trace_l1", r.trace_l1);
                }
            }
            if let Some(c) = shift.fitted_constant {
                out.summary.push(t_end, "shift", "fitted_constant", c);
            }
            let (record, sol) = &mollify.reference;
            out.diagnostics(t_end, "reference", &studies::transport_diagnostics(record, sol)?);
            snapshot_transport(&mut out.snapshots, record, sol, settings.stride, "u");
            trace_rows(&mut out.traces, record, sol, settings.stride);
        }
    }
    Ok(out)
}

fn trace_claw(table: &mut Table, sol: &ClawSolution, stride: Option<usize>) {
    for n in levels(sol.steps(), stride) {
        for (b, v) in sol.boundary_flux[n].iter().enumerate() {
            table.push(sol.times[n], format!("f{b}"), "mass_flux", *v);
        }
    }
}

fn snapshot_kk(table: &mut Table, state: &KKState, stride: Option<usize>) {
    let m = state.components();
    for n in levels(state.u.len(), stride) {
        let t = state.record.times()[n];
        let cells = state.record.grid().cell_count();
        let rho = state.record.density(n).values();
        for c in 0..cells {
            table.push(t, format!("c{c}"), "rho", rho[c]);
            for j in 0..m {
                table.push(t, format!("c{c}"), &format!("U{j}"), state.u[n].get(j, c));
            }
        }
    }
}

fn kk_data(settings: &Settings, flux: &fvlab_core::claw::FluxFamily, n: usize) -> Result<KKData, HarnessError> {
    let dim = settings.scenario.dim();
    match (&settings.initial, &settings.boundary) {
        (None, None) if dim == 1 => scenarios::kk_1d_data(n, flux, settings.final_time),
        (None, None) => scenarios::kk_2d_data(n, flux, settings.final_time),
        (initial, boundary) => {
            let fallback = DataPreset::Constant { value: Values::Many(vec![0.0; 3]) };
            let (m, u0) = scenarios::preset_fn(initial.as_ref().unwrap_or(&fallback), dim, settings.seed)?;
            let ub = scenarios::data_or(boundary, DataPreset::Constant { value: Values::Many(vec![0.0; m]) }, dim, settings.seed, m)?;
            let grid = scenarios::grid_with(dim, n, None)?;
            Ok(KKData::new(flux.clone(), scenarios::cell_field(&u0, grid, m)?, scenarios::face_data(&ub, dim, m), settings.final_time)?)
        }
    }
}

/// Options that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub refine: u32,
}

/// Runs `config` and writes its tables; returns the output directory.
pub fn run(config: &ExperimentConfig, overrides: &Overrides) -> Result<PathBuf, HarnessError> {
    let mut settings = Settings::resolve(config, overrides.refine);
    if let Some(seed) = overrides.seed {
        settings.seed = seed;
    }
    let dir = overrides
        .out
        .clone()
        .or_else(|| config.experiment.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(settings.scenario.name()));
    let outputs = execute(&settings)?;
    outputs.write(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_levels_include_last() {
        assert_eq!(levels(11, None), vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(levels(8, Some(3)), vec![0, 3, 6, 7]);
        assert_eq!(levels(1, None), vec![0]);
    }
}
