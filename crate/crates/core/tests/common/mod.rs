use cbl_core::config::{
    CellSection, FieldSection, OutputSection, PropagationSection, RunConfig, ScanSection, SolverSection, Spacing,
    SweepAxis, VelocityKind,
};
use cbl_core::liouville::Polarization;
use proptest::prelude::*;
use proptest::sample::select;

const EDGES: [(&str, &str); 3] = [("5S1/2", "5P3/2"), ("5P3/2", "5D5/2"), ("5P3/2", "5D3/2")];

fn positive() -> impl Strategy<Value = f64> {
    1e-3f64..1e4
}

fn field(edge: usize) -> impl Strategy<Value = FieldSection> {
    (
        0usize..3,
        positive(),
        -5e3f64..5e3,
        1.0f64..500.0,
        select(vec![Polarization::SigmaPlus, Polarization::SigmaMinus, Polarization::Linear]),
        proptest::option::of(500.0f64..6000.0),
        proptest::option::of(select(vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.1, 0.0, 0.99]])),
    )
        .prop_map(move |(kind, strength, detuning, waist, pol, wavelength, direction)| {
            let (lower, upper) = EDGES[edge];
            let mut f = FieldSection::new(lower, upper);
            match kind {
                0 => f.power_mw = Some(strength),
                1 => f.intensity_w_cm2 = Some(strength),
                _ => f.rabi_mhz = Some(strength),
            }
            f.detuning_mhz = detuning;
            f.waist_um = waist;
            f.polarization = pol;
            f.wavelength_nm = wavelength;
            f.direction = direction;
            f
        })
}

fn scan() -> impl Strategy<Value = ScanSection> {
    (
        select(vec![
            SweepAxis::Delta1,
            SweepAxis::Delta2,
            SweepAxis::Sum,
            SweepAxis::Power,
            SweepAxis::Power1,
            SweepAxis::Power2,
            SweepAxis::Temperature,
        ]),
        1e-3f64..100.0,
        1e-3f64..1e3,
        2usize..500,
        any::<bool>(),
    )
        .prop_map(|(axis, start, span, points, log)| ScanSection {
            axis,
            start,
            stop: start + span,
            points,
            spacing: if log { Spacing::Log } else { Spacing::Linear },
        })
}

fn cell() -> impl Strategy<Value = CellSection> {
    (any::<bool>(), 250.0f64..500.0, 0.1f64..20.0, proptest::option::of(1e9f64..1e14)).prop_map(
        |(kelvin, t, length_cm, density_cm3)| CellSection {
            temperature_k: kelvin.then_some(t),
            temperature_c: (!kelvin).then_some(t - 273.15),
            length_cm,
            density_cm3,
        },
    )
}

fn solver() -> impl Strategy<Value = SolverSection> {
    (
        any::<bool>(),
        1e-6f64..1e-1,
        any::<bool>(),
        1e3f64..1e7,
        0.0f64..50.0,
        1e-12f64..1e-4,
        1e-14f64..1e-6,
        proptest::option::of(1usize..10_000),
        1e-3f64..0.5,
    )
        .prop_map(|(thermal, doppler_tolerance, pumping, transit_rate, dephasing_mhz, rtol, atol, steps, mrc)| {
            SolverSection {
                velocity: if thermal { VelocityKind::Thermal } else { VelocityKind::Stationary },
                doppler_tolerance,
                pumping,
                transit_rate,
                dephasing_mhz,
                rtol,
                atol,
                steps,
                max_relative_change: mrc,
            }
        })
}

fn propagation() -> impl Strategy<Value = PropagationSection> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..100.0, -1e3f64..1e3, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(seed_fraction, seed_blue_w_cm2, calibration, phase_mismatch_per_m, pumping, follow_second, record_profiles)| {
            PropagationSection {
                seed_fraction,
                seed_blue_w_cm2,
                calibration,
                phase_mismatch_per_m,
                pumping,
                follow_second,
                record_profiles,
            }
        },
    )
}

/// Valid configs spanning every section and option.
pub fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        select(vec!["rb85-blue", "rb85-blue-d32", "rb-uv"]),
        cell(),
        proptest::sample::subsequence(vec![0usize, 1, 2], 0..=3),
        proptest::option::of(scan()),
        solver(),
        propagation(),
        proptest::option::of("[a-z][a-z0-9_]{0,12}"),
        "[a-z][a-z0-9_/]{0,20}",
    )
        .prop_flat_map(|(scheme, cell, edges, scan, solver, propagation, stem, dir)| {
            let fields: Vec<_> = edges.into_iter().map(field).collect();
            (fields, Just((scheme, cell, scan, solver, propagation, stem, dir))).prop_map(
                |(fields, (scheme, cell, scan, solver, propagation, stem, dir))| {
                    let mut cfg = RunConfig::new(scheme, 300.0);
                    cfg.cell = cell;
                    cfg.fields = fields;
                    cfg.scan = scan;
                    cfg.solver = solver;
                    cfg.propagation = propagation;
                    cfg.output = OutputSection { dir: dir.into(), stem };
                    cfg
                },
            )
        })
}
