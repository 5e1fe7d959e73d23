//! One pass/fail line per acceptance criterion. Tolerances are pinned here.

use std::time::Instant;

use nce_lbm::constrained_runs::{backward_extrapolation, cr_reset, ConservedProjector, SmoothnessOrder};
use nce_lbm::expansion::{extract_coefficients, lift, CoefficientSet, ExpansionBasis, SamplingPolicy};
use nce_lbm::harness::{
    make_reference, restrict, run_table, run_table_with_reference, Cell, DiffusionCheck, ExperimentConfig, Preset,
};
use nce_lbm::lattice::{DistributionField, LatticeSpec, VelocitySet};
use nce_lbm::lbm::{EquilibriumKind, EquilibriumModel, Trajectory};
use nce_lbm::solver::{coefficient_newton_options, solve_coefficients, HContext};

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value > 0.0 && value / target <= factor && target / value <= factor
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn exp1_cells(orders: std::ops::RangeInclusive<usize>, ms: std::ops::RangeInclusive<usize>) -> Vec<Cell> {
    orders.flat_map(|k| ms.clone().map(move |m| Cell { basis_order: k, m })).collect()
}

/// Golden-ratio sequence in [0.1, 0.5): deterministic, positive, irregular.
fn spread(k: usize) -> f64 {
    0.1 + 0.4 * (k as f64 * 0.618_033_988_749_895).fract()
}

fn irregular_field(spec: LatticeSpec, seed: usize) -> DistributionField {
    DistributionField::from_fn(spec, |s, i| spread(seed + 7 * s + 3 * i))
}

fn models() -> Vec<EquilibriumModel> {
    let d1 = LatticeSpec::new(VelocitySet::D1Q3, 16, 1.0, 1.0 / 16.0, 1.3).unwrap();
    let d2 = LatticeSpec::new(VelocitySet::D2Q5, 8, 1.0, 1.0 / 8.0, 0.7).unwrap();
    vec![
        EquilibriumModel::new(EquilibriumKind::DensityOnly1D, d1).unwrap(),
        EquilibriumModel::new(EquilibriumKind::DensityMomentum1D, d1).unwrap(),
        EquilibriumModel::new(EquilibriumKind::DensityMomentum2D, d2).unwrap(),
    ]
}

fn max_moment_gap(model: &EquilibriumModel, f: &DistributionField, g: &DistributionField) -> f64 {
    let (a, b) = (model.conserved_moments(f), model.conserved_moments(g));
    let mut gap: f64 = 0.0;
    for s in 0..f.spec().sites() {
        gap = gap.max((a.rho[s] - b.rho[s]).abs() / b.rho[s].abs().max(1.0));
        for k in 0..model.momentum_components() {
            gap = gap.max((a.momentum[k][s] - b.momentum[k][s]).abs() / b.momentum[k][s].abs().max(1.0));
        }
    }
    gap
}

#[test]
fn criterion_1_equilibrium_baseline() {
    let start = Instant::now();
    let cfg = ExperimentConfig { cells: Vec::new(), ..ExperimentConfig::preset(Preset::Exp1) };
    let report = run_table(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let base = report.baseline().unwrap().error("all").unwrap();
    let pass = within_rel(base, 0.0415, 0.15) && elapsed < 5.0;
    verdict(1, pass, &format!("|feq - fc| = {base:.4e} (target 0.0415 +-15%), {elapsed:.2} s (< 5 s)"));
}

#[test]
fn criterion_2_table1_nce() {
    let cfg = ExperimentConfig { cells: exp1_cells(1..=2, 0..=6), ..ExperimentConfig::preset(Preset::Exp1) };
    let report = run_table(&cfg).unwrap();
    let expected = [0.0679, 0.0320, 0.0071, 0.0074, 0.0073, 0.0073, 0.0073];
    let k1: Vec<f64> = (0..=6).map(|m| report.cell(1, m).unwrap().error("all").unwrap_or(f64::NAN)).collect();
    let factor_ok: Vec<bool> = k1.iter().zip(&expected).map(|(v, p)| within_factor(*v, *p, 2.0)).collect();
    let tail = &k1[2..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let plateau = hi / lo <= 1.1;
    let k2m4 = report.cell(2, 4).unwrap().error("all").unwrap_or(f64::NAN);
    let k2_ok = (1e-5..=1e-4).contains(&k2m4);
    let converged = report.all_converged();
    let pass = factor_ok.iter().all(|b| *b) && plateau && k2_ok && converged;
    let cells: Vec<String> = k1.iter().zip(&factor_ok).map(|(v, ok)| format!("{v:.3e}{}", if *ok { "" } else { "!" })).collect();
    verdict(
        2,
        pass,
        &format!(
            "K1 m=0..6 [{}] (x2 of reference, ! = outside), plateau spread m>=2 {:.3} (<= 1.1), K2 m=4 {k2m4:.3e} (in [1e-5, 1e-4]), converged {converged}",
            cells.join(", "),
            hi / lo
        ),
    );
}

#[test]
fn criterion_3_table2_full_state_cr() {
    let report = run_table(&ExperimentConfig::preset(Preset::Exp1Cr)).unwrap();
    let expected = [0.0861, 0.0027, 3.86e-4];
    let low: Vec<f64> = (0..=2).map(|m| report.cell(0, m).unwrap().error("all").unwrap_or(f64::NAN)).collect();
    let low_ok = low.iter().zip(&expected).all(|(v, p)| within_factor(*v, *p, 2.0));
    let m6 = report.cell(0, 6).unwrap().error("all").unwrap_or(f64::NAN);
    let sizes: Vec<usize> = report.rows.iter().filter_map(|r| r.newton.map(|n| n.unknowns)).collect();
    let size_ok = sizes.len() == 7 && sizes.iter().all(|&u| u == 600);
    let pass = low_ok && m6 <= 1e-6 && size_ok && report.all_converged();
    verdict(
        3,
        pass,
        &format!(
            "m=0..2 [{:.4e}, {:.4e}, {:.4e}] (x2 of 0.0861, 0.0027, 3.86e-4), m=6 {m6:.4e} (<= 1e-6), jacobian {}x{}",
            low[0],
            low[1],
            low[2],
            sizes.first().copied().unwrap_or(0),
            sizes.first().copied().unwrap_or(0)
        ),
    );
}

#[test]
fn criterion_4_cross_method_agreement() {
    let nce_cfg = ExperimentConfig { cells: exp1_cells(4..=4, 1..=4), ..ExperimentConfig::preset(Preset::Exp1) };
    let cr_cfg = ExperimentConfig { cells: exp1_cells(0..=0, 1..=4), ..ExperimentConfig::preset(Preset::Exp1Cr) };
    let (model, fc) = make_reference(&nce_cfg).unwrap();
    let nce = run_table_with_reference(&nce_cfg, &model, &fc).unwrap();
    let cr = run_table_with_reference(&cr_cfg, &model, &fc).unwrap();
    let mut pass = nce.all_converged() && cr.all_converged();
    let mut cells = Vec::new();
    for m in 1..=4 {
        let a = nce.cell(4, m).unwrap().error("all").unwrap_or(f64::NAN);
        let b = cr.cell(0, m).unwrap().error("all").unwrap_or(f64::NAN);
        pass &= within_factor(a, b, 3.0);
        cells.push(format!("m={m}: {a:.3e} vs {b:.3e}"));
    }
    verdict(4, pass, &format!("NCE K4 vs full-state CR within x3: {}", cells.join("; ")));
}

#[test]
fn criterion_5_table3_d2q5() {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(Preset::Exp2);
    let report = run_table(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let base = report.baseline().unwrap();
    let b: Vec<f64> = (0..5).map(|i| base.error(&i.to_string()).unwrap()).collect();
    let base_ok = within_rel(b[0], 0.0470, 0.15) && b[1..].iter().all(|v| within_rel(*v, 0.0550, 0.15));
    let cell = report.cell(2, 3).unwrap();
    let e: Vec<f64> = (0..5).map(|i| cell.error(&i.to_string()).unwrap_or(f64::NAN)).collect();
    let v0_ok = within_factor(e[0], 9.7954e-5, 3.0);
    let pair_gap = (e[1] - e[3]).abs().max((e[2] - e[4]).abs()).max((b[1] - b[3]).abs()).max((b[2] - b[4]).abs());
    let pairs_ok = pair_gap <= 1e-10;

    let model = cfg.equilibrium_model().unwrap();
    let unknowns: Vec<usize> =
        (1..=3).map(|k| model.spec().q() * ExpansionBasis::for_model(&model, k, false).unwrap().len()).collect();
    // the bound covers blocks 1 and 2; block 3 lists 18 terms, so 90 unknowns
    let small = unknowns[..2].iter().all(|&u| u <= 65);
    let pass = base_ok && v0_ok && pairs_ok && small && elapsed < 600.0 && report.all_converged();
    verdict(
        5,
        pass,
        &format!(
            "baseline v0 {:.4e} (0.0470 +-15%), v1..v4 {:.4e} {:.4e} {:.4e} {:.4e} (0.0550 +-15%); \
             block 2 m=3 v0 {:.4e} (x3 of 9.7954e-5); pair gap {pair_gap:.1e} (<= 1e-10); unknowns per block {unknowns:?} (blocks 1-2 <= 65); full table {elapsed:.1} s (< 600 s)",
            b[0], b[1], b[2], b[3], b[4], e[0]
        ),
    );
}

#[test]
fn criterion_6_property_suite() {
    let mut failures = Vec::new();

    // moment round trip
    let spec = LatticeSpec::new(VelocitySet::D1Q3, 8, 8.0, 1.0, 1.0).unwrap();
    let prod = spec.moment_matrix().unwrap() * spec.inverse_moment_matrix().unwrap();
    let mm_err = (prod - nalgebra::Matrix3::identity()).amax();
    if mm_err > 1e-15 {
        failures.push(format!("M M^-1 deviation {mm_err:.1e}"));
    }

    // collision conservation, reset pinning and idempotence
    let mut collide_gap: f64 = 0.0;
    let mut pin_gap: f64 = 0.0;
    let mut idem_gap: f64 = 0.0;
    for (k, model) in models().iter().enumerate() {
        let f = irregular_field(*model.spec(), 11 * k);
        collide_gap = collide_gap.max(max_moment_gap(model, &model.collide(&f).unwrap(), &f));
        let f0 = irregular_field(*model.spec(), 11 * k + 5);
        let proj = ConservedProjector::new(*model);
        let reset = cr_reset(&f, &f0, &proj).unwrap();
        pin_gap = pin_gap.max(max_moment_gap(model, &reset, &f0));
        let once = proj.apply(&f).unwrap();
        let twice = proj.apply(&once).unwrap();
        idem_gap = idem_gap.max(once.as_slice().iter().zip(twice.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    for (name, gap) in [("collision", collide_gap), ("reset pinning", pin_gap), ("projector idempotence", idem_gap)] {
        if gap > 1e-13 {
            failures.push(format!("{name} gap {gap:.1e}"));
        }
    }

    // temporal polynomial reproduction, integer data so the check is exact
    let spec = LatticeSpec::new(VelocitySet::D1Q3, 8, 1.0, 0.1, 1.0).unwrap();
    for m in 0..=6usize {
        let poly = |s: usize, i: usize, t: usize| -> f64 {
            (0..=m).map(|p| ((s + 2 * i + p) % 5) as f64 * (t as f64).powi(p as i32)).sum()
        };
        let snaps: Vec<DistributionField> =
            (0..=m + 1).map(|t| DistributionField::from_fn(spec, |s, i| poly(s, i, t))).collect();
        let prev = backward_extrapolation(&Trajectory::new(snaps).unwrap(), SmoothnessOrder::new(m).unwrap()).unwrap();
        if prev != DistributionField::from_fn(spec, |s, i| poly(s, i, 0)) {
            failures.push(format!("degree {m} polynomial not reproduced"));
        }
    }

    // extraction recovers synthesized coefficients
    let cfg = ExperimentConfig::preset(Preset::Exp1);
    let model = cfg.equilibrium_model().unwrap();
    let fields = cfg.initial_fields().unwrap();
    let basis = ExpansionBasis::for_model(&model, 3, false).unwrap();
    let truth = CoefficientSet::from_vec(3, basis.len(), (0..3 * basis.len()).map(|k| spread(k) - 0.3).collect()).unwrap();
    let f = lift(&basis, &truth, &fields, &model).unwrap();
    let got = extract_coefficients(&basis, &f, &fields, &model, &SamplingPolicy::AllSites).unwrap();
    let rel = got.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / truth.max_abs();
    if rel > 1e-10 {
        failures.push(format!("coefficient recovery error {rel:.1e}"));
    }

    // diffusion rate
    let diffusion = DiffusionCheck::default().run().unwrap();
    if !diffusion.within(0.02) {
        failures.push(format!("diffusion rate off by {:.2}%", 100.0 * diffusion.relative_error));
    }

    let detail = format!(
        "M M^-1 {mm_err:.1e}, collision {collide_gap:.1e}, pinning {pin_gap:.1e}, idempotence {idem_gap:.1e}, \
         polynomials m<=6, recovery {rel:.1e}, diffusion D {:.5} vs {:.5}{}",
        diffusion.fitted_d,
        diffusion.predicted_d,
        if failures.is_empty() { String::new() } else { format!(" | {}", failures.join("; ")) }
    );
    verdict(6, failures.is_empty(), &detail);
}

#[test]
fn criterion_7_fixed_point_contract() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut failures = Vec::new();
    let cases = [(Preset::Exp1, 1..=4usize, vec![0, 1, 2, 3, 4, 5, 6]), (Preset::Exp2, 1..=3, vec![0, 3, 6])];
    for (preset, orders, ms) in cases {
        let cfg = ExperimentConfig::preset(preset);
        let (model, fc) = make_reference(&cfg).unwrap();
        let targets = restrict(&fc, &model);
        for k in orders {
            for &m in &ms {
                let basis = ExpansionBasis::for_model(&model, k, false).unwrap();
                let ctx =
                    HContext::new(model, basis, targets.clone(), SmoothnessOrder::new(m).unwrap(), &cfg.sampling).unwrap();
                let (theta, report) = solve_coefficients(&ctx, &coefficient_newton_options()).unwrap();
                if !report.converged {
                    continue;
                }
                let image = ctx.h(&theta).unwrap();
                let r = image.as_slice().iter().zip(theta.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let scaled = r / theta.max_abs().max(1.0);
                worst = worst.max(scaled);
                checked += 1;
                if scaled > 1e-10 {
                    failures.push(format!("{}: K{k} m={m} {scaled:.1e}", cfg.name));
                }
            }
        }
    }
    verdict(
        7,
        failures.is_empty() && checked > 0,
        &format!("{checked} converged solves, worst |h(theta) - theta|/max(1,|theta|) {worst:.1e} (<= 1e-10) {}", failures.join("; ")),
    );
}
