//! Acceptance suite: one PASS/FAIL line per criterion, with runtime budget.
//!
//! Runs without the libtest harness so the report is always printed. Exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use rdlab::experiments::{
    build_u_theta, commuting_unitary, markov_campaign, positivity_bound, run_theta_sweep, tau_se, CampaignConfig,
    TwoQubitScenario,
};
use rdlab::operator::{c, max_abs, min_eigenvalue, BlochVector, ComplexMatrix};
use rdlab::qmap::{is_cp, operator_sum, trace_preservation_error, QMap};
use rdlab::random::{self, SeededRng};
use rdlab::reference::{
    build_reference_bipartite, build_reference_tripartite, evolve_reference, evolve_reference_bipartite,
    generalized_steer, markov_test, reduced_dynamics, steer,
};
use rdlab::assignment::{build_assignment, OperatorSubspace};
use rdlab::Result;

/// Choi eigenvalue floor for "CP" in criteria 3 and 5.
const CP_FLOOR: f64 = -1e-9;

/// Frozen goldens from an independent dense-numpy oracle.
const GOLDEN_CMI: [(f64, f64); 3] = [
    (0.1, 0.010_268_581_529_789_6),
    (0.2, 0.023_837_179_018_332_044),
    (0.3, 0.020_058_300_492_658_443),
];
const GOLDEN_WORST_THETA: f64 = 13.0 * PI / 180.0;
const GOLDEN_WORST_EIG: f64 = -0.029_494_904_923_426_435;
const GOLDEN_EPS: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn criterion_1() -> Result<Outcome> {
    let w = TwoQubitScenario::new(0.0)?.with_alphas([0.5; 3]).reference_tripartite()?;
    let v = markov_test(&w)?;
    let mut pass = v.is_markov && v.cmi <= 1e-8;
    let mut detail = format!("a=0: markov={} cmi={:.2e}", v.is_markov, v.cmi);
    for (a, golden) in GOLDEN_CMI {
        let v = markov_test(&TwoQubitScenario::new(a)?.reference_tripartite()?)?;
        pass &= !v.is_markov && v.cmi > 1e-4 && (v.cmi - golden).abs() <= GOLDEN_EPS;
        detail.push_str(&format!("; a={a}: markov={} cmi={:.6e}", v.is_markov, v.cmi));
    }
    outcome(pass, detail)
}

fn criterion_2() -> Result<Outcome> {
    let dir = [1.0 / 3f64.sqrt(); 3];
    let mut pass = true;
    let mut worst_edge = 0.0_f64;
    let mut worst_past = f64::NEG_INFINITY;
    for a in [-0.5, -0.1, 0.1, 0.2, 0.3] {
        let b = positivity_bound(a)?;
        for scale in [b, 1.01 * b] {
            let lam = min_eigenvalue(&tau_se(a, BlochVector(dir.map(|x| x * scale))));
            if scale == b {
                worst_edge = worst_edge.max(lam.abs());
                pass &= lam.abs() <= 1e-9;
            } else {
                worst_past = worst_past.max(lam);
                pass &= lam < 0.0;
            }
        }
    }
    outcome(pass, format!("max |λ_min| at bound {worst_edge:.2e}; max λ_min past bound {worst_past:.3e}"))
}

fn criterion_3() -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    for a in [0.1, 0.3] {
        let lambda = TwoQubitScenario::new(a)?.assignment()?;
        for k in 0..30 {
            let t = 2.0 * PI * k as f64 / 30.0;
            let (_, min) = is_cp(&reduced_dynamics(&lambda, &commuting_unitary(t))?)?;
            worst = worst.min(min);
        }
    }
    outcome(worst >= CP_FLOOR, format!("60 maps, worst min Choi eigenvalue {worst:.2e}"))
}

fn criterion_4() -> Result<Outcome> {
    let report = run_theta_sweep(&TwoQubitScenario::new(0.25)?)?;
    let s = &report.summary;
    let golden = (s.worst_theta - GOLDEN_WORST_THETA).abs() <= 1e-12
        && (s.worst_eigenvalue - GOLDEN_WORST_EIG).abs() <= GOLDEN_EPS;
    let pass = report.rows.len() == 181 && s.any_non_cp && s.worst_eigenvalue < -1e-6 && golden;
    outcome(
        pass,
        format!(
            "{} points, any_non_cp={}, worst θ={:.6} eig={:.12e}",
            report.rows.len(),
            s.any_non_cp,
            s.worst_theta,
            s.worst_eigenvalue
        ),
    )
}

fn criterion_5() -> Result<Outcome> {
    let config = CampaignConfig {
        n_search: 0,
        ..CampaignConfig::new(20_240_501, 25)
    };
    let report = markov_campaign(config, &[(2, 2), (2, 3), (3, 2), (3, 3)])?;
    let checks: usize = report.markov.iter().map(|m| m.checks).sum();
    let all_markov = report.markov.iter().all(|m| m.is_markov);
    let worst = report.markov.iter().map(|m| m.worst_min_eig).fold(f64::INFINITY, f64::min);
    let cp = report.markov.iter().map(|m| m.checks - m.violations).sum::<usize>();
    let pass = report.markov.len() == 25 && checks == 250 && all_markov && worst >= CP_FLOOR && cp == 250;
    outcome(pass, format!("{cp}/{checks} CP, all references Markov={all_markov}, worst {worst:.2e}"))
}

/// Affine combination `(1+s) C1 - s C2` of two random channels: Hermitian
/// and trace preserving, generally not CP.
fn random_hptp_map(rng: &mut SeededRng, d: usize) -> QMap {
    let channel = |rng: &mut SeededRng| {
        let n = rng.random_range(1..=3);
        let v = random::haar_unitary(rng, d * n);
        let mut transfer = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..n {
            let k = ComplexMatrix::from_fn(d, d, |a, i| v[(a * n + j, i)]);
            transfer += QMap::sandwich(&k, &k, vec![d]).expect("square Kraus").transfer();
        }
        transfer
    };
    let s: f64 = rng.random_range(0.0..1.0);
    let transfer = channel(rng) * c(1.0 + s, 0.0) - channel(rng) * c(s, 0.0);
    QMap::from_transfer(d, vec![d], transfer).expect("square transfer")
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = random::seeded(6);
    let mut worst_recon = 0.0_f64;
    let mut worst_complete = 0.0_f64;
    let mut worst_tp = 0.0_f64;
    for k in 0..100 {
        let map = random_hptp_map(&mut rng, 2 + k % 2);
        worst_tp = worst_tp.max(trace_preservation_error(&map));
        let os = operator_sum(&map)?;
        worst_recon = worst_recon.max(os.reconstruction_residual(&map));
        let d = map.d_in();
        let dev = os.completeness() - ComplexMatrix::identity(d, d);
        worst_complete = worst_complete.max(dev.norm());
    }
    let pass = worst_recon <= 1e-9 && worst_complete <= 1e-9 && worst_tp <= 1e-10;
    outcome(
        pass,
        format!("residual {worst_recon:.2e}, completeness {worst_complete:.2e}, TP error {worst_tp:.2e}"),
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut rng = random::seeded(7);
    let pb = TwoQubitScenario::new(0.1)?.with_alphas([0.5; 3]).paired_basis()?;
    let w = build_reference_tripartite(&pb);
    let m = pb.m();
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let p_r = ComplexMatrix::from_diagonal(&p.iter().map(|x| c(m as f64 * x, 0.0)).collect::<Vec<_>>().into());
        let got = steer(&w, &p_r)?;
        let want = pb
            .joint_states()
            .iter()
            .zip(&p)
            .fold(ComplexMatrix::zeros(4, 4), |acc, (j, x)| acc + j.matrix() * c(*x, 0.0));
        worst = worst.max(max_abs(&(got.matrix() - want)));
    }
    let mut outputs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            outputs.push(generalized_steer(&w, &rdlab::operator::matrix_unit(m, i, j))?);
        }
    }
    let rank = OperatorSubspace::spanned_by(&outputs, vec![2, 2])?.rank();
    let dim_v = pb.joint_subspace()?.rank();
    outcome(
        worst <= 1e-10 && rank == dim_v,
        format!("steering deviation {worst:.2e}; generalized span rank {rank} vs dim V {dim_v}"),
    )
}

fn criterion_8() -> Result<Outcome> {
    let mut rng = random::seeded(8);
    let scenarios = [0.1, 0.2, 0.25, 0.3]
        .into_iter()
        .map(|a| TwoQubitScenario::new(a)?.paired_basis())
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let pb = &scenarios[k % scenarios.len()];
        let u = if k == 0 { build_u_theta(PI / 4.0) } else { random::haar_unitary(&mut rng, 4) };
        let lambda = build_assignment(pb)?;
        let joint = evolve_reference(&build_reference_tripartite(pb), &u)?.system_reference();
        let es = reduced_dynamics(&lambda, &u)?;
        let via_map = evolve_reference_bipartite(&build_reference_bipartite(pb), &es)?;
        worst = worst.max(max_abs(&(joint.matrix() - via_map.matrix())));
    }
    outcome(worst <= 1e-9, format!("20 unitaries, max deviation {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 markov boundary", criterion_1, Duration::from_secs(1)),
        ("2 positivity domain", criterion_2, Duration::from_secs(1)),
        ("3 commuting-U CP", criterion_3, Duration::from_secs(5)),
        ("4 non-CP witness sweep", criterion_4, Duration::from_secs(10)),
        ("5 markov implies CP", criterion_5, Duration::from_secs(60)),
        ("6 operator-sum fidelity", criterion_6, Duration::from_secs(10)),
        ("7 steering identities", criterion_7, Duration::from_secs(1)),
        ("8 evolution consistency", criterion_8, Duration::from_secs(5)),
    ];
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed < budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.3}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
