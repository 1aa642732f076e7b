//! Subcommand bodies. Each returns the JSON body to print and whether the
//! command's verdict (if it has one) is affirmative.

use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use rdlab::assignment::{build_assignment, check_u_consistency_for, decompose_subspace, is_u_consistent_all};
use rdlab::experiments::{
    build_u_theta, markov_campaign_with, run_commuting_family_with, run_theta_sweep_with, CampaignConfig,
    SweepReport, TwoQubitScenario,
};
use rdlab::operator::{frobenius, ComplexMatrix};
use rdlab::qmap::{is_cp_with, is_hermitian_preserving, is_trace_preserving, operator_sum, QMap};
use rdlab::reference::{generalized_steer, markov_test_with, reduced_dynamics, steer, ReferenceState};
use rdlab::tol::Tolerances;

use crate::io::{
    read_json, read_scenario, MatrixPayload, PairedBasisPayload, QMapPayload, SubspacePayload,
};

/// Exit status carried alongside a successful command's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Affirmative,
    Negative,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Affirmative
        } else {
            Verdict::Negative
        }
    }
}

pub struct Output {
    pub body: Value,
    pub verdict: Verdict,
}

fn affirm(body: impl Serialize) -> Result<Output> {
    Ok(Output {
        body: serde_json::to_value(body)?,
        verdict: Verdict::Affirmative,
    })
}

fn read_reference(path: &Path) -> Result<ReferenceState> {
    let state = read_json::<MatrixPayload>(path)?.to_state()?;
    Ok(ReferenceState::from_state(state, path.display().to_string())?)
}

fn read_unitary(path: &Path) -> Result<ComplexMatrix> {
    Ok(read_json::<MatrixPayload>(path)?.to_operator()?.0)
}

pub fn markov_test(input: &Path, tols: &Tolerances) -> Result<Output> {
    let reference = read_reference(input)?;
    if !reference.is_tripartite() {
        bail!("markov-test needs a tripartite state with dims [m, d_S, d_E]");
    }
    let verdict = markov_test_with(&reference, tols)?;
    Ok(Output {
        verdict: Verdict::from_bool(verdict.is_markov),
        body: serde_json::to_value(verdict)?,
    })
}

pub fn opsum(input: &Path) -> Result<Output> {
    let map = read_json::<QMapPayload>(input)?.to_qmap()?;
    let os = operator_sum(&map)?;
    let completeness = os.completeness() - ComplexMatrix::identity(map.d_in(), map.d_in());
    affirm(json!({
        "coeffs": os.coeffs,
        "kraus": os.kraus.iter().map(|k| MatrixPayload::from_matrix(k, None)).collect::<Vec<_>>(),
        "reconstruction_residual": os.reconstruction_residual(&map),
        "completeness_deviation": frobenius(&completeness),
    }))
}

fn classification(map: &QMap, psd_tol: f64) -> Result<Value> {
    let hp = is_hermitian_preserving(map);
    let (cp, min) = if hp {
        let (cp, min) = is_cp_with(map, psd_tol)?;
        (cp, Some(min))
    } else {
        (false, None)
    };
    Ok(json!({
        "hermitian_preserving": hp,
        "trace_preserving": is_trace_preserving(map),
        "completely_positive": cp,
        "min_choi_eigenvalue": min,
    }))
}

pub fn classify(input: &Path, tols: &Tolerances) -> Result<Output> {
    let map = read_json::<QMapPayload>(input)?.to_qmap()?;
    let body = classification(&map, tols.psd)?;
    Ok(Output {
        verdict: Verdict::from_bool(body["completely_positive"] == json!(true)),
        body,
    })
}

pub fn steer_cmd(reference: &Path, operator: &Path, generalized: bool) -> Result<Output> {
    let reference = read_reference(reference)?;
    let (op, _) = read_json::<MatrixPayload>(operator)?.to_operator()?;
    let dims = reference.dims()[1..].to_vec();
    if generalized {
        let out = generalized_steer(&reference, &op)?;
        affirm(json!({ "operator": MatrixPayload::from_matrix(&out, Some(dims)) }))
    } else {
        let out = steer(&reference, &op)?;
        affirm(json!({ "state": MatrixPayload::from_matrix(out.matrix(), Some(dims)) }))
    }
}

pub enum AssignmentSource<'a> {
    Pairs(&'a Path),
    Scenario(&'a Path),
}

pub enum UnitarySource<'a> {
    File(&'a Path),
    Theta(f64),
}

pub fn reduce(source: AssignmentSource, unitary: UnitarySource, tols: &Tolerances) -> Result<Output> {
    let lambda = match source {
        AssignmentSource::Pairs(p) => build_assignment(&read_json::<PairedBasisPayload>(p)?.to_paired_basis()?)?,
        AssignmentSource::Scenario(p) => read_scenario(p)?.assignment()?,
    };
    let u = match unitary {
        UnitarySource::File(p) => read_unitary(p)?,
        UnitarySource::Theta(theta) => {
            if (lambda.d_s(), lambda.d_e()) != (2, 2) {
                bail!("--theta applies to two-qubit assignments only");
            }
            build_u_theta(theta)
        }
    };
    let map = reduced_dynamics(&lambda, &u)?;
    let mut body = classification(&map, tols.psd)?;
    body["map"] = serde_json::to_value(QMapPayload::from_qmap(&map))?;
    affirm(body)
}

fn write_rows(csv_path: &Path, key: &str, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record([key, "min_eig", "is_cp"])?;
    for row in &report.rows {
        w.write_record([row.theta.to_string(), row.min_eig.to_string(), row.is_cp.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn scenario_header(sc: &TwoQubitScenario) -> Value {
    json!({ "a": sc.a, "alphas": sc.alphas })
}

pub fn sweep_theta(config: &Path, csv_path: &Path, tols: &Tolerances) -> Result<Output> {
    let sc = read_scenario(config)?;
    let report = run_theta_sweep_with(&sc, tols.psd)?;
    write_rows(csv_path, "theta", &report)?;
    let mut body = scenario_header(&sc);
    body["points"] = json!(report.rows.len());
    body["summary"] = serde_json::to_value(report.summary)?;
    affirm(body)
}

pub fn commuting_family(config: &Path, csv_path: &Path, t_grid: &[f64], tols: &Tolerances) -> Result<Output> {
    let sc = read_scenario(config)?;
    let report = run_commuting_family_with(&sc, t_grid, tols.psd)?;
    write_rows(csv_path, "t", &report.sweep)?;
    let mut body = scenario_header(&sc);
    body["points"] = json!(report.sweep.rows.len());
    body["summary"] = serde_json::to_value(report.sweep.summary)?;
    body["max_commutator_norm"] = json!(report.max_commutator_norm);
    affirm(body)
}

pub fn campaign(config: CampaignConfig, dims: &[(usize, usize)], tols: &Tolerances) -> Result<Output> {
    let report = markov_campaign_with(config, dims, tols)?;
    Ok(Output {
        verdict: Verdict::from_bool(report.counterexamples == 0),
        body: serde_json::to_value(report)?,
    })
}

pub fn consistency(basis: &Path, unitary: Option<&Path>) -> Result<Output> {
    let v = read_json::<SubspacePayload>(basis)?.to_subspace()?;
    let split = decompose_subspace(&v)?;
    let all = is_u_consistent_all(&v)?;
    let for_u = match unitary {
        Some(p) => Some(check_u_consistency_for(&v, &read_unitary(p)?)?),
        None => None,
    };
    Ok(Output {
        verdict: Verdict::from_bool(for_u.unwrap_or(all)),
        body: json!({
            "dim_v": v.rank(),
            "dim_v_prime": split.v_prime.rank(),
            "dim_v_zero": split.v_zero.rank(),
            "u_consistent_all": all,
            "u_consistent_for": for_u,
        }),
    })
}
