//! Subcommand implementations.

use std::path::Path;

use mindiv::active::{active_learning_demo, ActiveConfig};
use mindiv::boltzmann::{self, Alphabet, BinarySamples};
use mindiv::boosting::{self, Ensemble, LabeledData};
use mindiv::divergence::closed::{self, NormalKind};
use mindiv::glm::{self, Dataset, EstimatorKind, Family, GlmSpec, GmRef};
use mindiv::optim::OptimConfig;
use mindiv::ppp::{self, CdfWeight, PppEstimator, PresenceData};
use mindiv::similarity::{self, CosineParams};
use mindiv::simlab::{self, Generated, Hetero, PairKind, Scenario};
use mindiv::{DivergenceKind, FinitePmf};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::io::{self, usage, Cell, CliError, CliResult, Report};
use crate::*;

/// A rendered report plus an optional failure raised after output is written.
pub struct Outcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, failure: None }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("core types serialize")
}

fn non_converged(what: &str, converged: bool, iterations: usize) -> Option<CliError> {
    (!converged).then(|| CliError::Numeric(format!("{what} did not converge after {iterations} iterations")))
}

pub fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    let seed = cli.seed;
    match &cli.command {
        Command::Divergence(a) => divergence(a).map(Into::into),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a).map(Into::into),
        Command::Simulate(a) => simulate(a, seed),
        Command::Ppp(PppCommand::Simulate { eps }) => ppp_simulate(*eps, seed).map(Into::into),
        Command::Ppp(PppCommand::Fit(a)) => ppp_fit(a, seed),
        Command::Bm(BmCommand::Fit { data, method, alphabet }) => bm_fit(data, *method, *alphabet),
        Command::Bm(BmCommand::Bench { dims, n }) => bm_bench(dims, *n, seed).map(Into::into),
        Command::Boost(BoostCommand::Train { data, rounds, loss, gamma, classes, pi1 }) => {
            boost_train(data, *rounds, *loss, *gamma, *classes, *pi1).map(Into::into)
        }
        Command::Boost(BoostCommand::Eval { model, data }) => boost_eval(model, data).map(Into::into),
        Command::Active(a) => active(a, seed).map(Into::into),
        Command::Similarity(c) => similarity_cmd(c, seed).map(Into::into),
    }
}

fn divergence_kind(a: &DivergenceArgs) -> CliResult<DivergenceKind> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Usage(format!("--kind {name} needs --{name}")));
    Ok(match a.kind {
        DivKind::Kl => DivergenceKind::KL,
        DivKind::Alpha => DivergenceKind::Alpha(need(a.alpha, "alpha")?),
        DivKind::Beta => DivergenceKind::Beta(need(a.beta, "beta")?),
        DivKind::Gamma => DivergenceKind::Gamma(need(a.gamma, "gamma")?),
        DivKind::DualGamma => DivergenceKind::DualGamma(a.gamma.ok_or_else(|| {
            CliError::Usage("--kind dual-gamma needs --gamma".into())
        })?),
        DivKind::LogGamma => DivergenceKind::LogGamma(a.gamma.ok_or_else(|| {
            CliError::Usage("--kind log-gamma needs --gamma".into())
        })?),
        DivKind::Gm => DivergenceKind::GM,
        DivKind::Hm => DivergenceKind::HM,
    })
}

fn divergence(a: &DivergenceArgs) -> CliResult<Report> {
    let kind = divergence_kind(a)?;
    let sources = [a.poisson.is_some(), a.normal.is_some(), a.multinomial.is_some()];
    if sources.iter().filter(|s| **s).count() > 1 {
        return usage("choose one of --poisson, --normal, --multinomial");
    }
    let pq = || -> CliResult<(&[f64], &[f64])> {
        match (&a.p, &a.q) {
            (Some(p), Some(q)) => Ok((p, q)),
            _ => usage("both --p and --q are required"),
        }
    };
    let value = if let Some(l) = &a.poisson {
        match kind {
            DivergenceKind::GM => closed::poisson_gm_div(l[0], l[1], a.tau)?,
            k => closed::poisson_div(l[0], l[1], k)?,
        }
    } else if let Some(n) = &a.normal {
        let nk = match kind {
            DivergenceKind::KL => NormalKind::KL,
            DivergenceKind::Gamma(g) => NormalKind::Gamma(g),
            _ => return usage("the normal family supports --kind kl and --kind gamma"),
        };
        closed::normal_div(n[0], n[1], n[2], n[3], nk)?
    } else if let Some(m) = a.multinomial {
        let (p, q) = pq()?;
        closed::multinomial_div(p, q, m, kind)?
    } else {
        let (p, q) = pq()?;
        let (p, q) = (FinitePmf::new(p.to_vec())?, FinitePmf::new(q.to_vec())?);
        match (kind, &a.r) {
            (DivergenceKind::GM, Some(r)) => mindiv::divergence::gm_div(&p, &q, &FinitePmf::new(r.clone())?)?,
            (_, Some(_)) => return usage("--r applies to --kind gm only"),
            (k, None) => mindiv::divergence::divergence(&p, &q, k)?,
        }
    };
    if !value.is_finite() {
        return Err(CliError::Numeric(format!("divergence evaluated to {value}")));
    }
    Ok(Report::Scalar { name: "divergence".into(), value })
}

fn infer_classes(y: &[f64], path: &Path) -> CliResult<usize> {
    let mut max = 0usize;
    for (i, v) in y.iter().enumerate() {
        if *v < 0.0 || v.fract() != 0.0 {
            return usage(format!("{}: row {}, column 1 (y): class label {v} must be a non-negative integer", path.display(), i + 1));
        }
        max = max.max(*v as usize);
    }
    Ok(max + 1)
}

fn fit(a: &FitArgs) -> CliResult<Outcome> {
    let (y, x) = io::read_table(&a.data)?.labeled(&a.data)?;
    let d = x[0].len();
    let family = match a.family {
        FamilyArg::Normal => Family::Normal { sigma2: a.sigma2 },
        FamilyArg::Bernoulli => Family::Bernoulli,
        FamilyArg::Poisson => Family::Poisson,
        FamilyArg::Categorical => Family::Categorical { k: a.classes.map_or_else(|| infer_classes(&y, &a.data), Ok)? },
        FamilyArg::Ordinal => {
            let k = a.classes.map_or_else(|| infer_classes(&y, &a.data), Ok)?;
            if k < 2 {
                return usage("ordinal regression needs at least two classes");
            }
            Family::Ordinal { k: k - 1 }
        }
    };
    let spec = GlmSpec::new(family, d)?;
    let kind = match a.estimator {
        GlmEstimatorArg::Ml => EstimatorKind::ML,
        GlmEstimatorArg::Gamma => EstimatorKind::Gamma(a.gamma),
        GlmEstimatorArg::Beta => EstimatorKind::Beta(a.beta),
        GlmEstimatorArg::Gm => EstimatorKind::GM(a.tau.map_or(GmRef::Default, GmRef::Scalar)),
        GlmEstimatorArg::Hm => EstimatorKind::HM,
        GlmEstimatorArg::IwGm => EstimatorKind::InverseWeightedGM,
        GlmEstimatorArg::Huber => EstimatorKind::Huber(a.c.unwrap_or(1.345)),
        GlmEstimatorArg::Tukey => EstimatorKind::Tukey(a.c.unwrap_or(4.685)),
    };
    let data = Dataset::new(x, y)?;
    let cfg = OptimConfig::default();
    let result = if a.joint {
        match (family, &kind) {
            (Family::Normal { .. }, EstimatorKind::Gamma(g)) => glm::fit_normal_joint(*g, &data, None, &cfg)?,
            _ => return usage("--joint needs --family normal --estimator gamma"),
        }
    } else {
        glm::fit(&spec, &kind, &data, None, &cfg)?
    };
    let failure = non_converged("fit", result.converged(), result.iterations);
    let doc = json!({
        "model": "glm",
        "spec": to_value(&spec),
        "estimator": to_value(&kind),
        "label": kind.label(),
        "fit": to_value(&result),
    });
    Ok(Outcome { report: Report::Doc(doc), failure })
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn field<T: serde::de::DeserializeOwned>(doc: &Value, key: &str, path: &Path) -> CliResult<T> {
    let v = doc.get(key).ok_or_else(|| CliError::Usage(format!("{}: missing field `{key}`", path.display())))?;
    serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("{}: field `{key}`: {e}", path.display())))
}

fn predict(a: &PredictArgs) -> CliResult<Report> {
    let doc = read_json(&a.model)?;
    if doc.get("model").and_then(Value::as_str) != Some("glm") {
        return usage(format!("{}: not a model written by `fit`", a.model.display()));
    }
    let spec: GlmSpec = field(&doc, "spec", &a.model)?;
    let fit: glm::FitResult = field(&doc, "fit", &a.model)?;
    let table = io::read_table(&a.data)?;
    let has_y = table.header[0] == "y";
    let mut rows = Vec::with_capacity(table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        let x = if has_y { &r[1..] } else { &r[..] };
        if x.len() != spec.d {
            return usage(format!("{}: row {} has {} features, model expects {}", a.data.display(), i + 1, x.len(), spec.d));
        }
        let pred = glm::predict(&spec, &fit.theta, x)?;
        rows.push(vec![Cell::Int(i as i64 + 1), if has_y { Cell::Num(r[0]) } else { Cell::Missing }, Cell::Num(pred)]);
    }
    Ok(Report::Table { header: vec!["row".into(), "y".into(), "prediction".into()], rows })
}

fn scenario(a: &SimulateArgs) -> Scenario {
    let hetero = match a.hetero {
        HeteroArg::Zero => Hetero::Zero,
        HeteroArg::NegSlope => Hetero::NegSlope,
    };
    match a.scenario {
        ScenarioArg::NormalMixture => Scenario::normal_mixture(a.pi.unwrap_or(0.1)),
        ScenarioArg::LogisticCaseControl => Scenario::logistic_case_control(a.pi.unwrap_or(0.1)),
        ScenarioArg::BernoulliImbalance => Scenario::bernoulli_imbalance(a.eps.unwrap_or(0.01)),
        ScenarioArg::PoissonMixture => Scenario::poisson_mixture(a.pi.unwrap_or(0.3), hetero),
        ScenarioArg::PppMisspec => Scenario::ppp_misspec(a.eps.unwrap_or(0.1)),
    }
}

fn simulate(a: &SimulateArgs, seed: u64) -> CliResult<Outcome> {
    let s = scenario(a);
    let summary = simlab::run_experiment(&s, &s.default_estimators(), a.reps, seed)?;
    let failure = (!summary.valid).then(|| {
        CliError::Numeric(format!("an estimator failed in more than {}% of replications", simlab::MAX_FAILURE_RATE * 100.0))
    });
    Ok(Outcome { report: Report::Csv { csv: summary.to_csv(), json: to_value(&summary) }, failure })
}

fn ppp_simulate(eps: f64, seed: u64) -> CliResult<Report> {
    let data = simulate_presence(eps, seed)?;
    let d = data.d();
    let mut header = vec!["z".to_string(), "w".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    let rows = (0..data.n())
        .map(|j| {
            let mut r = vec![Cell::Int(data.z(j) as i64), Cell::Num(data.weights()[j])];
            r.extend(data.site(j).iter().map(|v| Cell::Num(*v)));
            r
        })
        .collect();
    Ok(Report::Table { header, rows })
}

fn simulate_presence(eps: f64, seed: u64) -> CliResult<PresenceData> {
    match simlab::generate(&Scenario::ppp_misspec(eps), &mut ChaCha8Rng::seed_from_u64(seed))? {
        Generated::Presence(d) => Ok(d),
        _ => unreachable!("ppp-misspec yields presence data"),
    }
}

fn read_presence(path: &Path) -> CliResult<PresenceData> {
    let t = io::read_table(path)?;
    if t.header.len() < 3 || t.header[0] != "z" || t.header[1] != "w" {
        return usage(format!("{}: expected columns z,w,x1..xd", path.display()));
    }
    let d = t.header.len() - 2;
    let mut pres = Vec::new();
    let mut back = Vec::new();
    for (i, r) in t.rows.iter().enumerate() {
        match r[0] {
            z if z == 1.0 => pres.push(r),
            z if z == 0.0 => back.push(r),
            z => return usage(format!("{}: row {}, column 1 (z): expected 0 or 1, found {z}", path.display(), i + 1)),
        }
    }
    let m = pres.len();
    let mut sites = Vec::with_capacity(t.rows.len() * d);
    let mut weights = Vec::with_capacity(t.rows.len());
    for r in pres.into_iter().chain(back) {
        weights.push(r[1]);
        sites.extend_from_slice(&r[2..]);
    }
    Ok(PresenceData::from_parts(d, m, sites, weights)?)
}

fn ppp_fit(a: &PppFitArgs, seed: u64) -> CliResult<Outcome> {
    let data = match &a.data {
        Some(p) => read_presence(p)?,
        None => simulate_presence(a.eps, seed)?,
    };
    let est = match a.estimator {
        PppEstimatorArg::Ml => PppEstimator::ML,
        PppEstimatorArg::Beta => PppEstimator::Beta(a.beta),
        PppEstimatorArg::Gamma => PppEstimator::Gamma(a.gamma),
        PppEstimatorArg::Gm => PppEstimator::GM,
        PppEstimatorArg::F => PppEstimator::F(CdfWeight::pareto_sigma(a.sigma)),
    };
    let fit = ppp::fit(&est, &data, None, &OptimConfig::default())?;
    let failure = non_converged("fit", fit.converged(), fit.iterations);
    let doc = json!({
        "model": "ppp",
        "estimator": to_value(&est),
        "label": est.label(),
        "presences": data.m(),
        "fit": to_value(&fit),
    });
    Ok(Outcome { report: Report::Doc(doc), failure })
}

fn bm_fit(path: &Path, method: BmMethod, alphabet: AlphabetArg) -> CliResult<Outcome> {
    let t = io::read_table(path)?;
    let alphabet = match alphabet {
        AlphabetArg::PlusMinus => Alphabet::PlusMinus,
        AlphabetArg::ZeroOne => Alphabet::ZeroOne,
    };
    let data = BinarySamples::from_rows(&t.rows, alphabet)?;
    let cfg = OptimConfig::default();
    let fit = match method {
        BmMethod::Gm => boltzmann::gm_fit(&data, None, &cfg)?,
        BmMethod::Ml => boltzmann::ml_fit(&data, None, &cfg)?,
    };
    let failure = non_converged("fit", fit.status == mindiv::optim::Status::Converged, fit.iterations);
    Ok(Outcome { report: Report::Doc(json!({ "model": "bm", "fit": to_value(&fit) })), failure })
}

fn bm_bench(dims: &str, n: usize, seed: u64) -> CliResult<Report> {
    let dims = io::parse_dims(dims)?;
    let rows = boltzmann::timing_benchmark(&dims, n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(Report::Table {
        header: ["d", "N", "t_nll_ms", "t_gm_ms"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.d as i64),
                    Cell::Int(r.n as i64),
                    r.t_nll_ms.map_or(Cell::Missing, Cell::Num),
                    Cell::Num(r.t_gm_ms),
                ]
            })
            .collect(),
    })
}

fn labeled_data(path: &Path) -> CliResult<LabeledData> {
    let (y, x) = io::read_table(path)?.int_labeled(path)?;
    Ok(LabeledData::new(x, y)?)
}

fn boost_train(
    path: &Path,
    rounds: usize,
    loss: BoostLossArg,
    gamma: f64,
    classes: Option<usize>,
    pi1: Option<f64>,
) -> CliResult<Report> {
    let data = labeled_data(path)?;
    let ens = match loss {
        BoostLossArg::Exp => boosting::train_adaboost(&data, rounds)?,
        BoostLossArg::Gm => boosting::train_gm_boost(&data, rounds)?,
        BoostLossArg::Gamma => boosting::train_gamma_boost(&data, rounds, gamma)?,
        BoostLossArg::Imbalanced => boosting::train_adaboost_imbalanced(&data, rounds, pi1)?,
        BoostLossArg::Multiclass => {
            let k = match classes {
                Some(k) => k,
                None => data.y().iter().copied().max().unwrap_or(0).max(0) as usize + 1,
            };
            boosting::train_multiclass_gamma_boost(&data, rounds, k, gamma)?
        }
    };
    let mut doc = to_value(&ens);
    doc["model"] = json!("boost");
    Ok(Report::Doc(doc))
}

fn boost_eval(model: &Path, data: &Path) -> CliResult<Report> {
    let doc = read_json(model)?;
    if doc.get("model").and_then(Value::as_str) != Some("boost") {
        return usage(format!("{}: not a model written by `boost train`", model.display()));
    }
    let ens: Ensemble = serde_json::from_value(doc)
        .map_err(|e| CliError::Usage(format!("{}: {e}", model.display())))?;
    let data = labeled_data(data)?;
    if let Some(s) = ens.steps.iter().find(|s| s.stump.feature >= data.d()) {
        return usage(format!("model uses feature {} but the data have {}", s.stump.feature + 1, data.d()));
    }
    Ok(Report::Scalar { name: "accuracy".into(), value: ens.accuracy(&data) })
}

fn active(a: &ActiveArgs, seed: u64) -> CliResult<Report> {
    let cfg = ActiveConfig {
        gamma: a.gamma,
        members: a.members,
        rounds: a.rounds,
        initial: a.initial,
        pool: a.pool,
        test: a.test,
        ridge: a.ridge,
    };
    let log = active_learning_demo(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(Report::Table {
        header: ["round", "chosen", "acquisition", "test_accuracy", "random_accuracy"].map(String::from).to_vec(),
        rows: log
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.round as i64),
                    Cell::Int(r.chosen as i64),
                    Cell::Num(r.acquisition),
                    Cell::Num(r.test_accuracy),
                    Cell::Num(r.random_accuracy),
                ]
            })
            .collect(),
    })
}

fn cosine_params(pairs: &str) -> CliResult<Vec<CosineParams>> {
    io::parse_pairs(pairs)?
        .into_iter()
        .map(|(b, g)| CosineParams::new(b, g).map_err(CliError::from))
        .collect()
}

fn feature_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    Ok(io::read_table(path)?.rows)
}

fn similarity_cmd(c: &SimilarityCommand, seed: u64) -> CliResult<Report> {
    match c {
        SimilarityCommand::Cos { x, y, beta, gamma } => {
            if x.len() != y.len() {
                return usage(format!("--x has {} entries, --y has {}", x.len(), y.len()));
            }
            Ok(Report::Scalar { name: "cosine".into(), value: similarity::beta_gamma_cos(x, y, *beta, *gamma)? })
        }
        SimilarityCommand::Table { kind, sigma2, pairs, reps, d } => {
            let kind = match kind {
                PairKindArg::Proportional => PairKind::Proportional,
                PairKindArg::Orthogonal => PairKind::Orthogonal,
            };
            let rows = simlab::cosine_table(kind, sigma2, &cosine_params(pairs)?, *d, *reps, seed)?;
            let name = match kind {
                PairKind::Proportional => "proportional",
                PairKind::Orthogonal => "orthogonal",
            };
            Ok(Report::Table {
                header: ["kind", "sigma2", "beta", "gamma", "mean", "sd"].map(String::from).to_vec(),
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            Cell::Text(name.into()),
                            Cell::Num(r.sigma2),
                            Cell::Num(r.beta),
                            Cell::Num(r.gamma),
                            Cell::Num(r.mean),
                            Cell::Num(r.sd),
                        ]
                    })
                    .collect(),
            })
        }
        SimilarityCommand::Cluster { pairs, data, k } => {
            let params = cosine_params(pairs)?;
            let sil = match data {
                None => simlab::cluster_silhouettes(&Scenario::cluster_blobs(), &params, seed)?,
                Some(p) => {
                    let k = k.ok_or_else(|| CliError::Usage("--data needs --k".into()))?;
                    let rows = feature_rows(p)?;
                    params
                        .iter()
                        .map(|cp| {
                            let dist = similarity::pairwise_distance(&rows, *cp)?;
                            let labels = similarity::agglomerative_cluster(&dist, k)?;
                            Ok((*cp, similarity::silhouette(&dist, &labels)?))
                        })
                        .collect::<mindiv::Result<Vec<_>>>()?
                }
            };
            Ok(Report::Table {
                header: ["beta", "gamma", "silhouette"].map(String::from).to_vec(),
                rows: sil.iter().map(|(p, s)| vec![Cell::Num(p.beta), Cell::Num(p.gamma), Cell::Num(*s)]).collect(),
            })
        }
        SimilarityCommand::Pca { gammas, components, data } => {
            let cum = match data {
                None => simlab::pca_cumulative(&Scenario::pca_block(), gammas, seed)?,
                Some(p) => {
                    let rows = feature_rows(p)?;
                    gammas
                        .iter()
                        .map(|&g| Ok((g, similarity::gamma_pca(&rows, g)?.cumulative)))
                        .collect::<mindiv::Result<Vec<_>>>()?
                }
            };
            let mut rows = Vec::new();
            for (g, c) in &cum {
                for (i, v) in c.iter().take(*components).enumerate() {
                    rows.push(vec![Cell::Num(*g), Cell::Int(i as i64 + 1), Cell::Num(*v)]);
                }
            }
            Ok(Report::Table { header: ["gamma", "components", "cumulative"].map(String::from).to_vec(), rows })
        }
    }
}
