use clap::ValueEnum;
use nadyn_core::conjugacy::{verify_conjugacy, ConjugacyFamily};
use nadyn_core::entropy::{check_cover_laws, estimate_entropy, max_separated, min_spanning, CountMode};
use nadyn_core::space::uniform_net;
use nadyn_core::system::{conjugate_system, gathering, inverse_system, perturb, SystemSpec};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    Sandwich,
    Constancy,
    Gathering,
    Splice,
    Inverse,
    Perturb,
    Conjugacy,
    #[value(name = "cover-laws")]
    CoverLaws,
}

impl CheckName {
    pub fn name(self) -> &'static str {
        match self {
            CheckName::Sandwich => "sandwich",
            CheckName::Constancy => "constancy",
            CheckName::Gathering => "gathering",
            CheckName::Splice => "splice",
            CheckName::Inverse => "inverse",
            CheckName::Perturb => "perturb",
            CheckName::Conjugacy => "conjugacy",
            CheckName::CoverLaws => "cover-laws",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub measured: Value,
    pub tolerances: Value,
}

fn missing(name: &str) -> CliError {
    CliError::Config(format!("missing [checks.{name}] section"))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    systems: std::collections::BTreeMap<String, SystemSpec>,
}

impl Ctx<'_> {
    fn system(&self, id: &str) -> Result<&SystemSpec, CliError> {
        self.systems
            .get(id)
            .ok_or_else(|| CliError::Config(format!("check names unknown system {id}")))
    }

    /// Query-grid estimate of `sys` at `i`, optionally with another `n_max`.
    fn estimate(&self, sys: &SystemSpec, i: i64, n_max: Option<usize>) -> Result<f64, CliError> {
        let query = self.cfg.query()?;
        let net = query.net(&sys.space, self.cfg.seed)?;
        let mut params = query.params();
        if let Some(n) = n_max {
            params.n_max = n;
            params.tail = params.tail.map(|t| t.min(n));
        }
        Ok(estimate_entropy(sys, i, &params, &net)?.estimate)
    }

    fn first_index(&self) -> Result<i64, CliError> {
        Ok(self.cfg.query()?.i[0])
    }
}

pub fn cmd_check(cfg: &ExperimentConfig, check: CheckName) -> Result<Verdict, CliError> {
    let ctx = Ctx {
        cfg,
        systems: cfg.systems()?,
    };
    let c = &cfg.checks;
    let (passed, measured, tolerances) = match check {
        CheckName::Sandwich => {
            let s = c.sandwich.as_ref().ok_or_else(|| missing("sandwich"))?;
            let (mut cases, mut violations, mut greedy_violations) = (0u64, 0u64, 0u64);
            for id in &s.systems {
                let sys = ctx.system(id)?;
                // A finite model has a single net, all of its points.
                let nets: &[usize] = if sys.space.finite_len().is_some() {
                    &[1]
                } else {
                    &s.nets
                };
                for &m in nets {
                    let net = uniform_net(&sys.space, m)?;
                    for &eps in &s.eps {
                        for n in 1..=s.n_max {
                            let sep = max_separated(sys, 0, n, eps, &net, CountMode::Exact)?.count;
                            let r = min_spanning(sys, 0, n, eps, &net, CountMode::Exact)?.count;
                            let r_half = min_spanning(sys, 0, n, eps / 2.0, &net, CountMode::Exact)?.count;
                            let g_sep = max_separated(sys, 0, n, eps, &net, CountMode::Greedy)?.count;
                            let g_span = min_spanning(sys, 0, n, eps, &net, CountMode::Greedy)?.count;
                            cases += 1;
                            violations += u64::from(!(r <= sep && sep <= r_half));
                            greedy_violations += u64::from(!(g_sep <= sep && r <= g_span));
                        }
                    }
                }
            }
            (
                violations == 0 && greedy_violations == 0 && cases > 0,
                json!({"cases": cases, "violations": violations, "greedy_violations": greedy_violations}),
                json!({"violations": 0}),
            )
        }
        CheckName::Constancy => {
            let s = c.constancy.as_ref().ok_or_else(|| missing("constancy"))?;
            let sys = ctx.system(&s.system)?;
            let est: Vec<f64> =
                s.i.iter()
                    .map(|&i| ctx.estimate(sys, i, None))
                    .collect::<Result<_, _>>()?;
            let spread = est.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - est.iter().cloned().fold(f64::INFINITY, f64::min);
            (
                spread <= s.tolerance,
                json!({"indices": s.i, "estimates": est, "spread": spread}),
                json!({"spread": s.tolerance}),
            )
        }
        CheckName::Gathering => {
            let s = c.gathering.as_ref().ok_or_else(|| missing("gathering"))?;
            let sys = ctx.system(&s.system)?;
            let i = ctx.first_index()?;
            let base = ctx.estimate(sys, i, None)?;
            let gathered = ctx.estimate(&gathering(sys, s.stride)?, i, Some(s.n_max))?;
            let target = s.stride as f64 * base;
            let rel = (gathered - target).abs() / target.abs().max(f64::MIN_POSITIVE);
            (
                rel <= s.relative_tolerance,
                json!({"base": base, "gathered": gathered, "target": target, "relative_error": rel}),
                json!({"relative_error": s.relative_tolerance}),
            )
        }
        CheckName::Splice => {
            let s = c.splice.as_ref().ok_or_else(|| missing("splice"))?;
            let i = ctx.first_index()?;
            let h = ctx.estimate(ctx.system(&s.system)?, i, None)?;
            let reference = ctx.estimate(ctx.system(&s.reference)?, i, None)?;
            let diff = (h - reference).abs();
            (
                diff <= s.tolerance,
                json!({"estimate": h, "reference": reference, "difference": diff}),
                json!({"difference": s.tolerance}),
            )
        }
        CheckName::Inverse => {
            let s = c.inverse.as_ref().ok_or_else(|| missing("inverse"))?;
            let sys = ctx.system(&s.system)?;
            let i = ctx.first_index()?;
            let forward = ctx.estimate(sys, i, None)?;
            let backward = ctx.estimate(&inverse_system(sys), i, None)?;
            let [lo, hi] = s.inverse_band;
            (
                forward <= s.forward_max && (lo..=hi).contains(&backward),
                json!({"forward": forward, "inverse": backward}),
                json!({"forward_max": s.forward_max, "inverse_band": s.inverse_band}),
            )
        }
        CheckName::Perturb => {
            let s = c.perturb.as_ref().ok_or_else(|| missing("perturb"))?;
            let sys = ctx.system(&s.system)?;
            let i = ctx.first_index()?;
            let base = ctx.estimate(sys, i, None)?;
            let perturbed: Vec<f64> = s
                .seeds
                .iter()
                .map(|&seed| ctx.estimate(&perturb(sys, s.amplitude, seed)?, i, None))
                .collect::<Result<_, _>>()?;
            let worst = perturbed.iter().map(|h| (h - base).abs()).fold(0.0, f64::max);
            (
                worst <= s.tolerance && !perturbed.is_empty(),
                json!({"base": base, "seeds": s.seeds, "perturbed": perturbed, "max_difference": worst}),
                json!({"max_difference": s.tolerance}),
            )
        }
        CheckName::Conjugacy => {
            let s = c.conjugacy.as_ref().ok_or_else(|| missing("conjugacy"))?;
            let sys = ctx.system(&s.system)?;
            let query = cfg.query()?;
            let lo = query.i.iter().min().unwrap() - 1;
            let hi = query.i.iter().max().unwrap() + query.n_max as i64 + 1;
            let h = ConjugacyFamily::bumps(&sys.space, s.amplitude, s.seed, lo..=hi)?;
            let g = conjugate_system(sys, &h)?;
            let net = query.net(&sys.space, cfg.seed)?;
            let residual = verify_conjugacy(sys, &g, &h, &net)?;
            let i = query.i[0];
            let base = ctx.estimate(sys, i, None)?;
            let conj = ctx.estimate(&g, i, None)?;
            let diff = (conj - base).abs();
            (
                diff <= s.tolerance && residual <= s.residual,
                json!({"base": base, "conjugated": conj, "difference": diff, "residual": residual}),
                json!({"difference": s.tolerance, "residual": s.residual}),
            )
        }
        CheckName::CoverLaws => {
            let s = c.cover_laws.as_ref().ok_or_else(|| missing("cover-laws"))?;
            let sys = ctx.system(&s.system)?;
            let report = check_cover_laws(sys, ctx.cfg.query.as_ref().map_or(0, |q| q.i[0]), &s.scope())?;
            (
                report.passed(),
                serde_json::to_value(&report).map_err(|e| CliError::Config(e.to_string()))?,
                json!({"violations": 0}),
            )
        }
    };
    Ok(Verdict {
        check: check.name().into(),
        passed,
        measured,
        tolerances,
    })
}
