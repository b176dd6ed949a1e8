//! Task dispatch and machine-readable reports. Reports are deterministic
//! given the configuration: JSON maps are ordered, integers are decimal digit
//! strings, polygon coordinates are exact rationals "num/den".

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use urzeta_core::analytics::{newton_polygon, newton_polygon_of_lseries, NewtonPolygon};
use urzeta_core::error::{Error, Result};
use urzeta_core::euler::{enumerate_closed_points, euler_factor, extensions_for, l_euler, l_power_euler};
use urzeta_core::lseries::LSeries;
use urzeta_core::padic::{Ctx, PAdicScalar, PadicCtx};
use urzeta_core::series::{Rat, SigmaLift, TruncSeries};
use urzeta_core::sigma::SigmaModule;
use urzeta_core::suite::{profile_floor_polygon, run_suite};
use urzeta_core::trace::{dwork_matrix, fredholm_det, jacobian_data, l_trace, TraceContext, TraceParams};
use urzeta_core::unitroot::{
    congruence_check_75, hodge_newton_unit, limiting_module, unit_fiber_check, unit_root_l,
    UnitRootParams,
};
use urzeta_core::analytics::BoundProfile;

use crate::config::{RunConfig, TaskDef, TaskKind, Terms};

pub struct Engine {
    pub cfg: RunConfig,
    pub ctx: Ctx,
    pub lift: SigmaLift,
    pub modules: BTreeMap<String, SigmaModule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    VerifyFailed,
    Unsupported,
    InputError,
}

fn series_from_terms(ctx: &Ctx, nvars: usize, cap: u32, terms: &Terms) -> TruncSeries {
    let mut out = TruncSeries::zero(ctx, nvars, cap);
    for (e, c) in terms {
        let coeff = PAdicScalar::from_bigint(ctx, c);
        out = out.add(&TruncSeries::monomial(ctx, nvars, cap, e.clone(), coeff));
    }
    out
}

impl Engine {
    pub fn new(cfg: RunConfig) -> Result<Engine> {
        let ctx = PadicCtx::new(cfg.p, cfg.working_prec())?;
        let sigma: Vec<TruncSeries> = cfg
            .sigma_terms
            .iter()
            .map(|t| series_from_terms(&ctx, cfg.nvars, cfg.dx, t))
            .collect();
        let lift = SigmaLift::new(&ctx, cfg.a, sigma)?;
        let mut modules = BTreeMap::new();
        for (name, def) in &cfg.modules {
            let entries: Vec<TruncSeries> = def
                .entries
                .iter()
                .map(|t| series_from_terms(&ctx, cfg.nvars, cfg.dx, t))
                .collect();
            modules.insert(
                name.clone(),
                SigmaModule::new(def.rank, entries, lift.clone(), name),
            );
        }
        Ok(Engine { cfg, ctx, lift, modules })
    }

    fn module(&self, task: &TaskDef) -> Result<&SigmaModule> {
        let name = task.module.as_deref().expect("validated");
        Ok(&self.modules[name])
    }

    fn trace_params(&self) -> TraceParams {
        let mut p = TraceParams::for_target(self.lift.q, self.cfg.n_target);
        p.u_override = self.cfg.u_override;
        p
    }

    fn ur_params(&self) -> UnitRootParams {
        let mut p = UnitRootParams::new(self.cfg.dt, self.cfg.n_target);
        p.d_f = self.cfg.d_f();
        p.budget = self.cfg.budget;
        p
    }

    pub fn run(&self, csv_dir: Option<&std::path::Path>) -> (Value, Outcome) {
        let mut tasks = Map::new();
        let mut outcome = Outcome::Ok;
        for task in &self.cfg.tasks {
            let t0 = std::time::Instant::now();
            let out = self.run_task(task, csv_dir);
            // timing goes to stderr so report bytes stay deterministic
            eprintln!("task {} ({}): {:.1?}", task.name, task.kind.name(), t0.elapsed());
            match out {
                Ok((v, o)) => {
                    tasks.insert(task.name.clone(), v);
                    if o != Outcome::Ok && outcome == Outcome::Ok {
                        outcome = o;
                    }
                }
                Err(e) => {
                    let o = match &e {
                        Error::UnsupportedDimension(_) => Outcome::Unsupported,
                        Error::ValidationError { .. } | Error::ParseError { .. } => {
                            Outcome::InputError
                        }
                        _ => Outcome::VerifyFailed,
                    };
                    tasks.insert(
                        task.name.clone(),
                        json!({ "kind": task.kind.name(), "error": e.to_string() }),
                    );
                    if outcome == Outcome::Ok {
                        outcome = o;
                    }
                }
            }
        }
        let report = json!({
            "inputs": {
                "p": self.cfg.p.to_string(),
                "a": self.cfg.a.to_string(),
                "N": self.cfg.n_target.to_string(),
                "W": self.cfg.working_prec().to_string(),
                "caps": {
                    "DX": self.cfg.dx.to_string(),
                    "DT": self.cfg.dt.to_string(),
                    "Df": self.cfg.d_f().to_string(),
                },
                "n": self.cfg.nvars.to_string(),
                "config": crate::config::serialize_config(&self.cfg),
            },
            "tasks": Value::Object(tasks),
        });
        (report, outcome)
    }

    fn run_task(&self, task: &TaskDef, csv_dir: Option<&std::path::Path>) -> Result<(Value, Outcome)> {
        let n_target = self.cfg.n_target;
        match task.kind {
            TaskKind::Euler => {
                let m = self.module(task)?;
                let k = task.k.unwrap_or(1);
                let l = if k == 1 {
                    l_euler(m, self.cfg.dt, self.cfg.budget)?
                } else {
                    l_power_euler(m, k, self.cfg.dt, self.cfg.budget)?
                };
                Ok((
                    json!({
                        "kind": "euler",
                        "module": m.label,
                        "k": k.to_string(),
                        "lseries": l.to_json(n_target),
                    }),
                    Outcome::Ok,
                ))
            }
            TaskKind::Trace => {
                let m = self.module(task)?;
                let tc = jacobian_data(&self.lift);
                let l = l_trace(m, self.cfg.dt, &tc, &self.trace_params())?;
                let (num, den) = factored(&l);
                if let Some(dir) = csv_dir {
                    self.dump_matrix_csv(m, &tc, dir, &task.name)?;
                }
                Ok((
                    json!({
                        "kind": "trace",
                        "module": m.label,
                        "lseries": l.to_json(n_target),
                        "numerator": num.to_json(n_target),
                        "denominator": den.to_json(n_target),
                    }),
                    Outcome::Ok,
                ))
            }
            TaskKind::UnitRoot => {
                let m = self.module(task)?;
                let norm = m.normalize_twist()?;
                let ur = hodge_newton_unit(&norm.module, n_target)?;
                let fibers = unit_fiber_check(&ur, m, (self.cfg.dt as u32).min(4), 2, self.cfg.budget)?;
                let mut out = json!({
                    "kind": "unit-root",
                    "module": m.label,
                    "twist_a": norm.a.digit_string(),
                    "alpha": terms_json(&ur.alpha),
                    "achieved_prec": ur.achieved_prec.to_string(),
                    "achieved_deg": ur.achieved_deg.to_string(),
                    "iterations": ur.iterations.to_string(),
                    "fiber_checks": fibers.iter().map(|f| json!({
                        "degree": f.degree.to_string(),
                        "orbit": f.orbit_id.to_string(),
                        "matched": f.matched,
                        "compare_prec": f.compare_prec.to_string(),
                    })).collect::<Vec<_>>(),
                });
                if let Some(k) = task.k {
                    let aux = task.aux.as_deref().map(|a| &self.modules[a]);
                    let url = unit_root_l(m, aux, k, &self.ur_params())?;
                    out["k"] = Value::String(k.to_string());
                    out["lseries"] = url.series.to_json(n_target);
                    out["numerator"] = url.num.to_json(n_target);
                    out["denominator"] = url.den.to_json(n_target);
                }
                Ok((out, Outcome::Ok))
            }
            TaskKind::Limiting => {
                let m = self.module(task)?;
                let norm = m.normalize_twist()?;
                let k = task.k.unwrap_or(0);
                let lm = limiting_module(&norm.module, k, self.cfg.d_f())?;
                let tc = jacobian_data(&self.lift);
                let params = self.ur_params();
                let l = urzeta_core::unitroot::l_limiting(&lm, None, None, &tc, &params)?;
                let mut out = json!({
                    "kind": "limiting",
                    "module": m.label,
                    "k": k.to_string(),
                    "dim": lm.dim().to_string(),
                    "gradings": lm.gradings.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
                    "lseries": l.to_json(n_target),
                });
                if let Some(mm) = task.m {
                    let rep = congruence_check_75(&norm.module, k, mm, self.cfg.d_f())?;
                    out["congruence_75"] = json!({
                        "m": mm.to_string(),
                        "modulus": rep.modulus.to_string(),
                        "ok": rep.ok,
                        "failed_entries": rep.failed_entries.to_string(),
                    });
                }
                Ok((out, Outcome::Ok))
            }
            TaskKind::Polygon => {
                let m = self.module(task)?;
                let (h, perm) = m.basis_sequence(8);
                let basis_poly = h.polygon();
                let pts = enumerate_closed_points(
                    &self.ctx,
                    self.cfg.a,
                    self.cfg.nvars,
                    (self.cfg.dt as u32).min(4),
                    self.cfg.budget,
                )?;
                let exts = extensions_for(&self.ctx, self.cfg.a, &pts)?;
                let mut fibers = Vec::new();
                for pt in &pts {
                    let f = euler_factor(m, pt, &exts[&pt.degree])?;
                    let np = newton_polygon(&f.cpoly, f.degree, None)?;
                    fibers.push(json!({
                        "degree": pt.degree.to_string(),
                        "orbit": pt.orbit_id.to_string(),
                        "vertices": polygon_json(&np),
                        "dominates_basis": np.dominates(&basis_poly),
                    }));
                }
                let tc = jacobian_data(&self.lift);
                let params = self.trace_params();
                let l = l_trace(m, self.cfg.dt, &tc, &params)?;
                let (num, den) = factored(&l);
                let pn = newton_polygon_of_lseries(&num, None)?;
                let pd = newton_polygon_of_lseries(&den, None)?;
                Ok((
                    json!({
                        "kind": "polygon",
                        "module": m.label,
                        "basis_sequence": h.h.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                        "basis_permutation": perm.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                        "basis_polygon": polygon_json(&basis_poly),
                        "fiber_polygons": fibers,
                        "numerator_polygon": polygon_json(&pn),
                        "denominator_polygon": polygon_json(&pd),
                    }),
                    Outcome::Ok,
                ))
            }
            TaskKind::GmScan => {
                let m = self.module(task)?;
                let s_max = Rat::from_integer(task.s_max.unwrap_or(3));
                let j = task.j.unwrap_or(2);
                let k_list = if task.k_list.is_empty() {
                    let step = (self.cfg.p as i64 - 1).max(1) * (self.cfg.p as i64).pow(j);
                    vec![task.k.unwrap_or(2), task.k.unwrap_or(2) + step]
                } else {
                    task.k_list.clone()
                };
                let profile = BoundProfile {
                    c5_pow_m: Rat::new(1, 4),
                    c6: Rat::from_integer(1),
                    n: self.cfg.nvars,
                    r: m.rank,
                };
                let floor = profile_floor_polygon(&profile, 40);
                let params = self.ur_params();
                let aux = task.aux.as_deref().map(|a| &self.modules[a]);
                let mut l_of_k = |k: i64| -> Result<(LSeries, LSeries)> {
                    let u = unit_root_l(m, aux, k, &params)?;
                    Ok((u.num, u.den))
                };
                let scan = urzeta_core::analytics::gm_scan(
                    &mut l_of_k,
                    &k_list,
                    s_max,
                    j,
                    self.lift.q,
                    &profile,
                    Some(&floor),
                )?;
                if let Some(dir) = csv_dir {
                    let mut rows = vec!["k,slope,d_s,D_s,certified".to_string()];
                    for row in &scan.rows {
                        rows.extend(row.report.csv_rows(row.k));
                    }
                    std::fs::write(dir.join(format!("{}_slopes.csv", task.name)), rows.join("\n"))
                        .map_err(|e| Error::ValidationError {
                            field: "csv".into(),
                            msg: e.to_string(),
                        })?;
                }
                Ok((
                    json!({
                        "kind": "gm-scan",
                        "module": m.label,
                        "j": j.to_string(),
                        "k_list": k_list.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
                        "rows": scan.rows.iter().map(|row| json!({
                            "k": row.k.to_string(),
                            "slopes": row.report.rows.iter().map(|s| json!({
                                "slope": rat_str(s.slope),
                                "d_s": s.d_s.to_string(),
                                "total": s.total.to_string(),
                                "certified": s.certified,
                            })).collect::<Vec<_>>(),
                        })).collect::<Vec<_>>(),
                        "pairs_checked": scan.checked_pairs.len().to_string(),
                        "stable": scan.all_equal,
                    }),
                    if scan.all_equal { Outcome::Ok } else { Outcome::VerifyFailed },
                ))
            }
            TaskKind::Verify => {
                let ids = if task.suite.is_empty() { None } else { Some(task.suite.as_slice()) };
                let results = run_suite(ids);
                let all = results.iter().all(|r| r.passed);
                Ok((
                    json!({
                        "kind": "verify",
                        "criteria": results.iter().map(|r| json!({
                            "id": r.id.to_string(),
                            "name": r.name,
                            "passed": r.passed,
                            "details": r.details,
                        })).collect::<Vec<_>>(),
                        "all_passed": all,
                    }),
                    if all { Outcome::Ok } else { Outcome::VerifyFailed },
                ))
            }
        }
    }

    fn dump_matrix_csv(
        &self,
        m: &SigmaModule,
        tc: &TraceContext,
        dir: &std::path::Path,
        task: &str,
    ) -> Result<()> {
        let params = self.trace_params();
        let u = params.u_cut(self.lift.q, m.max_entry_deg() + 2);
        for i in 0..=self.cfg.nvars {
            let g = dwork_matrix(m, i, u, params.b, tc)?;
            let mut rows = vec!["row,col,value".to_string()];
            rows.extend(g.csv_rows());
            let f = fredholm_det(&g, self.cfg.dt);
            rows.push(format!("# det(I - T Theta_{i}) = {:?}", f));
            std::fs::write(dir.join(format!("{task}_theta{i}.csv")), rows.join("\n")).map_err(
                |e| Error::ValidationError { field: "csv".into(), msg: e.to_string() },
            )?;
        }
        Ok(())
    }
}

fn factored(l: &LSeries) -> (LSeries, LSeries) {
    match &l.factored {
        Some(b) => (b.0.clone(), b.1.clone()),
        None => (l.clone(), LSeries::one(l.ctx(), l.t_cap())),
    }
}

fn terms_json(s: &TruncSeries) -> Value {
    Value::Array(
        s.canonical_terms()
            .into_iter()
            .map(|(e, d)| {
                json!([
                    e.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                    d
                ])
            })
            .collect(),
    )
}

fn rat_str(r: Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn polygon_json(p: &NewtonPolygon) -> Value {
    json!({
        "vertices": p.vertices.iter().map(|(x, y)| json!([rat_str(*x), rat_str(*y)])).collect::<Vec<_>>(),
        "certified_slope": p.certified_slope.map(rat_str),
    })
}
