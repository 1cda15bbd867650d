//! Named reproduction targets with every setting pinned.

use std::fmt::Write as _;

use serde_json::json;

use super::config::{parse_config, Engine, RunConfig};
use super::experiment::{json_text, pool_spec, run_experiment, run_pool, summarize, Report};
use crate::cme::CmeOracle;
use crate::error::{Error, Result};

pub const TARGETS: [&str; 7] = [
    "schlogl-fig2",
    "schlogl-fig3",
    "schlogl-table2",
    "schlogl-table3",
    "gsw-table4",
    "gsw-iaf",
    "gsw-fig6",
];

pub const SCHLOGL_TABLE2_CFG: &str = include_str!("../../../../configs/schlogl-table2.cfg");

const SCHLOGL_ERGODIC: &str = r#"
model = "schlogl"
mode = "parrep"
seed = 20160704
t_end = 1e5
n_traj = 100

[parrep]
decorrelation = 5000
dephasing = 5000
replicas = 100

[cme]
lo = [0]
hi = [149]
"#;

const SCHLOGL_FIG3: &str = r#"
[bins]
species = "X"
lo = 0
hi = 149
"#;

const GSW_SENSITIVITY: &str = r#"
model = "genetic-switch"
mode = "sensitivity"
engine = "parrep"
seed = 20160704
t_end = 2e6
burn_in = 1e6
n_traj = 100

[parrep]
decorrelation = 20000
dephasing = 20000
replicas = 100
"#;

/// Figure-2 sweeps: `n_c = n_p` at `R = 100`, then `R` at `n_c = n_p = 5000`.
const FIG2_THRESHOLDS: [u64; 5] = [1000, 2000, 3000, 4000, 5000];
const FIG2_REPLICAS: [usize; 5] = [20, 40, 60, 80, 100];

pub struct Preset {
    pub header: &'static str,
    pub config: RunConfig,
}

pub fn preset(target: &str, overrides: &[(String, String)]) -> Result<Preset> {
    let mut over = vec![("output.dir".to_string(), format!("\"out/{target}\""))];
    over.extend_from_slice(overrides);
    let (header, text) = match target {
        "schlogl-fig2" => (
            "Fig. 2: Schlögl stationary mean of X under ParRep versus n_c = n_p and R, with SSA, CME and speedup",
            SCHLOGL_ERGODIC.to_string(),
        ),
        "schlogl-fig3" => (
            "Fig. 3: Schlögl stationary distribution of X, 150 bins on [0, 149], ParRep against the CME",
            format!("{SCHLOGL_ERGODIC}{SCHLOGL_FIG3}"),
        ),
        "schlogl-table2" => ("Table II: Schlögl path-space FIM with 95% half-widths", SCHLOGL_TABLE2_CFG.to_string()),
        "schlogl-table3" => (
            "Table III: Schlögl sensitivity bounds for f = X against CME sensitivities",
            SCHLOGL_TABLE2_CFG.to_string(),
        ),
        "gsw-table4" => ("Table IV: genetic switch path-space FIM with 95% half-widths", GSW_SENSITIVITY.to_string()),
        "gsw-iaf" => ("Table VI: genetic switch IAF per observable", GSW_SENSITIVITY.to_string()),
        "gsw-fig6" => (
            "Fig. 6: genetic switch sensitivity bounds per observable and parameter",
            GSW_SENSITIVITY.to_string(),
        ),
        other => {
            return Err(Error::Schema {
                path: "target".into(),
                message: format!("unknown reproduce target `{other}`; known: {}", TARGETS.join(", ")),
            })
        }
    };
    Ok(Preset {
        header,
        config: parse_config(&text, &over)?,
    })
}

/// Runs a reproduction target. The primary table of each target is written as
/// `<target>.csv` next to the generic documents.
pub fn reproduce(target: &str, overrides: &[(String, String)]) -> Result<(RunConfig, Report)> {
    let Preset { header, config } = preset(target, overrides)?;
    if target == "schlogl-fig2" {
        let report = fig2(&config, header)?;
        return Ok((config, report));
    }
    let mut report = run_experiment(&config, Some(header))?;
    let primary = match target {
        "schlogl-fig3" => report.get("histogram.csv"),
        "schlogl-table2" | "gsw-table4" => report.get("fim.csv"),
        "schlogl-table3" | "gsw-fig6" => report.get("bounds.csv"),
        "gsw-iaf" => report.get("iaf.csv"),
        _ => None,
    };
    if let Some(body) = primary {
        let text = format!("# {header}\n{body}");
        report.push(&format!("{target}.csv"), text);
    }
    Ok((config, report))
}

fn fig2(base: &RunConfig, header: &str) -> Result<Report> {
    let model = base.resolve()?;
    let oracle = match &model.state_box {
        Some(b) => Some(CmeOracle::new(&model.network, b)?),
        None => None,
    };
    let cme_mean = oracle.as_ref().map(|o| o.mean(0));
    let serial = run_pool(&model, &pool_spec(base, &model, Engine::Ssa, false));
    let ssa = summarize(&serial);
    let base_p = base.parrep.clone().expect("preset has parrep");
    let mut points = Vec::new();
    for &n in &FIG2_THRESHOLDS {
        let mut p = base_p.clone();
        p.decorrelation = n;
        p.dephasing = n;
        points.push(("thresholds", p));
    }
    for &r in &FIG2_REPLICAS {
        let mut p = base_p.clone();
        p.replicas = r;
        points.push(("replicas", p));
    }
    let mut csv = format!(
        "# {header}\npanel,n_c,n_p,replicas,parrep_mean,parrep_half_width,ssa_mean,ssa_half_width,cme_mean,relative_error,speedup\n"
    );
    let mut rows = Vec::new();
    let cme = cme_mean.unwrap_or(f64::NAN);
    for (panel, p) in points {
        let cfg = RunConfig {
            parrep: Some(p.clone()),
            ..base.clone()
        };
        let pool = run_pool(&model, &pool_spec(&cfg, &model, Engine::Parrep, false));
        let ens = summarize(&pool);
        let m = &ens.observables[0];
        let speedup = serial.wall / pool.wall;
        writeln!(
            csv,
            "{panel},{},{},{},{},{},{},{},{},{},{}",
            p.decorrelation,
            p.dephasing,
            p.replicas,
            m.mean,
            m.half_width,
            ssa.observables[0].mean,
            ssa.observables[0].half_width,
            cme,
            (m.mean - cme).abs() / cme,
            speedup
        )
        .unwrap();
        rows.push(json!({"panel": panel, "parrep": p, "mean": m.mean, "half_width": m.half_width}));
    }
    let summary = json!({
        "header": header,
        "model": model.name,
        "seed": base.seed,
        "t_end": base.t_end,
        "n_traj": base.n_traj,
        "ssa": ssa,
        "cme_mean": cme_mean,
        "points": rows,
    });
    let mut report = Report::default();
    report.push("summary.json", json_text(&summary));
    report.push("schlogl-fig2.csv", csv);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Mode;

    #[test]
    fn shipped_table2_config() {
        let cfg = parse_config(SCHLOGL_TABLE2_CFG, &[]).unwrap();
        let p = cfg.parrep.as_ref().unwrap();
        assert_eq!(
            (p.decorrelation, p.dephasing, p.replicas),
            (5000, 5000, 100)
        );
        assert_eq!(cfg.burn_in, 1e5);
        assert_eq!(cfg.window(), 1e5);
        assert_eq!(cfg.n_traj, 100);
        assert_eq!(cfg.mode, Mode::Sensitivity);
    }

    #[test]
    fn every_target_resolves() {
        for t in TARGETS {
            let p = preset(t, &[]).unwrap();
            assert!(!p.header.is_empty());
            p.config.resolve().unwrap();
        }
        assert!(preset("fig9", &[]).is_err());
    }
}
