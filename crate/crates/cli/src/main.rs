//! `zfdfe`: batch front end for codebook construction, selection, link
//! simulation, distortion estimates and property checks.

mod args;
mod output;

use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::Parser;
use serde_json::json;

use zfdfe_core::codebook::{build_grassmann_codebook, build_permutation_codebook, min_pairwise_distance, Codebook, CodebookKind, Metric};
use zfdfe_core::selection::{evaluate_distortion_bound, estimate_distortion, select_precoder_with, Receiver};
use zfdfe_core::simkit::{write_csv, BerCampaign, CampaignResult, Scheme};
use zfdfe_core::verify::{run_suite, Suite};
use zfdfe_core::{generate_channel, ChannelMatrix, Error, ObjectiveKind};

use args::{Cli, CodebookCmd, Command, SimKind};
use output::{Manifest, OutputDir};

/// Exit status classes.
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_PROPERTY: u8 = 4;

/// Error carrying the exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::InfeasibleCampaign { .. } | Error::AllInfeasible | Error::RankDeficient(_)) => EXIT_INFEASIBLE,
                        Some(Error::Io(_)) => 1,
            Some(_) => EXIT_USAGE,
            None => 1,
        };
        Self { code, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::from(err).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, err: anyhow!(msg.into()) }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    let res = match &cli.command {
        Command::Codebook { cmd } => match cmd {
            CodebookCmd::Build(a) => codebook_build(a, &cli.out_dir, &argv),
            CodebookCmd::Stats(a) => codebook_stats(a),
        },
        Command::Select(a) => select(a, &cli.out_dir, &argv),
        Command::Simulate { kind } => simulate(kind, &cli.out_dir, &argv),
        Command::Distortion(a) => distortion(a, &cli.out_dir, &argv),
        Command::Verify(a) => verify(a, &cli.out_dir, &argv),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_codebook(path: &std::path::Path) -> Result<Codebook, Failure> {
    // An unreadable or malformed input is the caller's mistake.
    Codebook::load(path).map_err(|e| Failure { code: EXIT_USAGE, err: anyhow::Error::from(e).context(format!("reading codebook {}", path.display())) })
}

fn codebook_build(a: &args::BuildArgs, out_dir: &std::path::Path, argv: &[String]) -> CmdResult {
    let cb = match a.kind {
        CodebookKind::Grassmann => build_grassmann_codebook(a.nt, a.k, a.size, a.metric, a.budget, a.seed)?,
        CodebookKind::Permutation => build_permutation_codebook(a.nt, a.k)?,
    };
    let name = a.name.clone().unwrap_or_else(|| match a.kind {
        CodebookKind::Grassmann => format!("grassmann-nt{}-k{}-n{}-{}-seed{}", a.nt, a.k, a.size, a.metric, a.seed),
        CodebookKind::Permutation => format!("permutation-nt{}-k{}", a.nt, a.k),
    });
    let dir = OutputDir::create(out_dir, "codebook", &name)?;
    let path = a.out.clone().unwrap_or_else(|| dir.path("codebook.json"));
    cb.save(&path).with_context(|| format!("writing {}", path.display()))?;
    let stats = stats_json(&cb);
    dir.write_json("results.json", &json!({ "manifest": "manifest.json", "codebook": path, "stats": stats }))?;
    Manifest::new("codebook build", argv)
        .seeds(json!({ "build_seed": a.seed }))
        .extra("budget", json!(a.budget))
        .output(&path)
        .output(&dir.path("results.json"))
        .write(&dir)?;
    println!("{}", serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)?);
    Ok(())
}

fn stats_json(cb: &Codebook) -> serde_json::Value {
    let finite = |d: f64| if d.is_finite() { json!(d) } else { json!(null) };
    let (proj2, fs) = if cb.len() > 1 {
        (
            finite(min_pairwise_distance(cb, Metric::Proj2).unwrap_or(f64::NAN)),
            finite(min_pairwise_distance(cb, Metric::FubiniStudy).unwrap_or(f64::NAN)),
        )
    } else {
        (json!(null), json!(null))
    };
    json!({
        "nt": cb.nt(),
        "k": cb.k(),
        "size": cb.len(),
        "kind": cb.kind(),
        "metric": cb.metric(),
        "build_seed": cb.build_seed(),
        "feedback_bits": cb.feedback_bits(),
        "min_distance": finite(cb.min_distance()),
        "min_distance_proj2": proj2,
        "min_distance_fubini_study": fs,
    })
}

fn codebook_stats(a: &args::StatsArgs) -> CmdResult {
    let cb = load_codebook(&a.codebook)?;
    println!("{}", serde_json::to_string_pretty(&stats_json(&cb)).map_err(anyhow::Error::from)?);
    Ok(())
}

fn select(a: &args::SelectArgs, out_dir: &std::path::Path, argv: &[String]) -> CmdResult {
    let mut cfg = a.config.resolve()?;
    if let Some(s) = a.snr_db {
        cfg = cfg.with_snr_db(s)?;
    }
    let cb = load_codebook(&a.codebook)?;
    let ch: ChannelMatrix = generate_channel(&cfg, a.channel_seed);
    let receiver = if a.linear { Receiver::LinearZf } else { Receiver::ZfDfe };
    let res = select_precoder_with(&ch, &cb, a.objective, receiver, a.all_values)?;
    let name = a.name.clone().unwrap_or_else(|| format!("{}-seed{}", a.objective, a.channel_seed));
    let dir = OutputDir::create(out_dir, "select", &name)?;
    dir.write_json("results.json", &json!({ "manifest": "manifest.json", "selection": res }))?;
    Manifest::new("select", argv)
        .config(&cfg)
        .seeds(json!({ "channel_seed": a.channel_seed }))
        .output(&a.codebook)
        .output(&dir.path("results.json"))
        .write(&dir)?;
    println!("{}", serde_json::to_string_pretty(&res).map_err(anyhow::Error::from)?);
    Ok(())
}

fn parse_scheme(spec: &str, codebook: Option<&Arc<Codebook>>, default_obj: ObjectiveKind) -> Result<Scheme, Failure> {
    let (name, objective) = match spec.split_once('@') {
        Some((n, o)) => (n, o.parse::<ObjectiveKind>().map_err(|e| usage(format!("scheme `{spec}`: {e}")))?),
        None => (spec, default_obj),
    };
    let need_cb = || codebook.cloned().ok_or_else(|| usage(format!("scheme `{name}` needs --codebook")));
    Ok(match name {
        "perfect-csi-zfdfe" => Scheme::PerfectCsiZfDfe,
        "grassmann-zfdfe" => Scheme::GrassmannZfDfe { codebook: need_cb()?, objective },
        "ordering-norm-zfdfe" => Scheme::OrderingNormZfDfe,
        "ordering-greedy-zfdfe" => Scheme::OrderingGreedyZfDfe,
        "lin-zf-grassmann" => Scheme::LinZfGrassmann { codebook: need_cb()?, objective },
        "perfect-csi-lin-zf" => Scheme::PerfectCsiLinZf { objective },
        other => return Err(usage(format!("unknown scheme `{other}`"))),
    })
}

fn simulate(kind: &SimKind, out_dir: &std::path::Path, argv: &[String]) -> CmdResult {
    let (a, is_ber) = match kind {
        SimKind::Ber(a) => (a, true),
        SimKind::Mi(a) => (a, false),
    };
    let cfg = a.config.resolve()?;
    let codebook = match &a.codebook {
        Some(p) => Some(Arc::new(load_codebook(p)?)),
        None => None,
    };
    if a.schemes.is_empty() {
        return Err(usage("at least one --scheme is required"));
    }
    let schemes: Vec<Scheme> = a.schemes.iter().map(|s| parse_scheme(s, codebook.as_ref(), a.objective)).collect::<Result<_, _>>()?;
    if a.snr_db.is_empty() {
        return Err(usage("at least one --snr-db point is required"));
    }
    let mut results: Vec<CampaignResult> = Vec::new();
    for scheme in &schemes {
        let spec = BerCampaign {
            config: cfg,
            scheme: scheme.clone(),
            snr_db: a.snr_db.clone(),
            n_channels: a.channels,
            n_frames_per_channel: a.frames,
            genie: a.genie,
            master_seed: a.seed,
            modulation: a.modulation,
        };
        let r = if is_ber {
            spec.run()?
        } else {
            zfdfe_core::simkit::run_mi_campaign(&cfg, scheme, &a.snr_db, a.channels, a.seed)?
        };
        results.push(r);
    }
    let cmd = if is_ber { "simulate ber" } else { "simulate mi" };
    let tag = if is_ber { "ber" } else { "mi" };
    let name = a.name.clone().unwrap_or_else(|| format!("{tag}-{}-seed{}", a.schemes.join("+").replace(['@', ':'], "_"), a.seed));
    let dir = OutputDir::create(out_dir, "simulate", &name)?;
    let csv_path = dir.path("results.csv");
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(&results, file)?;
    dir.write_json("results.json", &json!({ "manifest": "manifest.json", "campaigns": results }))?;
    let mut m = Manifest::new(cmd, argv).config(&cfg).seeds(json!({ "master_seed": a.seed }));
    if let Some(p) = &a.codebook {
        m = m.output(p);
    }
    m.output(&csv_path).output(&dir.path("results.json")).write(&dir)?;
    print!("{}", std::fs::read_to_string(&csv_path).map_err(anyhow::Error::from)?);
    Ok(())
}

fn distortion(a: &args::DistortionArgs, out_dir: &std::path::Path, argv: &[String]) -> CmdResult {
    let cfg = a.config.resolve()?;
    let cb = load_codebook(&a.codebook)?;
    let est = estimate_distortion(&cb, a.kind, &cfg, a.samples, a.seed)?;
    let bound = match a.density {
        Some(d) => Some(evaluate_distortion_bound(&cb, a.kind, &cfg, Some(d), a.samples, a.seed)?),
        None => None,
    };
    let name = a.name.clone().unwrap_or_else(|| format!("{:?}-seed{}", a.kind, a.seed).to_lowercase());
    let dir = OutputDir::create(out_dir, "distortion", &name)?;
    let out = json!({ "manifest": "manifest.json", "estimate": est, "bound": bound });
    dir.write_json("results.json", &out)?;
    Manifest::new("distortion", argv)
        .config(&cfg)
        .seeds(json!({ "seed": a.seed }))
        .output(&a.codebook)
        .output(&dir.path("results.json"))
        .write(&dir)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "estimate": est, "bound": bound })).map_err(anyhow::Error::from)?);
    Ok(())
}

fn verify(a: &args::VerifyArgs, out_dir: &std::path::Path, argv: &[String]) -> CmdResult {
    let suites: Vec<Suite> = if a.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![a.suite.parse::<Suite>().map_err(|e| usage(e.to_string()))?]
    };
    let mut reports = Vec::new();
    for s in suites {
        let r = run_suite(s, a.cases, a.seed)?;
        print!("{r}");
        reports.push(r);
    }
    let name = a.name.clone().unwrap_or_else(|| format!("{}-seed{}", a.suite, a.seed));
    let dir = OutputDir::create(out_dir, "verify", &name)?;
    dir.write_json("results.json", &json!({ "manifest": "manifest.json", "reports": reports }))?;
    Manifest::new("verify", argv).seeds(json!({ "seed": a.seed })).output(&dir.path("results.json")).write(&dir)?;
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failed_checks().into_iter().map(move |c| format!("{}: {}", r.suite, c.name)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_PROPERTY, err: anyhow!("failed properties:\n  {}", failed.join("\n  ")) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::InfeasibleCampaign { skipped: 5, total: 10 }), EXIT_INFEASIBLE);
        assert_eq!(code(Error::AllInfeasible), EXIT_INFEASIBLE);
        assert_eq!(code(Error::InvalidConfig("k".into())), EXIT_USAGE);
        assert_eq!(code(Error::Domain("x".into())), EXIT_USAGE);
        assert_eq!(code(Error::Io(std::io::Error::other("disk"))), 1);
        let wrapped = Failure::from(anyhow::Error::from(Error::AllInfeasible).context("while selecting"));
        assert_eq!(wrapped.code, EXIT_INFEASIBLE);
    }

    #[test]
    fn scheme_specs() {
        let s = parse_scheme("perfect-csi-lin-zf@max-mse", None, ObjectiveKind::SumMse).unwrap();
        assert_eq!(s.label(), "perfect-csi-lin-zf[max-mse]");
        assert_eq!(parse_scheme("grassmann-zfdfe", None, ObjectiveKind::SumMse).unwrap_err().code, EXIT_USAGE);
        assert_eq!(parse_scheme("ordering-norm-zfdfe@nope", None, ObjectiveKind::SumMse).unwrap_err().code, EXIT_USAGE);
    }
}
