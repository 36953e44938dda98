mod args;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use guardscan_core::completion::{CompilerDriver, SolcDriver, SyntaxCheckDriver};
use guardscan_core::gateway::{Gateway, HttpProvider, HttpProviderConfig};
use guardscan_core::{run_pipeline_with, PipelineOptions};
use log::{info, warn};

use args::{Cli, Command, LlmChoice, Settings};

const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Scan(a) => match a.resolve().and_then(scan) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("guardscan: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
    }
}

fn provider() -> Result<HttpProvider, String> {
    HttpProviderConfig::from_env()
        .map(HttpProvider::new)
        .ok_or_else(|| "--llm live/record needs GUARDSCAN_LLM_ENDPOINT".to_string())
}

fn driver(s: &Settings) -> Result<Box<dyn CompilerDriver>, String> {
    let solc = match &s.compiler_dir {
        Some(dir) => Some(SolcDriver::from_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?),
        None => SolcDriver::from_env(),
    };
    match solc {
        Some(d) if !d.is_empty() => Ok(Box::new(d)),
        Some(_) => Err("compiler directory holds no solc binaries".into()),
        None => {
            info!("no solc binaries configured; using the built-in syntax checker");
            Ok(Box::new(SyntaxCheckDriver::default()))
        }
    }
}

fn scan(s: Settings) -> Result<u8, String> {
    let gateway = match &s.llm {
        LlmChoice::Off => None,
        LlmChoice::Live => Some(Gateway::live(provider()?)),
        LlmChoice::Record(p) => Some(Gateway::record(provider()?, Some(p.clone()))),
        LlmChoice::Replay(p) => Some(Gateway::replay_file(p).map_err(|e| format!("{}: {e}", p.display()))?),
    };
    let driver = driver(&s)?;
    let opts = PipelineOptions {
        dump_cfg_dir: s.dump_cfg.clone(),
    };
    let report = run_pipeline_with(&s.config, gateway.as_ref(), driver.as_ref(), &opts).map_err(|e| e.to_string())?;
    if let Some(g) = &gateway {
        if let Err(e) = g.save() {
            warn!("cannot save transcript: {e}");
        }
    }
    let text = report.render(s.format);
    match &s.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string())?,
    }
    Ok(report.exit_code() as u8)
}
