//! Run the full prompt → image → materials → CO₂e pipeline offline against
//! the bundled replay recordings and print the report.
//!
//!     cargo run --example replay_pipeline -- "A terrace lounge with hardwood decking and limestone feature walls"
//!     cargo run --example replay_pipeline -- --json "<prompt>"

use std::path::Path;

use insightgen::gateway::{GatewayConfig, GatewayMode};
use insightgen::insights::{render_report, run_pipeline, PipelineConfig, ReportFormat};

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let format = match args.iter().position(|a| a == "--json") {
        Some(i) => {
            args.remove(i);
            ReportFormat::Json
        }
        None => ReportFormat::TextTable,
    };
    let prompt = args
        .first()
        .cloned()
        .unwrap_or_else(|| "A terrace lounge with hardwood decking and limestone feature walls".into());

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let gateway = GatewayConfig { mode: GatewayMode::Replay, fixtures: Some(fixtures.join("replay")), ..Default::default() };
    let config = PipelineConfig::new(fixtures.join("materials_sample.json"), gateway);

    match run_pipeline(&prompt, &config) {
        Ok(run) => print!("{}", render_report(&run.report, format)),
        Err(e) => {
            // Prompts outside the recorded set miss in replay mode.
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
