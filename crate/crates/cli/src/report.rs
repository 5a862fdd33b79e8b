use std::fs;

use aigcbias::report::{emit_figure_tables, sha256_hex, ReportFile};
use aigcbias::Error;

use crate::args::ReportArgs;
use crate::CliResult;

pub const FIGURES_DIR: &str = "figures";

pub fn run(args: ReportArgs) -> CliResult {
    let report = ReportFile::read(&args.input)?;
    let bytes = fs::read(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let mut manifest = emit_figure_tables(&report, &args.out.join(FIGURES_DIR))?;
    for f in &mut manifest.files {
        f.path = format!("{FIGURES_DIR}/{}", f.path);
    }
    manifest.report_sha256 = Some(sha256_hex(&bytes));
    manifest.write(&args.out.join("manifest.json"))?;
    println!(
        "wrote {} figure tables to {} ({} panels omitted)",
        manifest.files.len(),
        args.out.join(FIGURES_DIR).display(),
        manifest.omitted.len()
    );
    Ok(())
}
