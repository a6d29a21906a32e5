use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgraph_core::eigenmode::{eigenfunctions_at, SupportClassification};
use qgraph_core::genericity::{
    genericity_report, randomized_genericity_trial, trace_theta_path, verify_interlacing, AlphaValue,
    STEPS_PER_TURN,
};
use qgraph_core::manifold::{
    classify_points, connected_components, export_mesh, gradient_sign_labels, sample_field, sign_agreement,
    write_field, CellState,
};
use qgraph_core::spectral::{first_eigenvalues, scan_spectrum};
use qgraph_core::{read_graph, Error, MetricGraph};

const DEFAULT_SEED: u64 = 20_240_917;
/// Interlacing margins below this count as violations.
const MARGIN_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "qgraph", version, about = "Spectra of quantum graphs with delta vertex conditions")]
struct Cli {
    /// Worker threads for the parallel parts (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write the table to this file instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues up to a wavenumber bound.
    Spectrum {
        graph: PathBuf,
        /// Largest wavenumber k = sqrt(lambda).
        #[arg(long, default_value_t = 10.0)]
        kmax: f64,
    },
    /// First eigenvalues with vertex values and support of the eigenfunctions.
    Modes {
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Also write `samples` points per edge of every eigenfunction here.
        #[arg(long)]
        samples_out: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Interlacing of spectra for consecutive coefficients at one vertex.
    Interlace {
        graph: PathBuf,
        #[arg(long)]
        vertex: String,
        /// Comma-separated coefficients; `inf` stands for Dirichlet.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        alphas: Vec<AlphaValue>,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Simplicity and vertex non-vanishing of the first eigenpairs.
    Generic(GenericArgs),
    /// Zero set of the secular function on the torus.
    Manifold {
        graph: PathBuf,
        #[arg(long, default_value_t = 64)]
        res: usize,
        /// Write a triangulated zero set (three edges only).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Lower corner of the mesh window, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
        origin: Vec<f64>,
        /// Dump the sampled values as a table.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Follows an eigenvalue while the condition at a leaf turns.
    Trace {
        graph: PathBuf,
        #[arg(long)]
        leaf: String,
        /// Index of the starting eigenvalue, counted from 0.
        #[arg(long)]
        start: usize,
        #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
        turns: i64,
        #[arg(long, default_value_t = STEPS_PER_TURN)]
        steps: usize,
    },
}

#[derive(Args, Debug)]
struct GenericArgs {
    graph: PathBuf,
    /// Randomly perturbed copies to test; 0 examines only the graph itself.
    #[arg(long, default_value_t = 0)]
    trials: usize,
    /// Largest length perturbation.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

/// Failure of a subcommand: a library error or a failed numerical check.
enum Failure {
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::fmt::Error> for Failure {
    fn from(e: std::fmt::Error) -> Self {
        Failure::Lib(Error::Io(e.to_string()))
    }
}

type Outcome = Result<String, (String, Failure)>;

/// `x` with 12 significant digits, without trailing zeros.
fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific format");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

fn load(path: &PathBuf) -> Result<MetricGraph, Failure> {
    Ok(read_graph(path)?)
}

fn spectrum(graph: &PathBuf, kmax: f64) -> Result<String, Failure> {
    let g = load(graph)?;
    let records = scan_spectrum(&g, kmax)?;
    let mut out = String::from("k\tlambda\tmultiplicity\tindex\tresidual\n");
    for r in records {
        let k = if r.negative { -r.k } else { r.k };
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.3e}",
            num(k),
            num(r.lambda),
            r.multiplicity,
            r.index,
            r.residual
        )?;
    }
    Ok(out)
}

fn support_label(s: &SupportClassification) -> String {
    match s {
        SupportClassification::NonvanishingOnVertices => "nonvanishing".into(),
        SupportClassification::VanishesAtVertices(vs) => format!("vanishes:{}", vs.join(",")),
        SupportClassification::LoopSupported(l) => format!("loop:{}", l.edge_chain.join(",")),
        SupportClassification::SupportedOnLoops(ls) => format!(
            "loops:{}",
            ls.iter().map(|l| l.edge_chain.join(",")).collect::<Vec<_>>().join(";")
        ),
    }
}

fn modes(graph: &PathBuf, n: usize, samples_out: Option<&PathBuf>, samples: usize) -> Result<String, Failure> {
    let g = load(graph)?;
    let records = first_eigenvalues(&g, n)?;
    let ids: Vec<&str> = g.vertices().iter().map(|v| v.id.as_str()).collect();
    let mut out = String::from("index\tlambda\tsupport");
    for id in &ids {
        write!(out, "\tf({id})")?;
    }
    out.push('\n');
    let mut sample_file = match samples_out {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p).map_err(Error::from)?);
            writeln!(f, "index\tedge\tx\tf").map_err(Error::from)?;
            Some(f)
        }
        None => None,
    };
    for r in &records {
        for (i, f) in eigenfunctions_at(&g, r)?.into_iter().enumerate() {
            let index = r.index + i;
            if index >= n {
                break;
            }
            write!(out, "{index}\t{}\t{}", num(r.lambda), support_label(&f.support))?;
            for id in &ids {
                write!(out, "\t{}", num(f.vertex_value(id).unwrap_or(0.0)))?;
            }
            out.push('\n');
            if let Some(file) = sample_file.as_mut() {
                let mut buf = Vec::new();
                f.write_samples(&mut buf, samples)?;
                let text = String::from_utf8(buf).expect("samples are text");
                for line in text.lines().skip(1) {
                    writeln!(file, "{index}\t{line}").map_err(Error::from)?;
                }
            }
        }
    }
    if let Some(mut file) = sample_file {
        file.flush().map_err(Error::from)?;
    }
    Ok(out)
}

fn interlace(graph: &PathBuf, vertex: &str, alphas: &[AlphaValue], n: usize) -> Result<String, (String, Failure)> {
    let run = || -> Result<(String, f64), Failure> {
        if alphas.len() < 2 {
            return Err(Error::InvalidArgument("need at least two coefficients".into()).into());
        }
        let g = load(graph)?;
        let pairs: Vec<(AlphaValue, AlphaValue)> = alphas.windows(2).map(|w| (w[0], w[1])).collect();
        let results = verify_interlacing(&g, vertex, &pairs, n)?;
        let mut out = String::from("alpha\talpha_prime\tmargin\tstrict_checked\tstrict_failures\n");
        let mut worst = f64::INFINITY;
        for r in results {
            worst = worst.min(r.margin);
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.alpha,
                r.alpha_prime,
                num(r.margin),
                r.strict_checked.len(),
                r.strict_failures.len()
            )?;
        }
        Ok((out, worst))
    };
    match run() {
        Ok((out, worst)) if worst < -MARGIN_TOLERANCE => Err((out, Failure::Check(format!("interlacing violated by {}", num(-worst))))),
        Ok((out, _)) => Ok(out),
        Err(f) => Err((String::new(), f)),
    }
}

fn generic(args: &GenericArgs) -> Result<String, Failure> {
    let g = load(&args.graph)?;
    let report = genericity_report(&g, args.n)?;
    let mut out = String::from("index\tlambda\trelative_gap\tclass\tdetail\n");
    // Class and detail columns come from the library table; numbers are
    // reprinted at full precision.
    for (i, line) in report.to_tsv().lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        writeln!(
            out,
            "{i}\t{}\t{}\t{}\t{}",
            num(report.eigenvalues[i]),
            num(report.gaps[i]),
            cols.get(3).unwrap_or(&""),
            cols.get(4).unwrap_or(&"")
        )?;
    }
    writeln!(out, "# simple\t{}", report.verdict.simple)?;
    writeln!(out, "# nonvanishing\t{}", report.verdict.nonvanishing)?;
    writeln!(out, "# single_loop\t{}", report.verdict.single_loop)?;
    writeln!(out, "# min_gap\t{}", num(report.min_spectral_gap))?;
    if args.trials > 0 {
        let summary = randomized_genericity_trial(&g, args.trials, args.eps, args.n, args.seed)?;
        writeln!(out, "# trials\t{}", summary.trials)?;
        writeln!(out, "# passed\t{}", summary.passed)?;
        writeln!(out, "# fraction\t{}", summary.fraction.map_or("-".into(), num))?;
        for (i, why) in &summary.failures {
            writeln!(out, "# failure\t{i}\t{why}")?;
        }
    }
    Ok(out)
}

fn manifold(
    graph: &PathBuf,
    res: usize,
    mesh: Option<&PathBuf>,
    origin: &[f64],
    field_out: Option<&PathBuf>,
) -> Result<String, Failure> {
    let g = load(graph)?;
    if mesh.is_some() && g.edge_count() != 3 {
        return Err(Error::DimensionNot3(g.edge_count()).into());
    }
    let field = classify_points(sample_field(&g, res)?);
    let comps = connected_components(&field);
    let mut out = String::new();
    if comps.degenerate {
        writeln!(out, "components: degenerate")?;
    } else {
        writeln!(out, "components: {}", comps.count)?;
    }
    writeln!(out, "smooth_cells: {}", field.count(CellState::Smooth))?;
    writeln!(out, "near_singular_cells: {}", field.count(CellState::NearSingular))?;
    writeln!(out, "singular_cells: {}", field.count(CellState::Singular))?;
    if !comps.degenerate {
        let signs = gradient_sign_labels(&field)?;
        let agreement = sign_agreement(&comps, &signs);
        writeln!(out, "sign_agreement: {}", num(agreement.fraction()))?;
    }
    let checks = field.multiplicity_checks();
    if !checks.is_empty() {
        let confirmed = checks.iter().filter(|c| c.multiplicity >= 2).count();
        writeln!(out, "singular_multiplicity_confirmed: {confirmed}/{}", checks.len())?;
    }
    writeln!(out, "component\tcells")?;
    for (i, size) in comps.sizes.iter().enumerate() {
        writeln!(out, "{i}\t{size}")?;
    }
    if let Some(path) = mesh {
        let m = export_mesh(&field, &comps, path, [origin[0], origin[1], origin[2]])?;
        writeln!(out, "# mesh\t{}\t{} triangles", path.display(), m.triangle_count())?;
    }
    if let Some(path) = field_out {
        let file = std::fs::File::create(path).map_err(Error::from)?;
        let mut w = std::io::BufWriter::new(file);
        write_field(&field, &mut w)?;
        w.flush().map_err(Error::from)?;
    }
    Ok(out)
}

fn trace(graph: &PathBuf, leaf: &str, start: usize, turns: i64, steps: usize) -> Result<String, Failure> {
    let g = load(graph)?;
    let path = trace_theta_path(&g, leaf, start, turns, steps)?;
    let mut out = String::from("theta\tlambda\textended_length\tphi_residual\n");
    for s in &path.samples {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.3e}",
            num(s.theta),
            num(s.lambda),
            num(s.extended_length),
            s.phi_residual
        )?;
    }
    writeln!(out, "# start_index\t{}", path.start_index)?;
    writeln!(out, "# end_index\t{}", path.end_index)?;
    writeln!(out, "# max_phi_residual\t{:.3e}", path.max_phi_residual())?;
    Ok(out)
}

fn dispatch(cli: &Cli) -> Outcome {
    let plain = |r: Result<String, Failure>| r.map_err(|f| (String::new(), f));
    match &cli.command {
        Command::Spectrum { graph, kmax } => plain(spectrum(graph, *kmax)),
        Command::Modes {
            graph,
            n,
            samples_out,
            samples,
        } => plain(modes(graph, *n, samples_out.as_ref(), *samples)),
        Command::Interlace { graph, vertex, alphas, n } => interlace(graph, vertex, alphas, *n),
        Command::Generic(args) => plain(generic(args)),
        Command::Manifold {
            graph,
            res,
            mesh,
            origin,
            field,
        } => plain(manifold(graph, *res, mesh.as_ref(), origin, field.as_ref())),
        Command::Trace {
            graph,
            leaf,
            start,
            turns,
            steps,
        } => plain(trace(graph, leaf, *start, *turns, *steps)),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let (text, failure) = match dispatch(&cli) {
        Ok(text) => (text, None),
        Err((text, f)) => (text, Some(f)),
    };
    if !text.is_empty() {
        if let Err(e) = emit(&cli, &text) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match failure {
        None => ExitCode::SUCCESS,
        Some(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Some(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
