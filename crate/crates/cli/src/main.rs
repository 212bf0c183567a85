use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qfisher::families::gradient;
use qfisher::fisher_channel::{rld_fisher_channel, rld_value_channel, sld_fisher_channel};
use qfisher::fisher_state::fisher;
use qfisher::format::sig;
use qfisher::gadc::{
    curve_csv, gadc_channel, gadc_choi_derivative, gadc_closed_form, gadc_curve, gadc_point, gadc_sld_objective_min,
    gadc_sld_probe, linear_grid, CurveConfig, CurveTarget,
};
use qfisher::linalg::{identity, unitary_exp};
use qfisher::sdp::{build, export_sdpa, file_name, SdpInput, SdpKind};
use qfisher::suite::{report_table, run_all};
use qfisher::{
    crb, BoundKind, CMatrix, ChannelFamily, Differentiable, DistributionFamily, FisherKind, FisherValue, GadcParam, GadcParams,
    ParamPoint, ProbeConfig, StateFamily, TraceConvention, WeightMatrix, C64,
};

#[derive(Parser)]
#[command(name = "qfisher", version, about = "SLD and RLD Fisher information of quantum states and channels")]
struct Cli {
    /// Significant digits of numeric output.
    #[arg(long, global = true, default_value_t = 12)]
    precision: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fisher information of a one-parameter state family.
    StateFisher(StateFisherArgs),
    /// Fisher information of a one-parameter channel family.
    ChannelFisher(ChannelFisherArgs),
    /// Cramér-Rao bound from a Fisher value.
    Bound(BoundArgs),
    /// Generalized amplitude damping channel: point values or bound curves as CSV.
    Gadc(GadcArgs),
    /// Weighted RLD value of a two-parameter channel family.
    MultiValue(MultiValueArgs),
    /// Write an SDP in SDPA sparse format.
    SdpExport(SdpExportArgs),
    /// Run every property suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sld,
    Rld,
}

impl From<Kind> for FisherKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Sld => FisherKind::Sld,
            Kind::Rld => FisherKind::Rld,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinState {
    /// diag(θ, 1 − θ)
    Bernoulli,
    /// (I + r(cos θ σx + sin θ σz))/2
    Bloch,
}

#[derive(Args)]
struct StateFisherArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, value_enum, conflicts_with = "state_file")]
    state: Option<BuiltinState>,
    /// Density matrix file; the parameter enters as exp(−iθG) ρ exp(iθG) with G = diag(0, 1, …).
    #[arg(long)]
    state_file: Option<PathBuf>,
    #[arg(long)]
    theta: f64,
    /// Bloch radius for the `bloch` family.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinChannel {
    Gadc,
    /// Qubit rotation exp(−iθσz).
    PhaseRotation,
}

#[derive(Args)]
struct ChannelSpec {
    #[arg(long, value_enum, conflicts_with = "kraus_file")]
    channel: Option<BuiltinChannel>,
    /// Kraus operator file; the parameter enters as K exp(−iθG) with G = diag(0, 1, …) on the input.
    #[arg(long)]
    kraus_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    /// Estimated GADC parameters, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "loss")]
    free: Vec<GadcParam>,
    /// Parameter value for file and rotation channels.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
}

#[derive(Args)]
struct ChannelFisherArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[command(flatten)]
    spec: ChannelSpec,
    #[arg(long, default_value_t = TraceConvention::Output)]
    convention: TraceConvention,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    kind: BoundKind,
    /// Fisher value, or `inf`.
    #[arg(long)]
    fisher: f64,
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long)]
    convention: Option<TraceConvention>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum GadcTarget {
    Loss,
    Noise,
    Phase,
    LossNoise,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Gamma,
    Noise,
}

#[derive(Args)]
struct GadcArgs {
    #[arg(long, value_enum)]
    target: GadcTarget,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = TraceConvention::Output)]
    convention: TraceConvention,
    /// Swept parameter; requires --grid.
    #[arg(long, value_enum, requires = "grid")]
    sweep: Option<Sweep>,
    /// start:stop:count
    #[arg(long, requires = "sweep")]
    grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    n: u64,
    /// Weight matrix entries, row major.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.25,0.25,0.75")]
    weight: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MultiValueArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.25,0.25,0.75")]
    weight: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, value_delimiter = ',', default_value = "loss,noise")]
    free: Vec<GadcParam>,
    #[arg(long, default_value_t = TraceConvention::Output)]
    convention: TraceConvention,
}

#[derive(Args)]
struct SdpExportArgs {
    #[arg(long)]
    kind: SdpKind,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    /// Probe weight p of √p|00⟩ + √(1−p)|11⟩ for the state programs.
    #[arg(long, default_value_t = 0.5)]
    probe: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.25,0.25,0.75")]
    weight: Vec<f64>,
    #[arg(long, default_value_t = TraceConvention::Output)]
    convention: TraceConvention,
    /// Directory for the .dat-s file.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A user input problem; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn is_usage_error(e: &anyhow::Error) -> bool {
    use qfisher::Error as E;
    e.chain().any(|c| {
        c.is::<Usage>()
            || matches!(
                c.downcast_ref::<E>(),
                Some(
                    E::InvalidArgument(_)
                        | E::InvalidWeight(_)
                        | E::OutOfDomain(_)
                        | E::Parse { .. }
                        | E::NotTracePreserving { .. }
                        | E::NotDensity(_)
                        | E::NotHermitian { .. }
                        | E::NotSquare { .. }
                        | E::DimensionMismatch(_)
                )
            )
    })
}

struct Out {
    digits: usize,
    text: String,
}

impl Out {
    fn line(&mut self, key: &str, value: impl AsRef<str>) {
        self.text.push_str(key);
        self.text.push(' ');
        self.text.push_str(value.as_ref());
        self.text.push('\n');
    }

    fn num(&mut self, key: &str, x: f64) {
        let s = sig(x, self.digits);
        self.line(key, s);
    }

    /// Finite values print as numbers; infinite ones as `inf` with the residual.
    fn fisher(&mut self, key: &str, v: FisherValue) {
        let s = match v.get() {
            Some(x) => sig(x, self.digits),
            None => format!("inf (support residual {})", sig(v.support_residual, self.digits)),
        };
        self.line(key, s);
    }
}

fn weight(entries: &[f64]) -> anyhow::Result<WeightMatrix> {
    let d = (entries.len() as f64).sqrt().round() as usize;
    if d * d != entries.len() {
        return Err(usage(format!("weight needs d² entries, got {}", entries.len())));
    }
    Ok(WeightMatrix::from_real(d, entries)?)
}

fn generator(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Whitespace-separated `re,im` entries, one row per line; matrices are
/// separated by blank lines and `#` starts a comment.
fn parse_matrices(text: &str) -> anyhow::Result<Vec<CMatrix>> {
    let mut mats = Vec::new();
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let mut flush = |rows: &mut Vec<Vec<C64>>| -> anyhow::Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            bail!(usage("ragged matrix rows"));
        }
        mats.push(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]));
        rows.clear();
        Ok(())
    };
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            flush(&mut rows)?;
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                let (re, im) = tok.split_once(',').unwrap_or((tok, "0"));
                Ok(C64::new(re.trim().parse()?, im.trim().parse()?))
            })
            .collect::<Result<Vec<_>, std::num::ParseFloatError>>()
            .map_err(|e| usage(format!("line {}: {e}", n + 1)))?;
        rows.push(row);
    }
    flush(&mut rows)?;
    if mats.is_empty() {
        return Err(usage("no matrices in file"));
    }
    Ok(mats)
}

fn read_matrices(path: &Path) -> anyhow::Result<Vec<CMatrix>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_matrices(&text).with_context(|| path.display().to_string())
}

fn state_family(args: &StateFisherArgs) -> anyhow::Result<StateFamily> {
    if let Some(path) = &args.state_file {
        let mats = read_matrices(path)?;
        let [rho] = mats.as_slice() else {
            return Err(usage("state file must hold exactly one matrix"));
        };
        qfisher::linalg::check_density(rho, 1e-9)?;
        let (rho, g) = (rho.clone(), generator(rho.nrows()));
        let d = rho.nrows();
        return Ok(StateFamily::new(d, 1, move |t| {
            let u = unitary_exp(&g, t.get(0));
            Ok(&u * &rho * u.adjoint())
        }));
    }
    let r = args.radius;
    Ok(match args.state.ok_or_else(|| usage("either --state or --state-file is required"))? {
        BuiltinState::Bernoulli => StateFamily::diagonal(DistributionFamily::bernoulli()),
        BuiltinState::Bloch => {
            if !(0.0..=1.0).contains(&r) {
                return Err(usage(format!("radius {r} not in [0, 1]")));
            }
            StateFamily::new(2, 1, move |t| {
                let (s, c) = t.get(0).sin_cos();
                let re = |x: f64| C64::new(x, 0.0);
                Ok(CMatrix::from_row_slice(2, 2, &[re((1.0 + r * s) / 2.0), re(r * c / 2.0), re(r * c / 2.0), re((1.0 - r * s) / 2.0)]))
            })
        }
    })
}

fn channel_family(spec: &ChannelSpec) -> anyhow::Result<(ChannelFamily, ParamPoint, String)> {
    if let Some(path) = &spec.kraus_file {
        let kraus = read_matrices(path)?;
        let (d_out, d_in) = kraus[0].shape();
        if kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(usage("Kraus operators differ in shape"));
        }
        // Validates trace preservation once up front.
        ChannelFamily::constant_kraus(kraus.clone(), 1)?;
        let g = generator(d_in);
        let chan = ChannelFamily::from_kraus(d_in, d_out, 1, move |t| {
            let u = unitary_exp(&g, t.get(0));
            Ok(kraus.iter().map(|k| k * &u).collect())
        });
        return Ok((chan, ParamPoint::scalar(spec.theta), format!("file {}", path.display())));
    }
    match spec.channel.ok_or_else(|| usage("either --channel or --kraus-file is required"))? {
        BuiltinChannel::Gadc => {
            let base = GadcParams::new(spec.gamma, spec.noise, spec.phase)?;
            let chan = gadc_channel(base, &spec.free)?;
            let names: Vec<&str> = spec.free.iter().map(|p| p.name()).collect();
            Ok((chan, gadc_point(&base, &spec.free), format!("gadc free={}", names.join(","))))
        }
        BuiltinChannel::PhaseRotation => {
            let z = CMatrix::from_diagonal(&qfisher::CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
            let chan = ChannelFamily::from_kraus(2, 2, 1, move |t| Ok(vec![unitary_exp(&z, t.get(0))]));
            Ok((chan, ParamPoint::scalar(spec.theta), "phase-rotation".into()))
        }
    }
}

fn state_fisher(args: &StateFisherArgs, out: &mut Out) -> anyhow::Result<()> {
    let fam = state_family(args)?;
    let v = fisher(&fam, &ParamPoint::scalar(args.theta), args.kind.into())?;
    out.line("kind", FisherKind::from(args.kind).to_string());
    out.num("theta", args.theta);
    out.fisher("fisher", v);
    out.num("support_residual", v.support_residual);
    Ok(())
}

fn channel_fisher(args: &ChannelFisherArgs, out: &mut Out) -> anyhow::Result<()> {
    let (chan, theta, label) = channel_family(&args.spec)?;
    if chan.num_params() != 1 {
        return Err(usage("channel-fisher needs exactly one free parameter; use multi-value"));
    }
    out.line("channel", label);
    out.line("kind", FisherKind::from(args.kind).to_string());
    match args.kind {
        Kind::Rld => {
            let v = rld_fisher_channel(&chan, &theta, args.convention)?;
            out.line("convention", args.convention.name());
            out.fisher("fisher", v);
            out.num("support_residual", v.support_residual);
        }
        Kind::Sld => {
            let cfg = ProbeConfig { seed: args.seed, ..ProbeConfig::default() };
            let res = sld_fisher_channel(&chan, &theta, &cfg)?;
            // The SLD search does not depend on the trace convention.
            out.line("convention", "none");
            out.fisher("fisher", res.value);
            out.line("note", "probe-search lower bound");
            out.num("seed", args.seed as f64);
        }
    }
    Ok(())
}

fn bound(args: &BoundArgs, out: &mut Out) -> anyhow::Result<()> {
    if args.fisher.is_nan() || args.fisher < 0.0 {
        return Err(usage(format!("fisher value {} must be nonnegative", args.fisher)));
    }
    let v = if args.fisher.is_infinite() { FisherValue::infinite(0.0) } else { FisherValue::finite(args.fisher, 0.0) };
    let mut report = crb(v, args.n, args.kind)?;
    if let Some(c) = args.convention {
        report = report.with_convention(c);
    }
    out.line("kind", args.kind.name());
    out.num("n", args.n as f64);
    out.num("bound", report.bound);
    out.line("status", format!("{:?}", report.status).to_lowercase());
    out.line("convention", report.convention.map_or("none", TraceConvention::name));
    Ok(())
}

fn gadc(args: &GadcArgs, out: &mut Out) -> anyhow::Result<()> {
    let base = GadcParams::new(args.gamma, args.noise, args.phase)?;
    let w = weight(&args.weight)?;
    let single = match args.target {
        GadcTarget::Loss => Some(GadcParam::Loss),
        GadcTarget::Noise => Some(GadcParam::Noise),
        GadcTarget::Phase => Some(GadcParam::Phase),
        GadcTarget::LossNoise => None,
    };
    if let (Some(sweep), Some(grid)) = (args.sweep, &args.grid) {
        let parts: Vec<&str> = grid.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(usage(format!("grid `{grid}` is not start:stop:count")));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| usage(format!("grid `{grid}`: {e}")));
        let count = n.parse::<usize>().map_err(|e| usage(format!("grid `{grid}`: {e}")))?;
        let cfg = CurveConfig {
            target: single.map_or(CurveTarget::LossNoise(w), CurveTarget::Single),
            sweep: match sweep {
                Sweep::Gamma => GadcParam::Loss,
                Sweep::Noise => GadcParam::Noise,
            },
            fixed: base,
            grid: linear_grid(parse(a)?, parse(b)?, count)?,
            convention: args.convention,
            n: args.n,
            probe: ProbeConfig { seed: args.seed, ..ProbeConfig::default() },
        };
        let csv = curve_csv(&gadc_curve(&cfg)?, out.digits);
        let header = format!("# convention {}\n", args.convention.name());
        match &args.output {
            Some(path) => {
                fs::write(path, format!("{header}{csv}")).with_context(|| path.display().to_string())?;
                out.line("wrote", path.display().to_string());
                out.line("convention", args.convention.name());
            }
            None => {
                out.text.push_str(&header);
                out.text.push_str(&csv);
            }
        }
        return Ok(());
    }
    out.line("convention", args.convention.name());
    match single {
        Some(p) => {
            let chan = gadc_channel(base, &[p])?;
            let v = rld_fisher_channel(&chan, &gadc_point(&base, &[p]), args.convention)?;
            out.fisher("rld", v);
            out.num("closed_form_reference", gadc_closed_form(&base, p));
        }
        None => {
            let free = [GadcParam::Loss, GadcParam::Noise];
            let chan = gadc_channel(base, &free)?;
            let v = rld_value_channel(&chan, &gadc_point(&base, &free), &w, args.convention)?;
            let (p, sld) = gadc_sld_objective_min(&base, &w)?;
            out.fisher("rld_value", v);
            out.num("sld_objective_min", sld);
            out.num("sld_probe_p", p);
        }
    }
    Ok(())
}

fn multi_value(args: &MultiValueArgs, out: &mut Out) -> anyhow::Result<()> {
    let w = weight(&args.weight)?;
    let base = GadcParams::new(args.gamma, args.noise, args.phase)?;
    if w.dim() != args.free.len() {
        return Err(usage(format!("weight is {0}x{0} but {1} parameters are free", w.dim(), args.free.len())));
    }
    let chan = gadc_channel(base, &args.free)?;
    let v = rld_value_channel(&chan, &gadc_point(&base, &args.free), &w, args.convention)?;
    out.line("convention", args.convention.name());
    out.fisher("rld_value", v);
    out.num("support_residual", v.support_residual);
    Ok(())
}

fn sdp_export(args: &SdpExportArgs, out: &mut Out) -> anyhow::Result<()> {
    let base = GadcParams::new(args.gamma, args.noise, args.phase)?;
    let w = weight(&args.weight)?;
    let multi = matches!(args.kind, SdpKind::RldValueState | SdpKind::RldValueChannel);
    let free: Vec<GadcParam> = if multi { vec![GadcParam::Loss, GadcParam::Noise] } else { vec![GadcParam::Loss] };
    let weight = multi.then_some(w);
    let input = match args.kind {
        SdpKind::SldState | SdpKind::RldState | SdpKind::RldValueState => {
            let probe = gadc_sld_probe(&base, args.probe)?;
            let z = CMatrix::from_diagonal(&qfisher::CVector::from_vec(vec![
                C64::new(args.probe.sqrt(), 0.0),
                C64::new((1.0 - args.probe).sqrt(), 0.0),
            ]));
            let z = qfisher::linalg::kron(&z, &identity(2));
            let grads = free.iter().map(|&p| &z * gadc_choi_derivative(&base, p) * &z).collect();
            SdpInput::State { rho: probe.output, grads, weight }
        }
        SdpKind::RldChannel | SdpKind::RldValueChannel => {
            let chan = gadc_channel(base, &free)?;
            let t = gadc_point(&base, &free);
            SdpInput::Channel { choi: chan.choi(&t)?, grads: gradient(&chan, &t)?, dims: (2, 2), conv: args.convention, weight }
        }
    };
    let prob = build(args.kind, &input)?;
    let path = args.output.join(file_name(&prob));
    fs::create_dir_all(&args.output).with_context(|| args.output.display().to_string())?;
    fs::write(&path, export_sdpa(&prob)).with_context(|| path.display().to_string())?;
    out.line("wrote", path.display().to_string());
    out.line("kind", args.kind.name());
    out.line("convention", if args.kind.is_channel() { args.convention.name() } else { "none" });
    out.num("variables", prob.num_vars as f64);
    Ok(())
}

fn verify(args: &VerifyArgs, out: &mut Out) -> anyhow::Result<bool> {
    let reports = run_all(args.seed);
    out.text.push_str(&report_table(&reports, out.digits.min(6)));
    Ok(reports.iter().all(|r| r.passed()))
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("QFISHER_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| usage(format!("QFISHER_THREADS=`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(usage("QFISHER_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow!(e))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<(String, bool)> {
    configure_threads()?;
    if cli.precision == 0 || cli.precision > 17 {
        return Err(usage("precision must be in 1..=17"));
    }
    let mut out = Out { digits: cli.precision, text: String::new() };
    let ok = match &cli.command {
        Command::StateFisher(a) => state_fisher(a, &mut out).map(|_| true),
        Command::ChannelFisher(a) => channel_fisher(a, &mut out).map(|_| true),
        Command::Bound(a) => bound(a, &mut out).map(|_| true),
        Command::Gadc(a) => gadc(a, &mut out).map(|_| true),
        Command::MultiValue(a) => multi_value(a, &mut out).map(|_| true),
        Command::SdpExport(a) => sdp_export(a, &mut out).map(|_| true),
        Command::Verify(a) => verify(a, &mut out),
    }?;
    Ok((out.text, ok))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: property verification failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qfisher::families::derivative;

    #[test]
    fn parses_kraus_text() {
        let text = "# amplitude damping, gamma = 0.36\n1,0 0,0\n0,0 0.8,0\n\n0,0 0.6,0\n0,0 0,0\n";
        let ks = parse_matrices(text).unwrap();
        assert_eq!(ks.len(), 2);
        assert_eq!(ks[0][(1, 1)], C64::new(0.8, 0.0));
        assert_eq!(ks[1][(0, 1)], C64::new(0.6, 0.0));
    }

    #[test]
    fn rejects_ragged_rows() {
        let e = parse_matrices("1,0 0,0\n0,0\n").unwrap_err();
        assert!(is_usage_error(&e));
    }

    #[test]
    fn derivative_of_file_channel_is_finite_difference() {
        let k = [identity(2)];
        let chan = ChannelFamily::from_kraus(2, 2, 1, move |t| {
            let u = unitary_exp(&generator(2), t.get(0));
            Ok(k.iter().map(|k| k * &u).collect())
        });
        assert!(chan.analytic_derivative(&ParamPoint::scalar(0.1), 0).is_none());
        let d = derivative(&chan, &ParamPoint::scalar(0.1), 0).unwrap();
        assert!(d.norm() > 0.1);
    }
}
