// SPDX-License-Identifier: Apache-2.0
//! `bitcol` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bitflip::{
    greedy_search, ExternalOracle, FlipStrategy, ProxyOracle, SearchOptions, SignPolicy,
};
use crate::codec::{
    best_group_size, compress_layer, compression_ratio, csr_size, decompress_layer, sparsity_stats,
    value_payload_bits, zre_size, CompressedLayer, GroupLayout, GroupSize, ModeChoice,
};
use crate::error::{Error, Result};
use crate::mapper::{select_su, utilization_report, SpatialUnrolling, CATALOG};
use crate::model::{
    load_network, read_compressed, render_table, save_network, write_compressed, write_report_csv,
    Cell, Network, Report, WeightTensor,
};
use crate::perf::{compare, load_specs, preset, AcceleratorSpec, PRESETS};
use crate::sim::{simulate_layer, verify_layer, SimOptions};

#[derive(Parser, Debug)]
#[command(
    name = "bitcol",
    version,
    about = "Bit-column sparsity tools for int8 networks"
)]
pub struct Cli {
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Value, bit and bit-column sparsity per layer.
    Analyze(AnalyzeArgs),
    /// Compress weights into a BCSW container and report compression ratios.
    Compress(CompressArgs),
    /// Search a flip strategy and write the flipped network.
    Bitflip(BitflipArgs),
    /// Cycle counts on the column-serial array, optionally checking exactness.
    Simulate(SimulateArgs),
    /// Spatial-unrolling utilization per layer.
    Map(MapArgs),
    /// Energy and latency estimates against a baseline.
    Perf(PerfArgs),
    /// Run analyze, compress, map, simulate and perf into one directory.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupArg {
    Auto,
    Fixed(GroupSize),
}

impl FromStr for GroupArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(GroupArg::Auto);
        }
        let g: usize = s
            .parse()
            .map_err(|_| format!("expected a group size or `auto`, got `{s}`"))?;
        GroupSize::new(g)
            .map(GroupArg::Fixed)
            .map_err(|e| e.to_string())
    }
}

impl GroupArg {
    fn resolve(self, tensor: &WeightTensor) -> GroupSize {
        match self {
            GroupArg::Fixed(g) => g,
            GroupArg::Auto => best_group_size(tensor, &GroupSize::HARDWARE),
        }
    }
}

fn parse_group(s: &str) -> std::result::Result<GroupSize, String> {
    let g: usize = s
        .parse()
        .map_err(|_| format!("expected a group size, got `{s}`"))?;
    GroupSize::new(g).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Group sizes (comma separated); defaults to 1..64.
    #[arg(long, value_delimiter = ',', value_parser = parse_group)]
    pub group_size: Vec<GroupSize>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompressArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Group size or `auto` (best of 8, 16, 32 per layer).
    #[arg(long, default_value = "auto")]
    pub group_size: GroupArg,
    /// Container output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV output path for the ratio table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Decompress every layer again and compare bytes.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct BitflipArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the flipped network, strategy and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Shell command printing the metric on its last line; `{manifest}`
    /// is replaced by the flipped manifest path.
    #[arg(long, conflicts_with = "proxy_oracle")]
    pub oracle_cmd: Option<String>,
    /// Use the negative weight squared error as the metric.
    #[arg(long)]
    pub proxy_oracle: bool,
    /// Minimum acceptable metric.
    #[arg(long, allow_hyphen_values = true)]
    pub macc: f64,
    /// Initial group size for layers without a strategy entry.
    #[arg(long, default_value = "8", value_parser = parse_group)]
    pub group_size: GroupSize,
    /// Initial zero columns per layer.
    #[arg(long, default_value_t = 0)]
    pub zero_cols: u32,
    /// Initial strategy file (overrides --group-size/--zero-cols).
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Restrict the search to these layers.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    #[arg(long)]
    pub max_moves: Option<usize>,
    /// Never force the sign column to zero.
    #[arg(long)]
    pub preserve_sign: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Read compressed layers from this container instead of compressing.
    #[arg(long)]
    pub container: Option<PathBuf>,
    /// Group size or `auto` when compressing.
    #[arg(long, default_value = "auto")]
    pub group_size: GroupArg,
    /// Spatial unrolling (`SU1`..`SU7`); per-layer best when omitted.
    #[arg(long)]
    pub su: Option<String>,
    /// Charge a cycle for a non-zero sign column.
    #[arg(long)]
    pub count_sign_cycle: bool,
    /// Check the engine against the reference dot product on every group.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerfArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Preset names (comma separated); all presets when neither this nor
    /// --config is given.
    #[arg(long, value_delimiter = ',')]
    pub preset: Vec<String>,
    /// TOML file with extra `[[spec]]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spec the others are compared against; defaults to the first one.
    #[arg(long)]
    pub baseline: Option<String>,
    /// CSV output path for the comparison.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV output path for per-layer detail of every spec.
    #[arg(long)]
    pub detail: Option<PathBuf>,
    /// CSV output path for the energy breakdown of every spec.
    #[arg(long)]
    pub breakdown: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "auto")]
    pub group_size: GroupArg,
    #[arg(long, value_delimiter = ',')]
    pub preset: Vec<String>,
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub verify: bool,
}

/// How a command finished when it did not hit an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

impl Outcome {
    fn and(self, other: Outcome) -> Outcome {
        if self == Outcome::Success {
            other
        } else {
            self
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Analyze(a) => {
            let net = load_network(&a.manifest)?;
            let sizes = if a.group_size.is_empty() {
                GroupSize::ALL.to_vec()
            } else {
                a.group_size.clone()
            };
            emit(&analyze_table(&net, &sizes), a.out.as_deref())?;
            Ok(Outcome::Success)
        }
        Command::Compress(a) => {
            let net = load_network(&a.manifest)?;
            let (layers, table) = compress_network(&net, a.group_size);
            emit(&table, a.csv.as_deref())?;
            if let Some(out) = &a.out {
                write_compressed(out, &layers)?;
                println!("wrote {} layers to {}", layers.len(), out.display());
            }
            if a.verify {
                return roundtrip(&net, &layers);
            }
            Ok(Outcome::Success)
        }
        Command::Bitflip(a) => bitflip(a),
        Command::Simulate(a) => {
            let net = load_network(&a.manifest)?;
            let layers = match &a.container {
                Some(p) => read_compressed(p)?,
                None => compress_network(&net, a.group_size).0,
            };
            let su = a.su.as_deref().map(SpatialUnrolling::parse).transpose()?;
            let opts = SimOptions {
                count_sign_cycle: a.count_sign_cycle,
            };
            let (table, outcome) =
                simulate_table(&net, &layers, su, &opts, a.verify.then_some(cli.seed))?;
            emit(&table, a.out.as_deref())?;
            if outcome == Outcome::VerificationFailed {
                eprintln!(
                    "verification failed: engine output differs from the reference dot product"
                );
            }
            Ok(outcome)
        }
        Command::Map(a) => {
            let net = load_network(&a.manifest)?;
            emit(&map_table(&net), a.out.as_deref())?;
            Ok(Outcome::Success)
        }
        Command::Perf(a) => {
            let net = load_network(&a.manifest)?;
            let specs = gather_specs(&a.preset, a.config.as_deref())?;
            let baseline = a.baseline.clone().unwrap_or_else(|| specs[0].name.clone());
            let c = compare(&net, &specs, &baseline)?;
            emit(&c.table, a.out.as_deref())?;
            if let Some(p) = &a.detail {
                write_report_csv(&concat(c.reports.iter().map(|r| r.layer_table())), p)?;
            }
            if let Some(p) = &a.breakdown {
                write_report_csv(&concat(c.reports.iter().map(|r| r.energy_table())), p)?;
            }
            Ok(Outcome::Success)
        }
        Command::Report(a) => report(a, cli.seed),
    }
}

/// Prints the table and, when a path is given, writes it as CSV.
fn emit(report: &Report, csv: Option<&Path>) -> Result<()> {
    print!("{}", render_table(report));
    if let Some(p) = csv {
        write_report_csv(report, p)?;
    }
    Ok(())
}

fn concat(reports: impl IntoIterator<Item = Report>) -> Report {
    let mut it = reports.into_iter();
    let mut first = it.next().unwrap_or_default();
    for r in it {
        for row in r.rows() {
            first.push(row.clone());
        }
    }
    first
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn analyze_table(net: &Network, sizes: &[GroupSize]) -> Report {
    let mut r = Report::new([
        "network",
        "layer",
        "G",
        "value_sparsity",
        "bit_sparsity_twos",
        "bit_sparsity_sm",
        "column_sparsity_twos",
        "column_sparsity_sm",
        "sr_twos",
        "sr_sm",
    ]);
    for &g in sizes {
        let stats: Vec<_> = net
            .tensors
            .par_iter()
            .map(|t| sparsity_stats(t, g))
            .collect();
        // network row: element-weighted value/bit sparsity, column-weighted column sparsity
        let (mut n, mut cols) = (0.0, 0.0);
        let mut acc = [0.0f64; 5];
        for (t, s) in net.tensors.iter().zip(&stats) {
            r.push(vec![
                net.name().into(),
                t.name.as_str().into(),
                g.get().into(),
                s.value.into(),
                s.bit_twos.into(),
                s.bit_sm.into(),
                s.column_twos.into(),
                s.column_sm.into(),
                s.ratio_twos.into(),
                s.ratio_sm.into(),
            ]);
            let tn = t.len() as f64;
            let tc = GroupLayout::new(&t.shape, g).group_count() as f64;
            n += tn;
            cols += tc;
            acc[0] += s.value * tn;
            acc[1] += s.bit_twos * tn;
            acc[2] += s.bit_sm * tn;
            acc[3] += s.column_twos * tc;
            acc[4] += s.column_sm * tc;
        }
        let (value, bt, bs) = (ratio(acc[0], n), ratio(acc[1], n), ratio(acc[2], n));
        r.push(vec![
            net.name().into(),
            "ALL".into(),
            g.get().into(),
            value.into(),
            bt.into(),
            bs.into(),
            ratio(acc[3], cols).into(),
            ratio(acc[4], cols).into(),
            ratio(bt, value).into(),
            ratio(bs, value).into(),
        ]);
    }
    r
}

/// Compresses every layer (auto mode: dense when BCS would expand it)
/// and tabulates BCS against the value-sparsity codecs.
pub fn compress_network(net: &Network, group: GroupArg) -> (Vec<CompressedLayer>, Report) {
    let results: Vec<_> = net
        .tensors
        .par_iter()
        .map(|t| {
            let g = group.resolve(t);
            let c = compress_layer(t, g, ModeChoice::Auto);
            let bits = 8.0 * t.len() as f64;
            let row = t.shape.in_channels * t.shape.kernel_positions();
            let zre = bits / zre_size(&t.values) as f64;
            let csr = bits / csr_size(&t.values, row) as f64;
            let value_ideal = ratio(bits, value_payload_bits(&t.values) as f64);
            let bcs_ideal = compress_layer(t, g, ModeChoice::Bcs).layer;
            let row: Vec<Cell> = vec![
                net.name().into(),
                t.name.as_str().into(),
                g.get().into(),
                c.layer.mode().to_string().into(),
                (c.layer.group_count as u64).into(),
                c.clamped.into(),
                compression_ratio(&c.layer, true).into(),
                compression_ratio(&bcs_ideal, false).into(),
                zre.into(),
                value_ideal.into(),
                csr.into(),
                value_ideal.into(),
            ];
            (c.layer, row)
        })
        .collect();
    let mut table = Report::new([
        "network",
        "layer",
        "G",
        "mode",
        "groups",
        "clamped",
        "bcs_cr",
        "bcs_cr_ideal",
        "zre_cr",
        "zre_cr_ideal",
        "csr_cr",
        "csr_cr_ideal",
    ]);
    let mut layers = Vec::with_capacity(results.len());
    let (mut orig, mut packed) = (0u64, 0u64);
    for (l, row) in results {
        orig += 8 * l.element_count as u64;
        packed += l.size_bits(true);
        table.push(row);
        layers.push(l);
    }
    let mut total: Vec<Cell> = vec![net.name().into(), "ALL".into()];
    total.extend((0..4).map(|_| Cell::from("-")));
    total.push(ratio(orig as f64, packed as f64).into());
    total.extend((0..5).map(|_| Cell::from("-")));
    table.push(total);
    (layers, table)
}

fn roundtrip(net: &Network, layers: &[CompressedLayer]) -> Result<Outcome> {
    let mut bad = 0;
    for (t, l) in net.tensors.iter().zip(layers) {
        let back = decompress_layer(l, &t.shape)?;
        let want: Vec<i8> = t.values.iter().map(|&v| v.max(-127)).collect();
        if back != want {
            eprintln!("layer {}: round trip differs", t.name);
            bad += 1;
        }
    }
    println!("round trip: {} layers, {bad} mismatching", layers.len());
    Ok(if bad == 0 {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

fn find_layer<'a>(layers: &'a [CompressedLayer], name: &str) -> Result<&'a CompressedLayer> {
    layers
        .iter()
        .find(|l| l.name == name)
        .ok_or_else(|| Error::ShapeMismatch(format!("container has no layer `{name}`")))
}

pub fn simulate_table(
    net: &Network,
    layers: &[CompressedLayer],
    su: Option<SpatialUnrolling>,
    opts: &SimOptions,
    verify_seed: Option<u64>,
) -> Result<(Report, Outcome)> {
    let mut header = vec![
        "network",
        "layer",
        "su",
        "G",
        "mode",
        "groups",
        "steps",
        "repeats",
        "cycles",
        "barrier_loss",
        "mean_group_cycles",
        "dense_cycles",
        "speedup",
    ];
    if verify_seed.is_some() {
        header.push("mismatches");
    }
    let mut table = Report::new(header);
    let mut outcome = Outcome::Success;
    let (mut cycles, mut dense, mut loss) = (0u64, 0u64, 0u64);
    for t in &net.tensors {
        let l = find_layer(layers, &t.name)?;
        let su = su.unwrap_or_else(|| select_su(&t.shape));
        let c = simulate_layer(l, &t.shape, &su, opts)?;
        let d = c.steps * c.repeats * 8;
        let mut row: Vec<Cell> = vec![
            net.name().into(),
            t.name.as_str().into(),
            su.to_string().into(),
            l.group_size.get().into(),
            l.mode().to_string().into(),
            (l.group_count as u64).into(),
            c.steps.into(),
            c.repeats.into(),
            c.total_cycles.into(),
            c.barrier_loss.into(),
            c.mean_group_cycles().into(),
            d.into(),
            ratio(d as f64, c.total_cycles as f64).into(),
        ];
        if let Some(seed) = verify_seed {
            let v = verify_layer(l, &t.shape, seed)?;
            if v.mismatches > 0 {
                outcome = Outcome::VerificationFailed;
            }
            row.push(v.mismatches.into());
        }
        cycles += c.total_cycles;
        dense += d;
        loss += c.barrier_loss;
        table.push(row);
    }
    let mut total: Vec<Cell> = vec![net.name().into(), "ALL".into()];
    total.extend((0..6).map(|_| Cell::from("-")));
    total.push(cycles.into());
    total.push(loss.into());
    total.push("-".into());
    total.push(dense.into());
    total.push(ratio(dense as f64, cycles as f64).into());
    if verify_seed.is_some() {
        total.push("-".into());
    }
    table.push(total);
    Ok((table, outcome))
}

/// Utilization of every layer on every unrolling, with per-unrolling
/// minimum and mean rows at the bottom.
pub fn map_table(net: &Network) -> Report {
    let mut header: Vec<String> = ["network", "layer", "kind", "K", "C", "OX"]
        .map(String::from)
        .to_vec();
    header.extend(CATALOG.iter().map(|su| format!("util_{su}")));
    header.extend(["chosen", "utilization", "macs_per_cycle"].map(String::from));
    let mut r = Report::new(header);
    let reports: Vec<_> = net
        .tensors
        .iter()
        .map(|t| utilization_report(&t.shape))
        .collect();
    for (t, u) in net.tensors.iter().zip(&reports) {
        let mut row: Vec<Cell> = vec![
            net.name().into(),
            t.name.as_str().into(),
            t.shape.kind.as_str().into(),
            t.shape.out_channels.into(),
            t.shape.in_channels.into(),
            t.shape.out_x.into(),
        ];
        row.extend(
            u.per_su
                .iter()
                .map(|(_, v)| v.map_or(Cell::from("-"), Cell::from)),
        );
        row.push(u.chosen.to_string().into());
        row.push(u.utilization.into());
        row.push(u.macs_per_cycle.into());
        r.push(row);
    }
    for (label, min) in [("MIN", true), ("MEAN", false)] {
        let mut row: Vec<Cell> = vec![net.name().into(), label.into()];
        row.extend((0..4).map(|_| Cell::from("-")));
        for i in 0..CATALOG.len() {
            // an unrolling that cannot run a layer counts as 0 there
            let vals: Vec<f64> = reports
                .iter()
                .map(|u| u.per_su[i].1.unwrap_or(0.0))
                .collect();
            let v = if vals.is_empty() {
                0.0
            } else if min {
                vals.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            row.push(v.into());
        }
        let chosen: Vec<f64> = reports.iter().map(|u| u.utilization).collect();
        row.push("per-layer".into());
        row.push(if chosen.is_empty() {
            Cell::from(0.0)
        } else if min {
            chosen.iter().copied().fold(f64::INFINITY, f64::min).into()
        } else {
            (chosen.iter().sum::<f64>() / chosen.len() as f64).into()
        });
        row.push("-".into());
        r.push(row);
    }
    r
}

fn gather_specs(presets: &[String], config: Option<&Path>) -> Result<Vec<AcceleratorSpec>> {
    let mut specs: Vec<AcceleratorSpec> = if presets.is_empty() && config.is_none() {
        PRESETS.iter().map(|p| preset(p)).collect::<Result<_>>()?
    } else {
        presets.iter().map(|p| preset(p)).collect::<Result<_>>()?
    };
    if let Some(p) = config {
        specs.extend(load_specs(p)?);
    }
    if specs.is_empty() {
        return Err(Error::Config("no accelerator specs selected".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Config(format!("spec `{}` given twice", s.name)));
        }
    }
    Ok(specs)
}

fn bitflip(a: &BitflipArgs) -> Result<Outcome> {
    let net = load_network(&a.manifest)?;
    let initial = match &a.strategy {
        Some(p) => FlipStrategy::load(p)?,
        None => {
            let mut s = FlipStrategy::initial(&net, a.group_size);
            for l in &mut s.layers {
                l.z = a.zero_cols;
            }
            s
        }
    };
    let opts = SearchOptions {
        layers: a.layers.clone(),
        max_moves: a.max_moves,
        sign: if a.preserve_sign {
            SignPolicy::Preserve
        } else {
            SignPolicy::Optimize
        },
        parallel: a.oracle_cmd.is_none(),
    };
    let outcome = match (&a.oracle_cmd, a.proxy_oracle) {
        (Some(cmd), _) => greedy_search(
            &net,
            &initial,
            a.macc,
            &ExternalOracle::new(cmd.clone()),
            &opts,
        )?,
        (None, true) => greedy_search(
            &net,
            &initial,
            a.macc,
            &ProxyOracle::new(net.clone()),
            &opts,
        )?,
        (None, false) => {
            return Err(Error::Config(
                "bitflip needs --oracle-cmd or --proxy-oracle".into(),
            ));
        }
    };
    let (flipped, results) = crate::bitflip::apply_strategy(&net, &outcome.strategy, opts.sign)?;
    let manifest = save_network(&a.out, &flipped)?;
    outcome.strategy.save(a.out.join("strategy.txt"))?;

    let mut moves = Report::new(["step", "layer", "G", "z", "metric"]);
    for (i, m) in outcome.moves.iter().enumerate() {
        moves.push(vec![
            (i + 1).into(),
            m.layer.as_str().into(),
            m.group_size.get().into(),
            m.z.into(),
            m.metric.into(),
        ]);
    }
    write_report_csv(&moves, a.out.join("moves.csv"))?;

    let mut table = Report::new([
        "network",
        "layer",
        "G",
        "z",
        "cr",
        "squared_error",
        "mse",
        "max_abs_error",
    ]);
    for (l, r) in outcome.strategy.layers.iter().zip(&results) {
        table.push(vec![
            net.name().into(),
            l.layer.as_str().into(),
            l.group_size.get().into(),
            l.z.into(),
            r.compression_ratio().into(),
            r.squared_error.into(),
            r.mse().into(),
            r.max_abs_error.into(),
        ]);
    }
    emit(&table, Some(&a.out.join("flip.csv")))?;
    println!(
        "{} moves, {} evaluations; flipped network at {}",
        outcome.moves.len(),
        outcome.evaluations,
        manifest.display()
    );
    Ok(Outcome::Success)
}

fn report(a: &ReportArgs, seed: u64) -> Result<Outcome> {
    let net = load_network(&a.manifest)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let write = |name: &str, r: &Report| write_report_csv(r, a.out.join(name));

    write("analyze.csv", &analyze_table(&net, &GroupSize::ALL))?;
    let (layers, ctable) = compress_network(&net, a.group_size);
    write("compress.csv", &ctable)?;
    write_compressed(a.out.join("weights.bcsw"), &layers)?;
    write("map.csv", &map_table(&net))?;
    let simulated = simulate_table(
        &net,
        &layers,
        None,
        &SimOptions::default(),
        a.verify.then_some(seed),
    );
    let mut outcome = Outcome::Success;
    match simulated {
        Ok((t, o)) => {
            write("simulate.csv", &t)?;
            outcome = outcome.and(o);
        }
        // grouping that does not fit the array (e.g. forced G=4) only skips this table
        Err(e @ Error::GroupingMismatch { .. }) => eprintln!("simulate skipped: {e}"),
        Err(e) => return Err(e),
    }
    let specs = gather_specs(&a.preset, None)?;
    let baseline = a.baseline.clone().unwrap_or_else(|| specs[0].name.clone());
    let c = compare(&net, &specs, &baseline)?;
    write("perf.csv", &c.table)?;
    write(
        "perf_layers.csv",
        &concat(c.reports.iter().map(|r| r.layer_table())),
    )?;
    write(
        "energy.csv",
        &concat(c.reports.iter().map(|r| r.energy_table())),
    )?;
    print!("{}", render_table(&c.table));
    println!("reports written to {}", a.out.display());
    Ok(outcome)
}
