//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use uxprop_core::campaign::RouteMode;
use uxprop_core::scene::write_scene;
use uxprop_core::synth::{manhattan_grid, ManhattanConfig};

use crate::config::{load_config, parse_assignment, RunConfig, TxSpec, SEED_ENV};
use crate::error::{io_error, CliError};
use crate::pipeline::{cmd_campaign, cmd_chanmap, cmd_losmap, cmd_route, load_scene_input};
use crate::service::{serve, AppState};

#[derive(Debug, Parser)]
#[command(name = "uxprop", version, about = "Air-to-ground coverage maps from building footprints")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set params.los_beta=2.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// GeoJSON building footprints.
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Scene coordinates are metric; skip projection.
    #[arg(long, global = true)]
    pub metric: bool,
    #[arg(long, global = true)]
    pub height_attr: Option<String>,
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Transmitter as `x,y,altitude_m` in scene meters.
    #[arg(long, global = true, value_name = "X,Y,ALT")]
    pub tx: Option<String>,
    #[arg(long, global = true)]
    pub resolution_m: Option<f64>,
    #[arg(long, global = true)]
    pub radius_m: Option<f64>,
    #[arg(long, global = true)]
    pub ue_height_m: Option<f64>,
    #[arg(long, global = true)]
    pub carrier_hz: Option<f64>,
    #[arg(long, global = true)]
    pub max_cells: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// LOS/NLOS/BUILDING raster around one transmitter.
    Losmap,
    /// Path loss, shadowing, fast fading and total attenuation layers.
    Chanmap {
        #[arg(long)]
        no_fading: bool,
    },
    /// Sample a route (CSV of x,y or GeoJSON LineString) over a channel map.
    Route {
        #[arg(long)]
        route: Option<PathBuf>,
        #[arg(long)]
        step_m: Option<f64>,
        #[arg(long = "eirp-dbm", value_delimiter = ',')]
        eirps_dbm: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        sensitivity_dbm: Option<f64>,
        #[arg(long)]
        no_fading: bool,
    },
    /// Random transmitters and routes over the whole scene, per altitude.
    Campaign {
        #[arg(long, value_delimiter = ',')]
        heights_m: Vec<f64>,
        #[arg(long)]
        n_tx: Option<usize>,
        #[arg(long)]
        routes_per_tx: Option<usize>,
        #[arg(long, value_enum)]
        route_mode: Option<RouteModeArg>,
        #[arg(long)]
        step_m: Option<f64>,
    },
    /// Print the effective channel parameters.
    Params,
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write a synthetic grid city as metric GeoJSON.
    SynthCity {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        blocks: usize,
        #[arg(long, default_value_t = 40.0)]
        block_m: f64,
        #[arg(long, default_value_t = 15.0)]
        street_m: f64,
        #[arg(long, default_value_t = 1)]
        city_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum RouteModeArg {
    Chord,
    Streets,
}

impl From<RouteModeArg> for RouteMode {
    fn from(m: RouteModeArg) -> Self {
        match m {
            RouteModeArg::Chord => RouteMode::Chord,
            RouteModeArg::Streets => RouteMode::Streets,
        }
    }
}

fn parse_tx(s: &str) -> Result<TxSpec, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config("tx", format!("`{s}` is not x,y,altitude_m")))?;
    match v[..] {
        [x, y, altitude_m] => Ok(TxSpec { x, y, altitude_m }),
        _ => Err(CliError::config("tx", format!("`{s}` is not x,y,altitude_m"))),
    }
}

fn json_of<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializes")
}

/// Flag values as configuration overrides, applied after `--set`.
fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>, CliError> {
    let mut o: Vec<(String, Value)> = cli.set.iter().map(|s| parse_assignment(s)).collect::<Result<_, _>>()?;
    let mut put = |k: &str, v: Value| o.push((k.to_string(), v));
    if let Some(s) = cli.seed {
        put("seed", s.into());
    }
    if let Some(p) = &cli.scene {
        put("scene", json_of(p));
    }
    if cli.metric {
        put("metric", true.into());
    }
    if let Some(h) = &cli.height_attr {
        put("height_attr", h.clone().into());
    }
    if let Some(d) = &cli.output_dir {
        put("output_dir", json_of(d));
    }
    if let Some(t) = &cli.tx {
        put("tx", json_of(&parse_tx(t)?));
    }
    if let Some(v) = cli.resolution_m {
        put("resolution_m", v.into());
    }
    if let Some(v) = cli.radius_m {
        put("coverage_radius_m", v.into());
    }
    if let Some(v) = cli.ue_height_m {
        put("ue_height_m", v.into());
    }
    if let Some(v) = cli.carrier_hz {
        put("carrier_hz", v.into());
    }
    if let Some(v) = cli.max_cells {
        put("max_cells", v.into());
    }
    match &cli.command {
        Command::Chanmap { no_fading: true } => put("no_fading", true.into()),
        Command::Route {
            route,
            step_m,
            eirps_dbm,
            sensitivity_dbm,
            no_fading,
        } => {
            if let Some(r) = route {
                put("route", json_of(r));
            }
            if let Some(s) = step_m {
                put("step_m", (*s).into());
            }
            if !eirps_dbm.is_empty() {
                put("eirps_dbm", json_of(eirps_dbm));
            }
            if let Some(s) = sensitivity_dbm {
                put("sensitivity_dbm", (*s).into());
            }
            if *no_fading {
                put("no_fading", true.into());
            }
        }
        Command::Campaign {
            heights_m,
            n_tx,
            routes_per_tx,
            route_mode,
            step_m,
        } => {
            if !heights_m.is_empty() {
                put("campaign.heights_m", json_of(heights_m));
            }
            if let Some(n) = n_tx {
                put("campaign.n_tx", (*n).into());
            }
            if let Some(n) = routes_per_tx {
                put("campaign.routes_per_tx", (*n).into());
            }
            if let Some(m) = route_mode {
                put("campaign.route_mode", json_of(&RouteMode::from(*m)));
            }
            if let Some(s) = step_m {
                put("step_m", (*s).into());
            }
        }
        _ => {}
    }
    Ok(o)
}

pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let env_seed = std::env::var(SEED_ENV).ok();
    load_config(cli.config.as_deref(), env_seed.as_deref(), &overrides(cli)?)
}

fn print_json<T: Serialize>(v: &T) {
    use std::io::Write;
    // A closed pipe downstream is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializes"));
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Command::SynthCity {
        out,
        blocks,
        block_m,
        street_m,
        city_seed,
    } = &cli.command
    {
        let cfg = ManhattanConfig {
            blocks_x: *blocks,
            blocks_y: *blocks,
            block_m: *block_m,
            street_m: *street_m,
            seed: *city_seed,
            ..ManhattanConfig::default()
        };
        let scene = manhattan_grid(&cfg);
        write_scene(&scene, out, "height").map_err(io_error(out.display()))?;
        print_json(&json!({ "buildings": scene.buildings().len(), "period_m": cfg.period_m(), "bounds": scene.bounds() }));
        return Ok(());
    }
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Params => {
            let p = cfg.effective_params();
            print_json(&json!({ "params": p, "params_digest": p.digest() }));
        }
        Command::Losmap => print_json(&cmd_losmap(&cfg, &load_scene_input(&cfg)?)?),
        Command::Chanmap { .. } => print_json(&cmd_chanmap(&cfg, &load_scene_input(&cfg)?)?),
        Command::Route { .. } => print_json(&cmd_route(&cfg, &load_scene_input(&cfg)?)?),
        Command::Campaign { .. } => {
            let out = cmd_campaign(&cfg, &load_scene_input(&cfg)?)?;
            print_json(&json!({ "config_digest": out.config_digest, "output_dir": cfg.output_dir, "cdf_files": out.cdf_files }));
        }
        Command::Serve { addr } => {
            let scene = load_scene_input(&cfg)?;
            let state = Arc::new(AppState::new(cfg, scene));
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(io_error("runtime"))?;
            rt.block_on(serve(addr, state))?;
        }
        Command::SynthCity { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Parse, run and report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.body() }));
            if e.status() >= 500 {
                1
            } else {
                2
            }
        }
    }
}
