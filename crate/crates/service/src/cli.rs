//! Command-line entry points.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eloran_core::coverage::{
    compare_fixture, compare_sites, read_fixture, read_simulated, simulate_accuracy_map, simulate_point,
    write_comparison_csv, ConductivitySource, JitterMode, PreparedScenario, Scenario,
};
use eloran_core::geodata::{
    classify_conductivity, downsample, load_land_cover, write_conductivity_grid, DownsampleRule, GeoPoint,
    NodataPolicy, TerrainClassTable,
};
use eloran_core::jitter::{read_tor_log, write_jitter_report};
use serde::de::DeserializeOwned;

use crate::api::{router, AppState};
use crate::error::ServiceError;
use crate::report::{build_jitter_report, JitterOptions, DEFAULT_BANDWIDTH_GRID};
use crate::store::ScenarioStore;

#[derive(Debug, Parser)]
#[command(name = "eloran", version, about = "eLoran coverage simulation and transmitter jitter estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a scenario's region and write the 95% accuracy map.
    Simulate(SimulateArgs),
    /// Estimate transmitter jitters from a TOR log.
    EstimateJitter(EstimateJitterArgs),
    /// Convert a land-cover class raster into a ground-constants raster.
    ConvertLandcover(ConvertArgs),
    /// Improvement of proposed over existing simulations against measurements.
    Compare(CompareArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write the South Korea demo data set.
    DemoData(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario TOML; relative file references resolve against its directory.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Map output; `.geojson`/`.json` writes GeoJSON, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Additional GeoJSON output.
    #[arg(long)]
    pub geojson: Option<PathBuf>,
    /// Override the conductivity source (`land_cover` or `itu_baseline`).
    #[arg(long)]
    pub conductivity: Option<ConductivitySource>,
    /// Override the jitter: `estimated` or a value in metres for every station.
    #[arg(long)]
    pub jitter: Option<String>,
    /// Site list CSV (`site,lat,lon`) to evaluate individually.
    #[arg(long, requires = "sites_out")]
    pub sites: Option<PathBuf>,
    /// Per-site output (`site,quantity,value`).
    #[arg(long, requires = "sites")]
    pub sites_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateJitterArgs {
    /// TOR log CSV (`timestamp,site_id,station_id,gri,tor_us,snr_db`).
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Bandwidth search grid `lo:hi:n` in seconds, log-spaced.
    #[arg(long, default_value = DEFAULT_BANDWIDTH_GRID)]
    pub bandwidth_grid: String,
    #[arg(long)]
    pub outlier_window: Option<usize>,
    #[arg(long)]
    pub outlier_k: Option<f64>,
    #[arg(long)]
    pub integration_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Class table CSV; the built-in table when absent.
    #[arg(long)]
    pub class_table: Option<PathBuf>,
    /// Target cell size in metres.
    #[arg(long)]
    pub downsample_m: Option<f64>,
    /// `mode_class` or `median_conductivity`.
    #[arg(long, default_value = "mode_class", value_parser = snake_enum::<DownsampleRule>)]
    pub rule: DownsampleRule,
    /// `seawater`, `default_land` or `error`.
    #[arg(long, default_value = "default_land", value_parser = snake_enum::<NodataPolicy>)]
    pub nodata_policy: NodataPolicy,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Fixture CSV (`site,quantity,measured,existing_6m,existing_4m,proposed`).
    #[arg(long)]
    pub fixture: PathBuf,
    /// Simulated values (`site,quantity,value`) used as the proposed column.
    #[arg(long)]
    pub simulated: Option<PathBuf>,
    /// Comparison CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "ELORAN_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "ELORAN_DATA_DIR", default_value = "data")]
    pub data: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "demo")]
    pub out: PathBuf,
}

fn snake_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| ServiceError::file(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ServiceError::file(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| ServiceError::file(path, e))
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String, ServiceError> {
    String::from_utf8(bytes).map_err(|_| ServiceError::file(path, "not UTF-8"))
}

fn is_geojson(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("geojson") || e.eq_ignore_ascii_case("json"))
}

pub fn run(cli: Cli) -> Result<(), ServiceError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::EstimateJitter(a) => estimate_jitter(a),
        Command::ConvertLandcover(a) => convert_landcover(a),
        Command::Compare(a) => compare(a),
        Command::Serve(a) => serve(a),
        Command::DemoData(a) => {
            let written = eloran_core::demo::write_demo_data(&a.out).map_err(|e| ServiceError::file(&a.out, e))?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn parse_jitter(s: &str) -> Result<JitterMode, ServiceError> {
    if s == "estimated" {
        return Ok(JitterMode::Estimated);
    }
    match s.parse::<f64>() {
        Ok(j) if j.is_finite() && j >= 0.0 => Ok(JitterMode::Fixed(j)),
        _ => Err(ServiceError::BadRequest(format!(
            "--jitter must be `estimated` or a non-negative number of metres, got `{s}`"
        ))),
    }
}

#[derive(serde::Deserialize)]
struct SiteRow {
    site: String,
    lat: f64,
    lon: f64,
}

fn read_sites(path: &Path) -> Result<Vec<(String, GeoPoint)>, ServiceError> {
    let bytes = read(path)?;
    let mut out = Vec::new();
    for (i, r) in csv::Reader::from_reader(bytes.as_slice()).deserialize::<SiteRow>().enumerate() {
        let r = r.map_err(|e| ServiceError::file(path, format!("row {}: {e}", i + 2)))?;
        let p = GeoPoint::new(r.lat, r.lon)?;
        out.push((r.site, p));
    }
    Ok(out)
}

fn simulate(a: SimulateArgs) -> Result<(), ServiceError> {
    let text = utf8(&a.scenario, read(&a.scenario)?)?;
    let mut scenario = Scenario::from_toml_str(&text)?;
    if let Some(source) = a.conductivity {
        scenario.conductivity.source = source;
        scenario.validate()?;
    }
    if let Some(j) = &a.jitter {
        scenario.model.jitter_mode = parse_jitter(j)?;
    }
    let base = a.scenario.parent().unwrap_or(Path::new("."));
    let prepared = PreparedScenario::prepare(scenario, base)?;
    let grid = simulate_accuracy_map(&prepared, None, None)?;

    if is_geojson(&a.out) {
        write(&a.out, grid.to_geojson().to_string().as_bytes())?;
    } else {
        write(&a.out, grid.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.geojson {
        write(p, grid.to_geojson().to_string().as_bytes())?;
    }

    if let (Some(sites), Some(out)) = (&a.sites, &a.sites_out) {
        let mut csv = String::from("site,quantity,value\n");
        for (name, p) in read_sites(sites)? {
            let r = simulate_point(&prepared, &p);
            if let Some(acc) = r.accuracy_95_m {
                let _ = writeln!(csv, "{name},accuracy_95_m,{acc:.4}");
            }
            for s in &r.stations {
                if let Some(f) = s.field_dbuvm {
                    let _ = writeln!(csv, "{name},ss_{},{f:.4}", s.station_id);
                }
            }
        }
        write(out, csv.as_bytes())?;
    }

    let (stats, available) = grid.summary();
    let mut line = format!("cells={} available={:.1}%", grid.len(), available * 100.0);
    if let Some((min, median, max)) = stats {
        let _ = write!(line, " min={min:.2}m median={median:.2}m max={max:.2}m");
    }
    println!("{line}");
    Ok(())
}

fn estimate_jitter(a: EstimateJitterArgs) -> Result<(), ServiceError> {
    let defaults = JitterOptions::default();
    let opts = JitterOptions {
        bandwidth_grid: a.bandwidth_grid,
        outlier_window: a.outlier_window.unwrap_or(defaults.outlier_window),
        outlier_k: a.outlier_k.unwrap_or(defaults.outlier_k),
        integration_time_s: a.integration_time.unwrap_or(defaults.integration_time_s),
    };
    let bytes = read(&a.log)?;
    let rows = read_tor_log(bytes.as_slice())?;
    let report = build_jitter_report(&rows, &opts)?;
    write(&a.out, write_jitter_report(&report).as_bytes())?;
    for (site, station, msg) in &report.errors {
        tracing::warn!(%site, %station, "{msg}");
    }
    for avg in &report.averages {
        println!("{} mean_jitter={:.2}m sites={}", avg.station_id, avg.mean_jitter_m, avg.n_sites);
    }
    Ok(())
}

fn convert_landcover(a: ConvertArgs) -> Result<(), ServiceError> {
    let table = match &a.class_table {
        Some(p) => TerrainClassTable::from_csv(read(p)?.as_slice())?,
        None => TerrainClassTable::default(),
    };
    let lc = load_land_cover(read(&a.input)?.as_slice())?;
    let mut grid = classify_conductivity(&lc, &table, a.nodata_policy)?;
    if let Some(m) = a.downsample_m {
        grid = downsample(&grid, m, a.rule)?;
    }
    write(&a.out, write_conductivity_grid(&grid).as_bytes())?;
    println!("{} x {} cells", grid.frame.n_cols, grid.frame.n_rows);
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), ServiceError> {
    let rows = read_fixture(read(&a.fixture)?.as_slice())?;
    let report = match &a.simulated {
        Some(p) => compare_sites(&rows, &read_simulated(read(p)?.as_slice())?),
        None => compare_fixture(&rows),
    };
    let csv = write_comparison_csv(&report);
    match &a.out {
        Some(p) => {
            write(p, csv.as_bytes())?;
            for s in &report.summaries {
                println!(
                    "{}: n={} improvement {:.2}%..{:.2}%",
                    s.baseline.as_str(),
                    s.n,
                    s.min_pct,
                    s.max_pct
                );
            }
        }
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| ServiceError::Internal(e.to_string()))?,
    }
    for r in &report.rejected {
        tracing::warn!("rejected: {r}");
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), ServiceError> {
    let store = ScenarioStore::open(&a.data)?;
    let app = router(AppState::new(store));
    let addr = SocketAddr::new(a.bind, a.port);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| ServiceError::Internal(format!("bind {addr}: {e}")))?;
        tracing::info!(%addr, data = %a.data.display(), "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))
    })
}
