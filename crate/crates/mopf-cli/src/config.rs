//! Run configuration: a sectioned key-value file with command-line and
//! environment overrides. Precedence: flags > `MOPF_THREADS` > file >
//! defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse { line: usize, msg: String },
    Missing(&'static str),
    Invalid { key: String, msg: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Parse { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::Missing(k) => write!(f, "config value `{k}` is required"),
            ConfigError::Invalid { key, msg } => write!(f, "config `{key}`: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Season to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Season {
    Summer,
    Winter,
}

impl Season {
    pub fn parse(s: &str) -> Result<Season, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "winter" => Ok(Season::Winter),
            other => Err(ConfigError::Invalid {
                key: "season".into(),
                msg: format!("unknown season `{other}` (summer|winter)"),
            }),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: PathBuf,
    pub demand_summer: PathBuf,
    pub demand_winter: PathBuf,
    pub emissions_summer: PathBuf,
    pub emissions_winter: PathBuf,
    pub trips: PathBuf,
    pub season: Season,
    pub ev_enabled: bool,
    pub v2g_enabled: bool,
    pub horizon: usize,
    pub battery_kwh: f64,
    pub charger_kw: f64,
    pub consumption_kwh_per_mile: f64,
    pub efficiency: f64,
    pub gasoline_g_per_mile: Option<f64>,
    pub sweep_points: usize,
    pub threads: usize,
    pub tol_rel: f64,
    pub tol_feas: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: PathBuf::new(),
            demand_summer: PathBuf::new(),
            demand_winter: PathBuf::new(),
            emissions_summer: PathBuf::new(),
            emissions_winter: PathBuf::new(),
            trips: PathBuf::new(),
            season: Season::Summer,
            ev_enabled: true,
            v2g_enabled: true,
            horizon: 24,
            battery_kwh: 32.0,
            charger_kw: 6.6,
            consumption_kwh_per_mile: 0.3,
            efficiency: 0.9,
            gasoline_g_per_mile: None,
            sweep_points: 10,
            threads: std::thread::available_parallelism()
                .map(|n| n.get().min(8))
                .unwrap_or(4),
            tol_rel: 1e-7,
            tol_feas: 1e-8,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Parses the sectioned key-value format:
///
/// ```text
/// [paths]
/// case = fixtures/case5.m
/// # comment
/// [solver]
/// sweep_points = 10
/// ```
pub fn parse_config_text(text: &str) -> Result<HashMap<String, String>, ConfigError> {
    let mut section = String::new();
    let mut map = HashMap::new();
    for (ln0, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Parse {
                line: ln0 + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        map.insert(full, value.to_string());
    }
    Ok(map)
}

fn get_path(map: &HashMap<String, String>, key: &str, base: &Path) -> Option<PathBuf> {
    map.get(key).map(|v| {
        let p = PathBuf::from(v);
        if p.is_relative() {
            base.join(p)
        } else {
            p
        }
    })
}

impl RunConfig {
    /// Loads a config file and applies it over the defaults. Relative paths
    /// are resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let map = parse_config_text(&text)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut cfg = RunConfig::default();

        for (key, slot) in [
            ("paths.case", &mut cfg.case),
            ("paths.demand_summer", &mut cfg.demand_summer),
            ("paths.demand_winter", &mut cfg.demand_winter),
            ("paths.emissions_summer", &mut cfg.emissions_summer),
            ("paths.emissions_winter", &mut cfg.emissions_winter),
            ("paths.trips", &mut cfg.trips),
        ] {
            if let Some(p) = get_path(&map, key, &base) {
                *slot = p;
            }
        }
        if let Some(p) = get_path(&map, "paths.out_dir", &base) {
            cfg.out_dir = p;
        }

        let parse_f64 = |key: &str, target: &mut f64| -> Result<(), ConfigError> {
            if let Some(v) = map.get(key) {
                *target = v.parse().map_err(|_| ConfigError::Invalid {
                    key: key.to_string(),
                    msg: format!("`{v}` is not a number"),
                })?;
            }
            Ok(())
        };
        let parse_bool = |key: &str, target: &mut bool| -> Result<(), ConfigError> {
            if let Some(v) = map.get(key) {
                *target = match v.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(ConfigError::Invalid {
                            key: key.to_string(),
                            msg: format!("`{other}` is not a boolean"),
                        })
                    }
                };
            }
            Ok(())
        };
        let parse_usize = |key: &str, target: &mut usize| -> Result<(), ConfigError> {
            if let Some(v) = map.get(key) {
                *target = v.parse().map_err(|_| ConfigError::Invalid {
                    key: key.to_string(),
                    msg: format!("`{v}` is not an integer"),
                })?;
            }
            Ok(())
        };

        if let Some(v) = map.get("scenario.season") {
            cfg.season = Season::parse(v)?;
        }
        parse_bool("scenario.ev", &mut cfg.ev_enabled)?;
        parse_bool("scenario.v2g", &mut cfg.v2g_enabled)?;
        parse_usize("scenario.horizon", &mut cfg.horizon)?;
        parse_f64("scenario.battery_kwh", &mut cfg.battery_kwh)?;
        parse_f64("scenario.charger_kw", &mut cfg.charger_kw)?;
        parse_f64(
            "scenario.consumption_kwh_per_mile",
            &mut cfg.consumption_kwh_per_mile,
        )?;
        parse_f64("scenario.efficiency", &mut cfg.efficiency)?;
        if map.contains_key("scenario.gasoline_g_per_mile") {
            let mut v = 0.0;
            parse_f64("scenario.gasoline_g_per_mile", &mut v)?;
            cfg.gasoline_g_per_mile = Some(v);
        }
        parse_usize("solver.sweep_points", &mut cfg.sweep_points)?;
        parse_usize("solver.threads", &mut cfg.threads)?;
        parse_f64("solver.tol_rel", &mut cfg.tol_rel)?;
        parse_f64("solver.tol_feas", &mut cfg.tol_feas)?;

        Ok(cfg)
    }

    /// Applies the `MOPF_THREADS` environment override.
    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("MOPF_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n > 0 {
                    self.threads = n;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("paths.case", &self.case),
            ("paths.demand_summer", &self.demand_summer),
            ("paths.demand_winter", &self.demand_winter),
            ("paths.emissions_summer", &self.emissions_summer),
            ("paths.emissions_winter", &self.emissions_winter),
            ("paths.trips", &self.trips),
        ] {
            if p.as_os_str().is_empty() {
                return Err(ConfigError::Missing(match name {
                    "paths.case" => "paths.case",
                    "paths.demand_summer" => "paths.demand_summer",
                    "paths.demand_winter" => "paths.demand_winter",
                    "paths.emissions_summer" => "paths.emissions_summer",
                    "paths.emissions_winter" => "paths.emissions_winter",
                    _ => "paths.trips",
                }));
            }
            if !p.exists() {
                return Err(ConfigError::Invalid {
                    key: name.to_string(),
                    msg: format!("file `{}` does not exist", p.display()),
                });
            }
        }
        if self.sweep_points < 2 {
            return Err(ConfigError::Invalid {
                key: "solver.sweep_points".into(),
                msg: "at least 2 points required".into(),
            });
        }
        if !(self.tol_rel > 0.0 && self.tol_feas > 0.0) {
            return Err(ConfigError::Invalid {
                key: "solver.tol_rel".into(),
                msg: "tolerances must be positive".into(),
            });
        }
        Ok(())
    }

    /// Stable echo of every effective value, embedded in run manifests.
    pub fn manifest_echo(&self) -> String {
        format!(
            "case = {}\ndemand_summer = {}\ndemand_winter = {}\nemissions_summer = {}\n\
             emissions_winter = {}\ntrips = {}\nseason = {:?}\nev = {}\nv2g = {}\nhorizon = {}\n\
             battery_kwh = {}\ncharger_kw = {}\nconsumption_kwh_per_mile = {}\nefficiency = {}\n\
             gasoline_g_per_mile = {:?}\nsweep_points = {}\nthreads = {}\ntol_rel = {:e}\ntol_feas = {:e}\n",
            self.case.display(),
            self.demand_summer.display(),
            self.demand_winter.display(),
            self.emissions_summer.display(),
            self.emissions_winter.display(),
            self.trips.display(),
            self.season,
            self.ev_enabled,
            self.v2g_enabled,
            self.horizon,
            self.battery_kwh,
            self.charger_kw,
            self.consumption_kwh_per_mile,
            self.efficiency,
            self.gasoline_g_per_mile,
            self.sweep_points,
            self.threads,
            self.tol_rel,
            self.tol_feas,
        )
    }
}
