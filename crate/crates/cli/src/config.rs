//! Layered run configuration: built-in defaults, then an optional
//! plain-text config file, then command-line flags, with later sources
//! winning. Every getter records the final value, so after a command has
//! read its settings the accumulated map is the fully resolved
//! configuration: printed to standard output and written next to the
//! primary output as `<out>.config.txt`, in the same `key = value` format
//! the `--config` flag accepts. Replaying a run therefore needs nothing
//! but its dump.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};

use manifold_dcn::net::{parse_key_values, NetConfig};

/// Command failures split by exit code: usage problems exit 2, everything
/// else (I/O, numerical, failed checks) exits 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl From<manifold_dcn::Error> for CliError {
    fn from(e: manifold_dcn::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn failure(msg: impl Into<String>) -> CliError {
    CliError::Failure(msg.into())
}

pub struct RunConfig {
    command: &'static str,
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl RunConfig {
    /// Loads the optional config file and overlays the flags that were
    /// actually given on the command line.
    pub fn build(
        command: &'static str,
        file: Option<&Path>,
        flags: Vec<(&'static str, String)>,
    ) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
            map = parse_key_values(&text)
                .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        }
        // Replay dumps carry the command name; the subcommand actually
        // invoked wins, so drop the recorded one.
        map.remove("command");
        for (k, v) in flags {
            map.insert(k.to_string(), v);
        }
        Ok(RunConfig { command, map, used: BTreeSet::new() })
    }

    /// Records a derived setting (for example metadata read from a dataset)
    /// so it appears in the resolved dump.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.map.insert(key.to_string(), value.to_string());
        self.used.insert(key.to_string());
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    pub fn opt_string(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        match self.take(key) {
            Some(v) => v,
            None => {
                self.set(key, default);
                default.to_string()
            }
        }
    }

    pub fn required(&mut self, key: &str) -> CliResult<String> {
        self.take(key).ok_or_else(|| usage(format!("missing required --{key}")))
    }

    pub fn required_path(&mut self, key: &str) -> CliResult<PathBuf> {
        Ok(PathBuf::from(self.required(key)?))
    }

    pub fn usize(&mut self, key: &str, default: usize) -> CliResult<usize> {
        self.parsed(key, default, "a non-negative integer")
    }

    pub fn u64(&mut self, key: &str, default: u64) -> CliResult<u64> {
        self.parsed(key, default, "a non-negative integer")
    }

    pub fn f64(&mut self, key: &str, default: f64) -> CliResult<f64> {
        self.parsed(key, default, "a number")
    }

    fn parsed<T: std::str::FromStr + Display>(
        &mut self,
        key: &str,
        default: T,
        wants: &str,
    ) -> CliResult<T> {
        match self.take(key) {
            Some(v) => {
                v.parse().map_err(|_| usage(format!("--{key} must be {wants}, got '{v}'")))
            }
            None => {
                self.set(key, &default);
                Ok(default)
            }
        }
    }

    /// The resolved configuration in the format `--config` accepts.
    pub fn dump(&self) -> String {
        let mut text = format!("# resolved mdcn configuration\ncommand = {}\n", self.command);
        for key in &self.used {
            if let Some(v) = self.map.get(key) {
                text.push_str(&format!("{key} = {v}\n"));
            }
        }
        text
    }

    /// Prints the resolved configuration, warns about config-file keys this
    /// command never read, and writes the dump next to the primary output
    /// when there is one.
    pub fn finish(&self, out: Option<&Path>) -> CliResult<()> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                eprintln!("warning: ignoring unused configuration key '{key}'");
            }
        }
        print!("{}", self.dump());
        if let Some(out) = out {
            let path = PathBuf::from(format!("{}.config.txt", out.display()));
            std::fs::write(&path, self.dump())
                .map_err(|e| failure(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Architecture defaults a command supplies for keys the user left unset.
pub struct ArchDefaults {
    pub blocks: &'static str,
    pub kernel: usize,
    pub head: &'static str,
    pub templates: usize,
    pub classes: usize,
}

/// Builds the network configuration for data of the given manifold kind
/// and dimension. Explicit `manifold`/`dim` settings must agree with the
/// data; a mismatch is an error naming both sides rather than a silent
/// override.
pub fn resolve_net_config(
    cfg: &mut RunConfig,
    manifold: &str,
    dim: usize,
    defaults: &ArchDefaults,
) -> CliResult<NetConfig> {
    if let Some(m) = cfg.opt_string("manifold") {
        if m != manifold {
            return Err(failure(format!(
                "configuration says manifold '{m}' but the data is on '{manifold}'"
            )));
        }
    }
    if let Some(d) = cfg.opt_string("dim") {
        if d != dim.to_string() {
            return Err(failure(format!(
                "configuration says dim {d} but the data has dim {dim}"
            )));
        }
    }

    let mut m = BTreeMap::new();
    m.insert("manifold".to_string(), manifold.to_string());
    m.insert("dim".to_string(), dim.to_string());
    m.insert("blocks".to_string(), cfg.string("blocks", defaults.blocks));
    m.insert("kernel".to_string(), cfg.usize("kernel", defaults.kernel)?.to_string());
    m.insert("head".to_string(), cfg.string("head", defaults.head));
    m.insert("templates".to_string(), cfg.usize("templates", defaults.templates)?.to_string());
    m.insert("classes".to_string(), cfg.usize("classes", defaults.classes)?.to_string());
    let net = NetConfig::from_map(&m).map_err(|e| usage(e.to_string()))?;

    cfg.set("manifold", net.kind.name());
    cfg.set("dim", net.dim);
    let blocks = net
        .blocks
        .iter()
        .map(|b| format!("{},{},{}", b.c_in, b.c_mid, b.c_out))
        .collect::<Vec<_>>()
        .join("; ");
    cfg.set("blocks", blocks);
    cfg.set("kernel", net.kernel);
    cfg.set("head", net.head.name());
    cfg.set("templates", net.templates);
    cfg.set("classes", net.classes);
    Ok(net)
}
