//! Training configuration from a `key=value` file and command-line flags.

use std::path::Path;

use clap::Args;
use maxplus_core::model::Arch;
use maxplus_core::TrainConfig;

use super::CliError;
use crate::io::IoError;

/// Training flags. Each one overrides the same key in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Plain-text `key=value` file; keys match the long flag names.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// maxplus-mlp, softmax-linear, maxout-linear(G), cnn-maxplus or cnn-plain.
    #[arg(long)]
    pub arch: Option<String>,
    /// Linear filters J of the max-plus head.
    #[arg(long)]
    pub units: Option<usize>,
    /// Connection dropout ratio in [0, 1).
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr0: Option<f64>,
    /// Learning-rate decay factor in (0, 1].
    #[arg(long)]
    pub decay: Option<f64>,
    /// Optimizer steps between decays.
    #[arg(long)]
    pub decay_every: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Half-width of the uniform max-plus weight initialization.
    #[arg(long)]
    pub wm_init: Option<f64>,
    /// Width of the CNN dense layer under the head (J of cnn-maxplus).
    #[arg(long)]
    pub cnn_units: Option<usize>,
}

const KEYS: &[&str] = &[
    "arch",
    "units",
    "dropout",
    "seed",
    "epochs",
    "batch",
    "lr0",
    "decay",
    "decay-every",
    "momentum",
    "wm-init",
    "cnn-units",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

/// Sets one field of `cfg` from its key name.
pub fn apply_entry(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "arch" => cfg.arch = value.parse::<Arch>().map_err(|e| CliError::Usage(e.to_string()))?,
        "units" => cfg.units = parse(key, value)?,
        "dropout" => cfg.dropout_ratio = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "epochs" => cfg.epochs = parse(key, value)?,
        "batch" => cfg.batch_size = parse(key, value)?,
        "lr0" => cfg.lr0 = parse(key, value)?,
        "decay" => cfg.decay_factor = parse(key, value)?,
        "decay-every" => cfg.decay_every_steps = parse(key, value)?,
        "momentum" => cfg.momentum = parse(key, value)?,
        "wm-init" => cfg.wm_init = parse(key, value)?,
        "cnn-units" => cfg.cnn.units = parse(key, value)?,
        other => return Err(CliError::Usage(format!("unknown config key `{other}` (known: {})", KEYS.join(", ")))),
    }
    Ok(())
}

/// `key=value` pairs of a config file. Blank lines and `#` comments are
/// ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::from(IoError::File { path: path.to_path_buf(), source }))?;
    parse_config_text(&text)
}

impl TrainArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = TrainConfig::default();
        if let Some(p) = &self.config {
            for (k, v) in read_config(p)? {
                apply_entry(&mut cfg, &k, &v)?;
            }
        }
        let flags: [(&str, Option<String>); 12] = [
            ("arch", self.arch.clone()),
            ("units", self.units.map(|v| v.to_string())),
            ("dropout", self.dropout.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("lr0", self.lr0.map(|v| v.to_string())),
            ("decay", self.decay.map(|v| v.to_string())),
            ("decay-every", self.decay_every.map(|v| v.to_string())),
            ("momentum", self.momentum.map(|v| v.to_string())),
            ("wm-init", self.wm_init.map(|v| v.to_string())),
            ("cnn-units", self.cnn_units.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                apply_entry(&mut cfg, k, &v)?;
            }
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

/// The effective configuration as `key=value` pairs, in a fixed order.
pub fn config_entries(cfg: &TrainConfig) -> Vec<(String, String)> {
    [
        ("arch", cfg.arch.to_string()),
        ("units", cfg.units.to_string()),
        ("dropout", cfg.dropout_ratio.to_string()),
        ("seed", cfg.seed.to_string()),
        ("epochs", cfg.epochs.to_string()),
        ("batch", cfg.batch_size.to_string()),
        ("lr0", cfg.lr0.to_string()),
        ("decay", cfg.decay_factor.to_string()),
        ("decay-every", cfg.decay_every_steps.to_string()),
        ("momentum", cfg.momentum.to_string()),
        ("wm-init", cfg.wm_init.to_string()),
        ("cnn-units", cfg.cnn.units.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# grid cell\nunits = 64\ndropout=0.25\nseed=9\n").unwrap();
        let args = TrainArgs { config: Some(path), seed: Some(3), ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.units, 64);
        assert_eq!(cfg.dropout_ratio, 0.25);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn entries_round_trip() {
        let cfg = TrainConfig { arch: Arch::MaxoutLinear { group: 3 }, lr0: 0.125, ..Default::default() };
        let mut back = TrainConfig::default();
        for (k, v) in config_entries(&cfg) {
            apply_entry(&mut back, &k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        assert!(matches!(parse_config_text("units"), Err(CliError::Usage(_))));
        let mut cfg = TrainConfig::default();
        assert!(matches!(apply_entry(&mut cfg, "colour", "red"), Err(CliError::Usage(_))));
        assert!(matches!(apply_entry(&mut cfg, "units", "many"), Err(CliError::Usage(_))));
        let args = TrainArgs { dropout: Some(1.0), ..Default::default() };
        assert!(matches!(args.resolve(), Err(CliError::Usage(_))));
    }
}
