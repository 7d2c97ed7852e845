//! Run configuration: flat `key = value` files, named presets, flag
//! overrides and fail-fast validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use red_lwsgs::denoise::DenoiserSpec;
use red_lwsgs::par::Execution;

pub const SEED_ENV: &str = "RED_LWSGS_SEED";

/// Every key a config file or flag may set.
pub const KEYS: &[&str] = &[
    "preset",
    "task",
    "input",
    "size",
    "channels",
    "data_seed",
    "kernel_size",
    "kernel_std",
    "mask_fraction",
    "sr_factor",
    "snr_db",
    "sampler",
    "beta",
    "rho2",
    "rho1_2",
    "rho2_2",
    "gamma",
    "gamma_scale",
    "n_mc",
    "n_bi",
    "thin",
    "seed",
    "chains",
    "execution",
    "denoiser",
    "nu_start",
    "nu_end",
    "probes",
    "box_lo",
    "box_hi",
    "lambda",
    "out",
];

pub type KeyValues = BTreeMap<String, String>;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str, origin: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{origin}:{}: expected key = value", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            bail!("{origin}:{}: unknown key {k:?}", i + 1);
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            bail!("{origin}:{}: duplicate key {k:?}", i + 1);
        }
    }
    Ok(out)
}

pub fn load_key_values(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_key_values(&text, &path.display().to_string())
}

/// Hyperparameters of the DRUNet experiments. They were tuned for that
/// denoiser and images in `[0, 1]`; classical denoisers usually need a
/// larger `beta`.
pub fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "ffhq-deblur" => &[
            ("task", "deblur"),
            ("beta", "8.0e-2"),
            ("rho2", "6e-8"),
            ("n_mc", "5000"),
            ("n_bi", "2000"),
            ("gamma_scale", "0.99"),
        ],
        "ffhq-inpaint" => &[
            ("task", "inpaint"),
            ("beta", "1.25e-1"),
            ("rho2", "1.5"),
            ("n_mc", "10000"),
            ("n_bi", "4500"),
            ("gamma_scale", "0.99"),
        ],
        "ffhq-superres" => &[
            ("task", "superres"),
            ("beta", "1.0"),
            ("rho1_2", "2e-1"),
            ("rho2_2", "1"),
            ("n_mc", "12500"),
            ("n_bi", "3500"),
            ("gamma_scale", "0.8"),
        ],
        "imagenet-deblur" => &[
            ("task", "deblur"),
            ("beta", "4.89e-3"),
            ("rho2", "6e-8"),
            ("n_mc", "5000"),
            ("n_bi", "2000"),
            ("gamma_scale", "0.99"),
        ],
        "imagenet-inpaint" => &[
            ("task", "inpaint"),
            ("beta", "1.167e-1"),
            ("rho2", "1.5"),
            ("n_mc", "10000"),
            ("n_bi", "4500"),
            ("gamma_scale", "0.99"),
        ],
        "imagenet-superres" => &[
            ("task", "superres"),
            ("beta", "4.966e-2"),
            ("rho1_2", "2e-1"),
            ("rho2_2", "1"),
            ("n_mc", "12500"),
            ("n_bi", "3500"),
            ("gamma_scale", "0.8"),
        ],
        _ => return None,
    })
}

pub const PRESETS: &[&str] = &[
    "ffhq-deblur",
    "ffhq-inpaint",
    "ffhq-superres",
    "imagenet-deblur",
    "imagenet-inpaint",
    "imagenet-superres",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Deblur,
    Inpaint,
    Superres,
}

impl Task {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "deblur" => Task::Deblur,
            "inpaint" => Task::Inpaint,
            "superres" => Task::Superres,
            _ => bail!("task must be deblur, inpaint or superres, got {s:?}"),
        })
    }

    /// Defaults for `[0, 1]` images with the built-in DCT denoiser.
    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Task::Deblur => &[
                ("kernel_size", "25"),
                ("kernel_std", "1.6"),
                ("sampler", "lwsgs"),
                ("beta", "1000"),
                ("rho2", "1e-3"),
            ],
            Task::Inpaint => &[
                ("mask_fraction", "0.8"),
                ("sampler", "lwsgs"),
                ("beta", "100"),
                ("rho2", "1e-3"),
            ],
            Task::Superres => &[
                ("kernel_size", "7"),
                ("kernel_std", "1.6"),
                ("sr_factor", "4"),
                ("sampler", "sr-split"),
                ("beta", "100"),
                ("rho1_2", "1e-4"),
                ("rho2_2", "1e-2"),
            ],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Deblur => "deblur",
            Task::Inpaint => "inpaint",
            Task::Superres => "superres",
        })
    }
}

const COMMON_DEFAULTS: &[(&str, &str)] = &[
    ("size", "64"),
    ("channels", "1"),
    ("data_seed", "1"),
    ("snr_db", "30"),
    ("kernel_size", "9"),
    ("kernel_std", "1.6"),
    ("mask_fraction", "0.5"),
    ("sr_factor", "4"),
    ("gamma_scale", "0.99"),
    ("n_mc", "3000"),
    ("n_bi", "1000"),
    ("thin", "1"),
    ("seed", "0"),
    ("chains", "1"),
    ("execution", "parallel"),
    ("denoiser", "dct:0.3:0.05"),
    ("probes", "auto"),
    ("box_lo", "-1"),
    ("box_hi", "2"),
    ("out", "run"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Lwsgs,
    RedUla,
    PnpUla,
    SrSplit,
}

impl SamplerKind {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "lwsgs" => SamplerKind::Lwsgs,
            "red-ula" => SamplerKind::RedUla,
            "pnp-ula" => SamplerKind::PnpUla,
            "sr-split" => SamplerKind::SrSplit,
            _ => bail!("sampler must be lwsgs, red-ula, pnp-ula or sr-split, got {s:?}"),
        })
    }
}

/// Which pixels get their chains traced.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeSpec {
    /// All pixels up to 1024, else a seeded subset of 256.
    Auto,
    All,
    Subset(usize),
    List(Vec<usize>),
}

impl ProbeSpec {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => ProbeSpec::Auto,
            "all" => ProbeSpec::All,
            _ => {
                if let Some(k) = s.strip_prefix("subset:") {
                    ProbeSpec::Subset(k.parse().context("probes subset size")?)
                } else {
                    let list = s
                        .split(',')
                        .map(|v| v.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .with_context(|| {
                            format!("probes must be auto, all, subset:<k> or a list, got {s:?}")
                        })?;
                    ProbeSpec::List(list)
                }
            }
        })
    }
}

/// Fully resolved and validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub input: Option<PathBuf>,
    pub size: usize,
    pub channels: usize,
    pub data_seed: u64,
    pub kernel_size: usize,
    pub kernel_std: f64,
    pub mask_fraction: f64,
    pub sr_factor: usize,
    pub snr_db: f64,
    pub sampler: SamplerKind,
    pub beta: f64,
    pub rho2: Option<f64>,
    pub rho1_2: Option<f64>,
    pub rho2_2: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_scale: f64,
    pub n_mc: usize,
    pub n_bi: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub execution: Execution,
    pub denoiser: DenoiserSpec,
    pub nu: Option<(f64, f64)>,
    pub probes: ProbeSpec,
    pub box_lo: f64,
    pub box_hi: f64,
    pub lambda: Option<f64>,
    /// The merged key-value view, recorded in the manifest.
    pub resolved: KeyValues,
}

/// Layers in increasing priority.
pub struct Layers {
    pub file: KeyValues,
    pub env_seed: Option<String>,
    pub flags: KeyValues,
}

impl Layers {
    pub fn gather(config: Option<&Path>, flags: KeyValues) -> Result<Self> {
        let file = match config {
            Some(p) => load_key_values(p)?,
            None => KeyValues::new(),
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        Ok(Layers {
            file,
            env_seed,
            flags,
        })
    }

    /// Task defaults < preset < file < `RED_LWSGS_SEED` < flags.
    pub fn merge(&self) -> Result<KeyValues> {
        let mut given = KeyValues::new();
        let preset_name = self
            .flags
            .get("preset")
            .or_else(|| self.file.get("preset"))
            .cloned();
        if let Some(name) = &preset_name {
            let p = preset(name)
                .ok_or_else(|| anyhow!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))?;
            for (k, v) in p {
                given.insert(k.to_string(), v.to_string());
            }
        }
        given.extend(self.file.clone());
        if let Some(s) = &self.env_seed {
            given.insert("seed".into(), s.clone());
        }
        given.extend(self.flags.clone());

        let task = Task::parse(given.get("task").map(String::as_str).unwrap_or("deblur"))?;
        let mut merged = KeyValues::new();
        for (k, v) in COMMON_DEFAULTS.iter().chain(task.defaults()) {
            merged.insert(k.to_string(), v.to_string());
        }
        merged.insert("task".into(), task.to_string());
        merged.extend(given);
        Ok(merged)
    }
}

struct Reader<'a>(&'a KeyValues);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .raw(key)
            .ok_or_else(|| anyhow!("missing value for {key}"))?;
        v.parse::<T>()
            .map_err(|_| anyhow!("{key}: cannot parse {v:?}"))
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.req(key).map(Some),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{key} must be a positive finite number, got {v}");
    }
    Ok(v)
}

impl RunConfig {
    pub fn from_key_values(kv: KeyValues) -> Result<Self> {
        let r = Reader(&kv);
        let task = Task::parse(&r.req::<String>("task")?)?;
        let sampler = SamplerKind::parse(&r.req::<String>("sampler")?)?;
        let execution = match r.req::<String>("execution")?.as_str() {
            "parallel" => Execution::Parallel,
            "sequential" => Execution::Sequential,
            other => bail!("execution must be parallel or sequential, got {other:?}"),
        };
        let denoiser = DenoiserSpec::parse(&r.req::<String>("denoiser")?)?;
        let nu = match (r.opt::<f64>("nu_start")?, r.opt::<f64>("nu_end")?) {
            (None, None) => None,
            (Some(a), Some(b)) => Some((positive("nu_start", a)?, positive("nu_end", b)?)),
            _ => bail!("nu_start and nu_end must be given together"),
        };
        let cfg = RunConfig {
            task,
            input: r.opt::<String>("input")?.map(PathBuf::from),
            size: r.req("size")?,
            channels: r.req("channels")?,
            data_seed: r.req("data_seed")?,
            kernel_size: r.req("kernel_size")?,
            kernel_std: r.req("kernel_std")?,
            mask_fraction: r.req("mask_fraction")?,
            sr_factor: r.req("sr_factor")?,
            snr_db: r.req("snr_db")?,
            sampler,
            beta: r.req("beta")?,
            rho2: r.opt("rho2")?,
            rho1_2: r.opt("rho1_2")?,
            rho2_2: r.opt("rho2_2")?,
            gamma: r.opt("gamma")?,
            gamma_scale: r.req("gamma_scale")?,
            n_mc: r.req("n_mc")?,
            n_bi: r.req("n_bi")?,
            thin: r.req("thin")?,
            seed: r.req("seed")?,
            chains: r.req("chains")?,
            execution,
            denoiser,
            nu,
            probes: ProbeSpec::parse(&r.req::<String>("probes")?)?,
            box_lo: r.req("box_lo")?,
            box_hi: r.req("box_hi")?,
            lambda: r.opt("lambda")?,
            resolved: kv.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.input.is_none() && self.size == 0 {
            bail!("size must be positive");
        }
        if !matches!(self.channels, 1 | 3) {
            bail!("channels must be 1 or 3, got {}", self.channels);
        }
        if let Some(p) = &self.input {
            if !p.is_file() {
                bail!("input image {} not found", p.display());
            }
        }
        if self.kernel_size.is_multiple_of(2) {
            bail!("kernel_size must be odd, got {}", self.kernel_size);
        }
        positive("kernel_std", self.kernel_std)?;
        if !(0.0..1.0).contains(&self.mask_fraction) {
            bail!(
                "mask_fraction must lie in [0, 1), got {}",
                self.mask_fraction
            );
        }
        if self.sr_factor == 0 {
            bail!("sr_factor must be positive");
        }
        if !self.snr_db.is_finite() {
            bail!("snr_db must be finite");
        }
        positive("beta", self.beta)?;
        positive("gamma_scale", self.gamma_scale)?;
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        for (k, v) in [
            ("rho2", self.rho2),
            ("rho1_2", self.rho1_2),
            ("rho2_2", self.rho2_2),
            ("lambda", self.lambda),
        ] {
            if let Some(v) = v {
                positive(k, v)?;
            }
        }
        match (self.task, self.sampler) {
            (Task::Superres, SamplerKind::Lwsgs) => {
                bail!("lwsgs needs a diagonalizable operator; use sr-split for superres")
            }
            (Task::Superres, _) => {}
            (_, SamplerKind::SrSplit) => bail!("sr-split applies to the superres task only"),
            _ => {}
        }
        match self.sampler {
            SamplerKind::Lwsgs if self.rho2.is_none() => bail!("lwsgs needs rho2"),
            SamplerKind::SrSplit if self.rho1_2.is_none() || self.rho2_2.is_none() => {
                bail!("sr-split needs rho1_2 and rho2_2")
            }
            _ => {}
        }
        if self.n_mc == 0 || self.n_bi >= self.n_mc {
            bail!(
                "need 0 <= n_bi < n_mc, got n_bi = {}, n_mc = {}",
                self.n_bi,
                self.n_mc
            );
        }
        if self.thin == 0 || self.chains == 0 {
            bail!("thin and chains must be positive");
        }
        if !(self.box_lo < self.box_hi) {
            bail!("empty box [{}, {}]", self.box_lo, self.box_hi);
        }
        if let ProbeSpec::Subset(0) = self.probes {
            bail!("probe subset must be non-empty");
        }
        Ok(())
    }

    /// Coupling that sets the default step size.
    pub fn step_coupling(&self) -> Option<f64> {
        match self.sampler {
            SamplerKind::SrSplit => self.rho2_2,
            _ => self.rho2,
        }
    }
}
