//! Line-oriented dataset files.
//!
//! ```text
//! cf-assign-dataset v1
//! split=test
//! seed=7
//! size=2
//! n_aps=5
//! ...                       (remaining scenario keys)
//! sample 0
//! users x0 y0 x1 y1 ...
//! gains g00 g01 ... g0N     (one line per user)
//! ...
//! end
//! ```
//!
//! Floats are written in their shortest round-tripping form, so a
//! save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Area, ChannelRealization, Dataset, Point, Scenario, Split};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::textio::{join_floats, LineReader};

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &str = "cf-assign-dataset";

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(dataset, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&mut LineReader::new(BufReader::new(file), path))
}

fn write_dataset(ds: &Dataset, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{MAGIC} v{DATASET_VERSION}")?;
    writeln!(w, "split={}", ds.split.as_str())?;
    writeln!(w, "seed={}", ds.seed)?;
    writeln!(w, "size={}", ds.samples.len())?;
    write!(w, "{}", ds.scenario.to_kv())?;
    for (i, s) in ds.samples.iter().enumerate() {
        writeln!(w, "sample {i}")?;
        let flat: Vec<f64> = s.user_positions.iter().flat_map(|p| [p.x, p.y]).collect();
        writeln!(w, "users {}", join_floats(&flat))?;
        for k in 0..s.gains.rows() {
            writeln!(w, "gains {}", join_floats(s.gains.row(k)))?;
        }
    }
    writeln!(w, "end")
}

fn read_dataset<R: BufRead>(lines: &mut LineReader<R>) -> Result<Dataset> {
    let version = lines.expect_header(MAGIC)?;
    if version != DATASET_VERSION {
        return Err(Error::Version {
            path: lines.path().to_path_buf(),
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let split: Split = {
        let v = lines.expect_kv("split")?;
        v.parse().map_err(|e: String| lines.schema(e))?
    };
    let seed: u64 = lines.expect_kv_parse("seed")?;
    let size: usize = lines.expect_kv_parse("size")?;
    let mut kv = Vec::new();
    for key in SCENARIO_KEYS {
        kv.push((key.to_string(), lines.expect_kv(key)?));
    }
    let scenario = Scenario::from_kv(kv.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| lines.schema(e.to_string()))?;
    let (k_users, n_aps) = (scenario.n_users, scenario.n_aps);
    let mut samples = Vec::with_capacity(size);
    for i in 0..size {
        lines.expect_exact(&format!("sample {i}"))?;
        let users = lines.expect_line()?;
        let Some(users) = users.strip_prefix("users ") else {
            return Err(lines.schema("expected `users` record"));
        };
        let flat = lines.parse_floats(users, 2 * k_users)?;
        let user_positions = flat.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        let mut data = Vec::with_capacity(k_users * n_aps);
        for _ in 0..k_users {
            let row = lines.expect_line()?;
            let Some(row) = row.strip_prefix("gains ") else {
                return Err(lines.schema("expected `gains` record"));
            };
            data.extend(lines.parse_floats(row, n_aps)?);
        }
        let gains = Matrix::from_vec(k_users, n_aps, data)?;
        samples.push(ChannelRealization { gains, user_positions });
    }
    lines.expect_exact("end")?;
    Ok(Dataset { scenario, samples, seed, split })
}

const SCENARIO_KEYS: [&str; 9] = [
    "n_aps",
    "n_users",
    "area",
    "ap_positions",
    "min_serving_aps",
    "max_served_users",
    "noise_power",
    "gain_scale",
    "rician_variance",
];

impl Scenario {
    /// `key=value` lines, one per field; the scenario config file format.
    pub fn to_kv(&self) -> String {
        let aps: Vec<String> = self
            .ap_positions
            .iter()
            .map(|p| format!("{:?},{:?}", p.x, p.y))
            .collect();
        let values = [
            self.n_aps.to_string(),
            self.n_users.to_string(),
            format!("{:?},{:?}", self.area.width, self.area.height),
            aps.join(";"),
            self.min_serving_aps.to_string(),
            self.max_served_users.to_string(),
            format!("{:?}", self.noise_power),
            format!("{:?}", self.gain_scale),
            format!("{:?}", self.rician_variance),
        ];
        SCENARIO_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Parses `key=value` pairs; every field is required and validated.
    pub fn from_kv<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Scenario> {
        let mut map = std::collections::BTreeMap::new();
        for (k, v) in pairs {
            if !SCENARIO_KEYS.contains(&k) {
                return Err(Error::InvalidScenario(format!("unknown key {k:?}")));
            }
            map.insert(k, v.trim());
        }
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::InvalidScenario(format!("missing key {k:?}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidScenario(format!("{k}: cannot parse {v:?}")))
        }
        let pair = |k: &str, v: &str| -> Result<(f64, f64)> {
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| Error::InvalidScenario(format!("{k}: expected `x,y`, got {v:?}")))?;
            Ok((num(k, a.trim())?, num(k, b.trim())?))
        };
        let (w, h) = pair("area", get("area")?)?;
        let aps_raw = get("ap_positions")?;
        let ap_positions = aps_raw
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| pair("ap_positions", s).map(|(x, y)| Point::new(x, y)))
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            n_aps: num("n_aps", get("n_aps")?)?,
            n_users: num("n_users", get("n_users")?)?,
            area: Area { width: w, height: h },
            ap_positions,
            min_serving_aps: num("min_serving_aps", get("min_serving_aps")?)?,
            max_served_users: num("max_served_users", get("max_served_users")?)?,
            noise_power: num("noise_power", get("noise_power")?)?,
            gain_scale: num("gain_scale", get("gain_scale")?)?,
            rician_variance: num("rician_variance", get("rician_variance")?)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parses a scenario config file body (`key=value` lines; blank lines
    /// and `#` comments ignored).
    pub fn from_kv_str(text: &str) -> Result<Scenario> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidScenario(format!("expected key=value, got {line:?}")))?;
            pairs.push((k.trim(), v.trim()));
        }
        Scenario::from_kv(pairs)
    }
}
