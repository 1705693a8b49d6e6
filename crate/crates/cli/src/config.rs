//! Line-oriented `key = value` config files and small value parsers.
//! Command-line flags override config values; config values override
//! defaults.

use std::collections::BTreeMap;

use num::complex::Complex64;

pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

pub const KNOWN_KEYS: [&str; 16] = [
    "fn",
    "poly_file",
    "beta_csv",
    "n",
    "M",
    "rho",
    "r_in",
    "r_out",
    "alpha",
    "centers",
    "radii",
    "seed",
    "trials",
    "tol_id",
    "tol_hol",
    "tol",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", lineno + 1));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key `{}`", lineno + 1, key));
            }
            values.insert(key.to_string(), value.to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn empty() -> Self {
        ConfigFile {
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Flag value wins; otherwise the config value is parsed.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(text) => text
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{text}`")),
        }
    }

    pub fn resolve_string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.get(key).map(|s| s.to_string()))
    }
}

/// Parse one complex number: `1.5`, `-0.2+0.3i`, `0.3i`, `i`, `-i`.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Ok(re) = t.parse::<f64>() {
        return Ok(Complex64::new(re, 0.0));
    }
    if let Some(body) = t.strip_suffix('i') {
        // split into real and imaginary magnitudes at the last +/- that is
        // not an exponent sign and not the leading sign
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k];
            if (c == b'+' || c == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                split = Some(k);
                break;
            }
        }
        return match split {
            None => {
                let im = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => body.parse::<f64>().map_err(|e| e.to_string())?,
                };
                Ok(Complex64::new(0.0, im))
            }
            Some(k) => {
                let re = body[..k].parse::<f64>().map_err(|e| e.to_string())?;
                let imtext = &body[k..];
                let im = match imtext {
                    "+" => 1.0,
                    "-" => -1.0,
                    _ => imtext.parse::<f64>().map_err(|e| e.to_string())?,
                };
                Ok(Complex64::new(re, im))
            }
        };
    }
    Err(format!("cannot parse complex literal `{text}`"))
}

pub fn parse_complex_list(text: &str, n: usize, what: &str) -> Result<Vec<Complex64>, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n {
        return Err(format!("{what}: expected {n} entries, found {}", parts.len()));
    }
    parts.iter().map(|p| parse_complex(p)).collect()
}

pub fn parse_f64_list(text: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n {
        return Err(format!("{what}: expected {n} entries, found {}", parts.len()));
    }
    parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{what}: {e}")))
        .collect()
}

pub fn parse_usize_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect()
}
