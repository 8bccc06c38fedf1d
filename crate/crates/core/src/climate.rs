//! Multi-year climate samples: per (year, period) series bundles for each
//! clustering metric and region.
//!
//! A sample directory holds `sample.toml` plus one CSV per (metric, region)
//! named `<metric>.<region>.csv` with columns `year,period,timestep,value`
//! (period and timestep zero-based, year a calendar label).

use crate::error::CoreError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Supply,
    Demand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDef {
    pub name: String,
    pub kind: MetricKind,
    /// Technology whose reference capacity weights this metric; absolute
    /// series carry no weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tech: Option<String>,
    pub regions: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleManifest {
    years: Vec<i32>,
    periods_per_year: usize,
    timesteps_per_period: usize,
    #[serde(rename = "metric")]
    metrics: Vec<MetricDef>,
}

/// A multi-year climate sample with every (year, period) cell populated.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateSample {
    /// Calendar labels of the sampled years.
    pub years: Vec<i32>,
    pub periods_per_year: usize,
    pub timesteps_per_period: usize,
    pub metrics: Vec<MetricDef>,
    /// `(metric, region) -> [year][period] -> values`.
    pub series: BTreeMap<(String, String), Vec<Vec<Vec<f64>>>>,
}

impl ClimateSample {
    pub fn num_years(&self) -> usize {
        self.years.len()
    }

    pub fn metric(&self, name: &str) -> Option<&MetricDef> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn cell(&self, metric: &str, region: &str, year: usize, period: usize) -> Option<&[f64]> {
        self.series
            .get(&(metric.to_string(), region.to_string()))
            .map(|y| y[year][period].as_slice())
    }

    /// Period total of a metric aggregated over its regions.
    pub fn period_total(&self, metric: &MetricDef, year: usize, period: usize) -> f64 {
        metric
            .regions
            .iter()
            .map(|region| {
                self.series[&(metric.name.clone(), region.clone())][year][period]
                    .iter()
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Parse the sample manifest text; exposed for fuzzing.
pub fn parse_sample_manifest(text: &str) -> Result<(Vec<i32>, usize, usize, Vec<MetricDef>), CoreError> {
    let manifest: SampleManifest =
        toml::from_str(text).map_err(|e| CoreError::schema("sample.toml", e.to_string()))?;
    if manifest.years.is_empty() {
        return Err(CoreError::schema("sample.toml", "years must not be empty"));
    }
    if manifest.periods_per_year == 0 || manifest.timesteps_per_period == 0 {
        return Err(CoreError::schema("sample.toml", "grid must be positive"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for y in &manifest.years {
        if !seen.insert(*y) {
            return Err(CoreError::schema("sample.toml", format!("duplicate year {y}")));
        }
    }
    let mut names = std::collections::BTreeSet::new();
    for m in &manifest.metrics {
        if !names.insert(m.name.clone()) {
            return Err(CoreError::schema("sample.toml", format!("duplicate metric {}", m.name)));
        }
        if m.regions.is_empty() {
            return Err(CoreError::schema("sample.toml", format!("metric {} has no regions", m.name)));
        }
    }
    Ok((
        manifest.years,
        manifest.periods_per_year,
        manifest.timesteps_per_period,
        manifest.metrics,
    ))
}

/// Parse one `year,period,timestep,value` CSV into `[year][period]` cells;
/// exposed for fuzzing.
pub fn parse_sample_csv(
    text: &str,
    name: &str,
    years: &[i32],
    periods: usize,
    steps: usize,
) -> Result<Vec<Vec<Vec<f64>>>, CoreError> {
    let year_index: BTreeMap<i32, usize> =
        years.iter().enumerate().map(|(i, &y)| (y, i)).collect();
    let mut data = vec![vec![Vec::new(); periods]; years.len()];
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::schema(name, format!("bad header: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != ["year", "period", "timestep", "value"] {
        return Err(CoreError::schema(name, "header must be `year,period,timestep,value`"));
    }
    for (lineno, record) in rdr.records().enumerate() {
        let line = lineno + 2;
        let record =
            record.map_err(|e| CoreError::schema(name, format!("line {line}: {e}")))?;
        if record.len() != 4 {
            return Err(CoreError::schema(name, format!("line {line}: need 4 fields")));
        }
        let year: i32 = record[0]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {line}: bad year")))?;
        let &yi = year_index
            .get(&year)
            .ok_or_else(|| CoreError::schema(name, format!("line {line}: unknown year {year}")))?;
        let period: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {line}: bad period")))?;
        if period >= periods {
            return Err(CoreError::schema(name, format!("line {line}: period {period} out of range")));
        }
        let t: usize = record[2]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {line}: bad timestep")))?;
        let cell = &mut data[yi][period];
        if t != cell.len() || t >= steps {
            return Err(CoreError::schema(
                name,
                format!("line {line}: timesteps must be dense from 0 and below {steps}"),
            ));
        }
        let v: f64 = record[3]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {line}: bad value")))?;
        if !v.is_finite() {
            return Err(CoreError::schema(name, format!("line {line}: non-finite value")));
        }
        cell.push(v);
    }
    for (yi, per_year) in data.iter().enumerate() {
        for (p, cell) in per_year.iter().enumerate() {
            if cell.len() != steps {
                return Err(CoreError::schema(
                    name,
                    format!(
                        "cell year {} period {p} has {} of {steps} values",
                        years[yi],
                        cell.len()
                    ),
                ));
            }
        }
    }
    Ok(data)
}

/// Load a climate sample directory.
pub fn load_sample(dir: &Path) -> Result<ClimateSample, CoreError> {
    let manifest_path = dir.join("sample.toml");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|_| CoreError::MissingFile(manifest_path.display().to_string()))?;
    let (years, periods, steps, metrics) = parse_sample_manifest(&text)?;

    let mut series = BTreeMap::new();
    for metric in &metrics {
        for region in &metric.regions {
            let file = dir.join(format!("{}.{}.csv", metric.name, region));
            let text = fs::read_to_string(&file)
                .map_err(|_| CoreError::MissingFile(file.display().to_string()))?;
            let data = parse_sample_csv(
                &text,
                &format!("{}.{}.csv", metric.name, region),
                &years,
                periods,
                steps,
            )?;
            series.insert((metric.name.clone(), region.clone()), data);
        }
    }
    Ok(ClimateSample {
        years,
        periods_per_year: periods,
        timesteps_per_period: steps,
        metrics,
        series,
    })
}

/// Write a sample directory in canonical form.
pub fn save_sample(sample: &ClimateSample, dir: &Path) -> Result<(), CoreError> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
    let manifest = SampleManifest {
        years: sample.years.clone(),
        periods_per_year: sample.periods_per_year,
        timesteps_per_period: sample.timesteps_per_period,
        metrics: sample.metrics.clone(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| CoreError::schema("sample.toml", e.to_string()))?;
    fs::write(dir.join("sample.toml"), text)
        .map_err(|e| CoreError::io("sample.toml".to_string(), e))?;
    for ((metric, region), data) in &sample.series {
        let mut text = String::from("year,period,timestep,value\n");
        for (yi, per_year) in data.iter().enumerate() {
            for (p, cell) in per_year.iter().enumerate() {
                for (t, v) in cell.iter().enumerate() {
                    text.push_str(&format!("{},{p},{t},{v}\n", sample.years[yi]));
                }
            }
        }
        let file = dir.join(format!("{metric}.{region}.csv"));
        fs::write(&file, text).map_err(|e| CoreError::io(file.display().to_string(), e))?;
    }
    Ok(())
}
