//! Parameter sweeps for `drn inspect`.
//!
//! A sweep is a list of `name=values` terms, one per `--sweep` flag or separated by
//! `;`. Values are either a comma list (`0,1,100`) or an inclusive linear range
//! `lo:hi:n`. The sweep is the Cartesian product of all terms, last term fastest.

use anyhow::{bail, Context, Result};

pub const PARAMS: [&str; 5] = ["w", "b_q", "b_a", "lambda_q", "lambda_a"];

fn canonical(name: &str) -> Option<usize> {
    let name = match name {
        "lq" | "λ_q" => "lambda_q",
        "la" | "λ_a" => "lambda_a",
        "bq" => "b_q",
        "ba" => "b_a",
        other => other,
    };
    PARAMS.iter().position(|p| *p == name)
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().with_context(|| format!("bad range start `{lo}`"))?;
            let hi: f64 = hi.trim().parse().with_context(|| format!("bad range end `{hi}`"))?;
            let n: usize = n.trim().parse().with_context(|| format!("bad range count `{n}`"))?;
            match n {
                0 => bail!("range `{text}` has no points"),
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value `{v}`")))
            .collect::<Result<_>>()?,
        _ => bail!("`{text}` is neither a comma list nor lo:hi:n"),
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        bail!("non-finite sweep value {v}");
    }
    Ok(values)
}

/// Values of every parameter, in [`PARAMS`] order. Missing parameters get `defaults`.
pub fn parse(terms: &[String], defaults: [f64; 5]) -> Result<[Vec<f64>; 5]> {
    let mut axes: [Option<Vec<f64>>; 5] = Default::default();
    for term in terms.iter().flat_map(|t| t.split(';')).map(str::trim).filter(|t| !t.is_empty()) {
        let (name, values) = term
            .split_once('=')
            .with_context(|| format!("sweep term `{term}` is not name=values"))?;
        let idx = canonical(name.trim())
            .with_context(|| format!("unknown parameter `{name}` (one of {})", PARAMS.join(", ")))?;
        if axes[idx].is_some() {
            bail!("parameter `{name}` given twice");
        }
        axes[idx] = Some(parse_values(values)?);
    }
    Ok(std::array::from_fn(|i| axes[i].take().unwrap_or_else(|| vec![defaults[i]])))
}

/// Cartesian product of the axes.
pub fn combinations(axes: &[Vec<f64>; 5]) -> Vec<[f64; 5]> {
    let mut out = vec![[0.0; 5]];
    for (i, axis) in axes.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|c| {
                axis.iter().map(move |&v| {
                    let mut c = c;
                    c[i] = v;
                    c
                })
            })
            .collect();
    }
    out
}
