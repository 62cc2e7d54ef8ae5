//! TOML files describing sources and distortion measures.
//!
//! Model file:
//!
//! ```toml
//! alphabet_size = 2
//! labels = ["0", "1"]            # optional
//! initial = [0.5, 0.5]           # optional, defaults to the stationary law
//! transition = [[0.45, 0.55],    # row-major, nested or flat
//!               [0.45, 0.55]]
//! ```
//!
//! Distortion file, either a preset
//!
//! ```toml
//! preset = "consecutive_ones"    # or "hamming"
//! ```
//!
//! or an explicit windowed table whose rows follow [`DistortionSpec`]:
//!
//! ```toml
//! recon_alphabet_size = 2
//! source_window = 1
//! recon_window = 0
//! table = [[0, 1], [0, 1], [0, 1], [1, 0]]
//! ```

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::prob::{stationary_distribution, Alphabet, Distribution, MarkovSource, StochasticKernel};

#[derive(Deserialize)]
#[serde(untagged)]
enum Matrix {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    alphabet_size: Spanned<usize>,
    labels: Option<Spanned<Vec<String>>>,
    initial: Option<Spanned<Vec<f64>>>,
    transition: Spanned<Matrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistortionFile {
    preset: Option<Spanned<String>>,
    recon_alphabet_size: Option<Spanned<usize>>,
    source_window: Option<Spanned<usize>>,
    recon_window: Option<Spanned<usize>>,
    table: Option<Spanned<Vec<Vec<f64>>>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn at(text: &str, span: Range<usize>, err: impl std::fmt::Display) -> Error {
    Error::Config {
        path: None,
        line: Some(line_of(text, span.start)),
        message: err.to_string(),
    }
}

fn parse_error(text: &str, err: toml::de::Error) -> Error {
    Error::Config {
        path: None,
        line: err.span().map(|s| line_of(text, s.start)),
        message: err.message().to_string(),
    }
}

pub fn parse_model(text: &str) -> Result<MarkovSource> {
    let file: ModelFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let n = *file.alphabet_size.get_ref();
    let alphabet = match &file.labels {
        Some(labels) => {
            if labels.get_ref().len() != n {
                return Err(at(
                    text,
                    labels.span(),
                    format!("expected {n} labels, found {}", labels.get_ref().len()),
                ));
            }
            Alphabet::with_labels(labels.get_ref().clone()).map_err(|e| at(text, labels.span(), e))?
        }
        None => Alphabet::new(n).map_err(|e| at(text, file.alphabet_size.span(), e))?,
    };
    let tspan = file.transition.span();
    let rows = match file.transition.into_inner() {
        Matrix::Nested(rows) => rows,
        Matrix::Flat(flat) => {
            if n == 0 || flat.len() != n * n {
                return Err(at(
                    text,
                    tspan,
                    format!("flat transition needs {} entries, found {}", n * n, flat.len()),
                ));
            }
            flat.chunks(n).map(<[f64]>::to_vec).collect()
        }
    };
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(at(text, tspan, format!("transition must be {n}x{n}")));
    }
    let transition = StochasticKernel::new(rows).map_err(|e| at(text, tspan.clone(), e))?;
    let provisional = Distribution::uniform(n).map_err(|e| at(text, tspan.clone(), e))?;
    let source = MarkovSource::new(alphabet, provisional, transition).map_err(|e| at(text, tspan.clone(), e))?;
    let initial = match &file.initial {
        Some(init) => Distribution::new(init.get_ref().clone()).map_err(|e| at(text, init.span(), e))?,
        None => stationary_distribution(&source).map_err(|e| at(text, tspan, e))?,
    };
    let ispan = file.initial.as_ref().map(|i| i.span()).unwrap_or(0..0);
    source.with_initial(initial).map_err(|e| at(text, ispan, e))
}

pub fn parse_distortion(text: &str, source_size: usize) -> Result<DistortionSpec> {
    let file: DistortionFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    if let Some(preset) = &file.preset {
        if file.table.is_some() {
            return Err(at(text, preset.span(), "give either a preset or a table, not both"));
        }
        return match preset.get_ref().as_str() {
            "consecutive_ones" if source_size == 2 => Ok(DistortionSpec::consecutive_ones()),
            "consecutive_ones" => Err(at(text, preset.span(), "consecutive_ones needs a binary source")),
            "hamming" => DistortionSpec::hamming(source_size).map_err(|e| at(text, preset.span(), e)),
            other => Err(at(text, preset.span(), format!("unknown preset {other:?}"))),
        };
    }
    let missing = |field: &str| Error::Config {
        path: None,
        line: None,
        message: format!("missing field `{field}`"),
    };
    let table = file.table.ok_or_else(|| missing("table"))?;
    let recon = file.recon_alphabet_size.ok_or_else(|| missing("recon_alphabet_size"))?;
    let m = file.source_window.as_ref().map_or(0, |v| *v.get_ref());
    let k = file.recon_window.as_ref().map_or(0, |v| *v.get_ref());
    let span = table.span();
    DistortionSpec::windowed(source_size, *recon.get_ref(), m, k, table.into_inner())
        .map_err(|e| at(text, span, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: Some(path.display().to_string()),
        line: None,
        message: e.to_string(),
    })
}

fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Config { line, message, .. } => Error::Config {
            path: Some(path.display().to_string()),
            line,
            message,
        },
        other => other,
    }
}

pub fn load_model(path: &Path) -> Result<MarkovSource> {
    parse_model(&read(path)?).map_err(|e| with_path(path, e))
}

pub fn load_distortion(path: &Path, source_size: usize) -> Result<DistortionSpec> {
    parse_distortion(&read(path)?, source_size).map_err(|e| with_path(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "alphabet_size = 2\ntransition = [[0.45, 0.55], [0.45, 0.55]]\n";

    #[test]
    fn parses_nested_and_flat() {
        let a = parse_model(MODEL).unwrap();
        let b = parse_model("alphabet_size = 2\ntransition = [0.45, 0.55, 0.45, 0.55]\n").unwrap();
        assert_eq!(a, b);
        assert!((a.initial()[1] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn explicit_initial_and_labels() {
        let m = parse_model(
            "alphabet_size = 2\nlabels = [\"a\", \"b\"]\ninitial = [1.0, 0.0]\ntransition = [[0.5, 0.5], [0.2, 0.8]]\n",
        )
        .unwrap();
        assert_eq!(m.initial().probs(), &[1.0, 0.0]);
        assert_eq!(m.alphabet().label(1), "b");
    }

    #[test]
    fn bad_row_reports_line() {
        let text = "alphabet_size = 2\n\ntransition = [[0.5, 0.6],\n  [0.5, 0.5]]\n";
        match parse_model(text) {
            Err(Error::Config { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        match parse_model("alphabet_size = 2\ntransition = [[0.5, 0.5]\n") {
            Err(Error::Config { line: Some(l), .. }) => assert!(l >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(parse_model("alphabet_size = 2\nfoo = 1\ntransition = [0.5, 0.5, 0.5, 0.5]\n").is_err());
    }

    #[test]
    fn distortion_table_and_presets() {
        let explicit = parse_distortion(
            "recon_alphabet_size = 2\nsource_window = 1\ntable = [[0, 1], [0, 1], [0, 1], [1, 0]]\n",
            2,
        )
        .unwrap();
        assert_eq!(explicit, DistortionSpec::consecutive_ones());
        assert_eq!(parse_distortion("preset = \"consecutive_ones\"\n", 2).unwrap(), explicit);
        assert_eq!(parse_distortion("preset = \"hamming\"\n", 3).unwrap(), DistortionSpec::hamming(3).unwrap());
        assert!(parse_distortion("preset = \"nope\"\n", 2).is_err());
    }

    #[test]
    fn load_errors_name_the_file() {
        let dir = std::env::temp_dir().join(format!("causal-rdf-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "alphabet_size = 2\ntransition = [[0.5, 0.6], [0.5, 0.5]]\n").unwrap();
        let msg = load_model(&path).unwrap_err().to_string();
        assert!(msg.starts_with(&format!("{}:2: ", path.display())), "{msg}");
        let missing = load_model(&dir.join("absent.toml")).unwrap_err().to_string();
        assert!(missing.contains("absent.toml"), "{missing}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn negative_distortion_reports_line() {
        let text = "recon_alphabet_size = 2\ntable = [[0, 1],\n [-1, 0]]\n";
        match parse_distortion(text, 2) {
            Err(Error::Config { line: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
