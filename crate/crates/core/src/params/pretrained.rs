use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Pretrained word vectors loaded from a text file.
#[derive(Debug, Clone)]
pub struct PretrainedWords {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

/// Parses word vectors in the common text layout: an optional
/// `<count> <dim>` header, then one `word v1 ... vn` line per word.
pub fn load_pretrained_words(path: &Path) -> Result<PretrainedWords> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut vectors = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // Header line: exactly two integers.
        if line_no == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MalformedLine {
                line: line_no,
                msg: "pretrained vector has a non-numeric component".to_string(),
            })?;
        if values.is_empty() {
            return Err(Error::MalformedLine {
                line: line_no,
                msg: "pretrained vector line has no components".to_string(),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::MalformedLine {
                    line: line_no,
                    msg: format!("expected {d} components, found {}", values.len()),
                })
            }
            _ => {}
        }
        vectors.insert(fields[0].to_string(), values);
    }
    Ok(PretrainedWords {
        dim: dim.unwrap_or(0),
        vectors,
    })
}
