use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ParameterStore;
use crate::error::Error;
use crate::Result;

/// Which embedding table to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Words,
    Tweets,
    Users,
}

impl std::str::FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "words" => Ok(ExportKind::Words),
            "tweets" => Ok(ExportKind::Tweets),
            "users" => Ok(ExportKind::Users),
            other => Err(format!("unknown export kind `{other}`")),
        }
    }
}

/// Writes one embedding table as text: a `<count> <dim>` header, then one
/// `<id> <v1> ... <vn>` line per row with six significant digits.
pub fn export_embeddings(
    store: &ParameterStore,
    which: ExportKind,
    ids: &[String],
    path: &Path,
) -> Result<()> {
    let matrix = match which {
        ExportKind::Words => &store.word_vectors,
        ExportKind::Tweets => &store.tweet_vectors,
        ExportKind::Users => &store.user_vectors,
    };
    if ids.len() != matrix.rows() {
        return Err(Error::Shape(format!(
            "{} ids supplied for {} rows",
            ids.len(),
            matrix.rows()
        )));
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    writeln!(w, "{} {}", matrix.rows(), matrix.cols()).map_err(io_err)?;
    for (row, id) in ids.iter().enumerate() {
        write!(w, "{id}").map_err(io_err)?;
        for col in 0..matrix.cols() {
            write!(w, " {:.5e}", matrix.get(row, col)).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Shapes;

    fn toy_store() -> ParameterStore {
        let shapes = Shapes {
            vocab: 2,
            tweets: 2,
            users: 1,
            dim: 3,
            cw: 1,
            ct: 1,
        };
        ParameterStore::init(shapes, 9, None).unwrap()
    }

    #[test]
    fn two_rows_three_lines() {
        let store = toy_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tweets.vec");
        let ids = vec!["t1".to_string(), "t2".to_string()];
        export_embeddings(&store, ExportKind::Tweets, &ids, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "2 3");
        assert!(lines[1].starts_with("t1 "));
    }

    #[test]
    fn empty_table_writes_header_only() {
        let shapes = Shapes {
            vocab: 0,
            tweets: 0,
            users: 0,
            dim: 4,
            cw: 1,
            ct: 1,
        };
        let store = ParameterStore::init(shapes, 1, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.vec");
        export_embeddings(&store, ExportKind::Words, &[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "0 4\n");
    }

    #[test]
    fn reparsed_vectors_match_within_tolerance() {
        let store = toy_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.vec");
        let ids = vec!["alpha".to_string(), "beta".to_string()];
        export_embeddings(&store, ExportKind::Words, &ids, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for (row, line) in text.lines().skip(1).enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(fields[0], ids[row]);
            for (col, field) in fields[1..].iter().enumerate() {
                let parsed: f64 = field.parse().unwrap();
                assert!((parsed - store.word_vectors.get(row, col)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn id_count_must_match() {
        let store = toy_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vec");
        let err = export_embeddings(&store, ExportKind::Users, &[], &path).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
