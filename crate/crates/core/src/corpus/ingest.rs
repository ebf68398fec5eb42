use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Corpus, TokenizerConfig, Tweet, User, Vocabulary};
use crate::error::Error;
use crate::Result;

/// One raw timeline record before encoding.
#[derive(Debug, Clone)]
pub struct TimelineRecord {
    pub user_id: String,
    pub tweet_id: String,
    pub seq_no: usize,
    pub text: String,
}

/// Input layout of the corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// `user_id<TAB>tweet_id<TAB>seq_no<TAB>text`, one record per line.
    Tsv,
    /// JSON lines with keys `user`, `id`, `seq`, `text`.
    JsonLines,
    /// Decide per line: lines starting with `{` parse as JSON.
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub tokenizer: TokenizerConfig,
    pub min_count: u64,
    pub format: CorpusFormat,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            tokenizer: TokenizerConfig::default(),
            min_count: 1,
            format: CorpusFormat::Auto,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    user: String,
    id: String,
    seq: usize,
    text: String,
}

fn parse_line(line: &str, line_no: usize, format: CorpusFormat) -> Result<TimelineRecord> {
    let malformed = |msg: &str| Error::MalformedLine {
        line: line_no,
        msg: msg.to_string(),
    };

    let as_json = match format {
        CorpusFormat::Tsv => false,
        CorpusFormat::JsonLines => true,
        CorpusFormat::Auto => line.trim_start().starts_with('{'),
    };

    if as_json {
        let rec: JsonRecord = serde_json::from_str(line)
            .map_err(|e| malformed(&format!("invalid JSON record: {e}")))?;
        return Ok(TimelineRecord {
            user_id: rec.user,
            tweet_id: rec.id,
            seq_no: rec.seq,
            text: rec.text,
        });
    }

    let mut fields = line.splitn(4, '\t');
    let user_id = fields.next().filter(|s| !s.is_empty());
    let tweet_id = fields.next().filter(|s| !s.is_empty());
    let seq_no = fields.next();
    let text = fields.next();
    match (user_id, tweet_id, seq_no, text) {
        (Some(user_id), Some(tweet_id), Some(seq_no), Some(text)) => {
            let seq_no = seq_no
                .parse::<usize>()
                .map_err(|_| malformed(&format!("seq_no `{seq_no}` is not an integer")))?;
            Ok(TimelineRecord {
                user_id: user_id.to_string(),
                tweet_id: tweet_id.to_string(),
                seq_no,
                text: text.to_string(),
            })
        }
        _ => Err(malformed(
            "expected `user_id<TAB>tweet_id<TAB>seq_no<TAB>text`",
        )),
    }
}

/// Reads and encodes a timeline corpus from `path`.
pub fn ingest(path: &Path, config: &IngestConfig) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), config)
}

/// Same as [`ingest`] but over any reader; used by tests and generators.
pub fn ingest_reader<R: Read>(reader: BufReader<R>, config: &IngestConfig) -> Result<Corpus> {
    let mut records: Vec<TimelineRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            msg: format!("unreadable line: {e}"),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line, line_no, config.format)?);
    }
    encode(records, config)
}

/// Groups records per user, validates ids and sequence numbers, builds the
/// vocabulary and encodes every tweet. Users keep their first-appearance
/// order; tweets are numbered user by user in timeline order.
pub fn encode(records: Vec<TimelineRecord>, config: &IngestConfig) -> Result<Corpus> {
    let mut user_order: Vec<String> = Vec::new();
    let mut by_user: HashMap<String, Vec<TimelineRecord>> = HashMap::new();
    for rec in records {
        if !by_user.contains_key(&rec.user_id) {
            user_order.push(rec.user_id.clone());
        }
        by_user.entry(rec.user_id.clone()).or_default().push(rec);
    }

    // Word frequencies over the whole corpus.
    let mut counts: HashMap<String, u64> = HashMap::new();
    for recs in by_user.values() {
        for rec in recs {
            for tok in tokenize(&rec.text, &config.tokenizer) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let vocab = Vocabulary::from_counts(counts, config.min_count);

    let mut corpus = Corpus {
        vocab,
        ..Default::default()
    };
    for (user_index, user_id) in user_order.iter().enumerate() {
        let mut recs = by_user.remove(user_id).unwrap();
        recs.sort_by_key(|r| r.seq_no);
        for (expected, rec) in recs.iter().enumerate() {
            if rec.seq_no != expected {
                return Err(Error::Data(format!(
                    "user `{user_id}`: seq_no values must be unique and contiguous from 0, \
                     found {} where {} was expected",
                    rec.seq_no, expected
                )));
            }
        }

        let mut user = User {
            user_id: user_id.clone(),
            tweets: Vec::with_capacity(recs.len()),
        };
        for rec in recs {
            let tweet_index = corpus.tweets.len();
            if corpus
                .tweet_id_index
                .insert(rec.tweet_id.clone(), tweet_index)
                .is_some()
            {
                return Err(Error::Data(format!(
                    "duplicate tweet_id `{}`",
                    rec.tweet_id
                )));
            }
            let tokens = tokenize(&rec.text, &config.tokenizer)
                .into_iter()
                .filter_map(|tok| corpus.vocab.index_of(&tok))
                .collect();
            corpus.tweets.push(Tweet {
                tweet_id: rec.tweet_id,
                user_index,
                tokens,
            });
            user.tweets.push(tweet_index);
        }
        corpus.users.push(user);
    }

    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_str(input: &str, config: &IngestConfig) -> Result<Corpus> {
        ingest_reader(BufReader::new(input.as_bytes()), config)
    }

    #[test]
    fn three_lines_two_users() {
        let input = "u1\tt1\t0\thello world\nu2\tt2\t0\tother text\nu1\tt3\t1\thello again\n";
        let corpus = from_str(input, &IngestConfig::default()).unwrap();
        assert_eq!(corpus.users.len(), 2);
        assert_eq!(corpus.tweets.len(), 3);
        assert_eq!(corpus.users[0].tweets.len(), 2);
        assert_eq!(corpus.users[1].tweets.len(), 1);
    }

    #[test]
    fn empty_file() {
        let corpus = from_str("", &IngestConfig::default()).unwrap();
        assert!(corpus.is_empty());
        assert_eq!(corpus.users.len(), 0);
        assert_eq!(corpus.vocab.len(), 0);
    }

    #[test]
    fn min_count_prunes_vocabulary() {
        let input = "u1\tt1\t0\tthe the\nu1\tt2\t1\tthe the zebra\n";
        let config = IngestConfig {
            min_count: 2,
            ..Default::default()
        };
        let corpus = from_str(input, &config).unwrap();
        assert!(corpus.vocab.index_of("the").is_some());
        assert!(corpus.vocab.index_of("zebra").is_none());
        // "zebra" is dropped from the encoded tweet, the tweet itself stays.
        assert_eq!(corpus.tweets[1].tokens.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "u1\tt1\t0\tfine\nbroken line\n";
        let err = from_str(input, &IngestConfig::default()).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_seq_no_is_malformed() {
        let input = "u1\tt1\tzero\ttext\n";
        assert!(matches!(
            from_str(input, &IngestConfig::default()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_tweet_id_aborts() {
        let input = "u1\tt1\t0\ta\nu2\tt1\t0\tb\n";
        let err = from_str(input, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("duplicate tweet_id"));
    }

    #[test]
    fn non_contiguous_seq_no_aborts() {
        let input = "u1\tt1\t0\ta\nu1\tt2\t2\tb\n";
        let err = from_str(input, &IngestConfig::default()).unwrap_err();
        assert!(err.to_string().contains("contiguous"));
    }

    #[test]
    fn records_may_arrive_out_of_order() {
        let input = "u1\tt2\t1\tsecond\nu1\tt1\t0\tfirst\n";
        let corpus = from_str(input, &IngestConfig::default()).unwrap();
        let first = &corpus.tweets[corpus.users[0].tweets[0]];
        assert_eq!(first.tweet_id, "t1");
    }

    #[test]
    fn json_lines_mode() {
        let input = concat!(
            "{\"user\":\"u1\",\"id\":\"t1\",\"seq\":0,\"text\":\"hello there\"}\n",
            "{\"user\":\"u1\",\"id\":\"t2\",\"seq\":1,\"text\":\"again\"}\n",
        );
        let config = IngestConfig {
            format: CorpusFormat::JsonLines,
            ..Default::default()
        };
        let corpus = from_str(input, &config).unwrap();
        assert_eq!(corpus.tweets.len(), 2);
        assert!(corpus.vocab.index_of("hello").is_some());
    }

    #[test]
    fn users_with_one_tweet_are_retained() {
        let input = "solo\tt9\t0\tjust one\n";
        let corpus = from_str(input, &IngestConfig::default()).unwrap();
        assert_eq!(corpus.users.len(), 1);
        assert_eq!(corpus.users[0].tweets.len(), 1);
    }

    #[test]
    fn oov_only_tweet_becomes_empty_but_stays() {
        let input = "u1\tt1\t0\trare\nu1\tt2\t1\tcommon common\n";
        let config = IngestConfig {
            min_count: 2,
            ..Default::default()
        };
        let corpus = from_str(input, &config).unwrap();
        assert_eq!(corpus.tweets.len(), 2);
        assert!(corpus.tweets[0].tokens.is_empty());
    }
}
