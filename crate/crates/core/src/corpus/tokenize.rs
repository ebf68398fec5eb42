use serde::{Deserialize, Serialize};

/// Tokenizer behaviour. The default lowercases and splits on whitespace,
/// which keeps #hashtags and @mentions intact as single tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true }
    }
}

/// Splits `text` into word tokens. Pure: the same input and config always
/// produce the same output.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    text.split_whitespace()
        .map(|tok| {
            if config.lowercase {
                tok.to_lowercase()
            } else {
                tok.to_string()
            }
        })
        .collect()
}
