use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::encode::ShapeConfig;
use crate::error::{Error, Result};

/// Which inputs reach the classifier. The unused embedding is replaced by
/// zeros of the same length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataType {
    Msg,
    Code,
    #[default]
    All,
}

impl DataType {
    pub fn uses_msg(self) -> bool {
        matches!(self, DataType::Msg | DataType::All)
    }

    pub fn uses_code(self) -> bool {
        matches!(self, DataType::Code | DataType::All)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Msg => "msg",
            DataType::Code => "code",
            DataType::All => "all",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "msg" => Ok(DataType::Msg),
            "code" => Ok(DataType::Code),
            "all" => Ok(DataType::All),
            _ => Err(format!("data_type must be msg, code or all, got {s:?}")),
        }
    }
}

/// Parses `"1,2"` into `[1, 2]`.
pub fn parse_filter_sizes(s: &str) -> std::result::Result<Vec<usize>, String> {
    let sizes: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| format!("filter sizes must be comma-separated positive integers, got {s:?}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(sizes)
}

pub fn format_filter_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub embedding_dim: usize,
    pub filter_sizes: Vec<usize>,
    pub num_filters: usize,
    /// Width of the hidden fully connected layer.
    pub hidden_layers: usize,
    pub dropout_keep_prob: f64,
    pub l2_reg_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub num_epochs: usize,
    pub data_type: DataType,
    pub shape: ShapeConfig,
    /// Length of the optional extra feature vector appended to `e`.
    pub extra_dim: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            embedding_dim: 32,
            filter_sizes: vec![1, 2],
            num_filters: 32,
            hidden_layers: 16,
            dropout_keep_prob: 0.5,
            l2_reg_lambda: 1e-5,
            learning_rate: 1e-4,
            batch_size: 64,
            num_epochs: 25,
            data_type: DataType::All,
            shape: ShapeConfig::default(),
            extra_dim: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("num_filters", self.num_filters),
            ("hidden_layers", self.hidden_layers),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.filter_sizes.is_empty() || self.filter_sizes.contains(&0) {
            return bad(format!("filter_sizes must be positive, got {:?}", self.filter_sizes));
        }
        let kmax = self.max_filter_size();
        let s = &self.shape;
        for (name, v) in [("msg_len", s.msg_len), ("words", s.words), ("lines", s.lines)] {
            if v < kmax {
                return bad(format!("{name} = {v} is shorter than the largest filter size {kmax}"));
            }
        }
        if !(self.dropout_keep_prob > 0.0 && self.dropout_keep_prob <= 1.0) {
            return bad(format!("dropout_keep_prob must be in (0, 1], got {}", self.dropout_keep_prob));
        }
        if !(self.l2_reg_lambda >= 0.0 && self.l2_reg_lambda.is_finite()) {
            return bad(format!("l2_reg_lambda must be >= 0, got {}", self.l2_reg_lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        Ok(())
    }

    pub fn max_filter_size(&self) -> usize {
        self.filter_sizes.iter().copied().max().unwrap_or(0)
    }

    /// `|e_m|`, also the length of `e_r` and `e_a`.
    pub fn pooled_len(&self) -> usize {
        self.filter_sizes.len() * self.num_filters
    }

    /// `|e_f| = |e_r| + |e_a|`
    pub fn file_len(&self) -> usize {
        2 * self.pooled_len()
    }

    /// `|e_c| = F * |e_f|`
    pub fn code_len(&self) -> usize {
        self.shape.files * self.file_len()
    }

    /// `|e| = |e_m| + |e_c| + |e_i|`
    pub fn joint_len(&self) -> usize {
        self.pooled_len() + self.code_len() + self.extra_dim
    }

    /// `key=value` lines, keys in a fixed order.
    pub fn to_config_lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("data_type", self.data_type.to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("filter_sizes", format_filter_sizes(&self.filter_sizes)),
            ("num_filters", self.num_filters.to_string()),
            ("hidden_layers", self.hidden_layers.to_string()),
            ("dropout_keep_prob", self.dropout_keep_prob.to_string()),
            ("l2_reg_lambda", self.l2_reg_lambda.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("num_epochs", self.num_epochs.to_string()),
            ("files", self.shape.files.to_string()),
            ("hunks", self.shape.hunks.to_string()),
            ("lines", self.shape.lines.to_string()),
            ("words", self.shape.words.to_string()),
            ("msg_len", self.shape.msg_len.to_string()),
            ("extra_dim", self.extra_dim.to_string()),
        ]
    }

    /// Inverse of [`to_config_lines`](Self::to_config_lines); every key is
    /// required.
    pub fn from_config_map(map: &BTreeMap<String, String>) -> std::result::Result<Self, String> {
        fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> std::result::Result<T, String> {
            let raw = map.get(key).ok_or_else(|| format!("missing key {key}"))?;
            raw.parse().map_err(|_| format!("invalid value for {key}: {raw:?}"))
        }
        let data_type: String = get(map, "data_type")?;
        let filter_sizes: String = get(map, "filter_sizes")?;
        Ok(Hyperparameters {
            data_type: data_type.parse()?,
            embedding_dim: get(map, "embedding_dim")?,
            filter_sizes: parse_filter_sizes(&filter_sizes)?,
            num_filters: get(map, "num_filters")?,
            hidden_layers: get(map, "hidden_layers")?,
            dropout_keep_prob: get(map, "dropout_keep_prob")?,
            l2_reg_lambda: get(map, "l2_reg_lambda")?,
            learning_rate: get(map, "learning_rate")?,
            batch_size: get(map, "batch_size")?,
            num_epochs: get(map, "num_epochs")?,
            shape: ShapeConfig {
                files: get(map, "files")?,
                hunks: get(map, "hunks")?,
                lines: get(map, "lines")?,
                words: get(map, "words")?,
                msg_len: get(map, "msg_len")?,
            },
            extra_dim: get(map, "extra_dim")?,
        })
    }
}
