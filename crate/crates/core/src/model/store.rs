//! Model directory: `params.bin`, `dict.txt`, `config.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Hyperparameters, PatchNetModel};
use crate::encode::Dictionary;
use crate::error::{Error, Result};
use crate::nn::io::{decode_params, encode_params};

pub const PARAMS_FILE: &str = "params.bin";
pub const DICT_FILE: &str = "dict.txt";
pub const CONFIG_FILE: &str = "config.txt";

fn config_text(model: &PatchNetModel) -> String {
    let mut out = String::new();
    for (k, v) in model.hyper.to_config_lines() {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "msg_vocab_size={}", model.dict.msg.len());
    let _ = writeln!(out, "code_vocab_size={}", model.dict.code.len());
    out
}

/// Creates `dir`, or empties it if it exists, and writes the three model
/// files.
pub fn save_model(model: &PatchNetModel, dir: &Path) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::Data(format!("{} exists and is not a directory", dir.display())));
        }
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let removed = if path.is_dir() {
                std::fs::remove_dir_all(&path)
            } else {
                std::fs::remove_file(&path)
            };
            removed.map_err(|e| Error::io(&path, e))?;
        }
    } else {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    write(PARAMS_FILE, &encode_params(&model.params))?;
    write(DICT_FILE, model.dict.to_text().as_bytes())?;
    write(CONFIG_FILE, config_text(model).as_bytes())?;
    Ok(())
}

fn parse_config(text: &str, file: &str) -> Result<(Hyperparameters, usize, usize)> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            file: file.into(),
            line: n + 1,
            msg: "expected key=value".into(),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let size = |key: &str| -> Result<usize> {
        map.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(file, format!("missing or invalid {key}")))
    };
    let (msg, code) = (size("msg_vocab_size")?, size("code_vocab_size")?);
    let hyper = Hyperparameters::from_config_map(&map).map_err(|m| Error::format(file, m))?;
    hyper.validate().map_err(|e| Error::format(file, e.to_string()))?;
    Ok((hyper, msg, code))
}

pub fn load_model(dir: &Path) -> Result<PatchNetModel> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("model directory {} does not exist", dir.display())));
    }
    let config_path = dir.join(CONFIG_FILE);
    let config_name = config_path.display().to_string();
    let text = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let (hyper, msg_size, code_size) = parse_config(&text, &config_name)?;

    let dict_path = dir.join(DICT_FILE);
    let dict = Dictionary::read(&dict_path)?;
    if dict.msg.len() != msg_size || dict.code.len() != code_size {
        return Err(Error::format(
            dict_path.display().to_string(),
            format!(
                "vocabulary sizes {}/{} disagree with {CONFIG_FILE} ({msg_size}/{code_size})",
                dict.msg.len(),
                dict.code.len()
            ),
        ));
    }

    let params_path = dir.join(PARAMS_FILE);
    let params_name = params_path.display().to_string();
    let bytes = std::fs::read(&params_path).map_err(|e| Error::io(&params_path, e))?;
    let params = decode_params(&bytes, &params_name)?;
    let model = PatchNetModel { hyper, dict, params };
    model
        .check_params()
        .map_err(|e| Error::format(&params_name, format!("{e} (given {CONFIG_FILE})")))?;
    Ok(model)
}
