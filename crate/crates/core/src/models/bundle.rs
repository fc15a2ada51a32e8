use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{span_layout, ColumnSpan, RawTable, TableSchema};
use crate::error::{Error, Result};
use crate::nn::{AdamState, LayerSpec, Network};
use crate::privacy::RdpLedger;

use super::diffusion::{sample_diffusion, DiffusionConfig};
use super::gan::{sample_gan, GanConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "tablediffusion")]
    TableDiffusion,
    #[serde(rename = "tablediffusion-denoiser")]
    TableDiffusionDenoiser,
    #[serde(rename = "dpwgan")]
    DpWgan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::TableDiffusion,
        ModelKind::TableDiffusionDenoiser,
        ModelKind::DpWgan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TableDiffusion => "tablediffusion",
            ModelKind::TableDiffusionDenoiser => "tablediffusion-denoiser",
            ModelKind::DpWgan => "dpwgan",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind '{s}'")))
    }
}

/// Layer list plus flat parameters of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub layer_specs: Vec<LayerSpec>,
    pub parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Diffusion(DiffusionConfig),
    Gan(GanConfig),
}

/// A trained model together with everything needed to sample from it and
/// to state its privacy guarantee.
///
/// `layer_specs` / `parameters` hold the sampling network: the denoising
/// model for diffusion, the generator for the GAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: ModelKind,
    pub schema: TableSchema,
    pub spans: Vec<ColumnSpan>,
    pub layer_specs: Vec<LayerSpec>,
    pub parameters: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamState<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic: Option<NetworkState>,
    pub config: ModelConfig,
    pub ledger: RdpLedger,
    /// ε at save time; 0 for unprivatized runs.
    pub epsilon_spent: f64,
    /// `None` for unprivatized runs.
    pub delta: Option<f64>,
    pub seed: u64,
}

impl ModelBundle {
    pub fn network(&self) -> Result<Network<f64>> {
        Network::from_parts(self.layer_specs.clone(), self.parameters.clone())
            .map_err(|e| Error::Bundle(format!("network does not match its layers: {e}")))
    }

    /// Cross-checks the parts against each other.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Bundle(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        self.schema
            .validate()
            .map_err(|e| Error::Bundle(format!("embedded schema: {e}")))?;
        if self.spans != span_layout(&self.schema) {
            return bad("spans do not match the schema".into());
        }
        let width = self.schema.encoded_width();
        let net = self.network()?;
        let expected_in = match (&self.config, self.kind) {
            (ModelConfig::Diffusion(c), k) if c.kind() == k => width,
            (ModelConfig::Gan(c), ModelKind::DpWgan) => c.latent_dim,
            _ => return bad(format!("config does not describe a {} model", self.kind)),
        };
        if net.in_dim() != expected_in || net.out_dim() != width {
            return bad(format!(
                "network maps {} → {}, expected {expected_in} → {width}",
                net.in_dim(),
                net.out_dim()
            ));
        }
        match (&self.critic, self.kind) {
            (Some(c), ModelKind::DpWgan) => {
                Network::<f64>::from_parts(c.layer_specs.clone(), c.parameters.clone())
                    .map_err(|e| Error::Bundle(format!("critic: {e}")))?;
            }
            (None, ModelKind::DpWgan) => return bad("GAN bundle lacks its critic".into()),
            (Some(_), _) => return bad("diffusion bundle carries a critic".into()),
            (None, _) => {}
        }
        if let Some(adam) = &self.adam {
            if adam.first_moment.len() != net.param_count() || adam.second_moment.len() != net.param_count() {
                return bad("optimizer state does not match the network".into());
            }
        }
        self.ledger.validate()?;
        if !(self.epsilon_spent >= 0.0 && self.epsilon_spent.is_finite()) {
            return bad("epsilon_spent must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Bundle(format!("corrupt bundle: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Bundle(format!(
                    "unsupported format version {v} (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Bundle("missing format_version".into())),
        }
        let bundle: ModelBundle =
            serde_json::from_value(value).map_err(|e| Error::Bundle(format!("corrupt bundle: {e}")))?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Draws `rows` synthetic records; the result depends only on the
    /// bundle, `rows` and `seed`.
    pub fn sample(&self, rows: usize, seed: u64) -> Result<RawTable> {
        match self.config {
            ModelConfig::Diffusion(_) => sample_diffusion(self, rows, seed),
            ModelConfig::Gan(_) => sample_gan(self, rows, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode, Cell, ColumnSpec};
    use crate::models::{train_diffusion, train_dpwgan, DiffusionVariant};
    use crate::privacy::PrivacyParams;

    fn data() -> crate::data::EncodedMatrix {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("a", 0.0, 1.0, false),
            ColumnSpec::categorical("b", vec!["x".into(), "y".into()]),
        ])
        .unwrap();
        let rows = (0..30)
            .map(|i| vec![Cell::Number(i as f64 / 29.0), Cell::Category(["x", "y"][i % 2].into())])
            .collect();
        encode(&RawTable::new(schema, rows).unwrap()).unwrap()
    }

    fn diffusion_bundle() -> ModelBundle {
        let config = DiffusionConfig {
            batch_size: 8,
            epochs: 1,
            variant: DiffusionVariant::Denoiser,
            privacy: Some(PrivacyParams::new(1.0, 1.1, 0.25, 1e-5, 100.0).unwrap()),
            ..DiffusionConfig::default()
        };
        train_diffusion(&data(), &config, 17).unwrap().0
    }

    #[test]
    fn round_trip_is_lossless() {
        let bundle = diffusion_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        bundle.save(&path).unwrap();
        let loaded = ModelBundle::load(&path).unwrap();
        assert_eq!(loaded, bundle);
        assert_eq!(loaded.epsilon_spent.to_bits(), bundle.epsilon_spent.to_bits());
        assert_eq!(loaded.sample(9, 3).unwrap(), bundle.sample(9, 3).unwrap());

        let gan = train_dpwgan(
            &data(),
            &GanConfig {
                batch_size: 8,
                epochs: 1,
                latent_dim: 4,
                ..GanConfig::default()
            },
            2,
        )
        .unwrap()
        .0;
        let back = ModelBundle::from_json(&gan.to_json().unwrap()).unwrap();
        assert_eq!(back, gan);
    }

    #[test]
    fn top_level_keys_are_documented() {
        let json: serde_json::Value = serde_json::from_str(&diffusion_bundle().to_json().unwrap()).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "format_version",
            "kind",
            "schema",
            "spans",
            "layer_specs",
            "parameters",
            "adam",
            "config",
            "ledger",
            "epsilon_spent",
            "delta",
            "seed",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(json["kind"], "tablediffusion-denoiser");
        assert!(json["ledger"]["steps"].as_u64().unwrap() > 0);
    }

    #[test]
    fn truncated_and_foreign_files_are_rejected() {
        let text = diffusion_bundle().to_json().unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(ModelBundle::from_json(cut), Err(Error::Bundle(_))));
        let bumped = text.replacen("\"format_version\":1", "\"format_version\":99", 1);
        let err = ModelBundle::from_json(&bumped).unwrap_err();
        assert!(err.to_string().contains("version"));
        assert!(ModelBundle::from_json("{}").is_err());
        assert!(ModelBundle::load("/nonexistent/bundle.json").unwrap_err().is_input_error());
    }

    #[test]
    fn tampered_parameters_are_rejected() {
        let mut bundle = diffusion_bundle();
        bundle.parameters.pop();
        assert!(bundle.validate().is_err());
        let mut bundle = diffusion_bundle();
        bundle.kind = ModelKind::DpWgan;
        assert!(bundle.validate().is_err());
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("gan".parse::<ModelKind>().is_err());
    }
}
