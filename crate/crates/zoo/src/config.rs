//! Variant configuration: the knobs that define one model in the grid.

use scslab_nn::{PMode, QMode};

/// Architecture families available in the gallery.
pub const ARCH_FAMILIES: &[&str] = &["rohrer_small", "rohrer_100k", "mini_resnet"];

/// One grid cell: a feature-extractor kind combined with activation,
/// pooling, normalization and parameterization choices on a fixed
/// architecture skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerVariantConfig {
    /// Feature extractor: `conv`, `cossim`, `scs` or `sdp`.
    pub layer_kind: String,
    /// Pointwise activation after each feature stage: `relu` or `none`.
    pub activation: String,
    /// Downsampling rule: `maxpool` or `maxabspool`.
    pub pooling: String,
    /// Per-stage normalization: `batchnorm` or `none`.
    pub normalization: String,
    /// Sharpening exponent parameterization (scs/sdp only).
    pub p_mode: PMode,
    /// Smoothing parameterization (scs/cossim only).
    pub q_mode: QMode,
    /// Architecture skeleton, one of [`ARCH_FAMILIES`].
    pub arch_family: String,
    /// Seed for weight initialization (shared across kinds).
    pub seed: u64,
}

impl Default for LayerVariantConfig {
    fn default() -> Self {
        LayerVariantConfig {
            layer_kind: "conv".into(),
            activation: "relu".into(),
            pooling: "maxpool".into(),
            normalization: "none".into(),
            p_mode: PMode::Learned,
            q_mode: QMode::Learned,
            arch_family: "rohrer_small".into(),
            seed: 0,
        }
    }
}

impl LayerVariantConfig {
    /// Canonical single-line form, stable across versions; embedded in
    /// checkpoints and used to name runs.
    pub fn variant_string(&self) -> String {
        let p = match self.p_mode {
            PMode::Learned => "learned".to_string(),
            PMode::Fixed(v) => format!("fixed({v})"),
        };
        let q = match self.q_mode {
            QMode::Learned => "learned".to_string(),
            QMode::Fixed(v) => format!("fixed({v})"),
        };
        format!(
            "{arch}:{kind}:{act}:{pool}:{norm}:p={p}:q={q}:seed={seed}",
            arch = self.arch_family,
            kind = self.layer_kind,
            act = self.activation,
            pool = self.pooling,
            norm = self.normalization,
            seed = self.seed,
        )
    }

    /// Short run label without the seed (grid cell identity).
    pub fn cell_label(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}",
            self.arch_family, self.layer_kind, self.activation, self.pooling, self.normalization
        )
    }

    /// Inverse of [`LayerVariantConfig::variant_string`]; lets artifacts
    /// (checkpoints, snapshots) reconstruct their config.
    pub fn from_variant_string(s: &str) -> crate::error::Result<LayerVariantConfig> {
        let bad = |detail: &str| crate::error::ZooError::Config(format!("variant '{s}': {detail}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 8 {
            return Err(bad("expected 8 colon-separated fields"));
        }
        let p_mode = parse_mode(parts[5], "p=")
            .ok_or_else(|| bad("bad p field"))?
            .map_or(PMode::Learned, PMode::Fixed);
        let q_mode = parse_mode(parts[6], "q=")
            .ok_or_else(|| bad("bad q field"))?
            .map_or(QMode::Learned, QMode::Fixed);
        let seed = parts[7]
            .strip_prefix("seed=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad seed field"))?;
        Ok(LayerVariantConfig {
            arch_family: parts[0].to_string(),
            layer_kind: parts[1].to_string(),
            activation: parts[2].to_string(),
            pooling: parts[3].to_string(),
            normalization: parts[4].to_string(),
            p_mode,
            q_mode,
            seed,
        })
    }
}

/// Parses `p=learned` / `p=fixed(2.5)` style fields; `Some(None)` means
/// learned, `Some(Some(v))` means fixed.
fn parse_mode(field: &str, prefix: &str) -> Option<Option<f64>> {
    let body = field.strip_prefix(prefix)?;
    if body == "learned" {
        return Some(None);
    }
    let v = body.strip_prefix("fixed(")?.strip_suffix(')')?;
    v.parse().ok().map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_string_is_stable_and_distinct() {
        let a = LayerVariantConfig::default();
        assert_eq!(
            a.variant_string(),
            "rohrer_small:conv:relu:maxpool:none:p=learned:q=learned:seed=0"
        );
        let b = LayerVariantConfig {
            layer_kind: "scs".into(),
            activation: "none".into(),
            ..LayerVariantConfig::default()
        };
        assert_ne!(a.variant_string(), b.variant_string());
    }

    #[test]
    fn variant_string_round_trips() {
        let mut cfg = LayerVariantConfig {
            layer_kind: "scs".into(),
            activation: "none".into(),
            pooling: "maxabspool".into(),
            normalization: "batchnorm".into(),
            p_mode: PMode::Fixed(2.5),
            q_mode: QMode::Fixed(0.0),
            arch_family: "mini_resnet".into(),
            seed: 41,
        };
        let parsed = LayerVariantConfig::from_variant_string(&cfg.variant_string()).unwrap();
        assert_eq!(parsed, cfg);
        cfg.p_mode = PMode::Learned;
        cfg.q_mode = QMode::Learned;
        let parsed = LayerVariantConfig::from_variant_string(&cfg.variant_string()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn malformed_variant_strings_are_rejected() {
        for bad in [
            "",
            "rohrer_small:conv:relu:maxpool:none:p=learned:q=learned",
            "rohrer_small:conv:relu:maxpool:none:p=two:q=learned:seed=0",
            "rohrer_small:conv:relu:maxpool:none:p=learned:q=learned:seed=x",
        ] {
            assert!(LayerVariantConfig::from_variant_string(bad).is_err(), "{bad}");
        }
    }
}
