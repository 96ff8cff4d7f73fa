//! Structural summary of a built model: layer names, shapes, parameter
//! counts and compatibility hash for checkpoints.

/// One entry per layer in architecture order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerInfo {
    pub name: String,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub param_count: usize,
}

/// Full structural summary, produced as a side effect of building.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub arch_family: String,
    pub variant: String,
    pub layers: Vec<LayerInfo>,
    pub total_params: usize,
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
    /// Warnings about degenerate configurations (e.g. a linear stack).
    pub flags: Vec<String>,
}

impl ModelDescriptor {
    /// 64-bit FNV-1a over the structural fields. Two models with the
    /// same hash have identical layer layouts, so a checkpoint written
    /// by one loads into the other.
    pub fn structure_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.update(self.arch_family.as_bytes());
        h.update(&[0]);
        for l in &self.layers {
            h.update(l.name.as_bytes());
            h.update(&[1]);
            h.update(l.kind.as_bytes());
            h.update(&[2]);
            for &d in &l.output_shape {
                h.update(&(d as u64).to_le_bytes());
            }
            h.update(&(l.param_count as u64).to_le_bytes());
        }
        h.update(&(self.total_params as u64).to_le_bytes());
        h.update(&(self.num_classes as u64).to_le_bytes());
        h.finish()
    }

    /// Multi-line human-readable table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} ({} params, input {:?}, {} classes)\n",
            self.variant, self.total_params, self.input_shape, self.num_classes
        ));
        for l in &self.layers {
            out.push_str(&format!(
                "  {:<28} {:<12} {:>7} params  out={:?}\n",
                l.name, l.kind, l.param_count, l.output_shape
            ));
        }
        for f in &self.flags {
            out.push_str(&format!("  warning: {f}\n"));
        }
        out
    }
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf29ce484222325)
    }
    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn finish(&self) -> u64 {
        self.0
    }
}
