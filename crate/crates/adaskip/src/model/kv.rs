/// Per-layer key/value cache.
///
/// Storage grows only when an attention sublayer actually executes: a
/// skipped sublayer writes nothing, so cache size is a direct measure of
/// attention work avoided. `filled(layer)` can therefore lag behind
/// `tokens_seen` on layers whose attention was skipped.
#[derive(Debug, Clone)]
pub struct KvCache {
    d_model: usize,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    tokens_seen: usize,
}

impl KvCache {
    pub fn new(n_layers: usize, d_model: usize) -> Self {
        KvCache {
            d_model,
            keys: vec![Vec::new(); n_layers],
            values: vec![Vec::new(); n_layers],
            tokens_seen: 0,
        }
    }

    /// Positions with stored entries for one layer.
    pub fn filled(&self, layer: usize) -> usize {
        self.keys[layer].len() / self.d_model
    }

    /// Append one position's key and value rows for a layer.
    pub fn push(&mut self, layer: usize, k: &[f64], v: &[f64]) {
        assert_eq!(k.len(), self.d_model, "kv push: key width mismatch");
        assert_eq!(v.len(), self.d_model, "kv push: value width mismatch");
        self.keys[layer].extend_from_slice(k);
        self.values[layer].extend_from_slice(v);
    }

    pub fn keys(&self, layer: usize) -> &[f64] {
        &self.keys[layer]
    }

    pub fn values(&self, layer: usize) -> &[f64] {
        &self.values[layer]
    }

    /// Total positions the model has processed, regardless of skips.
    pub fn tokens_seen(&self) -> usize {
        self.tokens_seen
    }

    pub fn advance_token(&mut self) {
        self.tokens_seen += 1;
    }

    /// Total stored floats across keys and values, for memory accounting.
    pub fn stored_floats(&self) -> usize {
        self.keys.iter().map(Vec::len).sum::<usize>()
            + self.values.iter().map(Vec::len).sum::<usize>()
    }
}
