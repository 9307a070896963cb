use candle_core::{Device, Tensor};

use super::config::ModelConfig;
use crate::corpus::CharsetTokenizer;
use crate::error::{Error, Result};
use crate::nn::{Ctx, Embedding, Init, ParamBuilder};

/// Character queries `(K, B, d_model)` with their ids and padding mask.
#[derive(Debug, Clone)]
pub struct ContentQuery {
    pub tensor: Tensor,
    /// Padded with the blank id.
    pub ids: Vec<Vec<u32>>,
    pub lengths: Vec<usize>,
}

impl ContentQuery {
    pub fn max_len(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    pub fn batch(&self) -> usize {
        self.ids.len()
    }

    pub fn is_padding(&self, item: usize, pos: usize) -> bool {
        pos >= self.lengths[item]
    }

    /// `(B, K)` with 1 on real characters, 0 on padding.
    pub fn mask(&self) -> Result<Tensor> {
        crate::nn::width_mask(
            &self.lengths,
            self.max_len(),
            self.tensor.dtype(),
            self.tensor.device(),
        )
    }

    /// Additive `(B, K)` attention mask: 0 on characters, a large negative on padding.
    pub fn key_padding_mask(&self) -> Result<Tensor> {
        Ok(self.mask()?.affine(1e9, -1e9)?)
    }
}

/// Token embedding plus learned absolute position embedding.
#[derive(Clone)]
pub struct ContentEncoder {
    embed: Embedding,
    pos: Tensor,
    max_len: usize,
}

impl ContentEncoder {
    pub fn new(pb: &mut ParamBuilder, cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            embed: Embedding::new(&mut pb.pp("embed"), cfg.num_classes, cfg.d_model)?,
            pos: pb.param(
                "pos_embed",
                &[cfg.max_text_len, cfg.d_model],
                Init::TruncNormal(0.02),
            )?,
            max_len: cfg.max_text_len,
        })
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embed
    }

    pub fn encode(
        &self,
        texts: &[&str],
        tokenizer: &CharsetTokenizer,
        ctx: &Ctx,
    ) -> Result<ContentQuery> {
        if texts.is_empty() {
            return Err(Error::Empty("text batch".into()));
        }
        let mut encoded = Vec::with_capacity(texts.len());
        for text in texts {
            let ids = tokenizer.encode(text)?;
            if ids.is_empty() {
                return Err(Error::Empty("target text".into()));
            }
            if ids.len() > self.max_len {
                return Err(Error::TextTooLong {
                    len: ids.len(),
                    max: self.max_len,
                });
            }
            encoded.push(ids);
        }
        let k = encoded.iter().map(Vec::len).max().unwrap_or(0);
        let lengths: Vec<usize> = encoded.iter().map(Vec::len).collect();
        let blank = tokenizer.blank_index();
        for ids in &mut encoded {
            ids.resize(k, blank);
        }
        let b = encoded.len();
        let flat: Vec<u32> = (0..k)
            .flat_map(|t| encoded.iter().map(move |ids| ids[t]))
            .collect();
        let ids_t = Tensor::from_vec(flat, (k * b,), &Device::Cpu)?;
        let d = ctx.p(&self.pos).dims()[1];
        let tokens = self.embed.forward(&ids_t, ctx)?.reshape((k, b, d))?;
        let pos = ctx.p(&self.pos).narrow(0, 0, k)?.unsqueeze(1)?;
        Ok(ContentQuery {
            tensor: tokens.broadcast_add(&pos)?,
            ids: encoded,
            lengths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamStore;
    use candle_core::DType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(dtype: DType) -> (ContentEncoder, ParamStore) {
        let cfg = ModelConfig {
            d_model: 16,
            ..ModelConfig::desk()
        };
        let mut store = ParamStore::new(dtype);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc =
            ContentEncoder::new(&mut store.builder(&mut rng).pp("content_encoder"), &cfg).unwrap();
        (enc, store)
    }

    #[test]
    fn ragged_batch_is_padded() {
        let (enc, _) = encoder(DType::F32);
        let t = CharsetTokenizer::ascii();
        let q = enc.encode(&["ab", "a"], &t, &Ctx::eval()).unwrap();
        assert_eq!(q.tensor.dims(), &[2, 2, 16]);
        assert!(q.is_padding(1, 1));
        assert!(!q.is_padding(0, 1));
        let m: Vec<Vec<f32>> = q.mask().unwrap().to_vec2().unwrap();
        assert_eq!(m, vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn order_changes_the_queries() {
        let (enc, _) = encoder(DType::F64);
        let t = CharsetTokenizer::ascii();
        let ab = enc.encode(&["ab"], &t, &Ctx::eval()).unwrap().tensor;
        let ba = enc.encode(&["ba"], &t, &Ctx::eval()).unwrap().tensor;
        let diff: f64 = (ab - ba)
            .unwrap()
            .abs()
            .unwrap()
            .max_all()
            .unwrap()
            .to_scalar()
            .unwrap();
        assert!(diff > 0.0);
    }

    #[test]
    fn duplicate_items_match() {
        let (enc, _) = encoder(DType::F32);
        let t = CharsetTokenizer::ascii();
        let q = enc.encode(&["hey", "hey"], &t, &Ctx::eval()).unwrap();
        let a: Vec<Vec<f32>> = q
            .tensor
            .narrow(1, 0, 1)
            .unwrap()
            .squeeze(1)
            .unwrap()
            .to_vec2()
            .unwrap();
        let b: Vec<Vec<f32>> = q
            .tensor
            .narrow(1, 1, 1)
            .unwrap()
            .squeeze(1)
            .unwrap()
            .to_vec2()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_text() {
        let (enc, _) = encoder(DType::F32);
        let t = CharsetTokenizer::ascii();
        match enc.encode(&["caf\u{e9}"], &t, &Ctx::eval()) {
            Err(Error::OutOfCharset { ch }) => assert_eq!(ch, '\u{e9}'),
            other => panic!("unexpected {other:?}"),
        }
        let long = "x".repeat(33);
        assert!(matches!(
            enc.encode(&[long.as_str()], &t, &Ctx::eval()),
            Err(Error::TextTooLong { len: 33, max: 32 })
        ));
    }

    #[test]
    fn gradient_reaches_only_used_rows() {
        let (enc, store) = encoder(DType::F64);
        let t = CharsetTokenizer::ascii();
        let q = enc.encode(&["aba"], &t, &Ctx::eval()).unwrap();
        let grads = q
            .tensor
            .sqr()
            .unwrap()
            .sum_all()
            .unwrap()
            .backward()
            .unwrap();
        let table = store.get("content_encoder.embed.weight").unwrap();
        let g: Vec<Vec<f64>> = grads.get(table.as_tensor()).unwrap().to_vec2().unwrap();
        let used = [
            t.encode("a").unwrap()[0] as usize,
            t.encode("b").unwrap()[0] as usize,
        ];
        for (row, values) in g.iter().enumerate() {
            let norm: f64 = values.iter().map(|v| v * v).sum();
            assert_eq!(norm > 0.0, used.contains(&row), "row {row}");
        }
    }
}
