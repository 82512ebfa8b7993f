use crate::decoder::{
    decoder_step, input_embedding, target_log_prob, DecoderParams, DecoderState, PrevToken,
    SlotMask, SourceCache, StepOutput,
};
use crate::dropout::Dropout;
use crate::encoder::{encode, EncodeOptions, EncodedSource, EncoderMode, EncoderParams};
use crate::error::{Error, Result};
use crate::math::{NodeId, ParamKind, ParamStore, Shape, Tape};
use crate::text::vocab::{Vocabulary, EOS};
use crate::text::Example;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Hidden and embedding size.
    pub dim: usize,
    pub mode: EncoderMode,
    /// When false every copy slot is masked and OOV targets score as UNK.
    pub copy: bool,
}

impl ModelConfig {
    pub fn new(dim: usize, mode: EncoderMode) -> Self {
        ModelConfig {
            dim,
            mode,
            copy: true,
        }
    }
}

/// Read-again encoder plus copy decoder, with all parameters in one store.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

/// An encoded source together with what the decoder needs at every step.
#[derive(Debug, Clone)]
pub struct SourceContext {
    pub tokens: Vec<String>,
    pub encoded: EncodedSource,
    pub cache: SourceCache,
}

impl Model {
    /// All parameters start at zero; see [`crate::trainer::init_params`].
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let mut params = ParamStore::new();
        let embedding = params.add(
            "embedding",
            Shape::Matrix(vocab.len(), config.dim),
            ParamKind::Weight,
        );
        let encoder = EncoderParams::register(&mut params, config.mode, config.dim, embedding);
        let decoder = DecoderParams::register(&mut params, config.dim, vocab.len());
        Ok(Model {
            config,
            vocab,
            params,
            encoder,
            decoder,
        })
    }

    pub fn slot_mask(&self) -> SlotMask {
        SlotMask {
            no_copy: !self.config.copy,
            copy: None,
        }
    }

    pub fn encode(
        &self,
        tape: &mut Tape,
        sentences: &[Vec<String>],
        opts: &EncodeOptions,
        dropout: &mut Dropout,
    ) -> Result<SourceContext> {
        let ids: Vec<Vec<u32>> = sentences.iter().map(|s| self.vocab.lookup(s)).collect();
        let encoded = encode(tape, &self.params, &self.encoder, &ids, opts, dropout)?;
        let cache = SourceCache::new(tape, &self.params, &self.decoder, &encoded)?;
        Ok(SourceContext {
            tokens: sentences.concat(),
            encoded,
            cache,
        })
    }

    pub fn start_state(&self, tape: &mut Tape) -> DecoderState {
        DecoderState::zero(tape, self.config.dim)
    }

    pub fn embed_prev(
        &self,
        tape: &mut Tape,
        src: &SourceContext,
        prev: PrevToken<'_>,
    ) -> Result<NodeId> {
        input_embedding(
            tape,
            &self.params,
            &self.decoder,
            self.encoder.embedding,
            &self.vocab,
            &src.tokens,
            &src.cache,
            prev,
        )
    }

    pub fn step(
        &self,
        tape: &mut Tape,
        src: &SourceContext,
        state: DecoderState,
        y_prev: NodeId,
        dropout: &mut Dropout,
    ) -> Result<StepOutput> {
        decoder_step(
            tape,
            &self.params,
            &self.decoder,
            &src.cache,
            state,
            y_prev,
            &self.slot_mask(),
            dropout,
        )
    }

    /// Teacher-forced negative log-likelihood of `ex.target` followed by EOS.
    /// Returns the summed loss node and the number of scored tokens.
    pub fn example_loss(
        &self,
        tape: &mut Tape,
        ex: &Example,
        opts: &EncodeOptions,
        dropout: &mut Dropout,
    ) -> Result<(NodeId, usize)> {
        let src = self.encode(tape, &ex.source, opts, dropout)?;
        let mut state = self.start_state(tape);
        let mut prev = PrevToken::Bos;
        let mut terms = Vec::with_capacity(ex.target.len() + 1);
        for gold in ex.target.iter().map(String::as_str).chain([EOS]) {
            let y = self.embed_prev(tape, &src, prev)?;
            let x = dropout.apply(tape, y)?;
            let out = self.step(tape, &src, state, x, dropout)?;
            terms.push(target_log_prob(
                tape,
                out.probs,
                &self.vocab,
                &src.tokens,
                gold,
                self.config.copy,
            )?);
            state = out.state;
            prev = PrevToken::Word {
                surface: gold,
                copied_from: None,
            };
        }
        let total = tape.sum(&terms)?;
        Ok((tape.scale(total, -1.0), terms.len()))
    }
}
