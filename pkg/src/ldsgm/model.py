"""Parameter layout and forward passes of the full label sequence model."""
from __future__ import annotations

import numpy as np

from . import decoder as dec
from . import encoder as enc
from .corpus import Batch
from .encoder import EncoderConfig, EncoderOutput
from .hierarchy import LabelHierarchy, build_adjacency, normalized_adjacency
from .numerics import ParamStore

SCHEMES = ("topdown", "bottomup", "ensemble", "multitask")


class LDSGM:
    """Encoder, top-down decoder (``dec.*``) and bottom-up auxiliary decoder (``aux.*``).

    With ``multitask_baseline`` the decoders are replaced by per-level softmax
    heads (``mt.*``) in the decoder partition.
    """

    def __init__(self, hierarchy: LabelHierarchy, vocab_size: int, config: EncoderConfig, seed=0):
        self.hierarchy = hierarchy
        self.config = config
        self.vocab_size = vocab_size
        self.params = ParamStore()
        rng = np.random.default_rng(seed)
        enc.init_encoder(self.params, config, vocab_size, hierarchy, rng)
        if config.multitask_baseline:
            dec.init_multitask(self.params, config, hierarchy, rng)
        else:
            dec.init_decoder(self.params, "dec", "decoder", config, hierarchy, rng)
            dec.init_decoder(self.params, "aux", "aux_decoder", config, hierarchy, rng)
        adjacency = build_adjacency(hierarchy)
        self.adjacency = normalized_adjacency(adjacency) if config.normalize_adjacency else adjacency

    def encode(self, batch: Batch, training=False, rng=None) -> EncoderOutput:
        return enc.encode(batch, self.hierarchy, self.params, self.config, self.adjacency, training, rng)

    def topdown(self, encoded: EncoderOutput, gold=None):
        return dec.decode_topdown(encoded, self.params, self.hierarchy, self.config, gold)

    def bottomup(self, encoded: EncoderOutput, gold=None):
        return dec.decode_bottomup(encoded, self.params, self.hierarchy, self.config, gold)

    def multitask(self, encoded: EncoderOutput):
        return dec.multitask_softmax_predict(encoded, self.params)

    def distributions(self, batch: Batch, scheme="topdown") -> dec.LevelDistributions:
        """Inference-mode distributions for one decoding scheme."""
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        if (scheme == "multitask") != self.config.multitask_baseline:
            raise ValueError(f"scheme {scheme!r} is not available for this model")
        encoded = self.encode(batch)
        if scheme == "multitask":
            return self.multitask(encoded)
        if scheme == "topdown":
            return self.topdown(encoded)
        if scheme == "bottomup":
            return self.bottomup(encoded)
        return dec.ensemble_predict(self.topdown(encoded), self.bottomup(encoded))

    @property
    def default_scheme(self) -> str:
        return "multitask" if self.config.multitask_baseline else "topdown"
