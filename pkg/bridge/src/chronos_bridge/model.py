"""The served model: a T5 seq2seq over tokenized series, Chronos style.

Forecasting draws `num_samples` one-step sample paths per series and returns
their arithmetic mean.  Fine-tuning runs a fixed number of AdamW steps per
asset subgroup, starting from whatever weights the process currently holds
(day two trains on top of day one), with a full rollback when the loss goes
non-finite.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from transformers import T5Config, T5ForConditionalGeneration

from .tokenizer import MeanScaleUniformBins

logger = logging.getLogger(__name__)

DEFAULT_MODEL_ID = "amazon/chronos-t5-tiny"

# architecture presets for building a model without downloading weights;
# "tiny" mirrors the t5-efficient-tiny dimensions the paper's model used
ARCH_PRESETS = {
    "tiny": dict(d_model=256, d_kv=64, d_ff=1024, num_layers=4,
                 num_decoder_layers=4, num_heads=4),
    "micro": dict(d_model=64, d_kv=16, d_ff=128, num_layers=2,
                  num_decoder_layers=2, num_heads=2),
}


class ModelLoadError(Exception):
    """The requested weights could not be obtained."""


class FinetuneDiverged(Exception):
    """Non-finite training loss; weights were rolled back."""


@dataclass
class FinetunePlan:
    """One day's training recipe."""

    tau: int                      # optimizer steps per subgroup (5/15/40 in the paper)
    subgroups: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 32
    context_length: int = 99
    prediction_length: int = 1    # fixed; one-day horizon only

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.prediction_length != 1:
            raise ValueError("prediction_length is fixed at 1")
        if self.subgroups < 1 or self.batch_size < 1 or self.context_length < 1:
            raise ValueError("subgroups, batch_size, context_length must be positive")


@dataclass
class GenerationSettings:
    temperature: float = 1.0
    top_k: int = 50
    top_p: float = 1.0


class ChronosBridgeModel:
    """Tokenizer + T5 + sampling/training plumbing behind the protocol."""

    def __init__(self, model: T5ForConditionalGeneration, model_id: str,
                 device: str = "cpu",
                 generation: GenerationSettings | None = None):
        self.model = model.to(device)
        self.model_id = model_id
        self.device = device
        self.generation = generation or GenerationSettings()
        self.tokenizer = MeanScaleUniformBins(n_tokens=model.config.vocab_size)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_pretrained(cls, model_id: str = DEFAULT_MODEL_ID,
                        device: str = "cpu") -> "ChronosBridgeModel":
        """Load pretrained weights from a local path or the HF hub."""
        try:
            model = T5ForConditionalGeneration.from_pretrained(model_id)
        except Exception as exc:  # hub/network/file errors vary wildly
            raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc
        if model.config.vocab_size < 16:
            raise ModelLoadError(f"{model_id!r} does not look like a series model")
        return cls(model, model_id=model_id, device=device)

    @classmethod
    def random_init(cls, arch: str = "tiny", seed: int = 1234,
                    device: str = "cpu") -> "ChronosBridgeModel":
        """Build the architecture locally with seeded random weights.

        Useful where the pretrained checkpoint is unreachable: the protocol,
        sampling, and training machinery are identical, only the knowledge
        inside the weights is missing.
        """
        if arch not in ARCH_PRESETS:
            raise ModelLoadError(f"unknown arch {arch!r}; use one of {list(ARCH_PRESETS)}")
        config = T5Config(
            vocab_size=4096,
            pad_token_id=0,
            eos_token_id=1,
            decoder_start_token_id=0,
            tie_word_embeddings=False,
            feed_forward_proj="relu",
            dropout_rate=0.1,
            **ARCH_PRESETS[arch],
        )
        torch.manual_seed(seed)
        model = T5ForConditionalGeneration(config)
        return cls(model, model_id=f"random-init/{arch}", device=device)

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.model.parameters())

    # -- inference ------------------------------------------------------------

    def _encode_batch(self, contexts: list[np.ndarray]) -> tuple[torch.Tensor, torch.Tensor, list[float]]:
        """Left-padded token batch plus the per-series scales."""
        tok = self.tokenizer
        scales = [tok.scale_of(c) for c in contexts]
        width = max(len(c) for c in contexts) + 1  # room for EOS
        ids = torch.full((len(contexts), width), tok.pad_id, dtype=torch.long)
        mask = torch.zeros((len(contexts), width), dtype=torch.long)
        for i, (context, scale) in enumerate(zip(contexts, scales)):
            body = tok.encode_values(np.asarray(context, dtype=np.float64), scale)
            row = np.concatenate([body, [tok.eos_id]])
            ids[i, width - len(row):] = torch.as_tensor(row, dtype=torch.long)
            mask[i, width - len(row):] = 1
        return ids.to(self.device), mask.to(self.device), scales

    def forecast(self, contexts: list[np.ndarray], num_samples: int = 20,
                 seed: int = 0, batch_size: int = 64) -> np.ndarray:
        """Mean of `num_samples` sampled one-step forecasts per series."""
        if num_samples < 1:
            raise ValueError("num_samples must be positive")
        gen = self.generation
        out = np.empty(len(contexts), dtype=np.float64)
        torch.manual_seed(seed)
        self.model.eval()
        with torch.no_grad():
            for lo in range(0, len(contexts), batch_size):
                chunk = contexts[lo : lo + batch_size]
                ids, mask, scales = self._encode_batch(chunk)
                sequences = self.model.generate(
                    input_ids=ids,
                    attention_mask=mask,
                    max_new_tokens=1,
                    do_sample=True,
                    temperature=gen.temperature,
                    top_k=gen.top_k,
                    top_p=gen.top_p,
                    num_return_sequences=num_samples,
                )
                tokens = sequences[:, -1].reshape(len(chunk), num_samples)
                for i, scale in enumerate(scales):
                    vals = [self.tokenizer.decode_token(int(t), scale)
                            for t in tokens[i]]
                    out[lo + i] = float(np.mean(vals))
        return out

    # -- training --------------------------------------------------------------

    def _training_batch(self, pool: list[np.ndarray], plan: FinetunePlan,
                        rng: np.random.Generator) -> dict[str, torch.Tensor]:
        tok = self.tokenizer
        picks = rng.integers(0, len(pool), size=plan.batch_size)
        ctx_rows, label_rows = [], []
        for k in picks:
            series = pool[k]
            context = series[: plan.context_length]
            target = series[plan.context_length : plan.context_length + 1]
            scale = tok.scale_of(context)
            ctx_rows.append(np.concatenate(
                [tok.encode_values(context, scale), [tok.eos_id]]))
            label_rows.append(np.concatenate(
                [tok.encode_values(target, scale), [tok.eos_id]]))
        ids = torch.as_tensor(np.stack(ctx_rows), dtype=torch.long, device=self.device)
        labels = torch.as_tensor(np.stack(label_rows), dtype=torch.long, device=self.device)
        mask = torch.ones_like(ids)
        return {"input_ids": ids, "attention_mask": mask, "labels": labels}

    def finetune_day(self, windows: dict[str, np.ndarray], plan: FinetunePlan,
                     seed: int = 0, fault: str | None = None) -> tuple[int, float]:
        """Run one day of naive fine-tuning; returns (steps_done, last_loss).

        Assets partition into `plan.subgroups` contiguous slices of the sorted
        id list; each nonempty slice gets `plan.tau` AdamW steps with a linear
        learning-rate decay and a fresh optimizer (state resets daily).  A
        non-finite loss rolls every weight back to the pre-call snapshot and
        raises FinetuneDiverged.
        """
        min_len = plan.context_length + plan.prediction_length
        for asset, series in windows.items():
            series = np.asarray(series, dtype=np.float64)
            if len(series) < min_len:
                raise ValueError(f"{asset}: window shorter than {min_len}")
            if not np.all(np.isfinite(series)):
                raise ValueError(f"{asset}: non-finite values")

        snapshot = {k: v.detach().clone() for k, v in self.model.state_dict().items()}
        assets = sorted(windows)
        slice_size = math.ceil(len(assets) / plan.subgroups)
        rng = np.random.default_rng(seed)
        steps_done = 0
        last_loss = float("nan")
        self.model.train()
        try:
            for g in range(plan.subgroups):
                members = assets[g * slice_size : (g + 1) * slice_size]
                if not members or plan.tau == 0:
                    continue
                pool = [np.asarray(windows[a], dtype=np.float64) for a in members]
                optimizer = torch.optim.AdamW(self.model.parameters(),
                                              lr=plan.learning_rate)
                scheduler = torch.optim.lr_scheduler.LambdaLR(
                    optimizer, lambda step: max(0.0, 1.0 - step / plan.tau))
                for _ in range(plan.tau):
                    batch = self._training_batch(pool, plan, rng)
                    loss = self.model(**batch).loss
                    if fault == "nan-loss":
                        loss = loss * float("nan")
                    if not torch.isfinite(loss):
                        raise FinetuneDiverged(
                            f"non-finite loss in subgroup {g} after {steps_done} steps")
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                    scheduler.step()
                    steps_done += 1
                    last_loss = float(loss.detach())
        except FinetuneDiverged:
            self.model.load_state_dict(snapshot)
            raise
        finally:
            self.model.eval()
        return steps_done, last_loss
