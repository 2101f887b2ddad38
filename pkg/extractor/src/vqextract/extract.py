"""Run a wav2vec2-family checkpoint over a labeled WAV manifest and emit an
SPD1 dataset: per-frame context features C plus hard quantizer indices Q."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoConfig, Wav2Vec2ForPreTraining

from . import spd1
from .audio import AudioError, load_wav

SAMPLE_RATE = 16000


class UnsupportedModelError(ValueError):
    """Checkpoint has no vector-quantizer module, so Q cannot be extracted."""


class ManifestError(ValueError):
    """Malformed manifest file."""


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: str
    label_name: str


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Tab-separated manifest: audio path, label string. One entry per line."""
    entries: list[ManifestEntry] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2 or not cells[0] or not cells[1]:
                raise ManifestError(f"manifest line {lineno}: expected "
                                    f"<audio path>\\t<label>, got {line!r}")
            entries.append(ManifestEntry(cells[0], cells[1]))
    if not entries:
        raise ManifestError(f"manifest {path} contains no entries")
    return entries


class QuantizedExtractor:
    """Wraps a checkpoint exposing both transformer states and a quantizer."""

    def __init__(self, model_id: str, layer: int | None = None):
        config = AutoConfig.from_pretrained(model_id)
        if not (hasattr(config, "num_codevector_groups")
                and hasattr(config, "num_codevectors_per_group")):
            raise UnsupportedModelError(
                f"checkpoint {model_id!r} ({config.model_type}) has no embedded "
                f"vector-quantizer; cannot extract Q")
        self.model = Wav2Vec2ForPreTraining.from_pretrained(model_id).eval()
        self.config = self.model.config
        self.G = int(self.config.num_codevector_groups)
        self.V = int(self.config.num_codevectors_per_group)
        self.F = int(self.config.hidden_size)
        n_states = self.config.num_hidden_layers + 1  # embeddings + each block
        self.layer = n_states - 1 if layer is None else layer
        if not 0 <= self.layer < n_states:
            raise ValueError(f"layer {layer} outside [0, {n_states})")

    @torch.no_grad()
    def extract_batch(self, waves: list[np.ndarray]) -> list[tuple[np.ndarray, np.ndarray]]:
        """(C, Q) per input wave; inputs may have different lengths."""
        lengths = torch.tensor([w.size for w in waves])
        padded = torch.zeros(len(waves), int(lengths.max()))
        mask = torch.zeros_like(padded, dtype=torch.long)
        for i, w in enumerate(waves):
            x = torch.from_numpy(w.astype(np.float32))
            x = (x - x.mean()) / (x.std() + 1e-7)
            padded[i, : w.size] = x
            mask[i, : w.size] = 1
        out = self.model.wav2vec2(padded, attention_mask=mask, output_hidden_states=True)
        C = out.hidden_states[self.layer]                        # (B, T, F)
        logits = self.model.quantizer.weight_proj(out.extract_features)
        Q = logits.view(C.shape[0], C.shape[1], self.G, self.V).argmax(-1)
        frame_counts = self.model._get_feat_extract_output_lengths(lengths)
        results = []
        for i, T in enumerate(frame_counts.tolist()):
            results.append((C[i, :T].numpy().astype(np.float32),
                            Q[i, :T].numpy().astype(np.uint16)))
        return results


@dataclass
class ExtractionSummary:
    n_written: int
    label_names: list[str]
    failures: list[tuple[str, str]] = field(default_factory=list)


def extract(manifest_path: str | Path, model_id: str, out_path: str | Path,
            layer: int | None = None, batch_size: int = 8) -> ExtractionSummary:
    """Extract every manifest entry; per-file failures are recorded and skipped."""
    entries = read_manifest(manifest_path)
    extractor = QuantizedExtractor(model_id, layer)
    label_names = sorted({e.label_name for e in entries})
    label_ids = {name: i for i, name in enumerate(label_names)}

    records: list[spd1.Record] = []
    failures: list[tuple[str, str]] = []
    batch: list[tuple[ManifestEntry, np.ndarray]] = []

    def flush() -> None:
        if not batch:
            return
        for (entry, _), (C, Q) in zip(batch, extractor.extract_batch([w for _, w in batch])):
            records.append(spd1.Record(entry.audio_path, label_ids[entry.label_name], C, Q))
        batch.clear()

    for entry in entries:
        try:
            wave = load_wav(entry.audio_path, SAMPLE_RATE)
        except AudioError as exc:
            failures.append((entry.audio_path, str(exc)))
            continue
        batch.append((entry, wave))
        if len(batch) >= batch_size:
            flush()
    flush()

    header = spd1.Header(F=extractor.F, G=extractor.G, V=extractor.V,
                         L=len(label_names), N=len(records))
    spd1.save(out_path, records, header)
    spd1.save_label_names(out_path, label_names)
    Path(f"{out_path}.meta.txt").write_text(
        f"model={model_id}\nlayer={extractor.layer}\nsample_rate={SAMPLE_RATE}\n",
        encoding="utf-8")
    return ExtractionSummary(len(records), label_names, failures)
