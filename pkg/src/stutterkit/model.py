"""Encoder-agnostic dysfluency classifier.

A frame-level encoder turns 16 kHz audio into L x D features at roughly one
frame per 20 ms (L = floor(samples / 320)).  Features are mean-pooled over
time into a single vector feeding two linear heads: a 5-way sigmoid
multi-label head for the dysfluency classes and an auxiliary K-way head for
language detection, each class/language scored independently.

Two backends satisfy the same frame-rate contract:

* ``reference_tiny``: the in-package numpy encoder (strided patch
  convolutions plus a couple of self-attention blocks), fully
  differentiable here and used for all tests and desk-scale training.
* ``external_pretrained``: wraps a pretrained speech encoder loaded from
  ``weights_source`` via optional third-party packages; imports happen only
  when this backend is requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tinynet
from .audio import CANONICAL_RATE_HZ, WaveformBuffer
from .corpus import CLASS_NAMES, DEFAULT_LANGUAGES, NUM_CLASSES

BACKENDS = ("reference_tiny", "external_pretrained")
CONV_STRIDES = (8, 5, 4, 2)  # product 320 samples = 20 ms at 16 kHz
SAMPLES_PER_FRAME = int(np.prod(CONV_STRIDES))
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture selector for the encoder."""

    backend: str = "reference_tiny"
    hidden_size: int = 64
    conv_channels: tuple[int, ...] = (32, 48, 64, 64)
    n_blocks: int = 2
    n_heads: int = 4
    mlp_ratio: int = 2
    weights_source: str | None = None

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r} (expected one of {BACKENDS})")
        if self.backend == "external_pretrained" and not self.weights_source:
            raise ValueError("external_pretrained backend requires weights_source")
        if self.backend == "reference_tiny":
            if len(self.conv_channels) != len(CONV_STRIDES):
                raise ValueError(
                    f"conv_channels needs {len(CONV_STRIDES)} entries, got {len(self.conv_channels)}"
                )
            if self.conv_channels[-1] != self.hidden_size:
                raise ValueError("last conv channel count must equal hidden_size")
            if self.hidden_size % self.n_heads:
                raise ValueError("hidden_size must be divisible by n_heads")

    @property
    def frame_rate_hz(self) -> float:
        return CANONICAL_RATE_HZ / SAMPLES_PER_FRAME

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "hidden_size": self.hidden_size,
            "conv_channels": list(self.conv_channels),
            "n_blocks": self.n_blocks,
            "n_heads": self.n_heads,
            "mlp_ratio": self.mlp_ratio,
            "weights_source": self.weights_source,
        }

    @staticmethod
    def from_dict(d: dict) -> "EncoderSpec":
        return EncoderSpec(
            backend=d["backend"],
            hidden_size=int(d["hidden_size"]),
            conv_channels=tuple(int(c) for c in d["conv_channels"]),
            n_blocks=int(d["n_blocks"]),
            n_heads=int(d["n_heads"]),
            mlp_ratio=int(d["mlp_ratio"]),
            weights_source=d.get("weights_source"),
        )


# Small spec for fast tests and demos; same contracts as the default.
TINY_TEST_SPEC = EncoderSpec(
    hidden_size=12, conv_channels=(4, 6, 8, 12), n_blocks=1, n_heads=2, mlp_ratio=2,
)


@dataclass(frozen=True)
class FrameFeatures:
    """L x D feature matrix with its frame rate."""

    frames: np.ndarray
    frame_rate_hz: float

    def __post_init__(self) -> None:
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError(f"frames must be a non-empty L x D matrix, got {self.frames.shape}")


@dataclass(frozen=True)
class PredictionLogits:
    """Raw head outputs: 5 main class logits plus K language logits."""

    main: np.ndarray
    aux: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.main) != (NUM_CLASSES,):
            raise ValueError(f"main logits must have length {NUM_CLASSES}")
        if np.ndim(self.aux) != 1 or np.size(self.aux) < 1:
            raise ValueError("aux logits must be a non-empty vector")


def pool_mean(features: FrameFeatures) -> np.ndarray:
    """Column-wise arithmetic mean over time."""
    return features.frames.mean(axis=0)


def predict_probs(logits: PredictionLogits) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise logistic transform of both heads.

    Each class and each language is scored independently, so neither output
    vector is a normalized distribution.
    """
    if not (np.all(np.isfinite(logits.main)) and np.all(np.isfinite(logits.aux))):
        raise ValueError("logits must be finite")
    return tinynet.sigmoid(logits.main), tinynet.sigmoid(logits.aux)


class DysfluencyModel:
    """Encoder plus mean pooling plus the two classification heads."""

    HEAD_INIT_SCALE = 1e-3  # small uniform head weights, zero biases

    def __init__(
        self,
        spec: EncoderSpec = EncoderSpec(),
        languages: tuple[str, ...] = DEFAULT_LANGUAGES,
        seed: int = 0,
    ) -> None:
        self.spec = spec
        self.languages = tuple(languages)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._net = tinynet.Layer()
        if spec.backend == "reference_tiny":
            c_in = 1
            for i, (k, c_out) in enumerate(zip(CONV_STRIDES, spec.conv_channels)):
                self._net.add_child(f"stage{i}", tinynet.ConvStage(k, c_in, c_out, rng))
                c_in = c_out
            for i in range(spec.n_blocks):
                self._net.add_child(
                    f"block{i}",
                    tinynet.TransformerBlock(spec.hidden_size, spec.n_heads, spec.mlp_ratio, rng),
                )
            self._net.add_child("final_norm", tinynet.LayerNorm(spec.hidden_size))
            self._external = None
        else:
            self._external = _load_external_encoder(spec)
        self._net.add_child(
            "head_main",
            tinynet.Linear(spec.hidden_size, NUM_CLASSES, rng, weight_scale=self.HEAD_INIT_SCALE),
        )
        self._net.add_child(
            "head_aux",
            tinynet.Linear(spec.hidden_size, len(self.languages), rng,
                           weight_scale=self.HEAD_INIT_SCALE),
        )

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        return self._net.named_params()

    def gradients(self) -> dict[str, np.ndarray]:
        return self._net.named_grads()

    def zero_grads(self) -> None:
        self._net.zero_grads()

    def n_parameters(self) -> int:
        return sum(v.size for v in self.parameters().values())

    # -- forward / backward -------------------------------------------------

    def encode_batch(self, waves: np.ndarray, lengths: np.ndarray):
        """Run the encoder on a zero-padded batch.

        waves: (B, T_max) float64; lengths: true sample counts per row.
        Returns (frames (B, L, D), mask (B, L) of valid frames, cache).
        The patch convolutions never mix samples across frame boundaries,
        so frame j of a clip is valid iff j < floor(length / 320).
        """
        waves = np.asarray(waves, dtype=np.float64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if waves.ndim != 2:
            raise ValueError(f"waves must be (B, T), got shape {waves.shape}")
        if np.any(lengths < SAMPLES_PER_FRAME):
            raise ValueError(
                f"every clip needs at least {SAMPLES_PER_FRAME} samples (one frame)"
            )
        if self._external is not None:
            raise NotImplementedError(
                "batched training is only supported on the reference_tiny backend"
            )
        x = waves[:, :, None]
        caches = []
        for i in range(len(CONV_STRIDES)):
            x, c = self._net._children[f"stage{i}"].forward(x)
            caches.append(("stage", i, c))
        n_frames = lengths // SAMPLES_PER_FRAME
        mask = np.arange(x.shape[1])[None, :] < np.minimum(n_frames, x.shape[1])[:, None]
        for i in range(self.spec.n_blocks):
            x, c = self._net._children[f"block{i}"].forward(x, mask)
            caches.append(("block", i, c))
        x, c = self._net._children["final_norm"].forward(x)
        caches.append(("final_norm", None, c))
        return x, mask, caches

    def forward_batch(self, waves: np.ndarray, lengths: np.ndarray):
        """Full pass to logits; returns (main (B,5), aux (B,K), cache)."""
        frames, mask, enc_cache = self.encode_batch(waves, lengths)
        pooled, pool_cache = tinynet.masked_mean_pool(frames, mask)
        main, c_main = self._net._children["head_main"].forward(pooled)
        aux, c_aux = self._net._children["head_aux"].forward(pooled)
        return main, aux, (enc_cache, pool_cache, c_main, c_aux)

    def backward_batch(self, dmain: np.ndarray, daux: np.ndarray, cache) -> None:
        """Accumulate parameter gradients from head-logit gradients."""
        enc_cache, pool_cache, c_main, c_aux = cache
        dpooled = self._net._children["head_main"].backward(dmain, c_main)
        dpooled = dpooled + self._net._children["head_aux"].backward(daux, c_aux)
        dx = tinynet.masked_mean_pool_backward(dpooled, pool_cache)
        for kind, i, c in reversed(enc_cache):
            if kind == "final_norm":
                dx = self._net._children["final_norm"].backward(dx, c)
            elif kind == "block":
                dx = self._net._children[f"block{i}"].backward(dx, c)
            else:
                dx = self._net._children[f"stage{i}"].backward(dx, c)

    # -- single-clip convenience --------------------------------------------

    def encode(self, wave: WaveformBuffer) -> FrameFeatures:
        """Frame features for one clip."""
        if wave.sample_rate_hz != CANONICAL_RATE_HZ:
            raise ValueError(
                f"buffer at {wave.sample_rate_hz} Hz, pipeline requires {CANONICAL_RATE_HZ} Hz"
            )
        if wave.samples.size < SAMPLES_PER_FRAME:
            raise ValueError(f"input shorter than one frame ({SAMPLES_PER_FRAME} samples)")
        if self._external is not None:
            frames = self._external.encode(wave.samples)
            return FrameFeatures(np.asarray(frames, dtype=np.float64), self.spec.frame_rate_hz)
        batch = wave.samples[None, :]
        frames, mask, _ = self.encode_batch(batch, np.array([wave.samples.size]))
        return FrameFeatures(frames[0][mask[0]], self.spec.frame_rate_hz)

    def forward(self, wave: WaveformBuffer) -> PredictionLogits:
        """Logits for one clip."""
        features = self.encode(wave)
        pooled = pool_mean(features)
        main, _ = self._net._children["head_main"].forward(pooled)
        aux, _ = self._net._children["head_aux"].forward(pooled)
        return PredictionLogits(main=main, aux=aux)

    def predict(self, wave: WaveformBuffer) -> tuple[np.ndarray, np.ndarray]:
        """Per-class and per-language probabilities for one clip."""
        return predict_probs(self.forward(wave))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(
    model: DysfluencyModel,
    path: str | Path,
    window_s: float,
    overlap_s: float,
    extra: dict | None = None,
) -> None:
    """Write a self-describing npz checkpoint.

    Holds the encoder spec, all parameters, the label-class and language
    orderings, and the pipeline constants needed to reproduce inference.
    """
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder_spec": model.spec.to_dict(),
        "class_names": list(CLASS_NAMES),
        "languages": list(model.languages),
        "sample_rate_hz": CANONICAL_RATE_HZ,
        "window_s": window_s,
        "overlap_s": overlap_s,
        "seed": model.seed,
    }
    if extra:
        meta["extra"] = extra
    arrays = {f"param:{k}": v for k, v in model.parameters().items()}
    arrays["__meta__"] = np.array(json.dumps(meta))
    np.savez(Path(path), **arrays)


def load_checkpoint(path: str | Path) -> tuple[DysfluencyModel, dict]:
    """Rebuild a model from a checkpoint; validates orderings and shapes."""
    with np.load(Path(path), allow_pickle=False) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path}: not a model checkpoint (missing metadata)")
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint format {meta.get('format_version')!r}"
            )
        if tuple(meta["class_names"]) != CLASS_NAMES:
            raise ValueError(
                f"{path}: class ordering {meta['class_names']} does not match "
                f"the manifest schema {list(CLASS_NAMES)}"
            )
        if meta["sample_rate_hz"] != CANONICAL_RATE_HZ:
            raise ValueError(f"{path}: checkpoint at {meta['sample_rate_hz']} Hz")
        spec = EncoderSpec.from_dict(meta["encoder_spec"])
        model = DysfluencyModel(spec, languages=tuple(meta["languages"]),
                                seed=int(meta.get("seed", 0)))
        params = model.parameters()
        stored = {k[len("param:"):] for k in data.files if k.startswith("param:")}
        if stored != set(params):
            missing = sorted(set(params) - stored)
            surplus = sorted(stored - set(params))
            raise ValueError(
                f"{path}: parameter set mismatch (missing {missing}, surplus {surplus})"
            )
        for name, arr in params.items():
            value = data[f"param:{name}"]
            if value.shape != arr.shape:
                raise ValueError(
                    f"{path}: shape mismatch for {name}: {value.shape} vs {arr.shape}"
                )
            arr[...] = value
    return model, meta


# ---------------------------------------------------------------------------
# Optional pretrained backend
# ---------------------------------------------------------------------------

class _ExternalEncoder:
    """Thin wrapper around a pretrained speech encoder."""

    def __init__(self, spec: EncoderSpec) -> None:
        try:
            import torch  # noqa: F401
            from transformers import Wav2Vec2Model
        except ImportError as exc:
            raise RuntimeError(
                "the external_pretrained backend needs the 'pretrained' extra "
                "(pip install stutterkit[pretrained])"
            ) from exc
        try:
            self._model = Wav2Vec2Model.from_pretrained(spec.weights_source)
        except Exception as exc:
            raise RuntimeError(
                f"could not load external encoder weights from {spec.weights_source!r}: {exc}"
            ) from exc
        self._model.eval()
        got = self._model.config.hidden_size
        if got != spec.hidden_size:
            raise RuntimeError(
                f"external encoder hidden size {got} does not match spec {spec.hidden_size}"
            )

    def encode(self, samples: np.ndarray) -> np.ndarray:
        import torch

        with torch.no_grad():
            x = torch.from_numpy(samples).float()[None, :]
            out = self._model(x).last_hidden_state[0]
        return out.double().numpy()


def _load_external_encoder(spec: EncoderSpec) -> _ExternalEncoder:
    return _ExternalEncoder(spec)
