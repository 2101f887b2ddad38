import pytest

from wavgen import make_tone, write_wav


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A small randomly initialized wav2vec2-style checkpoint saved locally."""
    import torch
    from transformers import Wav2Vec2Config, Wav2Vec2ForPreTraining

    torch.manual_seed(0)
    config = Wav2Vec2Config(
        hidden_size=32, num_hidden_layers=2, num_attention_heads=2,
        intermediate_size=64, conv_dim=[16, 16, 16], conv_kernel=[3, 3, 2],
        conv_stride=[2, 2, 2], conv_bias=False,
        num_codevector_groups=2, num_codevectors_per_group=8,
        codevector_dim=16, proj_codevector_dim=16,
        num_conv_pos_embeddings=16, num_conv_pos_embedding_groups=4,
        vocab_size=32,
    )
    path = tmp_path_factory.mktemp("ckpt") / "tiny-w2v2"
    Wav2Vec2ForPreTraining(config).save_pretrained(path)
    return str(path), config


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """10 short WAVs in two classes, plus a tab-separated manifest."""
    root = tmp_path_factory.mktemp("audio")
    lines = []
    for i in range(10):
        label = "hum" if i % 2 == 0 else "hiss"
        freq = 220.0 if label == "hum" else 2400.0
        path = root / f"clip{i:02d}.wav"
        write_wav(path, make_tone(0.12 + 0.01 * i, freq, seed=i))
        lines.append(f"{path}\t{label}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest, root
