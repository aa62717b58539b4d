import numpy as np
import pytest

from voxanon import SpeakerEmbedding, Waveform
from voxanon.nnet import AcousticConfig, NsfConfig, PpgConfig, init_weights


def make_tone(freq_hz, seconds=1.0, fs=16000, amplitude=0.5):
    t = np.arange(int(seconds * fs)) / fs
    return Waveform(amplitude * np.sin(2.0 * np.pi * freq_hz * t), fs)


def make_noise(seconds=1.0, fs=16000, std=0.2, seed=0):
    rng = np.random.default_rng(seed)
    return Waveform(np.clip(std * rng.standard_normal(int(seconds * fs)), -1, 1), fs)


def random_embedding(rng, dim, name):
    return SpeakerEmbedding(name, rng.standard_normal(dim))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Reduced-size configs for functional tests where the full widths would
# only cost time; shape-contract tests build the full-size defaults.
@pytest.fixture
def small_ppg_weights():
    config = PpgConfig(hidden_size=32, n_states=50)
    return init_weights("ppg", config, seed=11)


@pytest.fixture
def small_acoustic_weights():
    config = AcousticConfig(content_dim=12, xvec_dim=6, ff_size=16, blstm_size=8, ar_size=16)
    return init_weights("acoustic", config, seed=12)


@pytest.fixture
def small_nsf_weights():
    config = NsfConfig(mel_dim=80, xvec_dim=8, channels=8, blocks=2, layers_per_block=4)
    return init_weights("nsf", config, seed=13)
