"""
Audio features: RMSE plus log-mel frames
========================================

The audio front end turns a waveform into a frame matrix of mel-band
energies with one extra loudness column. This script renders a short
synthetic utterance and inspects each stage.
"""

import numpy as np

from ambispeech import (AudioSignal, FeatureConfig, audio_features,
                        mel_center_frequencies, render_utterance, rmse_frames)

# Render one utterance: a rise-final contour over two words.
rng = np.random.default_rng(7)
signal = render_utterance("가나 다라까", ("LMLLH", 1.0), "f", rng)
print(f"waveform: {len(signal)} samples at {signal.sample_rate} Hz "
      f"({len(signal) / signal.sample_rate:.2f}s)")

# Frame-level loudness. A full-scale sine would read 1/sqrt(2) = 0.707;
# the rendered speech sits well below that, and the silence between the
# words shows up as a dip.
cfg = FeatureConfig(n_mels=32, n_fft=512, hop=256)
rmse = rmse_frames(signal, cfg.n_fft, cfg.hop)
print(f"rmse over {len(rmse)} frames: min {rmse.min():.3f} max {rmse.max():.3f}")

# The full feature sequence: frames end-aligned into a fixed-length
# buffer, mel bands log-compressed, loudness in the last column.
features = audio_features(signal, cfg)
print(f"feature matrix: {features.data.shape} (t_max x (n_mels + 1)), "
      f"{features.valid_len} valid frames")

# Each mel filter peaks at a known frequency, so a pure tone at a filter
# center must win that filter's band.
centers = mel_center_frequencies(cfg.sample_rate, cfg.n_fft, cfg.n_mels)
k = 12
t = np.arange(8000) / cfg.sample_rate
tone = AudioSignal(np.sin(2 * np.pi * centers[k] * t), cfg.sample_rate)
tone_features = audio_features(tone, cfg)
mel_block = tone_features.valid_rows()[4:-4, : cfg.n_mels]
print(f"tone at {centers[k]:.0f} Hz peaks in band "
      f"{int(np.argmax(mel_block.mean(axis=0)))} (expected {k})")
