#!/usr/bin/env python3
"""Noise mixing across the evaluation SNR sweep.

Shows the gain computation, verifies the achieved SNR against the request,
and demonstrates the clean sentinel.
"""

import numpy as np

from shoutkit import audio_io

rng = np.random.default_rng(0)
speech = audio_io.AudioClip(0.05 * rng.standard_normal(8000), 16000, "speech")
noise = audio_io.pink_noise(32000, 16000, seed=3)

print(f"speech RMS {audio_io.rms(speech.samples):.4f}, "
      f"noise RMS {audio_io.rms(noise.samples):.4f}")
print(f"{'SNR':>6s} {'achieved':>10s} {'mix peak':>9s}")
for snr in audio_io.SWEEP_SNRS_DB:
    spec = audio_io.NoiseSpec(snr_db=snr, noise=noise, seed=42)
    mixed = audio_io.mix_noise_at_snr(speech, spec)
    if snr == audio_io.CLEAN:
        print(f"{'clean':>6s} {'(speech unchanged)':>10s}")
        continue
    # When the raw mixture would leave [-1, 1], a single common gain rescales
    # it; the speech/noise ratio is unchanged, but the residual against the
    # original speech no longer isolates the noise. Undo the rescale first.
    peak = np.max(np.abs(mixed.samples))
    rng2 = np.random.default_rng(42)
    start = int(rng2.integers(0, noise.samples.size - speech.samples.size + 1))
    segment = noise.samples[start : start + speech.samples.size]
    g = (audio_io.rms(speech.samples) / audio_io.rms(segment)) * 10 ** (-snr / 20)
    raw_peak = np.max(np.abs(speech.samples + g * segment))
    unscaled = mixed.samples * raw_peak if raw_peak > 1.0 else mixed.samples
    residual = unscaled - speech.samples
    achieved = 20 * np.log10(audio_io.rms(speech.samples) / audio_io.rms(residual))
    note = "  (rescaled to fit [-1, 1])" if raw_peak > 1.0 else ""
    print(f"{snr:6.0f} {achieved:10.4f} {peak:9.3f}{note}")

print("\nSame seed, same mix:",
      np.array_equal(
          audio_io.mix_noise_at_snr(speech, audio_io.NoiseSpec(0.0, noise, seed=1)).samples,
          audio_io.mix_noise_at_snr(speech, audio_io.NoiseSpec(0.0, noise, seed=1)).samples))
