"""Synthetic accelerometer and location signal generators.

Every generator takes a time vector in seconds and a numpy Generator and
returns an (n, 3) array in m/s^2 with gravity included. The simulator
stitches these into full-day recordings; tests use them directly as
oracles, since the generator parameters fix the true step count, activity
and mode.
"""
from __future__ import annotations

import numpy as np

G = 9.80665


def _gravity(n: int, axis: int = 2, tilt: float = 0.0) -> np.ndarray:
    g = np.zeros((n, 3))
    g[:, axis] = G * np.cos(tilt)
    g[:, (axis + 1) % 3] = G * np.sin(tilt)
    return g


def _band_noise(t: np.ndarray, rng: np.random.Generator, lo: float, hi: float, sigma: float,
                n_tones: int = 12) -> np.ndarray:
    """Sum of random-phase tones in [lo, hi] Hz, scaled to standard deviation ``sigma``."""
    f = rng.uniform(lo, hi, n_tones)
    ph = rng.uniform(0, 2 * np.pi, n_tones)
    x = np.sin(2 * np.pi * np.outer(t, f) + ph).sum(axis=1)
    return x * sigma / np.sqrt(n_tones / 2.0)


def still(t, rng, noise=0.02, axis=2, tilt=0.0):
    return _gravity(len(t), axis, tilt) + rng.normal(0, noise, (len(t), 3))


def gait(t, rng, cadence=2.0, amplitude=3.0, noise=0.1, jitter=0.02, phase=None, axis=2):
    """Walking/running: one vertical oscillation cycle per step.

    Cadence drifts slowly by up to ``jitter`` (relative). Returns the
    signal; the true number of steps is ``gait_steps`` of the same inputs.
    """
    n = len(t)
    out = _gravity(n, axis)
    inst_f = cadence * (1 + jitter * np.sin(2 * np.pi * t / 17.0 + rng.uniform(0, 2 * np.pi)))
    dt = np.diff(t, prepend=t[0])
    theta = 2 * np.pi * np.cumsum(inst_f * dt) + (rng.uniform(0, 2 * np.pi) if phase is None else phase)
    out[:, axis] += amplitude * (np.sin(theta) + 0.3 * np.sin(2 * theta))
    out[:, (axis + 1) % 3] += 0.3 * amplitude * np.sin(theta / 2)
    out[:, (axis + 2) % 3] += 0.15 * amplitude * np.cos(theta)
    return out + rng.normal(0, noise, (n, 3))


def gait_steps(duration_s: float, cadence: float) -> int:
    return int(round(duration_s * cadence))


def shake(t, rng, noise=0.05):
    """Handling the phone without walking.

    Short bursts of one to three jerks separated by pauses of 2-4 s, over a
    high-frequency jitter. Bursts are too short and too irregular to pass
    as a walking bout.
    """
    n = len(t)
    out = still(t, rng, noise)
    out += np.column_stack([_band_noise(t, rng, 4.0, 9.0, 0.4) for _ in range(3)])
    if n == 0:
        return out
    s = t[0] + rng.uniform(0.2, 1.5)
    while s < t[-1]:
        for _ in range(int(rng.integers(1, 4))):
            amp = rng.uniform(2.0, 6.0)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            width = rng.uniform(0.05, 0.12)
            pulse = amp * np.exp(-0.5 * ((t - s) / width) ** 2)
            out += pulse[:, None] * direction[None, :]
            s += rng.uniform(0.25, 0.45)
        s += rng.uniform(2.0, 4.0)
    return out


def fidget(t, rng, sigma=0.3, axis=2, tilt=0.3):
    """Awake but seated: irregular arm and hand movements.

    Smoothed white noise, so there is no dominant rhythm to mistake for gait.
    """
    from scipy.ndimage import gaussian_filter1d

    out = still(t, rng, 0.02, axis, tilt)
    if len(t) < 2:
        return out
    rate = 1.0 / np.median(np.diff(t))
    raw = rng.normal(0, 1, (len(t), 3))
    smooth = gaussian_filter1d(raw, sigma=0.25 * rate, axis=0)
    smooth *= sigma / max(smooth.std(), 1e-12)
    return out + smooth


def sleeping(t, rng, noise=0.01):
    """Lying still with an occasional brief posture change."""
    out = still(t, rng, noise, axis=0)
    if len(t) == 0:
        return out
    s = t[0] + rng.uniform(600, 2400)
    while s < t[-1]:
        pulse = 0.8 * np.exp(-0.5 * ((t - s) / 0.6) ** 2)
        out[:, 2] += pulse
        s += rng.uniform(1200, 3600)
    return out


def lay(t, rng):
    return still(t, rng, 0.03, axis=0) + np.column_stack(
        [_band_noise(t, rng, 0.05, 0.4, 0.05) for _ in range(3)])


def stand(t, rng):
    out = still(t, rng, 0.05, axis=2, tilt=0.05)
    out += np.column_stack([_band_noise(t, rng, 0.1, 0.6, 0.15) for _ in range(3)])
    return out


def walk(t, rng, cadence=None):
    return gait(t, rng, cadence or rng.uniform(1.6, 2.1), rng.uniform(2.0, 4.0))


def run(t, rng, cadence=None):
    return gait(t, rng, cadence or rng.uniform(2.6, 3.0), rng.uniform(8.0, 12.0), noise=0.3)


def stairs(t, rng, cadence=None):
    c = cadence or rng.uniform(1.3, 1.6)
    out = gait(t, rng, c, rng.uniform(4.0, 6.0), noise=0.2, axis=2)
    out[:, 1] += 1.5 * np.sin(np.pi * c * t)  # alternating leg lift tilts the phone
    return out


def cycle(t, rng, cadence=None):
    """Phone in a trouser pocket while pedalling: the thigh swings gravity around."""
    f = cadence or rng.uniform(1.0, 1.4)
    swing = 0.5 * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    out = np.column_stack([G * np.sin(swing), np.zeros_like(t), G * np.cos(swing)])
    out += np.column_stack([_band_noise(t, rng, 5.0, 9.5, 0.4) for _ in range(3)])
    return out + rng.normal(0, 0.1, (len(t), 3))


def car(t, rng):
    out = still(t, rng, 0.03, axis=2, tilt=0.4)
    out += np.column_stack([_band_noise(t, rng, 7.0, 9.8, 0.25) for _ in range(3)])
    out[:, 1] += 0.6 * np.sin(2 * np.pi * 0.03 * t + rng.uniform(0, 6))  # accelerate / brake
    return out


def bus(t, rng):
    out = still(t, rng, 0.05, axis=2, tilt=0.4)
    out += np.column_stack([_band_noise(t, rng, 3.0, 5.5, 0.35) for _ in range(3)])
    out[:, 0] += _band_noise(t, rng, 0.3, 0.7, 0.5)  # sway
    out[:, 1] += 0.9 * np.sin(2 * np.pi * 0.02 * t + rng.uniform(0, 6))
    return out


def train(t, rng):
    out = still(t, rng, 0.02, axis=2, tilt=0.4)
    out[:, 2] += 0.3 * np.sin(2 * np.pi * rng.uniform(1.6, 2.0) * t) ** 8  # rail joints
    out += np.column_stack([_band_noise(t, rng, 1.0, 2.5, 0.08) for _ in range(3)])
    return out


def bike(t, rng):
    out = cycle(t, rng)
    out += np.column_stack([_band_noise(t, rng, 2.0, 6.0, 0.5) for _ in range(3)])
    return out


ACTIVITY_GENERATORS = {
    "lay": lay,
    "stand": stand,
    "walk": walk,
    "run": run,
    "cycle": cycle,
    "stairs": stairs,
}

MODE_GENERATORS = {
    "walk_run": walk,
    "bike": bike,
    "car": car,
    "bus": bus,
    "train_subway": train,
}
