"""Diffusion-time machinery for span generation.

Spans diffuse in a scaled (center, width) coordinate system: a point in
[0, 1]^2 maps affinely to [-lambda, lambda]^2, Gaussian noise is added under
a cosine cumulative-noise schedule, and a deterministic DDIM update walks the
reverse chain. ``alpha_bar[t]`` is the cumulative product of per-step noise
retention, with ``alpha_bar[0] == 1`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spans import clamp_span, se_to_cw


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed cumulative noise coefficients plus the signal scale."""

    t_total: int
    alpha_bar: np.ndarray  # shape [t_total + 1], float64
    lambda_scale: float

    def __post_init__(self):
        ab = self.alpha_bar
        if ab.shape != (self.t_total + 1,):
            raise ValueError("alpha_bar must have t_total + 1 entries")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if not (np.diff(ab) < 0).all():
            raise ValueError("alpha_bar must be strictly decreasing")
        if not ((ab > 0) & (ab <= 1)).all():
            raise ValueError("alpha_bar must lie in (0, 1]")
        if self.lambda_scale <= 0:
            raise ValueError("lambda_scale must be positive")


def build_cosine_schedule(
    t_total: int,
    lambda_scale: float = 2.0,
    offset: float = 0.008,
    max_beta: float = 0.999,
) -> NoiseSchedule:
    """Cosine cumulative schedule with per-step beta clipped at ``max_beta``.

    ``f(t) = cos^2(((t/T + offset) / (1 + offset)) * pi/2)`` and
    ``alpha_bar[t] = f(t) / f(0)``, realized through the clipped per-step
    products so the tail stays strictly positive.
    """
    if t_total < 1:
        raise ValueError(f"t_total must be >= 1, got {t_total}")
    if lambda_scale <= 0:
        raise ValueError(f"lambda_scale must be positive, got {lambda_scale}")
    t = np.arange(t_total + 1, dtype=np.float64)
    f = np.cos(((t / t_total + offset) / (1.0 + offset)) * (np.pi / 2.0)) ** 2
    betas = np.clip(1.0 - f[1:] / f[:-1], 0.0, max_beta)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(t_total, alpha_bar, float(lambda_scale))


def scale_to_diffusion(cw, lambda_scale: float) -> np.ndarray:
    """Map (center, width) in [0, 1]^2 to diffusion space [-lambda, lambda]^2."""
    if lambda_scale <= 0:
        raise ValueError(f"lambda_scale must be positive, got {lambda_scale}")
    return (2.0 * np.asarray(cw, dtype=np.float64) - 1.0) * lambda_scale


def unscale_from_diffusion(x, lambda_scale: float, w_min: float = 0.0) -> np.ndarray:
    """Inverse of :func:`scale_to_diffusion`, then span-clamp the result.

    The raw (center, width) point is interpreted as a span, repaired with
    :func:`diffspan.spans.clamp_span`, and returned in (center, width) form,
    so the output always describes a valid span with width >= ``w_min``.
    """
    if lambda_scale <= 0:
        raise ValueError(f"lambda_scale must be positive, got {lambda_scale}")
    cw = (np.asarray(x, dtype=np.float64) / lambda_scale + 1.0) / 2.0
    c, w = cw[..., 0], cw[..., 1]
    raw_se = np.stack([c - w / 2.0, c + w / 2.0], axis=-1)
    return se_to_cw(clamp_span(raw_se, w_min))


def _coeffs(sched: NoiseSchedule, t) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t)
    if ((t < 0) | (t > sched.t_total)).any():
        raise ValueError(f"timestep out of range [0, {sched.t_total}]: {t}")
    ab = sched.alpha_bar[t]
    c_signal = np.sqrt(ab)
    c_noise = np.sqrt(1.0 - ab)
    if np.ndim(c_signal) > 0:
        c_signal = c_signal[..., None]
        c_noise = c_noise[..., None]
    return c_signal, c_noise


def q_sample(x0, t, eps, sched: NoiseSchedule) -> np.ndarray:
    """One-step forward noising: ``sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps``.

    ``eps`` is supplied by the caller (a unit-Gaussian draw in normal use) so
    the op stays deterministic and testable. ``t`` may be a scalar or an
    array broadcast against the leading axes of ``x0``/``eps``; t=0 returns
    ``x0``. The result is clamped coordinate-wise to [-lambda, lambda].
    """
    c_signal, c_noise = _coeffs(sched, t)
    x_t = c_signal * np.asarray(x0, dtype=np.float64) + c_noise * np.asarray(eps, dtype=np.float64)
    return np.clip(x_t, -sched.lambda_scale, sched.lambda_scale)


def ddim_step(x_t, x0_hat, t, t_prev, sched: NoiseSchedule) -> np.ndarray:
    """Deterministic DDIM update from step ``t`` down to ``t_prev``.

    Implied noise ``eps_hat = (x_t - sqrt(ab_t) * x0_hat) / sqrt(1 - ab_t)``
    is re-applied at the earlier step. With ``t_prev == 0`` the result is
    exactly ``x0_hat``. Output is clamped to [-lambda, lambda].
    """
    t_arr, tp_arr = np.asarray(t), np.asarray(t_prev)
    if (tp_arr >= t_arr).any():
        raise ValueError(f"t_prev must be strictly below t, got t={t}, t_prev={t_prev}")
    c_signal, c_noise = _coeffs(sched, t)
    cp_signal, cp_noise = _coeffs(sched, t_prev)
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    eps_hat = (x_t - c_signal * x0_hat) / c_noise
    x_prev = cp_signal * x0_hat + cp_noise * eps_hat
    return np.clip(x_prev, -sched.lambda_scale, sched.lambda_scale)


def make_sampling_sequence(n_steps: int, t_total: int) -> list[int]:
    """Evenly spaced descending timesteps ``[T, ..., s_1]`` for sampling.

    ``s_i = round(i * T / n_steps)`` for ``i = n_steps..1``, deduplicated;
    the reverse loop's final DDIM update targets t=0 (not stored here).
    """
    if not (1 <= n_steps <= t_total):
        raise ValueError(f"n_steps must be in [1, t_total], got {n_steps} with T={t_total}")
    steps: list[int] = []
    for i in range(n_steps, 0, -1):
        s = int(round(i * t_total / n_steps))
        if not steps or s < steps[-1]:
            steps.append(max(s, 1))
    steps[0] = t_total
    return steps


def sample_timesteps(n: int, t_total: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent uniform draws from {1, ..., t_total}."""
    return rng.integers(1, t_total + 1, size=int(n))
