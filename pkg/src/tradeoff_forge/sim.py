"""Seeded Monte Carlo simulation of the queue under an arbitrary policy.

The random stream is numpy's PCG64 (a documented, seedable 64-bit generator
with jump-free sequential draws).  Each slot consumes exactly two uniforms
in a fixed order -- first the action draw, then the arrival draw -- so a
run is reproducible bit for bit from (seed, params, policy, config).
Standard errors come from batch means over 100 equal post-warmup batches;
the delay estimate is the time-average queue divided by the arrival rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import BadRange, OverflowViolated, UnderflowViolated
from .model import ModelParams, Policy

N_BATCHES = 100


@dataclass(frozen=True)
class SimConfig:
    seed: int
    slots: int
    warmup: int = 1000
    q0: int = 0

    def __post_init__(self):
        if self.warmup < 0 or self.slots <= self.warmup:
            raise BadRange(
                f"need slots > warmup >= 0, got slots={self.slots} warmup={self.warmup}"
            )
        if self.q0 < 0:
            raise BadRange(f"initial queue must be nonnegative, got {self.q0}")


@dataclass(frozen=True)
class SimResult:
    power_mean: float
    delay_mean: float
    power_se: float
    delay_se: float
    slots_used: int

    def to_dict(self) -> dict:
        return {
            "power_mean": self.power_mean,
            "delay_mean": self.delay_mean,
            "power_se": self.power_se,
            "delay_se": self.delay_se,
            "slots_used": self.slots_used,
        }


@njit(cache=True)
def _run_kernel(cdf, power, us, q0, batch, buffer, alpha, warmup, n_batches, batch_len):
    """Evolve the queue, accumulating per-batch sums of queue length and power.

    Returns (status, q_final, qsums, psums); status 1 = underflow, 2 = overflow.
    """
    qsums = np.zeros(n_batches)
    psums = np.zeros(n_batches)
    q = q0
    n_slots = us.shape[0] // 2
    used = n_batches * batch_len
    for n in range(n_slots):
        u_act = us[2 * n]
        u_arr = us[2 * n + 1]
        s = 0
        row = cdf[q]
        while s < row.shape[0] - 1 and u_act >= row[s]:
            s += 1
        k = n - warmup
        if 0 <= k < used:
            b = k // batch_len
            qsums[b] += q
            psums[b] += power[s]
        q = q - s
        if q < 0:
            return 1, q, qsums, psums
        if u_arr < alpha:
            q += batch
        if q > buffer:
            return 2, q, qsums, psums
    return 0, q, qsums, psums


@njit(cache=True)
def _trace_kernel(cdf, us, q0, batch, buffer, alpha):
    """Full (q, s) trajectory, used by the debug CSV dump."""
    n_slots = us.shape[0] // 2
    qs = np.empty(n_slots, dtype=np.int64)
    ss = np.empty(n_slots, dtype=np.int64)
    q = q0
    for n in range(n_slots):
        u_act = us[2 * n]
        u_arr = us[2 * n + 1]
        s = 0
        row = cdf[q]
        while s < row.shape[0] - 1 and u_act >= row[s]:
            s += 1
        qs[n] = q
        ss[n] = s
        q = q - s
        if u_arr < alpha:
            q += batch
        q = min(max(q, 0), buffer)
    return qs, ss


def _batch_layout(n_used: int):
    n_batches = N_BATCHES if n_used >= N_BATCHES else n_used
    batch_len = n_used // n_batches
    return n_batches, batch_len


def simulate(
    params: ModelParams,
    policy: Policy,
    cfg: SimConfig,
    trajectory_path: Optional[str] = None,
) -> SimResult:
    """Estimate average power and delay by simulating the queue recursion."""
    if cfg.q0 > params.buffer:
        raise BadRange(f"initial queue {cfg.q0} exceeds the buffer {params.buffer}")
    cdf = np.cumsum(policy.f, axis=1)
    # pin the tail at exactly 1 so rounding can never select an action beyond
    # the last one the row actually supports
    for q in range(cdf.shape[0]):
        last = int(np.nonzero(policy.f[q] > 0.0)[0][-1])
        cdf[q, last:] = 1.0
    rng = np.random.default_rng(cfg.seed)
    us = rng.random(2 * cfg.slots)

    n_used = cfg.slots - cfg.warmup
    n_batches, batch_len = _batch_layout(n_used)
    status, _, qsums, psums = _run_kernel(
        cdf,
        np.asarray(params.power),
        us,
        cfg.q0,
        params.batch,
        params.buffer,
        params.alpha,
        cfg.warmup,
        n_batches,
        batch_len,
    )
    if status == 1:
        raise UnderflowViolated("sampled transition drove the queue below 0")
    if status == 2:
        raise OverflowViolated("sampled transition overflowed the buffer")

    if trajectory_path is not None:
        qs, ss = _trace_kernel(
            cdf, us, cfg.q0, params.batch, params.buffer, params.alpha
        )
        with open(trajectory_path, "w") as fh:
            fh.write("slot,queue,sent\n")
            for n in range(cfg.slots):
                fh.write(f"{n},{qs[n]},{ss[n]}\n")

    used = n_batches * batch_len
    scale = params.alpha * params.batch
    power_mean = float(psums.sum() / used)
    delay_mean = float(qsums.sum() / used) / scale
    if n_batches < 2:
        power_se = float("inf")
        delay_se = float("inf")
    else:
        pm = psums / batch_len
        qm = qsums / batch_len
        power_se = float(np.std(pm, ddof=1) / np.sqrt(n_batches))
        delay_se = float(np.std(qm, ddof=1) / (scale * np.sqrt(n_batches)))
    return SimResult(
        power_mean=power_mean,
        delay_mean=delay_mean,
        power_se=power_se,
        delay_se=delay_se,
        slots_used=used,
    )
