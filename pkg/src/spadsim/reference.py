"""Event-queue reference implementation of the detector.

detect_reference() produces byte-identical output to detector.detect() from
the same rng state. Where the production kernel sweeps a merged stimulus
array, this version schedules every stimulus, trap release, and re-arm timer
as a discrete event and lets the queue order them. It exists as an
executable statement of the detector semantics and as the oracle the kernel
is tested against; it is not built for speed.

Event ordering at equal timestamps follows EventKind: re-arm timers fire
first, then trap releases, then dark counts, then photon arrivals, matching
the tie-break rules of the array kernel.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .detector import DetectorParams, PulseRecords, _compile_params, _finalize_records, _prepare_stimuli
from .engine import EventKind, EventQueue, SimEvent, run

__all__ = ["detect_reference"]

_T_END = 2**62


class _DetectorState:
    """Mutable detector state driven by queue events.

    Mirrors the array kernel's draw-order contract exactly; see the kernel
    module docstring. The armed flag is maintained by generation-tagged
    re-arm timers instead of timestamp comparison: a fresh avalanche
    invalidates any pending timer by bumping the generation.
    """

    def __init__(self, compiled, rng: np.random.Generator):
        self.c = compiled
        self.rng = rng
        self.armed = True
        self.generation = 0
        self.dead_start = np.int64(-(2**62))
        self.dead_end = np.int64(0)
        self.last_avalanche = np.int64(-(2**62))
        self.lam = 0.0
        self.t_lam = np.int64(0)
        self.out_times: list[int] = []
        self.origin_times: list[int] = []
        self.causes: list[int] = []

    def __call__(self, event: SimEvent, queue: EventQueue) -> None:
        if event.kind == EventKind.TIMER_EXPIRY:
            if event.payload == self.generation:
                self.armed = True
            return
        t = np.int64(event.time)
        if self.armed:
            self._handle_armed(t, event.kind, queue)
        else:
            self._handle_dead(t, event.kind, queue)

    def _handle_armed(self, t: np.int64, kind: EventKind, queue: EventQueue) -> None:
        if kind == EventKind.PHOTON_ARRIVAL:
            if self.rng.random() < self.c.efficiency:
                self._avalanche(t, _kernels.CAUSE_PHOTON, queue)
        elif kind == EventKind.DARK_COUNT:
            self._avalanche(t, _kernels.CAUSE_DARK, queue)
        else:
            self._avalanche(t, _kernels.CAUSE_AFTERPULSE, queue)

    def _handle_dead(self, t: np.int64, kind: EventKind, queue: EventQueue) -> None:
        dt = t - self.dead_start
        if dt < self.c.tau_quench or kind == EventKind.TRAP_RELEASE:
            # Quench phase swallows everything; the twilight zone swallows
            # trap releases. No draws are consumed either way.
            return
        u = self.rng.random()
        prof = _kernels._interp_clamped(float(dt), self.c.tw_x, self.c.tw_y)
        thr = self.c.efficiency * prof if kind == EventKind.PHOTON_ARRIVAL else prof
        if u < thr:
            self._avalanche(t, _kernels.CAUSE_TWILIGHT, queue, held=True)

    def _avalanche(self, t: np.int64, cause: int, queue: EventQueue, held: bool = False) -> None:
        c = self.c
        if held:
            # Sensing is off during the dead period: the pulse appears when
            # the interrupted dead period would have ended, with no sampled
            # timing spread.
            ot = self.dead_end + c.base_delay
        else:
            gap = t - self.last_avalanche
            dt_prev = _kernels._HUGE_DT if gap > np.int64(2**61) else float(gap)
            shift = _kernels._interp_clamped(dt_prev, c.sh_x, c.sh_y)
            fwhm = _kernels._interp_clamped(dt_prev, c.jit_x, c.jit_y)
            z = self.rng.standard_normal()
            ot = t + c.base_delay + _kernels._emit_delta(shift, fwhm, z)
            if ot < t:
                ot = t
        self.out_times.append(int(ot))
        self.origin_times.append(int(t))
        self.causes.append(cause)

        self.lam = _kernels._ema_decay(self.lam, t - self.t_lam, c.tau_ema)
        self.t_lam = t
        dlen = _kernels._round_ps(_kernels._interp_clamped(self.lam * 1.0e12, c.dead_x, c.dead_y))
        self.lam += 1.0 / c.tau_ema
        self.dead_start = t
        self.dead_end = t + dlen
        self.last_avalanche = t
        self.armed = False
        self.generation += 1
        queue.push(SimEvent(int(self.dead_end), EventKind.TIMER_EXPIRY, self.generation))

        if c.ap_mu > 0.0:
            k = self.rng.poisson(c.ap_mu)
            for _ in range(k):
                if c.ap_mode == _kernels.AP_EXPONENTIAL:
                    d = self.rng.exponential(c.ap_tau)
                    if d > _kernels._MAX_TRAP_DELAY:
                        d = _kernels._MAX_TRAP_DELAY
                else:
                    d = _kernels._trap_delay_power_law(self.rng.random(), c.ap_tmin, c.ap_alpha)
                queue.push(SimEvent(int(t + _kernels._round_ps(d)), EventKind.TRAP_RELEASE))


def detect_reference(
    arrivals, params: DetectorParams, rng: np.random.Generator, duration_ps: int
) -> PulseRecords:
    """Run the detector through the generic event queue.

    Same contract and output as detector.detect(); see the module docstring.
    """
    params.validate()
    times, kinds = _prepare_stimuli(arrivals, params, rng, duration_ps)
    state = _DetectorState(_compile_params(params), rng)
    queue = EventQueue()
    for t, k in zip(times.tolist(), kinds.tolist()):
        queue.push(SimEvent(t, EventKind(k)))
    run(queue, state, _T_END)
    out = np.asarray(state.out_times, dtype=np.int64)
    origin = np.asarray(state.origin_times, dtype=np.int64)
    cause = np.asarray(state.causes, dtype=np.int64)
    return _finalize_records(out, origin, cause, params)
