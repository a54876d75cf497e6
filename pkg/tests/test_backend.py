"""The compiled detector kernel, its pure-Python twin, and the event-queue
reference implementation must produce byte-identical pulse streams."""

import hashlib
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from spadsim import AfterpulseModel, DetectorParams, detect, detect_reference, make_generator
from spadsim import _kernels
from spadsim._backend import NUMBA_ENABLED
from spadsim.detector import _compile_params, _prepare_stimuli, _finalize_records

DURATION = 60_000_000


def rich_params(mu: float, *, power_law: bool = False) -> DetectorParams:
    ap_kwargs = dict(mu=mu, tau_trap_ps=32_000.0)
    if power_law:
        ap_kwargs = dict(mu=mu, mode="power-law", t_min_ps=25_000.0, alpha=1.8)
    return DetectorParams(
        efficiency=0.7,
        tau_dead0_ps=24_000,
        tau_quench_ps=10_000,
        base_delay_ps=9_000,
        dark_rate_cps=40_000.0,
        dead_elongation=((0.0, 0.0), (30.0e6, 2000.0)),
        twilight_profile=((10_000.0, 0.0), (17_000.0, 0.4), (24_000.0, 1.0)),
        jitter_curve=((30_000.0, 600.0), (120_000.0, 335.0)),
        shift_curve=((30_000.0, 855.0), (50_000.0, 100.0), (120_000.0, 0.0)),
        afterpulse=AfterpulseModel(**ap_kwargs),
    )


def arrivals_for(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(30_000.0, size=2000)
    return np.cumsum(gaps).astype(np.int64) + 1


def detect_via_py_func(arrivals, params, rng, duration_ps):
    times, kinds = _prepare_stimuli(arrivals, params, rng, duration_ps)
    c = _compile_params(params)
    out, origin, cause = _kernels._detect_kernel.py_func(times, kinds, *c.as_kernel_args(), rng)
    return _finalize_records(out, origin, cause, params)


def records_equal(a, b) -> bool:
    return (
        np.array_equal(a.out_times, b.out_times)
        and np.array_equal(a.origin_times, b.origin_times)
        and np.array_equal(a.causes, b.causes)
        and a.out_width_ps == b.out_width_ps
    )


CASES = [
    pytest.param(rich_params(0.017), id="mu-0.017"),
    pytest.param(rich_params(0.06), id="mu-0.06"),
    pytest.param(rich_params(0.5), id="mu-0.5"),
    pytest.param(rich_params(0.06, power_law=True), id="power-law"),
]


@pytest.mark.parametrize("params", CASES)
def test_kernel_matches_py_func(params):
    arrivals = arrivals_for(7)
    a = detect(arrivals, params, make_generator(11, 2), DURATION)
    b = detect_via_py_func(arrivals, params, make_generator(11, 2), DURATION)
    assert len(a) > 400
    assert records_equal(a, b)


@pytest.mark.parametrize("params", CASES)
def test_kernel_matches_event_queue_reference(params):
    arrivals = arrivals_for(7)
    a = detect(arrivals, params, make_generator(11, 2), DURATION)
    c = detect_reference(arrivals, params, make_generator(11, 2), DURATION)
    assert records_equal(a, c)


def digest(records) -> str:
    h = hashlib.sha256()
    h.update(records.out_times.tobytes())
    h.update(records.origin_times.tobytes())
    h.update(records.causes.tobytes())
    return h.hexdigest()


def test_numpy_fallback_subprocess_is_bit_equal():
    """SPADSIM_NUMBA=0 re-imports with the identity decorator; same bytes out."""
    params = rich_params(0.06)
    here = detect(arrivals_for(7), params, make_generator(11, 2), DURATION)
    script = textwrap.dedent(
        """
        import hashlib
        import numpy as np
        from spadsim import detect, make_generator
        from spadsim import _backend
        import test_backend as tb

        assert not _backend.NUMBA_ENABLED
        rec = detect(tb.arrivals_for(7), tb.rich_params(0.06), make_generator(11, 2), tb.DURATION)
        print(tb.digest(rec))
        """
    )
    env = dict(os.environ, SPADSIM_NUMBA="0")
    env["PYTHONPATH"] = os.path.dirname(__file__)
    proc = subprocess.run(
        [sys.executable, "-c", script], env=env, capture_output=True, text=True, timeout=300
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == digest(here)


def test_backend_flag_reflects_environment():
    # The test suite runs with the compiled backend unless the flag says otherwise.
    expected = os.environ.get("SPADSIM_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")
    assert NUMBA_ENABLED is expected
    assert hasattr(_kernels._detect_kernel, "py_func")
