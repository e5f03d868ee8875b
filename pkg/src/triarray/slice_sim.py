"""Cycle-accurate model of one slice: a K x K grid of weight-stationary PEs,
K-1 reconfigurable shift-register buffers (RSRBs), vertical psum chains and a
final adder tree.

Input movement
--------------
PE row i processes padded ifmap row (pass + i), where pass is the output row
being produced.  Inputs enter a row at its right edge and shift one PE left
per cycle, so during compute cycle u of a pass the grid holds the K x K
window at output column u.  A value leaving a row's left edge enters the RSRB
below-to-above that row pair; one row-pass later it re-emerges at the right
edge of the row above.  Each padded ifmap row is therefore fetched from
outside exactly once (by the bottom row in steady state; by its own row
during the first pass), and reused K times.

At an output-row boundary the RSRBs dispatch their oldest K values as a
K-wide bus that reloads the row above in a single cycle, while the bottom row
takes K fresh values from the periphery; the K values still resident in each
row's registers are handed to the RSRB at the same time.  This keeps the
emission rate at exactly one output per cycle with no stall cycles between
output rows.  The required delay-line length is W_pad - K; delays shorter
than K are served by a direct head bypass (tiny planes).

Timing abstraction
------------------
Register movement and data values are simulated cycle-by-cycle and are
bit-exact.  The vertical psum chain (K-1 registers), the adder tree
(clog2(K) stages) and its output register are value-exact pipelines whose
depths only delay emission by a constant, so they are accounted as a
constant fill latency rather than simulated as in-flight registers:

    fill_latency = 1 (window preload) + (K-1) + clog2(K) + 1

Per pass: cycles = fill_latency + H_O * W_O, outputs = H_O * W_O.

A LaneBank advances n_lanes such input datapaths in lockstep (identical
schedule, per-lane data); a single slice is a bank of one lane, and a core's
P_M slices share one bank because the schedule is common to all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine_config import SubBuffer, achievable_delays, clog2, default_sb_layout
from .errors import ConfigError, GeometryError, SimulationStateError

__all__ = [
    "Rsrb",
    "LaneBank",
    "PeSlice",
    "SliceCounters",
    "adder_tree_reduce",
    "adder_tree_depth",
    "fill_latency",
]

BYPASS = -1


def adder_tree_depth(k: int) -> int:
    return clog2(k)


def adder_tree_reduce(values) -> int:
    """Exact sum of the K column psums.  Contributes clog2(K) + 1 cycles of
    pipeline latency (stages plus output register)."""
    return int(np.asarray(values, dtype=np.int64).sum())


def fill_latency(k: int) -> int:
    """Window preload + vertical psum chain + adder tree + output register."""
    return 1 + (k - 1) + adder_tree_depth(k) + 1


class Rsrb:
    """Reuse buffer between a PE row and the row above it: w_im shift
    registers split into sub-buffers, with a multiplexer selecting which
    tapped sub-buffer's oldest K cells feed the upper row.

    Selecting a tap fixes the effective delay at run time; the register file
    is never rebuilt.  The simulation tracks one column of values per lane
    (lanes are lockstep slices) in a circular buffer of the effective length.
    """

    def __init__(self, n_lanes: int, k: int, w_im: int, layout: tuple[SubBuffer, ...]):
        self.n_lanes = n_lanes
        self.k = k
        self.w_im = w_im
        self.layout = layout
        self.active_tap: int | None = None
        self.effective_length = 0
        self._buf: np.ndarray | None = None
        self._cap = 0
        self._tail = 0
        self._count = 0

    def configure(self, delay: int) -> None:
        if delay < 0:
            raise GeometryError(f"negative reuse delay {delay}")
        if delay < self.k:
            self.active_tap = BYPASS
        else:
            acc = 0
            tap = None
            for idx, sb in enumerate(self.layout):
                acc += sb.length
                if sb.tapped and acc == delay:
                    tap = idx
                    break
            if tap is None:
                raise ConfigError(
                    f"no tap yields delay {delay}; achievable delays: "
                    f"{achievable_delays(self.layout, self.k)}"
                )
            self.active_tap = tap
        self.effective_length = delay
        self._cap = delay + self.k
        self._buf = np.zeros((self.n_lanes, self._cap), dtype=np.int64)
        self.reset()

    def reset(self) -> None:
        self._tail = 0
        self._count = 0

    @property
    def occupancy(self) -> int:
        return self._count

    def push(self, col: np.ndarray) -> None:
        if self._count >= self._cap:
            raise SimulationStateError("rsrb overflow (schedule bug)")
        self._buf[:, (self._tail + self._count) % self._cap] = col
        self._count += 1

    def pop(self) -> np.ndarray:
        if self._count == 0:
            raise SimulationStateError("rsrb underflow (schedule bug)")
        col = self._buf[:, self._tail].copy()
        self._tail = (self._tail + 1) % self._cap
        self._count -= 1
        return col

    def push_group(self, block: np.ndarray) -> None:
        """Hand over a row's K registers at a boundary, oldest (j=0) first."""
        for j in range(self.k):
            self.push(block[:, j])

    def pop_group(self) -> np.ndarray:
        """Dispatch the oldest K values as the (n_lanes, K) reload bus."""
        out = np.empty((self.n_lanes, self.k), dtype=np.int64)
        for j in range(self.k):
            out[:, j] = self.pop()
        return out


class LaneBank:
    """Input registers plus RSRBs for n_lanes lockstep slices.

    self.x has shape (n_lanes, K, K): x[lane, i, j] is the input register of
    PE (row i, col j) of that lane.  All lanes follow the same schedule; only
    the plane data differs, so per-cycle updates are vectorized across lanes.
    """

    def __init__(self, n_lanes: int, k: int, w_im: int,
                 layout: tuple[SubBuffer, ...] | None = None,
                 regs_out: np.ndarray | None = None):
        if layout is None:
            layout = default_sb_layout(w_im, k)
        self.n_lanes = n_lanes
        self.k = k
        self.w_im = w_im
        self.layout = layout
        if regs_out is None:
            regs_out = np.zeros((n_lanes, k, k), dtype=np.int64)
        if regs_out.shape != (n_lanes, k, k):
            raise GeometryError(f"regs_out shape {regs_out.shape} != {(n_lanes, k, k)}")
        self.x = regs_out
        self.rsrbs = tuple(Rsrb(n_lanes, k, w_im, layout) for _ in range(k - 1))
        self._w_i = self._padding = self._w_pad = self._w_o = None
        self._padded: np.ndarray | None = None
        self._n_active = 0
        self._h_i = self._h_pad = self._h_o = 0
        self.pass_idx = 0
        self.cycle_in_pass = 0
        self.done = True
        self.fetch_preload = 0
        self.fetch_stream = 0
        self.fetch_boundary = 0

    # -- configuration ------------------------------------------------------

    def configure(self, w_i: int, padding: int) -> None:
        """Select the RSRB tap for this ifmap width.  The PE rows themselves
        hold the last K pixels, so the delay line needs W_pad - K cells."""
        if padding < 0:
            raise GeometryError(f"padding {padding} must be >= 0")
        w_pad = w_i + 2 * padding
        if self.k > w_pad:
            raise GeometryError(f"padded width {w_pad} shorter than kernel {self.k}")
        delay = w_pad - self.k
        if delay > self.w_im:
            raise ConfigError(
                f"width {w_i} (padding {padding}) needs delay {delay} but the "
                f"buffer has only {self.w_im} registers"
            )
        try:
            for r in self.rsrbs:
                r.configure(delay)
        except ConfigError as exc:
            widths = [d + self.k - 2 * padding for d in achievable_delays(self.layout, self.k)]
            raise ConfigError(
                f"{exc}; achievable ifmap widths at padding {padding}: "
                f"{sorted(w for w in widths if w >= 1)}"
            ) from exc
        self._w_i, self._padding, self._w_pad = w_i, padding, w_pad
        self._w_o = w_pad - self.k + 1

    @property
    def configured_width(self):
        return self._w_i

    @property
    def configured_padding(self):
        return self._padding

    # -- per-plane schedule --------------------------------------------------

    def _is_real(self, r: int, c: int) -> bool:
        p = self._padding
        return p <= r < p + self._h_i and p <= c < p + self._w_i

    def begin(self, planes: np.ndarray, n_active: int | None = None) -> None:
        """Start a plane pass.  planes is (n_active, H_I, W_I); lanes beyond
        n_active are zero-fed and excluded from fetch counting."""
        if self._w_i is None:
            raise SimulationStateError("configure() must be called before begin()")
        planes = np.asarray(planes, dtype=np.int64)
        if planes.ndim != 3:
            raise GeometryError(f"planes must be (lanes, h, w), got {planes.shape}")
        if n_active is None:
            n_active = planes.shape[0]
        if not 0 <= n_active <= self.n_lanes or planes.shape[0] < n_active:
            raise GeometryError(f"n_active={n_active} out of range for {self.n_lanes} lanes")
        h_i, w_i = planes.shape[1], planes.shape[2]
        if w_i != self._w_i:
            raise GeometryError(f"plane width {w_i} != configured width {self._w_i}")
        p = self._padding
        h_pad = h_i + 2 * p
        if self.k > h_pad:
            raise GeometryError(f"padded height {h_pad} shorter than kernel {self.k}")
        self._h_i, self._h_pad = h_i, h_pad
        self._h_o = h_pad - self.k + 1
        self._n_active = n_active
        padded = np.zeros((self.n_lanes, h_pad, self._w_pad), dtype=np.int64)
        padded[:n_active, p:p + h_i, p:p + w_i] = planes[:n_active]
        self._padded = padded
        for r in self.rsrbs:
            r.reset()
        # window preload: every PE loads through its own external port
        self.x[:, :, :] = padded[:, 0:self.k, 0:self.k]
        self.fetch_preload += n_active * sum(
            1 for r in range(self.k) for c in range(self.k) if self._is_real(r, c)
        )
        self.pass_idx = 0
        self.cycle_in_pass = 0
        self.done = self._h_o == 0

    @property
    def h_o(self) -> int:
        return self._h_o

    @property
    def w_o(self) -> int:
        return self._w_o

    def window_sources(self) -> list[str]:
        """Provenance of the current window's right-edge/reload values, one
        label per PE row (top to bottom)."""
        k = self.k
        if self.pass_idx == 0 and self.cycle_in_pass == 0:
            return ["preload"] * k
        if self.cycle_in_pass == 0:
            return ["rsrb*k"] * (k - 1) + ["ext*k"]
        upper = "ext" if self.pass_idx == 0 else "rsrb"
        return [upper] * (k - 1) + ["ext"]

    def advance(self) -> None:
        """End-of-cycle register transfer: prepare the next window."""
        if self.done:
            raise SimulationStateError("advance() past the end of the plane")
        k = self.k
        x = self.x
        boundary = self.cycle_in_pass == self._w_o - 1
        if boundary:
            if self.pass_idx == self._h_o - 1:
                self.done = True
                return
            nxt = self.pass_idx + 1
            # rows hand their resident K values to the RSRBs, then reload
            for i in range(k - 1):
                self.rsrbs[i].push_group(x[:, i + 1, :])
            for i in range(k - 1):
                x[:, i, :] = self.rsrbs[i].pop_group()
            bottom = nxt + k - 1
            x[:, k - 1, :] = self._padded[:, bottom, 0:k]
            self.fetch_boundary += self._n_active * sum(
                1 for c in range(k) if self._is_real(bottom, c)
            )
            self.pass_idx = nxt
            self.cycle_in_pass = 0
            return
        # mid-pass: left-edge values exit into the RSRBs, everything shifts
        # one PE left, right edges take one new value each
        for i in range(k - 1):
            self.rsrbs[i].push(x[:, i + 1, 0])
        x[:, :, :k - 1] = x[:, :, 1:]
        col = self.cycle_in_pass + k
        for i in range(k - 1):
            if self.pass_idx == 0:
                x[:, i, k - 1] = self._padded[:, i, col]
                if self._is_real(i, col):
                    self.fetch_stream += self._n_active
            else:
                x[:, i, k - 1] = self.rsrbs[i].pop()
        bottom = self.pass_idx + k - 1
        x[:, k - 1, k - 1] = self._padded[:, bottom, col]
        if self._is_real(bottom, col):
            self.fetch_stream += self._n_active
        self.cycle_in_pass += 1

    @property
    def external_fetches(self) -> int:
        return self.fetch_preload + self.fetch_stream + self.fetch_boundary

    def reset_fetch_counters(self) -> None:
        self.fetch_preload = self.fetch_stream = self.fetch_boundary = 0


@dataclass
class SliceCounters:
    """Instrumented event counts for one slice.  Monotone; never reset by a
    pass.  external_input_fetches excludes synthesized padding zeros and is
    broken down by schedule phase."""

    cycles: int = 0
    external_input_fetches: int = 0
    weight_loads: int = 0
    outputs_emitted: int = 0
    preload_fetches: int = 0
    stream_fetches: int = 0
    boundary_fetches: int = 0

    def copy(self) -> "SliceCounters":
        return replace(self)


class PeSlice:
    """One slice: LaneBank of one lane plus weight registers, the column psum
    chain and the adder tree, with full event instrumentation."""

    def __init__(self, k: int, b: int, w_im: int,
                 sb_layout: tuple[SubBuffer, ...] | None = None):
        if k < 1 or b < 2 or w_im < k:
            raise ConfigError(f"bad slice parameters k={k} b={b} w_im={w_im}")
        self.k = k
        self.b = b
        self.bank = LaneBank(1, k, w_im, sb_layout)
        self.weights: np.ndarray | None = None
        self.counters = SliceCounters()
        self.max_abs_column_psum = 0
        self.max_abs_slice_out = 0
        self._busy = False
        self._out: np.ndarray | None = None
        self.trace_rows: list[tuple] = []
        self._tracing = False

    @property
    def fill_latency(self) -> int:
        return fill_latency(self.k)

    def load_weights(self, kernel) -> None:
        """K cycles: kernel rows enter the top PE row (bottom row first) and
        shift down, leaving w[i][j] = kernel[i][j]."""
        if self._busy:
            raise SimulationStateError("weight load during an active computation phase")
        kernel = np.asarray(kernel, dtype=np.int64)
        if kernel.shape != (self.k, self.k):
            raise GeometryError(f"kernel shape {kernel.shape} != ({self.k}, {self.k})")
        lo, hi = -(1 << (self.b - 1)), (1 << (self.b - 1)) - 1
        if kernel.size and (kernel.min() < lo or kernel.max() > hi):
            raise GeometryError(f"weight out of signed {self.b}-bit range")
        w = np.zeros((self.k, self.k), dtype=np.int64)
        for t in range(self.k):
            w[1:, :] = w[:-1, :]
            w[0, :] = kernel[self.k - 1 - t, :]
            self.counters.cycles += 1
        self.weights = w
        self.counters.weight_loads += self.k * self.k
        assert np.array_equal(w, kernel)

    def configure_width(self, w_i: int, padding: int) -> None:
        self.bank.configure(w_i, padding)

    # -- stepwise pass API ----------------------------------------------------

    def begin_pass(self, plane, padding: int, trace: bool = False) -> None:
        if self.weights is None:
            raise SimulationStateError("weights not loaded")
        if self._busy:
            raise SimulationStateError("previous pass not finished")
        if self.bank.configured_width is None:
            raise SimulationStateError("width not configured")
        if padding != self.bank.configured_padding:
            raise GeometryError(
                f"padding {padding} != configured {self.bank.configured_padding}"
            )
        plane = np.asarray(plane, dtype=np.int64)
        if plane.ndim != 2:
            raise GeometryError(f"plane must be 2-D, got shape {plane.shape}")
        if plane.size and (plane.min() < 0 or plane.max() >= 1 << self.b):
            raise GeometryError(f"activation out of unsigned {self.b}-bit range")
        self.bank.reset_fetch_counters()
        self.bank.begin(plane[None, :, :])
        self.counters.cycles += self.fill_latency
        self._out = np.zeros((self.bank.h_o, self.bank.w_o), dtype=np.int64)
        self._busy = True
        self._tracing = trace
        if trace:
            self.trace_rows = []

    def step_cycle(self) -> tuple[int, int, int]:
        """One compute cycle: multiply the resident window, accumulate down
        the columns, reduce through the tree, emit one output."""
        if not self._busy:
            raise SimulationStateError("no active pass")
        bank = self.bank
        x = bank.x[0]
        col_psums = (self.weights * x).sum(axis=0)
        out = adder_tree_reduce(col_psums)
        r, c = bank.pass_idx, bank.cycle_in_pass
        self._out[r, c] = out
        peak_col = int(np.abs(col_psums).max())
        if peak_col > self.max_abs_column_psum:
            self.max_abs_column_psum = peak_col
        if abs(out) > self.max_abs_slice_out:
            self.max_abs_slice_out = abs(out)
        self.counters.cycles += 1
        self.counters.outputs_emitted += 1
        if self._tracing:
            self.trace_rows.append(
                (self.counters.cycles, "|".join(bank.window_sources()), r, c)
            )
        bank.advance()
        return r, c, out

    def end_pass(self) -> tuple[np.ndarray, SliceCounters]:
        if not self._busy:
            raise SimulationStateError("no active pass")
        if not self.bank.done:
            raise SimulationStateError("pass not complete")
        self.counters.preload_fetches += self.bank.fetch_preload
        self.counters.stream_fetches += self.bank.fetch_stream
        self.counters.boundary_fetches += self.bank.fetch_boundary
        self.counters.external_input_fetches += self.bank.external_fetches
        self._busy = False
        return self._out, self.counters.copy()

    def run_pass(self, plane, padding: int, trace: bool = False) -> tuple[np.ndarray, SliceCounters]:
        """Full plane pass: emits H_O * W_O outputs in as many cycles after
        the fill latency.  The emitted plane equals the conv2d reference
        exactly."""
        self.begin_pass(plane, padding, trace=trace)
        for _ in range(self.bank.h_o * self.bank.w_o):
            self.step_cycle()
        return self.end_pass()
