"""Cycle-accurate simulator and analytical cost model for a weight-stationary
systolic CNN accelerator with triangular input reuse."""

from .analytics import (
    AccessReport,
    CycleModelReport,
    DesignPoint,
    access_model,
    clock_cycles,
    compare_reports,
    cycle_model_report,
    dse_sweep,
    layer_throughput,
    load_eyeriss_reference,
    network_access_report,
    network_throughput,
    peak_throughput,
    pe_utilization,
)
from .engine_config import (
    BitWidths,
    EngineParams,
    SubBuffer,
    derive_bitwidths,
    io_bandwidth_bits,
    layout_for_widths,
    load_engine_file,
    psum_buffer_bits,
    validate,
)
from .engine_sim import Engine, EngineCounters, FaultSpec, plan_steps, run_network
from .errors import (
    AccumulatorOverflowError,
    ConfigError,
    GeometryError,
    SimulationStateError,
    TriarrayError,
    UnsupportedFeatureError,
    VerificationError,
)
from .oracle import FeatureMap, FilterSet, QuantSpec, conv2d, conv3d_layer, quantize_ofmap
from .slice_sim import LaneBank, PeSlice, Rsrb, SliceCounters
from .workload import (
    CnnModel,
    LayerShape,
    builtin_vgg16,
    infer_output_dims,
    layer_footprint,
    load_model_file,
    ops_count,
    scale_model,
)

__version__ = "0.1.0"
