"""Dense matrix-multiplication benchmark laboratory."""

from ._core import (
    CSV_HEADER,
    ConfigError,
    DeviceInfo,
    DeviceUnavailable,
    EmptyReport,
    GemmlabError,
    InsufficientData,
    InvalidDimension,
    Measurement,
    MeasurementCorrupt,
    ParseError,
    ShapeError,
    SpeedupRow,
    SpeedupTable,
    compare,
    compute_speedups,
    emit_csv,
    emit_figures,
    identity_matrix,
    make_speedup_row,
    matmul_parallel_cpu,
    matmul_sequential,
    parse_csv,
    probe_device,
    random_matrix,
    render_table,
    run_plan,
    zero_matrix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
