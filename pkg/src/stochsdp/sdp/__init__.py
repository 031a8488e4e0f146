"""Block SDP representation, interior-point solver and SDPA interchange."""

from .ipm import DEFAULT_OPTIONS, SolverOptions, solve
from .problem import BlockRows, BlockSdp, SdpBuilder, SdpSolution, Status

__all__ = [
    "BlockRows",
    "BlockSdp",
    "DEFAULT_OPTIONS",
    "SdpBuilder",
    "SdpSolution",
    "SolverOptions",
    "Status",
    "solve",
]

from .margin import MarginFailure, MarginResult, strict_feasibility_margin  # noqa: E402
from .sdpa import dumps as sdpa_dumps, loads as sdpa_loads, read_sdpa, write_sdpa  # noqa: E402

__all__ += [
    "MarginFailure",
    "MarginResult",
    "read_sdpa",
    "sdpa_dumps",
    "sdpa_loads",
    "strict_feasibility_margin",
    "write_sdpa",
]
