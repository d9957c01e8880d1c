"""Two-level-memory-aware sparse matrix-matrix multiplication.

A row-wise two-phase SpGEMM kernel with compression and hashmap
accumulators, chunked execution orders for two-tier memories with an
auditable copy ledger, a cost-based chunking heuristic, selective data
placement under a linear traffic model, deterministic problem generators,
and a masked-multiply triangle counter.
"""

from .accumulator import HashmapAccumulator, MemoryPool, accumulator_capacity
from .chunking import (GPU_CHUNK1_AC_IN_PLACE, GPU_CHUNK2_B_IN_PLACE,
                       KNL_CHUNK, ChunkPlan, RowPartition,
                       binary_search_partition, copy_cost_chunk1,
                       copy_cost_chunk2, decide_chunking, execute_plan,
                       gpu_chunk_multiply_1, gpu_chunk_multiply_2,
                       knl_chunk_multiply, plan_for_multiply)
from .csr import (CsrMatrix, canonicalize, matrices_equal, products_match,
                  slice_rows, transpose, validate)
from .errors import (CapacityError, DimensionError, GraphError, GridError,
                     KernelError, MatrixMarketError, MatrixValidationError,
                     PlacementError, TieredSpgemmError, UnsplittableRowError,
                     VerifyError)
from .generators import (BIGSTAR2D, BRICK3D, ELASTICITY3D, LAPLACE3D,
                         STENCIL_KINDS, StencilSpec, generate_interpolation,
                         generate_random_rhs, generate_stencil,
                         grid_for_target_bytes, stencil_byte_size, stencil_nnz)
from .kernel import (CompressedMatrix, RowRange, compress,
                     count_multiplications, masked_row_intersect_count,
                     multiply, spgemm_numeric, spgemm_numeric_fused,
                     spgemm_symbolic)
from .matrix_market import read_matrix_market, write_matrix_market
from .memory import (AccessStats, CopyLedger, MemoryModel, MemorySpaceSpec,
                     PlacementPolicy, compute_access_stats, default_model,
                     estimate_kernel_time, simulate_copy, validate_placement)
from .rng import PortableRng
from .triangles import (count_triangles, degree_sort_permutation, load_graph,
                        lower_triangle, to_undirected_pattern)

__version__ = "0.1.0"
