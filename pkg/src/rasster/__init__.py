"""Random sparse step-frequency radar simulation and sparse delay-Doppler recovery."""

from .diagnostics import (
    coherence_bounds,
    coherence_tail_check,
    hit_rate,
    mutual_coherence,
    spark_certify,
)
from .errors import RassterError
from .forward import (
    DictionaryMatrix,
    build_dictionary,
    inject_interference,
    inject_noise,
    measure,
    synthesize_echoes,
)
from .recovery import (
    RecoveryConfig,
    StopMode,
    decode_support,
    exhaustive_l0,
    glrt_threshold,
    omp_recover,
    screen_bins,
)
from .scene import Layout, Target, TargetScene, derive_grid, random_scene
from .waveform import (
    CarrierGrid,
    FrequencyPlan,
    PlanKind,
    SubbandSet,
    effective_bandwidth,
    effective_step,
    interference_pulse_set,
    make_linear_plan,
    make_random_full_plan,
    make_sparse_random_plan,
    reference_grid,
)

__version__ = "0.1.0"
