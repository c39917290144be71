"""stackseg: interactive 3D segmentation by slice annotation and propagation.

Annotate one slice of a volumetric scan (clicks or a full mask), propagate the
mask through the rest of the stack as if the slices were video frames, and
evaluate with overlap and surface-distance metrics. Ships an offline reference
propagator/segmenter, a benchmark harness, and an HTTP annotation service.
"""

from .errors import (
    ContractError,
    MetricUndefinedError,
    ProtocolError,
    TransportError,
    UnsupportedVolumeError,
    VolumeFormatError,
)
from .metrics import (
    CaseMetrics,
    RoundLog,
    Tolerance,
    aggregate,
    dice,
    dice_growth_per_point,
    extract_surface,
    hd95,
    masked_metrics,
    nsd,
    salient_slices,
)
from .nifti import load_volume, save_mask, save_volume
from .phantom import PhantomSpec, make_phantom
from .prompts import (
    Click,
    InteractiveSegmenter,
    Prompt,
    initial_click,
    next_click,
    reference_2d_segmenter,
    run_click_session,
    select_center_slice,
)
from .propagation import (
    IdentityPropagator,
    PropagationResult,
    Propagator,
    plan,
    propagate,
    reference_propagator,
    remote_propagator,
)
from .rle import decode_mask, encode_mask
from .volume import (
    FrameStack,
    MaskVolume,
    Volume,
    WindowSpec,
    slice_of,
    to_frames,
)

__version__ = "0.1.0"
