"""Request/response models for the annotation service."""

from pydantic import BaseModel, Field


class WindowModel(BaseModel):
    mode: str = "percentile"
    lo: float = 0.5
    hi: float = 99.5


class CreateSessionRequest(BaseModel):
    path: str
    gt_path: str | None = None
    axis: int = 2
    window: WindowModel | None = None
    modality_tag: str = ""
    segmenter: str = "reference"
    segmenter_endpoint: str | None = None


class SessionInfo(BaseModel):
    session_id: str
    n_slices: int
    frame_height: int
    frame_width: int
    axis: int
    active_slice: int
    status: str
    has_gt: bool
    prompt_count: int
    degenerate_window: bool = False


class ClickRequest(BaseModel):
    slice: int = Field(ge=0)
    row: int
    col: int
    label: str  # "foreground" | "background"


class MaskPromptRequest(BaseModel):
    slice: int = Field(ge=0)
    mask_rle: list[int]


class PredictionResponse(BaseModel):
    slice: int
    round: int
    mask_rle: list[int]
    dice: float | None = None


class PropagateRequest(BaseModel):
    backend: str = "reference"  # "reference" | "remote"
    endpoint: str | None = None


class ProgressResponse(BaseModel):
    status: str  # session status
    job: str  # none | running | done | error
    done: int
    total: int
    provenance: list[str | None] | None = None
    error: str | None = None


class MaskResponse(BaseModel):
    slice: int
    mask_rle: list[int]
    provenance: str


class MetricsResponse(BaseModel):
    dice: float
    nsd: float
    hd95: float | None
    nsd_delta: float


class ErrorBody(BaseModel):
    code: str
    message: str
    field: str | None = None
