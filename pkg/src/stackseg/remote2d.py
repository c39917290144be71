"""HTTP client for a remote interactive 2D segmenter (POST /v1/segment2d)."""

import requests

from .errors import ContractError, ProtocolError, TransportError
from .prompts import InteractiveSegmenter, Prompt
from .protocol import encode_frame
from .rle import decode_mask, encode_mask


class Remote2DSegmenter(InteractiveSegmenter):
    """Sends the frame plus the cumulative prompt to a segmentation backend
    and decodes the returned mask_rle."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = float(timeout)
        self._session = requests.Session()

    def predict(self, frame, prompt: Prompt):
        body: dict = {"frame": encode_frame(prompt.slice_index, frame)}
        if prompt.clicks is not None:
            body["clicks"] = [
                {"row": c.row, "col": c.col, "label": c.label} for c in prompt.clicks
            ]
        elif prompt.box is not None:
            body["box"] = list(prompt.box)
        else:
            body["mask_rle"] = encode_mask(prompt.mask)
        try:
            resp = self._session.post(
                f"{self.endpoint}/v1/segment2d", json=body, timeout=self.timeout
            )
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"cannot reach 2D segmenter: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"HTTP {resp.status_code} from 2D segmenter")
        payload = resp.json()
        try:
            return decode_mask(payload["mask_rle"], frame.shape[0], frame.shape[1])
        except (KeyError, ContractError) as exc:
            raise ProtocolError(f"bad segment2d response: {exc}") from exc
