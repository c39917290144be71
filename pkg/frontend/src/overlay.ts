/**
 * Mask compositing. The prediction is tinted blue and the ground truth
 * orange (the published visual convention); where both cover a pixel the two
 * tints are averaged. All math happens on raw buffers so it is testable
 * without a DOM; the canvas layer just wraps the result in ImageData.
 */

export class OverlayShapeError extends Error {}

export const PREDICTION_TINT: [number, number, number] = [59, 130, 246]; // blue
export const GROUND_TRUTH_TINT: [number, number, number] = [249, 115, 22]; // orange

export function compositeOverlay(
  frame: Uint8Array,
  height: number,
  width: number,
  prediction: Uint8Array | null,
  groundTruth: Uint8Array | null,
  opacity: number
): Uint8ClampedArray {
  const total = height * width;
  if (frame.length !== total) {
    throw new OverlayShapeError(`frame has ${frame.length} pixels, expected ${total}`);
  }
  if (prediction !== null && prediction.length !== total) {
    throw new OverlayShapeError(`prediction has ${prediction.length} pixels, expected ${total}`);
  }
  if (groundTruth !== null && groundTruth.length !== total) {
    throw new OverlayShapeError(`ground truth has ${groundTruth.length} pixels, expected ${total}`);
  }
  const alpha = Math.min(Math.max(opacity, 0), 1);
  const out = new Uint8ClampedArray(total * 4);
  for (let i = 0; i < total; i++) {
    const gray = frame[i];
    let r = gray;
    let g = gray;
    let b = gray;
    const inPred = prediction !== null && prediction[i] !== 0;
    const inGt = groundTruth !== null && groundTruth[i] !== 0;
    if (inPred || inGt) {
      let tint: [number, number, number];
      if (inPred && inGt) {
        tint = [
          (PREDICTION_TINT[0] + GROUND_TRUTH_TINT[0]) / 2,
          (PREDICTION_TINT[1] + GROUND_TRUTH_TINT[1]) / 2,
          (PREDICTION_TINT[2] + GROUND_TRUTH_TINT[2]) / 2,
        ];
      } else if (inPred) {
        tint = PREDICTION_TINT;
      } else {
        tint = GROUND_TRUTH_TINT;
      }
      r = gray * (1 - alpha) + tint[0] * alpha;
      g = gray * (1 - alpha) + tint[1] * alpha;
      b = gray * (1 - alpha) + tint[2] * alpha;
    }
    const o = i * 4;
    out[o] = r;
    out[o + 1] = g;
    out[o + 2] = b;
    out[o + 3] = 255;
  }
  return out;
}

/**
 * Draw a composited slice onto a canvas. The RGBA buffer is computed in full
 * before anything touches the canvas, so a shape error never leaves a
 * partial draw behind.
 */
export function renderSlice(
  ctx: CanvasRenderingContext2D,
  frame: Uint8Array,
  height: number,
  width: number,
  prediction: Uint8Array | null,
  groundTruth: Uint8Array | null,
  opacity: number
): void {
  const rgba = compositeOverlay(frame, height, width, prediction, groundTruth, opacity);
  ctx.putImageData(new ImageData(rgba, width, height), 0, 0);
}
